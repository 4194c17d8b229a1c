import numpy as np
import pytest

from bfcsim import (
    CoincidenceRecord,
    CorrelationTrace,
    TraceKind,
    read_histogram_csv,
    read_metadata,
    read_timetags,
    read_trace_csv,
    write_histogram_csv,
    write_metadata,
    write_record_histogram,
    write_timetags,
    write_trace_csv,
)


def _trace(stderr=False, kind=TraceKind.DIMENSIONLESS):
    tau = np.arange(-20, 21) * 7e-12
    values = 1.0 + np.exp(-((tau / 5e-11) ** 2)) * (1.0 + 0.1 * np.sin(tau / 1e-11))
    err = 0.01 * np.sqrt(values) if stderr else None
    return CorrelationTrace(tau, values, kind, stderr=err)


def test_trace_roundtrip_is_byte_identical(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    tr = _trace(stderr=True)
    write_trace_csv(p1, tr)
    back = read_trace_csv(p1)
    np.testing.assert_array_equal(back.tau_axis, tr.tau_axis)
    np.testing.assert_array_equal(back.values, tr.values)
    np.testing.assert_array_equal(back.stderr, tr.stderr)
    assert back.kind is tr.kind
    write_trace_csv(p2, back)
    assert p1.read_bytes() == p2.read_bytes()


def test_trace_kind_header_wins(tmp_path):
    p = tmp_path / "t.csv"
    write_trace_csv(p, _trace(kind=TraceKind.DENSITY))
    assert "# kind=density" in p.read_text()
    back = read_trace_csv(p)
    assert back.kind is TraceKind.DENSITY
    # explicit kind is only a fallback for headerless files
    back2 = read_trace_csv(p, kind=TraceKind.DIMENSIONLESS)
    assert back2.kind is TraceKind.DENSITY


def test_trace_extra_meta_columns(tmp_path):
    tau = np.arange(-5, 6) * 1e-11
    base = 1.0 + np.exp(-((tau / 3e-11) ** 2))
    tr = CorrelationTrace(
        tau, base, TraceKind.DIMENSIONLESS,
        meta={"pedestal": base * 0.5, "note": "x"},
    )
    p = tmp_path / "t.csv"
    write_trace_csv(p, tr)
    head = p.read_text().splitlines()
    assert any("pedestal" in line for line in head[:3])
    back = read_trace_csv(p)
    np.testing.assert_allclose(back.meta["pedestal"], base * 0.5)


def test_histogram_roundtrip(tmp_path):
    p = tmp_path / "h.csv"
    delay_ps = np.arange(-3, 4) * 64.0
    counts = np.array([0, 2, 5, 40, 4, 1, 0])
    write_histogram_csv(p, delay_ps, counts)
    assert p.read_text().splitlines()[0] == "delay_ps,counts"
    d, c = read_histogram_csv(p)
    np.testing.assert_array_equal(d, delay_ps)
    np.testing.assert_array_equal(c, counts)
    assert np.issubdtype(c.dtype, np.integer)


def test_record_histogram_export(tmp_path):
    rec = CoincidenceRecord(
        histogram=np.array([1, 7, 2]), bin_width=64e-12, acq_time=1.0,
        singles_a=100, singles_b=90, seed=3,
    )
    p = tmp_path / "r.csv"
    write_record_histogram(p, rec)
    d, c = read_histogram_csv(p)
    np.testing.assert_allclose(d, [-64.0, 0.0, 64.0])
    np.testing.assert_array_equal(c, rec.histogram)


def test_timetags_roundtrip(tmp_path):
    times_a = np.array([5e-9, 1e-9, 3e-9])
    times_b = np.array([2e-9, 4e-9])
    rec = CoincidenceRecord(
        histogram=np.array([0, 1, 0]), bin_width=1e-9, acq_time=1e-8,
        singles_a=3, singles_b=2, seed=17, rep_period=25e-9,
        times_a=times_a, times_b=times_b,
    )
    p = tmp_path / "tags.txt"
    write_timetags(p, rec)
    lines = p.read_text().splitlines()
    assert lines[0] == "#seed=17"
    assert lines[1] == "#acq_ps=10000"
    assert lines[2] == "#rep_ps=25000"
    arms = [int(line.split("\t")[0]) for line in lines[3:]]
    assert arms == sorted(arms)
    ta, tb, seed, acq, rep = read_timetags(p)
    np.testing.assert_allclose(ta, np.sort(times_a))
    np.testing.assert_allclose(tb, np.sort(times_b))
    assert seed == 17 and acq == 1e-8 and rep == 25e-9


def test_timetags_require_kept_times(tmp_path):
    rec = CoincidenceRecord(
        histogram=np.array([0, 1, 0]), bin_width=1e-9, acq_time=1e-8,
        singles_a=3, singles_b=2, seed=17,
    )
    with pytest.raises(ValueError):
        write_timetags(tmp_path / "tags.txt", rec)


def test_metadata_roundtrip_converts_numpy(tmp_path):
    p = tmp_path / "meta.json"
    payload = {
        "zeta": np.float64(1.5),
        "alpha": np.int64(3),
        "arr": np.arange(3),
        "nested": {"flag": np.bool_(True)},
    }
    write_metadata(p, payload)
    text = p.read_text()
    assert text.index('"alpha"') < text.index('"zeta"')  # keys sorted
    back = read_metadata(p)
    assert back["zeta"] == 1.5 and back["alpha"] == 3
    assert back["arr"] == [0, 1, 2]
    assert back["nested"]["flag"] is True
