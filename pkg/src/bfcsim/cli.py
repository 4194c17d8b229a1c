"""Batch front-end: reads a TOML experiment config, runs the analytic or
Monte Carlo pipeline for its mode, and writes traces, histograms, timetag
streams, and a metadata document into an output directory.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 comparison failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .comb import CombSpec, JsaGrid, build_pulsed_jsa
from .config import ExperimentConfig, load_config
from .correlations import (
    CorrelationTrace,
    comb_density_from_island,
    cross_correlation,
    g2_cw,
    g2_density_components,
    g2_density_direct_quadrature,
    g2_density_numeric,
    integrated_g2,
    jitter_average,
)
from .counting import (
    estimate_g2_cw,
    estimate_g2_density,
    simulate_from_density,
    simulate_thermal_signal,
)
from .errors import (
    AliasingError,
    ConfigError,
    FitConvergenceError,
    NoDataError,
    ResolutionError,
    ResourceLimitError,
    TruncationError,
)
from .fileio import (
    read_trace_csv,
    write_metadata,
    write_record_histogram,
    write_timetags,
    write_trace_csv,
)
from .fitting import fit_cw_model, measure_fwhm, visibility_and_threshold
from .modulation import modulated_comb
from .schmidt import gbar_from_k, schmidt_number
from .units import TWO_PI, angular_to_ghz


def _effective_comb(cfg: ExperimentConfig):
    if cfg.modulation is None:
        return cfg.comb, None
    rescaled = modulated_comb(cfg.comb, cfg.modulation)
    info = {
        "parent_fsr_ghz": angular_to_ghz(cfg.comb.fsr_angular),
        "rf_ghz": angular_to_ghz(cfg.modulation.rf_angular),
        "rescaled_spacing_ghz": angular_to_ghz(rescaled.fsr_angular),
        "dimension": int(rescaled.dimension),
    }
    return rescaled, info


def _island_comb(comb: CombSpec) -> CombSpec:
    return CombSpec(
        fsr_angular=comb.fsr_angular,
        linewidth_angular=comb.linewidth_angular,
        dimension=1,
        first_bin=comb.first_bin,
        pump_center_angular=comb.pump_center_angular,
    )


def _coherence_time(comb: CombSpec) -> float:
    return TWO_PI / comb.linewidth_angular


def _cw_axis(comb: CombSpec, bin_width: float) -> np.ndarray:
    tau_c = _coherence_time(comb)
    span = 12.0 * tau_c
    step = min(bin_width / 4.0, tau_c / 24.0)
    if comb.dimension > 1:
        period = TWO_PI / comb.fsr_angular
        span = max(span, 4.5 * period)
        step = min(step, period / 24.0)
    n = min(int(math.ceil(span / step)), 1 << 18)
    return np.arange(-n, n + 1) * step


def _sim_max_delay(comb: CombSpec, bin_width: float) -> float:
    tau_c = _coherence_time(comb)
    span = 6.0 * tau_c
    if comb.dimension > 1:
        span = max(span, 4.25 * TWO_PI / comb.fsr_angular)
    return math.ceil(span / bin_width) * bin_width


def _density_axis(comb: CombSpec, pump, bin_width: float) -> np.ndarray:
    tau_c = _coherence_time(comb)
    span = 6.0 * tau_c + 4.0 / max(pump.amplitude_sigma, 1e-3 / tau_c)
    if pump.repetition_period > 0:
        span = min(span, 0.45 * pump.repetition_period)
    step = min(bin_width / 4.0, tau_c / 48.0)
    n = min(int(math.ceil(span / step)), 1 << 18)
    return np.arange(-n, n + 1) * step


def _need_run_value(cfg: ExperimentConfig, name: str):
    val = getattr(cfg, name)
    if val is None:
        raise ConfigError(f"run.{name} is required for mode {cfg.mode!r}")
    return val


def _oracle_report(jsa: JsaGrid, linewidth_angular: float, points: int = 24) -> dict:
    """Cross-check the kernel engine against direct nested quadrature on a
    coarsened copy of the amplitude grid.

    The copy is cropped to the central few linewidths before subsampling so
    its conjugate time window still covers the coherence decay; on such a
    grid the two evaluations agree to numerical precision.
    """
    center = float(jsa.signal_axis.mean())
    keep = np.abs(jsa.signal_axis - center) <= 4.0 * linewidth_angular
    lo, hi = np.flatnonzero(keep)[[0, -1]]
    stride = max((hi - lo) // (points - 1), 1)
    sl = slice(lo, hi + 1, stride)
    sub = JsaGrid(jsa.signal_axis[sl], jsa.idler_axis[sl], jsa.amplitude[sl, sl])
    t_lat = TWO_PI * np.fft.fftfreq(2 * sub.amplitude.shape[0], d=sub.signal_step)
    dt = float(np.sort(t_lat)[1] - np.sort(t_lat)[0])
    tau = dt * np.arange(0, 8)
    fast = g2_density_numeric(sub, tau, edge_tol=1.0)
    slow = g2_density_direct_quadrature(sub, tau)
    scale = float(fast.values.max())
    err = float(np.max(np.abs(fast.values - slow.values))) / scale
    return {
        "grid_points": int(sub.amplitude.shape[0]),
        "compared_delays": int(tau.size),
        "max_rel_err": err,
    }


def _analytic_cw(cfg: ExperimentConfig, out: Path) -> dict:
    comb_eff, rescale = _effective_comb(cfg)
    det = cfg.detector
    tau = _cw_axis(comb_eff, det.bin_width)
    model = g2_cw(comb_eff, tau)
    smeared = jitter_average(model, det.jitter_fwhm, det.bin_width)
    write_trace_csv(out / "trace_model.csv", model)
    write_trace_csv(out / "trace_smeared.csv", smeared)
    meta = {
        "mode": cfg.mode,
        "dimension": int(comb_eff.dimension),
        "gamma_ghz": angular_to_ghz(comb_eff.linewidth_angular),
        "spacing_ghz": angular_to_ghz(comb_eff.fsr_angular),
        "peak_model": float(model.values[tau.size // 2]),
        "peak_smeared": float(smeared.peak()),
        "fwhm_central_ps": measure_fwhm(model, "central-peak") * 1e12,
    }
    if comb_eff.dimension > 1:
        meta["fwhm_beat_ps"] = measure_fwhm(model, "beat-feature") * 1e12
        meta["fringe_period_ps"] = TWO_PI / comb_eff.fsr_angular * 1e12
    if rescale:
        meta["rescale"] = rescale
    return meta


def _analytic_pulsed(cfg: ExperimentConfig, out: Path, oracle: bool) -> dict:
    comb_eff, rescale = _effective_comb(cfg)
    det = cfg.detector
    island = build_pulsed_jsa(_island_comb(comb_eff), cfg.pump)
    tau = _density_axis(comb_eff, cfg.pump, det.bin_width)
    total_1, ped, spk = g2_density_components(island, tau)
    if comb_eff.dimension > 1:
        total = comb_density_from_island(ped, spk, comb_eff)
    else:
        total = total_1
    smeared = jitter_average(total, det.jitter_fwhm, det.bin_width)
    write_trace_csv(out / "density_model.csv", total)
    write_trace_csv(out / "density_pedestal.csv", ped)
    write_trace_csv(out / "density_spike.csv", spk)
    write_trace_csv(out / "density_smeared.csv", smeared)
    result = schmidt_number(island)
    k = result.schmidt_number
    gbar = integrated_g2(total)
    meta = {
        "mode": cfg.mode,
        "dimension": int(comb_eff.dimension),
        "gamma_ghz": angular_to_ghz(comb_eff.linewidth_angular),
        "gbar": gbar,
        "gbar_smeared_area": float(smeared.area()),
        "schmidt_number": k,
        "gbar_from_schmidt": gbar_from_k(k, comb_eff.dimension),
        "mode_weights": [float(w) for w in result.singular_weights[:8]],
    }
    if rescale:
        meta["rescale"] = rescale
    if oracle:
        meta["oracle"] = _oracle_report(island, cfg.comb.linewidth_angular)
    return meta


def _cross_axis(comb: CombSpec, bin_width: float) -> np.ndarray:
    tau_c = _coherence_time(comb)
    span = 8.0 * tau_c + math.pi / comb.fsr_angular
    step = min(bin_width / 4.0, tau_c / 48.0, TWO_PI / comb.fsr_angular / 24.0)
    n = min(int(math.ceil(span / step)), 1 << 18)
    return np.arange(-n, n + 1) * step


def _analytic_cross(cfg: ExperimentConfig, out: Path) -> dict:
    comb_eff, rescale = _effective_comb(cfg)
    tau = _cross_axis(comb_eff, cfg.detector.bin_width)
    center = tau.size // 2
    rates = []
    shifts = []
    for i, phi in enumerate(cfg.phases):
        tr = cross_correlation(comb_eff, phi, tau)
        write_trace_csv(out / f"cross_trace_{i:03d}.csv", tr)
        rates.append(float(tr.values[center]))
        shifts.append(float(tr.meta["delay_shift"]))
    phis = np.asarray(cfg.phases, dtype=float)
    _write_fringe(out / "fringe_analytic.csv", phis, np.asarray(rates))
    meta = {
        "mode": cfg.mode,
        "dimension": int(comb_eff.dimension),
        "phases_rad": [float(p) for p in phis],
        "zero_delay_rates": rates,
        "delay_shifts_ps": [s * 1e12 for s in shifts],
    }
    if rescale:
        meta["rescale"] = rescale
    span = float(phis[-1] - phis[0]) if phis.size > 1 else 0.0
    if span >= TWO_PI * (1.0 - 1e-9):
        vis = visibility_and_threshold(phis, np.asarray(rates), comb_eff.dimension)
        meta["visibility"] = {
            "fitted": vis.visibility,
            "raw": vis.raw_visibility,
            "threshold": vis.threshold,
            "violates": vis.violates,
        }
    else:
        meta["visibility"] = "skipped: phase sweep covers less than one period"
    return meta


def _write_fringe(path: Path, phis: np.ndarray, values: np.ndarray) -> None:
    lines = ["phi_rad,value"]
    for p, v in zip(phis, values):
        lines.append(f"{float(p)!r},{float(v)!r}")
    path.write_text("\n".join(lines) + "\n")


def run_analytic(cfg: ExperimentConfig, out: Path, oracle: bool = False) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "cw-auto":
        meta = _analytic_cw(cfg, out)
    elif cfg.mode == "pulsed-auto":
        meta = _analytic_pulsed(cfg, out, oracle)
    else:
        meta = _analytic_cross(cfg, out)
    write_metadata(out / "metadata.json", meta)
    return meta


def _simulate_cw_mode(cfg: ExperimentConfig, out: Path) -> dict:
    comb_eff, rescale = _effective_comb(cfg)
    det = cfg.detector
    brightness = _need_run_value(cfg, "brightness")
    max_delay = _sim_max_delay(comb_eff, det.bin_width)
    rec = simulate_thermal_signal(
        comb_eff, cfg.pump, brightness, det, cfg.acq_time, cfg.seed,
        max_delay=max_delay, keep_timetags=True,
    )
    est = estimate_g2_cw(rec)
    write_timetags(out / "timetags.txt", rec)
    write_record_histogram(out / "histogram.csv", rec)
    write_trace_csv(out / "trace_estimated.csv", est)
    meta = {
        "mode": cfg.mode,
        "dimension": int(comb_eff.dimension),
        "seed": int(rec.seed),
        "singles_a": rec.singles_a,
        "singles_b": rec.singles_b,
        "coincidences": rec.total_coincidences,
        "acq_s": rec.acq_time,
        "peak_estimate": float(est.values[est.tau_axis.size // 2]),
    }
    if rescale:
        meta["rescale"] = rescale
    if comb_eff.dimension > 1:
        fit = fit_cw_model(
            est, dimension=comb_eff.dimension, jitter_fwhm=det.jitter_fwhm
        )
        meta["fit"] = {
            "gamma_ghz": angular_to_ghz(fit.gamma_angular),
            "spacing_ghz": angular_to_ghz(fit.delta_omega_angular),
            "residual_rms": fit.residual_rms,
            "iterations": fit.iterations,
            "converged": fit.converged,
        }
    return meta


def _simulate_pulsed_mode(cfg: ExperimentConfig, out: Path) -> dict:
    comb_eff, rescale = _effective_comb(cfg)
    det = cfg.detector
    brightness = _need_run_value(cfg, "brightness")
    island = build_pulsed_jsa(_island_comb(comb_eff), cfg.pump)
    max_delay = min(
        _sim_max_delay(comb_eff, det.bin_width),
        math.floor(0.45 * cfg.pump.repetition_period / det.bin_width)
        * det.bin_width,
    )
    rec = simulate_thermal_signal(
        island, cfg.pump, brightness, det, cfg.acq_time, cfg.seed,
        comb=comb_eff if comb_eff.dimension > 1 else None,
        max_delay=max_delay, keep_timetags=True,
    )
    est = estimate_g2_density(rec)
    write_timetags(out / "timetags.txt", rec)
    write_record_histogram(out / "histogram.csv", rec)
    write_trace_csv(out / "trace_estimated.csv", est)
    result = schmidt_number(island)
    meta = {
        "mode": cfg.mode,
        "dimension": int(comb_eff.dimension),
        "seed": int(rec.seed),
        "singles_a": rec.singles_a,
        "singles_b": rec.singles_b,
        "coincidences": rec.total_coincidences,
        "gbar_estimate": float(np.trapezoid(est.values, est.tau_axis)),
        "schmidt_number": result.schmidt_number,
        "gbar_from_schmidt": gbar_from_k(
            result.schmidt_number, comb_eff.dimension
        ),
    }
    if rescale:
        meta["rescale"] = rescale
    return meta


def _simulate_cross_mode(cfg: ExperimentConfig, out: Path) -> dict:
    comb_eff, rescale = _effective_comb(cfg)
    det = cfg.detector
    pair_rate = _need_run_value(cfg, "pair_rate")
    car = _need_run_value(cfg, "car")
    tau = _cross_axis(comb_eff, det.bin_width)
    # fringe observable: counts in a fixed window at zero delay, well
    # inside one fringe period
    window = max(2.0 * det.bin_width, 1.5 * det.jitter_fwhm)
    if comb_eff.dimension > 1:
        period = TWO_PI / comb_eff.fsr_angular
        window = max(min(window, 0.21 * period), det.bin_width)
    counts = []
    peak_positions = []
    shifts = []
    for i, phi in enumerate(cfg.phases):
        tr = cross_correlation(comb_eff, phi, tau)
        rec = simulate_from_density(
            tr, pair_rate, car, det, cfg.acq_time, cfg.seed + i
        )
        write_record_histogram(out / f"histogram_{i:03d}.csv", rec)
        axis = rec.delay_axis
        in_peak = np.abs(axis) <= window
        counts.append(int(rec.histogram[in_peak].sum()))
        peak_positions.append(float(axis[int(np.argmax(rec.histogram))]))
        shifts.append(float(tr.meta["delay_shift"]))
    phis = np.asarray(cfg.phases, dtype=float)
    fringe = np.asarray(counts, dtype=float)
    _write_fringe(out / "fringe_simulated.csv", phis, fringe)
    meta = {
        "mode": cfg.mode,
        "dimension": int(comb_eff.dimension),
        "seed": int(cfg.seed),
        "phases_rad": [float(p) for p in phis],
        "peak_window_counts": counts,
        "histogram_peak_positions_ps": [p * 1e12 for p in peak_positions],
        "pattern_shifts_ps": [s * 1e12 for s in shifts],
    }
    if rescale:
        meta["rescale"] = rescale
    span = float(phis[-1] - phis[0]) if phis.size > 1 else 0.0
    if span >= TWO_PI * (1.0 - 1e-9):
        vis = visibility_and_threshold(phis, fringe, comb_eff.dimension)
        meta["visibility"] = {
            "fitted": vis.visibility,
            "raw": vis.raw_visibility,
            "threshold": vis.threshold,
            "violates": vis.violates,
        }
    else:
        meta["visibility"] = "skipped: phase sweep covers less than one period"
    return meta


def run_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "cw-auto":
        meta = _simulate_cw_mode(cfg, out)
    elif cfg.mode == "pulsed-auto":
        meta = _simulate_pulsed_mode(cfg, out)
    else:
        meta = _simulate_cross_mode(cfg, out)
    write_metadata(out / "metadata.json", meta)
    return meta


def run_fit(trace_path: Path, cfg: ExperimentConfig | None, out: Path | None) -> dict:
    trace = read_trace_csv(trace_path)
    dimension = None
    jitter = 0.0
    if cfg is not None:
        comb_eff, _ = _effective_comb(cfg)
        dimension = comb_eff.dimension
        jitter = cfg.detector.jitter_fwhm
    fit = fit_cw_model(trace, dimension=dimension, jitter_fwhm=jitter)
    meta = {
        "trace": str(trace_path),
        "gamma_ghz": angular_to_ghz(fit.gamma_angular),
        "spacing_ghz": angular_to_ghz(fit.delta_omega_angular),
        "residual_rms": fit.residual_rms,
        "iterations": fit.iterations,
        "converged": fit.converged,
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_metadata(out / "fit.json", meta)
    return meta


def run_schmidt(cfg: ExperimentConfig, out: Path | None) -> dict:
    if not cfg.pump.is_pulsed:
        raise ConfigError("schmidt analysis needs a pulsed-pump configuration")
    comb_eff, _ = _effective_comb(cfg)
    island = build_pulsed_jsa(_island_comb(comb_eff), cfg.pump)
    result = schmidt_number(island)
    meta = {
        "schmidt_number": result.schmidt_number,
        "purity": result.purity,
        "modes_retained": result.mode_count_retained,
        "mode_weights": [float(w) for w in result.singular_weights[:16]],
        "gbar_from_schmidt": gbar_from_k(
            result.schmidt_number, comb_eff.dimension
        ),
        "dimension": int(comb_eff.dimension),
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_metadata(out / "schmidt.json", meta)
    return meta


def run_compare(
    path_a: Path,
    path_b: Path,
    resample: bool = False,
    chi2_max: float = 1.5,
    rtol: float = 0.05,
) -> tuple[dict, bool]:
    """Pointwise comparison of two trace files; returns (report, passed)."""
    ta = read_trace_csv(path_a)
    tb = read_trace_csv(path_b)
    grids_match = ta.tau_axis.size == tb.tau_axis.size and np.allclose(
        ta.tau_axis, tb.tau_axis, rtol=0.0, atol=1e-15
    )
    if not grids_match:
        if not resample:
            return (
                {"error": "delay grids differ; pass --resample to interpolate"},
                False,
            )
        vals_b = np.interp(ta.tau_axis, tb.tau_axis, tb.values)
        err_b = (
            np.interp(ta.tau_axis, tb.tau_axis, tb.stderr)
            if tb.stderr is not None
            else None
        )
    else:
        vals_b = tb.values
        err_b = tb.stderr

    residual = ta.values - vals_b
    sigma = err_b if err_b is not None else ta.stderr
    report: dict = {
        "points": int(ta.tau_axis.size),
        "max_abs_residual": float(np.max(np.abs(residual))),
        "rms_residual": float(np.sqrt(np.mean(residual**2))),
        "resampled": bool(not grids_match),
    }
    if sigma is not None:
        safe = np.where(sigma > 0, sigma, np.inf)
        z = residual / safe
        exact = (sigma == 0) & (residual != 0)
        chi2 = float(np.mean(z**2)) if not np.any(exact) else math.inf
        report["reduced_chi2"] = chi2
        passed = chi2 <= chi2_max
    else:
        scale = float(np.max(np.abs(ta.values))) or 1.0
        rel = report["max_abs_residual"] / scale
        report["max_rel_residual"] = rel
        passed = rel <= rtol
    report["passed"] = passed
    return report, passed


def _print_meta(meta: dict) -> None:
    for key in sorted(meta):
        print(f"{key}: {meta[key]}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bfcsim",
        description="Frequency-bin pair-source correlation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, need_config=True):
        p.add_argument("--config", type=Path, required=need_config)
        p.add_argument("--out", type=Path, default=Path("."))
        p.add_argument("--seed", type=int, default=None,
                       help="override the seed in the config")
        p.add_argument("--oracle", action="store_true",
                       help="run the slow direct-quadrature cross-check")

    add_common(sub.add_parser("analytic", help="exact-model traces"))
    add_common(sub.add_parser("simulate", help="Monte Carlo pipeline"))

    p_fit = sub.add_parser("fit", help="fit a stored trace")
    p_fit.add_argument("trace", type=Path)
    p_fit.add_argument("--config", type=Path, default=None)
    p_fit.add_argument("--out", type=Path, default=None)

    p_schmidt = sub.add_parser("schmidt", help="mode decomposition figures")
    p_schmidt.add_argument("--config", type=Path, required=True)
    p_schmidt.add_argument("--out", type=Path, default=None)

    p_cmp = sub.add_parser("compare", help="compare two trace files")
    p_cmp.add_argument("trace_a", type=Path)
    p_cmp.add_argument("trace_b", type=Path)
    p_cmp.add_argument("--resample", action="store_true")
    p_cmp.add_argument("--chi2-max", type=float, default=1.5)
    p_cmp.add_argument("--rtol", type=float, default=0.05)

    args = parser.parse_args(argv)
    try:
        if args.command == "compare":
            report, passed = run_compare(
                args.trace_a, args.trace_b, args.resample, args.chi2_max,
                args.rtol,
            )
            _print_meta(report)
            return 0 if passed else 4

        cfg = load_config(args.config) if args.config else None
        if args.command == "fit":
            meta = run_fit(args.trace, cfg, args.out)
            _print_meta(meta)
            return 0
        if args.command == "schmidt":
            meta = run_schmidt(cfg, args.out)
            _print_meta(meta)
            return 0

        if getattr(args, "seed", None) is not None:
            cfg = ExperimentConfig(
                mode=cfg.mode, comb=cfg.comb, pump=cfg.pump,
                detector=cfg.detector, acq_time=cfg.acq_time, seed=args.seed,
                modulation=cfg.modulation, pair_rate=cfg.pair_rate,
                brightness=cfg.brightness, car=cfg.car, phases=cfg.phases,
            )
        if args.command == "analytic":
            meta = run_analytic(cfg, args.out, oracle=args.oracle)
        else:
            meta = run_simulate(cfg, args.out)
        _print_meta(meta)
        return 0
    except (ResolutionError, TruncationError, AliasingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FitConvergenceError, NoDataError, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
