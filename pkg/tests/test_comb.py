import math

import numpy as np
import pytest

from bfcsim import (
    CombSpec,
    GaussianJsaSpec,
    JsaGrid,
    PumpSpec,
    RegimeError,
    ResolutionError,
    ResourceLimitError,
    accidental_floor_for_car,
    build_cw_marginal,
    build_gaussian_jsa,
    build_pulsed_jsa,
    car_from_matrix,
    compute_fp,
    jsi_and_car,
    lorentzian_line,
)
from bfcsim.comb import SampledSpectrum
from bfcsim.units import ghz_to_angular

FSR = ghz_to_angular(40.5)
GAMMA = ghz_to_angular(0.2)


def test_comb_defaults_and_normalization():
    comb = CombSpec(fsr_angular=FSR, linewidth_angular=GAMMA, dimension=3)
    assert list(comb.bins) == [1, 2, 3]
    np.testing.assert_allclose(np.abs(comb.bin_amplitudes), 1.0 / math.sqrt(3.0))
    np.testing.assert_allclose(comb.signal_centers, FSR * np.array([1, 2, 3]))
    np.testing.assert_allclose(comb.idler_centers, -FSR * np.array([1, 2, 3]))
    assert comb.has_equal_weights()


def test_comb_weight_normalization_is_power():
    comb = CombSpec(
        fsr_angular=FSR,
        linewidth_angular=GAMMA,
        dimension=2,
        bin_amplitudes=np.array([3.0, 4.0j]),
    )
    assert math.isclose(float(np.sum(np.abs(comb.bin_amplitudes) ** 2)), 1.0)
    # relative magnitudes survive
    mags = np.abs(comb.bin_amplitudes)
    assert math.isclose(mags[1] / mags[0], 4.0 / 3.0)
    assert not comb.has_equal_weights()


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(fsr_angular=0.0, linewidth_angular=GAMMA, dimension=1),
        dict(fsr_angular=FSR, linewidth_angular=0.0, dimension=1),
        dict(fsr_angular=GAMMA, linewidth_angular=FSR, dimension=1),
        dict(fsr_angular=FSR, linewidth_angular=GAMMA, dimension=0),
        dict(fsr_angular=FSR, linewidth_angular=GAMMA, dimension=2, first_bin=0),
        dict(
            fsr_angular=FSR,
            linewidth_angular=GAMMA,
            dimension=2,
            bin_amplitudes=np.zeros(2),
        ),
        dict(
            fsr_angular=FSR,
            linewidth_angular=GAMMA,
            dimension=2,
            bin_amplitudes=np.ones(3),
        ),
        dict(
            fsr_angular=FSR,
            linewidth_angular=GAMMA,
            dimension=2,
            parent_bins=(1,),
        ),
    ],
)
def test_comb_validation(kwargs):
    with pytest.raises(ValueError):
        CombSpec(**kwargs)


def test_pump_factories():
    cw = PumpSpec.cw()
    assert not cw.is_pulsed
    with pytest.raises(RegimeError):
        cw.amplitude_sigma

    gp = PumpSpec.gaussian_pulse(ghz_to_angular(1.1), 25e-9)
    assert gp.is_pulsed
    assert gp.repetition_period == 25e-9
    # amplitude spectrum is sqrt(2) wider than the intensity spectrum
    assert math.isclose(
        gp.amplitude_sigma,
        ghz_to_angular(1.1) / (2.0 * math.sqrt(2.0 * math.log(2.0))) * math.sqrt(2.0),
    )

    rect = PumpSpec.rectangular_pulse(2.0e-9, 25e-9)
    assert math.isclose(rect.bandwidth_fwhm_angular, 2.0 * math.pi * 0.8858929 / 2.0e-9)
    assert rect.duration == 2.0e-9


@pytest.mark.parametrize(
    "make",
    [
        lambda: PumpSpec.gaussian_pulse(0.0, 25e-9),
        lambda: PumpSpec.gaussian_pulse(ghz_to_angular(1.1), 0.0),
        lambda: PumpSpec.rectangular_pulse(0.0, 25e-9),
        lambda: PumpSpec(kind=PumpSpec.cw().kind, bandwidth_fwhm_angular=1.0),
    ],
)
def test_pump_validation(make):
    with pytest.raises(ValueError):
        make()


def test_lorentzian_line_unit_power():
    om = np.linspace(-4000.0, 4000.0, 400001) * GAMMA
    vals = lorentzian_line(om, 0.0, GAMMA)
    area = np.trapezoid(np.abs(vals) ** 2, om)
    assert math.isclose(area, 1.0, rel_tol=1e-3)
    with pytest.raises(ValueError):
        lorentzian_line(om, 0.0, 0.0)


def test_sampled_spectrum_validation():
    with pytest.raises(ValueError):
        SampledSpectrum(np.array([0.0, 1.0, 3.0]), np.zeros(3, dtype=complex))
    sp = SampledSpectrum(np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 1.0j]))
    assert math.isclose(sp.power_norm(), 3.0)


def test_compute_fp_symmetry_and_center():
    pump = PumpSpec.gaussian_pulse(ghz_to_angular(1.1), 25e-9)
    with pytest.raises(RegimeError):
        compute_fp(PumpSpec.cw(), GAMMA)
    center = ghz_to_angular(3.0)
    fp = compute_fp(pump, GAMMA, resonance_center=center)
    mag = np.abs(fp.values)
    # |F_p| is even about twice the resonance center
    peak_omega = fp.omega[int(np.argmax(mag))]
    assert abs(peak_omega - 2.0 * center) < fp.step + 1e-6
    np.testing.assert_allclose(mag, mag[::-1], rtol=1e-9, atol=mag.max() * 1e-12)


def test_compute_fp_width_tracks_pump_bandwidth():
    def width(bw_ghz):
        fp = compute_fp(PumpSpec.gaussian_pulse(ghz_to_angular(bw_ghz), 25e-9), GAMMA)
        mag = np.abs(fp.values)
        above = fp.omega[mag >= 0.5 * mag.max()]
        return above[-1] - above[0]

    assert width(2.2) > width(1.1) > width(0.55)


def test_jsa_grid_validation_and_norm():
    ax = np.linspace(-1.0, 1.0, 5)
    amp = np.ones((5, 5), dtype=complex)
    with pytest.raises(ValueError):
        JsaGrid(ax, np.array([0.0, 0.5, 2.0, 3.0, 4.0]), amp)
    with pytest.raises(ValueError):
        JsaGrid(ax, ax, np.ones((5, 4), dtype=complex))
    with pytest.raises(ValueError):
        JsaGrid(ax, ax, np.zeros((5, 5), dtype=complex))
    grid = JsaGrid(ax, ax, amp)
    assert math.isclose(grid.cell_area, 0.25)
    assert math.isclose(grid.norm, 25.0 * 0.25)
    assert math.isclose(grid.normalized().norm, 1.0)


def test_gaussian_jsa_spec_regime_guard():
    comb = CombSpec(fsr_angular=ghz_to_angular(2.0), linewidth_angular=GAMMA, dimension=2)
    GaussianJsaSpec(comb, sigma_p=ghz_to_angular(0.3), sigma_r=ghz_to_angular(0.3))
    with pytest.raises(RegimeError):
        GaussianJsaSpec(comb, sigma_p=ghz_to_angular(0.6), sigma_r=ghz_to_angular(0.3))
    with pytest.raises(ValueError):
        GaussianJsaSpec(comb, sigma_p=0.0, sigma_r=ghz_to_angular(0.3))


def test_build_gaussian_jsa_normalized_and_bin_peaked():
    comb = CombSpec(fsr_angular=ghz_to_angular(2.0), linewidth_angular=GAMMA, dimension=3)
    spec = GaussianJsaSpec(comb, sigma_p=ghz_to_angular(0.3), sigma_r=ghz_to_angular(0.3))
    grid = build_gaussian_jsa(spec)
    assert math.isclose(grid.norm, 1.0, rel_tol=1e-9)
    inten = grid.intensity()
    i, j = np.unravel_index(int(np.argmax(inten)), inten.shape)
    s_peak = grid.signal_axis[i]
    i_peak = grid.idler_axis[j]
    # intensity peaks on a bin crossing (signal bin k with idler bin -k)
    k = int(round(s_peak / comb.fsr_angular))
    assert k in comb.bins
    assert abs(s_peak - k * comb.fsr_angular) < grid.signal_step
    assert abs(i_peak + k * comb.fsr_angular) < grid.idler_step


def test_build_pulsed_jsa_guards():
    pump = PumpSpec.gaussian_pulse(ghz_to_angular(1.1), 25e-9)
    comb2 = CombSpec(fsr_angular=FSR, linewidth_angular=GAMMA, dimension=2)
    with pytest.raises(RegimeError):
        build_pulsed_jsa(comb2, PumpSpec.cw())
    with pytest.raises(RegimeError):
        build_pulsed_jsa(comb2, PumpSpec.gaussian_pulse(0.3 * FSR, 25e-9))
    with pytest.raises(ValueError):
        build_pulsed_jsa(comb2, PumpSpec.gaussian_pulse(ghz_to_angular(1.1), 2e-9))
    comb1 = CombSpec(fsr_angular=FSR, linewidth_angular=GAMMA, dimension=1)
    with pytest.raises(ResourceLimitError) as err:
        build_pulsed_jsa(comb1, pump, memory_cap_bytes=2**16)
    assert err.value.suggested_samples >= 1


def test_build_pulsed_jsa_normalized():
    comb1 = CombSpec(fsr_angular=FSR, linewidth_angular=GAMMA, dimension=1)
    pump = PumpSpec.gaussian_pulse(ghz_to_angular(1.1), 25e-9)
    grid = build_pulsed_jsa(comb1, pump, samples_per_linewidth=6)
    assert math.isclose(grid.norm, 1.0, rel_tol=1e-9)
    # island intensity is centered on the (\+fsr, -fsr) bin crossing
    inten = grid.intensity()
    i, j = np.unravel_index(int(np.argmax(inten)), inten.shape)
    assert abs(grid.signal_axis[i] - FSR) < 2.0 * grid.signal_step
    assert abs(grid.idler_axis[j] + FSR) < 2.0 * grid.idler_step


def test_build_cw_marginal_lines():
    comb = CombSpec(fsr_angular=ghz_to_angular(2.0), linewidth_angular=GAMMA, dimension=3)
    with pytest.raises(ResolutionError):
        build_cw_marginal(comb, samples_per_linewidth=4)
    sp = build_cw_marginal(comb)
    assert math.isclose(sp.power_norm(), 1.0, rel_tol=1e-9)
    power = np.abs(sp.values) ** 2
    # one resolved maximum per bin
    local_max = (power[1:-1] > power[:-2]) & (power[1:-1] > power[2:])
    strong = power[1:-1] > 0.1 * power.max()
    assert int(np.sum(local_max & strong)) == 3


def test_car_from_matrix_paths():
    car, inf = car_from_matrix(np.eye(3))
    assert inf and math.isinf(car)
    car, inf = car_from_matrix(np.array([[1.0]]))
    assert inf
    m = np.full((3, 3), 0.01)
    np.fill_diagonal(m, 1.0)
    car, inf = car_from_matrix(m)
    assert not inf and math.isclose(car, 100.0)


def test_accidental_floor_reaches_target():
    m = np.full((3, 3), 0.01)
    np.fill_diagonal(m, 1.0)
    floor = accidental_floor_for_car(m, 10.0)
    car, _ = car_from_matrix(m + floor)
    assert math.isclose(car, 10.0, rel_tol=1e-12)
    with pytest.raises(ValueError):
        accidental_floor_for_car(m, 1.0)
    with pytest.raises(ValueError):
        accidental_floor_for_car(m, 1000.0)
    with pytest.raises(ValueError):
        accidental_floor_for_car(np.array([[1.0]]), 10.0)


def test_jsi_and_car_gaussian_grid():
    comb = CombSpec(fsr_angular=ghz_to_angular(2.0), linewidth_angular=GAMMA, dimension=3)
    spec = GaussianJsaSpec(comb, sigma_p=ghz_to_angular(0.2), sigma_r=ghz_to_angular(0.2))
    grid = build_gaussian_jsa(spec)
    res = jsi_and_car(grid, comb)
    assert res.matrix.shape == (3, 3)
    assert np.trace(res.matrix) / res.matrix.sum() > 0.99
    assert res.car > 100.0
    floor = accidental_floor_for_car(res.matrix, 27.0)
    res27 = jsi_and_car(grid, comb, accidental_floor=floor)
    assert math.isclose(res27.car, 27.0, rel_tol=1e-9)
    assert not res27.car_infinite
