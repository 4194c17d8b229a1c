import math

import numpy as np
import pytest

from bfcsim import (
    CombSpec,
    GaussianJsaSpec,
    PumpSpec,
    ResolutionError,
    SchmidtResult,
    build_gaussian_jsa,
    build_pulsed_jsa,
    gaussian_schmidt_number,
    gbar_from_k,
    schmidt_number,
)
from bfcsim.units import ghz_to_angular

ISLAND_K = 1.0979951399366574


def _comb1(gamma_ghz=0.2, fsr_ghz=2.0):
    return CombSpec(
        fsr_angular=ghz_to_angular(fsr_ghz),
        linewidth_angular=ghz_to_angular(gamma_ghz),
        dimension=1,
    )


def test_result_validation():
    ok = SchmidtResult(1.5, np.array([0.7, 0.3]), 2)
    assert math.isclose(ok.purity, 1.0 / 1.5)
    assert not ok.singular_weights.flags.writeable
    with pytest.raises(ValueError):
        SchmidtResult(1.5, np.array([0.3, 0.7]), 2)
    with pytest.raises(ValueError):
        SchmidtResult(1.5, np.array([0.7, -0.3]), 2)
    with pytest.raises(ValueError):
        SchmidtResult(1.5, np.array([0.6, 0.3]), 2)
    with pytest.raises(ValueError):
        SchmidtResult(0.5, np.array([0.7, 0.3]), 2)


@pytest.mark.parametrize(
    "sigma_p_ghz,sigma_r_ghz",
    [(0.2, 0.2), (0.025, 0.2)],
)
def test_svd_matches_gaussian_closed_form(sigma_p_ghz, sigma_r_ghz):
    spec = GaussianJsaSpec(
        _comb1(),
        sigma_p=ghz_to_angular(sigma_p_ghz),
        sigma_r=ghz_to_angular(sigma_r_ghz),
    )
    grid = build_gaussian_jsa(spec)
    res = schmidt_number(grid)
    assert abs(res.schmidt_number - gaussian_schmidt_number(spec)) < 0.01 * res.schmidt_number
    assert math.isclose(float(res.singular_weights.sum()), 1.0, rel_tol=1e-3)


def test_island_mode_number():
    pump = PumpSpec.gaussian_pulse(ghz_to_angular(1.1), 25e-9)
    grid = build_pulsed_jsa(_comb1(), pump)
    res = schmidt_number(grid)
    assert math.isclose(res.schmidt_number, ISLAND_K, rel_tol=1e-6)
    # nearly single-mode: leading weight dominates
    assert res.singular_weights[0] > 0.9


def test_convergence_guard_fires_on_coarse_grid():
    spec = GaussianJsaSpec(
        _comb1(),
        sigma_p=ghz_to_angular(0.025),
        sigma_r=ghz_to_angular(0.2),
    )
    grid = build_gaussian_jsa(spec)
    coarse = grid.amplitude[::6, ::6]
    from bfcsim import JsaGrid

    sub = JsaGrid(grid.signal_axis[::6], grid.idler_axis[::6], coarse)
    with pytest.raises(ResolutionError):
        schmidt_number(sub)
    # guard can be bypassed explicitly
    res = schmidt_number(sub, check_convergence=False)
    assert res.schmidt_number > 1.0


def test_max_modes_guard():
    spec = GaussianJsaSpec(
        _comb1(),
        sigma_p=ghz_to_angular(0.025),
        sigma_r=ghz_to_angular(0.2),
    )
    grid = build_gaussian_jsa(spec)
    with pytest.raises(ResolutionError):
        schmidt_number(grid, max_modes=2)


def test_gbar_from_k():
    assert math.isclose(gbar_from_k(1.0, 1), 2.0)
    assert math.isclose(gbar_from_k(ISLAND_K, 2), 1.0 + 1.0 / (2 * ISLAND_K))
    with pytest.raises(ValueError):
        gbar_from_k(0.5, 2)
    with pytest.raises(ValueError):
        gbar_from_k(1.2, 0)
