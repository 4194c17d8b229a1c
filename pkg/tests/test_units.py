import math

from bfcsim.units import (
    FWHM_TO_SIGMA,
    TWO_PI,
    angular_to_ghz,
    fwhm_to_sigma,
    ghz_to_angular,
    ns_to_s,
    ps_to_s,
    s_to_ps,
    sigma_to_fwhm,
)


def test_ghz_round_trip():
    assert angular_to_ghz(ghz_to_angular(40.5)) == 40.5
    assert ghz_to_angular(1.0) == TWO_PI * 1e9


def test_time_conversions():
    assert math.isclose(ps_to_s(64.0), 64e-12, rel_tol=1e-12)
    assert math.isclose(ns_to_s(25.0), 25e-9, rel_tol=1e-12)
    assert math.isclose(s_to_ps(1.1e-10), 110.0, rel_tol=1e-12)


def test_fwhm_sigma_inverse_pair():
    assert FWHM_TO_SIGMA == 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    assert fwhm_to_sigma(sigma_to_fwhm(0.7)) == 0.7
    # gaussian with this sigma is exactly half-max at +-fwhm/2
    sigma = fwhm_to_sigma(2.0)
    assert math.isclose(math.exp(-1.0 / (2.0 * sigma**2)), 0.5, rel_tol=1e-12)
