"""Boundary unit conversions.

Internally everything is angular frequency (rad/s) and time (seconds).
Configuration files and CSV exports speak GHz (ordinary frequency) and ps;
these helpers are the single place where the 2*pi bookkeeping happens.
"""

import math

TWO_PI = 2.0 * math.pi

# Gaussian FWHM -> standard deviation.
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def ghz_to_angular(f_ghz):
    """Ordinary frequency in GHz to angular frequency in rad/s."""
    return TWO_PI * 1e9 * f_ghz


def angular_to_ghz(omega):
    """Angular frequency in rad/s to ordinary frequency in GHz."""
    return omega / (TWO_PI * 1e9)


def ps_to_s(t_ps):
    return t_ps * 1e-12


def s_to_ps(t_s):
    return t_s * 1e12


def ns_to_s(t_ns):
    return t_ns * 1e-9


def fwhm_to_sigma(fwhm):
    """FWHM of a Gaussian profile to its standard deviation."""
    return fwhm * FWHM_TO_SIGMA


def sigma_to_fwhm(sigma):
    return sigma / FWHM_TO_SIGMA
