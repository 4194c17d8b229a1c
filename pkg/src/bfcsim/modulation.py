"""Electro-optic phase modulation: Bessel sidebands, Vernier rescaling of the
comb FSR, and the cluster-selecting spectral filter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from .comb import CombSpec
from .errors import DegenerateDetuningError, EqualizationError, FilterClippingError


@dataclass(frozen=True)
class ModulationSpec:
    """Sinusoidal phase drive plus the downstream cluster filter.

    rf_angular is the drive frequency, index the peak phase deviation in
    radians, center_bin the comb bin whose sideband cluster the filter keeps,
    filter_halfwidth the half-width of that filter.
    """

    rf_angular: float
    index: float
    center_bin: int
    filter_halfwidth: float

    def __post_init__(self):
        if self.rf_angular <= 0:
            raise ValueError(f"rf_angular must be positive, got {self.rf_angular}")
        if self.index < 0:
            raise ValueError(f"index must be nonnegative, got {self.index}")
        if self.filter_halfwidth <= 0:
            raise ValueError("filter_halfwidth must be positive")
        if 2.0 * self.filter_halfwidth >= self.rf_angular:
            raise ValueError(
                "filter window must stay below the drive frequency so one "
                "sideband cluster is separable from its neighbors"
            )
        if int(self.center_bin) != self.center_bin or self.center_bin < 1:
            raise ValueError(f"center_bin must be a positive integer, got {self.center_bin}")


def sideband_weights(index: float, max_order: int = 1, capture: float = 0.999):
    """Complex sideband amplitudes of sinusoidal phase modulation.

    Order n carries i^n J_n(index).  max_order is raised automatically until
    the returned orders capture at least `capture` of the total power (which
    is exactly 1 for a pure phase drive).

    Returns (orders, weights) with orders n in [-max_order, max_order].
    """
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    if index < 0:
        raise ValueError(f"index must be nonnegative, got {index}")
    m = max_order
    while True:
        orders = np.arange(-m, m + 1)
        weights = (1j**orders) * jv(orders, index)
        if float(np.sum(np.abs(weights) ** 2)) >= capture or m > 256:
            return orders, weights
        m *= 2


def equalizing_index(num_bins: int) -> float:
    """Modulation index that weights num_bins parent bins equally.

    For 2 or 3 bins the orders {0, +/-1} suffice and the root of
    |J0(m)| = |J1(m)| does the job; beyond that no single index works and the
    error carries that same root as a best effort.
    """
    if int(num_bins) != num_bins or num_bins < 1:
        raise ValueError(f"num_bins must be a positive integer, got {num_bins}")
    if num_bins == 1:
        return 0.0
    # J0 - J1 changes sign in (1, 2); both are positive there
    root = float(brentq(lambda m: jv(0, m) - jv(1, m), 1.0, 2.0, xtol=1e-12))
    if num_bins > 3:
        raise EqualizationError(
            f"no single modulation index equalizes {num_bins} bins; "
            "amplitude shaping of the drive is required",
            best_effort_index=root,
        )
    return root


def vernier_map(comb: CombSpec, mod: ModulationSpec) -> CombSpec:
    """Comb rescaled by Vernier detuning.

    Parent bin k reaches the cluster around bin center_bin via sideband order
    n = center_bin - k, landing at pump_center + center_bin*rf + k*delta with
    delta = fsr - rf.  Bin indices are preserved, so each output line records
    its parent by construction; the new FSR is |delta| and line weights pick
    up i^n J_n(index).
    """
    delta = comb.fsr_angular - mod.rf_angular
    if abs(delta) <= 1e-9 * comb.fsr_angular:
        raise DegenerateDetuningError(
            "rf drive equals the comb FSR; all sidebands coincide and no "
            "rescaled comb exists"
        )
    if delta < 0:
        raise ValueError(
            "rf drive above the FSR flips the rescaled comb; drive below the FSR"
        )
    orders = mod.center_bin - comb.bins
    weights = comb.bin_amplitudes * (1j**orders) * jv(orders, mod.index)
    if not np.any(weights):
        raise ValueError("all sideband weights vanish at this modulation index")
    new_center = comb.pump_center_angular + mod.center_bin * mod.rf_angular
    return CombSpec(
        fsr_angular=delta,
        linewidth_angular=comb.linewidth_angular,
        dimension=comb.dimension,
        first_bin=comb.first_bin,
        pump_center_angular=new_center,
        bin_amplitudes=weights,
        parent_bins=tuple(int(k) for k in comb.bins),
    )


def apply_filter(rescaled: CombSpec, mod: ModulationSpec) -> CombSpec:
    """Keep the rescaled lines inside the cluster window and renormalize.

    The window is centered on the line at bin center_bin (the parent bin the
    cluster forms around).  A window edge eating more than 1% of a retained
    line's Lorentzian tail raises a clipping error.
    """
    centers = rescaled.signal_centers
    window_center = (
        rescaled.pump_center_angular + mod.center_bin * rescaled.fsr_angular
    )
    inside = np.abs(centers - window_center) <= mod.filter_halfwidth
    if not np.any(inside):
        raise ValueError("filter window retains no lines")

    gamma = rescaled.linewidth_angular
    clipped = []
    for k, center, keep in zip(rescaled.bins, centers, inside):
        if not keep:
            continue
        # one-sided Lorentzian tail mass beyond each window edge
        loss = 0.0
        for edge in (window_center - mod.filter_halfwidth, window_center + mod.filter_halfwidth):
            dist = abs(center - edge)
            loss += 0.5 - math.atan(2.0 * dist / gamma) / math.pi
        if loss > 0.01:
            clipped.append(int(k))
    if clipped:
        raise FilterClippingError(
            f"filter edges clip > 1% of the energy of lines {clipped}; widen the "
            "window or narrow the lines",
            clipped_bins=clipped,
        )

    kept = np.flatnonzero(inside)
    if np.any(np.diff(kept) != 1):
        raise ValueError("filter window must retain a contiguous run of lines")
    first = int(rescaled.bins[kept[0]])
    parents = tuple(int(rescaled.bins[i]) for i in kept)
    return CombSpec(
        fsr_angular=rescaled.fsr_angular,
        linewidth_angular=rescaled.linewidth_angular,
        dimension=kept.size,
        first_bin=first,
        pump_center_angular=rescaled.pump_center_angular,
        bin_amplitudes=rescaled.bin_amplitudes[kept],
        parent_bins=parents,
    )


def modulated_comb(comb: CombSpec, mod: ModulationSpec) -> CombSpec:
    """Vernier rescaling followed by the cluster filter."""
    return apply_filter(vernier_map(comb, mod), mod)
