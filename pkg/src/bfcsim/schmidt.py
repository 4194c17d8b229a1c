"""Mode decomposition of discretized joint spectral amplitudes and the
bookkeeping between effective mode number and integrated correlations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .comb import JsaGrid
from .errors import ResolutionError


@dataclass(frozen=True, eq=False)
class SchmidtResult:
    """Effective mode number and the normalized mode weights behind it.

    singular_weights are the squared singular values normalized over the
    full spectrum, sorted descending; the stored (retained) head must carry
    at least 99.9% of the total weight.
    """

    schmidt_number: float
    singular_weights: np.ndarray
    mode_count_retained: int

    def __post_init__(self):
        lam = np.asarray(self.singular_weights, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise ValueError("singular_weights must be a nonempty vector")
        if np.any(lam < 0) or np.any(np.diff(lam) > 1e-12):
            raise ValueError("singular_weights must be nonnegative and descending")
        if float(lam.sum()) < 0.999:
            raise ValueError(
                f"retained weights carry only {float(lam.sum()):.4f} of the total; "
                "truncation bound violated"
            )
        if self.schmidt_number < 1.0 - 1e-9:
            raise ValueError(f"schmidt_number must be >= 1, got {self.schmidt_number}")
        lam.flags.writeable = False
        object.__setattr__(self, "singular_weights", lam)

    @property
    def purity(self) -> float:
        return 1.0 / self.schmidt_number


def _weights_from_grid(amplitude: np.ndarray, cell_area: float):
    sv = np.linalg.svd(amplitude * np.sqrt(cell_area), compute_uv=False)
    lam = sv**2
    total = float(lam.sum())
    if total <= 0:
        raise ValueError("amplitude grid carries no power")
    lam = lam / total
    k = 1.0 / float(np.sum(lam**2))
    return k, lam


def schmidt_number(
    jsa: JsaGrid,
    max_modes: int = 64,
    check_convergence: bool = True,
    convergence_tol: float = 0.02,
) -> SchmidtResult:
    """Effective mode number of a two-photon amplitude by singular values.

    The grid is weighted by the square root of the cell area so singular
    values approximate the continuum decomposition.  When enabled, the value
    is re-computed on a 2x-subsampled grid; disagreement beyond
    convergence_tol means the grid under-resolves the amplitude.
    """
    k, lam = _weights_from_grid(jsa.amplitude, jsa.cell_area)
    n1, n2 = jsa.amplitude.shape
    if check_convergence and min(n1, n2) >= 32:
        k_coarse, _ = _weights_from_grid(jsa.amplitude[::2, ::2], 4.0 * jsa.cell_area)
        if abs(k_coarse - k) > convergence_tol * k:
            raise ResolutionError(
                f"mode number not grid-converged ({k:.4f} vs {k_coarse:.4f} at half "
                "resolution); refine the frequency grid"
            )
    retained = lam[: min(max_modes, lam.size)]
    if float(retained.sum()) < 0.999:
        raise ResolutionError(
            f"{max_modes} modes capture only {float(retained.sum()):.4f} of the "
            "weight; raise max_modes"
        )
    return SchmidtResult(
        schmidt_number=k,
        singular_weights=retained,
        mode_count_retained=retained.size,
    )


def gbar_from_k(k: float, d: int) -> float:
    """Pulse-integrated auto-correlation implied by mode number k and d
    identical bin pairs: 1 + 1/(d k)."""
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if not k >= 1.0 - 1e-9:
        raise ValueError(f"mode number must be >= 1, got {k}")
    return 1.0 + 1.0 / (d * k)
