"""Parameter extraction from correlation data: linewidth/spacing fits of
fringed auto-correlations, fringe visibility against entanglement
thresholds, and feature-width measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .correlations import CorrelationTrace, TraceKind
from .errors import AmbiguousPeakError, FitConvergenceError, ResolutionError
from .units import FWHM_TO_SIGMA, TWO_PI

_VIOLATION_THRESHOLDS = {2: 0.71, 3: 0.77}


@dataclass(frozen=True)
class FitResult:
    """Best-fit linewidth and line spacing for a fringed auto-correlation.

    converged is set only when the optimizer finished within budget and the
    running best residual decreased strictly over the last 3 accepted steps.
    """

    gamma_angular: float
    delta_omega_angular: float
    residual_rms: float
    iterations: int
    converged: bool

    def __post_init__(self):
        if self.gamma_angular <= 0:
            raise ValueError(f"gamma_angular must be > 0, got {self.gamma_angular}")
        if self.delta_omega_angular <= 0:
            raise ValueError(
                f"delta_omega_angular must be > 0, got {self.delta_omega_angular}"
            )
        if self.residual_rms < 0:
            raise ValueError(f"residual_rms must be >= 0, got {self.residual_rms}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")


@dataclass(frozen=True)
class VisibilityResult:
    """Fringe visibility, the applicable violation threshold, and the strict
    comparison between them.  raw_visibility is the unfitted extremum ratio
    kept alongside the fitted value for comparison."""

    visibility: float
    threshold: float
    violates: bool
    raw_visibility: float

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.violates != (self.visibility > self.threshold):
            raise ValueError("violates flag inconsistent with visibility > threshold")


def _fringe_comb(x: np.ndarray, d: int) -> np.ndarray:
    """|mean_k exp(i k x)|^2 for d equally spaced, equally weighted lines."""
    out = np.ones_like(x, dtype=float)
    half = np.abs(np.sin(0.5 * np.asarray(x)))
    good = half > 1e-12
    xg = np.asarray(x)[good]
    out[good] = (np.sin(0.5 * d * xg) / (d * np.sin(0.5 * xg))) ** 2
    return out


def _cw_model(tau: np.ndarray, gamma: float, delta: float, d: int) -> np.ndarray:
    at = np.abs(tau)
    envelope = np.exp(-gamma * at) * (1.0 + 0.5 * gamma * at) ** 2
    return 1.0 + envelope * _fringe_comb(delta * tau, d)


def _smearing_kernel(step: float, jitter_fwhm: float, bin_width: float) -> np.ndarray:
    """Discrete response combining Gaussian timing jitter and boxcar bin
    averaging, normalized to unit sum; trivial kernel when both are off."""
    kernel = np.ones(1)
    if jitter_fwhm > 0:
        sigma = jitter_fwhm * FWHM_TO_SIGMA
        half = max(int(math.ceil(4.0 * sigma / step)), 1)
        x = np.arange(-half, half + 1) * step
        kernel = np.exp(-0.5 * (x / sigma) ** 2)
    n_box = max(int(round(bin_width / step)), 1)
    if n_box > 1:
        kernel = np.convolve(kernel, np.ones(n_box))
    return kernel / kernel.sum()


def _estimate_spacing(
    tau: np.ndarray, values: np.ndarray, min_angular: float = 0.0
) -> float | None:
    """Dominant fringe angular frequency from a windowed periodogram, with
    parabolic peak refinement; None when no off-DC structure stands out.

    min_angular masks the aperiodic-envelope lobe next to DC, which can
    dwarf the fringe line when the axis extends far past the envelope.
    """
    y = (values - values.mean()) * np.hanning(values.size)
    spec = np.abs(np.fft.rfft(y))
    freqs = np.fft.rfftfreq(values.size, d=tau[1] - tau[0])
    if spec.size < 4:
        return None
    spec[:2] = 0.0
    spec[TWO_PI * freqs < min_angular] = 0.0
    live = spec > 0
    if not live.any():
        return None
    peak = int(np.argmax(spec))
    if spec[peak] <= 0 or peak >= spec.size - 1 or peak < 2:
        return None
    if spec[peak] < 3.0 * np.median(spec[live]):
        return None
    s0, s1, s2 = spec[peak - 1], spec[peak], spec[peak + 1]
    denom = s0 - 2.0 * s1 + s2
    shift = 0.5 * (s0 - s2) / denom if denom != 0 else 0.0
    shift = float(np.clip(shift, -0.5, 0.5))
    return 2.0 * math.pi * float(freqs[peak] + shift * (freqs[1] - freqs[0]))


def fit_cw_model(
    trace: CorrelationTrace,
    init: tuple[float, float] | None = None,
    dimension: int | None = None,
    jitter_fwhm: float = 0.0,
    max_evals: int = 500,
) -> FitResult:
    """Least-squares recovery of (linewidth, line spacing) from a fringed
    dimensionless auto-correlation.

    A coarse grid around frequency-domain initial guesses is scanned first,
    then a Nelder-Mead simplex refines the best cell within max_evals model
    evaluations.  The forward model folds in Gaussian jitter and histogram
    bin averaging so fits against binned Monte Carlo data are unbiased.
    """
    if trace.kind is not TraceKind.DIMENSIONLESS:
        raise ValueError("fit expects a dimensionless auto-correlation trace")
    if dimension is None:
        dimension = trace.meta.get("dimension")
    if dimension is None:
        raise ValueError("dimension not given and absent from trace meta")
    d = int(dimension)
    tau = trace.tau_axis
    values = trace.values

    spread = float(values.max() - values.min())
    if spread < 1e-3 * max(abs(float(values.mean())), 1e-12):
        raise FitConvergenceError("trace is flat; no fringe structure to fit")

    if init is not None:
        gamma0, delta0 = float(init[0]), float(init[1])
        if gamma0 <= 0 or delta0 <= 0:
            raise ValueError("init values must be positive")
    else:
        # Area of (g2 - 1) is 5/(d gamma) for this line shape, independent of
        # jitter and binning.
        area = float(np.trapezoid(values - 1.0, tau))
        if area <= 0:
            raise FitConvergenceError("trace carries no excess correlation area")
        gamma0 = 5.0 / (d * area)
        delta0 = _estimate_spacing(tau, values, min_angular=0.75 * gamma0)
        if delta0 is None:
            raise FitConvergenceError("no fringe period detectable in the trace")

    span = float(tau[-1] - tau[0])
    if span * delta0 < 3.0 * 2.0 * math.pi:
        raise ValueError(
            "trace must span at least 3 fringe periods for an identifiable fit"
        )

    step = min(trace.spacing, (2.0 * math.pi / delta0) / 16.0)
    pad = 4.0 * max(jitter_fwhm, trace.spacing)
    fine_tau = np.arange(tau[0] - pad, tau[-1] + pad + step, step)
    kernel = _smearing_kernel(step, jitter_fwhm, trace.spacing)

    improvements: list[float] = []
    best_sse = math.inf

    def objective(params: np.ndarray) -> float:
        nonlocal best_sse
        gamma, delta = params
        if gamma <= 0 or delta <= 0:
            return 1e12
        model = _cw_model(fine_tau, gamma, delta, d)
        if kernel.size > 1:
            model = np.convolve(model - 1.0, kernel, mode="same") + 1.0
        sse = float(np.sum((np.interp(tau, fine_tau, model) - values) ** 2))
        if sse < best_sse:
            best_sse = sse
            improvements.append(sse)
        return sse

    gammas = gamma0 * np.exp(np.linspace(-1.2, 1.2, 13))
    deltas = delta0 * np.linspace(0.92, 1.08, 21)
    best_pair = (gamma0, delta0)
    best_grid = math.inf
    for g in gammas:
        for dl in deltas:
            sse = objective(np.array([g, dl]))
            if sse < best_grid:
                best_grid = sse
                best_pair = (g, dl)

    result = minimize(
        objective,
        x0=np.array(best_pair),
        method="Nelder-Mead",
        options={
            "maxfev": max_evals,
            "xatol": 1e-6 * best_pair[1],
            "fatol": 1e-12 * max(best_grid, 1e-30),
        },
    )
    gamma_fit, delta_fit = float(result.x[0]), float(result.x[1])
    rms = math.sqrt(float(result.fun) / tau.size)
    tail = improvements[-3:]
    monotone = len(tail) == 3 and tail[0] > tail[1] > tail[2]
    converged = bool(result.success) and monotone and gamma_fit > 0 and delta_fit > 0

    if not converged:
        best = None
        if gamma_fit > 0 and delta_fit > 0:
            best = FitResult(
                gamma_angular=gamma_fit,
                delta_omega_angular=delta_fit,
                residual_rms=rms,
                iterations=int(result.nfev),
                converged=False,
            )
        raise FitConvergenceError(
            f"fit did not converge within {max_evals} evaluations "
            f"(final rms {rms:.3e})",
            best=best,
        )
    return FitResult(
        gamma_angular=gamma_fit,
        delta_omega_angular=delta_fit,
        residual_rms=rms,
        iterations=int(result.nfev),
        converged=True,
    )


def _phase_fringe_shape(x: np.ndarray, d: int) -> np.ndarray:
    """Unit-peak fringe of a d-line cross-correlation versus applied phase;
    the shape peaks where the alternating line signs rephase."""
    return _fringe_comb(np.asarray(x) + math.pi, d)


def visibility_and_threshold(
    phases: np.ndarray,
    values: np.ndarray,
    dimension: int,
) -> VisibilityResult:
    """Fringe visibility from a phase sweep of coincidence rates, compared
    against the d-dependent violation threshold.

    A scaled-and-offset theoretical fringe (sinusoidal for d = 2, the
    multi-line shape for d = 3) is least-squares fitted with a scanned
    phase origin; visibility is taken from the fitted extrema, so it is
    invariant under global rescaling of the data.
    """
    d = int(dimension)
    if d not in _VIOLATION_THRESHOLDS:
        raise ValueError(f"no violation threshold defined for dimension {d}")
    phi = np.asarray(phases, dtype=float)
    vals = np.asarray(values, dtype=float)
    if phi.ndim != 1 or phi.shape != vals.shape or phi.size < 4:
        raise ValueError("phases and values must be matching 1-d arrays (>= 4 points)")
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(vals))):
        raise ValueError("phases and values must be finite")
    if np.any(np.diff(phi) <= 0):
        raise ValueError("phases must be strictly increasing")
    span = float(phi[-1] - phi[0])
    period = 2.0 * math.pi
    if span < period * (1.0 - 1e-9):
        raise ValueError("phase sweep must cover at least one full fringe period")
    points_per_period = phi.size * period / span
    if points_per_period < 8.0:
        raise ResolutionError(
            f"fringe sampled at {points_per_period:.1f} points per period; "
            "need at least 8"
        )

    def fit_at(origin: float):
        shape = _phase_fringe_shape(phi - origin, d)
        design = np.column_stack([np.ones_like(shape), shape])
        coef, _, _, _ = np.linalg.lstsq(design, vals, rcond=None)
        if coef[1] < 0.0:
            # every origin has a sign-flipped twin; force the scan onto the
            # twin with an upright fringe
            coef = np.array([float(vals.mean()), 0.0])
        resid = vals - design @ coef
        return float(np.sum(resid**2)), coef

    origins = np.linspace(-math.pi, math.pi, 721)
    sses = np.array([fit_at(o)[0] for o in origins])
    i_best = int(np.argmin(sses))
    lo = origins[max(i_best - 1, 0)]
    hi = origins[min(i_best + 1, origins.size - 1)]
    refine = np.linspace(lo, hi, 41)
    sses_r = np.array([fit_at(o)[0] for o in refine])
    origin = float(refine[int(np.argmin(sses_r))])
    _, (offset, scale) = fit_at(origin)

    scale = max(float(scale), 0.0)
    offset = max(float(offset), 0.0)
    fit_max = offset + scale
    fit_min = offset
    visibility = 0.0 if fit_max + fit_min == 0 else (fit_max - fit_min) / (
        fit_max + fit_min
    )
    visibility = float(np.clip(visibility, 0.0, 1.0))
    vmax, vmin = float(vals.max()), float(vals.min())
    raw = 0.0 if vmax + vmin == 0 else (vmax - vmin) / (vmax + vmin)
    threshold = _VIOLATION_THRESHOLDS[d]
    return VisibilityResult(
        visibility=visibility,
        threshold=threshold,
        violates=visibility > threshold,
        raw_visibility=float(np.clip(raw, 0.0, 1.0)),
    )


def _local_maxima(values: np.ndarray) -> np.ndarray:
    interior = np.flatnonzero(
        (values[1:-1] > values[:-2]) & (values[1:-1] >= values[2:])
    )
    return interior + 1


def _crossing(tau, values, i_from, level, direction) -> float | None:
    """Linear-interpolated tau where values crosses level, walking from
    i_from in direction until the first crossing."""
    i = i_from
    while 0 <= i + direction < values.size:
        j = i + direction
        if (values[i] - level) * (values[j] - level) <= 0 and values[i] != values[j]:
            frac = (level - values[i]) / (values[j] - values[i])
            return float(tau[i] + frac * (tau[j] - tau[i]))
        i = j
    return None


def measure_fwhm(
    trace: CorrelationTrace,
    which: str = "central-peak",
    baseline: float | None = None,
) -> float:
    """Full width at half maximum of a correlation feature above baseline.

    which = "central-peak" measures the peak nearest zero delay against the
    trace's asymptotic baseline (1 for dimensionless traces, 0 for rates,
    bracketing-minima level for densities unless an explicit baseline is
    given).  which = "beat-feature" restricts the crossing search to the
    fringe containing the central peak, so periodic traces report the width
    of one beat rather than the envelope.
    """
    if which not in ("central-peak", "beat-feature"):
        raise ValueError(f"unknown feature selector {which!r}")
    tau = trace.tau_axis
    values = trace.values
    maxima = _local_maxima(values)
    if maxima.size == 0:
        raise ValueError("trace has no interior local maximum to measure")

    top = float(values[maxima].max())
    tol = 1e-6 * max(abs(top), 1e-300)
    contenders = maxima[values[maxima] >= top - tol]
    order = np.argsort(np.abs(tau[contenders]), kind="stable")
    contenders = contenders[order]
    if contenders.size > 1:
        t0, t1 = abs(tau[contenders[0]]), abs(tau[contenders[1]])
        if abs(t1 - t0) <= 0.5 * trace.spacing:
            raise AmbiguousPeakError(
                "multiple equal maxima equally near zero delay",
                candidates=[float(tau[i]) for i in contenders],
            )
    peak = int(contenders[0])

    lo_lim, hi_lim = 0, values.size - 1
    if which == "beat-feature":
        left = peak
        while left > 0 and values[left - 1] <= values[left]:
            left -= 1
        right = peak
        while right < values.size - 1 and values[right + 1] <= values[right]:
            right += 1
        lo_lim, hi_lim = left, right

    if baseline is None:
        if trace.kind is TraceKind.DIMENSIONLESS:
            baseline = 1.0
        elif trace.kind is TraceKind.RATE:
            baseline = 0.0
        else:
            if which == "beat-feature":
                baseline = 0.5 * (values[lo_lim] + values[hi_lim])
            else:
                mins = np.flatnonzero(
                    (values[1:-1] < values[:-2]) & (values[1:-1] <= values[2:])
                ) + 1
                below = mins[mins < peak]
                above = mins[mins > peak]
                if below.size and above.size:
                    baseline = 0.5 * (
                        float(values[below[-1]]) + float(values[above[0]])
                    )
                else:
                    baseline = float(min(values[0], values[-1]))
    baseline = float(baseline)

    height = float(values[peak]) - baseline
    if height <= 0:
        raise ValueError("feature does not rise above the baseline")
    if baseline != 0 and float(values[peak]) < 1.2 * baseline:
        raise ValueError(
            f"peak {float(values[peak]):.4g} is within 20% of baseline "
            f"{baseline:.4g}; feature too weak to measure"
        )
    level = baseline + 0.5 * height

    sl = slice(lo_lim, hi_lim + 1)
    t_win, v_win = tau[sl], values[sl]
    p_win = peak - lo_lim
    left_x = _crossing(t_win, v_win, p_win, level, -1)
    right_x = _crossing(t_win, v_win, p_win, level, +1)
    if left_x is None or right_x is None:
        raise ValueError(
            "half-maximum level is not crossed on both sides inside the trace"
        )
    return right_x - left_x
