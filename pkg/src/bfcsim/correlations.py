"""Correlation quantities: the CW closed form, numeric and Gaussian
closed-form correlation densities, integrated values, signal-idler
cross-correlation, and detector-jitter averaging."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .comb import CombSpec, GaussianJsaSpec, JsaGrid
from .errors import AliasingError, RegimeError, ResolutionError, TruncationError
from .units import TWO_PI, fwhm_to_sigma


class TraceKind(enum.Enum):
    DIMENSIONLESS = "dimensionless-g2"
    DENSITY = "density-per-second"
    RATE = "coincidence-rate-arb"


def _readonly(arr):
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class CorrelationTrace:
    """Real nonnegative samples on a uniform delay axis.

    kind distinguishes dimensionless g2 (baseline 1), per-second correlation
    density (baseline 0, finite area), and arbitrary-scale coincidence rate.
    For dimensionless traces whose grid reaches at least 10 envelope decay
    times (meta carries gamma_angular), the outermost decade of samples must
    average to 1 within 2%.
    """

    tau_axis: np.ndarray
    values: np.ndarray
    kind: TraceKind
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        tau = np.asarray(self.tau_axis, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if tau.ndim != 1 or tau.size < 2:
            raise ValueError("tau_axis must be a 1-d grid with at least 2 samples")
        if vals.shape != tau.shape:
            raise ValueError("values must match tau_axis")
        steps = np.diff(tau)
        if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
            raise ValueError("tau_axis must be uniform and increasing")
        if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(vals))):
            raise ValueError("trace samples must be finite")
        peak = float(np.abs(vals).max())
        if float(vals.min()) < -1e-9 * max(peak, 1.0):
            raise ValueError("values must be nonnegative")
        vals = np.maximum(vals, 0.0)
        if self.stderr is not None:
            err = np.asarray(self.stderr, dtype=float)
            if err.shape != tau.shape or not np.all(np.isfinite(err)) or np.any(err < 0):
                raise ValueError("stderr must be finite, nonnegative, and match the axis")
            object.__setattr__(self, "stderr", _readonly(err))
        object.__setattr__(self, "tau_axis", _readonly(tau))
        object.__setattr__(self, "values", _readonly(vals))
        gamma = self.meta.get("gamma_angular")
        if (
            self.kind is TraceKind.DIMENSIONLESS
            and gamma
            and float(np.abs(tau).max()) >= 10.0 / gamma
            and tau.size >= 20
        ):
            edge = 0.9 * float(np.abs(tau).max())
            tail = vals[np.abs(tau) >= edge]
            if abs(float(tail.mean()) - 1.0) > 0.02:
                raise ValueError(
                    "dimensionless trace does not settle to baseline 1 over its "
                    f"outermost decade (mean {float(tail.mean()):.4f})"
                )

    @property
    def spacing(self) -> float:
        return float(self.tau_axis[1] - self.tau_axis[0])

    @property
    def baseline(self) -> float:
        return 1.0 if self.kind is TraceKind.DIMENSIONLESS else 0.0

    def area(self) -> float:
        return float(np.trapezoid(self.values, self.tau_axis))

    def peak(self) -> float:
        return float(self.values.max())


def _fringe_factor(d: int, phase: np.ndarray) -> np.ndarray:
    """|mean over d lines of exp(i j phase)|^2 with j = 0..d-1."""
    acc = np.exp(1j * np.outer(np.arange(d), phase)).mean(axis=0)
    return np.abs(acc) ** 2


def g2_cw(comb: CombSpec, tau_axis) -> CorrelationTrace:
    """Stationary unheralded auto-correlation of a CW-pumped comb.

    1 + exp(-gamma|tau|) (1 + gamma|tau|/2)^2 |mean_k exp(i k fsr tau)|^2.
    Assumes equal-magnitude bin weights; the fringe factor depends only on
    bin index differences, so the first bin index drops out.
    """
    if not comb.has_equal_weights():
        raise RegimeError(
            "closed form assumes equal-magnitude bin weights; use the numeric "
            "density path for shaped combs"
        )
    if comb.dimension > 1 and comb.fsr_angular < 4.0 * comb.linewidth_angular:
        raise RegimeError("closed form needs well-separated bins (fsr >= 4 linewidths)")
    tau = np.asarray(tau_axis, dtype=float)
    gamma = comb.linewidth_angular
    x = gamma * np.abs(tau)
    envelope = np.exp(-x) * (1.0 + 0.5 * x) ** 2
    fringe = _fringe_factor(comb.dimension, comb.fsr_angular * tau)
    meta = {
        "model": "cw-closed-form",
        "gamma_angular": gamma,
        "fsr_angular": comb.fsr_angular,
        "dimension": comb.dimension,
    }
    return CorrelationTrace(tau, 1.0 + envelope * fringe, TraceKind.DIMENSIONLESS, meta=meta)


def time_transform(values: np.ndarray, step: float, pad_factor: int = 2, axis: int = 0):
    """Continuum Fourier transform to the time domain along one axis.

    Returns (t, transformed) with t the sorted conjugate lattice of the
    zero-padded FFT and the transform scaled by step/sqrt(2 pi).  Absolute
    frequency offsets of the input axis only contribute a global phase per
    time sample, which cancels in every quadratic kernel built downstream.
    """
    n = values.shape[axis]
    m = pad_factor * n
    ft = np.fft.fft(values, n=m, axis=axis) * (step / math.sqrt(TWO_PI))
    t = TWO_PI * np.fft.fftfreq(m, d=step)
    order = np.argsort(t)
    return t[order], np.take(ft, order, axis=axis)


def coherence_kernel(jsa: JsaGrid, pad_factor: int = 2):
    """Signal-field coherence kernel of a two-photon amplitude.

    Transforms the amplitude to the mixed (signal time, idler frequency)
    domain and contracts over the idler: rho[t1, t2] with the marginal
    intensity on its diagonal.  Returns (t, rho).
    """
    t, ft = time_transform(jsa.amplitude, jsa.signal_step, pad_factor=pad_factor, axis=0)
    rho = (ft @ ft.conj().T) * jsa.idler_step
    return t, rho


def _density_on_lattice(jsa: JsaGrid, pad_factor: int, edge_tol: float = 1e-6):
    t, rho = coherence_kernel(jsa, pad_factor=pad_factor)
    dt = float(t[1] - t[0])
    g1 = np.ascontiguousarray(rho.diagonal().real)
    peak = float(g1.max())
    if max(g1[0], g1[-1]) > edge_tol * peak:
        raise AliasingError(
            "time window too short: the marginal intensity has not decayed at "
            "the lattice edges; refine the frequency grid to widen the window"
        )
    denom = (float(g1.sum()) * dt) ** 2
    m = t.size
    pedestal = np.empty(m)
    spike = np.empty(m)
    for r in range(m):
        pedestal[r] = float(np.dot(g1[: m - r], g1[r:])) * dt
        off = rho.diagonal(r)
        spike[r] = float(np.sum(off.real**2 + off.imag**2)) * dt
    return t, dt, pedestal / denom, spike / denom


def _interp_even(lag_tau, lag_vals, tau):
    """Cubic interpolation of an even function sampled at lags >= 0."""
    full_tau = np.concatenate([-lag_tau[:0:-1], lag_tau])
    full_vals = np.concatenate([lag_vals[:0:-1], lag_vals])
    out = CubicSpline(full_tau, full_vals)(np.abs(tau))
    return np.maximum(out, 0.0)


def _check_tau_range(tau, t):
    if float(np.abs(tau).max()) > float(t[-1]):
        raise ValueError(
            f"requested delays reach {float(np.abs(tau).max()):.3e} s but the "
            f"time lattice ends at {float(t[-1]):.3e} s; raise pad_factor or "
            "refine the frequency grid"
        )


def g2_density_components(
    jsa: JsaGrid, tau_axis, pad_factor: int = 2, edge_tol: float = 1e-6
):
    """Correlation density split into pedestal and spike parts.

    Returns (total, pedestal, spike) traces;
    total = pedestal + spike pointwise.  The density is even in tau; values
    are interpolated from the engine's time lattice.  edge_tol bounds the
    residual marginal intensity tolerated at the time-window edges; relax it
    only for diagnostic runs on deliberately coarse grids.
    """
    tau = np.asarray(tau_axis, dtype=float)
    t, dt, ped_lat, spk_lat = _density_on_lattice(jsa, pad_factor, edge_tol)
    _check_tau_range(tau, t)
    lag_tau = dt * np.arange(ped_lat.size)
    ped = _interp_even(lag_tau, ped_lat, tau)
    spk = _interp_even(lag_tau, spk_lat, tau)
    meta = {"model": "density-kernel", "lattice_dt": dt, "pad_factor": pad_factor}

    def _mk(vals, part):
        return CorrelationTrace(tau, vals, TraceKind.DENSITY, meta={**meta, "part": part})

    return _mk(ped + spk, "total"), _mk(ped, "pedestal"), _mk(spk, "spike")


def g2_density_numeric(
    jsa: JsaGrid, tau_axis, pad_factor: int = 2, edge_tol: float = 1e-6
) -> CorrelationTrace:
    """Correlation density of the unheralded signal field of a two-photon
    state, from the coherence-kernel factorization."""
    total, _, _ = g2_density_components(
        jsa, tau_axis, pad_factor=pad_factor, edge_tol=edge_tol
    )
    return total


def g2_density_direct_quadrature(jsa: JsaGrid, tau_axis) -> CorrelationTrace:
    """Test-only oracle: the same density by direct nested Riemann quadrature.

    Evaluates the five-index sum over three signal and two idler frequencies
    literally, with the frequency constraint folded in by index shifting.
    Cost grows with the fourth power of the signal axis size, so keep grids
    at or below ~24 points per axis.
    """
    psi = jsa.amplitude
    n, ni = psi.shape
    hx = jsa.signal_step
    hy = jsa.idler_step
    w = jsa.signal_axis - float(jsa.signal_axis.mean())
    tau = np.asarray(tau_axis, dtype=float)
    norm = float(np.sum(np.abs(psi) ** 2)) * hx * hy

    cpsi = psi.conj()
    ext = np.zeros((3 * n - 2, ni), dtype=complex)
    ext[n - 1 : 2 * n - 1] = psi
    idx = np.arange(n)
    # C[i1, i1p, i3] = sum_c conj(psi[i1, c]) psi[i1 + i1p - i3, c]
    #               * sum_cp conj(psi[i1p, cp]) psi[i3, cp]
    B = cpsi @ psi.T
    C = np.empty((n, n, n), dtype=complex)
    for i3 in range(n):
        shift = idx[:, None] + idx[None, :] - i3 + (n - 1)
        A3 = np.einsum("ac,abc->ab", cpsi, ext[shift], optimize=True)
        C[:, :, i3] = A3 * B[:, i3][None, :]
    vals = np.empty(tau.size)
    for j, t in enumerate(tau):
        e1 = np.exp(1j * w * t)
        e3 = e1.conj()
        ph = e3[None, None, :] * (e1[None, :, None] + e1[:, None, None])
        val = complex(np.sum(C * ph)) * hx**3 * hy**2
        vals[j] = val.real / (TWO_PI * norm**2)
    return CorrelationTrace(
        tau, np.maximum(vals, 0.0), TraceKind.DENSITY, meta={"model": "direct-quadrature"}
    )


def comb_density_from_island(
    pedestal: CorrelationTrace, spike: CorrelationTrace, comb: CombSpec
) -> CorrelationTrace:
    """Multibin correlation density assembled from one bin's components.

    Valid when bins are identical islands separated by much more than their
    spectral width: the pedestal adds incoherently while the spike picks up
    the comb fringe factor.
    """
    if pedestal.kind is not TraceKind.DENSITY or spike.kind is not TraceKind.DENSITY:
        raise ValueError("component traces must be densities")
    if pedestal.tau_axis.shape != spike.tau_axis.shape or not np.allclose(
        pedestal.tau_axis, spike.tau_axis
    ):
        raise ValueError("component traces must share one delay axis")
    if not comb.has_equal_weights(tol=0.05):
        raise RegimeError(
            "island replication assumes near-equal bin weights; build the "
            "full multi-bin amplitude for strongly unequal combs"
        )
    tau = pedestal.tau_axis
    fringe = _fringe_factor(comb.dimension, comb.fsr_angular * tau)
    vals = pedestal.values + spike.values * fringe
    meta = {
        **pedestal.meta,
        "part": "total",
        "dimension": comb.dimension,
        "fsr_angular": comb.fsr_angular,
    }
    return CorrelationTrace(tau, vals, TraceKind.DENSITY, meta=meta)


@dataclass(frozen=True, eq=False)
class GaussianDensityResult:
    """Closed-form Gaussian correlation density with its pieces.

    trace holds Gamma * (1 + |lambda|^2 * fringe); envelope and spike_factor
    sample Gamma(tau) and |lambda(tau)|^2 on the same axis.
    """

    trace: CorrelationTrace
    envelope: np.ndarray
    spike_factor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "envelope", _readonly(np.asarray(self.envelope, float)))
        object.__setattr__(
            self, "spike_factor", _readonly(np.asarray(self.spike_factor, float))
        )


def g2_density_gaussian(spec: GaussianJsaSpec, tau_axis) -> GaussianDensityResult:
    """Closed-form correlation density of the Gaussian model.

    With a = 1/sigma_p^2 + 1/sigma_r^2 and b = 1/sigma_p^2:
    envelope Gamma(tau) = exp(-tau^2/(4a)) / (2 sqrt(pi a)), unit area;
    spike factor |lambda(tau)|^2 = exp(-tau^2 b^2 / (4a(a^2 - b^2))); and the
    density is Gamma (1 + |lambda|^2 fringe_d).  The effective mode number is
    a/sqrt(a^2 - b^2), so the area is exactly 1 + 1/(d K).
    """
    tau = np.asarray(tau_axis, dtype=float)
    a = 1.0 / spec.sigma_p**2 + 1.0 / spec.sigma_r**2
    b = 1.0 / spec.sigma_p**2
    envelope = np.exp(-(tau**2) / (4.0 * a)) / (2.0 * math.sqrt(math.pi * a))
    spike_factor = np.exp(-(tau**2) * b**2 / (4.0 * a * (a**2 - b**2)))
    fringe = _fringe_factor(spec.comb.dimension, spec.comb.fsr_angular * tau)
    vals = envelope * (1.0 + spike_factor * fringe)
    k = a / math.sqrt(a**2 - b**2)
    meta = {
        "model": "gaussian-closed-form",
        "sigma_p": spec.sigma_p,
        "sigma_r": spec.sigma_r,
        "dimension": spec.comb.dimension,
        "fsr_angular": spec.comb.fsr_angular,
        "schmidt_number": k,
        "envelope_baseline": True,
    }
    trace = CorrelationTrace(tau, vals, TraceKind.DENSITY, meta=meta)
    return GaussianDensityResult(trace=trace, envelope=envelope, spike_factor=spike_factor)


def gaussian_schmidt_number(spec: GaussianJsaSpec) -> float:
    """Closed-form effective mode number of the Gaussian model."""
    a = 1.0 / spec.sigma_p**2 + 1.0 / spec.sigma_r**2
    b = 1.0 / spec.sigma_p**2
    return a / math.sqrt(a**2 - b**2)


def integrated_g2(trace: CorrelationTrace, edge_tol: float = 1e-3) -> float:
    """Area of a correlation density over its support."""
    if trace.kind is not TraceKind.DENSITY:
        raise ValueError("integrated value is defined for density traces")
    peak = trace.peak()
    edge = max(float(trace.values[0]), float(trace.values[-1]))
    if peak <= 0:
        raise ValueError("trace carries no signal")
    if edge > edge_tol * peak:
        span = float(trace.tau_axis[-1] - trace.tau_axis[0])
        raise TruncationError(
            "density tails not converged at the grid edges "
            f"({edge/peak:.2e} of peak); widen the delay window",
            bound=edge * span,
        )
    return trace.area()


@dataclass(frozen=True)
class PhasePattern:
    """Linear spectral phase ramp applied to signal and idler bins.

    phi is the per-bin phase step (wrapped to [-pi, pi)); signal bin k and
    its idler partner each receive phi/2 * (k - first bin), so pair k
    accumulates phi * (k - first bin) in total.
    """

    phi: float

    def __post_init__(self):
        if not math.isfinite(self.phi):
            raise ValueError("phi must be finite")
        wrapped = (self.phi + math.pi) % TWO_PI - math.pi
        object.__setattr__(self, "phi", wrapped)

    def signal_phases(self, comb: CombSpec) -> np.ndarray:
        return 0.5 * self.phi * (comb.bins - comb.first_bin)

    def idler_phases(self, comb: CombSpec) -> np.ndarray:
        return 0.5 * self.phi * (comb.bins - comb.first_bin)


def cross_correlation(
    comb: CombSpec, phase: PhasePattern | float, tau_axis
) -> CorrelationTrace:
    """Signal-idler coincidence rate versus delay under a phase ramp.

    exp(-gamma|tau|) |sum_j (-1)^j m_j exp(i j (phi - fsr tau))|^2 over the
    d retained lines (j relative to the first), with m_j the normalized
    weight magnitudes; for equal weights the global maximum over (phi, tau)
    is d^2.  The alternating sign comes from the sideband parities of the two
    arms, so the fringe peaks at phi = pi for d = 2.  A phase step phi
    delays the fringe pattern by phi / fsr.
    """
    if not isinstance(phase, PhasePattern):
        phase = PhasePattern(float(phase))
    if not comb.has_equal_weights(tol=0.05):
        hint = (
            "equalize the sideband weights first"
            if comb.dimension <= 3
            else "amplitude shaping of the drive is required beyond 3 bins"
        )
        raise RegimeError(f"cross-correlation model assumes equal weights; {hint}")
    tau = np.asarray(tau_axis, dtype=float)
    d = comb.dimension
    gamma = comb.linewidth_angular
    j = np.arange(d)
    mags = np.abs(comb.bin_amplitudes)
    m = mags / mags.mean()
    signs = np.where(j % 2 == 0, 1.0, -1.0)
    phases = np.exp(1j * np.outer(j, phase.phi - comb.fsr_angular * tau))
    s = ((m * signs)[:, None] * phases).sum(axis=0)
    vals = np.exp(-gamma * np.abs(tau)) * np.abs(s) ** 2
    meta = {
        "model": "cross-correlation",
        "gamma_angular": gamma,
        "fsr_angular": comb.fsr_angular,
        "dimension": d,
        "phi": phase.phi,
        "delay_shift": phase.phi / comb.fsr_angular,
    }
    return CorrelationTrace(tau, vals, TraceKind.RATE, meta=meta)


def jitter_average(
    trace: CorrelationTrace, jitter_fwhm: float, bin_width: float = 64e-12
) -> CorrelationTrace:
    """Detector response applied to a model trace.

    Convolves the baseline-subtracted trace with a Gaussian kernel of the
    given FWHM, then box-integrates into bins.  The dimensionless baseline 1
    is restored exactly; bin centers land on multiples of bin_width.
    """
    if jitter_fwhm < 0:
        raise ValueError("jitter_fwhm must be nonnegative")
    dt = trace.spacing
    if bin_width < dt * (1.0 - 1e-9):
        raise ResolutionError(
            f"bin_width {bin_width:.3e} s is below the trace spacing {dt:.3e} s; "
            "evaluate the model on a finer grid first"
        )
    dev = trace.values - trace.baseline
    margin = 0.0
    if jitter_fwhm > 0:
        sigma = fwhm_to_sigma(jitter_fwhm)
        half = int(math.ceil(4.0 * sigma / dt))
        kern = np.exp(-0.5 * ((np.arange(-half, half + 1) * dt) / sigma) ** 2)
        kern /= kern.sum()
        dev = np.convolve(dev, kern, mode="same")
        margin = half * dt
    tau = trace.tau_axis
    lo = tau[0] + margin + 0.5 * bin_width
    hi = tau[-1] - margin - 0.5 * bin_width
    k_lo = int(math.ceil(lo / bin_width - 1e-9))
    k_hi = int(math.floor(hi / bin_width + 1e-9))
    if k_hi < k_lo + 1:
        raise ValueError("trace span too short for the requested bin width")
    centers = bin_width * np.arange(k_lo, k_hi + 1)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dev[1:] + dev[:-1]) * dt)])
    edges_lo = np.interp(centers - 0.5 * bin_width, tau, cum)
    edges_hi = np.interp(centers + 0.5 * bin_width, tau, cum)
    binned = (edges_hi - edges_lo) / bin_width + trace.baseline
    meta = {**trace.meta, "jitter_fwhm": jitter_fwhm, "bin_width": bin_width}
    return CorrelationTrace(centers, np.maximum(binned, 0.0), trace.kind, meta=meta)
