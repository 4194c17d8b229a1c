"""Comb geometry, lineshapes, pump spectra, and joint spectral amplitudes.

All quantities are angular frequency (rad/s) and seconds; the config layer
converts from GHz/ps at the boundary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import RegimeError, ResolutionError, ResourceLimitError
from .units import TWO_PI, fwhm_to_sigma


class PumpKind(enum.Enum):
    MONOCHROMATIC = "monochromatic"
    GAUSSIAN_PULSE = "gaussian-pulse"
    RECTANGULAR_PULSE = "rectangular-pulse"


def _readonly(arr):
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class CombSpec:
    """Frequency-bin grid: d Lorentzian lines of common width spaced by the FSR.

    Bin k sits at pump_center_angular + k * fsr_angular for
    k in [first_bin, first_bin + dimension); the idler partner of bin k sits
    at pump_center_angular - k * fsr_angular.  bin_amplitudes are complex
    weights, normalized to unit total power on construction (equal weights by
    default).  parent_bins optionally records, for a comb derived by
    modulation and filtering, which original bin each line came from.
    """

    fsr_angular: float
    linewidth_angular: float
    dimension: int
    first_bin: int = 1
    pump_center_angular: float = 0.0
    bin_amplitudes: np.ndarray | None = None
    parent_bins: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.fsr_angular <= 0:
            raise ValueError(f"fsr_angular must be positive, got {self.fsr_angular}")
        if self.linewidth_angular <= 0:
            raise ValueError(
                f"linewidth_angular must be positive, got {self.linewidth_angular}"
            )
        if self.linewidth_angular >= self.fsr_angular:
            raise ValueError(
                "linewidth_angular must lie below fsr_angular: bins overlap at "
                f"{self.linewidth_angular:.3e} >= {self.fsr_angular:.3e}"
            )
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension}")
        if int(self.first_bin) != self.first_bin or self.first_bin < 1:
            raise ValueError(f"first_bin must be a positive integer, got {self.first_bin}")
        amps = self.bin_amplitudes
        if amps is None:
            amps = np.ones(self.dimension, dtype=complex)
        amps = np.asarray(amps, dtype=complex)
        if amps.shape != (self.dimension,):
            raise ValueError(
                f"bin_amplitudes must have shape ({self.dimension},), got {amps.shape}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("bin_amplitudes must be finite")
        power = float(np.sum(np.abs(amps) ** 2))
        if power <= 0.0:
            raise ValueError("bin_amplitudes must carry positive total power")
        object.__setattr__(self, "bin_amplitudes", _readonly(amps / math.sqrt(power)))
        if self.parent_bins is not None:
            parents = tuple(int(p) for p in self.parent_bins)
            if len(parents) != self.dimension:
                raise ValueError("parent_bins must list one parent per line")
            object.__setattr__(self, "parent_bins", parents)

    @property
    def bins(self) -> np.ndarray:
        return np.arange(self.first_bin, self.first_bin + self.dimension)

    @property
    def signal_centers(self) -> np.ndarray:
        return self.pump_center_angular + self.bins * self.fsr_angular

    @property
    def idler_centers(self) -> np.ndarray:
        return self.pump_center_angular - self.bins * self.fsr_angular

    def has_equal_weights(self, tol: float = 0.01) -> bool:
        mags = np.abs(self.bin_amplitudes)
        return float(mags.max() - mags.min()) <= tol * float(mags.max())


@dataclass(frozen=True)
class PumpSpec:
    """Pump drive: monochromatic, or a pulse train with a Gaussian spectrum.

    bandwidth_fwhm_angular is the FWHM of the pump *intensity* spectrum.
    Rectangular drive pulses are represented by their transform-limited
    Gaussian equivalent of matched spectral FWHM; the nominal duration is
    kept for bookkeeping.
    """

    kind: PumpKind
    bandwidth_fwhm_angular: float = 0.0
    duration: float = 0.0
    repetition_period: float = 0.0

    def __post_init__(self):
        if self.kind is PumpKind.MONOCHROMATIC:
            if self.bandwidth_fwhm_angular or self.duration or self.repetition_period:
                raise ValueError(
                    "monochromatic pump takes no bandwidth, duration, or repetition period"
                )
            return
        if self.repetition_period <= 0:
            raise ValueError("pulsed pump requires a positive repetition_period")
        if self.bandwidth_fwhm_angular <= 0:
            raise ValueError("pulsed pump requires a positive spectral bandwidth")
        if self.kind is PumpKind.RECTANGULAR_PULSE and self.duration <= 0:
            raise ValueError("rectangular-pulse pump requires a positive duration")

    @classmethod
    def cw(cls) -> "PumpSpec":
        return cls(kind=PumpKind.MONOCHROMATIC)

    @classmethod
    def gaussian_pulse(cls, bandwidth_fwhm_angular: float, repetition_period: float) -> "PumpSpec":
        return cls(
            kind=PumpKind.GAUSSIAN_PULSE,
            bandwidth_fwhm_angular=bandwidth_fwhm_angular,
            repetition_period=repetition_period,
        )

    @classmethod
    def rectangular_pulse(cls, duration: float, repetition_period: float) -> "PumpSpec":
        if duration <= 0:
            raise ValueError("duration must be positive")
        # sinc^2 power spectrum of a flat pulse of length T has FWHM 0.8859/T
        bw = TWO_PI * 0.8858929 / duration
        return cls(
            kind=PumpKind.RECTANGULAR_PULSE,
            bandwidth_fwhm_angular=bw,
            duration=duration,
            repetition_period=repetition_period,
        )

    @property
    def is_pulsed(self) -> bool:
        return self.kind is not PumpKind.MONOCHROMATIC

    @property
    def amplitude_sigma(self) -> float:
        """Standard deviation of the Gaussian amplitude spectrum."""
        if not self.is_pulsed:
            raise RegimeError("monochromatic pump has no spectral width")
        # intensity std = fwhm_to_sigma(FWHM); amplitude profile is sqrt(2) wider
        return fwhm_to_sigma(self.bandwidth_fwhm_angular) * math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class SampledSpectrum:
    """Complex samples on a uniform, increasing angular-frequency axis."""

    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if om.ndim != 1 or om.size < 2:
            raise ValueError("omega must be a 1-d axis with at least 2 samples")
        if vals.shape != om.shape:
            raise ValueError("values must match the omega axis")
        steps = np.diff(om)
        if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("omega must be uniform and increasing")
        if not (np.all(np.isfinite(om)) and np.all(np.isfinite(vals))):
            raise ValueError("spectrum samples must be finite")
        object.__setattr__(self, "omega", _readonly(om))
        object.__setattr__(self, "values", _readonly(vals))

    @property
    def step(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def power_norm(self) -> float:
        """Riemann integral of |values|^2 over omega."""
        return float(np.sum(np.abs(self.values) ** 2) * self.step)


def lorentzian_line(omega, center: float, gamma: float):
    """Unit-normalized complex Lorentzian line amplitude.

    Value is sqrt(gamma/2pi) / (gamma/2 - i(omega - center)); the integral
    of the squared modulus over omega is 1.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    om = np.asarray(omega, dtype=float)
    return np.sqrt(gamma / TWO_PI) / (0.5 * gamma - 1j * (om - center))


def build_cw_marginal(
    comb: CombSpec,
    samples_per_linewidth: int = 64,
    extent_linewidths: float = 5.0,
) -> SampledSpectrum:
    """Signal-side spectral amplitude for a monochromatic pump.

    Sum over bins of alpha_k / ((gamma/2)^2 + (omega - omega_k)^2), sampled
    across all bins and normalized to unit L2 norm.
    """
    if samples_per_linewidth < 8:
        raise ResolutionError(
            f"need >= 8 samples per linewidth, got {samples_per_linewidth}"
        )
    gamma = comb.linewidth_angular
    step = gamma / samples_per_linewidth
    lo = comb.signal_centers.min() - extent_linewidths * gamma
    hi = comb.signal_centers.max() + extent_linewidths * gamma
    n = int(round((hi - lo) / step)) + 1
    omega = lo + step * np.arange(n)
    vals = np.zeros(n, dtype=complex)
    for amp, center in zip(comb.bin_amplitudes, comb.signal_centers):
        vals += amp / ((0.5 * gamma) ** 2 + (omega - center) ** 2)
    norm = math.sqrt(float(np.sum(np.abs(vals) ** 2)) * step)
    return SampledSpectrum(omega, vals / norm)


def compute_fp(
    pump: PumpSpec,
    resonance_gamma: float,
    resonance_center: float = 0.0,
    samples_per_linewidth: int = 16,
    width_factor: float = 8.0,
    min_half_width: float = 0.0,
) -> SampledSpectrum:
    """Energy-conservation kernel: self-convolution of the filtered pump.

    The pump amplitude spectrum is filtered by the pump resonance line and
    convolved with itself.  The output axis is the two-photon sum frequency,
    centered on twice the resonance center.
    """
    if not pump.is_pulsed:
        raise RegimeError(
            "monochromatic pump has no pulse kernel; the CW path uses build_cw_marginal"
        )
    if resonance_gamma <= 0:
        raise ValueError(f"resonance_gamma must be positive, got {resonance_gamma}")
    half = 0.5 * width_factor * (pump.bandwidth_fwhm_angular + 2.0 * resonance_gamma)
    half = max(half, 0.5 * min_half_width)
    step = resonance_gamma / samples_per_linewidth
    n = int(math.ceil(half / step))
    x = step * (np.arange(2 * n + 1) - n)
    sig = pump.amplitude_sigma
    filtered = np.exp(-(x**2) / (2.0 * sig**2)) * lorentzian_line(x, 0.0, resonance_gamma)
    conv = fftconvolve(filtered, filtered) * step
    axis = step * (np.arange(4 * n + 1) - 2 * n) + 2.0 * resonance_center
    return SampledSpectrum(axis, conv)


@dataclass(frozen=True, eq=False)
class JsaGrid:
    """Complex joint spectral amplitude on a rectangular frequency grid.

    amplitude[i, j] corresponds to (signal_axis[i], idler_axis[j]).
    """

    signal_axis: np.ndarray
    idler_axis: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signal_axis, dtype=float)
        i = np.asarray(self.idler_axis, dtype=float)
        amp = np.asarray(self.amplitude, dtype=complex)
        for name, ax in (("signal_axis", s), ("idler_axis", i)):
            if ax.ndim != 1 or ax.size < 2:
                raise ValueError(f"{name} must be a 1-d axis with at least 2 samples")
            steps = np.diff(ax)
            if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise ValueError(f"{name} must be uniform and increasing")
        if amp.shape != (s.size, i.size):
            raise ValueError(
                f"amplitude shape {amp.shape} does not match axes ({s.size}, {i.size})"
            )
        if not np.all(np.isfinite(amp)):
            raise ValueError("amplitude must be finite")
        if not np.any(amp):
            raise ValueError("amplitude must not be identically zero")
        object.__setattr__(self, "signal_axis", _readonly(s))
        object.__setattr__(self, "idler_axis", _readonly(i))
        object.__setattr__(self, "amplitude", _readonly(amp))

    @property
    def signal_step(self) -> float:
        return float(self.signal_axis[1] - self.signal_axis[0])

    @property
    def idler_step(self) -> float:
        return float(self.idler_axis[1] - self.idler_axis[0])

    @property
    def cell_area(self) -> float:
        return self.signal_step * self.idler_step

    @property
    def norm(self) -> float:
        """Total power: sum of |amplitude|^2 times the grid cell area."""
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.cell_area)

    def normalized(self) -> "JsaGrid":
        return JsaGrid(self.signal_axis, self.idler_axis, self.amplitude / math.sqrt(self.norm))

    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2


@dataclass(frozen=True)
class GaussianJsaSpec:
    """Gaussian model amplitude: a pump envelope of width sigma_p along the
    sum frequency and a bin profile of width sigma_r, replicated on the comb.

    Both widths must stay well below the FSR for the bins to be separable
    (enforced as sigma < max_sigma_ratio * fsr).
    """

    comb: CombSpec
    sigma_p: float
    sigma_r: float
    max_sigma_ratio: float = 0.25

    def __post_init__(self):
        if self.sigma_p <= 0 or self.sigma_r <= 0:
            raise ValueError("sigma_p and sigma_r must be positive")
        if not 0 < self.max_sigma_ratio <= 0.5:
            raise ValueError("max_sigma_ratio must lie in (0, 0.5]")
        limit = self.max_sigma_ratio * self.comb.fsr_angular
        if self.sigma_p >= limit or self.sigma_r >= limit:
            raise RegimeError(
                "sigma_p and sigma_r must stay below "
                f"{self.max_sigma_ratio} * fsr = {limit:.3e} rad/s for separable bins"
            )


def _check_memory(n_signal: int, n_idler: int, cap_bytes: int, samples: float):
    need = 16 * n_signal * n_idler
    if need > cap_bytes:
        scale = math.sqrt(cap_bytes / need)
        suggestion = max(1, int(samples * scale))
        raise ResourceLimitError(
            f"grid of {n_signal} x {n_idler} complex samples needs {need/1e6:.0f} MB, "
            f"above the {cap_bytes/1e6:.0f} MB cap; retry with about "
            f"{suggestion} samples per width",
            suggested_samples=suggestion,
        )


def build_gaussian_jsa(
    spec: GaussianJsaSpec,
    samples_per_sigma: float = 8.0,
    extent_sigmas: float = 4.5,
    memory_cap_bytes: int = 2**28,
) -> JsaGrid:
    """Sample the Gaussian model amplitude on a grid covering all bins."""
    comb = spec.comb
    center = comb.pump_center_angular
    # narrowest feature: the antidiagonal width 1/sqrt(1/sigma_p^2 + 1/sigma_r^2)
    narrow = 1.0 / math.sqrt(1.0 / spec.sigma_p**2 + 1.0 / spec.sigma_r**2)
    step = narrow / samples_per_sigma
    pad = extent_sigmas * max(spec.sigma_r, spec.sigma_p)

    def _axis(centers):
        lo = centers.min() - pad
        hi = centers.max() + pad
        n = int(round((hi - lo) / step)) + 1
        return lo + step * np.arange(n)

    s_axis = _axis(comb.signal_centers)
    i_axis = _axis(comb.idler_centers)
    _check_memory(s_axis.size, i_axis.size, memory_cap_bytes, samples_per_sigma)

    sum_freq = s_axis[:, None] + i_axis[None, :] - 2.0 * center
    psi = np.zeros((s_axis.size, i_axis.size), dtype=complex)
    pump_env = np.exp(-(sum_freq**2) / spec.sigma_p**2)
    for amp, cs, ci in zip(comb.bin_amplitudes, comb.signal_centers, comb.idler_centers):
        bin_env = np.exp(
            -((s_axis[:, None] - cs) ** 2 + (i_axis[None, :] - ci) ** 2) / spec.sigma_r**2
        )
        psi += amp * bin_env
    psi *= pump_env
    return JsaGrid(s_axis, i_axis, psi).normalized()


def build_pulsed_jsa(
    comb: CombSpec,
    pump: PumpSpec,
    samples_per_linewidth: int = 16,
    extent_linewidths: float = 12.0,
    memory_cap_bytes: int = 2**28,
) -> JsaGrid:
    """Four-wave-mixing amplitude for a pulse-pumped ring.

    Sum over bins of F_p(omega_s + omega_i) l_k(omega_s) l_{-k}(omega_i)
    with F_p the filtered-pump self-convolution; normalized to unit power.
    """
    if not pump.is_pulsed:
        raise RegimeError("build_pulsed_jsa needs a pulsed pump; CW uses build_cw_marginal")
    gamma = comb.linewidth_angular
    if pump.bandwidth_fwhm_angular >= 0.25 * comb.fsr_angular and comb.dimension > 1:
        raise RegimeError(
            "pump bandwidth must stay well below the FSR for separable bins"
        )
    if pump.repetition_period < 16.0 / gamma:
        raise ValueError(
            "repetition_period shorter than the correlation envelope support "
            f"(need >= {16.0 / gamma:.3e} s); pulses would overlap"
        )
    step = gamma / samples_per_linewidth
    pad = extent_linewidths * gamma + 4.0 * math.sqrt(2.0) * pump.amplitude_sigma

    def _axis(centers):
        lo = centers.min() - pad
        hi = centers.max() + pad
        n = int(round((hi - lo) / step)) + 1
        return lo + step * np.arange(n)

    s_axis = _axis(comb.signal_centers)
    i_axis = _axis(comb.idler_centers)
    _check_memory(s_axis.size, i_axis.size, memory_cap_bytes, samples_per_linewidth)

    center = comb.pump_center_angular
    span = (
        max(
            abs(s_axis[0] + i_axis[0] - 2 * center),
            abs(s_axis[-1] + i_axis[-1] - 2 * center),
        )
        + 4 * step
    )
    fp = compute_fp(
        pump,
        gamma,
        resonance_center=center,
        samples_per_linewidth=samples_per_linewidth,
        min_half_width=2.0 * span,
    )

    lines = np.zeros((s_axis.size, i_axis.size), dtype=complex)
    for amp, cs, ci in zip(comb.bin_amplitudes, comb.signal_centers, comb.idler_centers):
        lines += amp * np.outer(
            lorentzian_line(s_axis, cs, gamma), lorentzian_line(i_axis, ci, gamma)
        )
    sum_freq = (s_axis[:, None] + i_axis[None, :]).ravel()
    fp_vals = np.interp(sum_freq, fp.omega, fp.values.real, left=0.0, right=0.0) + 1j * np.interp(
        sum_freq, fp.omega, fp.values.imag, left=0.0, right=0.0
    )
    psi = lines * fp_vals.reshape(s_axis.size, i_axis.size)
    return JsaGrid(s_axis, i_axis, psi).normalized()


@dataclass(frozen=True, eq=False)
class JsiResult:
    """Bin-resolved joint spectral intensity and its coincidence-to-accidental
    ratio (mean diagonal over mean off-diagonal cell mass)."""

    matrix: np.ndarray
    bins: np.ndarray
    car: float
    car_infinite: bool

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(np.asarray(self.matrix, dtype=float)))
        object.__setattr__(self, "bins", _readonly(np.asarray(self.bins, dtype=int)))


def car_from_matrix(matrix: np.ndarray) -> tuple[float, bool]:
    """Mean-diagonal over mean-off-diagonal ratio; flags the single-bin /
    zero-background sentinel."""
    matrix = np.asarray(matrix, dtype=float)
    d = matrix.shape[0]
    diag_mean = float(np.trace(matrix)) / d
    if d == 1:
        return math.inf, True
    off_sum = float(matrix.sum()) - float(np.trace(matrix))
    off_mean = off_sum / (d * d - d)
    if off_mean <= 0.0:
        return math.inf, True
    return diag_mean / off_mean, False


def accidental_floor_for_car(matrix: np.ndarray, target_car: float) -> float:
    """Uniform per-cell floor that brings the matrix CAR to target_car."""
    if not target_car > 1.0:
        raise ValueError(f"target CAR must exceed 1, got {target_car}")
    matrix = np.asarray(matrix, dtype=float)
    d = matrix.shape[0]
    if d < 2:
        raise ValueError("single-bin matrix has no off-diagonal cells to floor")
    diag_mean = float(np.trace(matrix)) / d
    off_mean = (float(matrix.sum()) - float(np.trace(matrix))) / (d * d - d)
    floor = (diag_mean - target_car * off_mean) / (target_car - 1.0)
    if floor < 0.0:
        raise ValueError(
            f"matrix CAR is already below {target_car}; no nonnegative floor reaches it"
        )
    return floor


def jsi_and_car(jsa: JsaGrid, comb: CombSpec, accidental_floor: float = 0.0) -> JsiResult:
    """Integrate |psi|^2 over each signal-bin x idler-bin cell.

    Cells are FSR-wide squares centered on the bin crossings; an optional
    uniform accidental floor (per cell) models measured background.
    """
    if accidental_floor < 0:
        raise ValueError("accidental_floor must be nonnegative")
    half = 0.5 * comb.fsr_angular
    inten = jsa.intensity()
    cell = jsa.cell_area

    def _slices(axis, centers):
        out = []
        for c in centers:
            if c < axis[0] - half or c > axis[-1] + half:
                raise ValueError(
                    f"bin center {c:.3e} rad/s lies outside the sampled grid"
                )
            out.append(np.searchsorted(axis, (c - half, c + half)))
        return out

    s_slices = _slices(jsa.signal_axis, comb.signal_centers)
    i_slices = _slices(jsa.idler_axis, comb.idler_centers)
    d = comb.dimension
    matrix = np.empty((d, d), dtype=float)
    for a, (s0, s1) in enumerate(s_slices):
        for b, (i0, i1) in enumerate(i_slices):
            matrix[a, b] = float(inten[s0:s1, i0:i1].sum()) * cell
    matrix += accidental_floor
    car, infinite = car_from_matrix(matrix)
    return JsiResult(matrix=matrix, bins=comb.bins, car=car, car_infinite=infinite)
