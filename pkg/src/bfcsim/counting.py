"""Photon-counting layer: Monte Carlo timetag generation from sampled
thermal comb fields or analytic correlation traces, plus the raw-count
estimators that turn coincidence histograms back into correlation data.

Two generation backends are provided.  The thermal-field backend draws
circular-complex-Gaussian mode amplitudes (one per comb line for CW, one
per Schmidt mode per pulse for pulsed sources), evaluates the beam
intensity at candidate times, and thins an inhomogeneous Poisson process
per detector arm.  The density backend samples pair delays directly from
an analytic trace by inverse CDF and adds an accidental floor tuned to a
requested coincidence-to-accidental ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .comb import CombSpec, JsaGrid, PumpSpec
from .correlations import CorrelationTrace, TraceKind, time_transform
from .errors import NoDataError, RegimeError
from .units import FWHM_TO_SIGMA, TWO_PI

# CW fields are generated in coherence blocks stitched independently; the
# guard band discarded at each block edge decorrelates consecutive blocks
# and absorbs the circular wrap of the FFT filtering.  Lengths are in units
# of the coherence time 2*pi/linewidth.
_BLOCK_COHERENCE_TIMES = 64
_MARGIN_COHERENCE_TIMES = 8

# Envelope samples held in memory at once when batching blocks.
_BATCH_SAMPLES = 1 << 21

# Flat majorant for thinning, as a multiple of the mean detected rate.
# Exponential intensity statistics put the clipped tail near exp(-12).
_MAJORANT = 12.0

_MAX_BRIGHTNESS = 0.1


def _substream(seed: int, *path: int) -> np.random.Generator:
    """Deterministic child generator for (seed, purpose, index...) tuples."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(path)))


@dataclass(frozen=True)
class DetectorModel:
    """Detection chain parameters shared by both arms.

    jitter_fwhm is the combined coincidence jitter; each arm receives
    Gaussian timing noise of width jitter_fwhm/sqrt(2) so delay histograms
    are smeared by the stated value.
    """

    jitter_fwhm: float
    bin_width: float
    efficiency: float = 1.0
    accidental_rate: float = 0.0

    def __post_init__(self):
        if self.jitter_fwhm < 0:
            raise ValueError(f"jitter_fwhm must be >= 0, got {self.jitter_fwhm}")
        if self.bin_width <= 0:
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in (0, 1], got {self.efficiency}")
        if self.accidental_rate < 0:
            raise ValueError(f"accidental_rate must be >= 0, got {self.accidental_rate}")

    @property
    def arm_jitter_sigma(self) -> float:
        return self.jitter_fwhm * FWHM_TO_SIGMA / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class CoincidenceRecord:
    """Coincidence histogram with the singles and timing metadata needed
    by the estimators.  Delay bins are symmetric about zero; bin r covers
    delays within half a bin of r*bin_width."""

    histogram: np.ndarray
    bin_width: float
    acq_time: float
    singles_a: int
    singles_b: int
    seed: int
    rep_period: float | None = None
    times_a: np.ndarray | None = None
    times_b: np.ndarray | None = None

    def __post_init__(self):
        hist = np.asarray(self.histogram)
        if hist.ndim != 1 or hist.size % 2 != 1:
            raise ValueError("histogram must be a 1-d array of odd length")
        if not np.issubdtype(hist.dtype, np.integer):
            raise ValueError("histogram must hold integer counts")
        hist = hist.astype(np.int64, copy=True)
        if np.any(hist < 0):
            raise ValueError("histogram counts must be >= 0")
        if self.bin_width <= 0:
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        if self.acq_time <= 0:
            raise ValueError(f"acq_time must be > 0, got {self.acq_time}")
        if self.singles_a < 0 or self.singles_b < 0:
            raise ValueError("singles counts must be >= 0")
        if int(hist.sum()) > self.singles_a * self.singles_b:
            raise ValueError("histogram holds more pairs than the singles allow")
        if self.rep_period is not None and self.rep_period <= 0:
            raise ValueError(f"rep_period must be > 0, got {self.rep_period}")
        hist.flags.writeable = False
        object.__setattr__(self, "histogram", hist)
        for name in ("times_a", "times_b"):
            val = getattr(self, name)
            if val is not None:
                arr = np.sort(np.asarray(val, dtype=float))
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)

    @property
    def is_pulsed(self) -> bool:
        return self.rep_period is not None

    @property
    def delay_axis(self) -> np.ndarray:
        n_half = self.histogram.size // 2
        return (np.arange(self.histogram.size) - n_half) * self.bin_width

    @property
    def total_coincidences(self) -> int:
        return int(self.histogram.sum())


def _pair_histogram(
    times_a: np.ndarray,
    times_b: np.ndarray,
    n_half: int,
    bin_width: float,
    pair_chunk: int = 1 << 22,
) -> np.ndarray:
    """Histogram all cross-arm delays t_a - t_b within the bin window.

    Both inputs must be sorted.  Work is chunked over the a-stream so the
    transient pair arrays stay bounded regardless of count rates.
    """
    n_bins = 2 * n_half + 1
    hist = np.zeros(n_bins, dtype=np.int64)
    if times_a.size == 0 or times_b.size == 0:
        return hist
    edge = (n_half + 0.5) * bin_width
    span = max(times_a[-1] - times_a[0], bin_width)
    pairs_per_a = max(times_b.size * 2.0 * edge / span, 1.0)
    chunk = max(int(pair_chunk / pairs_per_a), 1)
    for start in range(0, times_a.size, chunk):
        ta = times_a[start : start + chunk]
        lo = np.searchsorted(times_b, ta - edge, side="left")
        hi = np.searchsorted(times_b, ta + edge, side="right")
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        run_starts = np.cumsum(counts) - counts
        b_idx = np.arange(total) - np.repeat(run_starts, counts) + np.repeat(lo, counts)
        delays = np.repeat(ta, counts) - times_b[b_idx]
        bins = np.rint(delays / bin_width).astype(np.int64) + n_half
        inside = (bins >= 0) & (bins < n_bins)
        hist += np.bincount(bins[inside], minlength=n_bins)
    return hist


def _finalize_record(
    times_a: np.ndarray,
    times_b: np.ndarray,
    det: DetectorModel,
    acq_time: float,
    max_delay: float,
    seed: int,
    rep_period: float | None,
    keep_timetags: bool,
) -> CoincidenceRecord:
    times_a = np.sort(times_a)
    times_b = np.sort(times_b)
    n_half = max(int(round(max_delay / det.bin_width)), 1)
    hist = _pair_histogram(times_a, times_b, n_half, det.bin_width)
    return CoincidenceRecord(
        histogram=hist,
        bin_width=det.bin_width,
        acq_time=acq_time,
        singles_a=times_a.size,
        singles_b=times_b.size,
        seed=seed,
        rep_period=rep_period,
        times_a=times_a if keep_timetags else None,
        times_b=times_b if keep_timetags else None,
    )


def _dark_times(rng: np.random.Generator, rate: float, acq_time: float) -> np.ndarray:
    if rate <= 0:
        return np.empty(0)
    n = rng.poisson(rate * acq_time)
    return rng.uniform(0.0, acq_time, n)


def _thermal_envelopes(
    rng: np.random.Generator,
    shape: tuple,
    n_samples: int,
    step: float,
    gamma: float,
) -> np.ndarray:
    """Unit-mean-power complex Gaussian envelopes whose power spectrum is a
    squared Lorentzian of half-linewidth gamma/2, matching the per-line
    marginal of a doubly resonant pair source."""
    omega = TWO_PI * np.fft.fftfreq(n_samples, d=step)
    filt = 1.0 / ((0.5 * gamma) ** 2 + omega**2)
    filt /= math.sqrt(float(np.mean(filt**2)))
    white = rng.standard_normal(shape + (n_samples, 2)) @ np.array([1.0, 1.0j])
    white *= math.sqrt(0.5)
    return np.fft.ifft(np.fft.fft(white, axis=-1) * filt, axis=-1)


_CATMULL_ROM = np.array(
    [
        [0.0, 2.0, 0.0, 0.0],
        [-1.0, 0.0, 1.0, 0.0],
        [2.0, -5.0, 4.0, -1.0],
        [-1.0, 3.0, -3.0, 1.0],
    ]
) * 0.5


def _catmull_rom_weights(frac: np.ndarray) -> np.ndarray:
    powers = np.stack([np.ones_like(frac), frac, frac**2, frac**3], axis=-1)
    return powers @ _CATMULL_ROM


def thermal_intensity_moment(
    comb: CombSpec,
    n_coherence_times: float = 4096.0,
    seed: int = 0,
    oversample: int = 16,
) -> float:
    """<I^2>/<I>^2 of the sampled beam intensity on the envelope lattice;
    2.0 for a thermal field.  Diagnostic hook for the sampler."""
    gamma = comb.linewidth_angular
    tau_c = TWO_PI / gamma
    step = tau_c / oversample
    n = int(n_coherence_times * oversample)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    env = _thermal_envelopes(rng, (comb.dimension,), n, step, gamma)
    t = np.arange(n) * step
    rel_bins = comb.bins - comb.bins.min()
    phases = np.exp(-1j * np.outer(rel_bins * comb.fsr_angular, t))
    field = np.sum(comb.bin_amplitudes[:, None] * env * phases, axis=0)
    intensity = np.abs(field) ** 2
    return float(np.mean(intensity**2) / np.mean(intensity) ** 2)


def _simulate_cw(
    comb: CombSpec,
    brightness: float,
    det: DetectorModel,
    acq_time: float,
    seed: int,
    max_delay: float,
    oversample: int,
    keep_timetags: bool,
) -> CoincidenceRecord:
    gamma = comb.linewidth_angular
    tau_c = TWO_PI / gamma
    step = tau_c / oversample
    n_core = _BLOCK_COHERENCE_TIMES * oversample
    n_margin = _MARGIN_COHERENCE_TIMES * oversample
    n_tot = n_core + 2 * n_margin
    t_core = n_core * step

    n_lines = comb.dimension
    flux = brightness * n_lines * gamma / TWO_PI
    rate_arm = 0.5 * det.efficiency * flux
    cand_per_block = _MAJORANT * rate_arm * t_core

    n_blocks = max(int(math.ceil(acq_time / t_core)), 1)
    total_time = n_blocks * t_core
    batch = max(int(_BATCH_SAMPLES / (n_lines * n_tot)), 1)

    rel_bins = comb.bins - comb.bins.min()
    weights = comb.bin_amplitudes
    offsets = np.arange(-1, 3)

    out_a: list = []
    out_b: list = []
    block0 = 0
    batch_index = 0
    while block0 < n_blocks:
        nb = min(batch, n_blocks - block0)
        rng = _substream(seed, 1, batch_index)
        env = _thermal_envelopes(rng, (nb, n_lines), n_tot, step, gamma)
        for arm_times in (out_a, out_b):
            n_cand = rng.poisson(cand_per_block * nb)
            pos = rng.uniform(0.0, float(nb * n_core), n_cand)
            accept_u = rng.random(n_cand)
            jit = (
                rng.standard_normal(n_cand)
                if det.jitter_fwhm > 0
                else np.zeros(n_cand)
            )
            if n_cand == 0:
                continue
            blk = np.floor(pos / n_core).astype(np.intp)
            x = pos - blk * n_core + n_margin
            i0 = np.floor(x).astype(np.intp)
            frac = x - i0
            w4 = _catmull_rom_weights(frac)
            gathered = env[blk[:, None, None], np.arange(n_lines)[None, :, None],
                           (i0[:, None, None] + offsets[None, None, :])]
            amps = np.einsum("cf,clf->cl", w4.astype(complex), gathered)
            t_local = (x - n_margin) * step
            phase = np.exp(-1j * np.outer(t_local, rel_bins * comb.fsr_angular))
            field = (amps * weights[None, :] * phase).sum(axis=1)
            intensity = np.abs(field) ** 2
            keep = accept_u < intensity / _MAJORANT
            times = (block0 + blk[keep]) * t_core + t_local[keep]
            if det.jitter_fwhm > 0:
                times = times + det.arm_jitter_sigma * jit[keep]
            arm_times.append(times)
        block0 += nb
        batch_index += 1

    dark_rng = _substream(seed, 2)
    times_a = np.concatenate(
        out_a + [_dark_times(dark_rng, det.accidental_rate, total_time)]
    ) if out_a or det.accidental_rate > 0 else np.empty(0)
    times_b = np.concatenate(
        out_b + [_dark_times(dark_rng, det.accidental_rate, total_time)]
    ) if out_b or det.accidental_rate > 0 else np.empty(0)
    return _finalize_record(
        times_a, times_b, det, total_time, max_delay, seed, None, keep_timetags
    )


def _pulsed_modes(jsa: JsaGrid, weight_floor: float = 0.9999, max_modes: int = 32):
    """Temporal Schmidt modes of the signal marginal and their weights."""
    u, s, _ = np.linalg.svd(jsa.amplitude * math.sqrt(jsa.cell_area))
    lam = s**2
    lam /= lam.sum()
    n_keep = int(np.searchsorted(np.cumsum(lam), weight_floor) + 1)
    n_keep = min(max(n_keep, 1), max_modes, lam.size)
    step = jsa.signal_step
    t, modes = time_transform(u[:, :n_keep], step, pad_factor=2, axis=0)
    dt = t[1] - t[0]
    norms = np.sqrt(np.sum(np.abs(modes) ** 2, axis=0) * dt)
    modes = modes / norms[None, :]
    return t, modes, lam[:n_keep]


def _simulate_pulsed(
    jsa: JsaGrid,
    pump: PumpSpec,
    comb: CombSpec | None,
    brightness: float,
    det: DetectorModel,
    acq_time: float,
    seed: int,
    max_delay: float,
    keep_timetags: bool,
) -> CoincidenceRecord:
    if pump.repetition_period is None:
        raise ValueError("pulsed backend needs a pump with a repetition period")
    t_rep = pump.repetition_period
    t, modes, lam = _pulsed_modes(jsa)
    dt = t[1] - t[0]
    n_modes = lam.size

    mean_shape = np.sum(lam[None, :] * np.abs(modes) ** 2, axis=1)
    support = np.flatnonzero(mean_shape > 1e-8 * mean_shape.max())
    t_lo, t_hi = t[support[0]], t[support[-1]]
    if t_hi - t_lo > t_rep:
        raise ValueError(
            f"pulse envelope support {t_hi - t_lo:.3e} s exceeds the repetition "
            f"period {t_rep:.3e} s; pulses would overlap"
        )

    if comb is not None:
        bin_weights = comb.bin_amplitudes
        rel_bins = comb.bins - comb.bins.min()
        fsr = comb.fsr_angular
    else:
        bin_weights = np.ones(1, dtype=complex)
        rel_bins = np.zeros(1)
        fsr = 0.0
    n_bins_src = bin_weights.size

    cdf = cumulative_trapezoid(mean_shape, t, initial=0.0)
    cdf /= cdf[-1]
    keep_cdf = np.concatenate(([True], np.diff(cdf) > 0))
    cdf_x, cdf_t = cdf[keep_cdf], t[keep_cdf]

    shape_norm = float(np.trapezoid(mean_shape, t))
    mean_det = 0.5 * det.efficiency * brightness
    n_pulses = max(int(round(acq_time / t_rep)), 1)
    total_time = n_pulses * t_rep
    pulse_batch = 1 << 15

    out_a: list = []
    out_b: list = []
    p0 = 0
    batch_index = 0
    mode_sigma = np.sqrt(0.5 * brightness * lam)
    while p0 < n_pulses:
        npls = min(pulse_batch, n_pulses - p0)
        rng = _substream(seed, 1, batch_index)
        coeff = rng.standard_normal((npls, n_bins_src, n_modes, 2)) @ np.array(
            [1.0, 1.0j]
        )
        coeff *= mode_sigma[None, None, :] * np.abs(bin_weights)[None, :, None]
        for arm_times in (out_a, out_b):
            n_cand = rng.poisson(_MAJORANT * mean_det * npls)
            u_pos = rng.uniform(0.0, 1.0, n_cand)
            pulse_of = rng.integers(0, npls, n_cand)
            accept_u = rng.random(n_cand)
            jit = (
                rng.standard_normal(n_cand)
                if det.jitter_fwhm > 0
                else np.zeros(n_cand)
            )
            if n_cand == 0:
                continue
            t_cand = np.interp(u_pos, cdf_x, cdf_t)
            mvals = np.empty((n_cand, n_modes), dtype=complex)
            for m in range(n_modes):
                mvals[:, m] = np.interp(t_cand, t, modes[:, m].real) + 1j * np.interp(
                    t_cand, t, modes[:, m].imag
                )
            per_bin = np.einsum("cm,cbm->cb", mvals, coeff[pulse_of])
            if n_bins_src > 1:
                phase = np.exp(-1j * np.outer(t_cand, rel_bins * fsr))
                field = (per_bin * phase).sum(axis=1)
            else:
                field = per_bin[:, 0]
            intensity = np.abs(field) ** 2
            local_mean = (brightness / shape_norm) * np.interp(t_cand, t, mean_shape)
            keep = accept_u * _MAJORANT * local_mean < intensity
            times = (p0 + pulse_of[keep]) * t_rep + (t_cand[keep] - t_lo)
            if det.jitter_fwhm > 0:
                times = times + det.arm_jitter_sigma * jit[keep]
            arm_times.append(times)
        p0 += npls
        batch_index += 1

    dark_rng = _substream(seed, 2)
    times_a = np.concatenate(
        out_a + [_dark_times(dark_rng, det.accidental_rate, total_time)]
    ) if out_a or det.accidental_rate > 0 else np.empty(0)
    times_b = np.concatenate(
        out_b + [_dark_times(dark_rng, det.accidental_rate, total_time)]
    ) if out_b or det.accidental_rate > 0 else np.empty(0)
    return _finalize_record(
        times_a, times_b, det, total_time, max_delay, seed, t_rep, keep_timetags
    )


def simulate_thermal_signal(
    source: CombSpec | JsaGrid,
    pump: PumpSpec,
    brightness: float,
    det: DetectorModel,
    acq_time: float,
    seed: int,
    *,
    comb: CombSpec | None = None,
    max_delay: float = 2e-9,
    oversample: int = 16,
    keep_timetags: bool = False,
) -> CoincidenceRecord:
    """Monte Carlo auto-correlation measurement of the unheralded signal beam.

    The beam is split 50:50 onto two detectors; each arm is an independently
    thinned point process driven by the same sampled intensity, so cross-arm
    coincidences carry the full bunching statistics.  A CombSpec source with
    a CW pump uses the stationary thermal-field backend; a JsaGrid source
    with a pulsed pump uses per-pulse Schmidt-mode sampling (optionally
    replicated over the bins of `comb`).

    brightness is the mean photon number per mode; values above 0.1 leave
    the low-gain regime the estimators assume and are rejected.
    """
    if brightness < 0:
        raise ValueError(f"brightness must be >= 0, got {brightness}")
    if brightness > _MAX_BRIGHTNESS:
        raise RegimeError(
            f"brightness {brightness} exceeds {_MAX_BRIGHTNESS}; multi-pair "
            "corrections beyond the sampled model would dominate"
        )
    if acq_time <= 0:
        raise ValueError(f"acq_time must be > 0, got {acq_time}")
    if max_delay <= 0:
        raise ValueError(f"max_delay must be > 0, got {max_delay}")

    if brightness == 0.0:
        n_half = max(int(round(max_delay / det.bin_width)), 1)
        return CoincidenceRecord(
            histogram=np.zeros(2 * n_half + 1, dtype=np.int64),
            bin_width=det.bin_width,
            acq_time=acq_time,
            singles_a=0,
            singles_b=0,
            seed=seed,
            rep_period=pump.repetition_period if pump.is_pulsed else None,
        )

    if isinstance(source, CombSpec):
        if pump.is_pulsed:
            raise ValueError(
                "a bare CombSpec source implies the CW backend; pulsed pumps "
                "need a JsaGrid source"
            )
        return _simulate_cw(
            source, brightness, det, acq_time, seed, max_delay, oversample,
            keep_timetags,
        )
    if isinstance(source, JsaGrid):
        if not pump.is_pulsed:
            raise ValueError("a JsaGrid source needs a pulsed pump")
        return _simulate_pulsed(
            source, pump, comb, brightness, det, acq_time, seed, max_delay,
            keep_timetags,
        )
    raise TypeError(f"source must be CombSpec or JsaGrid, got {type(source)!r}")


def simulate_from_density(
    trace: CorrelationTrace,
    pair_rate: float,
    car: float,
    det: DetectorModel,
    acq_time: float,
    seed: int,
    *,
    max_delay: float | None = None,
    keep_timetags: bool = False,
) -> CoincidenceRecord:
    """Synthetic coincidence record whose pair delays follow an analytic
    trace and whose accidental floor realizes the requested CAR.

    Pair arrival epochs are Poisson at pair_rate; each photon is thinned by
    the detector efficiency.  Uncorrelated singles are added per arm at the
    rate that makes the expected peak-bin to floor ratio equal `car`; a CAR
    already below the intrinsic pair-singles floor is unreachable.
    """
    if car <= 0:
        raise ValueError(f"car must be > 0, got {car}")
    if car <= 1:
        raise ValueError(f"car must exceed 1 to define a peak, got {car}")
    if pair_rate <= 0:
        raise ValueError(f"pair_rate must be > 0, got {pair_rate}")
    if acq_time <= 0:
        raise ValueError(f"acq_time must be > 0, got {acq_time}")

    tau = trace.tau_axis
    vals = trace.values
    area = float(np.trapezoid(vals, tau))
    if area <= 0:
        raise ValueError("trace carries no weight to sample from")
    if max_delay is None:
        max_delay = float(max(abs(tau[0]), abs(tau[-1])))
    n_half = max(int(round(max_delay / det.bin_width)), 1)

    cdf = cumulative_trapezoid(vals, tau, initial=0.0) / area
    keep_cdf = np.concatenate(([True], np.diff(cdf) > 0))
    cdf_x, cdf_t = cdf[keep_cdf], tau[keep_cdf]

    # Expected true coincidences in the fullest delay bin sets the CAR scale.
    edges = (np.arange(2 * n_half + 2) - n_half - 0.5) * det.bin_width
    bin_prob = np.diff(np.interp(edges, cdf_t, cdf_x, left=0.0, right=1.0))
    eff = det.efficiency
    peak_per_bin = pair_rate * eff * eff * acq_time * float(bin_prob.max())
    floor_needed = peak_per_bin / (car - 1.0)
    rate_needed = math.sqrt(floor_needed / (det.bin_width * acq_time))
    extra_rate = rate_needed - pair_rate * eff - det.accidental_rate
    if extra_rate < 0:
        raise ValueError(
            f"requested CAR {car} is unreachable: intrinsic singles already "
            f"produce a floor above the target (needed extra rate {extra_rate:.3e}/s)"
        )

    rng = _substream(seed, 1)
    n_pairs = rng.poisson(pair_rate * acq_time)
    t_a = rng.uniform(0.0, acq_time, n_pairs)
    delays = np.interp(rng.uniform(0.0, 1.0, n_pairs), cdf_x, cdf_t)
    t_b = t_a - delays
    keep_a = rng.random(n_pairs) < eff
    keep_b = rng.random(n_pairs) < eff

    bg_rng = _substream(seed, 2)
    bg_rate = extra_rate + det.accidental_rate
    times_a = np.concatenate([t_a[keep_a], _dark_times(bg_rng, bg_rate, acq_time)])
    times_b = np.concatenate([t_b[keep_b], _dark_times(bg_rng, bg_rate, acq_time)])
    if det.jitter_fwhm > 0:
        jit_rng = _substream(seed, 3)
        times_a = times_a + det.arm_jitter_sigma * jit_rng.standard_normal(times_a.size)
        times_b = times_b + det.arm_jitter_sigma * jit_rng.standard_normal(times_b.size)
    return _finalize_record(
        times_a, times_b, det, acq_time, max_delay, seed, None, keep_timetags
    )


def _estimator_guard(rec: CoincidenceRecord):
    if rec.singles_a * rec.singles_b == 0:
        raise NoDataError("record has an empty arm; nothing to normalize by")


def estimate_g2_cw(rec: CoincidenceRecord) -> CorrelationTrace:
    """Normalized CW auto-correlation estimate from raw counts:
    g2(r T_bin) = (T_acq / T_bin) * N_ab(r) / (N_a N_b), with per-bin
    Poisson standard errors."""
    if rec.is_pulsed:
        raise ValueError("record is pulsed; use the density estimator")
    _estimator_guard(rec)
    scale = rec.acq_time / (rec.bin_width * rec.singles_a * rec.singles_b)
    counts = rec.histogram.astype(float)
    return CorrelationTrace(
        tau_axis=rec.delay_axis,
        values=counts * scale,
        kind=TraceKind.DIMENSIONLESS,
        stderr=np.sqrt(np.maximum(counts, 1.0)) * scale,
        meta={
            "estimator": "cw-histogram",
            "coincidences": int(counts.sum()),
            "singles_a": rec.singles_a,
            "singles_b": rec.singles_b,
        },
    )


def estimate_g2_density(rec: CoincidenceRecord) -> CorrelationTrace:
    """Pulse-integrated correlation density estimate:
    g2_density(r T_bin) = (T_acq / (T_bin T_rep)) * N_ab(r) / (N_a N_b).
    Its area over the central peak estimates the integrated auto-correlation."""
    if not rec.is_pulsed:
        raise ValueError("record is CW; use the dimensionless estimator")
    _estimator_guard(rec)
    scale = rec.acq_time / (
        rec.bin_width * rec.rep_period * rec.singles_a * rec.singles_b
    )
    counts = rec.histogram.astype(float)
    return CorrelationTrace(
        tau_axis=rec.delay_axis,
        values=counts * scale,
        kind=TraceKind.DENSITY,
        stderr=np.sqrt(np.maximum(counts, 1.0)) * scale,
        meta={
            "estimator": "pulsed-density-histogram",
            "coincidences": int(counts.sum()),
            "rep_period": rec.rep_period,
        },
    )


def estimate_car(
    rec: CoincidenceRecord,
    peak_halfwidth: float,
    exclude_halfwidth: float | None = None,
) -> float:
    """Mean in-peak over mean off-peak histogram level.

    The peak window is centered on the fullest bin; bins between the peak
    window and exclude_halfwidth (default twice the peak half-width) belong
    to neither region.  A zero off-peak level returns the infinite-CAR
    sentinel."""
    if peak_halfwidth <= 0:
        raise ValueError(f"peak_halfwidth must be > 0, got {peak_halfwidth}")
    if exclude_halfwidth is None:
        exclude_halfwidth = 2.0 * peak_halfwidth
    if exclude_halfwidth < peak_halfwidth:
        raise ValueError("exclude_halfwidth must be >= peak_halfwidth")
    _estimator_guard(rec)
    axis = rec.delay_axis
    center = axis[int(np.argmax(rec.histogram))]
    rel = np.abs(axis - center)
    in_peak = rel <= peak_halfwidth
    off_peak = rel > exclude_halfwidth
    if not np.any(off_peak):
        raise ValueError(
            "no off-peak bins inside the record window; widen max_delay or "
            "shrink the exclusion zone"
        )
    peak_level = float(rec.histogram[in_peak].mean())
    floor_level = float(rec.histogram[off_peak].mean())
    if floor_level == 0.0:
        return math.inf
    return peak_level / floor_level
