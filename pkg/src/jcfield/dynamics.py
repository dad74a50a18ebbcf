"""First-order correlation dynamics of a two-level system in a field mode.

With the field initially in a mixture with number distribution rho_nn and
the atom excited, the resonant correlation sum is

    S1(z) = sum_n rho_nn sin^2( sqrt((n+1)/(nbar+1)) z ),

in the normalized time z = sqrt(nbar+1) * (coupling) * t.  Off resonance,
with the dimensionless detuning Delta = (omega - Omega)^2 / (4 gamma^2),
each term is weighted by (n+1)/(n+1+Delta) and oscillates at
sqrt((n+1+Delta)/(nbar+1)).  The full correlation function is
prefactor * (nbar + S1); the negative of S1 is the atomic inversion.

The sampling grid always resolves the fastest Rabi term (at least
``samples_per_period`` points per period of the highest retained photon
number), which is what makes long-window averages and envelope detection
trustworthy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .states import PhotonDistribution

__all__ = [
    "Mode",
    "DynamicsConfig",
    "TimeSeries",
    "EnvelopeMetrics",
    "s1_series",
    "s1_resonant",
    "s1_nonresonant",
    "time_average_closed",
    "envelope_metrics",
]


class Mode(str, Enum):
    RESONANT = "resonant"
    NONRESONANT = "nonresonant"


@dataclass(frozen=True)
class DynamicsConfig:
    """Sampling parameters for the correlation sum.

    ``delta`` is the dimensionless detuning, ``z_max`` the normalized-time
    bound, ``samples_per_period`` the grid density relative to the fastest
    Rabi period, ``eps_tail`` the photon-sum truncation target, and
    ``prefactor`` an optional overall scale for the correlation function.
    """

    z_max: float
    delta: float = 0.0
    samples_per_period: int = 20
    eps_tail: float = 1e-8
    prefactor: float = 1.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.z_max <= 0:
            raise ValueError("z_max must be > 0")
        if self.samples_per_period < 8:
            raise ValueError("samples_per_period must be >= 8")


@dataclass(frozen=True)
class TimeSeries:
    z: np.ndarray
    s1: np.ndarray
    mode: Mode
    time_average: float
    envelope_max: float
    nbar: float
    delta: float

    def __len__(self) -> int:
        return len(self.z)


def _rabi_freqs(n_top: int, nbar: float, delta: float) -> np.ndarray:
    n = np.arange(n_top + 1, dtype=float)
    return np.sqrt((n + 1.0 + delta) / (nbar + 1.0))


def sample_grid(n_top: int, nbar: float, delta: float, z_max: float, samples_per_period: int) -> np.ndarray:
    """Uniform z grid resolving the fastest retained Rabi period."""
    w_fast = math.sqrt((n_top + 1.0 + delta) / (nbar + 1.0))
    dz_target = math.pi / w_fast / samples_per_period
    m = max(16, int(math.ceil(z_max / dz_target)))
    return np.linspace(0.0, z_max, m + 1)


def s1_series(probs: np.ndarray, nbar: float, delta: float, z: np.ndarray, mode: Mode) -> TimeSeries:
    """Termwise correlation sum on a given grid (fixed summation order)."""
    probs = np.asarray(probs, dtype=float)
    z = np.asarray(z, dtype=float)
    freqs = _rabi_freqs(len(probs) - 1, nbar, delta)
    weights = probs * (np.arange(len(probs)) + 1.0) / (np.arange(len(probs)) + 1.0 + delta)
    s1 = np.empty_like(z)
    chunk = max(1, int(4_000_000 // max(len(probs), 1)))
    for lo in range(0, len(z), chunk):
        zz = z[lo : lo + chunk]
        s1[lo : lo + chunk] = np.sin(np.outer(zz, freqs)) ** 2 @ weights
    avg = float(np.mean(s1))
    env = 0.5 * float(np.max(s1) - np.min(s1))
    return TimeSeries(z=z, s1=s1, mode=mode, time_average=avg, envelope_max=env, nbar=nbar, delta=delta)


def s1_resonant(pmf: PhotonDistribution, cfg: DynamicsConfig) -> TimeSeries:
    """Resonant correlation sum; every term has unit weight."""
    nbar = pmf.mean()
    z = sample_grid(pmf.n_max, nbar, 0.0, cfg.z_max, cfg.samples_per_period)
    return s1_series(pmf.probs, nbar, 0.0, z, Mode.RESONANT)


def s1_nonresonant(pmf: PhotonDistribution, cfg: DynamicsConfig) -> TimeSeries:
    """Detuned correlation sum; reduces exactly to the resonant one at delta = 0."""
    nbar = pmf.mean()
    z = sample_grid(pmf.n_max, nbar, cfg.delta, cfg.z_max, cfg.samples_per_period)
    mode = Mode.RESONANT if cfg.delta == 0.0 else Mode.NONRESONANT
    return s1_series(pmf.probs, nbar, cfg.delta, z, mode)


def time_average_closed(pmf: PhotonDistribution, delta: float) -> float:
    """Infinite-time mean of the detuned sum: sin^2 averages to 1/2."""
    n = np.arange(pmf.n_max + 1, dtype=float)
    return 0.5 * float(np.sum(pmf.probs * (n + 1.0) / (n + 1.0 + delta)))


# ----------------------------------------------------------------------
# collapse / revival quantification
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeMetrics:
    """Windowed-amplitude summary of a correlation series.

    ``collapse_time`` is the first window center where the oscillation
    amplitude drops below 10% of its initial value (None when it never
    does, e.g. a number state); ``revival_centers`` are the subsequent
    envelope maxima with at least 5% (of the initial amplitude) rise on
    both flanks.
    """

    collapse_time: float | None
    revival_centers: np.ndarray
    window: float
    centers: np.ndarray
    amplitude: np.ndarray


def envelope_metrics(series: TimeSeries) -> EnvelopeMetrics:
    """Detect collapse and revivals from a sliding-window amplitude.

    The window spans four periods of the slowest Rabi term; the amplitude
    within a window is half its max-min spread.  Detection thresholds
    (10% collapse, 5% prominence) are fixed so results are reproducible.
    """
    w_slow = math.sqrt((1.0 + series.delta) / (series.nbar + 1.0))
    window = 4.0 * math.pi / w_slow
    z, s1 = series.z, series.s1
    if z[-1] <= window:
        raise ValueError("series shorter than one detection window")
    seg = max(1, int(round(window / 8.0 / (z[1] - z[0]))))
    n_seg = len(s1) // seg
    trimmed = s1[: n_seg * seg].reshape(n_seg, seg)
    seg_max = trimmed.max(axis=1)
    seg_min = trimmed.min(axis=1)
    k = 8  # segments per window
    if n_seg < k:
        raise ValueError("series shorter than one detection window")
    wmax = np.array([seg_max[i : i + k].max() for i in range(n_seg - k + 1)])
    wmin = np.array([seg_min[i : i + k].min() for i in range(n_seg - k + 1)])
    amp = 0.5 * (wmax - wmin)
    centers = (np.arange(n_seg - k + 1) + k / 2.0) * seg * (z[1] - z[0])

    a0 = amp[0]
    if a0 <= 0.0:
        return EnvelopeMetrics(None, np.array([]), window, centers, amp)
    thresh = 0.10 * a0
    below = np.nonzero(amp < thresh)[0]
    if below.size == 0:
        return EnvelopeMetrics(None, np.array([]), window, centers, amp)
    c_idx = int(below[0])
    collapse_time = float(centers[c_idx])

    # hysteresis peak walk: a revival is a rise of at least `prom` above
    # the running minimum, ended by a fall of at least `prom` below the
    # running maximum
    prom = 0.05 * a0
    revivals = []
    run_min = amp[c_idx]
    state_peak = False
    peak_val = -math.inf
    peak_pos = None
    for i in range(c_idx, len(amp)):
        a = amp[i]
        if not state_peak:
            if a < run_min:
                run_min = a
            if a >= run_min + prom:
                state_peak = True
                peak_val = a
                peak_pos = i
        else:
            if a > peak_val:
                peak_val = a
                peak_pos = i
            if a <= peak_val - prom:
                revivals.append(float(centers[peak_pos]))
                state_peak = False
                run_min = a
    if state_peak and peak_pos is not None:
        revivals.append(float(centers[peak_pos]))
    return EnvelopeMetrics(collapse_time, np.asarray(revivals), window, centers, amp)
