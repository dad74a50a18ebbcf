"""Photon-number distributions rho_nn for twelve optical field states.

Each family has a closed-form distribution evaluated entirely in log
space (see :mod:`jcfield.specfun`), together with its closed-form mean and
variance.  Conventions, fixed once and validated against the operator
oracle in :mod:`jcfield.oracle`:

* the displacement amplitude beta is real and non-negative; all phase
  information lives in the single total phase ``psi`` (default pi, which
  minimizes the photon-number variance),
* the squeeze operator is S(z) = exp((z* a^2 - z a^+2)/2) with
  z = r * exp(i*(psi - pi)),
* "displaced squeezed" means the displacement is applied after the
  squeeze, D(beta) S ... S^+ D(beta)^+; "squeezed displaced" is the
  reverse order.

Families whose formulas divide by n_T or by sinh(r) switch to the exact
limiting family below ``N_T_FLOOR`` / ``R_FLOOR``.
"""

from __future__ import annotations

import cmath
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

import numpy as np

from .specfun import (
    LogReal,
    assoc_laguerre,
    complex_log_sum,
    gauss2f1_terminating,
    gen_hermite_diag_xy,
    hermite_seq,
    log_factorial,
    log_factorial_seq,
    scaled_legendre_seq,
    signed_log_sum,
)

__all__ = [
    "Family",
    "StateSpec",
    "PhotonDistribution",
    "Moments",
    "CapExceededError",
    "PrecisionLossError",
    "closed_form_moments",
    "pmf_coherent",
    "pmf_thermal",
    "pmf_fock",
    "pmf_mixed_coherent_thermal",
    "pmf_squeezed_vacuum",
    "squeezed_fock_kernel",
    "squeezed_fock_kernel_sum",
    "pmf_squeezed_fock",
    "pmf_squeezed_thermal",
    "pmf_squeezed_thermal_lsum",
    "pmf_squeezed_coherent",
    "pmf_mixed_squeezed_coherent_thermal",
    "pmf_displaced_squeezed_thermal",
    "pmf_displaced_number",
    "pmf_squeezed_displaced_number",
    "pmf_msct_moment_expansion",
    "pmf_sdn_operator_expansion",
    "pmf_sdn_series_alt",
    "auto_nmax",
    "photon_distribution",
    "N_T_FLOOR",
    "R_FLOOR",
    "hard_nmax_cap",
]

_NEG_INF = float("-inf")

#: below these, the formulas that divide by n_T or sinh r are replaced by
#: their exact limiting family
N_T_FLOOR = 1e-6
R_FLOOR = 1e-6

#: squared-v threshold under which the squeezed-thermal closed form uses
#: the exact critical-point value; below this the two are identical at
#: double precision for all supported photon numbers
V2_FLOOR = 1e-12

_DEFAULT_CAP = 20000


class CapExceededError(RuntimeError):
    """Raised when a distribution needs more Fock levels than the hard cap."""


class PrecisionLossError(RuntimeError):
    """Raised when a closed-form evaluation loses all significance."""


def hard_nmax_cap() -> int:
    """Hard photon-number cap; override with JCM_HARD_NMAX_CAP."""
    raw = os.environ.get("JCM_HARD_NMAX_CAP")
    if raw is None:
        return _DEFAULT_CAP
    cap = int(raw)
    if cap <= 0:
        raise ValueError("JCM_HARD_NMAX_CAP must be positive")
    return cap


class Family(str, Enum):
    COHERENT = "coherent"
    THERMAL = "thermal"
    FOCK = "fock"
    MIXED_COHERENT_THERMAL = "mixed-coherent-thermal"
    SQUEEZED_VACUUM = "squeezed-vacuum"
    SQUEEZED_FOCK = "squeezed-fock"
    SQUEEZED_THERMAL = "squeezed-thermal"
    SQUEEZED_COHERENT = "squeezed-coherent"
    MIXED_SQUEEZED_COHERENT_THERMAL = "mixed-squeezed-coherent-thermal"
    DISPLACED_SQUEEZED_THERMAL = "displaced-squeezed-thermal"
    DISPLACED_NUMBER = "displaced-number"
    SQUEEZED_DISPLACED_NUMBER = "squeezed-displaced-number"


# fields that are allowed to differ from their defaults, per family
_MEANINGFUL = {
    Family.COHERENT: {"beta_sq"},
    Family.THERMAL: {"n_T"},
    Family.FOCK: {"fock_level"},
    Family.MIXED_COHERENT_THERMAL: {"beta_sq", "n_T"},
    Family.SQUEEZED_VACUUM: {"r"},
    Family.SQUEEZED_FOCK: {"r", "fock_level"},
    Family.SQUEEZED_THERMAL: {"r", "n_T"},
    Family.SQUEEZED_COHERENT: {"beta_sq", "r", "psi"},
    Family.MIXED_SQUEEZED_COHERENT_THERMAL: {"beta_sq", "n_T", "r"},
    Family.DISPLACED_SQUEEZED_THERMAL: {"beta_sq", "n_T", "r", "psi", "variant"},
    Family.DISPLACED_NUMBER: {"beta_sq", "fock_level"},
    Family.SQUEEZED_DISPLACED_NUMBER: {"beta_sq", "r", "psi", "fock_level"},
}

_DEFAULTS = {"beta_sq": 0.0, "n_T": 0.0, "r": 0.0, "psi": math.pi, "fock_level": 0, "variant": "dsts"}


@dataclass(frozen=True)
class StateSpec:
    """Selects a field-state family and its parameters.

    ``beta_sq`` is the mean coherent photon number |beta|^2 (beta taken
    real, >= 0), ``n_T`` the mean thermal photon number, ``r`` the
    squeezing strength, ``psi`` the total phase, ``fock_level`` the
    prepared number-state level, and ``variant`` picks the operator order
    for the displaced-squeezed-thermal family ("dsts" = displace last,
    "sdts" = squeeze last).
    """

    family: Family
    beta_sq: float = 0.0
    n_T: float = 0.0
    r: float = 0.0
    psi: float = math.pi
    fock_level: int = 0
    variant: str = "dsts"

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if self.beta_sq < 0 or self.n_T < 0 or self.r < 0:
            raise ValueError("beta_sq, n_T and r must be non-negative")
        if self.fock_level < 0 or self.fock_level != int(self.fock_level):
            raise ValueError("fock_level must be a non-negative integer")
        if self.variant not in ("dsts", "sdts"):
            raise ValueError("variant must be 'dsts' or 'sdts'")
        allowed = _MEANINGFUL[fam]
        for name, default in _DEFAULTS.items():
            if name in allowed:
                continue
            if getattr(self, name) != default:
                raise ValueError(f"parameter {name!r} is not meaningful for family {fam.value!r}")


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float


@dataclass(frozen=True)
class PhotonDistribution:
    """Truncated photon-number distribution with truncation diagnostics.

    ``tail_mass`` estimates the probability beyond ``n_max``;
    ``norm_residual`` is 1 minus the retained sum (it can be slightly
    negative from rounding after negative-clamping).
    """

    probs: np.ndarray
    n_max: int
    tail_mass: float
    norm_residual: float

    def mean(self) -> float:
        n = np.arange(self.n_max + 1)
        return float(np.sum(n * self.probs))

    def variance(self) -> float:
        n = np.arange(self.n_max + 1)
        m = self.mean()
        return float(np.sum((n - m) ** 2 * self.probs))


def _finalize(probs: np.ndarray, tail_mass: float | None = None) -> PhotonDistribution:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < -1e-12):
        worst = float(np.min(probs))
        raise PrecisionLossError(f"distribution entry {worst} below the rounding floor; formula or precision bug")
    probs = np.where(probs < 0.0, 0.0, probs)
    resid = 1.0 - float(np.sum(probs))
    if tail_mass is None:
        tail_mass = max(resid, 0.0)
    return PhotonDistribution(probs=probs, n_max=len(probs) - 1, tail_mass=tail_mass, norm_residual=resid)


def _probs_from_logs(logp: np.ndarray) -> np.ndarray:
    out = np.zeros_like(logp)
    live = logp > _NEG_INF
    out[live] = np.exp(logp[live])
    return out


# ----------------------------------------------------------------------
# elementary families
# ----------------------------------------------------------------------

def pmf_coherent(beta_sq: float, n_max: int) -> PhotonDistribution:
    """Poisson distribution of a coherent state with mean |beta|^2."""
    n = np.arange(n_max + 1, dtype=float)
    if beta_sq == 0.0:
        probs = np.zeros(n_max + 1)
        probs[0] = 1.0
        return _finalize(probs)
    logp = -beta_sq + n * math.log(beta_sq) - log_factorial_seq(n_max)
    return _finalize(_probs_from_logs(logp))


def pmf_thermal(n_T: float, n_max: int) -> PhotonDistribution:
    """Geometric (Bose-Einstein) distribution with mean n_T."""
    if n_T == 0.0:
        probs = np.zeros(n_max + 1)
        probs[0] = 1.0
        return _finalize(probs)
    n = np.arange(n_max + 1, dtype=float)
    logp = n * math.log(n_T / (n_T + 1.0)) - math.log(n_T + 1.0)
    return _finalize(_probs_from_logs(logp))


def pmf_fock(l: int, n_max: int) -> PhotonDistribution:
    """Point mass at the prepared number-state level."""
    if l > n_max:
        raise ValueError(f"fock level {l} exceeds n_max {n_max}")
    probs = np.zeros(n_max + 1)
    probs[l] = 1.0
    return _finalize(probs)


def pmf_mixed_coherent_thermal(beta_sq: float, n_T: float, n_max: int) -> PhotonDistribution:
    """Coherent signal on a thermal background (Glauber-Lachs).

    rho_nn = exp(-b/(n_T+1))/(n_T+1) * q^n * L_n(-b/(n_T(n_T+1))) with
    q = n_T/(n_T+1); the Laguerre argument is negative, so every term of
    L_n is positive and the forward recursion is run in scaled log form.
    """
    if n_T < N_T_FLOOR:
        return pmf_coherent(beta_sq, n_max)
    if beta_sq == 0.0:
        return pmf_thermal(n_T, n_max)
    x = -beta_sq / (n_T * (n_T + 1.0))
    lag_log = np.zeros(n_max + 1)
    g_prev, g_cur = 0.0, math.log1p(-x)
    if n_max >= 1:
        lag_log[1] = g_cur
    for k in range(1, n_max):
        m = max(g_cur, g_prev)
        acc = (2 * k + 1 - x) * math.exp(g_cur - m) - k * math.exp(g_prev - m)
        if acc <= 0.0:
            raise PrecisionLossError("Laguerre recursion lost positivity")
        g_prev, g_cur = g_cur, m + math.log(acc) - math.log(k + 1)
        lag_log[k + 1] = g_cur
    n = np.arange(n_max + 1, dtype=float)
    logp = -beta_sq / (n_T + 1.0) - math.log(n_T + 1.0) + n * math.log(n_T / (n_T + 1.0)) + lag_log
    return _finalize(_probs_from_logs(logp))


def pmf_squeezed_vacuum(r: float, n_max: int) -> PhotonDistribution:
    """Even-only distribution of the squeezed vacuum."""
    probs = np.zeros(n_max + 1)
    if r == 0.0:
        probs[0] = 1.0
        return _finalize(probs)
    lf = log_factorial_seq(n_max)
    lt2 = math.log(math.tanh(r) / 2.0)
    lcosh = math.log(math.cosh(r))
    for n in range(0, n_max + 1, 2):
        m = n // 2
        probs[n] = math.exp(n * lt2 + lf[n] - lcosh - 2.0 * lf[m])
    return _finalize(probs)


# ----------------------------------------------------------------------
# squeezed number states
# ----------------------------------------------------------------------

def squeezed_fock_kernel(r: float, n: int, l: int) -> LogReal:
    """Squared overlap kernel S(r, n, l) of the squeezed number state.

    Evaluated through the terminating hypergeometric form, which holds
    separately for (n, l) both even and both odd; n - l must be even.
    """
    if (n - l) % 2:
        raise ValueError("kernel parity: n - l must be even")
    s = math.sinh(r)
    if s == 0.0:
        raise ValueError("kernel undefined at r = 0")
    x = -1.0 / (s * s)
    ls2 = math.log(s / 2.0)
    if n % 2 == 0:
        f = gauss2f1_terminating(Fraction(-l, 2), Fraction(-n, 2), Fraction(1, 2), x)
        base = 2 * n * ls2
        lognorm = log_factorial(n // 2) + log_factorial(l // 2)
    else:
        f = gauss2f1_terminating(Fraction(-(l - 1), 2), Fraction(-(n - 1), 2), Fraction(3, 2), x)
        base = 2 * (n - 1) * ls2
        lognorm = log_factorial((n - 1) // 2) + log_factorial((l - 1) // 2)
    if f.sign == 0:
        return LogReal(0, _NEG_INF)
    return LogReal(1, base + 2.0 * (f.logmag - lognorm))


def squeezed_fock_kernel_sum(r: float, n: int, l: int) -> LogReal:
    """Same kernel S(r, n, l) from its finite alternating sum.

    Retained as an independent cross-check of the hypergeometric route;
    the summation index m runs over max(0, (n-l)/2) <= m <= n/2.
    """
    if (n - l) % 2:
        raise ValueError("kernel parity: n - l must be even")
    s = math.sinh(r)
    lo = max(0, (n - l) // 2)
    hi = n // 2
    signs, logs = [], []
    for m in range(lo, hi + 1):
        k = m + (l - n) // 2
        signs.append((-1.0) ** m)
        logs.append(2 * m * math.log(s / 2.0) - log_factorial(m) - log_factorial(n - 2 * m) - log_factorial(k))
    tot = signed_log_sum(signs, logs)
    if tot.sign == 0:
        return LogReal(0, _NEG_INF)
    return LogReal(1, 2.0 * tot.logmag)


def pmf_squeezed_fock(r: float, l: int, n_max: int) -> PhotonDistribution:
    """Squeezed number state S(r)|l>; zero whenever n - l is odd."""
    if r < R_FLOOR:
        return pmf_fock(l, n_max)
    lf = log_factorial_seq(n_max)
    lfl = log_factorial(l)
    lcosh = math.log(math.cosh(r))
    lt2 = math.log(math.tanh(r) / 2.0)
    probs = np.zeros(n_max + 1)
    for n in range(l % 2, n_max + 1, 2):
        ker = squeezed_fock_kernel(r, n, l)
        if ker.sign == 0:
            continue
        probs[n] = math.exp(lfl + lf[n] - (2 * n + 1) * lcosh + (l - n) * lt2 + ker.logmag)
    return _finalize(probs)


# ----------------------------------------------------------------------
# squeezed thermal state
# ----------------------------------------------------------------------

def _squeezed_thermal_v2(r: float, n_T: float) -> float:
    sinh2rs = 2.0 * n_T * (n_T + 1.0) / (2.0 * n_T + 1.0)
    ratio = math.sinh(2.0 * r) / sinh2rs
    return 1.0 - ratio * ratio


def pmf_squeezed_thermal(r: float, n_T: float, n_max: int) -> PhotonDistribution:
    """Squeezed thermal state S(r) rho_T S^+.

    Uses the Legendre-form closed expression: with
    v^2 = 1 - (sinh 2r / sinh 2r_s)^2 and r_s = ln(2 n_T + 1)/2,

        rho_nn = [1 + (2n_T+1) sinh^2 r/(n_T+1)^2]^{-(2n+1)/2}
                 * n_T^n/(n_T+1)^{n+1} * v^n P_n(1/v).

    v^n P_n(1/v) is evaluated as a polynomial in v^2 (stable for both
    real and imaginary v, i.e. r below or above the critical r_s); within
    V2_FLOOR of the critical point the exact v = 0 value
    (2n-1)!!/n! is used.
    """
    if r < R_FLOOR:
        return pmf_thermal(n_T, n_max)
    if n_T < N_T_FLOOR:
        return pmf_squeezed_vacuum(r, n_max)
    v2 = _squeezed_thermal_v2(r, n_T)
    if abs(v2) < V2_FLOOR:
        v2 = 0.0
    signs, wlogs = scaled_legendre_seq(v2, n_max)
    if np.any(signs < 0):
        raise PrecisionLossError("Legendre-form squeezed-thermal weights went negative")
    n = np.arange(n_max + 1, dtype=float)
    bracket = 1.0 + (2.0 * n_T + 1.0) * math.sinh(r) ** 2 / (n_T + 1.0) ** 2
    logp = (
        -(2.0 * n + 1.0) / 2.0 * math.log(bracket)
        + n * math.log(n_T / (n_T + 1.0))
        - math.log(n_T + 1.0)
        + wlogs
    )
    logp[signs == 0] = _NEG_INF
    return _finalize(_probs_from_logs(logp))


def pmf_squeezed_thermal_lsum(r: float, n_T: float, n_max: int, eps: float = 1e-14) -> PhotonDistribution:
    """Squeezed thermal state as a thermally weighted sum of squeezed
    number states; independent cross-check of the Legendre form."""
    if r < R_FLOOR:
        return pmf_thermal(n_T, n_max)
    if n_T < N_T_FLOOR:
        return pmf_squeezed_vacuum(r, n_max)
    q = n_T / (n_T + 1.0)
    l_cut = max(n_max + 8, int(math.log(eps) / math.log(q)) + 1)
    probs = np.zeros(n_max + 1)
    for l in range(l_cut + 1):
        w = math.exp(l * math.log(q) - math.log(n_T + 1.0))
        probs += w * pmf_squeezed_fock(r, l, n_max).probs
    return _finalize(probs)


# ----------------------------------------------------------------------
# squeezed coherent state
# ----------------------------------------------------------------------

def _squeeze_phase(psi: float) -> float:
    # total phase convention: squeeze phase theta = psi - pi
    return psi - math.pi


def pmf_squeezed_coherent(beta_sq: float, r: float, psi: float, n_max: int) -> PhotonDistribution:
    """Displaced squeezed vacuum D(beta) S(r e^{i(psi-pi)}) |0>.

    rho_nn = N1 (tanh r / 2)^n / n! |H_n(x)|^2 with the complex argument
    x = beta (1 + e^{i theta} tanh r) / sqrt(2 e^{i theta} tanh r) and
    N1 = exp(-beta^2 (1 - cos(psi) tanh r)) / cosh r.
    """
    if r < R_FLOOR:
        return pmf_coherent(beta_sq, n_max)
    t = math.tanh(r)
    theta = _squeeze_phase(psi)
    beta = math.sqrt(beta_sq)
    wu = cmath.sqrt(cmath.exp(1j * theta) * t / 2.0)
    x = beta * (1.0 + cmath.exp(1j * theta) * t) / (2.0 * wu)
    herm = hermite_seq(x, n_max)
    n = np.arange(n_max + 1, dtype=float)
    log_n1 = -beta_sq * (1.0 - t * math.cos(psi)) - math.log(math.cosh(r))
    logp = log_n1 + n * math.log(t / 2.0) - log_factorial_seq(n_max) + 2.0 * herm.logmags
    return _finalize(_probs_from_logs(logp))


# ----------------------------------------------------------------------
# squeezed coherent state mixed with thermal light
# ----------------------------------------------------------------------

def _msct_parameters(beta_sq: float, n_T: float, r: float):
    """Coefficients of the two-index Hermite representation of the
    thermal mixture of squeezed coherent states (phase fixed at pi)."""
    t = math.tanh(r)
    c2 = math.cosh(r) ** 2
    kk = 1.0 / (c2 * ((1.0 - t) * n_T + math.exp(-2.0 * r)))
    lam = 1.0 / (c2 * ((1.0 + t) * n_T + math.exp(2.0 * r)))
    c11 = 0.5 * (1.0 + n_T) * (lam - kk) + t * (1.0 + 1.0 / n_T)
    c12 = -0.5 * (1.0 + n_T) * (lam + kk)
    # the linear recursion coefficient X = (c11 + c12) r1, formed directly
    # so that the r1 pole at c11 + c12 = 0 never appears
    beta = math.sqrt(beta_sq)
    x = (1.0 + t) * beta * math.sqrt(1.0 + n_T) / (math.sqrt(n_T) * (1.0 + n_T * (1.0 + t)))
    log_n2 = (
        -beta_sq / (n_T + math.exp(-2.0 * r) * c2 * (1.0 + t))
        - math.log(math.cosh(r))
        - 0.5 * math.log((n_T * (1.0 + t) + math.exp(2.0 * r)) * (n_T * (1.0 - t) + math.exp(-2.0 * r)))
    )
    return c11, c12, x, log_n2


def pmf_mixed_squeezed_coherent_thermal(beta_sq: float, n_T: float, r: float, n_max: int) -> PhotonDistribution:
    """Thermal (Gaussian-P) mixture of squeezed coherent states, psi = pi.

    rho_nn = N2 / n! * (n_T/(1+n_T))^n * H_{n,n}, where H_{n,n} is the
    diagonal two-index Hermite polynomial of the mixture parameters.  The
    sequence is normalized against its own extended direct sum (the
    probability axiom), and the analytic normalization N2 is used as a
    consistency check on the retained mass.
    """
    if n_T < N_T_FLOOR:
        raise ValueError("n_T below the thermal floor; use the squeezed coherent family instead")
    if r < R_FLOOR:
        return pmf_mixed_coherent_thermal(beta_sq, n_T, n_max)
    c11, c12, x, log_n2 = _msct_parameters(beta_sq, n_T, r)
    n_ext = n_max + max(64, n_max // 2)
    cap = hard_nmax_cap()
    lq = math.log(n_T / (1.0 + n_T))
    while True:
        lf = log_factorial_seq(n_ext)
        dsign, dlog = gen_hermite_diag_xy(c11, c12, c11, x, x, n_ext)
        logu = np.arange(n_ext + 1) * lq - lf[: n_ext + 1] + dlog
        logu[dsign == 0] = _NEG_INF
        if np.any(dsign < 0):
            bad = np.exp(logu[dsign < 0] + log_n2)
            if np.any(bad > 1e-12):
                raise PrecisionLossError("two-index Hermite diagonal went negative")
            logu[dsign < 0] = _NEG_INF
        u = _probs_from_logs(logu + log_n2)
        # extend until the truncated normalization sum has converged
        tail_ok = u[-1] <= max(u.max(), 1e-300) * 1e-18
        if tail_ok or n_ext >= cap:
            break
        n_ext = min(cap, 2 * n_ext)
    total = float(np.sum(u))
    if not math.isfinite(total) or total <= 0.0:
        raise PrecisionLossError("mixture normalization sum is not finite")
    probs = u[: n_max + 1] / total
    tail = float(np.sum(u[n_max + 1 :])) / total
    # consistency of the analytic normalization with the direct sum
    if abs(total - 1.0) > 1e-6 + 10.0 * tail:
        warnings.warn(
            f"analytic mixture normalization off by {total - 1.0:.3e}; renormalized by the direct sum",
            RuntimeWarning,
        )
    return _finalize(probs, tail_mass=tail)


# ----------------------------------------------------------------------
# displaced / squeezed thermal states
# ----------------------------------------------------------------------

def _dst_effective_displacement(beta_sq: float, r: float, psi: float, variant: str) -> complex:
    beta = math.sqrt(beta_sq)
    if variant == "dsts":
        return complex(beta, 0.0)
    if variant == "sdts":
        return beta * math.cosh(r) + beta * cmath.exp(1j * psi) * math.sinh(r)
    raise ValueError("variant must be 'dsts' or 'sdts'")


def pmf_displaced_squeezed_thermal(
    beta_sq: float, n_T: float, r: float, psi: float, variant: str, n_max: int
) -> PhotonDistribution:
    """Displaced and squeezed thermal state (either operator order).

    Built from the Q-function parameters

        A = n_T + (2n_T+1) sinh^2 r,   B = -(2n_T+1) e^{i psi} sinh r cosh r,
        C = beta              (displace-after-squeeze)
          = beta cosh r + beta* e^{i psi} sinh r   (squeeze-after-displace)

    reduced to A~ = A(1+A)-|B|^2 over D, B~ = B/D, C~ = ((1+A)C + B C*)/D
    with D = (1+A)^2 - |B|^2, and summed as

        rho_nn = piQ0 sum_q C(n,q) A~^{n-q} (|B~|/2)^q |H_q(C~/sqrt(2B~))|^2 / q!

    where sqrt(B~) takes the branch i e^{i psi/2} |B~|^{1/2}.  All terms
    are non-negative, so the q-sum is a log-domain convolution with no
    cancellation.
    """
    if r < R_FLOOR:
        return pmf_mixed_coherent_thermal(beta_sq, n_T, n_max)
    phi = psi
    sh, ch = math.sinh(r), math.cosh(r)
    a_q = n_T + (2.0 * n_T + 1.0) * sh * sh
    b_q = -(2.0 * n_T + 1.0) * cmath.exp(1j * phi) * sh * ch
    c_q = _dst_effective_displacement(beta_sq, r, psi, variant)
    d_q = (1.0 + a_q) ** 2 - abs(b_q) ** 2
    a_t = n_T * (n_T + 1.0) / d_q
    b_t = b_q / d_q
    c_t = ((1.0 + a_q) * c_q + b_q * c_q.conjugate()) / d_q
    log_piq0 = -((1.0 + a_q) * abs(c_q) ** 2 + (b_q * c_q.conjugate() ** 2).real) / d_q - 0.5 * math.log(d_q)

    lf = log_factorial_seq(n_max)
    qs = np.arange(n_max + 1, dtype=float)
    if abs(b_t) == 0.0:
        raise PrecisionLossError("squeeze factor vanished; route through the unsqueezed family")
    sqrt_bt = 1j * cmath.exp(1j * phi / 2.0) * math.sqrt(abs(b_t))
    xi = c_t / (math.sqrt(2.0) * sqrt_bt)
    herm = hermite_seq(xi, n_max)
    a_part = qs * math.log(abs(b_t) / 2.0) + 2.0 * herm.logmags - 2.0 * lf
    with np.errstate(divide="ignore"):
        b_part = qs * (math.log(a_t) if a_t > 0.0 else _NEG_INF) - lf
        if a_t == 0.0:
            b_part = np.full(n_max + 1, _NEG_INF)
            b_part[0] = 0.0
    if np.any(np.isnan(a_part)) or np.any(np.isnan(b_part)):
        raise PrecisionLossError("non-finite term in the photon sum")
    probs = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        seg = a_part[: n + 1] + b_part[n::-1]
        m = np.max(seg)
        if m == _NEG_INF:
            continue
        probs[n] = math.exp(log_piq0 + lf[n] + m) * float(np.sum(np.exp(seg - m)))
    return _finalize(probs)


# ----------------------------------------------------------------------
# displaced number states
# ----------------------------------------------------------------------

def pmf_displaced_number(beta_sq: float, l: int, n_max: int) -> PhotonDistribution:
    """Displaced number state D(beta)|l>.

    Two associated-Laguerre branches, selected by comparing n to l:
    rho_n = (n!/l!) b^{l-n} e^{-b} L_n^{l-n}(b)^2 for n <= l and the
    mirror image for n > l (b = beta^2).
    """
    if beta_sq == 0.0:
        return pmf_fock(l, n_max)
    if l == 0:
        return pmf_coherent(beta_sq, n_max)
    lf = log_factorial_seq(max(n_max, l))
    probs = np.zeros(n_max + 1)
    lb = math.log(beta_sq)
    for n in range(n_max + 1):
        if l >= n:
            lag = assoc_laguerre(n, l - n, beta_sq)
            base = lf[n] - lf[l] + (l - n) * lb - beta_sq
        else:
            lag = assoc_laguerre(l, n - l, beta_sq)
            base = lf[l] - lf[n] + (n - l) * lb - beta_sq
        if lag.sign == 0:
            continue
        probs[n] = math.exp(base + 2.0 * lag.logmag)
    return _finalize(probs)


# ----------------------------------------------------------------------
# squeezed displaced number states
# ----------------------------------------------------------------------

def pmf_squeezed_displaced_number(beta_sq: float, r: float, psi: float, m: int, n_max: int) -> PhotonDistribution:
    """Squeezed displaced number state D(beta) S(r e^{i(psi-pi)}) |m>.

    The amplitude is a finite two-Hermite sum,

        <n|state> = sqrt(n! m!) sech^{1/2} E0
                    sum_i sech^i w_u^{n-i} H_{n-i}(x_u) w_t^{m-i} H_{m-i}(x_t)
                          / (i! (n-i)! (m-i)!)

    with w_u = sqrt(e^{i theta} t / 2), w_t = sqrt(-e^{-i theta} t / 2),
    x_u = beta (1 + e^{i theta} t)/(2 w_u), x_t = -beta sech(r)/(2 w_t),
    E0 = exp(-beta^2 (1 + e^{i theta} t)/2), theta = psi - pi, t = tanh r.
    The normalization is folded into each term before the compensated
    complex sum, which avoids the large-n cancellation failure of the
    naive ordering; a precision diagnostic fires when the sum's condition
    number exceeds 1e12.
    """
    if m == 0 and r >= R_FLOOR:
        return pmf_squeezed_coherent(beta_sq, r, psi, n_max)
    if r < R_FLOOR:
        return pmf_displaced_number(beta_sq, m, n_max)
    t = math.tanh(r)
    theta = _squeeze_phase(psi)
    beta = math.sqrt(beta_sq)
    sech = 1.0 / math.cosh(r)
    wu = cmath.sqrt(cmath.exp(1j * theta) * t / 2.0)
    wt = cmath.sqrt(-cmath.exp(-1j * theta) * t / 2.0)
    xu = beta * (1.0 + cmath.exp(1j * theta) * t) / (2.0 * wu)
    xt = -beta * sech / (2.0 * wt)
    hu = hermite_seq(xu, n_max)
    ht = hermite_seq(xt, m)
    log_wu = math.log(abs(wu))
    ph_wu = wu / abs(wu)
    log_wt = math.log(abs(wt))
    ph_wt = wt / abs(wt)
    e0 = -beta_sq * (1.0 + cmath.exp(1j * theta) * t) / 2.0
    log_e0 = e0.real
    ph_e0 = cmath.exp(1j * e0.imag)
    lsech = math.log(sech)
    lf = log_factorial_seq(max(n_max, m))
    probs = np.zeros(n_max + 1)
    worst_cond = 0.0
    for n in range(n_max + 1):
        imax = min(m, n)
        phases = np.empty(imax + 1, dtype=complex)
        logs = np.empty(imax + 1)
        for i in range(imax + 1):
            logs[i] = (
                0.5 * (lf[n] + lf[m] + lsech)
                + log_e0
                + i * lsech
                + (n - i) * log_wu
                + hu.logmags[n - i]
                + (m - i) * log_wt
                + ht.logmags[m - i]
                - lf[i]
                - lf[n - i]
                - lf[m - i]
            )
            phases[i] = ph_e0 * ph_wu ** (n - i) * hu.phases[n - i] * ph_wt ** (m - i) * ht.phases[m - i]
        ph, logmag, cond = complex_log_sum(phases, logs)
        worst_cond = max(worst_cond, cond if math.isfinite(cond) else 0.0)
        if logmag > _NEG_INF:
            probs[n] = math.exp(2.0 * logmag)
    if worst_cond > 1e12:
        warnings.warn(
            f"squeezed-displaced-number sum condition number {worst_cond:.2e}; entries may have lost precision",
            RuntimeWarning,
        )
    return _finalize(probs)

# ----------------------------------------------------------------------
# independent cross-check evaluators (used by the validation suite only)
# ----------------------------------------------------------------------

def pmf_msct_moment_expansion(beta_sq: float, n_T: float, r: float, n_max: int) -> PhotonDistribution:
    """Mixture of squeezed coherent states with thermal light, evaluated
    by expanding the P-function integral in Gaussian moments.

    The complex-argument Hermite polynomial is split with the addition
    theorem H_n(x+y) = sum_k C(n,k) H_k(x) (2y)^{n-k}, once for the
    imaginary quadrature and once around the displaced center of the real
    quadrature; every Gaussian moment then integrates to a Gamma factor.
    Independent of the two-index Hermite recursion route; intended for
    cross-validation at test sizes (n_max up to ~60).
    """
    if n_T < N_T_FLOOR or r < R_FLOOR:
        raise ValueError("moment-expansion cross-check requires n_T and r above their floors")
    t = math.tanh(r)
    ch = math.cosh(r)
    beta = math.sqrt(beta_sq)
    a0 = beta * math.exp(r)
    s2r = math.sinh(2.0 * r)
    q_r = math.exp(-2.0 * r) / n_T + 1.0 - t
    q_i = math.exp(2.0 * r) / n_T + 1.0 + t
    mu_r = (math.exp(-2.0 * r) * a0 / n_T) / q_r
    mu_t = mu_r / math.sqrt(s2r)
    cexp = -(math.exp(-2.0 * r) * a0 * a0 / n_T) * (1.0 - math.exp(-2.0 * r) / (n_T * q_r))
    g = 2.0 / math.sqrt(s2r)

    kmax = n_max
    hseq = hermite_seq(complex(mu_t, 0.0), kmax)
    hvals = np.array([hseq.value(j).real for j in range(kmax + 1)])
    binom = np.zeros((kmax + 1, kmax + 1))
    for k in range(kmax + 1):
        for l in range(k + 1):
            binom[k, l] = math.comb(k, l)
    jj = np.arange(2 * kmax + 1, dtype=float)
    gam_r = np.zeros(2 * kmax + 1)
    gam_i = np.zeros(2 * kmax + 1)
    for j in range(0, 2 * kmax + 1, 2):
        gam_r[j] = math.gamma((j + 1) / 2.0) * q_r ** (-(j + 1) / 2.0)
        gam_i[j] = math.gamma((j + 1) / 2.0) * q_i ** (-(j + 1) / 2.0)
    del jj

    # inner real-quadrature matrix, independent of n
    vecs = [binom[k, : k + 1] * hvals[: k + 1] * g ** (-np.arange(k + 1, dtype=float)) for k in range(kmax + 1)]
    inner = np.zeros((kmax + 1, kmax + 1))
    for k in range(kmax + 1):
        for kp in range(k, kmax + 1):
            conv = np.convolve(vecs[k], vecs[kp])
            tau = (k + kp) - np.arange(len(conv))
            w = np.where((tau >= 0) & (tau % 2 == 0), gam_r[np.clip(tau, 0, 2 * kmax)], 0.0)
            val = g ** (k + kp) * float(np.sum(conv * w))
            inner[k, kp] = val
            inner[kp, k] = val
    lf = log_factorial_seq(n_max)
    probs = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        tot = 0.0
        for k in range(n + 1):
            bk = math.comb(n, k)
            for kp in range(n + 1):
                nu = 2 * n - k - kp
                if nu % 2:
                    continue
                sgn = -1.0 if ((kp - k) // 2) % 2 else 1.0
                tot += bk * math.comb(n, kp) * sgn * g**nu * gam_i[nu] * inner[k, kp]
        pref = math.exp(n * math.log(t / 2.0) - lf[n] + cexp) / (math.pi * ch * n_T)
        probs[n] = pref * tot
    return _finalize(probs)


def pmf_sdn_operator_expansion(beta_sq: float, r: float, psi: float, m: int, n_max: int) -> PhotonDistribution:
    """Squeezed displaced number state via normal-ordered ladder algebra.

    Writes the state as powers of the squeezed creation operator acting on
    the squeezed displaced vacuum, whose amplitudes are known in closed
    form; the normal-ordering expansion gives a finite (i, k, s) triple
    sum over ladder matrix elements.  Independent of the two-Hermite sum
    used by the primary evaluator.
    """
    if r < R_FLOOR:
        raise ValueError("operator-expansion cross-check requires r above the floor")
    t = math.tanh(r)
    theta = _squeeze_phase(psi)
    beta = math.sqrt(beta_sq)
    ch, sh = math.cosh(r), math.sinh(r)
    gam = ch * beta + sh * cmath.exp(1j * theta) * beta
    pmax = n_max + m
    xi = gam / cmath.sqrt(cmath.exp(1j * theta) * math.sinh(2.0 * r))
    hxi = hermite_seq(xi, pmax)
    omega = cmath.sqrt(0.5 * cmath.exp(1j * theta) * t)
    log_omega = math.log(abs(omega))
    ph_omega = omega / abs(omega)
    e_g = -abs(gam) ** 2 / 2.0 + cmath.exp(-1j * theta) * gam * gam * t / 2.0
    log_eg = e_g.real - 0.5 * math.log(ch)
    ph_eg = cmath.exp(1j * e_g.imag)
    lf = log_factorial_seq(pmax + 1)
    lgam = math.log(abs(gam)) if gam != 0 else _NEG_INF
    ph_gconj = (gam.conjugate() / abs(gam)) if gam != 0 else 0.0j

    probs = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        phases = []
        logs = []
        for i in range(m + 1):
            big_n = m - i
            for k in range(big_n // 2 + 1):
                for s in range(big_n - 2 * k + 1):
                    tpow = big_n - 2 * k - s
                    kp = n + tpow - s
                    if kp < 0 or s > n or kp > pmax:
                        continue
                    logmag = (
                        lf[m] - lf[i] - lf[big_n] - 0.5 * lf[m]
                        + (i * lgam if i else 0.0)
                        + k * math.log(ch * sh / 2.0)
                        + lf[big_n]
                        + s * math.log(ch)
                        + tpow * math.log(sh)
                        - lf[k] - lf[s] - lf[tpow]
                        + 0.5 * (lf[n] + lf[kp]) - lf[n - s]
                        + log_eg + kp * log_omega + hxi.logmags[kp] - 0.5 * lf[kp]
                    )
                    phase = (
                        (-1.0) ** i * ph_gconj**i
                        * cmath.exp(-1j * theta * (k + tpow))
                        * ph_eg * ph_omega**kp * hxi.phases[kp]
                    )
                    phases.append(phase)
                    logs.append(logmag)
        ph, logmag, cond = complex_log_sum(phases, logs)
        if logmag > _NEG_INF:
            probs[n] = math.exp(2.0 * logmag)
    return _finalize(probs)


def pmf_sdn_series_alt(beta_sq: float, r: float, psi: float, m: int, n_max: int, j_cut: int = 200):
    """Literal transcription of the published parity-split series for the
    squeezed displaced number state (advisory cross-check only).

    The printed prefactor of this series is garbled in the source text;
    the transcription is retained so the validation suite can report the
    discrepancy rather than hide it.  Returns a raw (unnormalized) array.
    """
    t = math.tanh(r)
    theta = _squeeze_phase(psi)
    beta = math.sqrt(beta_sq)
    ch, sh = math.cosh(r), math.sinh(r)
    gam = ch * beta + sh * cmath.exp(1j * theta) * beta
    ag2 = abs(gam) ** 2
    out = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        even = n % 2 == 0
        acc = 0.0j
        for j in range(j_cut + 1):
            fac = math.factorial(2 * j) if even else math.factorial(2 * j + 1)
            term = gam ** (2 * j) * fac * (-1.0) ** j * cmath.exp(-1j * j * theta) * (t / 2.0) ** j
            kmax2 = min(m, 2 * j if even else 2 * j + 1)
            ksum = 0.0
            for k in range(kmax2 + 1):
                den = math.factorial(k) * math.factorial(m - k) * math.factorial((2 * j if even else 2 * j + 1) - k)
                ksum += (-1.0) ** k * ag2 ** (-k) / den
            pmax2 = min(n // 2 if even else (n - 1) // 2, j)
            psum = 0.0
            for p in range(pmax2 + 1):
                den = (
                    math.factorial(2 * p if even else 2 * p + 1)
                    * math.factorial(j - p)
                    * math.factorial((n // 2 if even else (n - 1) // 2) - p)
                )
                psum += (-4.0 / (sh * sh)) ** p / den
            contrib = term * ksum * psum
            acc += contrib
            if j > 4 and abs(contrib) < 1e-30 * max(abs(acc), 1e-300):
                break
        n1 = math.factorial(m) * math.factorial(n) / ch * ag2**m * math.exp(-ag2)
        out[n] = n1 * (ag2 / ch**2) * (2.0 / t) * abs(acc) ** 2
    return out


# ----------------------------------------------------------------------
# closed-form moments
# ----------------------------------------------------------------------

def closed_form_moments(spec: StateSpec) -> Moments:
    """Mean and variance of the photon number from the printed closed forms."""
    fam = spec.family
    b2, nt, r, psi, l = spec.beta_sq, spec.n_T, spec.r, spec.psi, spec.fock_level
    sh2 = math.sinh(r) ** 2
    s2r = math.sinh(2.0 * r)
    c2r = math.cosh(2.0 * r)
    if fam is Family.COHERENT:
        return Moments(b2, b2)
    if fam is Family.THERMAL:
        return Moments(nt, nt * nt + nt)
    if fam is Family.FOCK:
        return Moments(float(l), 0.0)
    if fam is Family.MIXED_COHERENT_THERMAL:
        return Moments(b2 + nt, b2 * (1.0 + 2.0 * nt) + nt * nt + nt)
    if fam is Family.SQUEEZED_VACUUM:
        return Moments(sh2, 0.5 * s2r * s2r)
    if fam is Family.SQUEEZED_FOCK:
        return Moments(l + (2 * l + 1) * sh2, 0.5 * (l * l + l + 1) * s2r * s2r)
    if fam is Family.SQUEEZED_THERMAL:
        return Moments(nt + (2 * nt + 1) * sh2, -0.25 + (nt + 0.5) ** 2 * math.cosh(4.0 * r))
    if fam is Family.SQUEEZED_COHERENT:
        return Moments(sh2 + b2, b2 * (c2r + math.cos(psi) * s2r) + 0.5 * s2r * s2r)
    if fam is Family.MIXED_SQUEEZED_COHERENT_THERMAL:
        # phase fixed at pi by construction
        var = b2 * (c2r - s2r) + 0.5 * s2r * s2r + 2.0 * nt * (sh2 + b2) + nt * nt + nt
        return Moments(sh2 + b2 + nt, var)
    if fam is Family.DISPLACED_SQUEEZED_THERMAL:
        d = _dst_effective_displacement(b2, r, psi, spec.variant)
        theta = _squeeze_phase(psi)
        mean = nt + (2.0 * nt + 1.0) * sh2 + abs(d) ** 2
        var = (
            -0.25
            + (nt + 0.5) ** 2 * math.cosh(4.0 * r)
            + abs(d) ** 2 * (2.0 * nt + 1.0) * c2r
            - (2.0 * nt + 1.0) * s2r * (cmath.exp(1j * theta) * d.conjugate() ** 2).real
        )
        return Moments(mean, var)
    if fam is Family.DISPLACED_NUMBER:
        return Moments(l + b2, (2 * l + 1) * b2)
    if fam is Family.SQUEEZED_DISPLACED_NUMBER:
        mean = b2 + (2 * l + 1) * sh2 + l
        var = b2 * (c2r + math.cos(psi) * s2r) * (2 * l + 1) + 0.5 * (l * l + l + 1) * s2r * s2r
        return Moments(mean, var)
    raise ValueError(f"unknown family {fam}")


# ----------------------------------------------------------------------
# sizing and dispatch
# ----------------------------------------------------------------------

def _build(spec: StateSpec, n_max: int) -> PhotonDistribution:
    fam = spec.family
    if fam is Family.COHERENT:
        return pmf_coherent(spec.beta_sq, n_max)
    if fam is Family.THERMAL:
        return pmf_thermal(spec.n_T, n_max)
    if fam is Family.FOCK:
        return pmf_fock(spec.fock_level, n_max)
    if fam is Family.MIXED_COHERENT_THERMAL:
        return pmf_mixed_coherent_thermal(spec.beta_sq, spec.n_T, n_max)
    if fam is Family.SQUEEZED_VACUUM:
        return pmf_squeezed_vacuum(spec.r, n_max)
    if fam is Family.SQUEEZED_FOCK:
        return pmf_squeezed_fock(spec.r, spec.fock_level, n_max)
    if fam is Family.SQUEEZED_THERMAL:
        return pmf_squeezed_thermal(spec.r, spec.n_T, n_max)
    if fam is Family.SQUEEZED_COHERENT:
        return pmf_squeezed_coherent(spec.beta_sq, spec.r, spec.psi, n_max)
    if fam is Family.MIXED_SQUEEZED_COHERENT_THERMAL:
        if spec.n_T < N_T_FLOOR:
            return pmf_squeezed_coherent(spec.beta_sq, spec.r, math.pi, n_max)
        return pmf_mixed_squeezed_coherent_thermal(spec.beta_sq, spec.n_T, spec.r, n_max)
    if fam is Family.DISPLACED_SQUEEZED_THERMAL:
        return pmf_displaced_squeezed_thermal(spec.beta_sq, spec.n_T, spec.r, spec.psi, spec.variant, n_max)
    if fam is Family.DISPLACED_NUMBER:
        return pmf_displaced_number(spec.beta_sq, spec.fock_level, n_max)
    if fam is Family.SQUEEZED_DISPLACED_NUMBER:
        return pmf_squeezed_displaced_number(spec.beta_sq, spec.r, spec.psi, spec.fock_level, n_max)
    raise ValueError(f"unknown family {fam}")


def auto_nmax(spec: StateSpec, eps_tail: float) -> int:
    """Smallest truncation with realized tail mass below eps_tail.

    Seeds the search from the closed-form moments (a Chebyshev-style
    mean + 6 sigma window), verifies the realized tail by direct
    summation, grows geometrically while the tail is too fat, and then
    refines downward to the smallest adequate truncation.  Raises
    CapExceededError beyond the hard cap.
    """
    if not (0.0 < eps_tail < 1.0):
        raise ValueError("eps_tail must lie in (0, 1)")
    mom = closed_form_moments(spec)
    cap = hard_nmax_cap()
    n = max(8, int(math.ceil(mom.mean + 6.0 * math.sqrt(max(mom.variance, 0.0)))) + 4, spec.fock_level + 1)
    n = min(n, cap)
    while True:
        dist = _build(spec, n)
        suffix = np.concatenate((np.cumsum(dist.probs[::-1])[::-1][1:], [0.0]))
        tails = dist.norm_residual + suffix  # tail beyond each candidate index
        ok = np.nonzero(tails <= eps_tail)[0]
        if ok.size and dist.tail_mass <= eps_tail:
            return max(1, int(ok[0]), spec.fock_level)
        if n >= cap:
            raise CapExceededError(
                f"tail {dist.tail_mass:.2e} still above eps_tail={eps_tail:.1e} at the hard cap {cap}"
            )
        n = min(2 * n, cap)


def photon_distribution(spec: StateSpec, n_max: int | None = None, eps_tail: float = 1e-8) -> PhotonDistribution:
    """Build the photon-number distribution for a state specification.

    When ``n_max`` is None the truncation is sized automatically so the
    tail mass stays below ``eps_tail`` (and an error is raised if that is
    impossible under the hard cap).
    """
    if n_max is None:
        n_max = auto_nmax(spec, eps_tail)
    if n_max > hard_nmax_cap():
        raise CapExceededError(f"requested n_max {n_max} exceeds the hard cap {hard_nmax_cap()}")
    return _build(spec, n_max)
