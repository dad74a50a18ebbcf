"""Numerically stable special-function kernels.

Every quantity that involves factorials, powers of tanh(r), or Hermite
polynomials of large order is accumulated in log space, with the sign (or
complex phase) carried separately.  Photon-number indices in the thousands
then stay representable, where a naive evaluation would overflow near
n = 170 and silently cancel to zero long before that.

Alternating finite sums (Laguerre and terminating-hypergeometric series)
are combined with compensated Kahan summation after rescaling by the
largest term.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "LogReal",
    "LogComplexSeq",
    "log_factorial",
    "log_binomial",
    "log_double_factorial_odd",
    "hermite_seq",
    "gen_hermite_diag",
    "gen_hermite_diag_seq",
    "gen_hermite_diag_xy",
    "assoc_laguerre",
    "gauss2f1_terminating",
    "legendre_complex",
    "scaled_legendre_seq",
    "signed_log_sum",
    "complex_log_sum",
]

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class LogReal:
    """A real number stored as sign and natural log of magnitude.

    ``sign == 0`` represents exact zero (``logmag`` is then -inf by
    convention and otherwise ignored).  Round-trips through
    ``from_real``/``to_real`` are accurate to the representable precision
    of the log, i.e. about ``|x| * ulp(ln|x|)`` relative error across
    [1e-300, 1e300].
    """

    sign: int
    logmag: float

    @staticmethod
    def from_real(x: float) -> "LogReal":
        if x == 0.0:
            return LogReal(0, _NEG_INF)
        if x > 0:
            return LogReal(1, math.log(x))
        return LogReal(-1, math.log(-x))

    def to_real(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.logmag)

    def __mul__(self, other: "LogReal") -> "LogReal":
        s = self.sign * other.sign
        if s == 0:
            return LogReal(0, _NEG_INF)
        return LogReal(s, self.logmag + other.logmag)

    def scaled(self, log_factor: float) -> "LogReal":
        """Multiply by exp(log_factor) without leaving log space."""
        if self.sign == 0:
            return self
        return LogReal(self.sign, self.logmag + log_factor)


class LogComplexSeq:
    """A sequence of complex values stored as unit phase and log magnitude.

    Entries with ``logmag == -inf`` are exact zeros (phase fixed at 0).
    """

    def __init__(self, phases: np.ndarray, logmags: np.ndarray):
        self.phases = phases
        self.logmags = logmags

    def __len__(self) -> int:
        return len(self.logmags)

    def value(self, n: int) -> complex:
        if self.logmags[n] == _NEG_INF:
            return 0.0 + 0.0j
        return self.phases[n] * cmath.exp(self.logmags[n])


# ----------------------------------------------------------------------
# factorial-type logs
# ----------------------------------------------------------------------

_LOG_FACT_TABLE = [math.log(math.factorial(k)) for k in range(21)]


def log_factorial(n: int) -> float:
    """ln(n!), exact integer product below 21, lgamma above."""
    if n < 0:
        raise ValueError("factorial of negative integer")
    if n <= 20:
        return _LOG_FACT_TABLE[n]
    return math.lgamma(n + 1)


def log_factorial_seq(n_max: int) -> np.ndarray:
    """Vector of ln(k!) for k = 0..n_max."""
    out = np.zeros(n_max + 1)
    if n_max >= 1:
        out[1:] = np.cumsum(np.log(np.arange(1, n_max + 1, dtype=float)))
    return out


def log_binomial(n: int, k: int) -> float:
    if k < 0 or k > n:
        return _NEG_INF
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k)


def log_double_factorial_odd(n: int) -> float:
    """ln((2n-1)!!) with the convention (-1)!! = 1.

    Equals sum_{k=1..n} ln(2k-1); evaluated through lgamma for large n:
    (2n-1)!! = (2n)! / (2^n n!).
    """
    if n < 0:
        raise ValueError("negative order in double factorial")
    if n <= 20:
        return math.fsum(math.log(2 * k - 1) for k in range(1, n + 1))
    return math.lgamma(2 * n + 1) - n * math.log(2.0) - math.lgamma(n + 1)


# ----------------------------------------------------------------------
# compensated signed/complex log-domain summation
# ----------------------------------------------------------------------

def signed_log_sum(signs, logmags) -> LogReal:
    """Kahan-compensated sum of terms sign_k * exp(logmag_k).

    The terms are rescaled by the largest magnitude first, so arbitrarily
    large alternating series stay finite; the result is returned as a
    LogReal.
    """
    signs = np.asarray(signs, dtype=float)
    logmags = np.asarray(logmags, dtype=float)
    live = logmags > _NEG_INF
    if not np.any(live):
        return LogReal(0, _NEG_INF)
    m = float(np.max(logmags[live]))
    total = 0.0
    comp = 0.0
    for s, g in zip(signs[live], logmags[live]):
        term = s * math.exp(g - m)
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    if total == 0.0:
        return LogReal(0, _NEG_INF)
    return LogReal(1 if total > 0 else -1, m + math.log(abs(total)))


def complex_log_sum(phases, logmags):
    """Kahan-compensated sum of phase_k * exp(logmag_k) for unit phases.

    Returns ``(phase, logmag, condition)`` where ``condition`` is the ratio
    of the largest term magnitude to the result magnitude, a direct
    measure of cancellation-induced precision loss.
    """
    phases = np.asarray(phases, dtype=complex)
    logmags = np.asarray(logmags, dtype=float)
    live = logmags > _NEG_INF
    if not np.any(live):
        return 0.0 + 0.0j, _NEG_INF, 1.0
    m = float(np.max(logmags[live]))
    tot_re = 0.0
    comp_re = 0.0
    tot_im = 0.0
    comp_im = 0.0
    for p, g in zip(phases[live], logmags[live]):
        w = math.exp(g - m)
        y = p.real * w - comp_re
        t = tot_re + y
        comp_re = (t - tot_re) - y
        tot_re = t
        y = p.imag * w - comp_im
        t = tot_im + y
        comp_im = (t - tot_im) - y
        tot_im = t
    mag = math.hypot(tot_re, tot_im)
    if mag == 0.0:
        return 0.0 + 0.0j, _NEG_INF, math.inf
    phase = complex(tot_re / mag, tot_im / mag)
    return phase, m + math.log(mag), 1.0 / mag


# ----------------------------------------------------------------------
# Hermite polynomials (physicists' convention), log-scaled
# ----------------------------------------------------------------------

def hermite_seq(z: complex, n_max: int) -> LogComplexSeq:
    """H_0..H_{n_max} at complex z via H_{n+1} = 2 z H_n - 2 n H_{n-1}.

    Each value is stored as (unit phase, log magnitude), which keeps the
    recursion finite for orders well beyond 2000 where the raw values
    overflow double precision.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    z = complex(z)
    phases = np.zeros(n_max + 1, dtype=complex)
    logmags = np.full(n_max + 1, _NEG_INF)
    phases[0] = 1.0
    logmags[0] = 0.0
    if n_max == 0:
        return LogComplexSeq(phases, logmags)
    w = 2.0 * z
    if w != 0:
        phases[1] = w / abs(w)
        logmags[1] = math.log(abs(w))
    log_2z = math.log(abs(w)) if w != 0 else _NEG_INF
    u2z = w / abs(w) if w != 0 else 0.0j
    for n in range(1, n_max):
        g1 = logmags[n] + log_2z
        g2 = logmags[n - 1] + math.log(2.0 * n)
        m = max(g1, g2)
        if m == _NEG_INF:
            continue
        acc = 0.0 + 0.0j
        if g1 > _NEG_INF:
            acc += u2z * phases[n] * math.exp(g1 - m)
        if g2 > _NEG_INF:
            acc -= phases[n - 1] * math.exp(g2 - m)
        mag = abs(acc)
        if mag == 0.0:
            continue
        phases[n + 1] = acc / mag
        logmags[n + 1] = m + math.log(mag)
    return LogComplexSeq(phases, logmags)


# ----------------------------------------------------------------------
# two-index (generalized) Hermite polynomials, diagonal
# ----------------------------------------------------------------------

def _lincomb_signed_log(parts):
    """Elementwise signed-log linear combination of aligned arrays.

    ``parts`` is a list of (sign_array, logmag_array); returns the signed
    log representation of the elementwise sum.
    """
    logs = np.stack([g for _, g in parts])
    signs = np.stack([s for s, _ in parts])
    m = np.max(logs, axis=0)
    dead = m == _NEG_INF
    msafe = np.where(dead, 0.0, m)
    with np.errstate(invalid="ignore"):
        vals = np.sum(signs * np.exp(logs - msafe), axis=0)
    vals = np.where(dead, 0.0, vals)
    out_sign = np.sign(vals)
    with np.errstate(divide="ignore"):
        out_log = np.where(vals == 0.0, _NEG_INF, msafe + np.log(np.abs(np.where(vals == 0.0, 1.0, vals))))
    return out_sign, out_log


def gen_hermite_diag_xy(c11, c12, c22, x, y, n_max):
    """Diagonal H_{k,k} of the two-index Hermite recursion for k = 0..n_max.

    The recursion is driven directly by the linear coefficients
    x = c11 r1 + c12 r2 and y = c22 r2 + c12 r1, so callers whose r1
    parametrization passes through a pole can still evaluate:

        H_{n+1,m} = x H_{n,m} - n c11 H_{n-1,m} - m c12 H_{n,m-1}
        H_{0,m+1} = y H_{0,m} - m c22 H_{0,m-1}

    Two rows are kept at a time, in signed-log representation; returns
    ``(signs, logmags)`` arrays for the diagonal.
    """
    lx = LogReal.from_real(x)
    ly = LogReal.from_real(y)

    width = n_max + 1
    sign0 = np.zeros(width)
    log0 = np.full(width, _NEG_INF)
    sign0[0] = 1.0
    log0[0] = 0.0
    # first row (n = 0) along m
    for m in range(n_max):
        parts = [(np.array([ly.sign * sign0[m]]), np.array([ly.logmag + log0[m]]))]
        if m >= 1:
            lc = LogReal.from_real(-m * c22)
            parts.append((np.array([lc.sign * sign0[m - 1]]), np.array([lc.logmag + log0[m - 1]])))
        s, g = _lincomb_signed_log(parts)
        sign0[m + 1] = s[0]
        log0[m + 1] = g[0]

    diag_sign = np.zeros(width)
    diag_log = np.full(width, _NEG_INF)
    diag_sign[0] = sign0[0]
    diag_log[0] = log0[0]

    prev_s = None
    prev_g = None
    cur_s, cur_g = sign0, log0
    for n in range(n_max):
        shift_s = np.concatenate(([0.0], cur_s[:-1]))
        shift_g = np.concatenate(([_NEG_INF], cur_g[:-1]))
        mcoef = -c12 * np.arange(width, dtype=float)
        parts = [
            (np.full(width, float(lx.sign)) * cur_s, cur_g + lx.logmag),
            (np.sign(mcoef) * shift_s, shift_g + _safe_log_abs(mcoef)),
        ]
        if n >= 1:
            ncoef = -n * c11
            lnc = LogReal.from_real(ncoef)
            parts.append((np.full(width, float(lnc.sign)) * prev_s, prev_g + lnc.logmag))
        nxt_s, nxt_g = _lincomb_signed_log(parts)
        prev_s, prev_g = cur_s, cur_g
        cur_s, cur_g = nxt_s, nxt_g
        diag_sign[n + 1] = cur_s[n + 1]
        diag_log[n + 1] = cur_g[n + 1]
        if not np.all(np.isfinite(cur_g[np.asarray(cur_s) != 0.0])):
            raise FloatingPointError("non-finite intermediate in two-index Hermite recursion")
    return diag_sign, diag_log


def gen_hermite_diag_seq(c11, c12, c22, r1, r2, n_max):
    """Diagonal two-index Hermite values H_{k,k}(r1, r2) for k = 0..n_max."""
    return gen_hermite_diag_xy(c11, c12, c22, c11 * r1 + c12 * r2, c22 * r2 + c12 * r1, n_max)


def _safe_log_abs(arr):
    arr = np.asarray(arr, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(arr == 0.0, _NEG_INF, np.log(np.abs(np.where(arr == 0.0, 1.0, arr))))


def gen_hermite_diag(c11, c12, c22, r1, r2, n) -> LogReal:
    """H_{n,n}(r1, r2) for the two-index Hermite recursion, as a LogReal."""
    if n < 0:
        raise ValueError("order must be >= 0")
    signs, logs = gen_hermite_diag_seq(c11, c12, c22, r1, r2, n)
    return LogReal(int(signs[n]), float(logs[n]))


# ----------------------------------------------------------------------
# associated Laguerre polynomials with integer (possibly negative) order
# ----------------------------------------------------------------------

def assoc_laguerre(n: int, alpha: int, x: float) -> LogReal:
    """L_n^alpha(x) for integer alpha of either sign, in signed-log form.

    For alpha >= 0 this is the plain finite sum
    sum_k (-1)^k C(n+alpha, n-k) x^k / k!.  A negative integer order is
    reduced through L_n^{-m}(x) = (-x)^m (n-m)!/n! L_{n-m}^{m}(x), which
    reproduces the displaced-Fock finite sum in which terms with a
    negative factorial argument drop out.
    """
    if n < 0:
        raise ValueError("degree must be >= 0")
    if alpha < 0:
        m = -alpha
        if m > n:
            raise ValueError("negative order below -n is outside the supported family")
        inner = assoc_laguerre(n - m, m, x)
        if x == 0.0:
            pow_part = LogReal(0, _NEG_INF) if m > 0 else LogReal(1, 0.0)
        else:
            pow_part = LogReal((-1) ** m if x > 0 else 1, m * math.log(abs(x)))
        ratio = log_factorial(n - m) - log_factorial(n)
        return (pow_part * inner).scaled(ratio)
    signs = np.empty(n + 1)
    logs = np.empty(n + 1)
    lx = math.log(abs(x)) if x != 0.0 else _NEG_INF
    sx = 1.0 if x >= 0 else -1.0
    for k in range(n + 1):
        signs[k] = (-1.0) ** k * sx**k
        logs[k] = log_binomial(n + alpha, n - k) + (k * lx if k else 0.0) - log_factorial(k)
    return signed_log_sum(signs, logs)


# ----------------------------------------------------------------------
# terminating Gauss hypergeometric series at integer/half-integer params
# ----------------------------------------------------------------------

def _as_half_integer(v) -> Fraction:
    f = Fraction(v)
    if f.denominator not in (1, 2):
        raise ValueError(f"parameter {v} is not an integer or half-integer")
    return f


def gauss2f1_terminating(a, b, c, x: float) -> LogReal:
    """2F1(a, b; c; x) where a or b is a non-positive integer.

    The series is then a polynomial, summed exactly term by term in
    signed-log form with compensated accumulation; |x| > 1 is fine.
    Parameters are integers or half-integers.
    """
    fa, fb, fc = _as_half_integer(a), _as_half_integer(b), _as_half_integer(c)
    kmax = None
    for v in (fa, fb):
        if v <= 0 and v.denominator == 1:
            k = -int(v)
            kmax = k if kmax is None else min(kmax, k)
    if kmax is None:
        raise ValueError("series does not terminate: neither a nor b is a non-positive integer")

    av, bv, cv = float(fa), float(fb), float(fc)
    signs = np.zeros(kmax + 1)
    logs = np.full(kmax + 1, _NEG_INF)
    sgn = 1.0
    logt = 0.0
    signs[0] = 1.0
    logs[0] = 0.0
    for k in range(kmax):
        den = cv + k
        if den == 0.0:
            raise ValueError("lower parameter hits a non-positive integer before termination")
        num = (av + k) * (bv + k) * x
        if num == 0.0:
            break
        factor = num / (den * (k + 1))
        sgn *= math.copysign(1.0, factor)
        logt += math.log(abs(factor))
        signs[k + 1] = sgn
        logs[k + 1] = logt
    return signed_log_sum(signs, logs)


# ----------------------------------------------------------------------
# Legendre polynomials
# ----------------------------------------------------------------------

def legendre_complex(n: int, z: complex) -> complex:
    """P_n(z) for complex z via the Bonnet recursion, log-scaled internally."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    z = complex(z)
    # (phase, logmag) pairs
    p_prev, g_prev = 1.0 + 0.0j, 0.0
    if n == 0:
        return 1.0 + 0.0j
    if z == 0:
        p_cur, g_cur = 0.0j, _NEG_INF
    else:
        p_cur, g_cur = z / abs(z), math.log(abs(z))
    for k in range(1, n):
        ga = g_cur + (math.log(abs((2 * k + 1) * z)) if z != 0 else _NEG_INF)
        gb = g_prev + math.log(k)
        m = max(ga, gb)
        acc = 0.0j
        if ga > _NEG_INF:
            acc += ((2 * k + 1) * z / abs((2 * k + 1) * z)) * p_cur * math.exp(ga - m)
        if gb > _NEG_INF:
            acc -= p_prev * math.exp(gb - m)
        acc /= (k + 1)
        mag = abs(acc)
        p_prev, g_prev = p_cur, g_cur
        if mag == 0.0:
            p_cur, g_cur = 0.0j, _NEG_INF
        else:
            p_cur, g_cur = acc / mag, m + math.log(mag)
    if g_cur == _NEG_INF:
        return 0.0 + 0.0j
    return p_cur * cmath.exp(g_cur)


def scaled_legendre_seq(v_sq: float, n_max: int):
    """The combination W_n = v^n P_n(1/v) for n = 0..n_max, as signed logs.

    W_n is a polynomial in v^2, so this works for any real v^2 (negative
    values correspond to purely imaginary v) directly in real arithmetic:

        (n+1) W_{n+1} = (2n+1) W_n - n v^2 W_{n-1},  W_0 = W_1 = 1.

    At v^2 = 0 it degenerates to W_n = (2n-1)!!/n!.  Returns
    ``(signs, logmags)``.
    """
    signs = np.zeros(n_max + 1)
    logs = np.full(n_max + 1, _NEG_INF)
    signs[0] = 1.0
    logs[0] = 0.0
    if n_max == 0:
        return signs, logs
    signs[1] = 1.0
    logs[1] = 0.0
    lv = _safe_log_abs(np.array([v_sq]))[0]
    sv = math.copysign(1.0, v_sq) if v_sq != 0.0 else 0.0
    for n in range(1, n_max):
        ga = logs[n] + math.log(2 * n + 1)
        gb = logs[n - 1] + (math.log(n) + lv if lv > _NEG_INF else _NEG_INF)
        m = max(ga, gb)
        if m == _NEG_INF:
            continue
        acc = 0.0
        if ga > _NEG_INF:
            acc += signs[n] * math.exp(ga - m)
        if gb > _NEG_INF:
            acc -= sv * signs[n - 1] * math.exp(gb - m)
        acc /= (n + 1)
        if acc == 0.0:
            continue
        signs[n + 1] = math.copysign(1.0, acc)
        logs[n + 1] = m + math.log(abs(acc))
    return signs, logs
