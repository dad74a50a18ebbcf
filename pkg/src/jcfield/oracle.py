"""Ground-truth generator: explicit operator algebra on a truncated Fock space.

Every state family is built here by multiplying displacement / squeeze
matrices and thermal weights, with no reference to the closed-form
distributions in :mod:`jcfield.states`.  The diagonal of the resulting
density matrix is the reference the closed forms are validated against,
and the same first-order correlation sum can be evaluated from it.

Conventions match :mod:`jcfield.states`: S(z) = exp((z* a^2 - z a^+2)/2)
with z = r e^{i(psi-pi)}, D(b) = exp(b a^+ - b* a), beta real >= 0.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .states import Family, StateSpec, closed_form_moments

__all__ = [
    "OperatorMatrix",
    "DensityMatrix",
    "annihilation",
    "matrix_exp",
    "displacement",
    "squeeze",
    "thermal_dm",
    "build_state",
    "number_distribution",
    "recommended_dim",
    "s1_oracle",
]


@dataclass(frozen=True)
class OperatorMatrix:
    dim: int
    entries: np.ndarray

    def __post_init__(self):
        if self.entries.shape != (self.dim, self.dim):
            raise ValueError("entries shape does not match dim")
        if not np.all(np.isfinite(self.entries.view(float))):
            raise ValueError("non-finite operator entries")


@dataclass(frozen=True)
class DensityMatrix:
    dim: int
    entries: np.ndarray

    def validate(self, psd_dim_limit: int = 128) -> "DensityMatrix":
        e = self.entries
        if np.max(np.abs(e - e.conj().T)) > 1e-12:
            raise ValueError("density matrix is not Hermitian within 1e-12")
        if abs(np.trace(e).real - 1.0) > 1e-10 or abs(np.trace(e).imag) > 1e-12:
            raise ValueError(f"trace {np.trace(e)} not within 1e-10 of 1")
        if self.dim <= psd_dim_limit:
            w = np.linalg.eigvalsh(e)
            if w.min() < -1e-10:
                raise ValueError(f"negative eigenvalue {w.min():.2e}")
        return self


def annihilation(dim: int) -> OperatorMatrix:
    """Photon annihilation operator: sqrt(n) on the first superdiagonal."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    return OperatorMatrix(dim, np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex))


def matrix_exp(m: OperatorMatrix, tol: float = 1e-12) -> OperatorMatrix:
    """Matrix exponential by scaling-and-squaring of the Taylor series.

    The result is checked against its inverse: ||exp(M) exp(-M) - I||_max
    must stay below ``tol``, otherwise the series failed to converge.
    """
    e = _expm_taylor(m.entries)
    einv = _expm_taylor(-m.entries)
    resid = np.max(np.abs(e @ einv - np.eye(m.dim)))
    if not np.isfinite(resid) or resid > tol:
        raise ArithmeticError(f"matrix exponential inverse residual {resid:.2e} exceeds {tol:.1e}")
    return OperatorMatrix(m.dim, e)


def _expm_taylor(a: np.ndarray, max_terms: int = 200) -> np.ndarray:
    norm = float(np.max(np.sum(np.abs(a), axis=1))) if a.size else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0.5 else 0
    b = a / (2.0**squarings)
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, max_terms + 1):
        term = term @ b / k
        out += term
        if np.max(np.abs(term)) < 1e-20:
            break
    else:
        raise ArithmeticError("matrix exponential series did not converge")
    for _ in range(squarings):
        out = out @ out
    return out


def displacement(beta: complex, dim: int) -> OperatorMatrix:
    """D(beta) = exp(beta a^+ - beta* a); unitary within 1e-10."""
    a = annihilation(dim).entries
    u = matrix_exp(OperatorMatrix(dim, beta * a.conj().T - np.conjugate(beta) * a))
    _check_unitary(u.entries)
    return u


def squeeze(r: float, theta: float, dim: int) -> OperatorMatrix:
    """S(r e^{i theta}) = exp((z* a^2 - z a^+2)/2); unitary within 1e-10."""
    a = annihilation(dim).entries
    z = r * cmath.exp(1j * theta)
    gen = 0.5 * (np.conjugate(z) * (a @ a) - z * (a.conj().T @ a.conj().T))
    u = matrix_exp(OperatorMatrix(dim, gen))
    _check_unitary(u.entries)
    return u


def _check_unitary(u: np.ndarray, tol: float = 1e-10):
    resid = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if resid > tol:
        raise ArithmeticError(f"operator not unitary within {tol:.1e} (residual {resid:.2e}); increase dim")


def thermal_dm(n_T: float, dim: int) -> DensityMatrix:
    """Diagonal geometric weights, renormalized to unit trace."""
    if n_T < 0:
        raise ValueError("n_T must be >= 0")
    n = np.arange(dim, dtype=float)
    if n_T == 0.0:
        w = np.zeros(dim)
        w[0] = 1.0
    else:
        q = n_T / (n_T + 1.0)
        tail = q**dim
        if tail > 1e-12:
            raise ValueError(f"thermal tail {tail:.2e} too fat for dim {dim}")
        w = np.exp(n * math.log(q) - math.log(n_T + 1.0))
        w = w / w.sum()
    return DensityMatrix(dim, np.diag(w).astype(complex)).validate()


def recommended_dim(spec: StateSpec) -> int:
    """Truncation headroom: at least 4 * (mean + 6 sigma)."""
    mom = closed_form_moments(spec)
    return max(16, int(math.ceil(4.0 * (mom.mean + 6.0 * math.sqrt(max(mom.variance, 0.0))))))


def _pure_dm(psi: np.ndarray) -> DensityMatrix:
    norm_loss = abs(1.0 - float(np.vdot(psi, psi).real))
    if norm_loss > 1e-10:
        raise ValueError(f"pure-state truncation loss {norm_loss:.2e}; increase dim")
    return DensityMatrix(len(psi), np.outer(psi, psi.conj())).validate()


def _conjugated_dm(u: np.ndarray, rho: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(rho.dim, u @ rho.entries @ u.conj().T).validate()


def _gauss_hermite_mixture(beta: float, n_T: float, r: float, dim: int, stable_tol: float = 1e-9) -> DensityMatrix:
    """Thermal P-function mixture of squeezed coherent states.

    rho = integral over the complex plane of a round Gaussian weight of
    width n_T centered at beta, applied to D(alpha) S(r) |0> projectors,
    realized by 2-D Gauss-Hermite quadrature whose order is doubled until
    the diagonal is stable to ``stable_tol``.
    """
    s0 = squeeze(r, 0.0, dim).entries[:, 0]
    a = annihilation(dim).entries
    prev_diag = None
    order = 24
    while order <= 768:
        x, w = np.polynomial.hermite.hermgauss(order)
        scale = math.sqrt(n_T)
        # 1-D factor matrices: D(u + iv) = e^{-i u v} D(iv) D(u)
        vecs_u = []
        for xi in x:
            u = beta + scale * xi
            du = _expm_taylor(u * (a.conj().T - a))
            vecs_u.append(du @ s0)
        vecs_u = np.array(vecs_u)  # (order, dim)
        rho = np.zeros((dim, dim), dtype=complex)
        for j, yj in enumerate(x):
            v = scale * yj
            dv = _expm_taylor(1j * v * (a.conj().T + a))
            psi = vecs_u @ dv.T  # (order, dim): D(iv) applied to each column vector
            wij = (w * w[j] / math.pi)[:, None]
            rho += np.einsum("qd,qe->de", wij * psi, psi.conj())
        diag = np.real(np.diag(rho)).copy()
        if prev_diag is not None and np.max(np.abs(diag - prev_diag)) < stable_tol:
            return DensityMatrix(dim, rho).validate()
        prev_diag = diag
        order *= 2
    raise ArithmeticError("quadrature did not stabilize; increase dim or loosen tolerance")


def build_state(spec: StateSpec, dim: int) -> DensityMatrix:
    """Operator-algebra construction of any supported family."""
    fam = spec.family
    beta = math.sqrt(spec.beta_sq)
    theta = spec.psi - math.pi
    if fam is Family.COHERENT:
        return _pure_dm(displacement(beta, dim).entries[:, 0])
    if fam is Family.THERMAL:
        return thermal_dm(spec.n_T, dim)
    if fam is Family.FOCK:
        psi = np.zeros(dim, dtype=complex)
        psi[spec.fock_level] = 1.0
        return _pure_dm(psi)
    if fam is Family.MIXED_COHERENT_THERMAL:
        return _conjugated_dm(displacement(beta, dim).entries, thermal_dm(spec.n_T, dim))
    if fam is Family.SQUEEZED_VACUUM:
        return _pure_dm(squeeze(spec.r, 0.0, dim).entries[:, 0])
    if fam is Family.SQUEEZED_FOCK:
        return _pure_dm(squeeze(spec.r, 0.0, dim).entries[:, spec.fock_level])
    if fam is Family.SQUEEZED_THERMAL:
        return _conjugated_dm(squeeze(spec.r, 0.0, dim).entries, thermal_dm(spec.n_T, dim))
    if fam is Family.SQUEEZED_COHERENT:
        psi = displacement(beta, dim).entries @ squeeze(spec.r, theta, dim).entries[:, 0]
        return _pure_dm(psi)
    if fam is Family.MIXED_SQUEEZED_COHERENT_THERMAL:
        return _gauss_hermite_mixture(beta, spec.n_T, spec.r, dim)
    if fam is Family.DISPLACED_SQUEEZED_THERMAL:
        d = displacement(beta, dim).entries
        s = squeeze(spec.r, theta, dim).entries
        u = d @ s if spec.variant == "dsts" else s @ d
        return _conjugated_dm(u, thermal_dm(spec.n_T, dim))
    if fam is Family.DISPLACED_NUMBER:
        return _pure_dm(displacement(beta, dim).entries[:, spec.fock_level])
    if fam is Family.SQUEEZED_DISPLACED_NUMBER:
        psi = displacement(beta, dim).entries @ squeeze(spec.r, theta, dim).entries[:, spec.fock_level]
        return _pure_dm(psi)
    raise ValueError(f"unknown family {fam}")


def number_distribution(dm: DensityMatrix) -> np.ndarray:
    """Diagonal of the density matrix with rounding-level negatives clamped."""
    diag = np.real(np.diag(dm.entries)).copy()
    if np.any(diag < -1e-10):
        raise ValueError(f"diagonal entry {diag.min():.2e} significantly negative")
    return np.where(diag < 0.0, 0.0, diag)


def s1_oracle(dm: DensityMatrix, delta: float, z_grid: np.ndarray):
    """First-order correlation sum evaluated from the oracle diagonal.

    Same formula path as :func:`jcfield.dynamics.s1_series`, fed by the
    operator-constructed distribution.
    """
    from .dynamics import Mode, s1_series

    probs = number_distribution(dm)
    nbar = float(np.sum(np.arange(dm.dim) * probs))
    mode = Mode.RESONANT if delta == 0.0 else Mode.NONRESONANT
    return s1_series(probs, nbar, delta, np.asarray(z_grid, dtype=float), mode)
