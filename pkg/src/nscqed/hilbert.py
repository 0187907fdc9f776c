"""Truncated qubit x Fock space, bare operators and states.

Basis ordering (used by every module, never re-derived elsewhere)::

    index = 2 * n + q,    q = 0 for |g>, q = 1 for |e>

with photon number n = 0 .. n_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class TruncationError(ValueError):
    """Raised when the Fock truncation is too small for the request."""


@dataclass(frozen=True)
class HilbertSpace:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise TruncationError(f"n_max must be an integer >= 2, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    def index(self, n: int, excited: bool) -> int:
        if not 0 <= n <= self.n_max:
            raise TruncationError(f"photon number {n} outside 0..{self.n_max}")
        return 2 * n + int(bool(excited))

    def basis_vector(self, n: int, excited: bool = False) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(n, excited)] = 1.0
        return v

    @property
    def photon_numbers(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_max + 1), 2)

    @property
    def qubit_excited(self) -> np.ndarray:
        return np.tile(np.array([0, 1]), self.n_max + 1)

    @property
    def excitations(self) -> np.ndarray:
        """Total excitation number n + q of every basis state."""
        return self.photon_numbers + self.qubit_excited


def build_space(n_max: int) -> HilbertSpace:
    return HilbertSpace(n_max)


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.ascontiguousarray(m, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class OperatorSet:
    space: HilbertSpace
    a: np.ndarray
    a_dag: np.ndarray
    n: np.ndarray
    sigma_minus: np.ndarray
    sigma_plus: np.ndarray
    sigma_z: np.ndarray
    excited_projector: np.ndarray
    identity: np.ndarray

    @property
    def x(self) -> np.ndarray:
        """Field quadrature a + a^dagger."""
        return self.a + self.a_dag

    @property
    def sigma_x(self) -> np.ndarray:
        return self.sigma_plus + self.sigma_minus


def bare_operators(space: HilbertSpace) -> OperatorSet:
    """Dense bare operators, truncated by plain projection."""
    nf = space.n_max + 1
    a_field = np.diag(np.sqrt(np.arange(1, nf, dtype=float)), 1)
    id_field = np.eye(nf)
    sm_qubit = np.array([[0.0, 1.0], [0.0, 0.0]])  # |g><e|
    pe_qubit = np.diag([0.0, 1.0])
    id_qubit = np.eye(2)

    a = np.kron(a_field, id_qubit)
    sm = np.kron(id_field, sm_qubit)
    pe = np.kron(id_field, pe_qubit)
    ident = np.eye(space.dim)
    return OperatorSet(
        space=space,
        a=_frozen(a),
        a_dag=_frozen(a.T),
        n=_frozen(a.T @ a),
        sigma_minus=_frozen(sm),
        sigma_plus=_frozen(sm.T),
        sigma_z=_frozen(2 * pe - ident),
        excited_projector=_frozen(pe),
        identity=_frozen(ident),
    )


def coherent_state(space: HilbertSpace, alpha: complex) -> np.ndarray:
    """|g> x |alpha>, renormalized after truncation.

    Requires |alpha|^2 <= n_max / 4 so the truncated tail stays negligible.
    """
    if abs(alpha) ** 2 > space.n_max / 4:
        need = math.ceil(4 * abs(alpha) ** 2)
        raise TruncationError(
            f"coherent amplitude |alpha|^2={abs(alpha) ** 2:g} needs n_max >= {need} "
            f"(got {space.n_max})"
        )
    n = np.arange(space.n_max + 1)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    if alpha == 0:
        amps = (n == 0).astype(complex)
    else:
        amps = np.exp(n * np.log(complex(alpha)) - 0.5 * log_fact)
    amps = amps / np.linalg.norm(amps)
    psi = np.zeros(space.dim, dtype=complex)
    psi[0::2] = amps
    return psi


def check_pure_state(psi: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError("pure state must be a vector")
    if abs(np.linalg.norm(psi) - 1.0) > tol:
        raise ValueError(f"state norm {np.linalg.norm(psi)!r} is not 1")
    return psi


def check_density_matrix(rho: np.ndarray, trace_tol: float = 1e-10,
                         herm_tol: float = 1e-12, eig_tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.12g} != 1")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def as_density_matrix(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return ket_to_dm(state) if state.ndim == 1 else state


def expectation(rho: np.ndarray, op: np.ndarray, imag_tol: float = 1e-10):
    """Tr(rho op); the real part is returned when op is Hermitian."""
    rho = np.asarray(rho)
    op = np.asarray(op)
    if rho.shape != op.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs operator {op.shape}")
    value = np.einsum("ij,ji->", rho, op)
    if np.allclose(op, op.conj().T, atol=1e-14):
        if abs(value.imag) > imag_tol:
            raise ValueError(f"imaginary residue {value.imag:g} for Hermitian observable")
        return float(value.real)
    return complex(value)
