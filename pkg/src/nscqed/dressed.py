"""Jaynes-Cummings dressed basis built from the closed-form angles and energies.

Dressed states are labelled ``(n, s)`` with ``n`` the excitation number and
``s = +1 / -1``. ``(0, +1)`` does not exist. Truncation leaves the bare state
``|e, n_max>`` without a partner; it is appended verbatim as the top level and
labelled ``(n_max + 1, 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .hilbert import HilbertSpace, OperatorSet
from .model import SystemParams, jc_hamiltonian, static_hamiltonian


class UndefinedStateError(ValueError):
    pass


def splitting(params: SystemParams, n: int) -> float:
    """beta_n = sqrt(Delta_-^2 + 4 g0^2 n)."""
    return math.sqrt(params.delta_minus ** 2 + 4 * params.g0 ** 2 * n)


def mixing_angle(params: SystemParams, n: int) -> float:
    if n < 0:
        raise UndefinedStateError(f"negative excitation number {n}")
    if n == 0:
        return 0.0
    num = params.delta_minus + splitting(params, n)
    den = 2 * params.g0 * math.sqrt(n)
    # bare limit g0 = 0
    if den == 0:
        return math.pi / 2 if num > 0 else 0.0
    return math.atan(num / den)


def dressed_energy(params: SystemParams, n: int, s: int) -> float:
    if n == 0:
        if s != -1:
            raise UndefinedStateError("|phi_{0,+}> is not a state")
        return 0.0
    if n < 0 or s not in (1, -1):
        raise UndefinedStateError(f"no dressed state ({n}, {s})")
    return params.omega0 * n - params.delta_minus / 2 + s * splitting(params, n) / 2


def _components(params: SystemParams, n: int, s: int):
    """(coefficient of |g,n>, coefficient of |e,n-1>)."""
    th = mixing_angle(params, n)
    if s == -1:
        return math.cos(th), -math.sin(th)
    return math.sin(th), math.cos(th)


def dressed_vector(space: HilbertSpace, params: SystemParams, n: int, s: int) -> np.ndarray:
    if not 0 <= n <= space.n_max:
        raise UndefinedStateError(f"n={n} outside 0..{space.n_max}")
    if n == 0:
        if s != -1:
            raise UndefinedStateError("|phi_{0,+}> is not a state")
        return space.basis_vector(0, False)
    cg, ce = _components(params, n, s)
    v = np.zeros(space.dim, dtype=complex)
    v[space.index(n, False)] = cg
    v[space.index(n - 1, True)] = ce
    return v


@dataclass(frozen=True, eq=False)
class DressedBasis:
    space: HilbertSpace
    params: SystemParams
    labels: tuple          # level l -> (n, s), sorted by energy
    energies: np.ndarray   # lambda_l
    transform: np.ndarray  # columns are the dressed vectors in bare coordinates
    angles: np.ndarray     # theta_n, n = 0..n_max

    @property
    def top_label(self):
        return (self.space.n_max + 1, 0)

    def level(self, n: int, s: int) -> int:
        try:
            return self._index[(n, s)]
        except KeyError:
            raise UndefinedStateError(f"no dressed level ({n}, {s}) in this basis") from None

    @cached_property
    def _index(self):
        return {lab: i for i, lab in enumerate(self.labels)}

    @property
    def excitations(self) -> np.ndarray:
        return np.array([lab[0] for lab in self.labels])

    def vector(self, n: int, s: int) -> np.ndarray:
        return self.transform[:, self.level(n, s)]

    def to_dressed(self, rho: np.ndarray) -> np.ndarray:
        u = self.transform
        return u.conj().T @ rho @ u

    def to_bare(self, rho_d: np.ndarray) -> np.ndarray:
        u = self.transform
        return u @ rho_d @ u.conj().T

    def operator_to_dressed(self, op: np.ndarray) -> np.ndarray:
        return self.to_dressed(op)

    def projector(self, n: int, s: int) -> np.ndarray:
        v = self.vector(n, s)
        return np.outer(v, v.conj())


def build_dressed_basis(space: HilbertSpace, params: SystemParams) -> DressedBasis:
    labels = [(0, -1)]
    energies = [0.0]
    vectors = [space.basis_vector(0, False)]
    for n in range(1, space.n_max + 1):
        for s in (-1, 1):
            labels.append((n, s))
            energies.append(dressed_energy(params, n, s))
            vectors.append(dressed_vector(space, params, n, s))
    labels.append((space.n_max + 1, 0))
    energies.append(space.n_max * params.omega0 + params.Omega0)
    vectors.append(space.basis_vector(space.n_max, True))

    order = np.argsort(np.array(energies), kind="stable")
    transform = np.column_stack([vectors[i] for i in order])
    transform.setflags(write=False)
    e = np.array(energies)[order]
    e.setflags(write=False)
    angles = np.array([mixing_angle(params, n) for n in range(space.n_max + 1)])
    angles.setflags(write=False)
    return DressedBasis(space, params, tuple(labels[i] for i in order), e, transform, angles)


def eigen_residual(basis: DressedBasis, ops: OperatorSet) -> float:
    """max_l ||H_JC |l> - lambda_l |l>|| over all levels."""
    h = jc_hamiltonian(basis.params, ops)
    r = h @ basis.transform - basis.transform * basis.energies[None, :]
    return float(np.max(np.linalg.norm(r, axis=0)))


@dataclass(frozen=True, eq=False)
class TransitionTables:
    delta: np.ndarray  # delta[l, k] = lambda_k - lambda_l
    a: np.ndarray      # <l|(a + a^dag)|k>
    sx: np.ndarray     # <l|(sigma_+ + sigma_-)|k>
    sz: np.ndarray     # <l|sigma_z|k>


def transition_tables(basis: DressedBasis, ops: OperatorSet) -> TransitionTables:
    if ops.space != basis.space:
        raise ValueError("operators and dressed basis live on different spaces")
    u = basis.transform
    el = basis.energies
    return TransitionTables(
        delta=el[None, :] - el[:, None],
        a=u.conj().T @ ops.x @ u,
        sx=u.conj().T @ ops.sigma_x @ u,
        sz=u.conj().T @ ops.sigma_z @ u,
    )


def rabi_overlap_diagnostic(basis: DressedBasis, ops: OperatorSet) -> np.ndarray:
    """Largest overlap of each analytic dressed vector with the numerical Rabi eigenvectors.

    Diagnostic only; the dissipators always use the analytic JC basis.
    """
    _, vecs = np.linalg.eigh(static_hamiltonian(basis.params, ops))
    overlaps = np.abs(vecs.conj().T @ basis.transform) ** 2
    return overlaps.max(axis=0)


def rabi_gap(basis: DressedBasis, ops: OperatorSet, lower, upper) -> float:
    """Gap between the numerical Rabi eigenstates that best overlap two dressed levels.

    Includes the counter-rotating (Bloch-Siegert type) shifts that the analytic
    levels omit; used to centre the lab-frame resonance search.
    """
    vals, vecs = np.linalg.eigh(static_hamiltonian(basis.params, ops))
    overlaps = np.abs(vecs.conj().T @ basis.transform) ** 2

    def energy(label):
        return vals[int(np.argmax(overlaps[:, basis.level(*label)]))]

    return float(energy(upper) - energy(lower))
