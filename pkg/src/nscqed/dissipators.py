"""Zero-temperature Liouvillians: the quantum-optical SME and the dressed-picture DPME.

Superoperators act on row-major vectorized density matrices,
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dressed import DressedBasis, TransitionTables
from .hilbert import OperatorSet


def spre(a: np.ndarray) -> np.ndarray:
    return np.kron(a, np.eye(a.shape[0]))


def spost(b: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(b.shape[0]), b.T)


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> -i[h, rho]."""
    return -1j * (spre(h) - spost(h))


def lindblad_superop(op: np.ndarray) -> np.ndarray:
    """D[O] rho = O rho O^+ - (O^+ O rho + rho O^+ O) / 2."""
    op = np.asarray(op, dtype=complex)
    od_o = op.conj().T @ op
    return np.kron(op, op.conj()) - 0.5 * spre(od_o) - 0.5 * spost(od_o)


def lindblad_apply(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    od = op.conj().T
    od_o = od @ op
    return op @ rho @ od - 0.5 * (od_o @ rho + rho @ od_o)


def _check_rates(*rates):
    for r in rates:
        if r < 0:
            raise ValueError(f"dissipation rates must be non-negative, got {r!r}")


def sme_superoperator(ops: OperatorSet, kappa: float, gamma: float, gamma_phi: float,
                      basis: np.ndarray | None = None) -> np.ndarray:
    """kappa D[a] + gamma D[sigma_-] + (gamma_phi/2) D[sigma_z].

    With ``basis`` (a unitary whose columns are the new basis vectors) the
    superoperator is expressed in that basis instead of the bare one.
    """
    _check_rates(kappa, gamma, gamma_phi)
    a, sm, sz = ops.a, ops.sigma_minus, ops.sigma_z
    if basis is not None:
        u = np.asarray(basis)
        a, sm, sz = (u.conj().T @ m @ u for m in (a, sm, sz))
    n = ops.space.dim ** 2
    out = np.zeros((n, n), dtype=complex)
    for rate, op in ((kappa, a), (gamma, sm), (gamma_phi / 2, sz)):
        if rate:
            out += rate * lindblad_superop(op)
    return out


def sme_apply(rho: np.ndarray, ops: OperatorSet, kappa: float, gamma: float,
              gamma_phi: float) -> np.ndarray:
    _check_rates(kappa, gamma, gamma_phi)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ops.space.dim,) * 2:
        raise ValueError("rho dimension does not match the operator set")
    return (kappa * lindblad_apply(ops.a, rho)
            + gamma * lindblad_apply(ops.sigma_minus, rho)
            + gamma_phi / 2 * lindblad_apply(ops.sigma_z, rho))


def flat_positive(rate: float) -> Callable:
    """Spectral density equal to ``rate`` for nu >= 0 and zero below."""
    _check_rates(rate)

    def density(nu):
        return np.where(np.asarray(nu) >= 0, rate, 0.0)

    return density


@dataclass(frozen=True)
class SpectralDensityPolicy:
    kappa_fn: Callable
    gamma_fn: Callable
    gammaphi_fn: Callable

    @classmethod
    def flat(cls, kappa: float, gamma: float, gamma_phi: float) -> "SpectralDensityPolicy":
        return cls(flat_positive(kappa), flat_positive(gamma), flat_positive(gamma_phi))


@dataclass(frozen=True, eq=False)
class DpmeRates:
    phi: np.ndarray          # Phi^l
    gamma_phi: np.ndarray    # [l, k], l != k
    gamma_kappa: np.ndarray  # [l, k], k above l
    gamma_gamma: np.ndarray  # [l, k], k above l

    @property
    def jump_rates(self) -> np.ndarray:
        """Total rate of every D[|l><k|] term."""
        return self.gamma_phi + self.gamma_kappa + self.gamma_gamma


def dpme_rates(basis: DressedBasis, tables: TransitionTables,
               policy: SpectralDensityPolicy) -> DpmeRates:
    nl = len(basis.labels)
    delta = tables.delta  # delta[l, k] = lambda_k - lambda_l
    phi = np.sqrt(float(policy.gammaphi_fn(0.0)) / 2) * np.real(np.diag(tables.sz))
    off = ~np.eye(nl, dtype=bool)
    above = np.triu(np.ones((nl, nl), dtype=bool), 1)  # k > l in level order
    gphi = np.where(off, policy.gammaphi_fn(delta) * np.abs(tables.sz) ** 2 / 2, 0.0)
    gkap = np.where(above, policy.kappa_fn(delta) * np.abs(tables.a) ** 2, 0.0)
    ggam = np.where(above, policy.gamma_fn(delta) * np.abs(tables.sx) ** 2, 0.0)
    return DpmeRates(phi, gphi, gkap, ggam)


def dpme_superoperator_dressed(rates: DpmeRates) -> np.ndarray:
    """DPME superoperator in the dressed basis (level order)."""
    c = rates.phi
    w = rates.jump_rates
    nl = len(c)
    # collective dephasing D[sum_l Phi^l |l><l|] is diagonal: -|c_i - c_j|^2 / 2
    diag = -0.5 * np.abs(c[:, None] - c[None, :]) ** 2
    loss = w.sum(axis=0)  # total rate out of each level k
    diag = diag - 0.5 * (loss[:, None] + loss[None, :])
    out = np.diag(diag.ravel()).astype(complex)
    pop = np.arange(nl) * (nl + 1)  # vec index of rho_ll
    out[np.ix_(pop, pop)] += w
    return out


def to_bare_superop(superop_d: np.ndarray, basis: DressedBasis) -> np.ndarray:
    u = basis.transform
    t = np.kron(u, u.conj())
    return t @ superop_d @ t.conj().T


def dpme_superoperator(basis: DressedBasis, rates: DpmeRates) -> np.ndarray:
    """DPME superoperator in the bare basis."""
    return to_bare_superop(dpme_superoperator_dressed(rates), basis)


def dpme_apply(rho: np.ndarray, basis: DressedBasis, rates: DpmeRates) -> np.ndarray:
    """L_dr rho for a lab-basis rho; rotated to the dressed basis internally."""
    rd = basis.to_dressed(np.asarray(rho, dtype=complex))
    c = rates.phi
    w = rates.jump_rates
    out = -0.5 * np.abs(c[:, None] - c[None, :]) ** 2 * rd
    loss = w.sum(axis=0)
    out -= 0.5 * (loss[:, None] + loss[None, :]) * rd
    out += np.diag(w @ np.real(np.diag(rd)))
    return basis.to_bare(out)


def secular_projection(superop_d: np.ndarray, energies: np.ndarray, tol: float) -> np.ndarray:
    """Keep only the terms that do not oscillate in the dressed interaction picture.

    Entry ((i, j), (k, l)) picks up exp(i t (w_ij - w_kl)) with w_ij = lambda_i - lambda_j;
    it is kept when |w_ij - w_kl| <= tol.
    """
    bohr = (energies[:, None] - energies[None, :]).ravel()
    keep = np.abs(bohr[:, None] - bohr[None, :]) <= tol
    return np.where(keep, superop_d, 0.0)
