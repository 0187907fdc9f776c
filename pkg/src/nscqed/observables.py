"""Observables and numerical-health diagnostics of bare-basis density matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .hilbert import HilbertSpace, as_density_matrix

Q_UNDEFINED_BELOW = 1e-12


def _space(rho: np.ndarray) -> HilbertSpace:
    dim = rho.shape[0]
    if dim % 2 or rho.shape != (dim, dim):
        raise ValueError(f"not a qubit x Fock density matrix: shape {rho.shape}")
    return HilbertSpace(dim // 2 - 1)


def _diag(rho):
    return np.real(np.diagonal(rho))


def mean_photon(rho: np.ndarray) -> float:
    rho = as_density_matrix(rho)
    return float(_diag(rho) @ _space(rho).photon_numbers)


def excitation_probability(rho: np.ndarray) -> float:
    rho = as_density_matrix(rho)
    return float(_diag(rho) @ _space(rho).qubit_excited)


def photon_distribution(rho: np.ndarray) -> np.ndarray:
    """P(n) for n = 0..n_max, tracing out the qubit."""
    rho = as_density_matrix(rho)
    return _diag(rho).reshape(-1, 2).sum(axis=1)


def mandel_q(rho: np.ndarray) -> Optional[float]:
    """(Var n - <n>) / <n>; None in vacuum, where it is 0/0."""
    p = photon_distribution(rho)
    n = np.arange(len(p))
    mean = float(p @ n)
    if mean < Q_UNDEFINED_BELOW:
        return None
    var = float(p @ n ** 2) - mean ** 2
    return (var - mean) / mean


def dressed_populations(rho: np.ndarray, basis) -> dict:
    rho = as_density_matrix(rho)
    u = basis.transform
    pops = np.real(np.einsum("il,ij,jl->l", u.conj(), rho, u))
    return dict(zip(basis.labels, pops.tolist()))


def purity(rho: np.ndarray) -> float:
    rho = as_density_matrix(rho)
    return float(np.real(np.vdot(rho, rho)))


def diagnostics(rho: np.ndarray) -> dict:
    rho = as_density_matrix(rho)
    herm = rho - rho.conj().T
    sym = (rho + rho.conj().T) / 2
    return {
        "trace_err": float(abs(np.trace(rho) - 1.0)),
        "min_eig": float(np.linalg.eigvalsh(sym).min()),
        "hermiticity_err": float(np.max(np.abs(herm))),
        "top_fock_pop": float(photon_distribution(rho)[-1]),
    }


@dataclass
class ObservableRecord:
    mean_n: float
    mandel_q: Optional[float]
    p_e: float
    trace_err: float
    min_eig: float
    top_fock_pop: float
    purity: float
    dressed_pops: dict = field(default_factory=dict)


def observe(rho: np.ndarray, basis=None) -> ObservableRecord:
    """All per-sample quantities at once."""
    rho = as_density_matrix(rho)
    d = diagnostics(rho)
    return ObservableRecord(
        mean_n=mean_photon(rho),
        mandel_q=mandel_q(rho),
        p_e=excitation_probability(rho),
        trace_err=d["trace_err"],
        min_eig=d["min_eig"],
        top_fock_pop=d["top_fock_pop"],
        purity=purity(rho),
        dressed_pops=dressed_populations(rho, basis) if basis is not None else {},
    )
