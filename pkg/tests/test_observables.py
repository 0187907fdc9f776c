import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nscqed.dressed import build_dressed_basis
from nscqed.evolve import frame_transform
from nscqed.hilbert import build_space, coherent_state, ket_to_dm
from nscqed.model import SystemParams
from nscqed.observables import (diagnostics, dressed_populations, excitation_probability,
                                mandel_q, mean_photon, observe, photon_distribution, purity)

P0 = SystemParams(omega0=20.0, Omega0=20.0, g0=1.0)


def test_vacuum():
    sp = build_space(3)
    rho = ket_to_dm(sp.basis_vector(0))
    assert mean_photon(rho) == 0 and excitation_probability(rho) == 0
    assert mandel_q(rho) is None
    assert observe(rho).mandel_q is None


def test_e1():
    sp = build_space(3)
    rho = ket_to_dm(sp.basis_vector(1, True))
    assert mean_photon(rho) == 1 and excitation_probability(rho) == 1


def test_dressed_two_plus():
    sp = build_space(4)
    b = build_dressed_basis(sp, P0)
    rho = ket_to_dm(b.vector(2, 1))
    assert mean_photon(rho) == pytest.approx(1.5)
    assert excitation_probability(rho) == pytest.approx(0.5)
    assert mandel_q(rho) == pytest.approx((0.25 - 1.5) / 1.5)
    assert mandel_q(rho) == pytest.approx(-0.83333, abs=1e-5)


def test_mandel_coherent_and_fock():
    sp = build_space(16)
    assert mandel_q(ket_to_dm(coherent_state(sp, 2.0))) == pytest.approx(0, abs=1e-4)
    assert mandel_q(ket_to_dm(sp.basis_vector(2))) == pytest.approx(-1)


def test_dressed_populations_examples():
    sp = build_space(2)
    b = build_dressed_basis(sp, P0)
    pops = dressed_populations(ket_to_dm(sp.basis_vector(0)), b)
    assert pops[(0, -1)] == pytest.approx(1)
    mixed = dressed_populations(np.eye(6) / 6, b)
    assert all(v == pytest.approx(1 / 6) for v in mixed.values())


def test_diagnostics():
    sp = build_space(3)
    rho = ket_to_dm(coherent_state(build_space(3), 0.3))
    d = diagnostics(rho)
    assert d["trace_err"] <= 1e-10
    assert d["hermiticity_err"] == 0
    assert d["min_eig"] >= -1e-14
    assert d["top_fock_pop"] == pytest.approx(photon_distribution(rho)[-1])
    assert purity(np.eye(sp.dim) / sp.dim) == pytest.approx(1 / sp.dim)


def random_rho(seed, dim):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


@settings(max_examples=30)
@given(st.integers(0, 2 ** 31 - 1))
def test_mean_photon_two_ways(seed):
    sp = build_space(5)
    rho = random_rho(seed, sp.dim)
    marginal = np.array([rho[2 * n, 2 * n] + rho[2 * n + 1, 2 * n + 1] for n in range(6)]).real
    assert mean_photon(rho) == pytest.approx(float(marginal @ np.arange(6)), abs=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 2 ** 31 - 1))
def test_record_invariants(seed):
    sp = build_space(4)
    b = build_dressed_basis(sp, SystemParams(omega0=20.0, Omega0=17.0, g0=1.0))
    rho = random_rho(seed, sp.dim)
    r = observe(rho, b)
    assert 0 <= r.p_e <= 1
    assert sum(r.dressed_pops.values()) == pytest.approx(1, abs=r.trace_err + 1e-12)


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0, 100))
def test_dressed_populations_frame_invariant(seed, t):
    sp = build_space(4)
    b = build_dressed_basis(sp, SystemParams(omega0=20.0, Omega0=17.0, g0=1.0))
    rho = random_rho(seed, sp.dim)
    p1 = dressed_populations(rho, b)
    p2 = dressed_populations(frame_transform(rho, b, t), b)
    assert all(math.isclose(p1[k], p2[k], abs_tol=1e-12) for k in p1)


def test_rejects_non_qubit_shapes():
    with pytest.raises(ValueError):
        mean_photon(np.eye(5) / 5)
