import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nscqed.dissipators import sme_superoperator
from nscqed.dressed import build_dressed_basis
from nscqed.effective import effective_hamiltonian
from nscqed.evolve import (EvolutionProblem, Generator, frame_transform, hamiltonian_generator,
                           integrate)
from nscqed.hilbert import bare_operators, build_space, coherent_state, ket_to_dm
from nscqed.model import SystemParams
from nscqed.observables import observe
from nscqed.scenario import build_problem, load_preset


def test_zero_generator_keeps_state():
    sp = build_space(3)
    rho = ket_to_dm(coherent_state(sp, 0.4))
    gen = Generator({0.0: np.zeros((sp.dim ** 2,) * 2)}, "density")
    tr = integrate(EvolutionProblem(gen, rho, np.linspace(0, 5, 6)), keep_states=True)
    assert tr.method == "propagator"
    for s in tr.states:
        assert np.allclose(s, rho, atol=1e-14)


@pytest.mark.parametrize("method", ["propagator", "dop853"])
def test_cavity_decay_of_coherent_state(method):
    sp = build_space(12)
    ops = bare_operators(sp)
    kappa = 0.1
    gen = hamiltonian_generator({0.0: 3.0 * ops.n}, "density",
                                sme_superoperator(ops, kappa, 0.0, 0.0))
    ts = np.linspace(0, 20, 11)
    tr = integrate(EvolutionProblem(gen, ket_to_dm(coherent_state(sp, 1.0)), ts), method=method)
    n0 = tr.records[0].mean_n
    assert n0 == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(tr.series("mean_n"), n0 * np.exp(-kappa * ts), rtol=1e-6)


def fig1a(solver, periods=1.0, samples=201):
    sc = load_preset("fig1a")
    theta = abs(sc.coupling().theta)
    t_ns = float(sc.internal_to_ns(periods * math.pi / theta))
    prob, basis, _, _ = build_problem(sc, solver, 4, t_max_ns=t_ns, samples=samples)
    return sc, prob, basis, theta


def test_fig1a_rabi_transfer_unitary():
    _, prob, basis, theta = fig1a("effective")
    tr = integrate(prob, observe=functools.partial(observe, basis=basis))
    assert np.max(np.abs(tr.population((2, 1)) - np.sin(theta * tr.times) ** 2)) <= 1e-7


def test_fig1a_rabi_transfer_damped():
    # sin^2(|theta| t) (1 - O(Gamma t)), Gamma the summed rates, matched to 2%
    sc, prob, basis, theta = fig1a("effective+sme")
    p = sc.params
    rate = p.kappa + p.gamma + p.gamma_phi
    tr = integrate(prob, observe=functools.partial(observe, basis=basis))
    pop = tr.population((2, 1))
    ideal = np.sin(theta * tr.times) ** 2
    assert np.all(pop <= ideal + 0.02)
    assert np.all(pop >= ideal * (1 - rate * tr.times) - 0.02)


def test_unitary_density_run_conserves_purity():
    sc = load_preset("fig1a")
    prob, basis, _, _ = build_problem(sc, "unitary", 4, t_max_ns=2.0, samples=21)
    rho0 = ket_to_dm(prob.initial)
    gen = prob.generator
    dens = hamiltonian_generator({nu: 1j * m for nu, m in gen.harmonics.items()}, "density")
    tr = integrate(EvolutionProblem(dens, rho0, prob.sample_times))
    pur = tr.series("purity")
    assert np.max(np.abs(pur - 1)) <= 1e-8


def test_tolerance_halving_converges():
    sc = load_preset("fig1a")
    prob, _, _, _ = build_problem(sc, "unitary", 4, t_max_ns=3.0, samples=3)
    finals = [integrate(prob, rtol=r, atol=r * 1e-2, method="dop853").records[-1].mean_n
              for r in (1e-6, 5e-7, 1e-10)]
    estimate = abs(finals[0] - finals[2])
    assert abs(finals[0] - finals[1]) <= max(estimate, 1e-12) * 1.5
    assert estimate <= 1e-4


def test_rotating_frame_matches_lab_picture():
    sc, prob, basis, theta = fig1a("effective", samples=9)
    # the same effective model written with JC energies and explicit tone phases
    eff = effective_hamiltonian(basis, sc.regime, sc.coupling())
    (lo, up, xi, eta), = eff.couplings
    n = len(basis.labels)
    h_nu = np.zeros((n, n), dtype=complex)
    h_nu[lo, up] = xi
    lab = {0.0: np.diag(basis.energies).astype(complex), eta: h_nu, -eta: h_nu.conj().T}
    assert np.allclose(sum(np.exp(1j * nu * 0.3) * m for nu, m in lab.items()), eff.lab(0.3))
    ts = prob.sample_times
    y0 = prob.initial
    lab_tr = integrate(EvolutionProblem(hamiltonian_generator(lab, "pure"), y0, ts,
                                        basis=basis.transform),
                       observe=functools.partial(observe, basis=basis), method="dop853",
                       rtol=1e-10, atol=1e-12, max_step=np.inf)
    rot_tr = integrate(prob, observe=functools.partial(observe, basis=basis))
    for name in ("mean_n", "p_e"):
        assert np.max(np.abs(lab_tr.series(name) - rot_tr.series(name))) <= 1e-4
    assert np.max(np.abs(lab_tr.population((2, 1)) - rot_tr.population((2, 1)))) <= 1e-4


def test_floquet_matches_adaptive_two_tone():
    sc = load_preset("fig1b")
    prob, basis, _, _ = build_problem(sc, "effective", 6, t_max_ns=60.0, samples=7)
    obs = functools.partial(observe, basis=basis)
    fl = integrate(prob, method="floquet", observe=obs)
    dp = integrate(prob, method="dop853", observe=obs)
    assert fl.method == "floquet"
    for name in ("mean_n", "p_e"):
        assert np.max(np.abs(fl.series(name) - dp.series(name))) <= 1e-6


def test_stroboscopic_snaps_to_periods():
    sc = load_preset("fig1b")
    prob, _, _, _ = build_problem(sc, "effective", 6, t_max_ns=3000.0, samples=5)
    period = prob.generator.period()
    tr = integrate(prob, method="floquet", stroboscopic=True)
    m = tr.times / period
    assert np.allclose(m, np.round(m), atol=1e-9)
    assert np.max(np.abs(tr.times - prob.sample_times)) <= period / 2 + 1e-9


def test_trace_drift_flagged():
    sp = build_space(2)
    leak = -0.01 * np.eye(sp.dim ** 2)
    gen = Generator({0.0: leak}, "density")
    tr = integrate(EvolutionProblem(gen, ket_to_dm(sp.basis_vector(0)), [0.0, 1.0]))
    assert tr.failed
    assert "trace drift" in tr.messages[0]


def test_reduction_does_not_change_results():
    sc = load_preset("fig1a")
    prob, basis, _, _ = build_problem(sc, "effective+dpme", 4, t_max_ns=100.0, samples=5)
    a = integrate(prob, reduce=True)
    b = integrate(prob, reduce=False)
    assert np.allclose(a.series("mean_n"), b.series("mean_n"), atol=1e-10)


def test_method_preconditions():
    sc = load_preset("fig1b")
    prob, _, _, _ = build_problem(sc, "effective", 6, t_max_ns=10.0, samples=3)
    with pytest.raises(ValueError, match="static"):
        integrate(prob, method="propagator")
    with pytest.raises(ValueError):
        integrate(prob, method="euler")
    with pytest.raises(ValueError):
        EvolutionProblem(prob.generator, prob.initial, [2.0, 1.0])


def test_rk4_matches_adaptive():
    sc = load_preset("fig1a")
    prob, _, _, _ = build_problem(sc, "unitary", 4, t_max_ns=1.0, samples=3)
    eta = max(prob.generator.frequencies)
    a = integrate(prob, method="rk4", max_step=2 * math.pi / (200 * eta))
    b = integrate(prob, method="dop853", rtol=1e-10, atol=1e-12)
    assert np.allclose(a.series("mean_n"), b.series("mean_n"), atol=1e-7)


BASIS = build_dressed_basis(build_space(4), SystemParams(omega0=20.0, Omega0=16.0, g0=1.0))


def test_frame_transform_examples():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    rho = m @ m.conj().T
    assert np.allclose(frame_transform(rho, BASIS, 0.0), rho)
    diag = BASIS.to_bare(np.diag(rng.random(10)))
    assert np.allclose(frame_transform(diag, BASIS, 7.3), diag)
    with pytest.raises(ValueError):
        frame_transform(rho, BASIS, 1.0, "sideways")


@settings(max_examples=25)
@given(st.floats(-100, 100), st.integers(0, 2 ** 31 - 1))
def test_frame_round_trip(t, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    back = frame_transform(frame_transform(m, BASIS, t), BASIS, t, "to_lab")
    assert np.max(np.abs(back - m)) <= 1e-12 * max(1.0, np.abs(m).max())
