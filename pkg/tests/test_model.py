import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nscqed.hilbert import bare_operators, build_space
from nscqed.model import (ModulationSchedule, ModulationTone, ParameterError, SystemParams,
                          derived_frequencies, hamiltonian_at, hamiltonian_harmonics,
                          parameter_value, static_hamiltonian)

W0 = 20.0  # omega0 in units of g0 = 1


def params(dm=0.0, **kw):
    return SystemParams(omega0=W0, Omega0=W0 - dm, g0=1.0, **kw)


def test_empty_schedule_returns_bare_value():
    p = params()
    for t in (0.0, 0.3, 17.0):
        assert parameter_value(p, ModulationSchedule(), "Omega", t) == p.Omega0


def test_sine_peak():
    p = params()
    eps, eta = 0.7, 41.0
    sched = ModulationSchedule((ModulationTone("Omega", eps, eta),))
    t = math.pi / 2 / eta
    assert parameter_value(p, sched, "Omega", t) == pytest.approx(p.Omega0 + eps, abs=1e-12)


def test_phase_convention():
    p = params()
    tone = ModulationTone("g", 0.2 * np.exp(0.4j), 30.0)
    t = 0.123
    expected = p.g0 + 0.2 * math.sin(30.0 * t + 0.4)
    assert parameter_value(p, ModulationSchedule((tone,)), "g", t) == pytest.approx(expected)


@given(st.floats(0, 50))
def test_tones_superpose(t):
    p = params()
    a = ModulationTone("omega", 0.3, 41.0)
    b = ModulationTone("omega", 0.1 + 0.2j, 43.0)
    both = parameter_value(p, ModulationSchedule((a, b)), "omega", t)
    sep = (parameter_value(p, ModulationSchedule((a,)), "omega", t)
           + parameter_value(p, ModulationSchedule((b,)), "omega", t) - p.omega0)
    assert both == pytest.approx(sep, abs=1e-12)


def test_static_eigenvalues_without_coupling():
    p = SystemParams(omega0=W0, Omega0=17.0, g0=0.0)
    ops = bare_operators(build_space(4))
    ev = np.sort(np.linalg.eigvalsh(static_hamiltonian(p, ops)))
    expected = np.sort([W0 * n + 17.0 * s for n in range(5) for s in (0, 1)])
    assert np.allclose(ev, expected)


def test_resonant_lowest_levels():
    p = params()
    ops = bare_operators(build_space(12))
    ev = np.sort(np.linalg.eigvalsh(static_hamiltonian(p, ops)))
    gaps = ev[1:3] - ev[0]
    # counter-rotating corrections are O(g0^2 / omega0)
    assert gaps[0] == pytest.approx(W0 - 1.0, abs=1e-3 * W0 * 5)
    assert gaps[1] == pytest.approx(W0 + 1.0, abs=1e-3 * W0 * 5)
    assert abs(gaps[0] - (W0 - 1.0)) < 2 * 1.0 / W0


def _max_herm_err(h):
    return np.max(np.abs(h - h.conj().T)) / max(np.linalg.norm(h), 1.0)


@settings(max_examples=25)
@given(st.floats(0, 100), st.floats(0, 2 * math.pi))
def test_hamiltonian_hermitian_all_targets(t, phase):
    p = params(dm=2.0)
    ops = bare_operators(build_space(5))
    sched = ModulationSchedule(tuple(
        ModulationTone(tg, 0.3 * np.exp(1j * phase), 40.0 + i)
        for i, tg in enumerate(("omega", "Omega", "g", "chi"))))
    assert _max_herm_err(hamiltonian_at(p, sched, ops, t)) <= 1e-12


def test_chi_tone_term():
    p = params()
    ops = bare_operators(build_space(5))
    sched = ModulationSchedule((ModulationTone("chi", 0.2, 41.0),))
    t = 0.37
    diff = hamiltonian_at(p, sched, ops, t) - static_hamiltonian(p, ops)
    chi = 0.2 * math.sin(41.0 * t)
    expected = 1j * chi * (ops.a_dag @ ops.a_dag - ops.a @ ops.a)
    assert np.allclose(diff, expected)
    assert np.allclose(diff, diff.conj().T)


@settings(max_examples=20)
@given(st.floats(0, 30))
def test_single_tone_periodic(t):
    p = params()
    ops = bare_operators(build_space(4))
    eta = 41.3
    sched = ModulationSchedule((ModulationTone("Omega", 1.0, eta),))
    h1 = hamiltonian_at(p, sched, ops, t)
    h2 = hamiltonian_at(p, sched, ops, t + 2 * math.pi / eta)
    assert np.max(np.abs(h1 - h2)) <= 1e-12 * np.linalg.norm(h1)


@settings(max_examples=20)
@given(st.floats(0, 30))
def test_harmonics_reproduce_hamiltonian(t):
    p = params(dm=3.0)
    ops = bare_operators(build_space(4))
    sched = ModulationSchedule((ModulationTone("Omega", 0.4 + 0.1j, 41.0),
                                ModulationTone("g", 0.05, 35.0),
                                ModulationTone("chi", 0.01j, 41.0)))
    h = sum(np.exp(1j * nu * t) * m for nu, m in hamiltonian_harmonics(p, sched, ops).items())
    assert np.allclose(h, hamiltonian_at(p, sched, ops, t), atol=1e-12)


def test_static_when_depths_zero():
    p = params()
    ops = bare_operators(build_space(3))
    sched = ModulationSchedule((ModulationTone("Omega", 0.0, 41.0),))
    h1, h2 = hamiltonian_at(p, sched, ops, 0.1), hamiltonian_at(p, sched, ops, 2.9)
    assert np.array_equal(h1, h2)
    assert np.allclose(h1 @ h2, h2 @ h1)


def test_derived_dispersive_values():
    p = params(dm=8.0)
    f = derived_frequencies(p)
    assert f.disp_shift == pytest.approx(1 / 8)
    assert f.delta_plus == pytest.approx(1.6 * W0)
    assert f.bs_shift == pytest.approx(0.0015625 * W0)
    assert f.detuning_symbol == 1
    assert derived_frequencies(params(dm=-8.0)).detuning_symbol == -1


def test_derived_resonant_flags_unavailable():
    f = derived_frequencies(params())
    assert f.detuning_symbol is None
    assert f.disp_shift is None
    assert not f.dispersive_available


def test_parameter_invariants():
    with pytest.raises(ParameterError):
        SystemParams(omega0=-1.0, Omega0=1.0, g0=0.1)
    with pytest.raises(ParameterError):
        SystemParams(omega0=W0, Omega0=W0, g0=1.0, chi0=0.1)
    with pytest.raises(ParameterError):
        params(dm=11.0)
    with pytest.raises(ParameterError):
        params(kappa=-1e-4)


def test_weak_coupling_limits():
    p = params()
    p.check_weak_coupling(4)
    with pytest.warns(UserWarning):
        p.check_weak_coupling(9)  # 3/20 = 0.15
    with pytest.raises(ParameterError):
        p.check_weak_coupling(25)  # 5/20 = 0.25


def test_schedule_validation():
    p = params()
    slow = ModulationSchedule((ModulationTone("Omega", 0.1, 0.9 * W0),))
    with pytest.raises(ParameterError, match="frequency"):
        slow.validate(p, 4)
    deep = ModulationSchedule((ModulationTone("Omega", 2.5, 41.0),))
    with pytest.raises(ParameterError, match="depth"):
        deep.validate(p, 4)
    g_deep = ModulationSchedule((ModulationTone("g", 0.5, 41.0),))
    g_deep.validate(p, 4)  # 0.5 * 2 = 1.0 <= 2
    with pytest.raises(ParameterError):
        g_deep.validate(p, 25)  # 0.5 * 5 > 2
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ModulationSchedule().validate(p, 4)


def test_unknown_target():
    with pytest.raises(ParameterError):
        ModulationTone("kappa", 0.1, 41.0)
