"""Time integration of pure states and density matrices.

Every problem is reduced to a linear ODE ``dy/dt = A(t) y`` whose generator
is a finite Fourier sum ``A(t) = sum_nu exp(i nu t) A_nu``. ``y`` is either a
ket or a row-major vectorized density matrix, expressed in a *working basis*
(bare or dressed) given by a unitary whose columns are the basis vectors.

Solvers:

``propagator``  exact matrix exponential; static generators only.
``floquet``     one-period propagator raised to integer powers, for
                generators whose frequencies are commensurate.
``dop853``, ``rk45``  adaptive embedded Runge-Kutta (scipy).
``rk4``         classical fixed-step fourth order.
``auto``        the first of propagator / floquet / dop853 that applies.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .dissipators import commutator_superop

METHODS = ("auto", "propagator", "floquet", "dop853", "rk45", "rk4")
TRACE_DRIFT_LIMIT = 1e-6
SPARSE_MIN_DIM = 64
SPARSE_MAX_FILL = 0.1


class StiffnessError(RuntimeError):
    """The adaptive integrator could not resolve the problem."""


@dataclass(frozen=True, eq=False)
class Generator:
    """A(t) = sum_nu exp(i nu t) A_nu acting on kets or vectorized densities."""

    harmonics: dict
    kind: str  # "pure" or "density"

    def __post_init__(self):
        if self.kind not in ("pure", "density"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        h = {float(nu): np.asarray(m, dtype=complex) for nu, m in self.harmonics.items()
             if np.any(m)}
        if not h:
            dim = next(iter(self.harmonics.values())).shape[0]
            h = {0.0: np.zeros((dim, dim), dtype=complex)}
        object.__setattr__(self, "harmonics", h)
        dim = next(iter(h.values())).shape[0]
        fill = sum(np.count_nonzero(m) for m in h.values()) / (len(h) * dim * dim)
        ops = h
        if dim >= SPARSE_MIN_DIM and fill <= SPARSE_MAX_FILL:
            ops = {nu: sparse.csr_matrix(m) for nu, m in h.items()}
        object.__setattr__(self, "_ops", ops)

    @property
    def dim(self) -> int:
        return next(iter(self.harmonics.values())).shape[0]

    @property
    def frequencies(self) -> tuple:
        return tuple(sorted(self.harmonics))

    @property
    def is_static(self) -> bool:
        return self.frequencies == (0.0,)

    def matrix(self, t: float) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for nu, m in self.harmonics.items():
            out += (np.exp(1j * nu * t) if nu else 1.0) * m
        return out

    def apply(self, t: float, y: np.ndarray) -> np.ndarray:
        """A(t) @ y; ``y`` may be a vector or a stack of column vectors."""
        out = None
        for nu, m in self._ops.items():
            term = m @ y
            if nu:
                term = np.exp(1j * nu * t) * term
            out = term if out is None else out + term
        return out

    def restricted(self, idx: np.ndarray) -> "Generator":
        return Generator({nu: m[np.ix_(idx, idx)] for nu, m in self.harmonics.items()}, self.kind)

    def period(self, max_multiple: int = 64, rtol: float = 1e-9) -> Optional[float]:
        """Common period of all harmonics, or None when they are not commensurate."""
        nus = [abs(nu) for nu in self.harmonics if nu]
        if not nus:
            return None
        base = min(nus)
        # the fundamental may be a fraction of the smallest frequency
        for div in range(1, max_multiple + 1):
            f = base / div
            ratios = [nu / f for nu in nus]
            if all(abs(r - round(r)) <= rtol * r and round(r) <= max_multiple for r in ratios):
                return 2 * math.pi / f
        return None


def hamiltonian_generator(h_harmonics: dict, kind: str,
                          dissipator: Optional[np.ndarray] = None) -> Generator:
    """Generator of -i[H(t), rho] + L rho (density) or -i H(t) psi (pure)."""
    if kind == "pure":
        if dissipator is not None and np.any(dissipator):
            raise ValueError("a pure-state run cannot carry a dissipator")
        return Generator({nu: -1j * np.asarray(h) for nu, h in h_harmonics.items()}, "pure")
    out = {nu: commutator_superop(np.asarray(h, dtype=complex)) for nu, h in h_harmonics.items()}
    if dissipator is not None:
        out[0.0] = out.get(0.0, 0) + dissipator
    return Generator(out, "density")


def reachable_indices(gen: Generator, y0: np.ndarray) -> np.ndarray:
    """Indices that the dynamics can populate starting from the support of y0."""
    pattern = np.zeros((gen.dim, gen.dim), dtype=bool)
    for m in gen.harmonics.values():
        pattern |= m != 0
    reach = np.asarray(y0) != 0
    while True:
        new = reach | pattern[:, reach].any(axis=1)
        if np.array_equal(new, reach):
            return np.flatnonzero(reach)
        reach = new


@dataclass(frozen=True, eq=False)
class EvolutionProblem:
    generator: Generator
    initial: np.ndarray           # ket or density matrix in the working basis
    sample_times: np.ndarray
    t0: float = 0.0
    basis: Optional[np.ndarray] = None  # working -> bare unitary; None means bare
    frame: str = "lab"                  # "lab" or "rotating"
    frame_rate: float = 0.0             # omega_r of the excitation-number rotation
    charges: Optional[np.ndarray] = None  # excitation number of each working-basis state

    def __post_init__(self):
        ts = np.asarray(self.sample_times, dtype=float)
        object.__setattr__(self, "sample_times", ts)
        if ts.ndim != 1 or len(ts) == 0:
            raise ValueError("sample_times must be a non-empty 1-D array")
        if np.any(np.diff(ts) < 0):
            raise ValueError("sample_times must be sorted")
        if ts[0] < self.t0:
            raise ValueError("sample_times must not precede t0")
        if self.frame not in ("lab", "rotating"):
            raise ValueError(f"unknown frame {self.frame!r}")
        n = self.state_dim
        expected = n if self.generator.kind == "pure" else n * n
        if self.generator.dim != expected:
            raise ValueError(
                f"generator dimension {self.generator.dim} does not match state dimension {n}")

    @property
    def state_dim(self) -> int:
        return np.asarray(self.initial).shape[0]

    def initial_vector(self) -> np.ndarray:
        s = np.asarray(self.initial, dtype=complex)
        if self.generator.kind == "pure":
            if s.ndim != 1:
                raise ValueError("pure-state generator needs a ket")
            return s.copy()
        if s.ndim == 1:
            s = np.outer(s, s.conj())
        return s.reshape(-1).copy()

    def density(self, y: np.ndarray) -> np.ndarray:
        """Working-basis density matrix from a state vector of this problem."""
        n = self.state_dim
        if self.generator.kind == "pure":
            return np.outer(y, y.conj())
        return y.reshape(n, n)

    def to_bare(self, rho_w: np.ndarray) -> np.ndarray:
        if self.basis is None:
            return rho_w
        u = self.basis
        return u @ rho_w @ u.conj().T

    def to_lab_frame(self, rho_w: np.ndarray, t: float) -> np.ndarray:
        """Undo the excitation-number rotation exp(-i omega_r N t)."""
        if self.frame == "lab" or not self.frame_rate:
            return rho_w
        ph = np.exp(-1j * self.frame_rate * self.charges * t)
        return ph[:, None] * rho_w * ph.conj()[None, :]


@dataclass
class Trajectory:
    times: np.ndarray
    records: list
    states: Optional[list] = None
    method: str = ""
    failed: bool = False
    messages: list = field(default_factory=list)
    wall_time: float = 0.0
    max_trace_err: float = 0.0
    min_eig: float = 0.0

    def series(self, name: str) -> np.ndarray:
        vals = [getattr(r, name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def population(self, label) -> np.ndarray:
        return np.array([r.dressed_pops.get(label, 0.0) for r in self.records])


def _choose_method(gen: Generator, horizon: float, n_samples: int = 1,
                   stroboscopic: bool = False) -> str:
    if gen.is_static:
        return "propagator"
    period = gen.period()
    # Floquet pays one period per propagator column plus about half a period
    # per off-boundary sample; a plain adaptive run pays one per period.
    cost = gen.dim + (0 if stroboscopic else n_samples)
    if period is not None and horizon / period > 2 * cost:
        return "floquet"
    return "dop853"


def _default_max_step(gen: Generator) -> float:
    nus = [abs(nu) for nu in gen.harmonics if nu]
    return 2 * math.pi / (50 * max(nus)) if nus else np.inf


def _stiff(gen: Generator, msg: str) -> StiffnessError:
    nus = [abs(nu) for nu in gen.harmonics if nu]
    norm = max(np.abs(m).sum(axis=1).max() for m in gen.harmonics.values())
    return StiffnessError(
        f"{msg} (generator norm {norm:.3g}, fastest harmonic {max(nus, default=0.0):.3g})")


def _run_propagator(gen, y0, t0, ts):
    out = np.empty((len(ts), len(y0)), dtype=complex)
    a = gen.harmonics.get(0.0)
    cache = {}
    y, t = y0, t0
    for i, ts_i in enumerate(ts):
        dt = ts_i - t
        if dt:
            key = round(dt, 12)
            if key not in cache:
                cache[key] = expm(a * dt)
            y = cache[key] @ y
            t = ts_i
        out[i] = y
    return out


def _solve(gen, y0, t_start, t_end, t_eval, rtol, atol, method, max_step):
    if t_end == t_start:
        return np.repeat(y0[None, :], len(t_eval), axis=0)
    sol = solve_ivp(gen.apply, (t_start, t_end), y0, method=method, t_eval=t_eval,
                    rtol=rtol, atol=atol, max_step=max_step)
    if sol.status < 0:
        raise _stiff(gen, f"integrator failed: {sol.message}")
    return sol.y.T


def _period_propagator(gen, period, rtol, atol):
    n = gen.dim
    eye = np.eye(n, dtype=complex)

    def rhs(t, y):
        return gen.apply(t, y.reshape(n, n)).reshape(-1)

    sol = solve_ivp(rhs, (0.0, period), eye.reshape(-1), method="DOP853",
                    rtol=rtol, atol=atol * 1e-2, max_step=_default_max_step(gen))
    if sol.status < 0:
        raise _stiff(gen, f"period propagator failed: {sol.message}")
    return sol.y[:, -1].reshape(n, n)


def _run_floquet(gen, y0, t0, ts, rtol, atol):
    period = gen.period()
    pt = _period_propagator(gen, period, rtol, atol)
    out = np.empty((len(ts), len(y0)), dtype=complex)
    # state at the last visited period boundary t0 + m * period
    m_done, y_b = 0, y0
    powers = {}
    for i, t in enumerate(ts):
        m = int(math.floor((t - t0) / period + 1e-12))
        dm = m - m_done
        if dm:
            if dm not in powers:
                powers[dm] = np.linalg.matrix_power(pt, dm)
            y_b = powers[dm] @ y_b
            m_done = m
        tb = t0 + m * period
        frac = t - tb
        if frac <= 1e-12 * period:
            out[i] = y_b
        else:
            # harmonics are periodic, so shift time to the first period
            out[i] = _solve(gen, y_b, t0, t0 + frac, [t0 + frac], rtol, atol,
                            "DOP853", _default_max_step(gen))[-1]
    return out


def _run_rk4(gen, y0, t0, ts, step):
    out = np.empty((len(ts), len(y0)), dtype=complex)
    y, t = y0.copy(), t0
    f = gen.apply
    for i, target in enumerate(ts):
        span = target - t
        if span > 0:
            n = max(1, int(math.ceil(span / step - 1e-9)))
            h = span / n
            for _ in range(n):
                k1 = f(t, y)
                k2 = f(t + h / 2, y + h / 2 * k1)
                k3 = f(t + h / 2, y + h / 2 * k2)
                k4 = f(t + h, y + h * k3)
                y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
            t = target
        out[i] = y
    return out


def integrate(problem: EvolutionProblem, rtol: float = 1e-8, atol: float = 1e-10,
              method: str = "auto", max_step: Optional[float] = None,
              keep_states: bool = False, observe=None, reduce: bool = True,
              stroboscopic: bool = False) -> Trajectory:
    """Integrate ``problem`` and evaluate observables at every sample time.

    ``observe(rho_bare) -> record`` defaults to
    :func:`nscqed.observables.observe` without dressed populations.
    ``max_step`` defaults to 2 pi / (50 nu_max) for adaptive methods and is the
    fixed step for ``rk4``. With ``stroboscopic`` a Floquet run moves every
    sample to the nearest period boundary when the period is at most a quarter
    of the sample spacing; the returned times are the moved ones.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if observe is None:
        from .observables import observe as _obs
        observe = _obs
    started = time.perf_counter()
    gen = problem.generator
    y0 = problem.initial_vector()
    ts = problem.sample_times
    horizon = ts[-1] - problem.t0

    idx = reachable_indices(gen, y0) if reduce else np.arange(gen.dim)
    sub = gen.restricted(idx) if len(idx) < gen.dim else gen
    ys = y0[idx]
    if stroboscopic:
        # only worth it (and harmless) when a period is small against the sample spacing
        period = sub.period()
        spacing = np.min(np.diff(ts)) if len(ts) > 1 else horizon
        stroboscopic = period is not None and period <= spacing / 4

    chosen = (_choose_method(sub, horizon, len(ts), stroboscopic) if method == "auto"
              else method)
    if chosen == "propagator" and not sub.is_static:
        raise ValueError("the propagator method needs a static generator")
    if chosen == "floquet" and sub.period() is None:
        raise ValueError("the floquet method needs commensurate harmonic frequencies")
    if chosen == "floquet" and stroboscopic:
        period = sub.period()
        ts = problem.t0 + period * np.round((ts - problem.t0) / period)
    if max_step is None:
        max_step = _default_max_step(sub)

    if chosen == "propagator":
        sol = _run_propagator(sub, ys, problem.t0, ts)
    elif chosen == "floquet":
        sol = _run_floquet(sub, ys, problem.t0, ts, rtol, atol)
    elif chosen == "rk4":
        if not np.isfinite(max_step):
            raise ValueError("rk4 needs a finite step")
        sol = _run_rk4(sub, ys, problem.t0, ts, max_step)
    else:
        sol = _solve(sub, ys, problem.t0, ts[-1], ts, rtol, atol,
                     "DOP853" if chosen == "dop853" else "RK45", max_step)

    records, states = [], [] if keep_states else None
    full = np.zeros(gen.dim, dtype=complex)
    for t, y in zip(ts, sol):
        full[:] = 0
        full[idx] = y
        rho_w = problem.density(full)
        records.append(observe(problem.to_bare(rho_w)))
        if keep_states:
            states.append(problem.to_bare(problem.to_lab_frame(rho_w, t)))
    traj = Trajectory(ts, records, states, method=chosen)
    traj.wall_time = time.perf_counter() - started
    traj.max_trace_err = max(r.trace_err for r in records)
    traj.min_eig = min(r.min_eig for r in records)
    if traj.max_trace_err > TRACE_DRIFT_LIMIT:
        traj.failed = True
        traj.messages.append(f"trace drift {traj.max_trace_err:.3g} exceeds {TRACE_DRIFT_LIMIT}")
    return traj


def frame_transform(rho: np.ndarray, basis, t: float, direction: str = "to_interaction"):
    """Conjugate by U_t = exp(-i t H_JC), diagonal in the dressed basis.

    ``to_interaction`` maps a lab state to U_t^+ rho U_t; ``to_lab`` inverts it.
    ``rho`` is in the bare basis either way.
    """
    if direction not in ("to_interaction", "to_lab"):
        raise ValueError(f"unknown direction {direction!r}")
    sign = 1.0 if direction == "to_interaction" else -1.0
    rd = basis.to_dressed(np.asarray(rho, dtype=complex))
    ph = np.exp(1j * sign * basis.energies * t)
    return basis.to_bare(ph[:, None] * rd * ph.conj()[None, :])
