"""Scenario files: YAML description of a run, unit conversion and run assembly.

Internal units: frequencies in g0, time in 1/g0. A scenario stores values in
the units a user would quote (GHz, ratios to omega0 or g0, ns) and resolves
them on demand. Format (``schema_version: 1``)::

    schema_version: 1
    name: fig1a
    system:
      omega0_ghz: 8.0             # omega0 / 2 pi
      g0_over_omega0: 0.05
      delta_minus_over_g0: 0.0    # omega0 - Omega0
      kappa_over_g0: 2.0e-4
      gamma_over_g0: 2.0e-4
      gamma_phi_over_g0: 2.0e-4
    regime: {kind: resonant, R: 1}
    tones:
      - target: Omega
        depth: 0.05
        depth_unit: Omega0        # omega0 | Omega0 | g0
        phase: 0.0
        tone: 1                   # which regime tone this modulation feeds
        frequency: resonance      # or {transition: [[2, 1], [0, -1]], bs_correction: 0.954}
                                  # or {g0: 40.0} | {ghz: 16.5} | {rad_s: 1.0e11}
        detuning: 0.0             # g0 units, added on top
    initial: {state: zes}         # {state: coherent, alpha: 2} | {state: dressed, n: 2, s: 1}
    solvers: [effective+sme]
    t_max_ns: 500
    samples: 1001
    n_max: null                   # default rule, grown until truncation-clean

Frequency forms only matter for lab-frame solvers. Effective solvers tune
every regime tone to the exact dressed gap of its pair, offset by
``detuning``.
"""

from __future__ import annotations

import copy
import functools
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .dissipators import (SpectralDensityPolicy, dpme_rates, dpme_superoperator,
                          dpme_superoperator_dressed, sme_superoperator)
from .dressed import build_dressed_basis, transition_tables
from .effective import (RegimeSpec, coupled_pairs, effective_coupling, effective_hamiltonian,
                        resonance_frequency, transition_gap)
from .evolve import EvolutionProblem, Trajectory, hamiltonian_generator, integrate
from .hilbert import TruncationError, bare_operators, build_space, coherent_state, ket_to_dm
from .model import (ModulationSchedule, ModulationTone, ParameterError, SystemParams,
                    derived_frequencies, hamiltonian_harmonics)
from .observables import observe, photon_distribution

SCHEMA_VERSION = 1
SOLVERS = ("unitary", "sme", "dpme", "effective", "effective+sme", "effective+dpme")
TOP_FOCK_LIMIT = 1e-6
MIN_EIG_LIMIT = -1e-8
N_MAX_CAP = 40
PRESETS = ("fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b")


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario."""


def _get(d: dict, key: str, where: str, default=None, required=False):
    if key not in d or d[key] is None:
        if required:
            raise ScenarioError(f"{where}.{key}: missing")
        return default
    return d[key]


def _float(value, where: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: expected a number, got {value!r}") from None


@dataclass
class ToneSpec:
    target: str
    depth: float
    depth_unit: str = "g0"
    phase: float = 0.0
    tone: int = 1
    frequency: object = "resonance"
    detuning: float = 0.0

    def to_dict(self) -> dict:
        return {"target": self.target, "depth": self.depth, "depth_unit": self.depth_unit,
                "phase": self.phase, "tone": self.tone,
                "frequency": copy.deepcopy(self.frequency), "detuning": self.detuning}


@dataclass
class Scenario:
    name: str
    omega0_ghz: float
    g0_over_omega0: float
    delta_minus_over_g0: float
    kappa_over_g0: float = 0.0
    gamma_over_g0: float = 0.0
    gamma_phi_over_g0: float = 0.0
    regime: RegimeSpec = field(default_factory=lambda: RegimeSpec("resonant"))
    tones: list = field(default_factory=list)
    initial: dict = field(default_factory=lambda: {"state": "zes"})
    solvers: tuple = ("effective+sme",)
    t_max_ns: float = 500.0
    samples: int = 1001
    n_max: Optional[int] = None
    method: str = "auto"
    rtol: float = 1e-8
    atol: float = 1e-10
    description: str = ""

    # ---- units -------------------------------------------------------
    @property
    def g0_rad_s(self) -> float:
        return self.g0_over_omega0 * 2 * math.pi * self.omega0_ghz * 1e9

    def ns_to_internal(self, t_ns):
        return np.asarray(t_ns, dtype=float) * 1e-9 * self.g0_rad_s

    def internal_to_ns(self, t):
        return np.asarray(t, dtype=float) / (1e-9 * self.g0_rad_s)

    def g0_to_ghz(self, f: float) -> float:
        """Angular frequency in g0 units -> ordinary frequency in GHz."""
        return f * self.g0_rad_s / (2 * math.pi * 1e9)

    @property
    def params(self) -> SystemParams:
        w0 = 1.0 / self.g0_over_omega0
        return SystemParams(
            omega0=w0, Omega0=w0 - self.delta_minus_over_g0, g0=1.0,
            kappa=self.kappa_over_g0, gamma=self.gamma_over_g0,
            gamma_phi=self.gamma_phi_over_g0)

    def tone_depth(self, spec: ToneSpec) -> complex:
        p = self.params
        unit = {"g0": 1.0, "omega0": p.omega0, "Omega0": p.Omega0}.get(spec.depth_unit)
        if unit is None:
            raise ScenarioError(f"tones: unknown depth_unit {spec.depth_unit!r}")
        return spec.depth * unit * complex(math.cos(spec.phase), math.sin(spec.phase))

    def tone_frequency(self, spec: ToneSpec, basis=None) -> float:
        """Lab-frame modulation frequency in g0 units."""
        p = self.params
        f = spec.frequency
        if f == "resonance":
            eta = resonance_frequency(p, self.regime, spec.tone)
        elif isinstance(f, dict) and "transition" in f:
            try:
                (nu, su), (nl, sl) = f["transition"]
            except (TypeError, ValueError):
                raise ScenarioError("tones.frequency.transition: expected [[n, s], [n, s]]") \
                    from None
            if basis is None:
                basis = build_dressed_basis(build_space(max(nu, nl, 2)), p)
            eta = transition_gap(basis, (nl, sl), (nu, su))
            eta += 2 * derived_frequencies(p).bs_shift * _float(
                f.get("bs_correction", 0.0), "tones.frequency.bs_correction")
        elif isinstance(f, dict) and "g0" in f:
            eta = _float(f["g0"], "tones.frequency.g0")
        elif isinstance(f, dict) and "ghz" in f:
            eta = 2 * math.pi * _float(f["ghz"], "tones.frequency.ghz") * 1e9 / self.g0_rad_s
        elif isinstance(f, dict) and "rad_s" in f:
            eta = _float(f["rad_s"], "tones.frequency.rad_s") / self.g0_rad_s
        else:
            raise ScenarioError(f"tones.frequency: unrecognized form {f!r}")
        return eta + spec.detuning

    def schedule(self, basis=None) -> ModulationSchedule:
        return ModulationSchedule(tuple(
            ModulationTone(t.target, self.tone_depth(t), self.tone_frequency(t, basis))
            for t in self.tones))

    def regime_tones(self, index: int) -> list:
        return [ModulationTone(t.target, self.tone_depth(t), self.tone_frequency(t))
                for t in self.tones if t.tone == index]

    def coupling(self):
        return effective_coupling(self.params, self.regime, self.regime_tones(1),
                                  self.regime_tones(2) if self.regime.two_tone else ())

    def detunings(self) -> tuple:
        out = []
        for idx in ((1, 2) if self.regime.two_tone else (1,)):
            ds = {t.detuning for t in self.tones if t.tone == idx}
            if len(ds) > 1:
                raise ScenarioError(f"tones: tone {idx} carries conflicting detunings {ds}")
            out.append(ds.pop() if ds else 0.0)
        return tuple(out)

    # ---- truncation --------------------------------------------------
    def default_n_max(self) -> int:
        kind = self.regime.kind
        if kind in ("antidce", "antidce2"):
            n = self.regime.k + 2
        elif kind == "dce":
            n = 20
        else:
            n = 4 if kind != "ajc" else max(4, self.regime.k + 2)
        if self.initial.get("state") == "dressed":
            n = max(n, int(self.initial["n"]) + 2)
        if self.initial.get("state") == "coherent":
            a2 = abs(complex(self.initial["alpha"])) ** 2
            n = max(n, math.ceil(4 * a2))
            while n < N_MAX_CAP and photon_distribution(
                    ket_to_dm(coherent_state(build_space(n), complex(self.initial["alpha"]))))[-1] \
                    >= TOP_FOCK_LIMIT:
                n += 1
        return n

    def initial_state(self, n_max: int, basis=None) -> np.ndarray:
        space = build_space(n_max)
        st = self.initial.get("state", "zes")
        if st == "zes":
            return space.basis_vector(0, False)
        if st == "coherent":
            return coherent_state(space, complex(self.initial["alpha"]))
        if st == "dressed":
            basis = basis or build_dressed_basis(space, self.params)
            return np.array(basis.vector(int(self.initial["n"]), int(self.initial["s"])))
        raise ScenarioError(f"initial.state: unknown {st!r}")

    def validate(self):
        p = self.params  # raises ParameterError on bad values
        self.regime.validate(p)
        p.check_weak_coupling(self.regime.n_active)
        for s in self.solvers:
            if s not in SOLVERS:
                raise ScenarioError(f"solvers: unknown solver {s!r}; choose from {SOLVERS}")
        if self.samples < 2:
            raise ScenarioError("samples: need at least 2")
        if self.t_max_ns <= 0:
            raise ScenarioError("t_max_ns: must be positive")
        indices = {t.tone for t in self.tones}
        allowed = {1, 2} if self.regime.two_tone else {1}
        if not indices <= allowed:
            raise ScenarioError(f"tones: tone indices {sorted(indices)} not in {sorted(allowed)}")
        sched = self.schedule()
        sched.validate(p, self.n_max or self.default_n_max())
        return self

    # ---- serialization -----------------------------------------------
    def to_dict(self) -> dict:
        reg = {"kind": self.regime.kind}
        if self.regime.kind in ("resonant", "resonant2"):
            reg["R"] = self.regime.R
        if self.regime.kind == "resonant2":
            reg["R2"] = self.regime.R2
        if self.regime.kind in ("ajc", "antidce", "antidce2"):
            reg["k"] = self.regime.k
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "system": {
                "omega0_ghz": self.omega0_ghz,
                "g0_over_omega0": self.g0_over_omega0,
                "delta_minus_over_g0": self.delta_minus_over_g0,
                "kappa_over_g0": self.kappa_over_g0,
                "gamma_over_g0": self.gamma_over_g0,
                "gamma_phi_over_g0": self.gamma_phi_over_g0,
            },
            "regime": reg,
            "tones": [t.to_dict() for t in self.tones],
            "initial": dict(self.initial),
            "solvers": list(self.solvers),
            "t_max_ns": self.t_max_ns,
            "samples": self.samples,
            "n_max": self.n_max,
            "method": self.method,
            "rtol": self.rtol,
            "atol": self.atol,
        }

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioError("scenario root must be a mapping")
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    sysd = _get(d, "system", "scenario", required=True)
    regd = _get(d, "regime", "scenario", required=True)
    try:
        regime = RegimeSpec(str(_get(regd, "kind", "regime", required=True)),
                            R=int(regd.get("R", 1)), R2=int(regd.get("R2", 1)),
                            k=int(regd.get("k", 1)))
    except ParameterError as exc:
        raise ScenarioError(f"regime: {exc}") from None
    tones = []
    for i, td in enumerate(_get(d, "tones", "scenario", default=[])):
        where = f"tones[{i}]"
        tones.append(ToneSpec(
            target=str(_get(td, "target", where, required=True)),
            depth=_float(_get(td, "depth", where, required=True), where + ".depth"),
            depth_unit=str(td.get("depth_unit", "g0")),
            phase=_float(td.get("phase", 0.0), where + ".phase"),
            tone=int(td.get("tone", 1)),
            frequency=td.get("frequency", "resonance"),
            detuning=_float(td.get("detuning", 0.0), where + ".detuning"),
        ))
    solvers = d.get("solvers", d.get("solver", "effective+sme"))
    if isinstance(solvers, str):
        solvers = [s.strip() for s in solvers.split(",")]
    n_max = d.get("n_max")
    sc = Scenario(
        name=str(d.get("name", "scenario")),
        description=str(d.get("description") or ""),
        omega0_ghz=_float(_get(sysd, "omega0_ghz", "system", required=True), "system.omega0_ghz"),
        g0_over_omega0=_float(_get(sysd, "g0_over_omega0", "system", required=True),
                              "system.g0_over_omega0"),
        delta_minus_over_g0=_float(sysd.get("delta_minus_over_g0", 0.0),
                                   "system.delta_minus_over_g0"),
        kappa_over_g0=_float(sysd.get("kappa_over_g0", 0.0), "system.kappa_over_g0"),
        gamma_over_g0=_float(sysd.get("gamma_over_g0", 0.0), "system.gamma_over_g0"),
        gamma_phi_over_g0=_float(sysd.get("gamma_phi_over_g0", 0.0), "system.gamma_phi_over_g0"),
        regime=regime,
        tones=tones,
        initial=dict(d.get("initial", {"state": "zes"})),
        solvers=tuple(solvers),
        t_max_ns=_float(d.get("t_max_ns", 500.0), "t_max_ns"),
        samples=int(d.get("samples", 1001)),
        n_max=None if n_max is None else int(n_max),
        method=str(d.get("method", "auto")),
        rtol=_float(d.get("rtol", 1e-8), "rtol"),
        atol=_float(d.get("atol", 1e-10), "atol"),
    )
    try:
        return sc.validate()
    except ParameterError as exc:
        raise ScenarioError(f"invariant violated: {exc}") from None


def loads_scenario(text: str) -> Scenario:
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"parse error{where}: {getattr(exc, 'problem', exc)}") from None
    return scenario_from_dict(d)


def load_scenario(path) -> Scenario:
    p = Path(path)
    if not p.exists():
        if str(path) in PRESETS:
            return load_preset(str(path))
        raise ScenarioError(f"scenario file {path} not found")
    return loads_scenario(p.read_text())


def load_preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("nscqed").joinpath("presets", f"{name}.yaml").read_text()
    return loads_scenario(text)


# ---- running -----------------------------------------------------------

@dataclass
class RunResult:
    scenario: Scenario
    solver: str
    n_max: int
    trajectory: Trajectory
    basis: object
    frequencies: dict
    coupling: object

    @property
    def times_ns(self) -> np.ndarray:
        return self.scenario.internal_to_ns(self.trajectory.times)

    @property
    def top_fock_max(self) -> float:
        return max(r.top_fock_pop for r in self.trajectory.records)

    @property
    def diagnostics_ok(self) -> bool:
        tr = self.trajectory
        return (not tr.failed and self.top_fock_max < TOP_FOCK_LIMIT
                and tr.min_eig >= MIN_EIG_LIMIT)

    def problems(self) -> list:
        out = list(self.trajectory.messages)
        if self.top_fock_max >= TOP_FOCK_LIMIT:
            out.append(f"top Fock population {self.top_fock_max:.3g} >= {TOP_FOCK_LIMIT}")
        if self.trajectory.min_eig < MIN_EIG_LIMIT:
            out.append(f"minimum eigenvalue {self.trajectory.min_eig:.3g} < {MIN_EIG_LIMIT}")
        return out


def _dissipator(kind: str, params: SystemParams, ops, basis, dressed_frame: bool):
    if kind == "none":
        return None
    if kind == "sme":
        return sme_superoperator(ops, params.kappa, params.gamma, params.gamma_phi,
                                 basis=basis.transform if dressed_frame else None)
    rates = dpme_rates(basis, transition_tables(basis, ops),
                       SpectralDensityPolicy.flat(params.kappa, params.gamma, params.gamma_phi))
    return dpme_superoperator_dressed(rates) if dressed_frame else dpme_superoperator(basis, rates)


def build_problem(sc: Scenario, solver: str, n_max: int, t_max_ns: Optional[float] = None,
                  samples: Optional[int] = None):
    """(EvolutionProblem, basis, frequencies) for one solver at one truncation."""
    if solver not in SOLVERS:
        raise ScenarioError(f"unknown solver {solver!r}")
    p = sc.params
    space = build_space(n_max)
    ops = bare_operators(space)
    basis = build_dressed_basis(space, p)
    t_max = sc.ns_to_internal(sc.t_max_ns if t_max_ns is None else t_max_ns)
    ts = np.linspace(0.0, float(t_max), sc.samples if samples is None else samples)
    psi0 = sc.initial_state(n_max, basis)
    effective = solver.startswith("effective")
    diss = solver.split("+")[1] if "+" in solver else ("none" if solver in (
        "unitary", "effective") else solver)
    pure = diss == "none"
    if effective:
        coupling = sc.coupling()
        eff = effective_hamiltonian(basis, sc.regime, coupling, detuning=sc.detunings())
        freqs = {f"tone{i + 1}": eta for i, eta in enumerate(
            dict.fromkeys(c[3] for c in eff.couplings))}
        gen = hamiltonian_generator(eff.rotating_harmonics(), "pure" if pure else "density",
                                    _dissipator(diss, p, ops, basis, True))
        y0 = basis.to_dressed(np.outer(psi0, psi0.conj())) if not pure else \
            basis.transform.conj().T @ psi0
        prob = EvolutionProblem(gen, y0, ts, basis=basis.transform, frame="rotating",
                                frame_rate=eff.omega_r, charges=eff.charges)
        return prob, basis, freqs, coupling
    sched = sc.schedule(basis)
    freqs = {f"{t.target}{i + 1}": t.frequency for i, t in enumerate(sched.tones)}
    gen = hamiltonian_generator(hamiltonian_harmonics(p, sched, ops),
                                "pure" if pure else "density",
                                _dissipator(diss, p, ops, basis, False))
    prob = EvolutionProblem(gen, psi0 if pure else ket_to_dm(psi0), ts)
    return prob, basis, freqs, None


def run_scenario(sc: Scenario, solver: Optional[str] = None, n_max: Optional[int] = None,
                 grow: bool = True, method: Optional[str] = None, **overrides) -> RunResult:
    """Run one solver; without an explicit ``n_max`` the truncation grows until clean."""
    solver = solver or sc.solvers[0]
    n = n_max or sc.n_max or sc.default_n_max()
    grow = grow and n_max is None and sc.n_max is None
    while True:
        prob, basis, freqs, coupling = build_problem(sc, solver, n, **overrides)
        traj = integrate(prob, rtol=sc.rtol, atol=sc.atol, method=method or sc.method,
                         observe=functools.partial(observe, basis=basis),
                         stroboscopic=solver.startswith("effective"))
        res = RunResult(sc, solver, n, traj, basis, freqs, coupling)
        if not grow or res.top_fock_max < TOP_FOCK_LIMIT or n >= N_MAX_CAP:
            return res
        n = min(N_MAX_CAP, n + 2)


PROBE_OBSERVABLES = ("transfer", "photons")


def lab_transfer_probe(sc: Scenario, horizon_ns: float, n_max: Optional[int] = None,
                       samples: int = 400, observable: Optional[str] = None):
    """probe(eta) for the resonance search, from dissipationless lab-frame runs.

    Tone 1 of the scenario is moved to ``eta`` (g0 units). ``observable``:

    ``transfer``  peak change of the population of the regime's first pair
                  member that starts less populated (default for pair regimes);
    ``photons``   peak change of the mean photon number (default for the DCE
                  ladder, where no single pair carries the dynamics).
    """
    observable = observable or ("photons" if sc.regime.kind == "dce" else "transfer")
    if observable not in PROBE_OBSERVABLES:
        raise ScenarioError(f"probe observable must be one of {PROBE_OBSERVABLES}")
    n = n_max or sc.n_max or sc.default_n_max()
    p = sc.params
    space = build_space(n)
    ops = bare_operators(space)
    basis = build_dressed_basis(space, p)
    lo, up, _, _ = coupled_pairs(sc.regime, p, n)[0]
    psi0 = sc.initial_state(n, basis)
    ts = np.linspace(0.0, float(sc.ns_to_internal(horizon_ns)), samples)
    pops0 = np.abs(basis.transform.conj().T @ psi0) ** 2
    target = basis.level(*up) if pops0[basis.level(*up)] <= pops0[basis.level(*lo)] \
        else basis.level(*lo)
    base = sc.schedule(basis)
    obs = functools.partial(observe, basis=basis)

    def probe(eta: float) -> float:
        tones = []
        for spec, tone in zip(sc.tones, base.tones):
            f = eta if spec.tone == 1 else tone.frequency
            tones.append(ModulationTone(tone.target, tone.depth, f))
        gen = hamiltonian_generator(hamiltonian_harmonics(p, ModulationSchedule(tuple(tones)),
                                                          ops), "pure")
        traj = integrate(EvolutionProblem(gen, psi0, ts), observe=obs, stroboscopic=True)
        if observable == "photons":
            series = traj.series("mean_n")
        else:
            series = np.array([r.dressed_pops[basis.labels[target]] for r in traj.records])
        return float(np.max(np.abs(series - series[0])))

    return probe


def write_csv(result: RunResult, path, extra_header: Optional[dict] = None):
    """Atomic CSV write (temporary file then rename)."""
    import csv
    import io
    import os
    import tempfile

    sc = result.scenario
    labels = [lab for lab in result.basis.labels]

    def col(lab):
        if lab[1] == 0:
            return "pop_top"
        return f"pop_{lab[0]}{'p' if lab[1] > 0 else 'm'}"

    header = {
        "scenario": sc.name, "solver": result.solver, "regime": sc.regime.kind,
        "n_max": result.n_max, "method": result.trajectory.method,
        "omega0_ghz": sc.omega0_ghz, "g0_ghz": sc.g0_to_ghz(1.0),
        "time_unit_ns": float(sc.internal_to_ns(1.0)),
        "max_trace_err": result.trajectory.max_trace_err,
        "min_eig": result.trajectory.min_eig, "top_fock_max": result.top_fock_max,
        "diagnostics_ok": result.diagnostics_ok,
    }
    for name, f in result.frequencies.items():
        header[f"eta_{name}"] = f"{f:.12g} g0 = {sc.g0_to_ghz(f):.12g} GHz"
    if result.coupling is not None:
        header["theta_g0"] = f"{result.coupling.theta:.6g}"
        if result.coupling.theta2 is not None:
            header["theta2_g0"] = f"{result.coupling.theta2:.6g}"
    header.update(extra_header or {})
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_ns", "mean_n", "mandel_q", "p_e", "trace_err", "min_eig"]
               + [col(lab) for lab in labels] + ["purity", "top_fock_pop"])
    for t, r in zip(result.times_ns, result.trajectory.records):
        q = "" if r.mandel_q is None else f"{r.mandel_q:.10g}"
        w.writerow([f"{t:.10g}", f"{r.mean_n:.10g}", q, f"{r.p_e:.10g}",
                    f"{r.trace_err:.3e}", f"{r.min_eig:.3e}"]
                   + [f"{r.dressed_pops[lab]:.10g}" for lab in labels]
                   + [f"{r.purity:.12g}", f"{r.top_fock_pop:.3e}"])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path):
    """(header dict, column dict of arrays; empty cells become NaN)."""
    import csv
    header, rows = {}, []
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            header[k.strip()] = v.strip()
        else:
            body.append(line)
    reader = csv.reader(body)
    names = next(reader)
    for row in reader:
        rows.append([float(c) if c != "" else np.nan for c in row])
    arr = np.array(rows, dtype=float).reshape(-1, len(names))
    return header, {n: arr[:, i] for i, n in enumerate(names)}
