"""System parameters, modulation schedules and the time-dependent Rabi Hamiltonian.

Units are whatever the caller uses consistently; scenarios built by
:mod:`nscqed.scenario` work in units of g0 (time in 1/g0).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .hilbert import OperatorSet

TARGETS = ("omega", "Omega", "g", "chi")


class ParameterError(ValueError):
    """Invalid system or modulation parameters."""


@dataclass(frozen=True)
class SystemParams:
    omega0: float
    Omega0: float
    g0: float
    chi0: float = 0.0
    kappa: float = 0.0
    gamma: float = 0.0
    gamma_phi: float = 0.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ParameterError("omega0 must be positive")
        if self.g0 < 0:
            raise ParameterError("g0 must be non-negative")
        if self.chi0 != 0:
            # dressed basis is only defined for chi0 = 0
            raise ParameterError("chi0 must be 0; squeezing enters through modulation tones only")
        if abs(self.delta_minus) > 0.5 * self.omega0:
            raise ParameterError(
                f"|omega0 - Omega0| = {abs(self.delta_minus):g} exceeds 0.5 omega0")
        for name in ("kappa", "gamma", "gamma_phi"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")

    @property
    def delta_minus(self) -> float:
        return self.omega0 - self.Omega0

    @property
    def delta_plus(self) -> float:
        return self.omega0 + self.Omega0

    def with_rates(self, kappa=None, gamma=None, gamma_phi=None) -> "SystemParams":
        return replace(
            self,
            kappa=self.kappa if kappa is None else kappa,
            gamma=self.gamma if gamma is None else gamma,
            gamma_phi=self.gamma_phi if gamma_phi is None else gamma_phi,
        )

    def check_weak_coupling(self, n_excitations: int):
        """g0 sqrt(n) << omega0: error above 0.2 omega0, warning above 0.1 omega0."""
        ratio = self.g0 * math.sqrt(n_excitations) / self.omega0
        if ratio > 0.2:
            raise ParameterError(
                f"g0*sqrt({n_excitations}) = {ratio:.3g} omega0 breaks weak coupling (> 0.2)")
        if ratio > 0.1:
            warnings.warn(f"g0*sqrt({n_excitations}) = {ratio:.3g} omega0 is above 0.1",
                          stacklevel=2)


@dataclass(frozen=True)
class ModulationTone:
    """One harmonic: X(t) += Im(depth * exp(i frequency t)) = |depth| sin(frequency t + phase)."""

    target: str
    depth: complex
    frequency: float

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ParameterError(f"unknown modulation target {self.target!r}; use one of {TARGETS}")
        object.__setattr__(self, "depth", complex(self.depth))
        object.__setattr__(self, "frequency", float(self.frequency))

    def value(self, t):
        return np.imag(self.depth * np.exp(1j * self.frequency * t))


@dataclass(frozen=True)
class ModulationSchedule:
    tones: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple(self.tones))

    def for_target(self, target: str) -> tuple:
        return tuple(tone for tone in self.tones if tone.target == target)

    def scaled(self, factor: complex) -> "ModulationSchedule":
        return ModulationSchedule(tuple(
            ModulationTone(t.target, t.depth * factor, t.frequency) for t in self.tones))

    def validate(self, params: SystemParams, n_max: int):
        """Fast-modulation and small-depth conditions, enforced at 0.1 omega0."""
        for tone in self.tones:
            if not tone.frequency > params.omega0:
                raise ParameterError(
                    f"tone on {tone.target} has frequency {tone.frequency:g} <= omega0")
            size = abs(tone.depth)
            if tone.target == "g":
                size *= math.sqrt(n_max)
            elif tone.target == "chi":
                size *= n_max
            if size > 0.1 * params.omega0:
                raise ParameterError(
                    f"modulation depth on {tone.target} too large ({size:g} > 0.1 omega0)")


@dataclass(frozen=True)
class DerivedFrequencies:
    delta_minus: float
    delta_plus: float
    disp_shift: Optional[float]
    bs_shift: float
    detuning_symbol: Optional[int]

    @property
    def dispersive_available(self) -> bool:
        return self.disp_shift is not None


def derived_frequencies(params: SystemParams) -> DerivedFrequencies:
    dm, dp = params.delta_minus, params.delta_plus
    g2 = params.g0 ** 2
    if dm == 0:
        return DerivedFrequencies(dm, dp, None, g2 / dp, None)
    return DerivedFrequencies(dm, dp, g2 / dm, g2 / dp, 1 if dm > 0 else -1)


def _bare_value(params: SystemParams, target: str) -> float:
    return {"omega": params.omega0, "Omega": params.Omega0,
            "g": params.g0, "chi": params.chi0}[target]


def parameter_value(params: SystemParams, schedule: ModulationSchedule, target: str, t):
    value = _bare_value(params, target)
    for tone in schedule.for_target(target):
        value = value + tone.value(t)
    return value


def target_operator(ops: OperatorSet, target: str) -> np.ndarray:
    """Operator multiplying parameter `target` in the Hamiltonian."""
    if target == "omega":
        return np.asarray(ops.n)
    if target == "Omega":
        return np.asarray(ops.excited_projector)
    if target == "g":
        return ops.x @ ops.sigma_x
    if target == "chi":
        return 1j * (ops.a_dag @ ops.a_dag - ops.a @ ops.a)
    raise ParameterError(f"unknown target {target!r}")


def static_hamiltonian(params: SystemParams, ops: OperatorSet) -> np.ndarray:
    return (params.omega0 * ops.n + params.Omega0 * ops.excited_projector
            + params.g0 * ops.x @ ops.sigma_x)


def jc_hamiltonian(params: SystemParams, ops: OperatorSet) -> np.ndarray:
    """RWA (Jaynes-Cummings) part of the static Hamiltonian."""
    return (params.omega0 * ops.n + params.Omega0 * ops.excited_projector
            + params.g0 * (ops.a @ ops.sigma_plus + ops.a_dag @ ops.sigma_minus))


def hamiltonian_at(params: SystemParams, schedule: ModulationSchedule,
                   ops: OperatorSet, t: float) -> np.ndarray:
    h = static_hamiltonian(params, ops).astype(complex)
    for tone in schedule.tones:
        h = h + tone.value(t) * target_operator(ops, tone.target)
    return h


def hamiltonian_harmonics(params: SystemParams, schedule: ModulationSchedule,
                          ops: OperatorSet) -> dict:
    """Fourier decomposition H(t) = sum_nu exp(i nu t) H_nu of the lab Hamiltonian.

    Im(eps e^{i eta t}) = (eps e^{i eta t} - eps* e^{-i eta t}) / 2i.
    """
    harmonics = {0.0: static_hamiltonian(params, ops).astype(complex)}
    for tone in schedule.tones:
        op = target_operator(ops, tone.target)
        for nu, coeff in ((tone.frequency, tone.depth / 2j),
                          (-tone.frequency, -np.conj(tone.depth) / 2j)):
            harmonics[nu] = harmonics.get(nu, 0) + coeff * op
    return harmonics


def schedule_from_depths(depths: dict, frequency: float) -> ModulationSchedule:
    """Convenience: {target: complex depth} all at one frequency."""
    return ModulationSchedule(tuple(
        ModulationTone(target, depth, frequency) for target, depth in depths.items()))


def tones_at(schedule: ModulationSchedule, frequency: float, tol: float) -> Sequence[ModulationTone]:
    return tuple(t for t in schedule.tones if abs(t.frequency - frequency) <= tol)
