"""Regime catalogue and the analytic effective models.

Conventions. A coupled dressed pair is written ``(lower, upper)`` and the
effective coupling enters as ``Xi exp(i eta t) |lower><upper| + h.c.`` in the
lab picture, so that in the dressed interaction picture the term becomes
``Xi exp(i (eta - lambda_upper + lambda_lower) t) |lower><upper|``.

Effective runs are integrated in the frame rotating with
``exp(-i omega_r N t)``, ``N = n + |e><e|`` the excitation number. Because
every coupled pair differs by two excitations and the Jaynes-Cummings
energies are diagonal, choosing ``omega_r = eta / 2`` turns a single-tone
generator static; with two tones it is periodic.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .dressed import DressedBasis
from .hilbert import TruncationError
from .model import ParameterError, SystemParams, derived_frequencies

KINDS = ("resonant", "resonant2", "ajc", "antidce", "antidce2", "dce")
CHANNELS = ("dephasing", "atomic-damping", "cavity-damping", "damping")


class RegimeError(ParameterError):
    """Regime requested outside its domain of validity."""


class SteadyStateUnavailable(LookupError):
    """No closed-form asymptotic state exists for the (regime, channel) pair."""


class AmbiguousResonance(RuntimeError):
    """Resonance search found no interior maximum."""


def _sign(value: int, name: str) -> int:
    if value not in (1, -1):
        raise RegimeError(f"{name} must be +1 or -1, got {value!r}")
    return value


@dataclass(frozen=True)
class RegimeSpec:
    kind: str
    R: int = 1
    R2: int = 1
    k: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RegimeError(f"unknown regime {self.kind!r}; choose from {KINDS}")
        _sign(self.R, "R")
        _sign(self.R2, "R2")
        if self.kind == "ajc" and self.k < 1:
            raise RegimeError("AJC needs k >= 1")
        if self.kind == "antidce" and self.k < 3:
            raise RegimeError("Anti-DCE needs k >= 3")
        if self.kind == "antidce2" and self.k < 4:
            raise RegimeError("two-tone Anti-DCE needs k >= 4")

    @property
    def two_tone(self) -> bool:
        return self.kind in ("resonant2", "antidce2")

    @property
    def dispersive(self) -> bool:
        return self.kind in ("ajc", "antidce", "antidce2", "dce")

    @property
    def n_active(self) -> int:
        """Largest excitation number the resonant couplings involve."""
        return {"resonant": 2, "resonant2": 4, "ajc": self.k + 1, "antidce": self.k,
                "antidce2": self.k, "dce": 2}[self.kind]

    def validate(self, params: SystemParams, n_active: Optional[int] = None):
        n = self.n_active if n_active is None else n_active
        dm = params.delta_minus
        if not self.dispersive:
            if abs(dm) > 1e-12 * params.omega0:
                raise RegimeError(f"{self.kind} regime needs Delta_- = 0, got {dm:g}")
            return
        if dm == 0:
            raise RegimeError(f"{self.kind} regime needs Delta_- != 0")
        ratio = abs(dm) / (params.g0 * math.sqrt(n)) if params.g0 else math.inf
        if ratio < 2:
            raise RegimeError(
                f"|Delta_-|/2 = {abs(dm) / 2:g} is below g0 sqrt({n}); not dispersive")
        if ratio < 5:
            warnings.warn(f"|Delta_-| = {ratio:.3g} g0 sqrt({n}) is below 5 g0 sqrt(n); "
                          "dispersive corrections may be visible", stacklevel=2)

    def detuning_symbol(self, params: SystemParams) -> int:
        d = derived_frequencies(params).detuning_symbol
        if d is None:
            raise RegimeError("detuning symbol undefined at Delta_- = 0")
        return d


def _tone_indices(regime: RegimeSpec):
    return (1, 2) if regime.two_tone else (1,)


def _check_tone(regime: RegimeSpec, tone: int):
    if tone not in _tone_indices(regime):
        raise RegimeError(f"{regime.kind} has no tone {tone}")


def resonance_frequency(params: SystemParams, regime: RegimeSpec, tone: int = 1) -> float:
    """Closed-form modulation frequency of the regime's tone (1 or 2)."""
    _check_tone(regime, tone)
    regime.validate(params)
    w0, W0, g = params.omega0, params.Omega0, params.g0
    f = derived_frequencies(params)
    if regime.kind in ("resonant", "resonant2"):
        if tone == 1:
            return 2 * w0 + regime.R * g * math.sqrt(2)
        return 2 * w0 + g * math.sqrt(2) * (math.sqrt(2) * regime.R2 - regime.R)
    shift = f.disp_shift - f.bs_shift
    if regime.kind == "ajc":
        return f.delta_plus - 2 * regime.k * shift
    if regime.kind in ("antidce", "antidce2"):
        if tone == 1:
            return 3 * w0 - W0 + 2 * shift * (regime.k - 1)
        return f.delta_plus - 2 * shift * (regime.k - 3)
    return 2 * (w0 + shift)


def _depth_sums(tones) -> dict:
    sums = {"omega": 0j, "Omega": 0j, "g": 0j, "chi": 0j}
    for t in tones:
        sums[t.target] += t.depth
    return sums


def collective_depth(params: SystemParams, regime: RegimeSpec, tones: Sequence,
                     tone: int = 1, frequency: Optional[float] = None,
                     freq_tol: float = 1e-9) -> complex:
    """Dimensionless collective depth Upsilon from the tones at one frequency."""
    _check_tone(regime, tone)
    tones = tuple(tones)
    if tones:
        ref = tones[0].frequency if frequency is None else frequency
        for t in tones:
            if abs(t.frequency - ref) > freq_tol * max(abs(ref), 1.0):
                raise RegimeError(
                    f"tone at {t.frequency:g} does not share the frequency {ref:g}")
    e = _depth_sums(tones)
    w0, W0, g = params.omega0, params.Omega0, params.g0
    dm, dp = params.delta_minus, params.delta_plus
    kind = regime.kind
    if kind in ("resonant", "resonant2"):
        base = e["omega"] / (2 * w0) + e["Omega"] / (2 * w0) - e["g"] / g
        if tone == 1:
            return base + regime.R * 1j * math.sqrt(2) * e["chi"] / g
        return base + 1j * regime.R2 * e["chi"] / g * (2 + regime.R * regime.R2 * math.sqrt(2))
    if kind == "ajc" or (kind == "antidce2" and tone == 2):
        return -e["omega"] / dp - e["Omega"] / dp + e["g"] / g + 2j * e["chi"] / dm
    if kind in ("antidce", "antidce2"):
        # squeezing does not drive this transition
        return (e["omega"] / (2 * w0 + dm)
                + (w0 + dm) / (2 * w0 + dm) * e["Omega"] / W0 - e["g"] / g)
    d_minus = derived_frequencies(params).disp_shift
    return (e["omega"] / w0 + e["Omega"] / W0 - 2 * e["g"] / g
            + 1j * (dp / W0) * (e["chi"] / d_minus))


def coupling_rate(params: SystemParams, regime: RegimeSpec, upsilon: complex,
                  tone: int = 1, m: int = 0) -> complex:
    """Effective transition rate theta (tone 2 gives theta_2, DCE uses ladder index m)."""
    _check_tone(regime, tone)
    g = params.g0
    kind = regime.kind
    if kind in ("resonant", "resonant2"):
        if tone == 1:
            return 1j * g * regime.R * math.sqrt(2) / 4 * upsilon
        return 1j * g * regime.R2 * math.sqrt(3) / 4 * upsilon
    D = regime.detuning_symbol(params)
    if kind == "ajc":
        return 0.5j * g * D * math.sqrt(regime.k) * upsilon
    if kind in ("antidce", "antidce2"):
        k = regime.k
        if tone == 1:
            f = derived_frequencies(params)
            pref = f.disp_shift * params.Omega0 * g / (2 * params.omega0 * params.delta_minus)
            return 1j * D * pref * math.sqrt(k * (k - 1) * (k - 2)) * upsilon
        return 0.5j * g * D * math.sqrt(k - 3) * upsilon
    if m < 0:
        raise RegimeError("ladder index m must be >= 0")
    f = derived_frequencies(params)
    return (1j * f.disp_shift * params.Omega0 / (2 * params.delta_plus)
            * math.sqrt((m + 1) * (m + 2)) * upsilon)


@dataclass(frozen=True)
class EffectiveCoupling:
    regime: RegimeSpec
    eta: tuple          # closed-form frequency of every tone
    upsilon: tuple      # collective depth of every tone
    theta: complex
    theta2: Optional[complex] = None

    def theta_m(self, params: SystemParams, m: int) -> complex:
        """DCE ladder rate for the pair (m, m + 2)."""
        if self.regime.kind != "dce":
            raise RegimeError("theta_m exists only in the DCE regime")
        return coupling_rate(params, self.regime, self.upsilon[0], m=m)

    def scaled(self, factor: complex) -> "EffectiveCoupling":
        return EffectiveCoupling(
            self.regime, self.eta, tuple(u * factor for u in self.upsilon),
            self.theta * factor, None if self.theta2 is None else self.theta2 * factor)


def effective_coupling(params: SystemParams, regime: RegimeSpec, tones1: Sequence,
                       tones2: Sequence = ()) -> EffectiveCoupling:
    """Collect Upsilon and theta for each regime tone from its modulation tones."""
    regime.validate(params)
    etas = tuple(resonance_frequency(params, regime, t) for t in _tone_indices(regime))
    u1 = collective_depth(params, regime, tones1, 1)
    th1 = coupling_rate(params, regime, u1, 1)
    if not regime.two_tone:
        if tones2:
            raise RegimeError(f"{regime.kind} takes a single tone")
        return EffectiveCoupling(regime, etas, (u1,), th1)
    u2 = collective_depth(params, regime, tones2, 2)
    return EffectiveCoupling(regime, etas, (u1, u2), th1, coupling_rate(params, regime, u2, 2))


def coupled_pairs(regime: RegimeSpec, params: SystemParams, n_max: int) -> list:
    """[(lower_label, upper_label, tone, m)] of every resonantly coupled pair."""
    kind = regime.kind
    if kind in ("resonant", "resonant2"):
        pairs = [((0, -1), (2, regime.R), 1, 0)]
        if kind == "resonant2":
            pairs.append(((2, regime.R), (4, regime.R2), 2, 0))
    else:
        D = regime.detuning_symbol(params)

        def lab(n, s):
            return (0, -1) if n == 0 else (n, s)

        k = regime.k
        if kind == "ajc":
            pairs = [(lab(k - 1, D), (k + 1, -D), 1, 0)]
        elif kind in ("antidce", "antidce2"):
            pairs = [((k - 2, -D), (k, D), 1, 0)]
            if kind == "antidce2":
                pairs.append((lab(k - 4, D), (k - 2, -D), 2, 0))
        else:
            pairs = [(lab(m, D), (m + 2, D), 1, m) for m in range(0, n_max - 1)]
    for lo, up, _, _ in pairs:
        if up[0] > n_max:
            raise TruncationError(
                f"coupled state {up} lies outside the truncation n_max={n_max}")
    return pairs


def transition_gap(basis: DressedBasis, lower, upper) -> float:
    return float(basis.energies[basis.level(*upper)] - basis.energies[basis.level(*lower)])


@dataclass(frozen=True, eq=False)
class EffectiveGenerator:
    """Effective Hamiltonian on the dressed basis (level order of ``basis``)."""

    basis: DressedBasis
    couplings: tuple   # (lower_level, upper_level, Xi, eta)
    omega_r: float

    @property
    def charges(self) -> np.ndarray:
        return self.basis.excitations.astype(float)

    def _coupling_matrix(self, phases) -> np.ndarray:
        n = len(self.basis.labels)
        h = np.zeros((n, n), dtype=complex)
        for (lo, up, xi, _), ph in zip(self.couplings, phases):
            h[lo, up] += xi * ph
            h[up, lo] += np.conj(xi * ph)
        return h

    def interaction(self, t: float) -> np.ndarray:
        e = self.basis.energies
        return self._coupling_matrix(
            [np.exp(1j * (eta - e[up] + e[lo]) * t) for lo, up, _, eta in self.couplings])

    def lab(self, t: float) -> np.ndarray:
        """Jaynes-Cummings energies plus the effective coupling, no interaction picture."""
        h = self._coupling_matrix([np.exp(1j * eta * t) for *_, eta in self.couplings])
        return h + np.diag(self.basis.energies)

    def rotating_harmonics(self) -> dict:
        """H(t) = sum_nu exp(i nu t) H_nu in the frame rotating at omega_r N."""
        n = len(self.basis.labels)
        q = self.charges
        out = {0.0: np.diag(self.basis.energies - self.omega_r * q).astype(complex)}
        for lo, up, xi, eta in self.couplings:
            nu = eta - self.omega_r * (q[up] - q[lo])
            if abs(nu) < 1e-12 * max(1.0, abs(eta)):
                nu = 0.0
            m = np.zeros((n, n), dtype=complex)
            m[lo, up] = xi
            out[nu] = out.get(nu, 0) + m
            out[-nu] = out.get(-nu, 0) + m.conj().T
        return out


def effective_hamiltonian(basis: DressedBasis, regime: RegimeSpec, coupling: EffectiveCoupling,
                          detuning=0.0, eta=None) -> EffectiveGenerator:
    """Effective generator tuned to the exact dressed gaps plus ``detuning``.

    ``detuning`` (one value or one per tone) offsets each tone from its gap;
    ``eta`` overrides the tone frequencies altogether.
    """
    params = basis.params
    pairs = coupled_pairs(regime, params, basis.space.n_max)
    ntones = len(_tone_indices(regime))
    det = np.broadcast_to(np.asarray(detuning, dtype=float), (ntones,))
    if eta is None:
        first = {}
        for lo, up, tone, _ in pairs:
            first.setdefault(tone, (lo, up))
        etas = [transition_gap(basis, *first[t]) + det[t - 1] for t in range(1, ntones + 1)]
    else:
        etas = list(np.broadcast_to(np.asarray(eta, dtype=float), (ntones,)))
    couplings = []
    for lo, up, tone, m in pairs:
        if regime.kind == "dce":
            xi = coupling.theta_m(params, m)
        else:
            xi = coupling.theta if tone == 1 else coupling.theta2
        couplings.append((basis.level(*lo), basis.level(*up), complex(xi), float(etas[tone - 1])))
    omega_r = (min(etas) + max(etas)) / 4
    return EffectiveGenerator(basis, tuple(couplings), omega_r)


def rwa_gap_scan(basis: DressedBasis, eta: float, target, theta: complex):
    """Smallest |gap - eta| / |theta| over every other two-excitation transition.

    Returns (ratio, (lower, upper)) for the worst offender.
    """
    labels = [lab for lab in basis.labels if lab[1] != 0]
    best = (math.inf, None)
    for lo in labels:
        for up in labels:
            if up[0] != lo[0] + 2 or (lo, up) == tuple(target):
                continue
            r = abs(transition_gap(basis, lo, up) - eta) / abs(theta)
            if r < best[0]:
                best = (r, (lo, up))
    return best


def _norm_check(*amps):
    total = sum(abs(a) ** 2 for a in amps)
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"initial amplitudes are not normalized (sum |.|^2 = {total:.12g})")


def pair_unitary_solution(theta: complex, t, A0: complex, B0: complex, detuning: float = 0.0):
    """Amplitudes of i dA/dt = theta e^{iwt} B, i dB/dt = theta* e^{-iwt} A (w = detuning)."""
    _norm_check(A0, B0)
    t = np.asarray(t, dtype=float)
    w = detuning
    r = math.sqrt(w * w + 4 * abs(theta) ** 2)
    c = np.cos(r * t / 2)
    s = np.sin(r * t / 2) / r if r else t / 2
    a = c * A0 - 1j * s * (w * A0 + 2 * theta * B0)
    b = c * B0 - 1j * s * (2 * np.conj(theta) * A0 - w * B0)
    return np.exp(1j * w * t / 2) * a, np.exp(-1j * w * t / 2) * b


def _sin_over(x: complex) -> complex:
    return 1 - x * x / 6 if abs(x) < 1e-6 else cmath.sin(x) / x


def rwa_pair_solution(q: float, w: float, t: float, A0: complex, B0: complex):
    """Solution of dA/dt = -q e^{iwt} B, dB/dt = -q e^{-iwt} A.

    r = sqrt(w^2 - 4 q^2), w_pm = (w pm r) / 2; r may be imaginary.
    """
    r = cmath.sqrt(w * w - 4 * q * q)
    if abs(r) < 1e-9 * max(abs(w), abs(q), 1e-300):
        # degenerate roots: exp(Kt) = I + K t
        a = A0 + t * (-0.5j * w * A0 - q * B0)
        b = B0 + t * (0.5j * w * B0 - q * A0)
        return cmath.exp(0.5j * w * t) * a, cmath.exp(-0.5j * w * t) * b
    wp, wm = (w + r) / 2, (w - r) / 2
    A = ((wp * A0 - 1j * q * B0) * cmath.exp(1j * t * wm)
         - (wm * A0 - 1j * q * B0) * cmath.exp(1j * t * wp)) / r
    B = ((wp * B0 + 1j * q * A0) * cmath.exp(-1j * t * wm)
         - (wm * B0 + 1j * q * A0) * cmath.exp(-1j * t * wp)) / r
    return A, B


def ladder3_unitary_solution(theta: complex, theta2: complex, t, A0: float, C0: float):
    """Three-state chain H = theta |A><B| + theta2 |B><C| + h.c. from B0 = 0."""
    _norm_check(A0, C0)
    t = np.asarray(t, dtype=float)
    th, th2 = complex(theta), complex(theta2)
    R2 = abs(th) ** 2 + abs(th2) ** 2
    if R2 == 0:
        return A0 + 0 * t + 0j, 0 * t + 0j, C0 + 0 * t + 0j
    R = math.sqrt(R2)
    cos2 = np.cos(R * t / 2) ** 2
    drive = th.conjugate() * A0 + th2 * C0
    diff = abs(th) ** 2 - abs(th2) ** 2
    if th == 0:
        # the general form divides by theta*; the chain reduces to B <-> C
        A = A0 + 0 * t + 0j
    else:
        A = ((A0 + th2 / th.conjugate() * C0) * np.cos(R * t)
             + th2 / (R2 * th.conjugate())
             * (2 * th.conjugate() * th2.conjugate() * A0
                - 2 * th2.conjugate() * drive * cos2 - diff * C0))
    B = -1j * drive * np.sin(R * t) / R
    C = (2 * th2.conjugate() * drive * cos2 + diff * C0
         - 2 * th.conjugate() * th2.conjugate() * A0) / R2
    return A, B, C


def optimal_second_tone(theta: complex, A0: float, C0: float):
    """Both choices theta2 = x theta* that empty the middle state at t_min = pi / R."""
    if A0 == 0:
        raise ValueError("A0 = 0: the ratio x is undefined")
    if abs(complex(A0).imag) or abs(complex(C0).imag):
        raise ValueError("amplitudes must be real")
    out = []
    root = math.sqrt(C0 ** 2 + A0 ** 2)
    for x in ((C0 + root) / A0, (C0 - root) / A0):
        th2 = x * np.conj(theta)
        R = math.sqrt(abs(theta) ** 2 + abs(th2) ** 2)
        out.append((complex(th2), math.pi / R))
    return out


def steady_state_closed_form(regime: RegimeSpec, channel: str, theta: complex,
                             params: SystemParams, theta2: Optional[complex] = None,
                             initial: Optional[dict] = None) -> dict:
    """Asymptotic dressed populations for the (regime, channel) cases with a closed form.

    ``initial`` (dressed populations at t = 0) is needed only for the
    Anti-DCE dephasing plateau, which depends on where the population starts.
    """
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}; choose from {CHANNELS}")
    kind = regime.kind
    th2 = abs(theta) ** 2
    g4 = (params.gamma / 4) ** 2
    if kind == "resonant":
        R = regime.R
        if channel == "dephasing":
            pops = {(0, -1): 1, (2, 1): 1, (2, -1): 1}
        elif channel == "atomic-damping":
            den = 3 * th2 + g4
            r2 = th2 / den
            pops = {(0, -1): (th2 + g4) / den, (2, R): r2, (1, 1): r2 / 2, (1, -1): r2 / 2}
        elif channel == "cavity-damping":
            k4 = (3 * params.kappa / 4) ** 2
            den = 5 * th2 + k4
            r2 = th2 / den
            pops = {(0, -1): (th2 + k4) / den, (2, R): r2,
                    (1, R): 0.5 * (math.sqrt(2) + 1) ** 2 * r2,
                    (1, -R): 0.5 * (math.sqrt(2) - 1) ** 2 * r2}
        else:
            raise SteadyStateUnavailable("resonant regime: give one damping channel")
    elif kind == "resonant2":
        R, R2 = regime.R, regime.R2
        if channel == "dephasing":
            pops = {lab: 1 for lab in ((0, -1), (2, 1), (2, -1), (4, 1), (4, -1))}
        elif channel == "atomic-damping":
            if theta2 is not None and not math.isclose(abs(theta2), abs(theta), rel_tol=1e-9):
                raise SteadyStateUnavailable("closed form assumes |theta2| = |theta|")
            g2 = params.gamma ** 2 / 4
            den = 3 * th2 + g2
            r4 = 4 * th2 / den
            pops = {(2, R): 1.0,
                    (0, -1): (2 * th2 + g4) / th2 - 2 * (th2 - g4) / den,
                    (4, R2): r4,
                    (1, 1): 0.5 * (5 * th2 + g2) / den, (1, -1): 0.5 * (5 * th2 + g2) / den,
                    (3, 1): r4 / 2, (3, -1): r4 / 2, (2, -R): r4 / 2}
        else:
            raise SteadyStateUnavailable(f"two-tone resonant regime: no form for {channel}")
    elif kind == "ajc" and regime.k == 1:
        D = regime.detuning_symbol(params)
        if channel == "dephasing":
            pops = {(0, -1): 1, (2, 1): 1, (2, -1): 1}
        else:
            kap = params.kappa if channel in ("cavity-damping", "damping") else 0.0
            gam = params.gamma if channel in ("atomic-damping", "damping") else 0.0
            x = params.g0 ** 2 / params.delta_minus ** 2
            r1d = 1.0
            r2 = (kap * (1 - x) + gam * x) / (kap * x + gam * (1 - 3 * x)) * r1d
            r1m = (kap * (1 + x) + gam * x) / (kap * x + gam * (1 - x)) * r2
            r0 = (1 + ((kap + gam + 2 * x * (kap - gam)) / (2 * abs(theta))) ** 2) * r2
            pops = {(0, -1): r0, (2, -D): r2, (1, D): r1d, (1, -D): r1m}
    elif kind in ("antidce", "antidce2"):
        if channel in ("atomic-damping", "cavity-damping", "damping"):
            if kind == "antidce2" and regime.k - 4 == 0:
                # the second tone drives the zero-excitation state itself
                raise SteadyStateUnavailable("k = 4 two-tone drive keeps the ground state pumped")
            return {(0, -1): 1.0}
        if initial is None:
            raise SteadyStateUnavailable("the dephasing plateau needs the initial populations")
        return _dephasing_plateau(regime, params, initial)
    else:
        raise SteadyStateUnavailable(f"no closed form for {kind} with {channel}")
    total = sum(pops.values())
    return {lab: float(v) / total for lab, v in pops.items()}


def _dephasing_plateau(regime: RegimeSpec, params: SystemParams, initial: dict) -> dict:
    """Equal populations inside each cluster linked by the drive or by dephasing.

    Dephasing mixes (n, +) with (n, -); the drive joins the excitation
    numbers it couples into one cluster.
    """
    k = regime.k
    hubs = {k, k - 2} | ({k - 4} if regime.kind == "antidce2" else set())

    def cluster(lab):
        if lab[1] == 0:
            return lab  # truncation leftover is never coupled
        return "drive" if lab[0] in hubs else lab[0]

    groups: dict = {}
    for lab, p in initial.items():
        groups.setdefault(cluster(lab), []).append((lab, p))
    out = {}
    for members in groups.values():
        share = sum(p for _, p in members) / len(members)
        out.update({lab: share for lab, _ in members})
    return out


@dataclass(frozen=True, eq=False)
class PopulationRateModel:
    """Linear rate equations dp/dt = M p on labelled dressed populations."""

    labels: tuple
    matrix: np.ndarray

    def index(self, label) -> int:
        return self.labels.index(label)

    def evolve(self, p0, t: float) -> np.ndarray:
        return expm(self.matrix * t) @ np.asarray(p0, dtype=float)

    def vector(self, pops: dict) -> np.ndarray:
        v = np.zeros(len(self.labels))
        for lab, p in pops.items():
            v[self.index(lab)] = p
        return v


def antidce_rate_equations(channel: str, params: SystemParams, n_top: int) -> PopulationRateModel:
    """Dressed-population rate equations under one damping channel, to order (g0/Delta_-)^2.

    Levels (N, D) for N = 0..n_top and (N, -D) for N = 1..n_top; (0, D) stands
    for the zero-excitation state.
    """
    if params.delta_minus == 0:
        raise RegimeError("rate equations need Delta_- != 0")
    if channel not in ("cavity-damping", "atomic-damping"):
        raise ValueError("channel must be cavity-damping or atomic-damping")
    D = 1 if params.delta_minus > 0 else -1
    x = params.g0 ** 2 / params.delta_minus ** 2
    up = [(n, D) for n in range(n_top + 1)]
    dn = [(n, -D) for n in range(1, n_top + 1)]
    labels = tuple(up + dn)
    idx = {lab: i for i, lab in enumerate(labels)}
    m = np.zeros((len(labels), len(labels)))

    def add(dst, src, c):
        if dst in idx and src in idx:
            m[idx[dst], idx[src]] += c

    for n in range(n_top + 1):
        if channel == "cavity-damping":
            add((n, D), (n + 1, D), (n + 1) * (1 - x))
            add((n, D), (n + 1, -D), x)
            add((n, D), (n, D), -n * (1 - x))
            if n >= 1:
                add((n, -D), (n + 1, -D), n * (1 + x))
                add((n, -D), (n, -D), -(n - 1 + x * n))
        else:
            add((n, D), (n + 1, -D), 1 - x * (2 * n + 1))
            add((n, D), (n + 1, D), x * (n + 1))
            add((n, D), (n, D), -x * n)
            if n >= 1:
                add((n, -D), (n + 1, -D), x * n)
                add((n, -D), (n, -D), -(1 - x * n))
    rate = params.kappa if channel == "cavity-damping" else params.gamma
    # relabel the zero-excitation state with its basis label
    labels = tuple((0, -1) if lab[0] == 0 else lab for lab in labels)
    return PopulationRateModel(labels, m * rate)


def fine_tune_resonance(probe: Callable[[float], float], eta_guess: float, half_window: float,
                        xatol: float, edge_fraction: float = 0.02, grid: int = 0) -> float:
    """Frequency in eta_guess +- half_window that maximizes ``probe``.

    ``probe(eta)`` returns the first-peak transfer probability of a short
    dissipationless run. With ``grid > 0`` the window is first sampled at
    ``grid`` points and the bounded search is confined to the neighbours of
    the best one, which keeps it off side lobes. Raises
    :class:`AmbiguousResonance` when the optimum sits at the window edge.
    """
    if half_window <= 0 or xatol <= 0:
        raise ValueError("window and tolerance must be positive")
    lo, hi = eta_guess - half_window, eta_guess + half_window
    a, b = lo, hi
    if grid:
        if grid < 3:
            raise ValueError("grid needs at least 3 points")
        xs = np.linspace(lo, hi, grid)
        best = int(np.argmax([probe(x) for x in xs]))
        if best in (0, grid - 1):
            raise AmbiguousResonance(
                f"grid maximum at {xs[best]:.12g} lies on the edge of [{lo:.12g}, {hi:.12g}]")
        a, b = xs[best - 1], xs[best + 1]
    res = minimize_scalar(lambda e: -probe(e), bounds=(a, b), method="bounded",
                          options={"xatol": xatol})
    eta = float(res.x)
    if min(eta - lo, hi - eta) < edge_fraction * (hi - lo):
        raise AmbiguousResonance(
            f"maximum at {eta:.12g} lies on the edge of [{lo:.12g}, {hi:.12g}]")
    return eta


def tuning_window(params: SystemParams, schedule) -> float:
    """Largest admissible search half-width around a closed-form frequency."""
    w0 = params.omega0
    eps2 = max((abs(t.depth) ** 2 for t in schedule.tones), default=0.0)
    bs = params.g0 ** 2 / params.delta_plus
    return 10 * (params.g0 ** 2 / w0 + eps2 / w0 + 5 * bs)


def rwa_liouvillian(eff: EffectiveGenerator, dissipator_d: np.ndarray,
                    tol: Optional[float] = None) -> np.ndarray:
    """Static interaction-picture Liouvillian after the secular approximation.

    The couplings must be exactly resonant. Dissipator terms are kept only
    when their interaction-picture phase does not rotate (``tol`` on the
    Bohr-frequency mismatch, default 1e-8 omega0).
    """
    from .dissipators import commutator_superop, secular_projection

    e = eff.basis.energies
    for lo, up, _, eta in eff.couplings:
        if abs(eta - e[up] + e[lo]) > 1e-9 * max(1.0, eta):
            raise RegimeError("rwa_liouvillian needs exactly resonant couplings")
    if tol is None:
        tol = 1e-8 * eff.basis.params.omega0
    h = eff.interaction(0.0)
    return commutator_superop(h) + secular_projection(dissipator_d, e, tol)


def asymptotic_state(liouvillian: np.ndarray, rho0: np.ndarray) -> np.ndarray:
    """t -> infinity limit of exp(L t) rho0 (rho0 and result as matrices).

    Works for degenerate stationary manifolds, where the limit depends on rho0.
    """
    n = rho0.shape[0]
    ev = np.linalg.eigvals(liouvillian)
    rates = -ev.real[ev.real < -1e-12 * max(1.0, np.abs(ev).max())]
    if len(rates) == 0:
        raise ValueError("the Liouvillian has no decaying modes")
    t_long = 60.0 / rates.min()
    v = expm(liouvillian * t_long) @ rho0.reshape(-1)
    return v.reshape(n, n)
