"""Trotterized simulation of the two-qubit target on a braided giant-atom pair.

One Trotter step is: coherent segment (``t0``) at the decoherence-free point,
a dissipative segment (``t1 + t2``) in which qubit 1 is swept symmetrically
around the decoherence-free frequency, and a second coherent segment. All
propagation happens in the frame rotating at the decoherence-free frequency.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import (
    DensityMatrix,
    apply_superop,
    as_matrix,
    cross_dissipator_superop,
    dissipator_superop,
    embed_pauli,
    hamiltonian_superop,
    matrix_exponential,
    nonhermitian_superop,
    ordered_product,
    population,
)
from .layout import GiantAtomLayout, TWO_PI, decoherence_free_frequency, preset_braided_pair
from .models import TwoQubitModel

# default hardware values
DEFAULT_SPAN_M = 0.08125
DEFAULT_V_M_PER_S = 1.3e8
DEFAULT_GAMMA_HZ = 1e6
DEFAULT_RAMP_HZ_PER_S = 0.2e9 / 1e-9
DEFAULT_DX_RATIO = 5.0

MODES = ("liouvillian", "no_jump")


@dataclass(frozen=True)
class NoiseConfig:
    """Extra decay and dephasing per qubit (rad/s) and the detector false-no-jump rate."""

    gamma_ex: float = 0.0
    gamma_phi: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.gamma_ex < 0 or self.gamma_phi < 0:
            raise ValueError("noise rates must be non-negative")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def is_zero(self) -> bool:
        return self.gamma_ex == 0 and self.gamma_phi == 0


@dataclass(frozen=True)
class PhysicalParams:
    gamma: float
    omega0: float
    omega_DF: float
    v1: float
    g0: float

    def __post_init__(self):
        if self.v1 <= 0:
            raise ValueError("ramp speed v1 must be positive")


def default_layout(span: float = DEFAULT_SPAN_M, ratio: float = DEFAULT_DX_RATIO,
                   v: float = DEFAULT_V_M_PER_S, gamma_hz: float = DEFAULT_GAMMA_HZ) -> GiantAtomLayout:
    dx2 = span / (ratio + 1)
    return preset_braided_pair(ratio * dx2, dx2, TWO_PI * gamma_hz, v)


def physical_params(layout: GiantAtomLayout, v1: float = TWO_PI * DEFAULT_RAMP_HZ_PER_S) -> PhysicalParams:
    from .layout import atom_parameters

    wdf = decoherence_free_frequency(layout)
    g0 = float(atom_parameters(layout, [wdf, wdf]).g[0, 1])
    return PhysicalParams(gamma=layout.gamma, omega0=layout.omega0, omega_DF=wdf, v1=v1, g0=g0)


@dataclass(frozen=True)
class StepTimes:
    t0: float
    t1: float
    t2: float

    def __post_init__(self):
        if min(self.t0, self.t1, self.t2) < 0:
            raise ValueError("segment times must be non-negative")

    @property
    def duration(self) -> float:
        return 2 * self.t0 + self.t1 + self.t2


def coherent_segment(target: TwoQubitModel, l: int, t_sim: float, g0: float) -> tuple[float, float]:
    """Duration ``t0 = g t / (2 g0 l)`` and drive ``Omega_1 = Omega g0 / g`` of a coherent half-step."""
    if l < 1:
        raise ValueError("l must be >= 1")
    if t_sim <= 0:
        raise ValueError("simulated time must be positive")
    return target.g * t_sim / (2 * g0 * l), target.omega * g0 / target.g


def dose_threshold(gamma: float, omega0: float, v1: float) -> float:
    """Decay delivered by the four ramps alone when they reach maximum decay."""
    return 4 * gamma * omega0 / v1


def _x_minus_sin(x: float) -> float:
    if abs(x) > 0.1:
        return x - math.sin(x)
    # series avoids the cancellation for short ramps
    term, total, k = x**3 / 6, 0.0, 3
    while abs(term) > 1e-18 * abs(x**3):
        total += term
        term *= -(x * x) / ((k + 1) * (k + 2))
        k += 2
    return total


def _ramp_dose(quarter: float, gamma: float, omega0: float, v1: float) -> float:
    """Decay delivered by four quarter-ramps of duration ``quarter`` each."""
    k = TWO_PI * v1 / omega0
    return 8 * gamma * _x_minus_sin(k * quarter) / k


def dissipative_segment_times(dose: float, gamma: float, omega0: float, v1: float) -> StepTimes:
    """Ramp time ``t1`` and dwell ``t2`` that deliver ``integral Gamma_1 dt = dose``.

    ``t0`` of the returned record is zero.
    """
    if dose < 0:
        raise ValueError("dose must be non-negative")
    if dose == 0:
        return StepTimes(0.0, 0.0, 0.0)
    threshold = dose_threshold(gamma, omega0, v1)
    q_max = 0.5 * omega0 / v1
    if dose >= threshold:
        return StepTimes(0.0, 4 * q_max, (dose - threshold) / (4 * gamma))
    q = brentq(lambda x: _ramp_dose(x, gamma, omega0, v1) - dose, 0.0, q_max, xtol=1e-16 * q_max, rtol=1e-15)
    return StepTimes(0.0, 4 * q, 0.0)


@dataclass(frozen=True)
class Waveform:
    """Piecewise-linear waveform given by its breakpoints."""

    times: tuple
    values: tuple

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    @property
    def duration(self) -> float:
        return self.times[-1]

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.times))


def frequency_schedule(step: StepTimes, v1: float, omega_DF: float) -> Waveform:
    """Qubit-1 frequency over one Trotter step (upward excursion first)."""
    t0, t1, t2 = step.t0, step.t1, step.t2
    a = v1 * t1 / 4
    times = [
        0.0,
        t0,
        t0 + t1 / 4,
        t0 + t1 / 4 + t2 / 2,
        t0 + 3 * t1 / 4 + t2 / 2,
        t0 + 3 * t1 / 4 + t2,
        t0 + t1 + t2,
        2 * t0 + t1 + t2,
    ]
    values = [omega_DF, omega_DF, omega_DF + a, omega_DF + a, omega_DF - a, omega_DF - a, omega_DF, omega_DF]
    return Waveform(tuple(times), tuple(values))


@dataclass(frozen=True)
class TrotterPlan:
    l: int
    target: TwoQubitModel
    t_sim: float
    times: StepTimes
    drive: float
    phys: PhysicalParams

    @property
    def frequency(self) -> Waveform:
        return frequency_schedule(self.times, self.phys.v1, self.phys.omega_DF)

    def drive_at(self, t):
        t = np.asarray(t, dtype=float)
        t0, t1, t2 = self.times.t0, self.times.t1, self.times.t2
        coherent = (t < t0) | (t > t0 + t1 + t2)
        return np.where(coherent, self.drive, 0.0)

    def to_dict(self) -> dict:
        ns = 1e9
        wave = self.frequency
        return {
            "l": self.l,
            "target": self.target.to_dict(),
            "t_sim_over_g": self.t_sim * self.target.g,
            "t0_ns": self.times.t0 * ns,
            "t1_ns": self.times.t1 * ns,
            "t2_ns": self.times.t2 * ns,
            "drive_ghz": self.drive / TWO_PI / 1e9,
            "total_wall_time_ns": total_wall_time(self) * ns,
            "breakpoints": [[t * ns, w / TWO_PI / 1e9] for t, w in zip(wave.times, wave.values)],
        }


def make_plan(target: TwoQubitModel, t_sim: float, l: int, phys: PhysicalParams) -> TrotterPlan:
    t0, drive = coherent_segment(target, l, t_sim, phys.g0)
    diss = dissipative_segment_times(target.gamma * t_sim / l, phys.gamma, phys.omega0, phys.v1)
    return TrotterPlan(l, target, t_sim, StepTimes(t0, diss.t1, diss.t2), drive, phys)


def total_wall_time(plan: TrotterPlan) -> float:
    return plan.l * plan.times.duration


def trotter_reference(L1: np.ndarray, L2: np.ndarray, t: float, l: int, order: int = 2) -> np.ndarray:
    """Ideal Trotter-Suzuki propagator for ``exp((L1 + L2) t)``."""
    if L1.shape != L2.shape:
        raise ValueError("generators must have the same shape")
    if order == 1:
        # e^{L1 dt} e^{L2 dt}: L2 acts first
        step = matrix_exponential(L1 * t / l) @ matrix_exponential(L2 * t / l)
    elif order == 2:
        half = matrix_exponential(L1 * t / (2 * l))
        step = half @ matrix_exponential(L2 * t / l) @ half
    else:
        raise ValueError("order must be 1 or 2")
    return np.linalg.matrix_power(step, l)


# ------------------------------------------------------------ propagation


@dataclass(frozen=True)
class _Terms:
    """Fixed superoperators whose time-dependent combination is the generator."""

    detuning: np.ndarray
    exchange: np.ndarray
    drive: np.ndarray
    decay1: np.ndarray
    decay2: np.ndarray
    collective: np.ndarray
    static: np.ndarray
    mode: str


@functools.lru_cache(maxsize=32)
def _terms(mode: str, noise: NoiseConfig) -> _Terms:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    s1, s2 = embed_pauli(2, 0, "-"), embed_pauli(2, 1, "-")
    z1, z2 = embed_pauli(2, 0, "z"), embed_pauli(2, 1, "z")
    x1 = embed_pauli(2, 0, "x")
    hop = s1.conj().T @ s2
    ex = hop + hop.conj().T
    det = hamiltonian_superop(0.5 * z1)
    exch = hamiltonian_superop(ex)
    drv = hamiltonian_superop(x1)
    dephase = 0.5 * noise.gamma_phi * (dissipator_superop(z1) + dissipator_superop(z2))
    if mode == "liouvillian":
        d1 = dissipator_superop(s1)
        d2 = dissipator_superop(s2)
        dc = cross_dissipator_superop(s1, s2)
        static = noise.gamma_ex * (d1 + d2) + dephase
    else:
        # post-selection removes every emission (waveguide or extra decay);
        # dephasing emits nothing and stays as a full dissipator
        d1 = nonhermitian_superop(-0.5j * (s1.conj().T @ s1))
        d2 = nonhermitian_superop(-0.5j * (s2.conj().T @ s2))
        dc = nonhermitian_superop(-0.5j * ex)
        static = noise.gamma_ex * (d1 + d2) + dephase
    return _Terms(det, exch, drv, d1, d2, dc, static, mode)


def _pair_parameters(layout: GiantAtomLayout, w1: np.ndarray, w2: float):
    """Vectorized g, Gamma_1, Gamma_2, Gamma_12 for atom 1 at ``w1`` (array) and atom 2 at ``w2``."""
    w1 = np.atleast_1d(np.asarray(w1, dtype=float))
    p1 = np.outer(w1 / layout.v, layout.atoms[0])
    p2 = np.asarray(layout.atoms[1]) * (w2 / layout.v)
    s1 = np.exp(1j * p1).sum(axis=1)
    s2 = np.exp(1j * p2).sum()
    diff = p1[:, :, None] - p2[None, None, :]
    gam = layout.gamma
    g = 0.5 * gam * np.sin(np.abs(diff)).sum(axis=(1, 2))
    coll = gam * np.cos(diff).sum(axis=(1, 2))
    return g, gam * np.abs(s1) ** 2, np.full_like(g, gam * abs(s2) ** 2), coll


@dataclass(frozen=True)
class SimOptions:
    """How the hardware schedule is integrated.

    ``residual_coupling=False`` zeroes the exchange whenever qubit 1 is away from
    the decoherence-free point; it exists to measure the effect of that coupling.
    """

    mode: str = "liouvillian"
    noise: NoiseConfig = NoiseConfig()
    max_phase: float = 0.02
    residual_coupling: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.max_phase <= 0:
            raise ValueError("max_phase must be positive")


def _generators(layout, wdf, opts: SimOptions, w1, drive) -> np.ndarray:
    terms = _terms(opts.mode, opts.noise)
    w1 = np.atleast_1d(w1)
    drive = np.broadcast_to(np.asarray(drive, float), w1.shape)
    g, G1, G2, Gc = _pair_parameters(layout, w1, wdf)
    if not opts.residual_coupling:
        g = np.where(w1 == wdf, g, 0.0)
    coeffs = np.stack([w1 - wdf, g, drive, G1, G2, Gc], axis=1)
    basis = np.stack([terms.detuning, terms.exchange, terms.drive, terms.decay1, terms.decay2, terms.collective])
    return np.einsum("tk,kij->tij", coeffs, basis) + terms.static


def _blocks(mats) -> list[np.ndarray]:
    """Index sets of the invariant blocks shared by all matrices in ``mats``."""
    from scipy.sparse.csgraph import connected_components

    pattern = sum(np.abs(m) for m in mats) > 0
    n, labels = connected_components(pattern | pattern.T, directed=False)
    return [np.flatnonzero(labels == k) for k in range(n)]


@functools.lru_cache(maxsize=512)
def _sweep_propagator(layout, wdf, opts: SimOptions, d_start, d_end, duration):
    """Propagator for a linear sweep of the qubit-1 detuning from ``d_start`` to ``d_end``."""
    peak = max(abs(d_start), abs(d_end))
    n = max(1, int(math.ceil(duration * peak / opts.max_phase)))
    h = duration / n
    frac = (np.arange(n) + 0.5) / n
    w1 = wdf + d_start + (d_end - d_start) * frac
    gens = _generators(layout, wdf, opts, w1, 0.0) * h
    # the drive is off, so the generator splits into excitation-difference blocks
    out = np.zeros((16, 16), dtype=complex)
    for idx in _blocks(gens):
        sub = gens[:, idx[:, None], idx[None, :]]
        out[idx[:, None], idx[None, :]] = ordered_product(matrix_exponential(sub))
    return out


def _constant_propagator(layout, wdf, opts, detuning, drive, duration) -> np.ndarray:
    if duration == 0:
        return np.eye(16, dtype=complex)
    gen = _generators(layout, wdf, opts, np.array([wdf + detuning]), drive)[0]
    return matrix_exponential(gen * duration)


def step_propagator(layout: GiantAtomLayout, plan: TrotterPlan, opts: SimOptions = SimOptions()) -> np.ndarray:
    """Liouville-space propagator of one Trotter step.

    The ramps are integrated with piecewise-constant pieces whose detuning phase
    never exceeds ``opts.max_phase``; ramp propagators are cached, so plans that
    share a ramp (every dose above threshold) reuse it.
    """
    wdf = plan.phys.omega_DF
    t0, t1, t2 = plan.times.t0, plan.times.t1, plan.times.t2
    a = plan.phys.v1 * t1 / 4
    coh = _constant_propagator(layout, wdf, opts, 0.0, plan.drive, t0)
    parts = []
    if t1 > 0:
        parts.append(_sweep_propagator(layout, wdf, opts, 0.0, a, t1 / 4))
    parts.append(_constant_propagator(layout, wdf, opts, a, 0.0, t2 / 2))
    if t1 > 0:
        parts.append(_sweep_propagator(layout, wdf, opts, a, -a, t1 / 2))
    parts.append(_constant_propagator(layout, wdf, opts, -a, 0.0, t2 / 2))
    if t1 > 0:
        parts.append(_sweep_propagator(layout, wdf, opts, -a, 0.0, t1 / 4))
    diss = parts[0]
    for p in parts[1:]:
        diss = p @ diss
    return coh @ diss @ coh


def simulator_generator_at(layout, plan: TrotterPlan, t: float, opts: SimOptions = SimOptions()) -> np.ndarray:
    """Instantaneous rotating-frame generator during one Trotter step."""
    return _generators(layout, plan.phys.omega_DF, opts, plan.frequency(t), plan.drive_at(t))[0]


@dataclass
class ProtocolTrajectory:
    plan: TrotterPlan
    mode: str
    sim_times: np.ndarray
    states: list = field(default_factory=list)

    def populations(self, site: int, normalize: bool = False) -> np.ndarray:
        return np.array([population(r, site, normalize=normalize) for r in self.states])

    def traces(self) -> np.ndarray:
        return np.array([r.trace for r in self.states])

    def rows(self):
        n1 = self.populations(0)
        n2 = self.populations(1)
        tr = self.traces()
        g = self.plan.target.g
        for k, t in enumerate(self.sim_times):
            yield k + 1, t * g / math.pi, n1[k], n2[k], tr[k]


TRAJECTORY_HEADER = ["step", "sim_time_over_g", "n1", "n2", "trace"]


def _state(m: np.ndarray, mode: str) -> DensityMatrix:
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(m, subnormalized=(mode == "no_jump"))


def _check_layout(layout: GiantAtomLayout) -> None:
    from .layout import markovianity_check

    if layout.n_atoms != 2:
        raise ValueError("the two-qubit protocol needs a two-atom layout")
    markovianity_check(layout)


def simulate_protocol(layout: GiantAtomLayout, plan: TrotterPlan, rho0, opts: SimOptions = SimOptions()) -> ProtocolTrajectory:
    """State after each of the ``l`` Trotter steps of ``plan``."""
    _check_layout(layout)
    S = step_propagator(layout, plan, opts)
    v = as_matrix(rho0).reshape(-1, order="F")
    states = []
    for _ in range(plan.l):
        v = S @ v
        states.append(_state(v.reshape(4, 4, order="F"), opts.mode))
    sim_times = plan.t_sim * np.arange(1, plan.l + 1) / plan.l
    return ProtocolTrajectory(plan, opts.mode, sim_times, states)


def simulate_final_state(layout, plan: TrotterPlan, rho0, opts: SimOptions = SimOptions()) -> DensityMatrix:
    """``rho_sim`` after all ``l`` steps."""
    S = step_propagator(layout, plan, opts)
    P = np.linalg.matrix_power(S, plan.l)
    return _state(apply_superop(P, rho0), opts.mode)


def protocol_series(
    layout: GiantAtomLayout,
    target: TwoQubitModel,
    t_grid,
    l: int,
    rho0,
    phys: PhysicalParams | None = None,
    opts: SimOptions = SimOptions(),
) -> list[DensityMatrix]:
    """``rho_sim(t)`` for every ``t`` in ``t_grid``, each from its own ``l``-step plan.

    ``t = 0`` returns ``rho0`` unchanged.
    """
    _check_layout(layout)
    phys = physical_params(layout) if phys is None else phys
    out = []
    for t in np.asarray(t_grid, dtype=float):
        if t == 0:
            out.append(_state(as_matrix(rho0).copy(), opts.mode))
            continue
        plan = make_plan(target, t, l, phys)
        out.append(simulate_final_state(layout, plan, rho0, opts))
    return out
