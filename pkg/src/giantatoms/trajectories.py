"""Post-selection, quantum-jump unraveling, hardware noise and measurement budgets."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    as_matrix,
    dissipator_superop,
    embed_pauli,
    evolve_no_jump,
    matrix_exponential,
    n_qubits_of,
    nonhermitian_superop,
)
from .layout import GiantAtomLayout, waveguide_collapse_operators, build_simulator_generator
from .models import TwoQubitModel, two_qubit_effective_hamiltonian
from .protocol import NoiseConfig

CHUNK = 1000


class StepTooLarge(ValueError):
    pass


class InconsistentUnraveling(ValueError):
    pass


@dataclass
class KrausSet:
    operators: list
    dt: float

    def completeness_deviation(self) -> float:
        d = self.operators[0].shape[0]
        S = sum(K.conj().T @ K for K in self.operators)
        return float(np.linalg.norm(S - np.eye(d), 2))


def kraus_from_unraveling(H_eff: np.ndarray, collapse_ops: Sequence[np.ndarray], dt: float) -> KrausSet:
    """``K0 = I - i H_eff dt`` and ``K_k = sqrt(dt) C_k``."""
    if dt <= 0:
        raise StepTooLarge("dt must be positive")
    if dt * np.linalg.norm(H_eff, 2) >= 0.1:
        raise StepTooLarge(f"dt * ||H_eff|| = {dt * np.linalg.norm(H_eff, 2):.3g} is not small")
    K0 = np.eye(H_eff.shape[0]) - 1j * H_eff * dt
    return KrausSet([K0] + [math.sqrt(dt) * np.asarray(C) for C in collapse_ops], dt)


def model_unraveling(model: TwoQubitModel) -> tuple[np.ndarray, list]:
    C = [math.sqrt(model.gamma) * embed_pauli(2, 0, "-")] if model.gamma > 0 else []
    return two_qubit_effective_hamiltonian(model), C


def simulator_unraveling(layout: GiantAtomLayout, omegas, drives=None, omega_ref=None) -> tuple[np.ndarray, list]:
    """Effective Hamiltonian and the right/left-moving emission channels of the simulator."""
    gen = build_simulator_generator(layout, omegas, drives=drives, omega_ref=omega_ref)
    C = waveguide_collapse_operators(layout, omegas)
    H = gen.hamiltonian - 0.5j * sum(c.conj().T @ c for c in C)
    return H, C


def kraus_decompose(source, dt: float) -> KrausSet:
    """Kraus set of a target model, or of an ``(H_eff, collapse_ops)`` pair."""
    if isinstance(source, TwoQubitModel):
        H, C = model_unraveling(source)
    else:
        H, C = source
    return kraus_from_unraveling(H, C, dt)


def no_jump_probability(H_eff: np.ndarray, rho0, t: float) -> float:
    # H_eff = A - iB with B >= 0
    B = 0.5j * (H_eff - H_eff.conj().T)
    if np.linalg.eigvalsh(0.5 * (B + B.conj().T)).min() < -1e-12 * max(1.0, np.abs(H_eff).max()):
        raise ValueError("anti-Hermitian part of H_eff must be negative semidefinite")
    return float(np.clip(evolve_no_jump(H_eff, rho0, t).trace, 0.0, 1.0))


# -------------------------------------------------------------- noise


def _noise_dissipators(n_qubits: int, noise: NoiseConfig) -> np.ndarray:
    d = 2**n_qubits
    out = np.zeros((d * d, d * d), dtype=complex)
    for q in (0, 1):
        if noise.gamma_ex:
            out += dissipator_superop(embed_pauli(n_qubits, q, "-"), noise.gamma_ex)
        if noise.gamma_phi:
            out += dissipator_superop(embed_pauli(n_qubits, q, "z"), 0.5 * noise.gamma_phi)
    return out


def add_noise(L: np.ndarray, noise: NoiseConfig) -> np.ndarray:
    """Liouvillian plus extra decay and dephasing on qubits 1 and 2."""
    n = n_qubits_of(math.isqrt(L.shape[0]))
    return L + _noise_dissipators(n, noise)


def add_noise_no_jump(H_eff: np.ndarray, noise: NoiseConfig) -> np.ndarray:
    """Effective Hamiltonian with the anti-Hermitian shift of every extra channel.

    Extra decay contributes ``-i Gamma_ex sigma^+ sigma^- / 2`` per qubit; dephasing
    contributes ``-i Gamma_phi / 4`` times the identity per qubit.
    """
    n = n_qubits_of(H_eff.shape[0])
    H = np.array(H_eff, dtype=complex)
    for q in (0, 1):
        sm = embed_pauli(n, q, "-")
        H -= 0.5j * noise.gamma_ex * (sm.conj().T @ sm)
        H -= 0.25j * noise.gamma_phi * np.eye(2**n)
    return H


def conditional_generator(H_eff: np.ndarray, noise: NoiseConfig) -> np.ndarray:
    """Generator of the post-selected (unnormalized) state.

    Emissions, including extra decay, are detected and discarded. Dephasing emits
    nothing, so its jump term stays in the generator.
    """
    n = n_qubits_of(H_eff.shape[0])
    H = add_noise_no_jump(H_eff, NoiseConfig(gamma_ex=noise.gamma_ex))
    G = nonhermitian_superop(H)
    for q in (0, 1):
        if noise.gamma_phi:
            G = G + dissipator_superop(embed_pauli(n, q, "z"), 0.5 * noise.gamma_phi)
    return G


def _excitation_number(n: int) -> np.ndarray:
    return sum(0.5 * (embed_pauli(n, q, "z") + np.eye(2**n)) for q in range(n))


def identity_shift_invariance_check(
    H_eff: np.ndarray,
    gamma_ex,
    rho0,
    times: Sequence[float],
    tol: float = 1e-10,
):
    """Whether equal extra decay leaves normalized no-jump dynamics unchanged.

    ``gamma_ex`` may be one rate or one per qubit. Returns ``"inapplicable"`` when
    ``H_eff`` does not conserve the excitation number (e.g. a drive is on).
    """
    n = n_qubits_of(H_eff.shape[0])
    N = _excitation_number(n)
    if np.abs(H_eff @ N - N @ H_eff).max() > 1e-12 * max(1.0, np.abs(H_eff).max()):
        return "inapplicable"
    r0 = as_matrix(rho0)
    if abs(np.trace(N @ r0).real - 1) > 1e-12 or abs(np.trace(N @ N @ r0).real - 1) > 1e-12:
        raise ValueError("rho0 must lie in the single-excitation sector")
    rates = np.broadcast_to(np.asarray(gamma_ex, dtype=float), (2,))
    H2 = np.array(H_eff, dtype=complex)
    for q in (0, 1):
        sm = embed_pauli(n, q, "-")
        H2 -= 0.5j * rates[q] * (sm.conj().T @ sm)
    for t in times:
        a = evolve_no_jump(H_eff, r0, t).normalized().matrix
        b = evolve_no_jump(H2, r0, t).normalized().matrix
        if np.abs(a - b).max() > tol:
            return False
    return True


# ------------------------------------------------------ Monte Carlo


@dataclass
class MonteCarloResult:
    t: np.ndarray
    no_jump_fraction: np.ndarray
    n2_mean: np.ndarray
    n2_conditional: np.ndarray
    stderr: np.ndarray
    stderr_conditional: np.ndarray
    n_traj: int
    seed: int
    alpha: float
    accepted_fraction: np.ndarray
    n2_accepted: np.ndarray
    jumps: list = field(default_factory=list)

    @property
    def stderr_no_jump(self) -> np.ndarray:
        p = self.no_jump_fraction
        return np.sqrt(p * (1 - p) / self.n_traj)

    def rows(self):
        for k in range(len(self.t)):
            yield self.t[k], self.no_jump_fraction[k], self.n2_mean[k], self.n2_conditional[k], self.stderr[k]


MC_HEADER = ["t", "no_jump_fraction", "n2_mean", "n2_conditional", "stderr"]


def _run_chunk(H_eff, collapse, psi0, t_grid, substeps, dt_list, n, seed_seq, alpha, site):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    d = psi0.shape[0]
    psi = np.tile(psi0, (n, 1))
    jumped = np.zeros(n, dtype=bool)
    faulty = rng.random(n) < alpha
    proj = 0.5 * (np.diag(embed_pauli(n_qubits_of(d), site, "z")).real + 1)
    nT = len(t_grid)
    n2 = np.zeros((nT, n))
    nj = np.zeros((nT, n), dtype=bool)
    records = []
    t_now = t_grid[0]

    def record(k):
        n2[k] = (np.abs(psi) ** 2) @ proj
        nj[k] = ~jumped

    record(0)
    CdC = [C.conj().T @ C for C in collapse]
    for k in range(1, nT):
        U = matrix_exponential(-1j * H_eff * dt_list[k])
        for _ in range(substeps[k]):
            phi = psi @ U.T
            keep = np.einsum("ni,ni->n", phi.conj(), phi).real
            r = rng.random(n)
            jump = r > keep
            t_now += dt_list[k]
            if jump.any() and collapse:
                idx = np.flatnonzero(jump)
                w = np.stack([np.einsum("ni,ij,nj->n", psi[idx].conj(), M, psi[idx]).real for M in CdC], axis=1)
                w = np.clip(w, 0, None)
                cum = np.cumsum(w, axis=1)
                u = rng.random(len(idx)) * cum[:, -1]
                chan = (u[:, None] > cum).sum(axis=1)
                new = np.empty((len(idx), d), dtype=complex)
                for c in range(len(collapse)):
                    sel = chan == c
                    if sel.any():
                        new[sel] = psi[idx[sel]] @ collapse[c].T
                psi[idx] = new
                jumped[idx] = True
                records.extend((int(i), float(t_now), int(c)) for i, c in zip(idx, chan))
            stay = ~jump
            psi[stay] = phi[stay]
            psi /= np.linalg.norm(psi, axis=1)[:, None]
        record(k)
    return n2, nj, faulty, records


def monte_carlo_unraveling(
    H_eff: np.ndarray,
    collapse_ops: Sequence[np.ndarray],
    psi0,
    t_grid: Sequence[float],
    n_traj: int,
    seed: int,
    alpha: float = 0.0,
    site: int = 1,
    threads: int = 1,
    dt_factor: float = 0.01,
) -> MonteCarloResult:
    """Jump unraveling of ``H_eff`` plus ``collapse_ops``.

    Each step propagates with ``exp(-i H_eff dt)`` and jumps with probability equal
    to the resulting norm loss; the channel is chosen in proportion to
    ``<C_k^dagger C_k>``. Trajectories run in fixed-size chunks with disjoint
    sub-seeds, so results do not depend on ``threads``. With ``alpha > 0`` each
    trajectory that jumped is, with probability ``alpha``, reported as a no-jump one.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    if psi0.ndim != 1 or abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("psi0 must be a normalized pure state")
    collapse = [np.asarray(C, dtype=complex) for C in collapse_ops]
    herm = 0.5 * (H_eff + H_eff.conj().T)
    expected = -0.5j * sum((C.conj().T @ C for C in collapse), np.zeros_like(H_eff))
    if np.abs((H_eff - herm) - expected).max() > 1e-9 * max(1.0, np.abs(H_eff).max()):
        raise InconsistentUnraveling("H_eff anti-Hermitian part does not match the collapse operators")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    scale = max(np.linalg.norm(H_eff, 2), max((np.linalg.norm(C, 2) ** 2 for C in collapse), default=0.0), 1e-300)
    dt_max = dt_factor / scale
    substeps = [0] + [max(1, int(math.ceil((b - a) / dt_max))) for a, b in zip(t_grid[:-1], t_grid[1:])]
    dt_list = [0.0] + [(b - a) / m for a, b, m in zip(t_grid[:-1], t_grid[1:], substeps[1:])]

    sizes = [CHUNK] * (n_traj // CHUNK) + ([n_traj % CHUNK] if n_traj % CHUNK else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    args = [(H_eff, collapse, psi0, t_grid, substeps, dt_list, m, s, alpha, site) for m, s in zip(sizes, seeds)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda a: _run_chunk(*a), args))
    else:
        parts = [_run_chunk(*a) for a in args]
    n2 = np.concatenate([p[0] for p in parts], axis=1)
    nj = np.concatenate([p[1] for p in parts], axis=1)
    faulty = np.concatenate([p[2] for p in parts])
    records = []
    offset = 0
    for m, p in zip(sizes, parts):
        records.extend((i + offset, t, c) for i, t, c in p[3])
        offset += m

    mean = n2.mean(axis=1)
    se = n2.std(axis=1, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.zeros_like(mean)
    frac = nj.mean(axis=1)
    cond = np.full(len(t_grid), np.nan)
    se_c = np.full(len(t_grid), np.nan)
    acc_frac = np.zeros(len(t_grid))
    acc_n2 = np.full(len(t_grid), np.nan)
    for k in range(len(t_grid)):
        sel = nj[k]
        if sel.sum() >= 1:
            cond[k] = n2[k, sel].mean()
            if sel.sum() > 1:
                se_c[k] = n2[k, sel].std(ddof=1) / math.sqrt(sel.sum())
        acc = sel | faulty
        acc_frac[k] = acc.mean()
        if acc.any():
            acc_n2[k] = n2[k, acc].mean()
    return MonteCarloResult(
        t=t_grid,
        no_jump_fraction=frac,
        n2_mean=mean,
        n2_conditional=cond,
        stderr=se,
        stderr_conditional=se_c,
        n_traj=n_traj,
        seed=seed,
        alpha=alpha,
        accepted_fraction=acc_frac,
        n2_accepted=acc_n2,
        jumps=records,
    )


# ----------------------------------------------------- measurement


def detector_mixing(n2_H, n2_L, P, alpha: float) -> np.ndarray:
    """Post-selected ``n2`` when a detector misses jumps with probability ``alpha``."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    a, b, p = (np.asarray(x, dtype=float) for x in (n2_H, n2_L, P))
    if not (a.shape == b.shape == p.shape):
        raise ValueError("series lengths differ")
    return ((1 - alpha) * p * a + alpha * b) / (p + alpha * (1 - p))


@dataclass
class StatBudget:
    n_experiments: float
    delta_exp: np.ndarray
    n_post: float | None = None

    def __post_init__(self):
        if self.n_experiments < 1:
            raise ValueError("N_exp must be >= 1")


def statistical_budget(n2, n2_inf: float, n_experiments: float) -> StatBudget:
    """Relative error ``3 sqrt(n2 (1 - n2) / N) / |n2 - n2_inf|``; ``inf`` where the gap vanishes."""
    n2 = np.asarray(n2, dtype=float)
    gap = np.abs(n2 - n2_inf)
    delta = np.full(n2.shape, np.inf)
    ok = gap > 0
    delta[ok] = 3 * np.sqrt(n2[ok] * (1 - n2[ok]) / n_experiments) / gap[ok]
    return StatBudget(n_experiments, delta)


def required_experiments(target_delta: float, n2: float, n2_inf: float) -> float:
    """Number of repetitions that brings the relative error at one time down to ``target_delta``."""
    if target_delta <= 0:
        raise ValueError("target_delta must be positive")
    # a driven n2 may undershoot its asymptote; the size of the gap is what matters
    gap = abs(n2 - n2_inf)
    if gap == 0:
        raise ValueError("n2 equals its asymptotic value")
    return max(1.0, 9 * n2 * (1 - n2) / (target_delta * gap) ** 2)


def post_selection_runs(n_post: float, P: float) -> float:
    """Repetitions needed to keep ``n_post`` no-jump records when each survives with probability ``P``."""
    if not 0 < P <= 1:
        raise ValueError("P must lie in (0, 1]")
    return n_post / P

