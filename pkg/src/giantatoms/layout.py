"""Giant-atom geometry and the waveguide-mediated parameters it produces.

Every atom couples to the waveguide at a set of points. At angular frequency
``w`` a point at position ``x`` carries the phase ``w x / v``. With per-point
rate ``gamma`` the Markovian waveguide parameters are

    Gamma_a   = gamma |sum_j exp(i phi_j^a)|^2
    Gamma_ab  = gamma sum_{j in a, k in b} cos(phi_j^a - phi_k^b)
    g_ab      = gamma/2 sum_{j in a, k in b} sin|phi_j^a - phi_k^b|

where each atom's phases use that atom's own frequency.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .core import cross_dissipator_superop, dissipator_superop, embed_pauli, hamiltonian_superop

TWO_PI = 2.0 * math.pi
ZERO_TOL = 1e-10


class GeometryError(ValueError):
    """A preset failed its own decoherence-free self-check."""


class NoDecoherenceFreePoint(ValueError):
    pass


class InfeasiblePlan(ValueError):
    pass


class MarkovianityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GiantAtomLayout:
    """Coupling-point positions (m), per-point rate ``gamma`` (rad/s), waveguide speed ``v`` (m/s)."""

    atoms: tuple[tuple[float, ...], ...]
    gamma: float
    v: float
    name: str = "custom"
    omega0_override: float | None = field(default=None, compare=False)

    def __post_init__(self):
        atoms = tuple(tuple(float(x) for x in pts) for pts in self.atoms)
        if not atoms:
            raise ValueError("layout needs at least one atom")
        for pts in atoms:
            if not pts:
                raise ValueError("every atom needs at least one coupling point")
            if any(not math.isfinite(x) or x < 0 for x in pts):
                raise ValueError(f"coupling points must be finite and non-negative: {pts}")
        if not (self.gamma > 0 and self.v > 0):
            raise ValueError("gamma and v must be positive")
        object.__setattr__(self, "atoms", atoms)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def omega0(self) -> float:
        """``2 pi v / S`` with ``S`` the span of the first atom's coupling points."""
        if self.omega0_override is not None:
            return self.omega0_override
        span = max(self.atoms[0]) - min(self.atoms[0])
        if span <= 0:
            raise NoDecoherenceFreePoint("small atom: no interference frequency scale")
        return TWO_PI * self.v / span

    @property
    def max_distance(self) -> float:
        pts = [x for atom in self.atoms for x in atom]
        return max(pts) - min(pts)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "atoms": [list(a) for a in self.atoms],
            "gamma_hz": self.gamma / TWO_PI,
            "v_m_per_s": self.v,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GiantAtomLayout":
        try:
            return cls(
                atoms=tuple(tuple(a) for a in d["atoms"]),
                gamma=TWO_PI * float(d["gamma_hz"]),
                v=float(d["v_m_per_s"]),
                name=d.get("name", "custom"),
            )
        except KeyError as exc:
            raise ValueError(f"layout record missing field {exc.args[0]!r}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class AtomParameters:
    g: np.ndarray
    gamma_individual: np.ndarray
    gamma_collective: np.ndarray

    @property
    def rate_matrix(self) -> np.ndarray:
        """Dissipation matrix with ``Gamma_n`` on the diagonal and ``Gamma_nm`` off it."""
        m = self.gamma_collective.copy()
        np.fill_diagonal(m, self.gamma_individual)
        return m


@dataclass(frozen=True)
class WaveguideFrame:
    omega0: float
    omega_DF: float


# ---------------------------------------------------------------- presets


def preset_braided_pair(dx1: float, dx2: float, gamma: float, v: float) -> GiantAtomLayout:
    """Two braided giant atoms; order along the line is 2A, 1A, 2B, 1B."""
    if dx1 <= 0 or dx2 <= 0:
        raise ValueError("dx1 and dx2 must be positive")
    span = dx1 + dx2
    layout = GiantAtomLayout(
        atoms=((dx1, 2 * dx1 + dx2), (0.0, span)),
        gamma=gamma,
        v=v,
        name="braided-pair",
    )
    _self_check(layout, nearest_neighbor_only=False)
    return layout


def preset_chain_nearest_neighbor(n_atoms: int, dx1: float, dx2: float, gamma: float, v: float) -> GiantAtomLayout:
    """Chain in which only neighboring atoms are braided.

    Atom ``n`` couples at ``n d`` and ``n d + S`` with ``d = dx1 + dx2`` and
    ``S = dx1 + 2 dx2``, which gives the alternating gaps ``dx1, dx2`` along the
    line. Since ``d < S < 2d`` neighbors are braided and next-nearest neighbors
    are separated, so their exchange coupling vanishes at the decoherence-free
    frequency.
    """
    if n_atoms < 2:
        raise ValueError("need at least two atoms")
    if dx1 <= 0 or dx2 <= 0:
        raise ValueError("dx1 and dx2 must be positive")
    d = dx1 + dx2
    span = dx1 + 2 * dx2
    layout = GiantAtomLayout(
        atoms=tuple((n * d, n * d + span) for n in range(n_atoms)),
        gamma=gamma,
        v=v,
        name="chain-nearest-neighbor",
    )
    _self_check(layout, nearest_neighbor_only=True)
    return layout


def preset_chain_all_to_all(n_atoms: int, dx1: float, gamma: float, v: float) -> GiantAtomLayout:
    """Every pair braided: atom ``n`` at ``n dx1`` and ``n dx1 + 2 N dx1``."""
    if n_atoms < 2:
        raise ValueError("need at least two atoms")
    if dx1 <= 0:
        raise ValueError("dx1 must be positive")
    span = 2 * n_atoms * dx1
    layout = GiantAtomLayout(
        atoms=tuple((n * dx1, n * dx1 + span) for n in range(n_atoms)),
        gamma=gamma,
        v=v,
        name="chain-all-to-all",
    )
    _self_check(layout, nearest_neighbor_only=False)
    return layout


def _self_check(layout: GiantAtomLayout, nearest_neighbor_only: bool) -> None:
    w = 2.5 * layout.omega0
    p = atom_parameters(layout, [w] * layout.n_atoms)
    gam = layout.gamma
    n = layout.n_atoms
    if np.any(np.abs(p.rate_matrix) > 1e-9 * gam):
        raise GeometryError(f"{layout.name}: dissipation does not vanish at 2.5 omega0")
    for a, b in itertools.combinations(range(n), 2):
        coupled = abs(p.g[a, b]) > 0.01 * gam
        wanted = (b - a == 1) if nearest_neighbor_only else True
        if coupled != wanted:
            raise GeometryError(f"{layout.name}: coupling g_{a + 1}{b + 1} has the wrong structure at 2.5 omega0")


# ------------------------------------------------------------- parameters


def _phase_sums(layout: GiantAtomLayout, omegas: Sequence[float]) -> list[np.ndarray]:
    return [np.asarray(atom) * (w / layout.v) for atom, w in zip(layout.atoms, omegas)]


def atom_parameters(layout: GiantAtomLayout, omegas: Sequence[float]) -> AtomParameters:
    omegas = np.broadcast_to(np.asarray(omegas, dtype=float), (layout.n_atoms,))
    if np.any(omegas <= 0):
        raise ValueError("frequencies must be positive")
    phases = _phase_sums(layout, omegas)
    n = layout.n_atoms
    gam = layout.gamma
    g = np.zeros((n, n))
    coll = np.zeros((n, n))
    indiv = np.empty(n)
    for a in range(n):
        indiv[a] = gam * abs(np.exp(1j * phases[a]).sum()) ** 2
        for b in range(a + 1, n):
            diff = phases[a][:, None] - phases[b][None, :]
            g[a, b] = g[b, a] = 0.5 * gam * np.sin(np.abs(diff)).sum()
            coll[a, b] = coll[b, a] = gam * np.cos(diff).sum()
    return AtomParameters(g=g, gamma_individual=indiv, gamma_collective=coll)


def frame(layout: GiantAtomLayout) -> WaveguideFrame:
    return WaveguideFrame(layout.omega0, decoherence_free_frequency(layout))


def waveguide_collapse_operators(layout: GiantAtomLayout, omegas: Sequence[float]) -> list[np.ndarray]:
    """Right- and left-moving emission channels ``sqrt(gamma/2) sum_n s_n^(*) sigma_n^-``.

    Together they reproduce the rate-matrix dissipator exactly.
    """
    n = layout.n_atoms
    phases = _phase_sums(layout, np.broadcast_to(np.asarray(omegas, float), (n,)))
    s = np.array([np.exp(1j * p).sum() for p in phases])
    lower = [embed_pauli(n, k, "-") for k in range(n)]
    amp = math.sqrt(layout.gamma / 2)
    right = amp * sum(s[k] * lower[k] for k in range(n))
    left = amp * sum(np.conj(s[k]) * lower[k] for k in range(n))
    return [right, left]


@dataclass(frozen=True)
class SimulatorGenerator:
    """Lindblad generator of the simulator plus its Hamiltonian and jump operators."""

    liouvillian: np.ndarray
    hamiltonian: np.ndarray
    collapse_operators: list
    parameters: AtomParameters

    @property
    def effective_hamiltonian(self) -> np.ndarray:
        H = self.hamiltonian.astype(complex)
        for c in self.collapse_operators:
            H = H - 0.5j * (c.conj().T @ c)
        return H


def exchange_hamiltonian(g: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    up = [embed_pauli(n, k, "+") for k in range(n)]
    down = [embed_pauli(n, k, "-") for k in range(n)]
    H = np.zeros((2**n, 2**n), dtype=complex)
    for a, b in itertools.combinations(range(n), 2):
        if g[a, b] != 0:
            hop = up[a] @ down[b]
            H += g[a, b] * (hop + hop.conj().T)
    return H


def rate_matrix_dissipator(rates: np.ndarray) -> np.ndarray:
    """Superoperator of ``sum_n G_nn D[s_n] + sum_{n<m} G_nm [(s_n rho s_m^+ - ...) + h.c.]``."""
    n = rates.shape[0]
    down = [embed_pauli(n, k, "-") for k in range(n)]
    D = np.zeros((4**n, 4**n), dtype=complex)
    for a in range(n):
        if rates[a, a] != 0:
            D += dissipator_superop(down[a], rates[a, a])
        for b in range(a + 1, n):
            if rates[a, b] != 0:
                D += cross_dissipator_superop(down[a], down[b], rates[a, b])
    return D


def _collapse_from_rates(rates: np.ndarray) -> list[np.ndarray]:
    n = rates.shape[0]
    down = [embed_pauli(n, k, "-") for k in range(n)]
    lam, vecs = np.linalg.eigh(rates)
    ops = []
    for k in range(n):
        if lam[k] > ZERO_TOL * max(1.0, np.abs(rates).max()):
            ops.append(math.sqrt(lam[k]) * sum(vecs[j, k] * down[j] for j in range(n)))
    return ops


def build_simulator_generator(
    layout: GiantAtomLayout,
    omegas: Sequence[float],
    drives: Sequence[float] | None = None,
    omega_ref: float | None = None,
) -> SimulatorGenerator:
    """Full master-equation generator of the simulator at fixed frequencies.

    ``omega_ref=None`` keeps the lab-frame terms ``omega_n sigma_n^z / 2``;
    otherwise the frame rotates at ``omega_ref`` and only detunings remain.
    """
    n = layout.n_atoms
    omegas = np.broadcast_to(np.asarray(omegas, float), (n,))
    drives = np.zeros(n) if drives is None else np.broadcast_to(np.asarray(drives, float), (n,))
    p = atom_parameters(layout, omegas)
    rates = p.rate_matrix
    lam = np.linalg.eigvalsh(rates)
    if lam.min() < -ZERO_TOL * max(1.0, np.abs(rates).max()):
        raise ValueError("dissipation matrix is not positive semidefinite")
    ref = 0.0 if omega_ref is None else omega_ref
    H = exchange_hamiltonian(p.g)
    for k in range(n):
        H = H + 0.5 * (omegas[k] - ref) * embed_pauli(n, k, "z")
        if drives[k]:
            H = H + drives[k] * embed_pauli(n, k, "x")
    L = hamiltonian_superop(H) + rate_matrix_dissipator(rates)
    return SimulatorGenerator(L, H, _collapse_from_rates(rates), p)


# ------------------------------------------------------- frequency search


def _max_decay(layout: GiantAtomLayout, w: float) -> float:
    return float(atom_parameters(layout, [w] * layout.n_atoms).gamma_individual.max())


def decoherence_free_frequencies(layout: GiantAtomLayout, upper: float = 5.0, points: int = 4001) -> list[float]:
    """All common frequencies in ``(0, upper*omega0]`` where every atom is dark
    and some exchange coupling survives."""
    if any(len(a) < 2 for a in layout.atoms):
        raise NoDecoherenceFreePoint("a single-point atom decays at gamma at every frequency")
    w0 = layout.omega0
    grid = np.linspace(1e-6 * w0, upper * w0, points)
    # a zero of a sum of |.|^2 terms is a local minimum touching zero; search
    # the minima of sqrt(Gamma) which crosses zero linearly
    amp = np.array([_signed_amplitude(layout, w) for w in grid])
    found = []
    for i in range(len(grid) - 1):
        a, b = amp[i], amp[i + 1]
        if a == 0 or a * b < 0:
            w = grid[i] if a == 0 else brentq(lambda x: _signed_amplitude(layout, x), grid[i], grid[i + 1], xtol=1e-14 * w0)
            p = atom_parameters(layout, [w] * layout.n_atoms)
            if p.gamma_individual.max() < ZERO_TOL * layout.gamma and np.abs(p.g).max() > 0.01 * layout.gamma:
                if not found or abs(w - found[-1]) > 1e-9 * w0:
                    found.append(float(w))
    return found


def _signed_amplitude(layout: GiantAtomLayout, w: float) -> float:
    # Re(exp(-i phi_mid) s) for the first atom changes sign at its dark points;
    # other atoms are checked after refinement
    pts = np.asarray(layout.atoms[0]) * (w / layout.v)
    mid = 0.5 * (pts.min() + pts.max())
    return float(np.real(np.exp(1j * (pts - mid)).sum()))


def decoherence_free_frequency(layout: GiantAtomLayout, above: float = 2.0) -> float:
    """Smallest decoherence-free frequency above ``above * omega0``.

    The default bound keeps the maximum-decay frequency ``2 omega0`` of the
    presets below the returned point, which gives ``2.5 omega0`` for them.
    """
    w0 = layout.omega0
    for w in decoherence_free_frequencies(layout):
        if w > above * w0 * (1 + 1e-12):
            return w
    raise NoDecoherenceFreePoint(f"no decoherence-free point in ({above} omega0, 5 omega0]")


def parameter_sweep(layout: GiantAtomLayout, omega_grid: Sequence[float]) -> tuple[list[str], np.ndarray]:
    """Rows of ``omega/omega0, g_ab..., Gamma_n..., Gamma_ab...`` for common frequencies.

    Couplings and rates are in units of ``gamma``.
    """
    n = layout.n_atoms
    pairs = list(itertools.combinations(range(n), 2))
    header = (
        ["omega_over_omega0"]
        + [f"g_{a + 1}{b + 1}_over_gamma" for a, b in pairs]
        + [f"gamma_{k + 1}_over_gamma" for k in range(n)]
        + [f"gamma_{a + 1}{b + 1}_over_gamma" for a, b in pairs]
    )
    w0 = layout.omega0
    rows = []
    for w in omega_grid:
        p = atom_parameters(layout, [w] * n)
        rows.append(
            [w / w0]
            + [p.g[a, b] / layout.gamma for a, b in pairs]
            + list(p.gamma_individual / layout.gamma)
            + [p.gamma_collective[a, b] / layout.gamma for a, b in pairs]
        )
    return header, np.array(rows)


def plan_selective_coupling(
    layout: GiantAtomLayout,
    target_pair: tuple[int, int] | None = None,
    decay_atom: int | None = None,
) -> list[float]:
    """Per-atom frequencies that switch on one coupling (or one decay) only.

    Indices are zero-based. Non-target atoms are parked at dark frequencies
    ``omega_DF + k omega0`` tried in the order 0, +1, -1, +2, -2; every
    non-target pair must then be detuned by at least ``omega0/2`` or have no
    coupling at all.
    """
    if (target_pair is None) == (decay_atom is None):
        raise ValueError("give exactly one of target_pair or decay_atom")
    n = layout.n_atoms
    w0 = layout.omega0
    wdf = decoherence_free_frequency(layout)
    gam = layout.gamma
    parking = [wdf + k * w0 for k in (0, 1, -1, 2, -2) if wdf + k * w0 > 0]
    if target_pair is not None:
        a, b = sorted(target_pair)
        if a == b or not (0 <= a < n and 0 <= b < n):
            raise IndexError(f"invalid pair {target_pair}")
        fixed = {a: wdf, b: wdf}
    else:
        if not 0 <= decay_atom < n:
            raise IndexError(f"invalid atom {decay_atom}")
        fixed = {decay_atom: wdf - 0.5 * w0}
    free = [k for k in range(n) if k not in fixed]
    for choice in itertools.product(parking, repeat=len(free)):
        omegas = np.empty(n)
        for k, w in fixed.items():
            omegas[k] = w
        for k, w in zip(free, choice):
            omegas[k] = w
        if _is_selective(layout, omegas, target_pair, decay_atom, gam, w0):
            return [float(w) for w in omegas]
    raise InfeasiblePlan("no parking assignment isolates the requested target")


def _is_selective(layout, omegas, target_pair, decay_atom, gam, w0) -> bool:
    n = layout.n_atoms
    p = atom_parameters(layout, omegas)
    tol = ZERO_TOL * gam
    target = tuple(sorted(target_pair)) if target_pair is not None else None
    for k in range(n):
        if k == decay_atom:
            if p.gamma_individual[k] < 0.01 * gam:
                return False
        elif p.gamma_individual[k] > tol:
            return False
    for a, b in itertools.combinations(range(n), 2):
        if (a, b) == target:
            if abs(p.g[a, b]) < 0.01 * gam:
                return False
            continue
        detuned = abs(omegas[a] - omegas[b]) >= 0.5 * w0 * (1 - 1e-12)
        silent = abs(p.g[a, b]) < tol and abs(p.gamma_collective[a, b]) < tol
        if not (detuned or silent):
            return False
    return True


@dataclass(frozen=True)
class MarkovianityReport:
    ok: bool
    gamma_tau: float


def markovianity_check(layout: GiantAtomLayout, gamma: float | None = None, threshold: float = 0.01) -> MarkovianityReport:
    """``gamma * tau`` with ``tau`` the travel time across the widest pair of coupling points."""
    gam = layout.gamma if gamma is None else gamma
    gt = gam * layout.max_distance / layout.v
    ok = gt <= threshold
    if not ok:
        warnings.warn(f"gamma*tau = {gt:.3g} > {threshold}: Markovian description unreliable", MarkovianityWarning, stacklevel=2)
    return MarkovianityReport(ok, gt)
