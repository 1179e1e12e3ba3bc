"""Sweeps that turn the model, protocol and analysis pieces into figure-level data.

Target-model quantities are in units of ``g``; simulated times are in units of ``1/g``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .analysis import (
    asymptotic_rate,
    classify_dynamics,
    find_crossover,
    fit_effective_rate,
    liouvillian_spectrum,
    simulation_error,
    steady_state,
    transition_point,
)
from .core import DensityMatrix, apply_superop, evolve_no_jump, population, product_state, propagate_series
from .models import TwoQubitModel, coherent_part, dissipative_part, two_qubit_effective_hamiltonian, two_qubit_liouvillian
from .protocol import (
    PhysicalParams,
    SimOptions,
    default_layout,
    physical_params,
    protocol_series,
    trotter_reference,
)

BASELINES = ("steady", "final")


def initial_state() -> DensityMatrix:
    """Qubit 2 excited, qubit 1 in its ground state."""
    return product_state([0, 1])


def default_window(omega: float) -> float:
    return 5 * math.pi if omega else 3 * math.pi


def time_grid(window: float, n_points: int | None = None) -> np.ndarray:
    """Uniform grid on ``[0, window]`` with spacing ``pi/10`` unless ``n_points`` is given."""
    if n_points is None:
        n_points = int(round(window / (0.1 * math.pi))) + 1
    if n_points < 3:
        raise ValueError("need at least 3 time points")
    return np.linspace(0.0, window, n_points)


def _map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def exact_n2(model: TwoQubitModel, t_grid, rho0=None) -> np.ndarray:
    rho0 = initial_state() if rho0 is None else rho0
    return np.array([population(r, 1) for r in propagate_series(two_qubit_liouvillian(model), rho0, t_grid)])


def no_jump_n2(model: TwoQubitModel, t_grid, rho0=None) -> tuple[np.ndarray, np.ndarray]:
    """Normalized ``n2`` and the no-jump probability under the effective Hamiltonian."""
    rho0 = initial_state() if rho0 is None else rho0
    H = two_qubit_effective_hamiltonian(model)
    states = [evolve_no_jump(H, rho0, t) for t in t_grid]
    return np.array([population(r, 1, normalize=True) for r in states]), np.array([r.trace for r in states])


def steady_n2(model: TwoQubitModel) -> float:
    if model.gamma == 0:
        raise ValueError("no unique steady state without decay")
    return population(steady_state(two_qubit_liouvillian(model)), 1)


def _baseline(model: TwoQubitModel, n2: np.ndarray, baseline: str) -> float:
    if baseline not in BASELINES:
        raise ValueError(f"baseline must be one of {BASELINES}")
    if model.omega == 0:
        return 0.0
    return float(n2[-1]) if baseline == "final" else steady_n2(model)


def fitted_rate(model: TwoQubitModel, t_grid, n2, baseline: str = "steady") -> float:
    return fit_effective_rate(t_grid, n2, _baseline(model, np.asarray(n2), baseline)).rate


@dataclass
class ProtocolSetup:
    """Hardware description shared by every protocol run in a sweep."""

    layout: object = None
    phys: PhysicalParams | None = None
    opts: SimOptions = SimOptions()

    def __post_init__(self):
        if self.layout is None:
            self.layout = default_layout()
        if self.phys is None:
            self.phys = physical_params(self.layout)


def protocol_n2(model: TwoQubitModel, t_grid, l: int, setup: ProtocolSetup, normalize: bool = False) -> np.ndarray:
    states = protocol_series(setup.layout, model, t_grid, l, initial_state(), setup.phys, setup.opts)
    return np.array([population(r, 1, normalize=normalize) for r in states])


@dataclass
class ZenoSweep:
    gammas: np.ndarray
    omega: float
    window: float
    baseline: str
    rate_exact: np.ndarray
    rate_infinite: np.ndarray
    rate_sim: np.ndarray | None
    n2_inf: np.ndarray

    def crossovers(self) -> dict:
        out = {
            "finite_time_exact": find_crossover(self.gammas, self.rate_exact),
            "infinite_time": find_crossover(self.gammas, self.rate_infinite),
        }
        if self.rate_sim is not None:
            out["finite_time_simulated"] = find_crossover(self.gammas, self.rate_sim)
        return out

    def rows(self):
        for k, g in enumerate(self.gammas):
            sim = self.rate_sim[k] if self.rate_sim is not None else float("nan")
            yield g, self.rate_exact[k], sim, self.rate_infinite[k], self.n2_inf[k]


ZENO_HEADER = ["gamma_over_g", "rate_exact_over_g", "rate_sim_over_g", "rate_infinite_over_g", "n2_inf"]


def infinite_time_rate(model: TwoQubitModel) -> float:
    return asymptotic_rate(liouvillian_spectrum(two_qubit_liouvillian(model), initial_state()))


def zeno_sweep(
    gammas: Sequence[float],
    omega: float = 0.0,
    window: float | None = None,
    n_points: int | None = None,
    baseline: str = "steady",
    l: int | None = None,
    setup: ProtocolSetup | None = None,
    threads: int = 1,
) -> ZenoSweep:
    """Fitted finite-time rates (exact and, if ``l`` is given, simulated) and infinite-time rates."""
    gammas = np.asarray(gammas, dtype=float)
    window = default_window(omega) if window is None else window
    tg = time_grid(window, n_points)
    if l is not None and setup is None:
        setup = ProtocolSetup()

    def one(gam):
        m = TwoQubitModel(1.0, omega, gam)
        ex = exact_n2(m, tg)
        n_inf = steady_n2(m) if gam > 0 else float("nan")
        r_ex = fitted_rate(m, tg, ex, baseline)
        r_inf = infinite_time_rate(m)
        r_sim = float("nan")
        if l is not None:
            r_sim = fitted_rate(m, tg, protocol_n2(m, tg, l, setup), baseline)
        return r_ex, r_inf, r_sim, n_inf

    res = np.array(_map(one, list(gammas), threads))
    return ZenoSweep(
        gammas=gammas,
        omega=omega,
        window=window,
        baseline=baseline,
        rate_exact=res[:, 0],
        rate_infinite=res[:, 1],
        rate_sim=res[:, 2] if l is not None else None,
        n2_inf=res[:, 3],
    )


@dataclass
class TransitionSweep:
    gammas: np.ndarray
    labels_exact: list
    labels_sim: list | None

    def transitions(self) -> dict:
        out = {"exact": transition_point(self.gammas, self.labels_exact)}
        if self.labels_sim is not None:
            out["simulated"] = transition_point(self.gammas, self.labels_sim)
            out["relative_difference"] = abs(out["simulated"] - out["exact"]) / out["exact"]
        return out

    def rows(self):
        for k, g in enumerate(self.gammas):
            yield g, self.labels_exact[k], (self.labels_sim[k] if self.labels_sim is not None else "")


TRANSITION_HEADER = ["gamma_over_g", "exact", "simulated"]


def nonhermitian_sweep(
    gammas: Sequence[float],
    window: float = 3 * math.pi,
    n_points: int = 121,
    l: int | None = None,
    setup: ProtocolSetup | None = None,
    threads: int = 1,
) -> TransitionSweep:
    """Oscillatory/non-oscillatory labels of the post-selected (normalized) ``n2``."""
    gammas = np.asarray(gammas, dtype=float)
    tg = np.linspace(0.0, window, n_points)
    if l is not None and setup is None:
        setup = ProtocolSetup(opts=SimOptions(mode="no_jump"))

    def one(gam):
        m = TwoQubitModel(1.0, 0.0, gam)
        lab = classify_dynamics(tg, no_jump_n2(m, tg)[0], window=window)
        sim = None
        if l is not None:
            sim = classify_dynamics(tg, protocol_n2(m, tg, l, setup, normalize=True), window=window)
        return lab, sim

    res = _map(one, list(gammas), threads)
    return TransitionSweep(gammas, [r[0] for r in res], [r[1] for r in res] if l is not None else None)


def trotter_error_map(
    gamma: float,
    omega: float,
    l_values: Sequence[int],
    t_grid,
    ideal: bool = False,
    order: int = 2,
    setup: ProtocolSetup | None = None,
    threads: int = 1,
) -> np.ndarray:
    """``delta(t, l)`` with rows indexed by ``l``.

    ``ideal=True`` uses the exact Trotter splitting of the target model instead of
    the hardware schedule. ``t = 0`` entries are zero.
    """
    m = TwoQubitModel(1.0, omega, gamma)
    tg = np.asarray(t_grid, dtype=float)
    ex = exact_n2(m, tg)
    n_inf = steady_n2(m) if gamma > 0 else 0.0
    if ideal:
        L1, L2 = coherent_part(m), dissipative_part(m)
        rho0 = initial_state()

        def sim_row(l):
            return np.array(
                [population(rho0, 1) if t == 0 else population(apply_superop(trotter_reference(L1, L2, t, l, order), rho0), 1) for t in tg]
            )
    else:
        setup = ProtocolSetup() if setup is None else setup

        def sim_row(l):
            return protocol_n2(m, tg, l, setup)

    rows = _map(sim_row, list(l_values), threads)
    out = np.array([simulation_error(r, ex, n_inf) for r in rows])
    out[:, tg == 0] = 0.0
    return out


def max_error_slope(l_values: Sequence[int], errors: np.ndarray) -> float:
    """Slope of ``log(max_t delta)`` against ``log l``, ignoring non-finite entries."""
    mx = np.array([np.max(row[np.isfinite(row)]) for row in errors])
    return float(np.polyfit(np.log(np.asarray(l_values, dtype=float)), np.log(mx), 1)[0])

