import math

import numpy as np
import pytest

from giantatoms.core import matrix_exponential, population
from giantatoms.experiments import (
    ProtocolSetup,
    exact_n2,
    fitted_rate,
    initial_state,
    max_error_slope,
    no_jump_n2,
    protocol_n2,
    steady_n2,
    time_grid,
    trotter_error_map,
    zeno_sweep,
)
from giantatoms.models import TwoQubitModel, coherent_part, dissipative_part, two_qubit_liouvillian
from giantatoms.protocol import trotter_reference


def test_time_grid_spacing():
    t = time_grid(3 * math.pi)
    assert len(t) == 31
    assert t[1] == pytest.approx(0.1 * math.pi)
    with pytest.raises(ValueError):
        time_grid(1.0, 2)


def test_initial_state():
    rho = initial_state()
    assert population(rho, 0) == 0.0 and population(rho, 1) == 1.0


def test_undriven_rate_uses_zero_baseline():
    m = TwoQubitModel(1.0, 0.0, 6.0)
    t = time_grid(3 * math.pi)
    n2 = exact_n2(m, t)
    assert fitted_rate(m, t, n2, "steady") == fitted_rate(m, t, n2, "final")


def test_driven_steady_population_positive():
    assert 0 < steady_n2(TwoQubitModel(1.0, 0.1, 6.0)) < 0.05
    with pytest.raises(ValueError):
        steady_n2(TwoQubitModel(1.0, 0.1, 0.0))


def test_no_jump_probability_monotone():
    _, P = no_jump_n2(TwoQubitModel(1.0, 0.0, 3.9), np.linspace(0, 3 * math.pi, 31))
    assert P[0] == pytest.approx(1.0)
    assert np.all(np.diff(P) <= 1e-15)


def test_propagator_splitting_orders():
    # operator-level oracle: the splitting error itself is first/second order
    m = TwoQubitModel(1.0, 0.1, 6.0)
    L1, L2 = coherent_part(m), dissipative_part(m)
    exact = matrix_exponential(two_qubit_liouvillian(m) * 2.0)
    ls = [20, 40, 80, 160]
    for order, slope in ((1, -1.0), (2, -2.0)):
        err = [np.linalg.norm(trotter_reference(L1, L2, 2.0, l, order) - exact, 2) for l in ls]
        fit = np.polyfit(np.log(ls), np.log(err), 1)[0]
        assert fit == pytest.approx(slope, abs=0.1)


def test_first_order_boundary_invisible_in_n2():
    # with qubit 1 initially empty and n2 measured, the first-order splitting terms cancel
    t = np.linspace(0.0, 0.5 * math.pi, 6)
    e1 = trotter_error_map(2.0, 0.0, [20, 40, 80], t, ideal=True, order=1)
    assert max_error_slope([20, 40, 80], e1) == pytest.approx(-2.0, abs=0.15)


def test_trotter_error_map_zero_at_origin():
    t = time_grid(math.pi, 6)
    e = trotter_error_map(6.0, 0.0, [10, 20], t, ideal=True)
    assert e.shape == (2, 6)
    assert np.all(e[:, 0] == 0)


def test_protocol_matches_exact_without_decay():
    m = TwoQubitModel(1.0, 0.0, 0.0)
    t = time_grid(math.pi, 5)
    assert np.allclose(protocol_n2(m, t, 4, ProtocolSetup()), np.cos(t) ** 2, atol=1e-8)


def test_zeno_sweep_exact_only():
    z = zeno_sweep(np.arange(3.0, 4.61, 0.1), n_points=31)
    assert z.rate_sim is None
    c = z.crossovers()
    assert set(c) == {"finite_time_exact", "infinite_time"}
    assert len(list(z.rows())) == len(z.gammas)
