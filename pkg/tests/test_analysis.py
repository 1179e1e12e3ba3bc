import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from giantatoms.analysis import (
    CrossoverNotBracketed,
    DegenerateSteadyState,
    asymptotic_rate,
    classify_dynamics,
    find_crossover,
    fit_effective_rate,
    liouvillian_spectrum,
    pt_transition,
    simulation_error,
    steady_state,
    transition_point,
)
from giantatoms.core import DensityMatrix, dissipator_superop, embed_pauli, product_state, propagate, vec
from giantatoms.models import TwoQubitModel, two_qubit_liouvillian

RHO0 = product_state([0, 1])


def test_single_qubit_decay_spectrum():
    L = dissipator_superop(embed_pauli(1, 0, "-"), 2.0)
    spec = liouvillian_spectrum(L, product_state([1]))
    assert np.allclose(np.sort(spec.raw_eigenvalues.real), [-2.0, -1.0, -1.0, 0.0], atol=1e-12)
    assert np.allclose(spec.steady_state.matrix, np.diag([0.0, 1.0]))


@pytest.mark.parametrize("model", [TwoQubitModel(1.0, 0.0, 2.0), TwoQubitModel(1.0, 0.1, 6.0), TwoQubitModel(1.0, 0.0, 4.3)])
def test_eigen_expansion_matches_propagator(model):
    L = two_qubit_liouvillian(model)
    spec = liouvillian_spectrum(L, RHO0)
    for t in (0.0, 0.5, 3.0, 9.0):
        ref = propagate(L, RHO0, t).matrix
        assert np.abs(spec.reconstruct(t) - ref).max() < 1e-8


def test_exceptional_point_flagged_defective():
    # the expansion is not defined here; only the flag and the clustered values are
    spec = liouvillian_spectrum(two_qubit_liouvillian(TwoQubitModel(1.0, 0.0, 4.0)), RHO0)
    assert spec.defective


def test_biorthonormal_modes():
    spec = liouvillian_spectrum(two_qubit_liouvillian(TwoQubitModel(1.0, 0.1, 2.0)), RHO0)
    gram = np.einsum("mij,nij->mn", spec.left.conj(), spec.right)
    assert np.allclose(gram, np.eye(16), atol=1e-10)


def test_steady_state_driven():
    L = two_qubit_liouvillian(TwoQubitModel(1.0, 0.1, 3.0))
    ss = steady_state(L)
    assert np.abs(L @ vec(ss.matrix)).max() < 1e-12
    assert ss.min_eigenvalue() > -1e-12


def test_steady_state_degenerate():
    with pytest.raises(DegenerateSteadyState):
        steady_state(two_qubit_liouvillian(TwoQubitModel(1.0, 0.0, 0.0)))


def test_asymptotic_rate_underdamped():
    # below the exceptional point the slowest single-excitation mode decays at Gamma/2 in n2
    for gam in (0.5, 1.0, 3.0):
        spec = liouvillian_spectrum(two_qubit_liouvillian(TwoQubitModel(1.0, 0.0, gam)), RHO0)
        assert asymptotic_rate(spec) == pytest.approx(gam / 2, abs=1e-9)


def test_asymptotic_rate_overdamped():
    # above it: Gamma/2 - sqrt(Gamma^2/4 - 4 g^2)
    for gam in (5.0, 8.0):
        spec = liouvillian_spectrum(two_qubit_liouvillian(TwoQubitModel(1.0, 0.0, gam)), RHO0)
        assert asymptotic_rate(spec) == pytest.approx(gam / 2 - math.sqrt(gam**2 / 4 - 4), abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.2, 8.0), st.floats(0.0, 0.5))
def test_rate_scales_with_coupling(scale, gam, omega):
    # eigenvalues at the exceptional point are only accurate to ~eps**(1/3)
    assume(abs(gam - 4.0) > 1e-3)
    a = liouvillian_spectrum(two_qubit_liouvillian(TwoQubitModel(1.0, omega, gam)), RHO0)
    b = liouvillian_spectrum(two_qubit_liouvillian(TwoQubitModel(scale, omega * scale, gam * scale)), RHO0)
    assert asymptotic_rate(b) == pytest.approx(scale * asymptotic_rate(a), rel=1e-6, abs=1e-9)


def test_pt_transition_at_four():
    grid = np.round(np.arange(3.5, 4.5, 0.05), 10)
    g = pt_transition(grid, lambda x: two_qubit_liouvillian(TwoQubitModel(1.0, 0.0, x)), RHO0)
    assert abs(g - 4.0) <= 0.05 + 1e-12


def test_fit_recovers_exponential():
    t = np.linspace(0, 2, 21)
    r = fit_effective_rate(t, 0.7 * np.exp(-3 * t))
    assert r.rate == pytest.approx(3.0, rel=1e-12)
    assert r.intercept == pytest.approx(math.log(0.7))
    assert r.residual < 1e-12


def test_fit_with_baseline_and_exclusions():
    t = np.linspace(0, 2, 21)
    y = 0.1 + np.exp(-2 * t)
    y[5] = 0.05
    r = fit_effective_rate(t, y, n2_inf=0.1)
    assert r.excluded_points == [t[5]]
    assert r.rate == pytest.approx(2.0)
    with pytest.raises(ValueError):
        fit_effective_rate(t[:2], y[:2])


def test_find_crossover_parabola():
    x = np.linspace(0, 2, 11)
    assert find_crossover(x, -((x - 1.13) ** 2)) == pytest.approx(1.13)
    with pytest.raises(CrossoverNotBracketed):
        find_crossover(x, x)
    with pytest.raises(CrossoverNotBracketed):
        find_crossover(x, -x)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 1.9), st.floats(0.1, 10.0))
def test_find_crossover_stays_in_bracket(peak, width):
    x = np.linspace(0, 2, 21)
    y = np.exp(-((x - peak) ** 2) / width)
    c = find_crossover(x, y)
    i = int(np.argmax(y))
    if 0 < i < 20:
        assert x[i - 1] <= c <= x[i + 1]


def test_simulation_error():
    e = simulation_error([0.5, 0.3], [0.4, 0.2], 0.2)
    assert e[0] == pytest.approx(0.5)
    assert math.isinf(e[1])


def test_classify_dynamics():
    t = np.linspace(0, 3 * math.pi, 61)
    assert classify_dynamics(t, np.cos(t) ** 2) == "oscillatory"
    assert classify_dynamics(t, np.exp(-t)) == "non_oscillatory"
    with pytest.raises(ValueError):
        classify_dynamics(t[:10], np.exp(-t[:10]))


def test_transition_point():
    g = [1, 2, 3, 4]
    assert transition_point(g, ["oscillatory", "oscillatory", "non_oscillatory", "non_oscillatory"]) == 3
    assert transition_point(g, ["oscillatory", "non_oscillatory", "oscillatory", "non_oscillatory"]) == 4
    with pytest.raises(CrossoverNotBracketed):
        transition_point(g, ["non_oscillatory"] * 4)


def test_spectrum_rows_and_trace_mode():
    spec = liouvillian_spectrum(two_qubit_liouvillian(TwoQubitModel(1.0, 0.0, 2.0)), DensityMatrix(RHO0.matrix))
    rows = list(spec.rows())
    assert len(rows) == len(spec.eigenvalues)
    # the stationary cluster carries the full trace
    k = int(np.argmin(np.abs(spec.eigenvalues)))
    assert np.trace(spec.projections[k]).real == pytest.approx(1.0)
