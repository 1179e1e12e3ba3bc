"""Spectral analysis of Liouvillians, effective-rate fits and crossover detection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DensityMatrix, as_matrix, embed_pauli, n_qubits_of

EIG_TOL = 1e-9
DEFECT_COND = 1e10
OSCILLATION_TOL = 1e-3


class SpectrumError(RuntimeError):
    pass


class DegenerateSteadyState(ValueError):
    pass


class CrossoverNotBracketed(ValueError):
    pass


@dataclass
class SpectralData:
    """Eigen-decomposition of a Liouvillian together with the overlaps of an initial state.

    ``eigenvalues`` holds one entry per cluster of (numerically) equal eigenvalues.
    ``projections[k]`` is the component of ``rho0`` in that cluster, so that
    ``rho(t) = sum_k exp(eigenvalues[k] t) projections[k]`` for diagonalizable ``L``.
    ``right``/``left``/``overlaps`` are the raw per-eigenvalue data, normalized so that
    ``Tr[left[m]^dagger right[n]] = delta_mn``; they are ``None`` when ``defective``.
    """

    eigenvalues: np.ndarray
    multiplicity: np.ndarray
    projections: np.ndarray
    sz2_weight: np.ndarray
    steady_state: DensityMatrix | None
    defective: bool
    condition: float
    raw_eigenvalues: np.ndarray = field(repr=False, default=None)
    right: np.ndarray | None = field(repr=False, default=None)
    left: np.ndarray | None = field(repr=False, default=None)
    overlaps: np.ndarray | None = field(repr=False, default=None)

    @property
    def abs_overlap(self) -> np.ndarray:
        return np.linalg.norm(self.projections.reshape(len(self.projections), -1), axis=1)

    def reconstruct(self, t: float) -> np.ndarray:
        return np.einsum("k,kij->ij", np.exp(self.eigenvalues * t), self.projections)

    def rows(self):
        for w, a, s in zip(self.eigenvalues, self.abs_overlap, self.sz2_weight):
            yield w.real, w.imag, a, s


def _clusters(w: np.ndarray, tol: float) -> list[list[int]]:
    order = np.lexsort((w.imag, w.real))
    groups: list[list[int]] = []
    for i in order:
        for grp in groups:
            if abs(w[grp[0]] - w[i]) <= tol:
                grp.append(i)
                break
        else:
            groups.append([i])
    return groups


def liouvillian_spectrum(L: np.ndarray, rho0) -> SpectralData:
    L = np.asarray(L, dtype=complex)
    r0 = as_matrix(rho0)
    d = r0.shape[0]
    if L.shape != (d * d, d * d):
        raise ValueError("Liouvillian and state dimensions disagree")
    # entries far below rounding level only derail LAPACK's balancing
    L = np.where(np.abs(L) < np.finfo(float).eps * np.abs(L).max(), 0.0, L)
    try:
        w, V = np.linalg.eig(L)
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise SpectrumError("eigensolver returned non-finite values")
    cond = float(np.linalg.cond(V))
    defective = cond > DEFECT_COND
    scale = max(1.0, float(np.abs(w).max()))
    # eigenvalues at an exceptional point of order k split by ~eps**(1/k)
    tol = (np.finfo(float).eps ** (1 / 3) if defective else EIG_TOL) * scale

    c = Vinv @ r0.reshape(-1, order="F")
    z2 = embed_pauli(n_qubits_of(d), 1, "z") if d >= 4 else embed_pauli(1, 0, "z")
    groups = _clusters(w, tol)
    vals, mult, projs, sz2 = [], [], [], []
    for grp in groups:
        vals.append(w[grp].mean())
        mult.append(len(grp))
        p = (V[:, grp] @ c[grp]).reshape(d, d, order="F")
        projs.append(p)
        sz2.append(abs(np.trace(z2 @ p)))
    vals = np.array(vals)
    if vals.real.max() > 1e-10 * scale:
        raise SpectrumError(f"eigenvalue with positive real part {vals.real.max():.3e}")

    ss = None
    try:
        ss = steady_state(L)
    except DegenerateSteadyState:
        pass

    right = left = overlaps = None
    if not defective:
        norms = np.linalg.norm(V, axis=0)
        right = (V / norms).T.reshape(-1, d, d).transpose(0, 2, 1)
        # rows of inv(V) give conj(vec(left))
        left = (Vinv.conj() * norms[:, None]).reshape(-1, d, d).transpose(0, 2, 1)
        overlaps = c * norms
    return SpectralData(
        eigenvalues=vals,
        multiplicity=np.array(mult),
        projections=np.array(projs),
        sz2_weight=np.array(sz2),
        steady_state=ss,
        defective=defective,
        condition=cond,
        raw_eigenvalues=w,
        right=right,
        left=left,
        overlaps=overlaps,
    )


def steady_state(L: np.ndarray, tol: float = 1e-10) -> DensityMatrix:
    """Unique trace-one fixed point of a trace-preserving Liouvillian."""
    L = np.asarray(L, dtype=complex)
    d = math.isqrt(L.shape[0])
    _, s, vh = np.linalg.svd(L)
    scale = max(s[0], 1.0)
    null = int(np.sum(s < tol * scale * 10))
    if null != 1:
        raise DegenerateSteadyState(f"steady-state manifold has dimension {null}")
    m = vh[-1].conj().reshape(d, d, order="F")
    m = 0.5 * (m + m.conj().T)
    m = m / np.trace(m).real
    resid = np.linalg.norm(L @ m.reshape(-1, order="F"))
    if resid > tol * scale * 100:
        raise SpectrumError(f"steady-state residual {resid:.2e}")
    return DensityMatrix(m)


def asymptotic_rate(spec: SpectralData, tol: float = 1e-8) -> float:
    """Decay rate of ``n2 - n2(inf)`` set by the slowest mode that carries qubit-2 weight."""
    scale = max(1.0, float(np.abs(spec.eigenvalues).max()))
    mask = (np.abs(spec.eigenvalues) > 1e-9 * scale) & (spec.sz2_weight > tol)
    if not mask.any():
        raise ValueError("no decaying mode overlaps the initial state")
    return float(-spec.eigenvalues[mask].real.max())


def slowest_overlapping_imag(spec: SpectralData, tol: float = 1e-8) -> float:
    """``max |Im omega|`` among the slowest modes that carry qubit-2 weight."""
    scale = max(1.0, float(np.abs(spec.eigenvalues).max()))
    mask = (np.abs(spec.eigenvalues) > 1e-9 * scale) & (spec.sz2_weight > tol)
    if not mask.any():
        return 0.0
    slow = spec.eigenvalues[mask].real.max()
    sel = mask & (np.abs(spec.eigenvalues.real - slow) <= 1e-6 * scale)
    return float(np.abs(spec.eigenvalues[sel].imag).max())


def overlapping_imag(spec: SpectralData, tol: float = 1e-8) -> float:
    """``max |Im omega|`` over all decaying modes that carry qubit-2 weight."""
    scale = max(1.0, float(np.abs(spec.eigenvalues).max()))
    mask = (np.abs(spec.eigenvalues) > 1e-9 * scale) & (spec.sz2_weight > tol)
    return float(np.abs(spec.eigenvalues[mask].imag).max()) if mask.any() else 0.0


@dataclass
class FitResult:
    rate: float
    intercept: float
    residual: float
    window: tuple
    excluded_points: list

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "intercept": self.intercept,
            "residual": self.residual,
            "window": list(self.window),
            "excluded_points": list(self.excluded_points),
        }


def fit_effective_rate(t, n2, n2_inf: float = 0.0, window=None) -> FitResult:
    """Least-squares fit of ``log(n2 - n2_inf) = -rate * t + C``.

    Points inside the window where ``n2 <= n2_inf`` are dropped and listed in
    ``excluded_points``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(n2, dtype=float) - n2_inf
    if t.shape != y.shape:
        raise ValueError("time and population arrays differ in length")
    lo, hi = (t[0], t[-1]) if window is None else window
    inside = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    good = inside & (y > 0)
    excluded = [float(x) for x in t[inside & ~good]]
    if good.sum() < 3:
        raise ValueError("fewer than 3 usable points for the fit")
    slope, icpt = np.polyfit(t[good], np.log(y[good]), 1)
    res = np.log(y[good]) - (slope * t[good] + icpt)
    return FitResult(float(-slope), float(icpt), float(np.sqrt(np.mean(res**2))), (float(lo), float(hi)), excluded)


def find_crossover(gamma_grid, rates) -> float:
    """Location of the maximum of ``rates`` refined by a parabola through the peak triple."""
    x = np.asarray(gamma_grid, dtype=float)
    y = np.asarray(rates, dtype=float)
    if len(x) < 5 or x.shape != y.shape:
        raise ValueError("need at least 5 matching grid points")
    if not np.all(np.isfinite(y)):
        raise ValueError("rates must be finite")
    i = int(np.argmax(y))  # first maximum, i.e. smallest Gamma on ties
    if i == 0 or i == len(x) - 1:
        raise CrossoverNotBracketed("maximum at the edge of the grid")
    x0, x1, x2 = x[i - 1 : i + 2]
    y0, y1, y2 = y[i - 1 : i + 2]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / den
    if a >= 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), x0, x2))


def simulation_error(n2_sim, n2_exact, n2_inf: float, floor: float = 1e-12) -> np.ndarray:
    """``|n2_sim - n2| / |n2 - n2_inf|``; ``inf`` where the denominator is below ``floor``."""
    a = np.asarray(n2_sim, dtype=float)
    b = np.asarray(n2_exact, dtype=float)
    if a.shape != b.shape:
        raise ValueError("series lengths differ")
    den = np.abs(b - n2_inf)
    out = np.full(a.shape, np.inf)
    ok = den >= floor
    out[ok] = np.abs(a[ok] - b[ok]) / den[ok]
    return out


def classify_dynamics(t, n2, window: float = 3 * math.pi, tol: float = OSCILLATION_TOL) -> str:
    """``"oscillatory"`` if ``n2`` has an interior minimum followed by a rebound of at least ``tol``.

    ``n2`` should already be normalized (post-selected populations divide by the trace).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(n2, dtype=float)
    if len(t) < 5 or t[-1] - t[0] < window * (1 - 1e-9):
        raise ValueError("series shorter than the classification window")
    for i in range(1, len(y) - 1):
        if y[i] <= y[i - 1] and y[i] < y[i + 1] and y[i + 1 :].max() - y[i] >= tol:
            return "oscillatory"
    return "non_oscillatory"


def transition_point(gamma_grid, labels) -> float:
    """First grid value from which every label is non-oscillatory."""
    g = np.asarray(gamma_grid, dtype=float)
    labels = list(labels)
    if len(g) != len(labels):
        raise ValueError("grid and labels differ in length")
    for i in range(len(g)):
        if all(lab == "non_oscillatory" for lab in labels[i:]):
            if i == 0:
                raise CrossoverNotBracketed("no oscillatory point on the grid")
            return float(g[i])
    raise CrossoverNotBracketed("no non-oscillatory point on the grid")


def pt_transition(gamma_grid, liouvillian_of, rho0, tol: float = 1e-9) -> float:
    """First ``Gamma`` at which the slowest overlapping modes become purely real."""
    for gam in gamma_grid:
        spec = liouvillian_spectrum(liouvillian_of(gam), rho0)
        if overlapping_imag(spec) < tol:
            return float(gam)
    raise CrossoverNotBracketed("spectrum never becomes real on the grid")


SPECTRUM_HEADER = ["re_omega", "im_omega", "abs_overlap", "sz2_weight"]
