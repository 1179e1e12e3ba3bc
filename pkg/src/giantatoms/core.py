"""Dense linear algebra for small qubit registers.

Conventions used throughout the package:

* Single-qubit basis is ordered ``(|1>, |0>)`` (excited first), so that
  ``sigma_z = diag(+1, -1)`` is +1 on the excited state and the population of a
  site is ``(1 + <sigma_z>) / 2``.
* Site 0 is the most significant factor of the tensor product.
* Density matrices are vectorized by stacking columns, ``vec(A X B) =
  (B^T kron A) vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10

_SINGLE = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # sigma^+ raises |0> -> |1>; with (|1>, |0>) ordering it sits above the diagonal
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class DensityMatrix:
    """A (possibly sub-normalized) density matrix.

    ``subnormalized`` records that the state came out of no-jump evolution, so
    that a post-selected state is never mistaken for a full-ensemble one.
    """

    matrix: np.ndarray
    subnormalized: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got {m.shape}")
        dim = m.shape[0]
        if dim & (dim - 1):
            raise DimensionError(f"dimension {dim} is not a power of two")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * max(1.0, np.abs(m).max()):
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if tr > 1 + HERMITIAN_TOL or tr <= 0:
            raise ValueError(f"trace {tr} outside (0, 1]")
        if not self.subnormalized and abs(tr - 1) > 1e-8:
            raise ValueError(f"trace {tr} != 1 for a normalized state")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "DensityMatrix":
        return DensityMatrix(self.matrix / self.trace)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())


def as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return np.asarray(rho, dtype=complex)


def n_qubits_of(dim: int) -> int:
    n = dim.bit_length() - 1
    if 1 << n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def basis_index(occupations: Sequence[int]) -> int:
    """Index of the product state with the given per-site occupations (1 = excited)."""
    idx = 0
    for occ in occupations:
        if occ not in (0, 1):
            raise ValueError("occupations must be 0 or 1")
        idx = 2 * idx + (1 - occ)
    return idx


def basis_state(occupations: Sequence[int]) -> np.ndarray:
    psi = np.zeros(2 ** len(occupations), dtype=complex)
    psi[basis_index(occupations)] = 1.0
    return psi


def pure_state(psi) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()))


def product_state(occupations: Sequence[int]) -> DensityMatrix:
    """``|n_0 n_1 ...><n_0 n_1 ...|``, e.g. ``product_state([0, 1])`` is ``|0>_1|1>_2``."""
    return pure_state(basis_state(occupations))


def embed_pauli(n_qubits: int, site: int, which: str) -> np.ndarray:
    """Single-site operator ``which`` in {x, y, z, +, -} acting on ``site``."""
    if not 0 <= site < n_qubits:
        raise IndexError(f"site {site} out of range for {n_qubits} qubits")
    try:
        op = _SINGLE[which]
    except KeyError:
        raise ValueError(f"unknown operator {which!r}") from None
    left = np.eye(2 ** site)
    right = np.eye(2 ** (n_qubits - site - 1))
    return np.kron(np.kron(left, op), right)


def vec(rho) -> np.ndarray:
    return as_matrix(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.shape[-1])))
    return v.reshape(v.shape[:-1] + (d, d), order="F")


def _check_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= tol * max(1.0, np.abs(m).max()))


def commutator_superop(H: np.ndarray) -> np.ndarray:
    """``-i[H, .]`` without a Hermiticity check (used for non-Hermitian pieces too)."""
    H = _check_square(H, "H")
    eye = np.eye(H.shape[0])
    return -1j * (np.kron(eye, H) - np.kron(H.T, eye))


def hamiltonian_superop(H: np.ndarray) -> np.ndarray:
    H = _check_square(H, "H")
    if not is_hermitian(H):
        raise ValueError("H is not Hermitian; use nonhermitian_superop for effective Hamiltonians")
    return commutator_superop(H)


def nonhermitian_superop(H_eff: np.ndarray) -> np.ndarray:
    """Generator of ``rho -> -i(H_eff rho - rho H_eff^dag)`` (no-jump evolution)."""
    H_eff = _check_square(H_eff, "H_eff")
    eye = np.eye(H_eff.shape[0])
    return -1j * (np.kron(eye, H_eff) - np.kron(H_eff.conj(), eye))


def dissipator_superop(X: np.ndarray, rate: float = 1.0) -> np.ndarray:
    """``rate * D[X]`` with ``D[X]rho = X rho X^dag - {X^dag X, rho}/2``."""
    if rate < 0:
        raise ValueError(f"negative rate {rate}")
    return cross_dissipator_superop(X, X, rate) / 2.0


def cross_dissipator_superop(A: np.ndarray, B: np.ndarray, rate: float = 1.0) -> np.ndarray:
    """``rate * [(A rho B^dag - {B^dag A, rho}/2) + h.c.]``.

    For ``A == B`` this is twice the ordinary dissipator.
    """
    A = _check_square(A, "A")
    B = _check_square(B, "B")
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    eye = np.eye(A.shape[0])
    BA = B.conj().T @ A
    AB = A.conj().T @ B
    jump = np.kron(B.conj(), A) + np.kron(A.conj(), B)
    anti = np.kron(eye, BA + AB) + np.kron((BA + AB).T, eye)
    return rate * (jump - 0.5 * anti)


# Pade(13) scaling-and-squaring (Higham 2005), batched over leading axes.
_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152


_PADE_LOW = {
    3: (1.495585217958292e-2, [120.0, 60.0, 12.0, 1.0]),
    5: (2.539398330063230e-1, [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0]),
    7: (9.504178996162932e-1, [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0]),
    9: (
        2.097847961257068,
        [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0],
    ),
}


def _pade_low(A: np.ndarray, b) -> tuple[np.ndarray, np.ndarray]:
    eye = np.broadcast_to(np.eye(A.shape[-1], dtype=complex), A.shape)
    A2 = A @ A
    powers = [eye, A2]
    while len(powers) < (len(b) + 1) // 2:
        powers.append(powers[-1] @ A2)
    U = sum(b[2 * k + 1] * P for k, P in enumerate(powers))
    V = sum(b[2 * k] * P for k, P in enumerate(powers))
    return A @ U, V


def matrix_exponential(M: np.ndarray) -> np.ndarray:
    """exp(M) for a square matrix or a stack of square matrices ``(..., n, n)``.

    The Pade degree is chosen from the largest 1-norm in the batch.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {M.shape}")
    batch_shape = M.shape[:-2]
    n = M.shape[-1]
    A = M.reshape((-1, n, n))
    norms = np.abs(A).sum(axis=-2).max(axis=-1)
    top = float(norms.max(initial=0.0))
    for m, (theta, b) in _PADE_LOW.items():
        if top <= theta:
            U, V = _pade_low(A, b)
            return np.linalg.solve(V - U, V + U).reshape(batch_shape + (n, n))
    with np.errstate(divide="ignore"):
        s = np.where(norms > _THETA13, np.ceil(np.log2(norms / _THETA13)), 0).astype(int)
    A = A / (2.0 ** s)[:, None, None]
    b = _PADE13
    eye = np.broadcast_to(np.eye(n, dtype=complex), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * eye)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * eye
    R = np.linalg.solve(V - U, V + U)
    for k in range(int(s.max(initial=0))):
        mask = s > k
        R[mask] = R[mask] @ R[mask]
    return R.reshape(batch_shape + (n, n))


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """``mats[-1] @ ... @ mats[0]`` (later factors act last), via pairwise reduction."""
    mats = np.asarray(mats)
    if mats.shape[0] == 0:
        raise ValueError("empty product")
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            head = mats[-1:]
            body = mats[:-1]
            body = body[1::2] @ body[0::2]
            mats = np.concatenate([body, head])
        else:
            mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _result_state(m: np.ndarray, subnormalized: bool = False) -> DensityMatrix:
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(m, subnormalized=subnormalized)


def apply_superop(S: np.ndarray, rho) -> np.ndarray:
    r = as_matrix(rho)
    if S.shape[-1] != r.size:
        raise DimensionError(f"superoperator of size {S.shape} cannot act on {r.shape} state")
    return unvec(S @ vec(r))


def propagate(L: np.ndarray, rho0, t: float) -> DensityMatrix:
    """``exp(L t) rho0`` for a time-independent generator."""
    if t < 0:
        raise ValueError("t must be non-negative")
    L = _check_square(L, "L")
    r0 = as_matrix(rho0)
    if L.shape[0] != r0.size:
        raise DimensionError(f"generator of size {L.shape} cannot act on {r0.shape} state")
    sub = isinstance(rho0, DensityMatrix) and rho0.subnormalized
    return _result_state(apply_superop(matrix_exponential(L * t), r0), sub)


def propagate_series(L: np.ndarray, rho0, times: Sequence[float]) -> list[DensityMatrix]:
    """States at each of ``times`` (evaluated independently, no error accumulation)."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    props = matrix_exponential(L[None, :, :] * times[:, None, None])
    v0 = vec(rho0)
    sub = isinstance(rho0, DensityMatrix) and rho0.subnormalized
    return [_result_state(unvec(P @ v0), sub) for P in props]


def ordered_exponential(
    generator: Callable,
    t_start: float,
    t_end: float,
    max_step: float,
    vectorized: bool = False,
) -> np.ndarray:
    """Time-ordered exponential of ``generator`` over ``[t_start, t_end]``.

    The interval is cut into equal pieces no longer than ``max_step``; each piece
    uses the generator at its midpoint. With ``vectorized=True`` the generator is
    called once with the array of midpoints and must return a stack.
    """
    if t_end < t_start:
        raise ValueError("t_end < t_start")
    if max_step <= 0:
        raise ValueError("max_step must be positive")
    span = t_end - t_start
    n = max(1, int(np.ceil(span / max_step - 1e-12)))
    h = span / n
    mids = t_start + h * (np.arange(n) + 0.5)
    if vectorized:
        gens = np.asarray(generator(mids), dtype=complex)
    else:
        gens = np.array([generator(t) for t in mids], dtype=complex)
    if not np.all(np.isfinite(gens)):
        raise ValueError("generator returned non-finite values")
    return ordered_product(matrix_exponential(gens * h))


def propagate_timedep(
    generator: Callable,
    rho0,
    t_final: float,
    max_step: float,
    vectorized: bool = False,
) -> DensityMatrix:
    """Evolve ``rho0`` under a time-dependent generator with piecewise-constant steps."""
    P = ordered_exponential(generator, 0.0, t_final, max_step, vectorized=vectorized)
    sub = isinstance(rho0, DensityMatrix) and rho0.subnormalized
    return _result_state(apply_superop(P, rho0), sub)


def evolve_no_jump(H_eff: np.ndarray, rho0, t: float) -> DensityMatrix:
    """``exp(-i H_eff t) rho0 exp(i H_eff^dag t)``; the trace is the no-jump probability."""
    H_eff = _check_square(H_eff, "H_eff")
    r0 = as_matrix(rho0)
    if H_eff.shape != r0.shape:
        raise DimensionError(f"H_eff {H_eff.shape} vs state {r0.shape}")
    U = matrix_exponential(-1j * H_eff * t)
    return _result_state(U @ r0 @ U.conj().T, subnormalized=True)


def population(rho, site: int, normalize: bool = False) -> float:
    """Excited population ``(Tr rho + Tr[sigma_z rho]) / 2`` of ``site``.

    For a normalized state this is the usual ``(1 + <sigma_z>)/2``. For a
    sub-normalized state the raw value is returned unless ``normalize`` is set.
    """
    r = as_matrix(rho)
    n = n_qubits_of(r.shape[0])
    z = embed_pauli(n, site, "z")
    tr = np.trace(r).real
    raw = 0.5 * (tr + np.trace(z @ r).real)
    return float(raw / tr) if normalize else float(raw)
