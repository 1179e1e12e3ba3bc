"""Reference dynamics of the systems the simulator is meant to reproduce."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import dissipator_superop, embed_pauli, hamiltonian_superop

MAX_SITES = 6
_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class TwoQubitModel:
    """Qubit 2 exchange-coupled (``g``) to qubit 1, which is driven (``omega``) and decays (``gamma``).

    Written in the frame rotating at the common qubit frequency.
    """

    g: float = 1.0
    omega: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("g must be positive")
        if self.gamma < 0 or self.omega < 0:
            raise ValueError("gamma and omega must be non-negative")

    def to_dict(self) -> dict:
        return {"g": self.g, "omega": self.omega, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "TwoQubitModel":
        return cls(g=float(d.get("g", 1.0)), omega=float(d.get("omega", 0.0)), gamma=float(d.get("gamma", 0.0)))


def _exchange(n: int, a: int, b: int) -> np.ndarray:
    hop = embed_pauli(n, a, "+") @ embed_pauli(n, b, "-")
    return hop + hop.conj().T


def two_qubit_hamiltonian(model: TwoQubitModel) -> np.ndarray:
    return model.g * _exchange(2, 0, 1) + model.omega * embed_pauli(2, 0, "x")


def coherent_part(model: TwoQubitModel) -> np.ndarray:
    """Generator of the exchange + drive dynamics only."""
    return hamiltonian_superop(two_qubit_hamiltonian(model))


def dissipative_part(model: TwoQubitModel) -> np.ndarray:
    """Generator of the decay of qubit 1 only."""
    return dissipator_superop(embed_pauli(2, 0, "-"), model.gamma)


def two_qubit_liouvillian(model: TwoQubitModel) -> np.ndarray:
    # the dissipator enters with a positive sign; a negative one would not be
    # a valid generator
    return coherent_part(model) + dissipative_part(model)


def two_qubit_effective_hamiltonian(model: TwoQubitModel) -> np.ndarray:
    z1 = embed_pauli(2, 0, "z")
    return two_qubit_hamiltonian(model) - 0.25j * model.gamma * (z1 + np.eye(4))


@dataclass(frozen=True)
class SpinChainModel:
    """Spin-1/2 chain with couplings ``J[(n, m, a, b)] S_n^a S_m^b``, fields ``B_n S_n^x``
    and decay ``gamma_n D[sigma_n^-]``. Spin operators are ``S = sigma / 2``.

    Keys are stored with ``n < m``; an entry given as ``(m, n, b, a)`` is the same bond.
    """

    n_sites: int
    J: dict = field(default_factory=dict)
    B: tuple = ()
    gamma: tuple = ()
    connectivity: str = "all-to-all"

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("need at least one site")
        if self.n_sites > MAX_SITES:
            raise ValueError(f"n_sites = {self.n_sites} exceeds the dense cap of {MAX_SITES}")
        if self.connectivity not in ("nearest-neighbor", "all-to-all"):
            raise ValueError(f"unknown connectivity {self.connectivity!r}")
        J = {}
        for key, val in dict(self.J).items():
            n, m, a, b = key
            if a not in _AXES or b not in _AXES:
                raise ValueError(f"spin component must be one of {_AXES}")
            if n == m or not (0 <= n < self.n_sites and 0 <= m < self.n_sites):
                raise ValueError(f"invalid bond ({n}, {m})")
            if n > m:
                n, m, a, b = m, n, b, a
            if self.connectivity == "nearest-neighbor" and m - n != 1:
                raise ValueError(f"bond ({n}, {m}) is not nearest-neighbor")
            if (n, m, a, b) in J:
                raise ValueError(f"bond {(n, m, a, b)} given twice")
            J[(n, m, a, b)] = float(val)
        B = tuple(float(x) for x in self.B) or (0.0,) * self.n_sites
        gamma = tuple(float(x) for x in self.gamma) or (0.0,) * self.n_sites
        if len(B) != self.n_sites or len(gamma) != self.n_sites:
            raise ValueError("B and gamma need one entry per site")
        if any(x < 0 for x in gamma):
            raise ValueError("decay rates must be non-negative")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "gamma", gamma)

    def to_dict(self) -> dict:
        return {
            "n": self.n_sites,
            "J": [[n, m, a, b, v] for (n, m, a, b), v in sorted(self.J.items())],
            "B": list(self.B),
            "gamma": list(self.gamma),
            "connectivity": self.connectivity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpinChainModel":
        J = {(int(n), int(m), str(a), str(b)): float(v) for n, m, a, b, v in d.get("J", [])}
        return cls(
            n_sites=int(d["n"]),
            J=J,
            B=tuple(d.get("B", ())),
            gamma=tuple(d.get("gamma", ())),
            connectivity=d.get("connectivity", "all-to-all"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def spin_chain_hamiltonian(model: SpinChainModel) -> np.ndarray:
    n = model.n_sites
    S = {(k, a): 0.5 * embed_pauli(n, k, a) for k in range(n) for a in _AXES}
    H = np.zeros((2**n, 2**n), dtype=complex)
    for (i, j, a, b), val in model.J.items():
        H += val * S[(i, a)] @ S[(j, b)]
    for k, bk in enumerate(model.B):
        if bk:
            H += bk * S[(k, "x")]
    return H


def spin_chain_liouvillian(model: SpinChainModel) -> np.ndarray:
    n = model.n_sites
    L = hamiltonian_superop(spin_chain_hamiltonian(model))
    for k, rate in enumerate(model.gamma):
        if rate:
            L = L + dissipator_superop(embed_pauli(n, k, "-"), rate)
    return L


def spin_chain_effective_hamiltonian(model: SpinChainModel, identity_shift: bool = False) -> np.ndarray:
    """``H - i sum_n (gamma_n/4) sigma_n^z``; ``identity_shift`` adds the ``+ I`` that
    makes it the exact no-jump generator of the Liouvillian."""
    n = model.n_sites
    H = spin_chain_hamiltonian(model)
    eye = np.eye(2**n)
    for k, rate in enumerate(model.gamma):
        z = embed_pauli(n, k, "z")
        H = H - 0.25j * rate * (z + eye if identity_shift else z)
    return H
