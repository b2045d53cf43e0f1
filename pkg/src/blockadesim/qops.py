"""Dense complex linear algebra for small spin-1/2 registers.

Conventions used throughout the package:

* Sites are numbered from 1. Site 1 is the leftmost (slowest varying) tensor
  factor.
* Single-site basis index 0 is ``g`` (spin up, I_z = +1/2) and index 1 is ``e``
  (spin down, I_z = -1/2). Multi-qubit basis labels are strings over ``{g, e}``
  read left to right, so ``"ge"`` has site 1 in ``g`` and site 2 in ``e``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import product
from typing import Iterable

import numpy as np

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-10
EIGEN_ATOL = 1e-10
UNITARY_ATOL = 1e-10

_PAULI_HALF = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex) / 2,
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex) / 2,
    "z": np.array([[1, 0], [0, -1]], dtype=complex) / 2,
}


class InvalidStateError(ValueError):
    """Raised when a matrix fails the density-matrix invariants."""


def kron(a, b, *more) -> np.ndarray:
    """Kronecker product with the first argument as the leftmost factor."""
    mats = [np.asarray(m, dtype=complex) for m in (a, b, *more)]
    for m in mats:
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"kron expects square matrices, got shape {m.shape}")
    return reduce(np.kron, mats)


def n_sites(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def spin_op(n_qubits: int, site: int, axis: str) -> np.ndarray:
    """Spin-1/2 operator I_axis on ``site`` of an ``n_qubits`` register."""
    if not 1 <= site <= n_qubits:
        raise ValueError(f"site {site} out of range for {n_qubits} qubits")
    try:
        local = _PAULI_HALF[axis.lower()]
    except KeyError:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}") from None
    left = np.eye(2 ** (site - 1))
    right = np.eye(2 ** (n_qubits - site))
    return np.kron(np.kron(left, local), right)


def lowering_op(n_qubits: int, site: int) -> np.ndarray:
    """|g><e| on ``site``: the jump operator for relaxation toward g."""
    return spin_op(n_qubits, site, "x") + 1j * spin_op(n_qubits, site, "y")


def hermiticity_defect(h: np.ndarray) -> float:
    return float(np.linalg.norm(h - h.conj().T))


def expm_hermitian(h, t: float) -> np.ndarray:
    """Propagator exp(-i h t) for Hermitian ``h`` (rad/s) via eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(h)))
    if hermiticity_defect(h) > UNITARY_ATOL * scale:
        raise ValueError("expm_hermitian requires a Hermitian matrix")
    if t == 0:
        return np.eye(h.shape[0], dtype=complex)
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def _normalize_sites(sites: Iterable[int], n: int) -> list[int]:
    sites = sorted(set(int(s) for s in sites))
    if not sites:
        raise ValueError("site set must be non-empty")
    if sites[0] < 1 or sites[-1] > n:
        raise ValueError(f"sites {sites} out of range for {n} qubits")
    return sites


def partial_trace(rho, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on the ``keep`` sites (kept in ascending order).

    Keeping every site returns ``rho`` unchanged; to trace out everything use
    :func:`numpy.trace`.
    """
    rho = np.asarray(rho, dtype=complex)
    n = n_sites(rho.shape[0])
    keep = _normalize_sites(keep, n)
    drop = [s for s in range(1, n + 1) if s not in keep]
    t = rho.reshape((2,) * (2 * n))
    # axes 0..n-1 are row sites, n..2n-1 column sites
    order = [s - 1 for s in keep] + [s - 1 for s in drop]
    t = t.transpose(order + [n + k for k in order])
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def permute_sites(rho, order: Iterable[int]) -> np.ndarray:
    """Reorder tensor factors so that new site k is old site ``order[k-1]``."""
    rho = np.asarray(rho, dtype=complex)
    n = n_sites(rho.shape[0])
    order = [int(s) - 1 for s in order]
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of all sites")
    t = rho.reshape((2,) * (2 * n)).transpose(order + [n + k for k in order])
    return t.reshape(rho.shape)


@dataclass(frozen=True)
class StateReport:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float

    @property
    def ok(self) -> bool:
        return (
            self.hermiticity_defect <= HERMITIAN_ATOL
            and self.trace_defect <= TRACE_ATOL
            and self.min_eigenvalue >= -EIGEN_ATOL
        )

    def __bool__(self) -> bool:
        return self.ok


def validate_state(rho) -> StateReport:
    """Diagnose a candidate density matrix against the state tolerances."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace = abs(complex(np.trace(rho)) - 1.0)
    min_eig = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0])
    return StateReport(herm, trace, min_eig)


def require_state(rho, what: str = "state") -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    report = validate_state(rho)
    if not report.ok:
        raise InvalidStateError(f"{what} is not a valid density matrix: {report}")
    return rho


def basis_labels(n_qubits: int) -> list[str]:
    """All basis labels in index order: gg..g first, ee..e last."""
    return ["".join(p) for p in product("ge", repeat=n_qubits)]


def basis_label(index: int, n_qubits: int) -> str:
    return format(index, f"0{n_qubits}b").replace("0", "g").replace("1", "e")


def basis_index(label: str) -> int:
    """Index of a basis label. Accepts g/e strings or the 0/1 ket notation."""
    bits = label.replace("g", "0").replace("e", "1")
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"invalid basis label {label!r}")
    return int(bits, 2)
