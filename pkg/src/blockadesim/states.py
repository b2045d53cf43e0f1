"""Named states: ground, basis, symmetric pair, W basis, pseudopure and thermal."""

from __future__ import annotations

import numpy as np

from .model import SpinSystem
from .qops import basis_index, require_state, spin_op


def basis_state(label: str) -> np.ndarray:
    """Computational basis ket from a g/e (or 0/1) label, site 1 leftmost."""
    vec = np.zeros(2 ** len(label), dtype=complex)
    vec[basis_index(label)] = 1.0
    return vec


def ground_state(n_qubits: int) -> np.ndarray:
    if n_qubits < 1:
        raise ValueError("n_qubits must be at least 1")
    return basis_state("g" * n_qubits)


def plus_minus_states() -> tuple[np.ndarray, np.ndarray]:
    """(|eg> + |ge>)/sqrt2 and (|eg> - |ge>)/sqrt2."""
    ge, eg = basis_state("ge"), basis_state("eg")
    return (eg + ge) / np.sqrt(2), (eg - ge) / np.sqrt(2)


def w_basis(n_qubits: int = 3) -> list[np.ndarray]:
    """Orthonormal single-excitation basis W1, W2, W3 for three qubits.

    W1 is the symmetric W state; W2 and W3 are one Gram-Schmidt completion of
    it. The completion is not unique.
    """
    if n_qubits != 3:
        raise ValueError("w_basis is only defined for three qubits")
    k001, k010, k100 = (basis_state(s) for s in ("001", "010", "100"))
    seeds = [k001 + k010 + k100, k001, k010]
    basis: list[np.ndarray] = []
    for v in seeds:
        for b in basis:
            v = v - np.vdot(b, v) * b
        basis.append(v / np.linalg.norm(v))
    # Gram-Schmidt on these seeds gives W2 = (2|001> - |010> - |100>)/sqrt6 and
    # W3 = (|010> - |100>)/sqrt2 exactly.
    return basis


def as_density(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim == 2:
        return psi
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > 1e-12:
        raise ValueError(f"state vector must be normalized, norm = {norm}")
    return np.outer(psi, psi.conj())


def pseudopure(psi, eps: float) -> np.ndarray:
    """(1 - eps) 1/2^n + eps |psi><psi|."""
    if not 0 <= eps <= 1:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    proj = as_density(psi)
    dim = proj.shape[0]
    return (1 - eps) * np.eye(dim, dtype=complex) / dim + eps * proj


def effective_state(rho, eps: float) -> np.ndarray:
    """Undo the pseudopure background: returns 1/2^n + (rho - 1/2^n)/eps.

    For rho = pseudopure(psi, eps) this is |psi><psi| exactly.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    background = np.eye(dim) / dim
    return background + (rho - background) / eps


def thermal_state(s: SpinSystem, eps=None) -> np.ndarray:
    """High-temperature state 1/2^n + sum_i eps_i I_z^i."""
    n = s.n_qubits
    if eps is None:
        eps = s.eps if s.eps is not None else np.zeros(n)
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (n,))
    rho = np.eye(2**n, dtype=complex) / 2**n
    for i in range(n):
        rho = rho + eps[i] * spin_op(n, i + 1, "z")
    return require_state(rho, "thermal state")
