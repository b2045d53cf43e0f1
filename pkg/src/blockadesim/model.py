"""Parameter containers and Hamiltonian builders.

User-facing frequencies are in Hz; every Hamiltonian returned here is in rad/s.
The factor 2*pi is applied only inside :func:`build_nmr_hamiltonian`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .qops import spin_op


def _vector(values, n: int, name: str, default: float = 0.0) -> np.ndarray:
    if values is None:
        return np.full(n, default, dtype=float)
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name}: expected {n} entries, got {arr.shape}")
    return arr


def _optional_vector(values, n: int, name: str) -> Optional[np.ndarray]:
    if values is None:
        return None
    arr = np.asarray([np.inf if v is None else v for v in np.atleast_1d(values)], dtype=float)
    if arr.size == 1 and n > 1:
        arr = np.full(n, arr[0])
    if arr.shape != (n,):
        raise ValueError(f"{name}: expected {n} entries, got {arr.shape}")
    if np.any(arr <= 0):
        raise ValueError(f"{name}: relaxation times must be positive")
    return arr


def _symmetric(matrix, n: int, name: str) -> np.ndarray:
    if matrix is None:
        return np.zeros((n, n))
    m = np.asarray(matrix, dtype=float)
    if m.shape != (n, n):
        raise ValueError(f"{name}: expected a {n}x{n} matrix, got {m.shape}")
    if not np.allclose(m, m.T, rtol=0, atol=1e-12):
        raise ValueError(f"{name}: matrix must be symmetric")
    if np.any(np.diag(m) != 0):
        raise ValueError(f"{name}: diagonal entries must be zero")
    return m


@dataclass(frozen=True)
class RydbergParams:
    """Atom register: Rabi frequencies and detunings in rad/s, C6 and separations."""

    rabi: np.ndarray
    separations: np.ndarray
    c6: float = 1.0
    detuning: Optional[np.ndarray] = None

    def __post_init__(self):
        rabi = np.atleast_1d(np.asarray(self.rabi, dtype=float))
        n = rabi.size
        if n < 1:
            raise ValueError("n_atoms must be at least 1")
        r = np.asarray(self.separations, dtype=float)
        if r.shape != (n, n):
            raise ValueError(f"separations: expected {n}x{n}, got {r.shape}")
        if not np.allclose(r, r.T):
            raise ValueError("separations must be symmetric")
        off = ~np.eye(n, dtype=bool)
        if np.any(r[off] <= 0):
            raise ValueError("separations must be positive between distinct atoms")
        object.__setattr__(self, "rabi", rabi)
        object.__setattr__(self, "separations", r)
        object.__setattr__(self, "detuning", _vector(self.detuning, n, "detuning"))

    @property
    def n_atoms(self) -> int:
        return self.rabi.size

    def interactions(self) -> np.ndarray:
        """Matrix of pairwise C6/r^6 shifts with a zero diagonal."""
        n = self.n_atoms
        v = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    v[i, j] = vdw_interaction(self.c6, self.separations[i, j])
        return v


@dataclass(frozen=True)
class SpinSystem:
    """Rotating-frame register: offsets and couplings in Hz, T1/T2 in seconds.

    Missing relaxation times mean no relaxation on that channel; ``eps`` is the
    per-qubit purity factor used for thermal and pseudopure states.
    """

    n_qubits: int
    offsets: np.ndarray = None
    couplings: np.ndarray = None
    t1: Optional[np.ndarray] = None
    t2: Optional[np.ndarray] = None
    eps: Optional[np.ndarray] = None

    def __post_init__(self):
        n = int(self.n_qubits)
        if n < 1:
            raise ValueError("n_qubits must be at least 1")
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "offsets", _vector(self.offsets, n, "offsets"))
        object.__setattr__(self, "couplings", _symmetric(self.couplings, n, "couplings"))
        t1 = _optional_vector(self.t1, n, "t1")
        t2 = _optional_vector(self.t2, n, "t2")
        # an unset or infinite T2 means no pure dephasing, i.e. the T1-limited 2*T1
        if t1 is not None and t2 is not None and np.any(np.isfinite(t2) & (t2 > 2 * t1)):
            raise ValueError("t2: must satisfy T2 <= 2*T1 for every qubit")
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)
        if self.eps is not None:
            object.__setattr__(self, "eps", _vector(self.eps, n, "eps"))

    @property
    def is_closed(self) -> bool:
        return all(t is None or np.all(np.isinf(t)) for t in (self.t1, self.t2))

    def with_couplings(self, couplings) -> "SpinSystem":
        return SpinSystem(self.n_qubits, self.offsets, couplings, self.t1, self.t2, self.eps)


@dataclass(frozen=True)
class DriveConfig:
    """Per-qubit RF amplitudes (Hz) and transverse phases (rad, 0 = x axis)."""

    amplitudes: np.ndarray
    phases: Optional[np.ndarray] = None

    def __post_init__(self):
        amps = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        if np.any(amps < 0):
            raise ValueError("drive amplitudes must be non-negative")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", _vector(self.phases, amps.size, "phases"))

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size

    def scaled(self, factor: float) -> "DriveConfig":
        return DriveConfig(self.amplitudes * factor, self.phases)

    @classmethod
    def off(cls, n_qubits: int) -> "DriveConfig":
        return cls(np.zeros(n_qubits))


def vdw_interaction(c6: float, r: float) -> float:
    """Van der Waals level shift C6 / r^6."""
    if r <= 0:
        raise ValueError(f"separation must be positive, got {r}")
    return c6 / r**6


def _excited_projector(n: int, site: int) -> np.ndarray:
    return np.eye(2**n) / 2 - spin_op(n, site, "z")


def build_rydberg_hamiltonian(p: RydbergParams) -> np.ndarray:
    """sum_i Omega_i sigma_x^i + sum_{i<j} V_ij n_i n_j - sum_i Delta_i n_i."""
    n = p.n_atoms
    v = p.interactions()
    proj = [_excited_projector(n, i) for i in range(1, n + 1)]
    h = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        h += p.rabi[i] * 2 * spin_op(n, i + 1, "x")
        h -= p.detuning[i] * proj[i]
        for j in range(i + 1, n):
            h += v[i, j] * proj[i] @ proj[j]
    return h


def rydberg_to_spin(p: RydbergParams) -> tuple[SpinSystem, DriveConfig]:
    """Map a zero-detuning atom register onto NMR rotating-frame parameters (Hz)."""
    if np.any(p.detuning != 0):
        raise ValueError("rydberg_to_spin requires zero detuning on every atom")
    v = p.interactions()
    vbar = v.sum(axis=1) / 2
    system = SpinSystem(p.n_atoms, offsets=vbar / (2 * np.pi), couplings=v / (2 * np.pi))
    return system, DriveConfig(p.rabi / np.pi)


def rydberg_identity_shift(p: RydbergParams) -> float:
    """Constant dropped by the spin form: H_rydberg = H_spin + shift * 1 (zero detuning)."""
    v = p.interactions()
    return float(np.triu(v, 1).sum() / 4)


def build_nmr_hamiltonian(s: SpinSystem, d: Optional[DriveConfig] = None) -> np.ndarray:
    """Rotating-frame NMR Hamiltonian in rad/s; ``d=None`` gives the free Hamiltonian."""
    n = s.n_qubits
    if d is None:
        d = DriveConfig.off(n)
    if d.n_qubits != n:
        raise ValueError(f"drive has {d.n_qubits} entries for a {n}-qubit system")
    ix = [spin_op(n, i, "x") for i in range(1, n + 1)]
    iy = [spin_op(n, i, "y") for i in range(1, n + 1)]
    iz = [spin_op(n, i, "z") for i in range(1, n + 1)]
    h = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        phi = d.phases[i]
        h += d.amplitudes[i] * (np.cos(phi) * ix[i] + np.sin(phi) * iy[i])
        h -= s.offsets[i] * iz[i]
        for j in range(i + 1, n):
            h += s.couplings[i, j] * iz[i] @ iz[j]
    return 2 * np.pi * h


def max_frequency(s: SpinSystem, d: Optional[DriveConfig] = None) -> float:
    """Largest of the drive amplitudes, |offsets| and |couplings| in Hz."""
    values = [np.abs(s.offsets).max(initial=0.0), np.abs(s.couplings).max(initial=0.0)]
    if d is not None:
        values.append(d.amplitudes.max(initial=0.0))
    return float(max(values))


def resonant_offsets(couplings: Sequence[Sequence[float]]) -> np.ndarray:
    """Offsets sum_j J_ij / 2 that put |g..g> and all single excitations on resonance."""
    return np.asarray(couplings, dtype=float).sum(axis=1) / 2
