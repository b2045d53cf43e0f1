"""Pulse-sequence interpreter, pseudopure-state preparation and idealized tomography."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .dynamics import dephase_pfg
from .model import SpinSystem, build_nmr_hamiltonian
from .qops import expm_hermitian, n_sites, require_state, spin_op

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class Rotation:
    """Hard pulse: rotation by ``angle`` about (cos phase, sin phase, 0) on ``sites``."""

    sites: tuple
    angle: float
    phase: float = 0.0

    def __post_init__(self):
        sites = tuple(sorted(set(int(s) for s in np.atleast_1d(self.sites))))
        if not sites:
            raise ValueError("rotation needs at least one site")
        if not np.isfinite(self.angle) or not np.isfinite(self.phase):
            raise ValueError("rotation angle and phase must be finite")
        object.__setattr__(self, "sites", sites)


@dataclass(frozen=True)
class Delay:
    """Free evolution under the undriven rotating-frame Hamiltonian."""

    duration: float

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError("delay duration must be non-negative")


@dataclass(frozen=True)
class Gradient:
    """Pulsed field gradient: removes all coherences."""


PulseElement = Union[Rotation, Delay, Gradient]


@dataclass(frozen=True)
class PulseSequence:
    elements: tuple
    system: SpinSystem

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        for e in self.elements:
            if isinstance(e, Rotation) and e.sites[-1] > self.system.n_qubits:
                raise ValueError(f"rotation on site {e.sites[-1]} outside a {self.system.n_qubits}-qubit system")


def rotation_unitary(n_qubits: int, e: Rotation) -> np.ndarray:
    gen = sum(
        np.cos(e.phase) * spin_op(n_qubits, i, "x") + np.sin(e.phase) * spin_op(n_qubits, i, "y")
        for i in e.sites
    )
    return expm_hermitian(gen, e.angle)


def apply_element(e: PulseElement, rho, s: SpinSystem) -> np.ndarray:
    rho = require_state(rho)
    if isinstance(e, Rotation):
        u = rotation_unitary(s.n_qubits, e)
    elif isinstance(e, Delay):
        u = expm_hermitian(build_nmr_hamiltonian(s), e.duration)
    elif isinstance(e, Gradient):
        return dephase_pfg(rho)
    else:
        raise TypeError(f"unknown pulse element {e!r}")
    return u @ rho @ u.conj().T


def run_sequence(seq: PulseSequence, rho0) -> np.ndarray:
    rho = require_state(rho0, "sequence input")
    for e in seq.elements:
        rho = apply_element(e, rho, seq.system)
    return require_state(rho, "sequence output")


def delay_durations(s: SpinSystem, register: str) -> dict:
    """Coupling-evolution delays (s) for the two- and three-qubit PPS sequences.

    Two-qubit register (F, P): tau_FP. Three-qubit register ordered (H, C, F):
    tau_HC, tau_FC and tau_HF.
    """
    j = s.couplings

    def inv(x):
        if x == 0:
            raise ZeroDivisionError("delay formula needs a non-zero coupling")
        return 1 / x

    if register == "two_qubit":
        return {"tau_FP": inv(2 * j[0, 1])}
    if register == "three_qubit":
        j_hc, j_hf, j_cf = j[0, 1], j[0, 2], j[1, 2]
        return {
            "tau_HC": inv(2 * j_hc),
            "tau_FC": 4 * (inv(j_cf) - inv(8 * j_hc)),
            "tau_HF": inv(2 * j_hf),
        }
    raise ValueError(f"register must be 'two_qubit' or 'three_qubit', got {register!r}")


def controlled_saturation(control: int, target: int, s: SpinSystem) -> list:
    """Equalize the target's populations only where ``control`` is excited.

    pi/4 on the target, a refocused 1/(2|J|) coupling delay, pi/4 about y (sign
    chosen by the coupling sign), then a gradient. The mid-delay pi pulses on
    control and target cancel offsets and all other couplings.
    """
    jct = s.couplings[control - 1, target - 1]
    if jct == 0:
        raise ValueError(f"sites {control} and {target} are not coupled")
    tau = 1 / (2 * abs(jct))
    pair = (control, target)
    return [
        Rotation((target,), np.pi / 4, 0.0),
        Delay(tau / 2),
        Rotation(pair, np.pi, 0.0),
        Delay(tau / 2),
        Rotation(pair, np.pi, 0.0),
        Rotation((target,), np.pi / 4, -np.pi / 2 if jct > 0 else np.pi / 2),
        Gradient(),
    ]


def pps_sequence(s: SpinSystem) -> PulseSequence:
    """Spatial-averaging sequence taking the thermal state to a |g...g> pseudopure state.

    The thermal polarizations eps_i are first scaled to eps_i cos(theta_i) =
    lam * 2^(i-1) and crushed. Saturating every target k on the subspace where
    some earlier site j < k is excited then equalizes all populations except
    |g...g>.
    """
    n = s.n_qubits
    if s.eps is None or np.any(s.eps <= 0):
        raise ValueError("pps_sequence needs positive purity factors eps_i")
    weights = 2.0 ** np.arange(n)
    lam = float(np.min(s.eps / weights))
    elements: list = []
    for i in range(n):
        c = np.clip(lam * weights[i] / s.eps[i], -1.0, 1.0)
        angle = float(np.arccos(c))
        if angle > 0:
            elements.append(Rotation((i + 1,), angle, 0.0))
    elements.append(Gradient())
    for target in range(2, n + 1):
        for control in range(1, target):
            elements.extend(controlled_saturation(control, target, s))
    return PulseSequence(elements, s)


def pauli_labels(n_qubits: int) -> list[str]:
    return ["".join(p) for p in product("IXYZ", repeat=n_qubits)]


def pauli_operator(label: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for c in label:
        out = np.kron(out, _PAULI[c])
    return out


def tomograph(rho) -> dict:
    """Expectation values Tr(rho P) for every product P of {1, 2I_x, 2I_y, 2I_z}."""
    rho = require_state(rho)
    n = n_sites(rho.shape[0])
    return {lab: float(np.real(np.trace(rho @ pauli_operator(lab)))) for lab in pauli_labels(n)}


def reconstruct(record: Mapping[str, float], repair: bool = True) -> np.ndarray:
    """rho = 2^-N sum_P <P> P; optionally clip negative eigenvalues and renormalize."""
    if not record:
        raise ValueError("empty tomography record")
    n = len(next(iter(record)))
    missing = set(pauli_labels(n)) - set(record)
    if missing:
        raise ValueError(f"incomplete tomography record: {len(missing)} expectation values missing")
    rho = sum(record[lab] * pauli_operator(lab) for lab in pauli_labels(n)) / 2**n
    if repair:
        w, v = np.linalg.eigh(rho)
        if w[0] < 0 or abs(w.sum() - 1) > 1e-12:
            w = np.clip(w, 0.0, None)
            if w.sum() <= 0:
                raise ValueError("record does not describe a positive state")
            rho = (v * (w / w.sum())) @ v.conj().T
    return rho
