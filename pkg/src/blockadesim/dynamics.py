"""Time evolution: unitary propagation, Lindblad integration, RF-inhomogeneity averaging."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .model import DriveConfig, SpinSystem, build_nmr_hamiltonian, max_frequency
from .qops import basis_labels, expm_hermitian, lowering_op, n_sites, require_state, spin_op

EXACT = "exact-unitary"
RK4 = "fixed-step-rk4"
MAX_STEP_NORM = 0.1


class StepTooLargeError(ValueError):
    pass


class FlatSignalError(ValueError):
    pass


@dataclass(frozen=True)
class RfiDistribution:
    """Weighted drive-amplitude scale factors modelling RF inhomogeneity."""

    scales: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        scales = np.atleast_1d(np.asarray(self.scales, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if scales.shape != weights.shape or scales.size == 0:
            raise ValueError("rfi: scales and weights must be non-empty and equally long")
        if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
            raise ValueError("rfi: weights must be non-negative and sum to 1")
        if np.any(scales < 0.8) or np.any(scales > 1.2):
            raise ValueError("rfi: scale factors must lie in [0.8, 1.2]")
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def default(cls, n_points: int = 11, spread: float = 0.1, sigma: float = 0.05):
        """Equally spaced scales on [1-spread, 1+spread] with truncated-Gaussian weights."""
        scales = np.linspace(1 - spread, 1 + spread, n_points)
        w = np.exp(-0.5 * ((scales - 1) / sigma) ** 2)
        return cls(scales, w / w.sum())

    @classmethod
    def single(cls):
        return cls([1.0], [1.0])


@dataclass(frozen=True)
class EvolutionConfig:
    sample_times: np.ndarray
    scheme: str = EXACT
    step: Optional[float] = None

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.sample_times, dtype=float))
        if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) < 0):
            raise ValueError("sample_times must be non-empty, non-negative and sorted")
        if self.scheme not in (EXACT, RK4):
            raise ValueError(f"scheme must be {EXACT!r} or {RK4!r}, got {self.scheme!r}")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        object.__setattr__(self, "sample_times", times)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    discord: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return n_sites(self.states.shape[-1])

    @property
    def labels(self) -> list[str]:
        return basis_labels(self.n_qubits)

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.states, axis1=1, axis2=2))

    def population(self, label: str) -> np.ndarray:
        return self.populations[:, self.labels.index(label)]

    def excitation(self, site: int) -> np.ndarray:
        """Marginal probability that ``site`` is in e."""
        idx = [k for k, lab in enumerate(self.labels) if lab[site - 1] == "e"]
        return self.populations[:, idx].sum(axis=1)

    def overlap(self, psi) -> np.ndarray:
        """<psi| rho(t) |psi> at every sample."""
        psi = np.asarray(psi, dtype=complex)
        return np.real(np.einsum("i,tij,j->t", psi.conj(), self.states, psi))


def evolve_closed(h, rho0, cfg: EvolutionConfig) -> Trajectory:
    """Von Neumann evolution rho(t) = U rho0 U^dagger sampled at ``cfg.sample_times``."""
    rho0 = require_state(rho0, "initial state")
    if cfg.scheme == RK4:
        return _integrate_rk4(lambda r: _commutator_rhs(h, r), np.asarray(h), rho0, cfg)
    states = np.empty((cfg.sample_times.size,) + rho0.shape, dtype=complex)
    for k, t in enumerate(cfg.sample_times):
        if t == 0:
            states[k] = rho0
            continue
        u = expm_hermitian(h, t)
        states[k] = u @ rho0 @ u.conj().T
    return Trajectory(cfg.sample_times.copy(), states)


def _commutator_rhs(h, rho):
    return -1j * (h @ rho - rho @ h)


def relaxation_rates(s: SpinSystem) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude-damping rates 1/T1 and pure-dephasing rates 1/T2 - 1/(2 T1).

    An unset or infinite T2 means no pure dephasing.
    """
    n = s.n_qubits
    t1 = s.t1 if s.t1 is not None else np.full(n, np.inf)
    t2 = s.t2 if s.t2 is not None else np.full(n, np.inf)
    finite = np.isfinite(t2)
    if np.any(finite & (t2 > 2 * t1)):
        raise ValueError("T2 > 2*T1 implies a negative dephasing rate")
    gamma1 = 1 / t1
    gamma_phi = np.where(finite, 1 / t2 - gamma1 / 2, 0.0)
    return gamma1, np.clip(gamma_phi, 0.0, None)


def _dissipators(s: SpinSystem):
    gamma1, gamma_phi = relaxation_rates(s)
    n = s.n_qubits
    ops = []
    for i in range(n):
        if gamma1[i] > 0:
            ops.append((gamma1[i], lowering_op(n, i + 1)))
        if gamma_phi[i] > 0:
            ops.append((gamma_phi[i] / 2, 2 * spin_op(n, i + 1, "z")))
    return ops


def _dissipator(L, rho):
    ldl = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (ldl @ rho + rho @ ldl)


def lindblad_rhs(rho, h, s: SpinSystem) -> np.ndarray:
    """-i[h, rho] + sum Gamma1 D[sigma_-] + sum Gamma_phi D[2 I_z] / 2."""
    rho = np.asarray(rho, dtype=complex)
    out = _commutator_rhs(h, rho)
    for rate, L in _dissipators(s):
        out = out + rate * _dissipator(L, rho)
    return out


def _make_lindblad(h, s: SpinSystem) -> Callable:
    ops = _dissipators(s)
    pre = [(rate, L, L.conj().T, L.conj().T @ L) for rate, L in ops]

    def rhs(rho):
        out = -1j * (h @ rho - rho @ h)
        for rate, L, Ld, LdL in pre:
            out += rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
        return out

    return rhs


def default_step(s: SpinSystem, d: Optional[DriveConfig], h) -> float:
    """1/(200 f_max), shortened so that ||h|| * step and the decay rates * step stay small."""
    fmax = max_frequency(s, d)
    step = 1 / (200 * fmax) if fmax > 0 else np.inf
    hnorm = float(np.linalg.norm(h, 2))
    if hnorm > 0:
        step = min(step, MAX_STEP_NORM / hnorm)
    gamma1, gamma_phi = relaxation_rates(s)
    rate = float(np.max(gamma1 + gamma_phi, initial=0.0))
    if rate > 0:
        step = min(step, MAX_STEP_NORM / (2 * rate))
    if not np.isfinite(step):
        raise ValueError("no time scale to choose an integration step from; set cfg.step")
    return step


def _integrate_rk4(rhs, h, rho0, cfg: EvolutionConfig) -> Trajectory:
    times = cfg.sample_times
    step = cfg.step
    if step is None:
        hnorm = float(np.linalg.norm(h, 2))
        span = times[-1] if times[-1] > 0 else 1.0
        step = MAX_STEP_NORM / hnorm if hnorm > 0 else span
    if float(np.linalg.norm(h, 2)) * step > MAX_STEP_NORM * (1 + 1e-12):
        raise StepTooLargeError(
            f"step {step:g} s violates ||h||*step <= {MAX_STEP_NORM} (||h|| = {np.linalg.norm(h, 2):g} rad/s)"
        )
    states = np.empty((times.size,) + rho0.shape, dtype=complex)
    rho = rho0.copy()
    t = 0.0
    for k, target in enumerate(times):
        span = target - t
        if span > 0:
            n_sub = max(1, math.ceil(span / step * (1 - 1e-12)))
            dt = span / n_sub
            for _ in range(n_sub):
                k1 = rhs(rho)
                k2 = rhs(rho + 0.5 * dt * k1)
                k3 = rhs(rho + 0.5 * dt * k2)
                k4 = rhs(rho + dt * k3)
                rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                rho = (rho + rho.conj().T) / 2
            t = target
        states[k] = rho
    return Trajectory(times.copy(), states)


def evolve_open(s: SpinSystem, d: DriveConfig, rho0, cfg: EvolutionConfig) -> Trajectory:
    """Fixed-step RK4 integration of the Lindblad equation under the driven NMR Hamiltonian."""
    rho0 = require_state(rho0, "initial state")
    h = build_nmr_hamiltonian(s, d)
    if cfg.step is None:
        cfg = replace(cfg, step=default_step(s, d, h))
    return _integrate_rk4(_make_lindblad(h, s), h, rho0, cfg)


def ensemble_average(
    rfi: RfiDistribution,
    base_drive: DriveConfig,
    evolve: Callable[[DriveConfig], Trajectory],
    threads: int = 1,
) -> Trajectory:
    """Weighted average over drive-amplitude scale factors.

    Members may run concurrently; the reduction is always in member order.
    """
    drives = [base_drive.scaled(s) for s in rfi.scales]
    if threads > 1 and len(drives) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            members = list(pool.map(evolve, drives))
    else:
        members = [evolve(d) for d in drives]
    states = np.zeros_like(members[0].states)
    for w, m in zip(rfi.weights, members):
        states = states + w * m.states
    return Trajectory(members[0].times.copy(), states)


def dephase_pfg(rho) -> np.ndarray:
    """Idealized gradient crusher: drop every off-diagonal element."""
    rho = np.asarray(rho, dtype=complex)
    return np.diag(np.diag(rho))


def _cosine_residual(params, t, y):
    a, f, phi, c = params
    return a * np.cos(2 * np.pi * f * t + phi) + c - y


def dominant_frequency(times: Sequence[float], signal: Sequence[float]) -> float:
    """Frequency (Hz) of the best-fitting a cos(2 pi f t + phi) + c.

    The FFT peak of the zero-padded signal seeds a nonlinear least-squares fit.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(signal, dtype=float)
    if t.size < 16:
        raise ValueError("signal too short for a frequency estimate")
    if (y.max() - y.min()) / 2 < 1e-3:
        raise FlatSignalError("signal is flat: no oscillation above 1e-3 amplitude")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-6):
        raise ValueError("dominant_frequency needs uniformly sampled times")
    dt = dt[0]
    pad = 16 * t.size
    amp = np.abs(np.fft.rfft(y - y.mean(), n=pad))
    freqs = np.fft.rfftfreq(pad, dt)
    f0 = freqs[1:][np.argmax(amp[1:])]
    # linear solve for amplitude/phase at the seed frequency
    basis = np.column_stack([np.cos(2 * np.pi * f0 * t), np.sin(2 * np.pi * f0 * t), np.ones_like(t)])
    (ca, sa, c0), *_ = np.linalg.lstsq(basis, y, rcond=None)
    x0 = [np.hypot(ca, sa), f0, np.arctan2(-sa, ca), c0]
    fit = least_squares(_cosine_residual, x0, args=(t, y), x_scale=[1, f0, 1, 1])
    f = abs(float(fit.x[1]))
    duration = t[-1] - t[0]
    if f * duration < 2:
        raise ValueError(f"fewer than 2 periods sampled at {f:.4g} Hz")
    if 1 / (f * dt) < 8:
        raise ValueError(f"fewer than 8 samples per period at {f:.4g} Hz")
    return f
