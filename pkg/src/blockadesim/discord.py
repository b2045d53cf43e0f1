"""Entropies, mutual information and one-qubit-measurement quantum discord.

All entropies are in nats. Discord D(B|A) is computed for a single measured
qubit A by maximizing the measurement-induced classical correlation over
projective bases parametrized by the Bloch angles (theta, phi).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from scipy.optimize import minimize

from .qops import EIGEN_ATOL, n_sites, partial_trace, permute_sites, require_state

LN2 = float(np.log(2))


@dataclass(frozen=True)
class Partition:
    """Measured sites A and the remainder B (1-based site numbers)."""

    measured: tuple
    rest: tuple

    def __post_init__(self):
        a = tuple(sorted(int(s) for s in self.measured))
        b = tuple(sorted(int(s) for s in self.rest))
        if not a:
            raise ValueError("partition: measured set must be non-empty")
        if set(a) & set(b):
            raise ValueError("partition: measured and remaining sites overlap")
        object.__setattr__(self, "measured", a)
        object.__setattr__(self, "rest", b)

    @classmethod
    def parse(cls, text: Union[str, "Partition"], n_qubits: Optional[int] = None) -> "Partition":
        """Parse ``"1|23"`` (measured | rest). ``"1"`` alone means the rest is everything else."""
        if isinstance(text, Partition):
            return text.check(n_qubits) if n_qubits else text
        left, _, right = str(text).partition("|")
        measured = [int(c) for c in left if c.isdigit()]
        rest = [int(c) for c in right if c.isdigit()]
        if not right:
            if n_qubits is None:
                raise ValueError(f"partition {text!r}: remainder needs n_qubits")
            rest = [s for s in range(1, n_qubits + 1) if s not in measured]
        p = cls(tuple(measured), tuple(rest))
        return p.check(n_qubits) if n_qubits else p

    def check(self, n_qubits: int) -> "Partition":
        if set(self.measured) | set(self.rest) != set(range(1, n_qubits + 1)):
            raise ValueError(f"partition {self.label}: sites must cover 1..{n_qubits} exactly")
        return self

    @property
    def label(self) -> str:
        return "".join(map(str, self.measured)) + "|" + "".join(map(str, self.rest))

    def swapped(self) -> "Partition":
        return Partition(self.rest, self.measured)


@dataclass(frozen=True)
class MeasurementBasis:
    """Projector pair along the Bloch direction (theta, phi) and its antipode."""

    theta: float
    phi: float

    @classmethod
    def canonical(cls, theta: float, phi: float) -> "MeasurementBasis":
        theta = float(np.mod(theta, 2 * np.pi))
        if theta > np.pi:
            theta = 2 * np.pi - theta
            phi = phi + np.pi
        return cls(theta, float(np.mod(phi, 2 * np.pi)))

    def vectors(self) -> np.ndarray:
        c, s = np.cos(self.theta / 2), np.sin(self.theta / 2)
        e = np.exp(1j * self.phi)
        return np.array([[c, e * s], [-np.conj(e) * s, c]])


@dataclass(frozen=True)
class DiscordResult:
    value: float
    optimal_basis: MeasurementBasis
    mutual_information: float
    classical_correlation: float
    converged: bool = True


def _entropy_from_eigs(w: np.ndarray) -> np.ndarray:
    w = np.where(w < 0, 0.0, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, -w * np.log(w), 0.0)
    return terms.sum(axis=-1)


def von_neumann_entropy(rho, validate: bool = True) -> float:
    """-Tr(rho ln rho); eigenvalues in [-1e-10, 0) are treated as zero."""
    rho = require_state(rho) if validate else np.asarray(rho, dtype=complex)
    w = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    return float(_entropy_from_eigs(w))


def _as_partition(rho, p) -> Partition:
    return Partition.parse(p, n_sites(rho.shape[0]))


def mutual_information(rho, p) -> float:
    """H(A) + H(B) - H(AB)."""
    rho = require_state(rho)
    p = _as_partition(rho, p)
    h_a = von_neumann_entropy(partial_trace(rho, p.measured), validate=False)
    h_b = von_neumann_entropy(partial_trace(rho, p.rest), validate=False)
    return h_a + h_b - von_neumann_entropy(rho, validate=False)


class _Conditioner:
    """Precomputed blocks for evaluating J(A:B) at many bases of the measured qubit."""

    def __init__(self, rho, p: Partition):
        if len(p.measured) != 1:
            raise ValueError("discord is implemented for a single measured qubit only")
        rho = np.asarray(rho, dtype=complex)
        if p.rest:
            rho = permute_sites(rho, p.measured + p.rest)
        d_b = rho.shape[0] // 2
        self.blocks = rho.reshape(2, d_b, 2, d_b)
        rho_b = np.einsum("ajal->jl", self.blocks)
        self.h_b = float(_entropy_from_eigs(np.linalg.eigvalsh(rho_b)))

    def j_values(self, thetas, phis) -> np.ndarray:
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        phis = np.atleast_1d(np.asarray(phis, dtype=float))
        c, s = np.cos(thetas / 2), np.sin(thetas / 2)
        e = np.exp(1j * phis)
        # rows: outcome 0 along n, outcome 1 along -n
        vecs = np.stack(
            [np.stack([c, e * s], axis=-1), np.stack([-np.conj(e) * s, c], axis=-1)], axis=1
        )
        cond = np.einsum("koa,kob,ajbl->kojl", vecs.conj(), vecs, self.blocks)
        probs = np.real(np.einsum("kojj->ko", cond))
        cond = (cond + np.conj(np.swapaxes(cond, -1, -2))) / 2
        w = np.linalg.eigvalsh(cond)
        # p * H(rho/p) = -sum w ln w + p ln p; exact zero for p -> 0
        w = np.where(w < 0, 0.0, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = np.where(w > 0, -w * np.log(w), 0.0).sum(axis=-1)
            plogp = np.where(probs > 0, probs * np.log(probs), 0.0)
        h_cond = (ent + plogp).sum(axis=-1)
        return self.h_b - h_cond


def conditional_mutual_information(rho, p, m: MeasurementBasis) -> float:
    """J(A:B) = H(B) - sum_i p_i H(B | A = i) for the projective basis ``m`` on A."""
    rho = require_state(rho)
    p = _as_partition(rho, p)
    return float(_Conditioner(rho, p).j_values(m.theta, m.phi)[0])


def discord(
    rho,
    p,
    grid: tuple = (24, 48),
    refine: bool = True,
    n_starts: int = 2,
    fatol: float = 1e-9,
    xatol: float = 1e-7,
) -> DiscordResult:
    """D(B|A) = I(A:B) - max J(A:B) over projective bases on the measured qubit.

    The maximum is located by a deterministic (theta, phi) grid followed by
    Nelder-Mead refinement from the ``n_starts`` best grid points. The result
    is never worse than the best grid point.
    """
    rho = require_state(rho)
    p = _as_partition(rho, p)
    cond = _Conditioner(rho, p)
    mi = mutual_information(rho, p)

    n_theta, n_phi = grid
    thetas = np.linspace(0, np.pi, n_theta)
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    values = cond.j_values(tt.ravel(), pp.ravel())
    order = np.argsort(-values, kind="stable")
    best_j = float(values[order[0]])
    best = (float(tt.ravel()[order[0]]), float(pp.ravel()[order[0]]))
    converged = True

    if refine:
        objective = lambda x: -float(cond.j_values(x[0], x[1])[0])
        for idx in order[:n_starts]:
            x0 = np.array([tt.ravel()[idx], pp.ravel()[idx]])
            res = minimize(
                objective,
                x0,
                method="Nelder-Mead",
                options={"xatol": xatol, "fatol": fatol, "maxiter": 2000, "initial_simplex": _simplex(x0)},
            )
            converged = converged and bool(res.success)
            if -res.fun > best_j:
                best_j = float(-res.fun)
                best = (float(res.x[0]), float(res.x[1]))
        if not converged:
            warnings.warn("discord refinement did not converge; reporting best point found", RuntimeWarning)

    value = mi - best_j
    # round-off can leave a tiny negative value for classical states
    if -EIGEN_ATOL < value < 0:
        value = 0.0
    return DiscordResult(
        value=float(value),
        optimal_basis=MeasurementBasis.canonical(*best),
        mutual_information=float(mi),
        classical_correlation=best_j,
        converged=converged,
    )


def _simplex(x0, size: float = 0.1) -> np.ndarray:
    return np.array([x0, x0 + [size, 0.0], x0 + [0.0, size]])


def discord_normalized(rho, p, eps: float, units: str = "ln2_per_eps2", **kwargs) -> float:
    """Discord divided by ln2 * eps^2 (``ln2_per_eps2``) or ln2 * 2 eps^2 (``ln2_per_2eps2``)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    scale = {"ln2_per_eps2": LN2 * eps**2, "ln2_per_2eps2": LN2 * 2 * eps**2}
    if units not in scale:
        raise ValueError(f"units must be one of {sorted(scale)}")
    return discord(rho, p, **kwargs).value / scale[units]
