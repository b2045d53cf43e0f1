"""Scenario configuration, presets, blockade-to-freezing sweeps and data emission."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .discord import Partition, discord
from .dynamics import (
    EXACT,
    RK4,
    EvolutionConfig,
    RfiDistribution,
    Trajectory,
    ensemble_average,
    evolve_closed,
    evolve_open,
)
from .model import DriveConfig, SpinSystem, build_nmr_hamiltonian, resonant_offsets
from .nmrtools import Delay, Gradient, PulseSequence, Rotation, pps_sequence, run_sequence
from .qops import basis_index, basis_labels
from .states import as_density, basis_state, effective_state, plus_minus_states, pseudopure, thermal_state, w_basis

PERIODS = 5
SAMPLES_PER_PERIOD = 40


class ConfigError(ValueError):
    """Invalid scenario or sweep configuration; the message names the field."""


class CrestNotFoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class InitialState:
    """Named state, optionally mixed into a pseudopure state with purity ``eps``.

    ``state`` is one of ``ground``, a basis label (``"ge"``, ``"001"``), ``plus``,
    ``minus``, ``W1``/``W2``/``W3``, ``thermal`` or ``pps`` (thermal state run
    through the shipped preparation sequence). ``sequence`` is applied last.
    """

    state: str = "ground"
    eps: Optional[float] = None
    sequence: tuple = ()


@dataclass(frozen=True)
class ScenarioConfig:
    system: SpinSystem
    drive: DriveConfig
    duration: float
    sample_count: int = PERIODS * SAMPLES_PER_PERIOD + 1
    initial: InitialState = InitialState()
    rfi: Optional[RfiDistribution] = None
    discord_partitions: tuple = ()
    scheme: Optional[str] = None
    step: Optional[float] = None
    discord_mode: str = "full"
    name: str = ""

    def __post_init__(self):
        n = self.system.n_qubits
        if self.drive.n_qubits != n:
            raise ConfigError(f"drive.amplitudes: expected {n} entries, got {self.drive.n_qubits}")
        if not self.duration > 0:
            raise ConfigError("duration: must be positive")
        if self.sample_count < 2:
            raise ConfigError("samples: need at least 2")
        try:
            parts = tuple(Partition.parse(p, n) for p in self.discord_partitions)
        except ValueError as exc:
            raise ConfigError(f"discord: {exc}") from None
        object.__setattr__(self, "discord_partitions", parts)
        if self.scheme not in (None, EXACT, RK4):
            raise ConfigError(f"evolution.scheme: unknown scheme {self.scheme!r}")
        if self.scheme == EXACT and not self.system.is_closed:
            raise ConfigError("evolution.scheme: exact-unitary cannot include T1/T2 relaxation")
        if self.discord_mode not in ("full", "deviation"):
            raise ConfigError("discord_mode: must be 'full' or 'deviation'")
        if self.discord_mode == "deviation" and not self.initial.eps:
            raise ConfigError("discord_mode: 'deviation' needs initial.eps")
        _check_initial(self.initial.state, n)

    @property
    def resolved_scheme(self) -> str:
        if self.scheme is not None:
            return self.scheme
        return EXACT if self.system.is_closed else RK4

    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.duration, self.sample_count)


@dataclass(frozen=True)
class SweepConfig:
    base: ScenarioConfig
    values: tuple
    swept_qubit: int = 2
    discord_partition: Optional[str] = "2|1"
    crest_samples: int = 201

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values or any(v <= 0 for v in values):
            raise ConfigError("values: must be a non-empty list of positive amplitudes")
        if not 1 <= self.swept_qubit <= self.base.system.n_qubits:
            raise ConfigError("swept_qubit: out of range")
        object.__setattr__(self, "values", values)


@dataclass
class SweepTable:
    columns: dict


def _check_initial(name: str, n: int) -> None:
    if name in ("ground", "thermal", "pps"):
        return
    if name in ("plus", "minus"):
        if n != 2:
            raise ConfigError(f"initial.state: {name!r} is a two-qubit state")
        return
    if name in ("W1", "W2", "W3"):
        if n != 3:
            raise ConfigError(f"initial.state: {name!r} is a three-qubit state")
        return
    try:
        basis_index(name)
    except ValueError:
        raise ConfigError(f"initial.state: unknown state {name!r}") from None
    if len(name) != n:
        raise ConfigError(f"initial.state: label {name!r} does not match {n} qubits")


def prepare_initial(cfg: ScenarioConfig) -> np.ndarray:
    s, init = cfg.system, cfg.initial
    n = s.n_qubits
    name = init.state
    if name == "thermal":
        rho = thermal_state(s)
    elif name == "pps":
        rho = run_sequence(pps_sequence(s), thermal_state(s))
    else:
        if name == "ground":
            psi = basis_state("g" * n)
        elif name in ("plus", "minus"):
            psi = plus_minus_states()[0 if name == "plus" else 1]
        elif name in ("W1", "W2", "W3"):
            psi = w_basis(3)[int(name[1]) - 1]
        else:
            psi = basis_state(name)
        rho = pseudopure(psi, init.eps) if init.eps is not None else as_density(psi)
    if init.sequence:
        rho = run_sequence(PulseSequence(init.sequence, s), rho)
    return rho


def _evolver(cfg: ScenarioConfig, rho0, times):
    ecfg = EvolutionConfig(times, cfg.resolved_scheme, cfg.step)
    s = cfg.system

    def evolve(d: DriveConfig) -> Trajectory:
        if ecfg.scheme == EXACT:
            return evolve_closed(build_nmr_hamiltonian(s, d), rho0, ecfg)
        return evolve_open(s, d, rho0, ecfg)

    return evolve


def _discord_series(cfg: ScenarioConfig, states, p: Partition, threads: int) -> np.ndarray:
    if cfg.discord_mode == "deviation":
        states = [effective_state(r, cfg.initial.eps) for r in states]

    def one(rho):
        return discord(rho, p).value

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(one, states)))
    return np.array([one(r) for r in states])


def run_scenario(cfg: ScenarioConfig, threads: int = 1, times=None, with_discord: bool = True) -> Trajectory:
    """Evolve the configured register and sample populations and discord."""
    rho0 = prepare_initial(cfg)
    times = cfg.sample_times() if times is None else np.asarray(times, dtype=float)
    evolve = _evolver(cfg, rho0, times)
    if cfg.rfi is not None:
        traj = ensemble_average(cfg.rfi, cfg.drive, evolve, threads=threads)
    else:
        traj = evolve(cfg.drive)
    if with_discord:
        for p in cfg.discord_partitions:
            traj.discord[p.label] = _discord_series(cfg, traj.states, p, threads)
    return traj


def effective_rabi_frequency(d: DriveConfig) -> float:
    """Collective Rabi frequency sqrt(sum nu_i^2) of a fully blockaded register (Hz)."""
    return float(np.sqrt(np.sum(d.amplitudes**2)))


def find_first_crest(times, signal) -> float:
    """Time of the first maximum, refined by a parabola through the discrete peak."""
    y = np.asarray(signal, dtype=float)
    k = int(np.argmax(y))
    if k == 0 or k == y.size - 1:
        raise CrestNotFoundError("no interior maximum within the first effective period")
    y0, y1, y2 = y[k - 1 : k + 2]
    denom = y0 - 2 * y1 + y2
    shift = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    dt = times[1] - times[0]
    return float(times[k] + shift * dt)


def run_sweep(cfg: SweepConfig, threads: int = 1) -> SweepTable:
    """Populations and discord at the first crest of the effective Rabi oscillation.

    For each swept amplitude the first crest of the total single-excitation
    population is located within one effective period 1/sqrt(sum nu_i^2).
    """
    base = cfg.base
    n = base.system.n_qubits
    labels = basis_labels(n)
    singles = [k for k, lab in enumerate(labels) if lab.count("e") == 1]
    part = Partition.parse(cfg.discord_partition, n) if cfg.discord_partition else None

    def point(value):
        amps = base.drive.amplitudes.copy()
        amps[cfg.swept_qubit - 1] = value
        scen = replace(base, drive=DriveConfig(amps, base.drive.phases), discord_partitions=())
        window = 1 / effective_rabi_frequency(scen.drive)
        grid = np.linspace(0.0, window, cfg.crest_samples)
        traj = run_scenario(scen, times=grid, with_discord=False)
        t_crest = find_first_crest(grid, traj.populations[:, singles].sum(axis=1))
        crest = run_scenario(scen, times=[t_crest], with_discord=False)
        row = [value, t_crest * 1e3, *crest.populations[0]]
        if part is not None:
            rho = crest.states[0]
            if base.discord_mode == "deviation":
                rho = effective_state(rho, base.initial.eps)
            row.append(discord(rho, part).value)
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(point, cfg.values))
    else:
        rows = [point(v) for v in cfg.values]
    names = ["nu_rf_hz", "t_crest_ms"] + [f"pop_{lab}" for lab in labels]
    if part is not None:
        names.append(f"discord_{part.label}")
    data = np.array(rows, dtype=float)
    return SweepTable({name: data[:, k] for k, name in enumerate(names)})


# --- presets -------------------------------------------------------------

TWO_QUBIT_J = 868.0
TWO_QUBIT_RF = 217.0
THREE_QUBIT_RF = 10.0

_PRESET_DRIVES = {
    "rabi2q": (TWO_QUBIT_RF, TWO_QUBIT_RF),
    "blockade2q": (TWO_QUBIT_RF, TWO_QUBIT_RF),
    "freeze2q_q2": (TWO_QUBIT_RF, TWO_QUBIT_RF / 4),
    "freeze2q_q1": (TWO_QUBIT_RF / 4, TWO_QUBIT_RF),
    "rabi3q": (THREE_QUBIT_RF,) * 3,
    "blockade3q": (THREE_QUBIT_RF,) * 3,
    "freeze3q_q23": (50.0, 10.0, 10.0),
    "freeze3q_q13": (10.0, 50.0, 10.0),
    "freeze3q_q3": (50.0, 50.0, 10.0),
}

PRESETS = tuple(_PRESET_DRIVES) + ("sweep_fig4",)


def register_defaults() -> dict:
    """Shipped register parameters (couplings in Hz, null where not known)."""
    text = resources.files("blockadesim.data").joinpath("registers.json").read_text(encoding="utf-8")
    return json.loads(text)


def _load_couplings(couplings):
    if couplings is None:
        return None, None
    if isinstance(couplings, (str, Path)):
        couplings = json.loads(Path(couplings).read_text(encoding="utf-8"))
    if isinstance(couplings, dict):
        return couplings.get("couplings"), couplings.get("offsets")
    return couplings, None


def preset(name: str, couplings=None) -> Union[ScenarioConfig, SweepConfig]:
    """Scenario for one of the named experiments.

    Interacting three-qubit presets need ``couplings``: a 3x3 matrix in Hz, a
    dict with ``couplings`` (and optionally ``offsets``), or a JSON file path.
    """
    if name == "sweep_fig4":
        return SweepConfig(preset("blockade2q"), tuple(np.round(np.linspace(TWO_QUBIT_RF, 54.2, 9), 2)))
    if name not in _PRESET_DRIVES:
        raise ConfigError(f"preset: unknown name {name!r}; choose from {', '.join(PRESETS)}")
    drive = DriveConfig(_PRESET_DRIVES[name])
    n = drive.n_qubits
    interacting = not name.startswith("rabi")
    defaults = register_defaults()["two_qubit" if n == 2 else "three_qubit"]
    jmat, offsets = _load_couplings(couplings)
    if jmat is None:
        jmat = defaults["couplings"]
    if interacting:
        if jmat is None:
            raise ConfigError(f"preset {name}: three-qubit couplings must be supplied (Hz)")
        try:
            if offsets is None:
                offsets = resonant_offsets(jmat)
            system = SpinSystem(n, offsets=offsets, couplings=jmat)
        except ValueError as exc:
            raise ConfigError(f"preset {name}: couplings: {exc}") from None
    else:
        system = SpinSystem(n)
    if interacting:
        f_eff = effective_rabi_frequency(drive)
    else:
        f_eff = float(drive.amplitudes.max())
    partitions = ("1|2",) if n == 2 else ("1|23",)
    return ScenarioConfig(
        system=system,
        drive=drive,
        duration=PERIODS / f_eff,
        sample_count=PERIODS * SAMPLES_PER_PERIOD + 1,
        discord_partitions=partitions,
        name=name,
    )


def noninteracting(cfg: ScenarioConfig) -> ScenarioConfig:
    """Same drives with couplings and offsets switched off."""
    s = cfg.system
    return replace(cfg, system=SpinSystem(s.n_qubits, t1=s.t1, t2=s.t2, eps=s.eps), name=cfg.name + "_J0")


# --- config files ---------------------------------------------------------


def _get(d: dict, key: str, where: str, default=...):
    if key in d:
        return d[key]
    if default is ...:
        raise ConfigError(f"{where}{key}: required")
    return default


def _element_from_dict(e: dict, where: str):
    kind = e.get("type")
    try:
        if kind == "rotation":
            return Rotation(tuple(e["sites"]), float(e["angle"]), float(e.get("phase", 0.0)))
        if kind == "delay":
            return Delay(float(e["duration"]))
        if kind == "gradient":
            return Gradient()
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.type: unknown pulse element {kind!r}")


def _element_to_dict(e) -> dict:
    if isinstance(e, Rotation):
        return {"type": "rotation", "sites": list(e.sites), "angle": e.angle, "phase": e.phase}
    if isinstance(e, Delay):
        return {"type": "delay", "duration": e.duration}
    return {"type": "gradient"}


def scenario_from_dict(d: dict) -> ScenarioConfig:
    try:
        sysd = _get(d, "system", "")
        n = int(_get(sysd, "n_qubits", "system."))
        try:
            system = SpinSystem(
                n,
                offsets=sysd.get("offsets"),
                couplings=sysd.get("couplings"),
                t1=sysd.get("t1"),
                t2=sysd.get("t2"),
                eps=sysd.get("eps"),
            )
        except ValueError as exc:
            raise ConfigError(f"system.{exc}") from None
        drv = _get(d, "drive", "")
        try:
            drive = DriveConfig(_get(drv, "amplitudes", "drive."), drv.get("phases"))
        except ValueError as exc:
            raise ConfigError(f"drive.amplitudes: {exc}") from None
        rfi = None
        rfid = d.get("rfi")
        if rfid == "default":
            rfi = RfiDistribution.default()
        elif rfid:
            try:
                rfi = RfiDistribution(rfid["scales"], rfid["weights"])
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"rfi.{exc}") from None
        initd = d.get("initial", {"state": "ground"})
        if isinstance(initd, str):
            initd = {"state": initd}
        seq = tuple(
            _element_from_dict(e, f"initial.sequence[{k}]") for k, e in enumerate(initd.get("sequence", []))
        )
        eps = initd.get("eps")
        if eps is not None and not 0 <= eps <= 1:
            raise ConfigError("initial.eps: must lie in [0, 1]")
        initial = InitialState(str(initd.get("state", "ground")), eps, seq)
        evo = d.get("evolution", {}) or {}
        return ScenarioConfig(
            system=system,
            drive=drive,
            duration=float(_get(d, "duration", "")),
            sample_count=int(d.get("samples", PERIODS * SAMPLES_PER_PERIOD + 1)),
            initial=initial,
            rfi=rfi,
            discord_partitions=tuple(d.get("discord", ())),
            scheme=evo.get("scheme"),
            step=evo.get("step"),
            discord_mode=d.get("discord_mode", "full"),
            name=d.get("name", ""),
        )
    except ConfigError:
        raise
    except (TypeError, AttributeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from None


def _vec(a):
    return [None if (v is None or not np.isfinite(v)) else float(v) for v in np.asarray(a, dtype=float)]


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    s = cfg.system
    system = {"n_qubits": s.n_qubits, "offsets": _vec(s.offsets), "couplings": [_vec(r) for r in s.couplings]}
    if s.t1 is not None:
        system["t1"] = _vec(s.t1)
    if s.t2 is not None:
        system["t2"] = _vec(s.t2)
    if s.eps is not None:
        system["eps"] = _vec(s.eps)
    out = {
        "name": cfg.name,
        "system": system,
        "drive": {"amplitudes": _vec(cfg.drive.amplitudes), "phases": _vec(cfg.drive.phases)},
        "rfi": None if cfg.rfi is None else {"scales": _vec(cfg.rfi.scales), "weights": _vec(cfg.rfi.weights)},
        "initial": {"state": cfg.initial.state},
        "duration": cfg.duration,
        "samples": cfg.sample_count,
        "discord": [p.label for p in cfg.discord_partitions],
        "evolution": {"scheme": cfg.resolved_scheme, "step": cfg.step},
    }
    if cfg.initial.eps is not None:
        out["initial"]["eps"] = cfg.initial.eps
    if cfg.initial.sequence:
        out["initial"]["sequence"] = [_element_to_dict(e) for e in cfg.initial.sequence]
    if cfg.discord_mode != "full":
        out["discord_mode"] = cfg.discord_mode
    return out


def sweep_from_dict(d: dict) -> SweepConfig:
    base = scenario_from_dict(_get(d, "base", ""))
    try:
        return SweepConfig(
            base=base,
            values=tuple(_get(d, "values", "")),
            swept_qubit=int(d.get("swept_qubit", 2)),
            discord_partition=d.get("discord", "2|1"),
            crest_samples=int(d.get("crest_samples", 201)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"sweep: {exc}") from None


def sweep_to_dict(cfg: SweepConfig) -> dict:
    return {
        "base": scenario_to_dict(cfg.base),
        "values": list(cfg.values),
        "swept_qubit": cfg.swept_qubit,
        "discord": cfg.discord_partition,
        "crest_samples": cfg.crest_samples,
    }


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


# --- output ---------------------------------------------------------------


def result_columns(result: Union[Trajectory, SweepTable]) -> dict:
    if isinstance(result, SweepTable):
        return result.columns
    cols = {"t_ms": result.times * 1e3}
    pops = result.populations
    for k, lab in enumerate(result.labels):
        cols[f"pop_{lab}"] = pops[:, k]
    for label, values in result.discord.items():
        cols[f"discord_{label}"] = values
    return cols


def _num(x) -> float:
    return float(x)


def render(result: Union[Trajectory, SweepTable], fmt: str = "csv") -> str:
    cols = result_columns(result)
    names = list(cols)
    rows = [[_num(cols[c][k]) for c in names] for k in range(len(cols[names[0]]))]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([repr(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps({"columns": names, "rows": rows}, indent=1) + "\n"
    raise ValueError(f"format must be csv or json, got {fmt!r}")


def emit(result: Union[Trajectory, SweepTable], fmt: str, path) -> Path:
    """Write ``result`` as CSV or JSON (UTF-8, '.' decimals, shortest round-trip floats)."""
    path = Path(path)
    path.write_text(render(result, fmt), encoding="utf-8")
    return path
