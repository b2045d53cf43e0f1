import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from blockadesim import cli, runner
from blockadesim.discord import LN2, mutual_information
from blockadesim.dynamics import RfiDistribution, dominant_frequency
from blockadesim.model import DriveConfig, SpinSystem
from blockadesim.runner import ConfigError, CrestNotFoundError, ScenarioConfig, SweepConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SYNTH = CONFIGS / "three_qubit_synthetic.json"


def marginal_e(traj, site):
    return traj.excitation(site)


def test_preset_blockade2q_values():
    cfg = runner.preset("blockade2q")
    assert np.array_equal(cfg.drive.amplitudes, [217.0, 217.0])
    assert cfg.system.couplings[0, 1] == 868.0
    assert np.allclose(cfg.system.offsets, [434.0, 434.0])
    assert cfg.duration == pytest.approx(5 / (np.sqrt(2) * 217))


@pytest.mark.parametrize(
    "name,drive",
    [("freeze3q_q23", (50, 10, 10)), ("freeze3q_q3", (50, 50, 10)), ("freeze3q_q13", (10, 50, 10)),
     ("freeze2q_q2", (217, 54.25)), ("freeze2q_q1", (54.25, 217))],
)
def test_preset_drives(name, drive):
    couplings = SYNTH if name.startswith("freeze3q") else None
    assert np.array_equal(runner.preset(name, couplings=couplings).drive.amplitudes, drive)


def test_preset_wrong_coupling_shape():
    with pytest.raises(ConfigError, match="couplings"):
        runner.preset("blockade2q", couplings=SYNTH)


@pytest.mark.parametrize("name", ["blockade3q", "freeze3q_q23", "freeze3q_q13", "freeze3q_q3"])
def test_three_qubit_presets_need_couplings(name):
    with pytest.raises(ConfigError):
        runner.preset(name)


def test_preset_unknown():
    with pytest.raises(ConfigError):
        runner.preset("blockade4q")


def test_preset_couplings_forms():
    m = json.loads(SYNTH.read_text())["couplings"]
    a = runner.preset("blockade3q", couplings=m)
    b = runner.preset("blockade3q", couplings=str(SYNTH))
    c = runner.preset("blockade3q", couplings={"couplings": m})
    assert np.array_equal(a.system.couplings, b.system.couplings)
    assert np.array_equal(a.system.couplings, c.system.couplings)
    assert np.allclose(a.system.offsets, np.asarray(m).sum(axis=1) / 2)


def test_rabi_presets_are_noninteracting():
    for name in ("rabi2q", "rabi3q"):
        s = runner.preset(name).system
        assert not s.couplings.any() and not s.offsets.any()


def test_sweep_preset():
    sw = runner.preset("sweep_fig4")
    assert isinstance(sw, SweepConfig)
    assert sw.values[0] == 217.0 and sw.values[-1] == 54.2
    assert sw.swept_qubit == 2


def test_scenario_noninteracting_rabi():
    cfg = runner.preset("rabi2q")
    traj = runner.run_scenario(cfg, with_discord=False)
    t = traj.times
    assert np.allclose(traj.population("gg"), np.cos(np.pi * 217 * t) ** 4, atol=1e-8)
    at = runner.run_scenario(cfg, times=[1 / (2 * 217)], with_discord=False)
    assert at.population("ee")[0] >= 0.95


def test_scenario_blockade_channel():
    traj = runner.run_scenario(runner.preset("blockade2q"), with_discord=False)
    assert traj.population("ee").max() <= 0.1
    plus = traj.overlap(np.array([0, 1, 1, 0]) / np.sqrt(2))
    # population stays in span{gg, +}
    assert np.min(traj.population("gg") + plus) > 0.9


def test_scenario_freezing():
    cfg = runner.preset("freeze2q_q2")
    t = np.linspace(0, 0.012, 241)
    traj = runner.run_scenario(cfg, times=t, with_discord=False)
    assert marginal_e(traj, 2).max() < 0.1
    assert marginal_e(traj, 1).max() > 0.9


@pytest.mark.parametrize("name,frozen", [("freeze3q_q23", (2, 3)), ("freeze3q_q13", (1, 3)), ("freeze3q_q3", (3,))])
def test_three_qubit_freezing(name, frozen):
    cfg = runner.preset(name, couplings=SYNTH)
    traj = runner.run_scenario(cfg, with_discord=False)
    for site in frozen:
        assert marginal_e(traj, site).max() < 0.1
    driven = [s for s in (1, 2, 3) if s not in frozen]
    # the strongly driven subspace completes at least two oscillations
    total = sum(marginal_e(traj, s) for s in driven)
    crossings = np.sum(np.diff(np.sign(total - 0.5)) != 0)
    assert crossings >= 4


def test_preset_invariants():
    for name in ("rabi2q", "blockade2q", "freeze2q_q2", "freeze2q_q1"):
        cfg = runner.preset(name)
        cfg = replace(cfg, sample_count=41)
        traj = runner.run_scenario(cfg)
        assert np.allclose(traj.populations.sum(axis=1), 1, atol=1e-9)
        d = traj.discord["1|2"]
        mi = np.array([mutual_information(r, "1|2") for r in traj.states])
        assert np.all(d >= 0) and np.all(d <= mi + 1e-7)


def test_blockade3q_frequency():
    cfg = runner.preset("blockade3q", couplings=SYNTH)
    traj = runner.run_scenario(cfg, with_discord=False)
    f = dominant_frequency(traj.times, traj.population("ggg"))
    assert f == pytest.approx(np.sqrt(3) * 10, rel=0.03)


def test_sweep_shape():
    table = runner.run_sweep(runner.preset("sweep_fig4")).columns
    ge, eg, dis = table["pop_ge"], table["pop_eg"], table["discord_2|1"]
    assert abs(ge[0] - eg[0]) < 0.02
    gap = eg - ge
    assert np.all(np.diff(gap) > 0)
    assert np.argmax(gap) == gap.size - 1
    assert np.all(np.diff(dis) <= 1e-3)  # values are ordered by decreasing nu2


def test_sweep_crest_not_found():
    with pytest.raises(CrestNotFoundError):
        runner.find_first_crest(np.linspace(0, 1, 10), np.linspace(0, 1, 10))


def test_crest_interpolation():
    t = np.linspace(0, 1, 21)
    assert runner.find_first_crest(t, -((t - 0.4321) ** 2)) == pytest.approx(0.4321, abs=1e-12)


def test_emit_header_and_shape(tmp_path):
    cfg = replace(runner.preset("blockade2q"), sample_count=5)
    out = runner.emit(runner.run_scenario(cfg), "csv", tmp_path / "a.csv")
    lines = out.read_text().splitlines()
    assert lines[0] == "t_ms,pop_gg,pop_ge,pop_eg,pop_ee,discord_1|2"
    assert len(lines) == 6


def test_emit_no_discord(tmp_path):
    cfg = replace(runner.preset("blockade2q"), sample_count=5, discord_partitions=())
    text = runner.render(runner.run_scenario(cfg), "csv")
    assert text.splitlines()[0] == "t_ms,pop_gg,pop_ge,pop_eg,pop_ee"


def test_emit_json_roundtrip_floats(tmp_path):
    cfg = replace(runner.preset("blockade2q"), sample_count=7)
    traj = runner.run_scenario(cfg)
    doc = json.loads(runner.render(traj, "json"))
    assert doc["columns"][0] == "t_ms"
    assert np.array_equal(np.array(doc["rows"])[:, 1], traj.population("gg"))
    rows = [line.split(",") for line in runner.render(traj, "csv").splitlines()[1:]]
    assert np.array_equal(np.array([float(r[4]) for r in rows]), traj.population("ee"))
    with pytest.raises(ValueError):
        runner.render(traj, "xml")


def test_rerun_byte_identical(tmp_path):
    cfg = replace(runner.preset("blockade2q"), sample_count=21, rfi=RfiDistribution.default())
    a = runner.render(runner.run_scenario(cfg), "csv")
    b = runner.render(runner.run_scenario(cfg), "csv")
    c = runner.render(runner.run_scenario(cfg, threads=4), "csv")
    assert a == b == c


def test_sweep_thread_independent():
    sw = runner.preset("sweep_fig4")
    sw = replace(sw, values=sw.values[::4])
    a = runner.render(runner.run_sweep(sw, threads=1), "csv")
    b = runner.render(runner.run_sweep(sw, threads=3), "csv")
    assert a == b


def test_config_roundtrip():
    for name in ("blockade2q", "rabi3q", "freeze2q_q1"):
        cfg = runner.preset(name)
        again = runner.scenario_from_dict(json.loads(json.dumps(runner.scenario_to_dict(cfg))))
        assert runner.scenario_to_dict(again) == runner.scenario_to_dict(cfg)
    sw = runner.preset("sweep_fig4")
    assert runner.sweep_to_dict(runner.sweep_from_dict(runner.sweep_to_dict(sw))) == runner.sweep_to_dict(sw)


def base_doc():
    return runner.scenario_to_dict(runner.preset("blockade2q"))


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda d: d.pop("duration"), "duration"),
        (lambda d: d.update(duration=-1), "duration"),
        (lambda d: d.update(samples=1), "samples"),
        (lambda d: d["drive"].update(amplitudes=[217.0]), "drive.amplitudes"),
        (lambda d: d.update(discord=["1|3"]), "discord"),
        (lambda d: d["initial"].update(state="zzz"), "initial.state"),
        (lambda d: d["evolution"].update(scheme="euler"), "evolution.scheme"),
        (lambda d: d["system"].update(couplings=[[0, 1], [2, 0]]), "system."),
        (lambda d: d["system"].update(t1=[0.01, 0.01], t2=[0.05, 0.05]), "system."),
    ],
)
def test_config_validation_messages(mutate, field):
    d = base_doc()
    mutate(d)
    with pytest.raises(ConfigError, match=field.replace(".", r"\.").replace("|", r"\|")):
        runner.scenario_from_dict(d)


def test_open_config_uses_rk4():
    d = base_doc()
    d["system"].update(t1=[0.5, 0.5], t2=[0.05, 0.05])
    d["evolution"] = {}
    cfg = runner.scenario_from_dict(d)
    assert cfg.resolved_scheme == "fixed-step-rk4"


def test_pps_initial_and_deviation_discord():
    s = SpinSystem(2, offsets=[434, 434], couplings=[[0, 868], [868, 0]], eps=[1e-5, 0.5e-5])
    cfg = ScenarioConfig(
        s, DriveConfig([0.0, 0.0]), duration=1e-3, sample_count=2,
        initial=runner.InitialState("pps", eps=None), discord_partitions=("1|2",),
    )
    rho = runner.prepare_initial(cfg)
    pops = np.diag(rho).real
    assert np.ptp(pops[1:]) < 1e-8 and pops[0] > pops[1]


def test_deviation_mode_bell_discord():
    cfg = ScenarioConfig(
        SpinSystem(2), DriveConfig([0.0, 0.0]), duration=1e-3, sample_count=2,
        initial=runner.InitialState("plus", eps=1e-5), discord_partitions=("1|2",), discord_mode="deviation",
    )
    traj = runner.run_scenario(cfg)
    assert np.allclose(traj.discord["1|2"], LN2, atol=1e-6)


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_cli_simulate(tmp_path, capsys):
    doc = base_doc()
    doc["samples"] = 11
    cfg = write(tmp_path, "c.json", doc)
    out = tmp_path / "o.csv"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert out.read_text().startswith("t_ms,pop_gg")
    out2 = tmp_path / "o2.csv"
    assert cli.main(["--threads", "3", "simulate", "--config", cfg, "--out", str(out2)]) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_cli_sweep(tmp_path):
    sw = runner.preset("sweep_fig4")
    doc = runner.sweep_to_dict(replace(sw, values=(217.0, 54.2)))
    out = tmp_path / "s.json"
    assert cli.main(["sweep", "--config", write(tmp_path, "s.json.in", doc), "--out", str(out), "--format", "json"]) == 0
    assert json.loads(out.read_text())["columns"][-1] == "discord_2|1"


def test_cli_preset(capsys, tmp_path):
    assert cli.main(["preset", "--name", "blockade2q", "--print"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["drive"]["amplitudes"] == [217.0, 217.0]
    assert cli.main(["preset", "--name", "blockade3q"]) == 2
    assert cli.main(["preset", "--name", "blockade3q", "--couplings", str(SYNTH), "--out", str(tmp_path / "p.json")]) == 0


def test_cli_tomo(tmp_path, capsys):
    doc = base_doc()
    doc["samples"] = 3
    assert cli.main(["tomo", "--config", write(tmp_path, "c.json", doc)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["frobenius_error"] < 1e-10
    assert len(out["record"]) == 16


def test_cli_exit_codes(tmp_path):
    bad = base_doc()
    bad["duration"] = 0
    assert cli.main(["simulate", "--config", write(tmp_path, "b.json", bad), "--out", str(tmp_path / "x")]) == 2
    (tmp_path / "broken.json").write_text("{nope")
    assert cli.main(["simulate", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 1
    assert cli.main(["--threads", "0", "preset", "--name", "rabi2q"]) == 2
    good = write(tmp_path, "g.json", base_doc())
    assert cli.main(["simulate", "--config", good, "--out", str(tmp_path / "nodir" / "x.csv")]) == 1
