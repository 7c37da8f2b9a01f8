import numpy as np
import pytest

from ladderlab import cli, outputs
from ladderlab.config import (
    ConfigError,
    RunConfig,
    ladder_index,
    ladder_name,
    parse_config,
    serialize_config,
    with_overrides,
)
from ladderlab.labeling import Method
from ladderlab.operators import SystemSpec
from ladderlab.sweeps import SweepResult, config_hash, run_offset_charge_sweep, run_window_sweep

FIG1 = """
[system]
e_c = 0.05
e_j = 1.6
g = 0.025
n_g = 0.0

[labeling]
methods = ["continuity", "recursive", "overlap"]
ladder = "g"
delta = 0.01
"""

FIG5 = """
[system]
e_c = 0.05
e_j = 1.6
g = 0.025

[sweep]
n_g = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
ladders = ["g", "e"]
delta_overrides = [{ladder = "g", n_g = 0.1, delta = 0.015}, {ladder = "e", n_g = 0.3, delta = 0.015}]
"""

SMALL = """
[system]
e_c = 0.05
e_j = 1.6
g = 0.025
charge_cutoff = 2
fock_cutoff = 30

[labeling]
methods = ["continuity", "recursive"]
n_max = 15
truncation_margin = 5
"""


def test_round_trip():
    cfg = parse_config(FIG1)
    assert cfg.system == SystemSpec(0.05, 1.6, 0.025, 0.0)
    assert cfg.labeling.methods == (Method.CONTINUITY, Method.RECURSIVE, Method.OVERLAP)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)


def test_missing_field_named():
    with pytest.raises(ConfigError, match="e_j"):
        parse_config("[system]\ne_c = 0.05\ng = 0.01\n")


@pytest.mark.parametrize(
    "text, match",
    [
        ("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\nfoo = 1\n", "line 5.*unknown key"),
        ("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\n[extra]\n", "unknown section"),
        ("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\nomega_c = 2.0\n", "omega_c"),
        ("[system]\ne_c = -0.05\ne_j = 1.6\ng = 0.01\n", "e_c"),
        ("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\n[labeling]\ndelta = 0\n", "line 6.*delta"),
        ("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\n[labeling]\nmethods = ['magic']\n", "methods"),
        ("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\n[labeling]\nladder = 'x'\n", "ladder"),
        ("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\n[drive]\namplitude = 0.01\n", "omega_d"),
        ("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\n[sweep]\nladders = ['g']\n", "grid"),
        ("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\n[run]\nworkers = 0\n", "workers"),
        ("[system\n", "malformed"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_offset_sweep_overrides():
    cfg = parse_config(FIG5)
    assert cfg.sweep.ladders == (0, 1)
    assert cfg.sweep.delta_for(0, 0.1, 0.01) == 0.015
    assert cfg.sweep.delta_for(1, 0.3, 0.01) == 0.015
    assert cfg.sweep.delta_for(0, 0.3, 0.01) == 0.01
    assert parse_config(serialize_config(cfg)) == cfg


def test_ladder_names():
    assert ladder_index("g") == 0 and ladder_index("e") == 1 and ladder_index("3") == 3 and ladder_index(2) == 2
    assert ladder_name(0) == "g" and ladder_name(4) == "4"
    with pytest.raises(ValueError):
        ladder_index(-1)


def test_with_overrides():
    cfg = with_overrides(parse_config(FIG1), {"n_g": 0.2, "g": None}, {"delta": 0.02}, workers=3)
    assert cfg.system.n_g == 0.2 and cfg.system.g == 0.025 and cfg.labeling.delta == 0.02 and cfg.workers == 3
    assert config_hash(cfg) != config_hash(parse_config(FIG1))


def test_single_point_sweep_equals_plain_run(tmp_path):
    cfg = parse_config(SMALL + "[sweep]\nn_g = [0.0]\n")
    res = run_offset_charge_sweep(cfg, cache_dir=tmp_path)
    assert len(res.points) == 2 and not res.diagnostics
    from ladderlab.labeling import label
    from ladderlab.spectrum import solve

    sol = solve(cfg.system)
    plain = label(sol, 0, "continuity", 15, cfg.labeling.continuity())
    pt = res.find(method="continuity")[0]
    assert np.array_equal(pt.ladder.eigen_index, plain.eigen_index)
    out = res.write(tmp_path / "out")
    assert (out / f"ladder_{pt.tag}.csv").exists()
    text = (out / "manifest.txt").read_text()
    assert text.startswith("tool = ladderlab") and "config_hash" in text and "ceiling_fock" in text


def test_offset_sweep_parallel_matches_serial(tmp_path):
    text = SMALL + "[sweep]\nn_g = [0.0, 0.25]\nladders = ['g', 'e']\n"
    serial = run_offset_charge_sweep(parse_config(text), cache_dir=tmp_path)
    par = run_offset_charge_sweep(parse_config(text + "[run]\nworkers = 2\n"), cache_dir=tmp_path)
    assert [p.tag for p in serial.points] == [p.tag for p in par.points]
    for a, b in zip(serial.points, par.points):
        assert np.array_equal(a.ladder.eigen_index, b.ladder.eigen_index)


def test_window_sweep_identical_windows(tmp_path):
    cfg = parse_config(SMALL + "[sweep]\ndelta = [0.01, 0.01]\n")
    res = run_window_sweep(cfg, cache_dir=tmp_path)
    assert all(not div.diverged for *_, div in res.comparisons)
    assert len(res.find(method="continuity")) == 2


def test_outputs_round_trip():
    text = outputs._table({"a": 1}, ["x", "y"], [(1, 0.1), (2, 1 / 3)])
    meta, cols, data = outputs.read_table(text)
    assert meta == {"a": 1} and cols == ["x", "y"] and data[1, 1] == 1 / 3
    m = outputs.manifest_text({"b": {"c": 0.5, "d": [1, 2]}, "a": "x"})
    assert m.splitlines() == [m.splitlines()[0], "a = x", "b.c = 0.5", "b.d = [1, 2]"]


def test_cli_label_and_freq(tmp_path, monkeypatch):
    monkeypatch.delenv("LADDERLAB_CACHE", raising=False)
    cfgfile = tmp_path / "run.toml"
    cfgfile.write_text(SMALL)
    out = tmp_path / "o"
    assert cli.main(["freq", "--config", str(cfgfile), "--out", str(out)]) == 0
    for name in ("ladder_g_continuity.csv", "freq_g_recursive.csv", "features_g_continuity.txt", "manifest.txt"):
        assert (out / name).exists()
    _, cols, data = outputs.read_table((out / "ladder_g_continuity.csv").read_text())
    assert cols == ["n", "eigen_index", "energy", "nq_expect", "window_fallback"] and len(data) == 16
    # flags override the file; reruns are bit-identical
    out2 = tmp_path / "o2"
    assert cli.main(["freq", "--config", str(cfgfile), "--out", str(out2), "--delta", "0.01"]) == 0
    assert (out / "freq_g_continuity.csv").read_text() == (out2 / "freq_g_continuity.csv").read_text()


def test_cli_flags_only_and_errors(tmp_path, capsys):
    out = tmp_path / "s"
    args = ["spectrum", "--e-c", "0.05", "--e-j", "1.6", "--g", "0.01", "--charge-cutoff", "1",
            "--fock-cutoff", "4", "--out", str(out), "--no-cache"]
    assert cli.main(args) == 0
    assert "residual" in (out / "manifest.txt").read_text()
    assert cli.main(["label", "--e-c", "0.05", "--g", "0.01"]) == 2
    assert "e_j" in capsys.readouterr().err
    bad = tmp_path / "bad.toml"
    bad.write_text("[system]\ne_c = 0.05\ne_j = 1.6\ng = 0.01\nbogus = 1\n")
    assert cli.main(["label", "--config", str(bad)]) == 2
    assert "line 5" in capsys.readouterr().err


def test_cli_dynamics_and_compare(tmp_path):
    cfgfile = tmp_path / "run.toml"
    cfgfile.write_text(SMALL + "[drive]\namplitude = 0.002\nomega_d = 1.0015\nt_end = 20.0\ndt = 0.02\n"
                       "fock_cutoff_dyn = 20\n")
    out = tmp_path / "d"
    assert cli.main(["dynamics", "--config", str(cfgfile), "--out", str(out), "--no-cache"]) == 0
    _, cols, data = outputs.read_table((out / "trajectory.csv").read_text())
    assert cols == ["t", "re_alpha", "im_alpha", "nq", "photon_lab"] and len(data) == 41
    assert cli.main(["compare", "--config", str(cfgfile), "--out", str(out), "--no-cache", "--frame", "lab"]) == 0
    text = (out / "comparison.txt").read_text()
    assert "ladders continuity recursive divergence" in text and "trajectory" in text
    nodrive = tmp_path / "nodrive.toml"
    nodrive.write_text(SMALL)
    assert cli.main(["dynamics", "--config", str(nodrive), "--out", str(out), "--no-cache"]) == 2
    assert cli.main(["dynamics", "--config", str(tmp_path / "missing.toml")]) == 2


def test_cli_sweep_reports_diagnostics(tmp_path):
    cfgfile = tmp_path / "run.toml"
    # n_max beyond fock_cutoff - margin: each point records an error, exit code is non-zero
    cfgfile.write_text(SMALL.replace("truncation_margin = 5", "truncation_margin = 20") + "[sweep]\nn_g = [0.0]\n")
    assert cli.main(["sweep", "--config", str(cfgfile), "--out", str(tmp_path / "w"), "--no-cache"]) == 1
    assert "margin" in (tmp_path / "w" / "manifest.txt").read_text()
