import json

import numpy as np
import pytest
from click.testing import CliRunner

from isacpack.cli import SCHEMAS, main
from isacpack.io import read_csv, read_signals, write_reference

TOY = """\
seed: 1
problem:
  M: 2
  n_tx: 4
  n_r: 2
  eps: 0.3
  reference: {kind: lfm}
eval:
  snr_db: [0.0, 4.0]
  trials: 2000
  pd_trials: 200
  calib_trials: 2000
  angle_step: 2.0
  n_channels: 2
sweep:
  d_values: [0.0, 1.0]
"""


@pytest.fixture
def toy(tmp_path):
    p = tmp_path / "toy.yaml"
    p.write_text(TOY)
    return p


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def test_help_lists_schemas():
    r = invoke("--help")
    assert r.exit_code == 0 and "tradeoff.csv" in r.output
    for cmd in ["design", "eval", "sweep-tradeoff", "gen-channel", "gen-reference"]:
        assert invoke(cmd, "--help").exit_code == 0
    assert set(SCHEMAS) >= {"ser.csv", "af.csv", "pd.csv"}


def test_design_and_manifest_rerun(toy, tmp_path):
    out = tmp_path / "a"
    r = invoke("design", "--config", toy, "--out", out)
    assert r.exit_code == 0, r.output
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "design" and man["seed"] == 1
    X = read_signals(out / "signals.csv")
    assert X.shape == (2, 8)
    res = json.loads((out / "result.json").read_text())
    assert max(res["similarity"]) <= 0.3 + 1e-4
    r = invoke("design", "--config", out / "manifest.json", "--out", tmp_path / "b")
    assert r.exit_code == 0
    assert (tmp_path / "b" / "signals.csv").read_bytes() == (out / "signals.csv").read_bytes()


def test_eps_zero_returns_reference(toy, tmp_path):
    out = tmp_path / "z"
    toy.write_text(TOY.replace("eps: 0.3", "eps: 0.0"))
    assert invoke("design", "--config", toy, "--out", out).exit_code == 0
    invoke("gen-reference", "--config", toy, "--out", out)
    x0 = np.array([float(r[0]) for r in read_csv(out / "reference.csv")[1]])
    np.testing.assert_allclose(read_signals(out / "signals.csv"), np.tile(x0, (2, 1)), atol=1e-12)


def test_eval_all_metrics(toy, tmp_path):
    out = tmp_path / "e"
    args = ["eval", "--config", toy, "--out", out, "--threads", 2]
    for m in ["ser", "cdf", "beampattern", "af", "pd", "similarity"]:
        args += ["--metric", m]
    r = invoke(*args)
    assert r.exit_code == 0, r.output
    for m in ["ser", "cdf", "beampattern", "af", "pd", "similarity"]:
        assert (out / f"{m}.csv").is_file()
    header, rows = read_csv(out / "af.csv")
    assert header == ["signal", "delay", "doppler", "value"]
    vals = np.array([float(r[3]) for r in rows if r[0] == "ref"])
    assert vals.max() == 1.0
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["outputs"]) == {f"{m}.csv" for m in
                                  ["ser", "cdf", "beampattern", "af", "pd", "similarity"]}


def test_eval_from_signals(toy, tmp_path):
    invoke("design", "--config", toy, "--out", tmp_path / "d")
    r = invoke("eval", "--config", toy, "--out", tmp_path / "e", "--metric", "similarity",
               "--signals", tmp_path / "d" / "signals.csv")
    assert r.exit_code == 0
    man = json.loads((tmp_path / "e" / "manifest.json").read_text())
    assert "signals" in man["inputs"]


def test_gen_commands(toy, tmp_path):
    out = tmp_path / "g"
    assert invoke("gen-channel", "--config", toy, "--out", out, "--seed", 4).exit_code == 0
    header, rows = read_csv(out / "channel.csv")
    assert header == ["row", "col", "re", "im"] and len(rows) == 8
    assert invoke("gen-reference", "--config", toy, "--out", out).exit_code == 0
    assert len(read_csv(out / "reference.csv")[1]) == 8


def test_sweep(toy, tmp_path):
    out = tmp_path / "s"
    r = invoke("sweep-tradeoff", "--config", toy, "--out", out)
    assert r.exit_code == 0, r.output
    header, rows = read_csv(out / "tradeoff.csv")
    assert header[:3] == ["d_target", "eps", "d_achieved"] and len(rows) == 2
    assert float(rows[0][1]) <= float(rows[1][1])


def test_config_error_exit_3(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("problem: {bogus: 1}\n")
    out = tmp_path / "never"
    r = CliRunner().invoke(main, ["design", "--config", str(bad), "--out", str(out)])
    assert r.exit_code == 3
    assert json.loads(r.stderr if hasattr(r, "stderr") else r.output)["exit_code"] == 3
    assert not out.exists()
    r = CliRunner().invoke(main, ["design", "--config", str(tmp_path / "missing.yaml"),
                                  "--out", str(out)])
    assert r.exit_code == 3 and not out.exists()


def test_missing_signals_exit_3(toy, tmp_path):
    out = tmp_path / "m"
    r = CliRunner().invoke(main, ["eval", "--config", str(toy), "--out", str(out),
                                  "--signals", str(tmp_path / "none.csv")])
    assert r.exit_code == 3 and not out.exists()


def test_infeasible_exit_2(toy, tmp_path):
    ref = tmp_path / "ref.csv"
    write_reference(ref, np.full(8, 3.0))  # power 72 against a budget of 1
    toy.write_text(TOY.replace("reference: {kind: lfm}", f"reference: {{kind: file, path: {ref}}}"))
    out = tmp_path / "inf"
    r = CliRunner().invoke(main, ["design", "--config", str(toy), "--out", str(out)])
    assert r.exit_code == 2
    assert not out.exists()
