import hashlib
import json
from pathlib import Path

import pytest

from repp_lab.cli import main
from repp_lab.config import load_config
from repp_lab.errors import ConfigError

MINIMAL = """\
[system]
kind = digit_shift
bases = 2

[observable]
g = g1
zeta = 0

[run]
n = 10^4
M = 10
seed = 42
"""


def _tree_hash(root: Path):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_config_parses():
    cfg = load_config(MINIMAL)
    assert cfg.n == 10**4 and cfg.M == 10 and cfg.seed == 42


@pytest.mark.parametrize("text,line", [
    ("[system]\nkind = digit_shift\nbases = 1\n", 3),
    ("[run]\nn = 10\nbogus = 1\n", 3),
    ("[run]\nM = ten\n", 2),
    ("[nonsense]\n", 1),
    ("key = 1\n", 1),
    ("[family f]\ncell = 0.5, 0.2 | (0, 1]\n", 2),
])
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as exc:
        load_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_missing_seed_in_acceptance_mode(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(MINIMAL.replace("seed = 42\n", "mode = acceptance\n"))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == 2


def test_usage_error_exit_code():
    assert main(["simulate", "--bogus-flag"]) == 2


def test_simulate_outputs_and_determinism(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(MINIMAL)
    hashes = []
    for rep in ("a", "b"):
        out = tmp_path / rep
        assert main(["simulate", "--config", str(cfg), "--out", str(out), "-q"]) == 0
        assert len(list((out / "runs").glob("run_*.csv"))) == 10
        rep_json = json.loads((out / "report.json").read_text())
        assert rep_json["seed"] == 42
        hashes.append(_tree_hash(out))
    assert hashes[0] == hashes[1]


def test_limit_sample_empty_window(tmp_path):
    out = tmp_path / "ls"
    assert main(["limit-sample", "--law", "poisson2d", "-M", "3", "--horizon", "0", "--seed", "1",
                 "--out", str(out), "-q"]) == 0
    assert (out / "figure1.svg").exists()
    assert (out / "samples.csv").read_text().strip() == "run_id,t,mark1"


def test_limit_sample_deterministic(tmp_path):
    hs = []
    for rep in ("a", "b"):
        out = tmp_path / rep
        assert main(["limit-sample", "-M", "20", "--seed", "3", "--out", str(out), "-q"]) == 0
        hs.append(_tree_hash(out))
    assert hs[0] == hs[1]


@pytest.fixture(scope="module")
def doubling_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    cfg = root / "run.ini"
    cfg.write_text(MINIMAL.replace("n = 10^4\nM = 10\n", "n = 10^5\nM = 2000\n"))
    out = root / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "-q"]) == 0
    return out


def test_compare_doubling_vs_stacked_passes(doubling_run, tmp_path):
    code = main(["compare", "--input", str(doubling_run), "--law", "stacked_geometric:alpha=2,d=1",
                 "--out", str(tmp_path / "c"), "--seed", "1", "-q"])
    assert code == 0


def test_compare_doubling_vs_poisson_rejects(doubling_run, tmp_path):
    out = tmp_path / "c"
    code = main(["compare", "--input", str(doubling_run), "--law", "poisson2d", "--out", str(out),
                 "--seed", "1", "-q"])
    assert code == 1
    rep = json.loads((out / "report.json").read_text())
    assert not rep["passed"]


def test_compare_empty_input(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["compare", "--input", str(tmp_path / "empty"), "--law", "poisson2d", "-q"]) == 2


@pytest.mark.parametrize("args,want", [
    (["--spec", "contraction:lam=1/2", "--set", "(1, 2] (3, 4]"], 1.5),
    (["--spec", "contraction:lam=2/3", "--set", "(0, 5]"], 5 / 3),
    (["--spec", "lebesgue", "--set", "(0, 1] (2, 3.5]"], 2.5),
])
def test_nu_cli(args, want, capsys, tmp_path):
    assert main(["nu", *args, "--seed", "2", "--out", str(tmp_path), "-q"]) == 0
    out = json.loads((tmp_path / "report.json").read_text())
    assert out["value"] == pytest.approx(want)


def test_records_and_report(tmp_path):
    cfg = tmp_path / "rec.ini"
    cfg.write_text(MINIMAL.replace("zeta = 0", "zeta = 12345678901/34359738368")
                   .replace("n = 10^4\nM = 10\n", "n = 10^5\nM = 500\n"))
    out = tmp_path / "rec"
    assert main(["records", "--config", str(cfg), "--out", str(out), "-q"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"]
    (out / "records.svg").unlink()
    assert main(["report", str(out), "-q"]) == 0
    assert (out / "records.svg").exists()


def test_records_needs_system():
    assert main(["records", "-M", "10", "--seed", "1", "-q"]) == 2
