import csv
import json
import subprocess
import sys

import jsonschema
import pytest

from dualgain import __version__
from dualgain.cli import main
from dualgain.scenario import load, load_schema

from conftest import SCENARIOS

MODEL = {"a": 0.5, "mu": 1.0, "interarrival": {"kind": "exponential", "rate": 1.0}}
LATTICE = {"b": 2.0, "N": 6, "lam": 1.0, "q": 0.05, "a": 0.5}
BROWNIAN = {"b": 2.0, "N": 4, "lam": 1.0, "q": 0.1, "a": 0.5, "eta": -1.0, "sigma": 0.3}


def write(tmp_path, data, name="scn.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return path


def read_csv(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(body))


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_bundled_scenarios_validate(path):
    jsonschema.validate(json.loads(path.read_text()), load_schema())
    load(path)


def test_malformed_json_is_an_input_error(tmp_path, capsys):
    code, _, err = run(capsys, "ruin-lt", write(tmp_path, "{not json"))
    assert code == 2 and "error" in err


def test_unknown_key_is_named(tmp_path, capsys):
    code, _, err = run(capsys, "ruin-lt", write(tmp_path, {"schema": 1, "model": {**MODEL, "colour": 3}}))
    assert code == 2 and "colour" in err


def test_lattice_needs_proportional_gains(tmp_path, capsys):
    code, _, err = run(capsys, "exit", write(tmp_path, {"schema": 1, "lattice": {**LATTICE, "a": 0.0}}))
    assert code == 2 and "lattice requires a > 0" in err


def test_missing_file_and_missing_section(tmp_path, capsys):
    assert run(capsys, "ruin-lt", tmp_path / "absent.json")[0] == 2
    code, _, err = run(capsys, "exit", write(tmp_path, {"schema": 1, "model": MODEL}))
    assert code == 2 and "lattice" in err


def test_ruin_lt_csv_format(tmp_path, capsys):
    path = write(tmp_path, {"schema": 1, "name": "demo", "model": MODEL, "outputs": {"s": [0.5, [1.0, 2.0]]}})
    code, out, _ = run(capsys, "ruin-lt", path)
    assert code == 0
    header = [line for line in out.splitlines() if line.startswith("#")]
    assert header[0] == f"# dualgain {__version__}"
    assert "# command: ruin-lt" in header and "# scenario: demo" in header
    assert any(line.startswith("# scenario_sha256: ") and len(line.split()[-1]) == 64 for line in header)
    rows = read_csv(out)
    assert [r["s_im"] for r in rows] == ["0", "2"]
    assert all(r["rho_re"] == format(float(r["rho_re"]), ".17g") for r in rows)


def test_out_option_writes_file(tmp_path, capsys):
    target = tmp_path / "out.csv"
    path = write(tmp_path, {"schema": 1, "model": MODEL, "outputs": {"x": [0.5, 1.0]}})
    code, out, _ = run(capsys, "ruin-prob", path, "--out", target)
    assert code == 0 and out == ""
    rows = read_csv(target.read_text())
    assert [float(r["x"]) for r in rows] == [0.5, 1.0]
    assert all(0 < float(r["R"]) < 1 and r["disagreement"] == "false" for r in rows)


def test_lattice_tables(tmp_path, capsys):
    path = write(tmp_path, {"schema": 1, "lattice": LATTICE})
    code, out, _ = run(capsys, "exit", path)
    rows = read_csv(out)
    assert code == 0 and {r["quantity"] for r in rows} == {"rho_n", "mu_n", "rho", "mu"}
    code, out, _ = run(capsys, "dividends", path)
    rows = read_csv(out)
    assert code == 0 and {r["quantity"] for r in rows} == {"v_n", "v"}
    assert float(next(r for r in rows if r["quantity"] == "v_n" and r["index"] == "6")["value"]) == 0.0


def test_brownian_table(tmp_path, capsys):
    code, out, _ = run(capsys, "brownian", write(tmp_path, {"schema": 1, "brownian": BROWNIAN}))
    rows = read_csv(out)
    assert code == 0 and {r["quantity"] for r in rows} == {"rho_n", "v_n", "rho", "v"}


def test_unresolvable_brownian_tolerance_is_a_numerical_failure(tmp_path, capsys):
    data = {"schema": 1, "brownian": BROWNIAN,
            "numerics": {"brownian": {"degree": 4, "nodes": 4, "tolerance": 1e-15}}}
    code, _, err = run(capsys, "brownian", write(tmp_path, data))
    assert code == 3 and "refinement" in err


def test_simulate_and_paths_override(tmp_path, capsys):
    path = write(tmp_path, {"schema": 1, "model": MODEL, "outputs": {"x": [1.0]}, "mc": {"paths": 10**6}})
    code, out, _ = run(capsys, "simulate", path, "--paths", 2000)
    rows = read_csv(out)
    assert code == 0 and "# paths: 2000" in out
    assert rows[0]["target"] == "ruin" and rows[0]["n_paths"] == "2000"


def test_failed_comparison_exits_4(capsys):
    code, out, err = run(capsys, "compare", SCENARIOS / "c11_scale_functions.json")
    assert code == 4 and "comparison(s) failed" in err
    failed = [r["quantity"] for r in read_csv(out) if r["passed"] == "false"]
    assert failed and all(q.startswith("Z'_vs_-q_eff*W") for q in failed)


def test_passing_comparison_exits_0(capsys):
    code, out, _ = run(capsys, "compare", SCENARIOS / "c07_complementarity.json")
    assert code == 0 and all(r["passed"] == "true" for r in read_csv(out))


def test_module_entry_point_and_version():
    res = subprocess.run([sys.executable, "-m", "dualgain", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout


def test_thread_count_does_not_change_output(tmp_path, monkeypatch, capsys):
    path = write(tmp_path, {"schema": 1, "lattice": LATTICE, "outputs": {"x": [1.0]}, "mc": {"paths": 20000}})
    texts = []
    for n in ("1", "4"):
        monkeypatch.setenv("DUALGAIN_THREADS", n)
        code, out, _ = run(capsys, "simulate", path)
        assert code == 0
        texts.append(out)
    assert texts[0] == texts[1]
    assert len(read_csv(texts[0])) == 3
