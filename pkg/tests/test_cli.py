import csv
import io
import json
import subprocess
import sys

import pytest

from phicoherent.cli import aggregate, main
from phicoherent.encodings import extract_rules, normalize, rule_block


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def test_entail_horse(capsys, horse_file):
    code, r = report(capsys, "entail", horse_file)
    assert code == 0
    assert r["entailed"] is True and r["typical_degree"] == "4/4" and r["kb_satisfiable"] is True
    assert r["engine"] == "solver" and r["wall_time_ms"] >= 0


def test_entail_not_entailed_with_witness(capsys, horse_file):
    code, r = report(capsys, "entail", horse_file, "--query", "horse,has_tail,geq,3")
    assert code == 1
    assert r["entailed"] is False
    assert r["witness"]["has_tail"] == "2/4"
    assert r["witness"]["horse"] == "4/4"


def test_engines_agree(capsys, horse_file):
    _, a = report(capsys, "entail", horse_file, "--engine", "solver", "--query", "horse,has_tail,geq,3")
    _, b = report(capsys, "entail", horse_file, "--engine", "oracle", "--query", "horse,has_tail,geq,3")
    for key in ("entailed", "typical_degree", "kb_satisfiable", "witness"):
        assert a[key] == b[key]
    assert b["engine"] == "oracle"


@pytest.mark.parametrize("mode", ["sequential", "descending", "ascending", "parallel"])
def test_modes(capsys, horse_file, mode):
    code, r = report(capsys, "entail", horse_file, "--mode", mode)
    assert code == 0 and r["typical_degree"] == "4/4"


def test_unsat_kb(capsys, tmp_path):
    path = tmp_path / "u.kb"
    path.write_text("valphi(0,-inf,0). valphi(1,0,inf). concept(a).\n"
                    "concept_inclusion(top,bot,geq,1). query(a,a,geq,1).\n")
    code, r = report(capsys, "entail", path)
    assert code == 0 and r["kb_satisfiable"] is False


def test_timeout_exit_code(capsys, tmp_path):
    path = tmp_path / "big.kb"
    assert main(["gen", "mlp", "--layers", "20,40,40,1", "--seed", "0", "-o", str(path)]) == 0
    code, r = report(capsys, "entail", path, "--timeout", "0.05")
    assert code == 2 and r["entailed"] is None


def test_timeout_from_environment(capsys, tmp_path, monkeypatch):
    path = tmp_path / "big.kb"
    main(["gen", "mlp", "--layers", "20,40,40,1", "--seed", "0", "-o", str(path)])
    monkeypatch.setenv("PHICOHERENT_TIMEOUT", "0.05")
    code, _ = report(capsys, "entail", path)
    assert code == 2


def test_parse_error(capsys, tmp_path):
    path = tmp_path / "bad.kb"
    path.write_text("valphi(0,-inf,0). valphi(1,0,inf).\nconcept(a).\nwti(a,b,1).\n")
    code, out, err = run(capsys, "entail", path)
    assert code == 3 and out == ""
    assert "3:" in err and "undeclared" in err


def test_missing_query(capsys, tmp_path):
    path = tmp_path / "nq.kb"
    path.write_text("valphi(0,-inf,0). valphi(1,0,inf). concept(a).\n")
    code, _, err = run(capsys, "entail", path)
    assert code == 3 and "no query" in err


def test_usage_errors(capsys, horse_file):
    with pytest.raises(SystemExit) as info:
        main(["entail"])
    assert info.value.code == 3
    assert run(capsys, "entail", "/no/such/file.kb")[0] == 3


def test_oracle_budget_exit(capsys, tmp_path):
    path = tmp_path / "m.kb"
    main(["gen", "mlp", "--layers", "4,4,1", "--seed", "1", "-o", str(path)])
    code, _, err = run(capsys, "entail", path, "--engine", "oracle", "--budget", "10")
    assert code == 4 and "too large" in err


def test_gen_mlp_deterministic(capsys):
    _, a, _ = run(capsys, "gen", "mlp", "--layers", "2,2,1", "--seed", "7")
    _, b, _ = run(capsys, "gen", "mlp", "--layers", "2,2,1", "--seed", "7")
    assert a == b
    assert a.startswith("% mlp layers=2,2,1 seed=7")


def test_gen_without_seed_records_it(capsys):
    code, out, err = run(capsys, "gen", "random")
    assert code == 0
    seed = err.split("seed:")[1].split()[0]
    assert f"seed={seed}" in out.splitlines()[0]


def test_gen_maxsat_then_entail(capsys, tmp_path):
    clauses = tmp_path / "g.cnf"
    clauses.write_text("1 0\n-1 0\n")
    kb = tmp_path / "g.kb"
    assert main(["gen", "maxsat", str(clauses), "-o", str(kb)]) == 0
    code, r = report(capsys, "entail", kb)
    assert code == 1 and r["typical_degree"] == "1/2"


def test_gen_random_oracle_sized(capsys, tmp_path):
    kb = tmp_path / "r.kb"
    assert main(["gen", "random", "--oracle-sized", "--seed", "3", "-o", str(kb)]) == 0
    assert run(capsys, "entail", kb, "--engine", "oracle")[0] in (0, 1)
    assert run(capsys, "gen", "random", "--oracle-sized", "--names", "30", "--seed", "1")[0] == 3


def test_export(capsys, horse_file, tmp_path):
    out = tmp_path / "h.lp"
    assert main(["export", str(horse_file), "--variant", "order-wc", "-o", str(out)]) == 0
    assert normalize(extract_rules(out.read_text())) == normalize(rule_block("order-wc"))


def write_spec(tmp_path, spec):
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(spec))
    return path


def test_bench_small_networks(capsys, tmp_path):
    spec = write_spec(tmp_path, {"instances": [{"family": "mlp", "layers": [2, 2, 1], "n": 4, "seeds": 10}]})
    table = tmp_path / "table.csv"
    code, out, _ = run(capsys, "bench", spec, "--table", table)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 10 and all(r["solved"] == "True" for r in rows)
    agg = list(csv.DictReader(table.open()))
    assert len(agg) == 1 and agg[0]["solved_pct"] == "100.0" and agg[0]["size"] == "5"


def test_bench_workers_and_timeouts(capsys, tmp_path):
    spec = write_spec(tmp_path, {
        "instances": [{"family": "mlp", "layers": [20, 40, 40, 1], "seeds": [0]},
                      {"family": "mlp", "layers": [2, 2, 1], "seeds": [1]}],
        "modes": ["descending"], "timeout": 0.05,
    })
    code, out, err = run(capsys, "bench", spec, "--workers", "2")
    assert code == 0
    rows = {r["instance"]: r for r in csv.DictReader(io.StringIO(out))}
    assert rows["20,40,40,1"]["solved"] == "False"
    assert rows["2,2,1"]["solved"] == "True"
    assert "0.0%" in err


def test_aggregate_arithmetic():
    rows = [{"instance": "x", "size": 5, "edges": 6, "n": 4, "engine": "solver", "mode": "descending",
             "solved": i < 9, "seconds": float(i + 1) if i < 9 else None} for i in range(10)]
    (t,) = aggregate(rows)
    assert t["solved_pct"] == 90.0 and t["solved"] == 9 and t["runs"] == 10
    assert (t["min"], t["avg"], t["max"]) == (1.0, 5.0, 9.0)


def test_console_script(horse_file):
    proc = subprocess.run([sys.executable, "-m", "phicoherent.cli", "entail", str(horse_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["entailed"] is True
