import json
import random

import pytest

import helpers
from cspbench.cli import AnalysisReport, main


@pytest.fixture
def files(tmp_path):
    paths = {}

    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        paths[name] = str(p)
        return str(p)

    write("k2.json", helpers.k2().to_json())
    write("uv.json", helpers.uv().to_json())
    write("u1.json", helpers.u1().to_json())
    write("p4.json", helpers.p4_structure(extra={"E": (2, {(0, 1), (1, 0)})}).to_json())
    write("edge.txt", "exists x y . E(x,y)")
    write("loop.txt", "exists x . E(x,x)")
    write("disj.txt", "exists x y . E(x,y) | x = y")
    write("rel.json", json.dumps({"arity": 1, "tuples": [[1]]}))
    write("horn.cnf", "1*x = 1\n~1*x = 1 | 1*y = 2")
    write("nonhorn.cnf", "1*x + -1*y = 0 | 1*u + -1*v = 0")
    paths["dir"] = str(tmp_path)
    return paths


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_text_and_machine(files, capsys):
    code, out, _ = run(capsys, "analyze", files["uv.json"], "--types-n", "1", "--duality-n", "2")
    assert code == 0
    assert "core" in out and "fo-definable" in out

    code, out, _ = run(capsys, "--format", "machine", "analyze", files["uv.json"],
                       "--types-n", "1", "--duality-n", "2")
    assert code == 0
    doc = json.loads(out)
    report = AnalysisReport.from_dict(doc)
    assert report.to_dict() == doc  # machine encoding round-trips
    assert report.core["verdict"] is True
    assert report.fo_definability["sentence"] == "not (exists x0 . U(x0) & V(x0))"


def test_analyze_deterministic(files, capsys):
    args = ("--format", "machine", "analyze", files["k2.json"],
            "--types-n", "1", "--duality-n", "2", "--max-arity", "2")
    _, out1, _ = run(capsys, *args)
    _, out2, _ = run(capsys, *args)
    assert out1 == out2


def test_solve(files, capsys):
    code, out, _ = run(capsys, "solve", files["k2.json"], files["edge.txt"])
    assert code == 0 and "satisfied" in out and '"x": 0' in out
    code, out, _ = run(capsys, "solve", files["k2.json"], files["loop.txt"])
    assert code == 1 and "unsatisfied" in out


def test_solve_via_p4_agrees(files, capsys, tmp_path):
    rng = random.Random(127)
    t = helpers.p4_structure(extra={"E": (2, {(0, 1), (1, 0)})})
    agreements = 0
    for i in range(50):
        phi = helpers.random_ep_sentence(rng, t.sig, max_vars=4, max_disjunctions=2)
        from cspbench.formulas import render

        sent = tmp_path / f"s{i}.txt"
        sent.write_text(render(phi))
        plain = main(["solve", files["p4.json"], str(sent)])
        routed = main(["solve", files["p4.json"], str(sent), "--via-p4"])
        capsys.readouterr()
        assert plain == routed
        agreements += 1
    assert agreements == 50


def test_ppdef_exit_codes(files, capsys, tmp_path):
    code, out, _ = run(capsys, "ppdef", files["u1.json"], files["rel.json"])
    assert code == 0 and "pp-definable" in out
    bad = tmp_path / "bad_rel.json"
    bad.write_text(json.dumps({"arity": 1, "tuples": [[0]]}))
    code, out, _ = run(capsys, "ppdef", files["u1.json"], str(bad))
    assert code == 1
    code, _, err = run(capsys, "ppdef", files["u1.json"], files["k2.json"])
    assert code == 2 and "error" in err


def test_types(files, capsys):
    code, out, _ = run(capsys, "--format", "machine", "types", files["u1.json"], "--n", "2")
    assert code == 0
    doc = json.loads(out)
    assert doc["counts"][0] == 1
    assert doc["reports"][0]["classes"] == [[[0]], [[1]]]
    assert doc["reports"][0]["maximal"] == [1]


def test_analyze_u1_fo_definable(files, capsys):
    code, out, _ = run(capsys, "--format", "machine", "analyze", files["u1.json"],
                       "--types-n", "1", "--duality-n", "2")
    assert code == 0
    doc = json.loads(out)
    assert doc["fo_definability"]["verdict"].startswith("fo-definable")
    assert doc["pp_type_counts"]["counts"]["1"] == 1


def test_duality_export(files, capsys, tmp_path):
    exp = tmp_path / "obs"
    code, out, _ = run(capsys, "duality", files["uv.json"], "--n-max", "2",
                       "--export", str(exp))
    assert code == 0
    manifest = json.loads((exp / "manifest.json").read_text())
    assert len(manifest["obstructions"]) == 1
    from cspbench import FiniteStructure

    obs = FiniteStructure.from_json((exp / "obstruction_000.json").read_text())
    assert obs.n == 1


def test_horn_commands(files, capsys):
    code, out, _ = run(capsys, "horn", "classify", files["horn.cnf"])
    assert code == 0 and "Horn" in out
    code, out, _ = run(capsys, "--format", "machine", "horn", "classify", files["nonhorn.cnf"])
    assert code == 1
    doc = json.loads(out)
    assert doc["complexity"] == "CSP NP-complete" and len(doc["witness_pair"]) == 2
    code, out, _ = run(capsys, "horn", "solve", files["horn.cnf"])
    assert code == 0 and "satisfiable" in out


def test_rewrite_ep(files, capsys):
    code, out, _ = run(capsys, "rewrite-ep", files["p4.json"], files["disj.txt"])
    assert code == 0
    from cspbench.formulas import is_pp, parse_sentence

    assert is_pp(parse_sentence(out))


def test_parse_error_exit_code(files, capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "analyze", str(bad))
    assert code == 2 and "error" in err
    missing = tmp_path / "missing.json"
    code, _, err = run(capsys, "analyze", str(missing))
    assert code == 2
    badsent = tmp_path / "bad.txt"
    badsent.write_text("forall x . E(x,x)")
    code, _, err = run(capsys, "solve", files["k2.json"], str(badsent))
    assert code == 2 and "forall" in err
