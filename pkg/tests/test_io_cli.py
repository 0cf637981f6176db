import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spread.cli import main
from spread.errors import ModelFormatError, ModelValidationError
from spread.io import csv_text, dump_model, dumps_model, fmt, loads_model, parse_model, read_csv
from spread.reproduce import EXAMPLE_IDS, FIXTURES, fixture_path, load_fixture
from strategies import distributions


def _path(name):
    return str(fixture_path(name))


def _write(tmp_path, obj, name="model.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def _topo(patterns, code, types=None, explicit=None, m=1):
    types = types or sorted({p[0] for p in patterns})
    return {"kind": "topological", "types": types, "explicit_types": explicit or sorted(set(code["map"].values())),
            "m": m, "patterns": patterns, "block_code": code}


DOUBLING = {
    "kind": "random", "types": ["b"], "explicit_types": ["x"],
    "distribution": {"b": [{"offspring": {"b": 2}, "prob": "1"}]},
    "block_code": {"k": 0, "map": {"b": "x"}},
}


# --- model files ---------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_round_trip(name):
    spec = load_fixture(name)
    again = loads_model(dumps_model(spec))
    assert dump_model(again) == dump_model(spec)
    assert again.code.mapping == spec.code.mapping


def test_unknown_field_rejected():
    obj = dict(DOUBLING, colour="red")
    with pytest.raises(ModelFormatError, match="colour"):
        parse_model(obj)


def test_float_probability_rejected():
    obj = json.loads(json.dumps(DOUBLING))
    obj["distribution"]["b"][0]["prob"] = 1.0
    with pytest.raises((ModelValidationError, ModelFormatError)):
        parse_model(obj)


def test_malformed_json_reports_position():
    with pytest.raises(ModelFormatError) as e:
        loads_model('{"kind": "random",\n  "types": [}')
    assert e.value.line == 2 and e.value.column > 0


def test_rationals_are_reduced():
    obj = json.loads(json.dumps(DOUBLING))
    obj["distribution"]["b"] = [{"offspring": {"b": 2}, "prob": "2/4"}, {"offspring": {"b": 3}, "prob": "1/2"}]
    out = dump_model(parse_model(obj))
    assert [e["prob"] for e in out["distribution"]["b"]] == ["1/2", "1/2"]


@given(distributions())
@settings(max_examples=30)
def test_random_model_round_trip(dist):
    obj = {"kind": "random", "types": list(dist.types), "explicit_types": ["x"],
           "distribution": {b: [{"offspring": {t: n for t, n in zip(dist.types, v) if n}, "prob": str(p)}
                                for v, p in dist.law[b]] for b in dist.types},
           "block_code": {"k": 0, "map": {b: "x" for b in dist.types}}}
    spec = parse_model(obj)
    assert spec.dist.law == dist.law
    assert dump_model(loads_model(dumps_model(spec))) == dump_model(spec)


def test_csv_precision_round_trip():
    x = 0.7320508075688772
    assert fmt(x) == "0.732050807569"
    assert fmt(float("nan")) == ""
    text = csv_text(["n", "a", "trials_alive"], [[0, x, 3]])
    header, rows = read_csv(text)
    assert header == ["n", "a", "trials_alive"] and rows == [["0", "0.732050807569", "3"]]
    assert abs(float(rows[0][1]) - x) < 1e-12


# --- validate --------------------------------------------------------------------------


def test_validate_fixture_ok(capsys):
    assert main(["validate", "--model", _path("4.1.1")]) == 0
    assert capsys.readouterr().out.startswith("ok:")


def test_validate_ambiguous_root_names_type(tmp_path, capsys):
    obj = _topo([["a", ["a"]], ["a", ["a", "a"]]], {"k": 0, "map": {"a": "x"}})
    assert main(["validate", "--model", _write(tmp_path, obj)]) == 2
    out = capsys.readouterr().out
    assert "invalid" in out and "ambiguous" in out
    assert "'a'" in out or " a " in out or " a\n" in out


def test_validate_malformed_json(tmp_path, capsys):
    assert main(["validate", "--model", _write(tmp_path, '{"kind": ')]) == 3
    assert "line 1" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert main(["validate", "--model", str(tmp_path / "nope.json")]) == 3


def test_validate_uncovered_code(tmp_path, capsys):
    obj = json.loads(json.dumps(DOUBLING))
    obj["types"] = ["b", "c"]
    obj["distribution"] = {"b": [{"offspring": {"b": 1, "c": 1}, "prob": "1"}],
                           "c": [{"offspring": {"b": 2}, "prob": "1"}]}
    assert main(["validate", "--model", _write(tmp_path, obj)]) == 2
    assert "c" in capsys.readouterr().out


# --- rate -----------------------------------------------------------------------------------


def test_rate_target(capsys):
    assert main(["rate", "--model", _path("4.1.1"), "--target", "a"]) == 0
    assert "rate a 0.732050807569" in capsys.readouterr().out


def test_rate_printed_variant(capsys):
    assert main(["rate", "--model", _path("4.2.1-printed"), "--all", "--json"]) == 0
    got = json.loads(capsys.readouterr().out)["rates"]
    for a, x in {"A": 0.265947, "B": 0.499942, "C": 0.234111}.items():
        assert abs(got[a] - x) <= 1e-5


def test_rate_one_type(tmp_path, capsys):
    obj = _topo([["b", ["b", "b"]]], {"k": 0, "map": {"b": "x"}})
    assert main(["rate", "--model", _write(tmp_path, obj)]) == 0
    assert "rate x 1\n" in capsys.readouterr().out


def test_rate_reducible_matrix(tmp_path, capsys):
    obj = _topo([["a", ["a", "b"]], ["b", ["b"]]], {"k": 0, "map": {"a": "x", "b": "y"}})
    assert main(["rate", "--model", _write(tmp_path, obj)]) == 4
    assert capsys.readouterr().err


def test_rate_subcritical_random(tmp_path):
    obj = json.loads(json.dumps(DOUBLING))
    obj["distribution"]["b"] = [{"offspring": {"b": 1}, "prob": "1/2"}, {"offspring": {}, "prob": "1/2"}]
    assert main(["rate", "--model", _write(tmp_path, obj)]) == 4


def test_rate_unknown_target():
    assert main(["rate", "--model", _path("4.1.1"), "--target", "zz"]) == 64


# --- simulate -------------------------------------------------------------------------------


def test_simulate_doubling_constant(tmp_path, capsys):
    assert main(["simulate", "--model", _write(tmp_path, DOUBLING), "--trials", "3", "--gens", "6"]) == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert header == ["n", "x", "trials_alive"]
    assert [r[1] for r in rows] == ["1"] * 7 and all(r[2] == "3" for r in rows)


def test_simulate_single_row(capsys):
    assert main(["simulate", "--model", _path("4.2.1"), "--trials", "1", "--gens", "0"]) == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 1 and rows[0][0] == "0"
    spec = load_fixture("4.2.1")
    start_label = spec.code(next(p for p in spec.code.mapping if p.label == spec.default_start))
    assert rows[0][header.index(start_label)] == "1"


@pytest.mark.parametrize("fixture", ["4.2.1", "4.2.2"])
def test_simulate_same_bytes_across_workers(fixture, tmp_path):
    texts = []
    for w in (1, 2, 8):
        out = tmp_path / f"w{w}.csv"
        assert main(["simulate", "--model", _path(fixture), "--trials", "20", "--gens", "5",
                     "--seed", "7", "--workers", str(w), "--out", str(out), "--full"]) == 0
        texts.append((out.read_bytes(), (tmp_path / f"w{w}_counts.csv").read_bytes()))
    assert texts[0] == texts[1] == texts[2]


def test_simulate_seed_changes_output(capsys):
    main(["simulate", "--model", _path("4.2.2"), "--trials", "5", "--gens", "4", "--seed", "1"])
    a = capsys.readouterr().out
    main(["simulate", "--model", _path("4.2.2"), "--trials", "5", "--gens", "4", "--seed", "2"])
    assert capsys.readouterr().out != a


def test_simulate_directory_output(tmp_path):
    assert main(["simulate", "--model", _path("4.2.1"), "--trials", "2", "--gens", "2",
                 "--out", str(tmp_path / "run"), "--full"]) == 0
    names = sorted(p.name for p in (tmp_path / "run").iterdir())
    assert names == ["ratios.csv", "ratios_counts.csv", "ratios_w.csv"]


def test_simulate_mc_close_to_theory(capsys):
    assert main(["rate", "--model", _path("4.2.1"), "--json"]) == 0
    theory = json.loads(capsys.readouterr().out)["rates"]
    assert main(["simulate", "--model", _path("4.2.1"), "--trials", "300", "--gens", "8", "--seed", "42"]) == 0
    header, rows = read_csv(capsys.readouterr().out)
    for a, x in theory.items():
        assert abs(float(rows[-1][header.index(a)]) - x) <= 0.02
    assert rows[-1][-1] == "300"


def test_simulate_topological(capsys):
    assert main(["simulate", "--model", _path("4.1.1"), "--gens", "6"]) == 0
    header, rows = read_csv(capsys.readouterr().out)
    assert header == ["n", "a", "b", "trials_alive"] and len(rows) == 7


def test_simulate_population_cap(monkeypatch, tmp_path):
    monkeypatch.setenv("SPREAD_NODE_CAP", "100")
    assert main(["simulate", "--model", _path("4.2.1"), "--trials", "1", "--gens", "8"]) == 5
    assert main(["simulate", "--model", _path("4.1.1"), "--gens", "8"]) == 5


@pytest.mark.parametrize("argv", [
    ["simulate", "--model", "x.json", "--trials", "many"],
    ["simulate"],
    ["frobnicate"],
    [],
])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 64


def test_simulate_bad_window():
    assert main(["simulate", "--model", _path("4.2.1"), "--window", "const:0"]) == 64


# --- reproduce ------------------------------------------------------------------------------


@pytest.mark.parametrize("example", [e for e in EXAMPLE_IDS if e.startswith("4.1") or e == "4.2.3"])
def test_reproduce_exact_examples(example, capsys):
    assert main(["reproduce", example]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_reproduce_413_report(capsys):
    main(["reproduce", "4.1.3"])
    line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("rate(a)"))
    assert "0.928571428571" in line and line.endswith("ok")


def test_reproduce_unknown_id():
    assert main(["reproduce", "9.9.9"]) == 64


def test_reproduce_mismatch_exit(monkeypatch, capsys):
    from spread import reproduce as rep
    monkeypatch.setitem(rep.RUNNERS, "4.1.1", lambda: [rep.Check("forced", 1.0, Fraction(2), 0.1)])
    assert main(["reproduce", "4.1.1"]) == 1
    assert "1 of 1 checks failed" in capsys.readouterr().out
