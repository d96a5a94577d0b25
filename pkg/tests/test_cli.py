import json
from importlib import resources

import jsonschema
import pytest
from referencing import Registry, Resource
from referencing.jsonschema import DRAFT202012

from ctmctails.cli import main


def validator(name):
    base = resources.files("ctmctails").joinpath("schemas")
    store = {p.name: json.loads(p.read_text()) for p in base.iterdir() if p.name.endswith(".json")}
    registry = Registry().with_resources(
        (uri, Resource.from_contents(doc, default_specification=DRAFT202012)) for uri, doc in store.items()
    )
    return jsonschema.Draft202012Validator(store[f"{name}.schema.json"], registry=registry)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_schema(capsys, fixture_path):
    code, out, _ = run(capsys, "analyze", fixture_path("schlogl.rxn"))
    assert code == 0
    doc = json.loads(out)
    validator("analyze").validate(doc)
    assert doc["stationary"]["regime"] == "CMPLike"


def test_analyze_qsd(capsys, fixture_path):
    code, out, _ = run(capsys, "analyze", fixture_path("quadratic.model"), "--theta", "1")
    assert code == 0
    validator("analyze").validate(json.loads(out))


def test_analyze_one_sided(capsys, fixture_path):
    code, out, _ = run(capsys, "analyze", fixture_path("forward_only_qsd.model"))
    assert code == 0
    assert json.loads(out)["support_obstruction"]["qsd"] == "NoQSDPossible"


def test_solve_then_verify_and_fit(capsys, tmp_path, fixture_path):
    dist = tmp_path / "pi.csv"
    code, _, _ = run(capsys, "solve", fixture_path("cmp22.model"), "--N", "120", "--out", str(dist))
    assert code == 0
    code, out, _ = run(capsys, "verify", fixture_path("cmp22.model"), str(dist))
    assert code == 0
    rep = json.loads(out)
    validator("residual_report").validate(rep)
    assert rep["max_residual"] < 1e-9
    code, out, _ = run(capsys, "fit", str(dist), "--window", "10:60")
    assert code == 0
    fit = json.loads(out)
    validator("tail_fit").validate(fit)
    assert fit["family"] == "x log x"


def test_solve_json(capsys, fixture_path):
    code, out, _ = run(capsys, "solve", fixture_path("mm_inf.model"), "--N", "30", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    validator("distribution").validate(doc)
    assert abs(sum(doc["values"]) - 1) < 1e-12


def test_qsd_with_theta(capsys, fixture_path):
    code, out, _ = run(capsys, "qsd", fixture_path("harmonic_qsd.model"), "--theta", "1", "--N", "100")
    assert code == 0
    rows = out.splitlines()
    assert rows[0].startswith("x,") and rows[1].startswith("1,")
    assert float(rows[1].split(",")[1]) == pytest.approx(0.5)


def test_simulate_trajectory(capsys, fixture_path):
    code, out, _ = run(capsys, "simulate", fixture_path("pure_death.model"), "--seed", "0", "--x0", "3")
    assert code == 0
    assert [r.split(",")[1] for r in out.splitlines()[1:]] == ["3", "2", "1", "0"]


@pytest.mark.parametrize(
    "argv,code",
    [
        (["analyze", "/nonexistent/model.model"], 1),
        (["analyze", "{bad}"], 2),
        (["analyze", "gene_unbounded.model"], 3),
        (["analyze", "transient.model", "--theta", "1"], 0),
        (["analyze", "geometric_qsd.model", "--theta", "-1"], 4),
        (["solve", "schlogl.rxn", "--N", "2"], 5),
        (["qsd", "cmp22.model"], 5),
        (["simulate", "mm_inf.model", "--seed", "0", "--mode", "stationary", "--burn-in", "5", "--t-end", "1"], 6),
    ],
)
def test_exit_codes(capsys, tmp_path, fixture_path, argv, code):
    argv = list(argv)
    if argv[1] == "{bad}":
        bad = tmp_path / "bad.model"
        bad.write_text("jump +1: x ^ ^")
        argv[1] = str(bad)
    elif not argv[1].startswith("/"):
        argv[1] = fixture_path(argv[1])
    got, out, err = run(capsys, *argv)
    assert got == code
    if code:
        assert err and not out


def test_unbounded_diagnostic(capsys, fixture_path):
    _, _, err = run(capsys, "analyze", fixture_path("gene_unbounded.model"))
    assert "(A1)" in err


def test_schema_rejects_bad_regime():
    doc = {"regime": "Heavy", "lower": None, "upper": None, "clauses": [], "warnings": [], "notes": []}
    with pytest.raises(jsonschema.ValidationError):
        validator("classification").validate(doc)
