import json
import subprocess
import sys

import jsonschema
import pytest

from ltverify import cli
from ltverify.errors import LTError, NotDivisible, PrecisionExhausted
from ltverify.report import (
    ERROR,
    EXIT_CODES,
    FAIL,
    PASS,
    PRECISION_EXHAUSTED,
    Battery,
    VerificationReport,
    combine_status,
    merge_reports,
)

STATUS = {"enum": [PASS, FAIL, PRECISION_EXHAUSTED, ERROR]}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["check_id", "params", "status", "details", "elapsed_ms"],
    "additionalProperties": False,
    "properties": {
        "check_id": {"type": "string"},
        "params": {
            "type": "object",
            "required": ["p", "precision", "degree"],
            "additionalProperties": False,
            "properties": {k: {"type": "integer"} for k in ("p", "precision", "degree")},
        },
        "status": STATUS,
        "details": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "status", "certified_precision"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "status": STATUS,
                    "counterexample": {"type": "string"},
                    "certified_precision": {"type": ["integer", "null"]},
                },
            },
        },
        "elapsed_ms": {"type": "integer", "minimum": 0},
        "notes": {"type": "array", "items": {"type": "string"}},
        "series": {"type": "object", "additionalProperties": {"type": "string"}},
    },
}


def run_cli(args, capsys):
    code = cli.main(args)
    return code, capsys.readouterr().out


def strip_elapsed(text):
    d = json.loads(text)
    d.pop("elapsed_ms")
    return d


@pytest.mark.parametrize(
    "args",
    [
        ["verify", "appendix", "--p", "3", "--degree", "8"],
        ["verify", "example25", "--degree", "8"],
        ["verify", "formal-group", "--degree", "4"],
        ["verify", "all", "--degree", "8"],
    ],
)
def test_json_reports_validate(args, capsys):
    code, out = run_cli(args + ["--format", "json"], capsys)
    doc = json.loads(out)
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert code == EXIT_CODES[doc["status"]] == 0
    names = [d["name"] for d in doc["details"]]
    assert names == sorted(names)


def test_appendix_p3_degree14(capsys):
    code, out = run_cli(["verify", "appendix", "--p", "3", "--precision", "24", "--degree", "14", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert all(d["status"] == PASS for d in doc["details"])


def test_example25_degree16(capsys):
    code, out = run_cli(["verify", "example25", "--degree", "16"], capsys)
    assert code == 0
    assert out.startswith("example25: PASS")


@pytest.mark.parametrize(
    "args",
    [
        ["verify", "appendix", "--p", "2", "--precision", "3", "--degree", "12"],
        ["verify", "appendix", "--p", "4"],
        ["verify", "example25", "--p", "3"],
        ["verify", "example25", "--degree", "3"],
        ["verify", "bogus"],
        ["verify", "appendix", "--format", "xml"],
        [],
    ],
)
def test_usage_errors_exit_64(args, capsys):
    assert cli.main(args) == 64
    capsys.readouterr()


def test_formal_group_dump_p2(capsys):
    code, out = run_cli(["verify", "formal-group", "--degree", "3"], capsys)
    assert code == 0
    # one digit is spent dividing by pi^2 - pi = 6
    assert "F(x, y) = x + y + (1/3 mod 2^23)·x·y + O(deg 3)" in out
    assert "[1](t) = t + O(deg 3)" in out
    for name in ("[pi]", "[Delta]", "[Gamma]", "[pi]^(lam)", "[Delta]^(lam)", "[Gamma]^(lam)"):
        assert f"{name}(t) = " in out


def test_formal_group_dump_p3(capsys):
    code, out = run_cli(["verify", "formal-group", "--p", "3", "--degree", "3"], capsys)
    assert code == 0
    assert "F(x, y) = x + y + O(deg 3)" in out
    assert "[1](t) = t + O(deg 3)" in out


def test_output_file_and_determinism(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for path in paths:
        assert cli.main(["verify", "all", "--degree", "8", "--format", "json", "--out", str(path)]) == 0
    a, b = (strip_elapsed(path.read_text()) for path in paths)
    assert json.dumps(a) == json.dumps(b)


def test_text_determinism(capsys):
    outs = []
    for _ in range(2):
        cli.main(["verify", "appendix", "--p", "3", "--degree", "8"])
        outs.append("\n".join(l for l in capsys.readouterr().out.splitlines() if "elapsed_ms" not in l))
    assert outs[0] == outs[1]


def test_failure_and_error_exit_codes(monkeypatch, capsys):
    import ltverify.lubin_tate as lt

    def failing(p, params=None, stages=None):
        rep = VerificationReport("appendix", p, 24, 12)
        rep.add("broken", FAIL, 3, "coefficient of t^2: 1 != 2")
        return rep.finish()

    monkeypatch.setattr(lt, "verify_appendix", failing)
    assert cli.main(["verify", "appendix"]) == 1
    assert "counterexample: coefficient of t^2" in capsys.readouterr().out

    def crashing(p, params=None, stages=None):
        raise ValueError("boom")

    monkeypatch.setattr(lt, "verify_appendix", crashing)
    assert cli.main(["verify", "appendix", "--format", "json"]) == 3
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == ERROR
    jsonschema.validate(doc, REPORT_SCHEMA)


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ltverify", "verify", "formal-group", "--p", "3", "--degree", "3"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "F(x, y) = x + y + O(deg 3)" in proc.stdout


def test_default_degree():
    assert cli.RunConfig("appendix").D == 12
    assert cli.RunConfig("appendix", p=5).D == 30
    assert cli.RunConfig("appendix", degree=7).D == 7


def test_status_combination():
    assert combine_status([]) == PASS
    assert combine_status([PASS, PRECISION_EXHAUSTED]) == PRECISION_EXHAUSTED
    assert combine_status([PRECISION_EXHAUSTED, FAIL]) == FAIL
    assert combine_status([FAIL, ERROR, PASS]) == ERROR


def test_battery_translates_exceptions():
    rep = VerificationReport("x", 2, 24, 6)
    bat = Battery(rep)

    def raiser(err):
        def fn():
            raise err
        return fn

    bat.run("a.ok", lambda: (True, 5, None))
    bat.run("b.false", lambda: (False, 5, "cex"))
    bat.run("c.not_divisible", raiser(NotDivisible("x")))
    bat.run("d.exhausted", raiser(PrecisionExhausted("x")))
    bat.run("e.other", raiser(LTError("x")))
    bat.run("f.zero_digits", lambda: (True, 0, None))
    assert bat.build("g.build", lambda: 42) == 42
    rep.finish()
    got = {d.name: d.status for d in rep.details}
    assert got == {
        "a.ok": PASS,
        "b.false": FAIL,
        "c.not_divisible": FAIL,
        "d.exhausted": PRECISION_EXHAUSTED,
        "e.other": ERROR,
        "f.zero_digits": PRECISION_EXHAUSTED,
        "g.build": PASS,
    }
    assert rep.status == ERROR and rep.exit_code == 3


def test_merge_reports_prefixes_names():
    a = VerificationReport("appendix", 2, 24, 6)
    a.add("x", PASS, 3)
    b = VerificationReport("example25", 2, 24, 6)
    b.add("y", FAIL, 2, "cex")
    m = merge_reports("all", [a.finish(), b.finish()], 2, 24, 6)
    assert [d.name for d in m.details] == ["appendix/x", "example25/y"]
    assert m.status == FAIL
