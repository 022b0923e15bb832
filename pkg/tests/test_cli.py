"""
Tests for the ellreg command line
"""

import io
import json

import pytest

import config
from cli import UsageError, format_text, parse_complex, parse_fix, parse_order, run
from elliptic_kernel import new_context
from expr import parse


def run_json(*argv):
    out = io.StringIO()
    code = run(list(argv) + ["--json"], out=out)
    return code, json.loads(out.getvalue())


class TestArgumentParsing:
    @pytest.mark.parametrize("text,want", [
        ("0+2i", 2j),
        ("-0.5+0.866i", complex(-0.5, 0.866)),
        ("1e-3-2i", complex(1e-3, -2)),
        (" 0.3+.4i ", 0.3 + 0.4j),
    ])
    def test_complex(self, text, want):
        assert parse_complex(text) == want

    @pytest.mark.parametrize("text", ["2i", "1+i", "0.5", "i", "1+2j"])
    def test_bad_complex(self, text):
        with pytest.raises(UsageError):
            parse_complex(text)

    def test_order(self):
        assert parse_order("3,1,2") == [3, 1, 2]
        with pytest.raises(UsageError):
            parse_order("1,2,1")

    def test_fix(self):
        assert parse_fix("2=0.1+0.2i,3=0-1i") == {2: 0.1 + 0.2j, 3: -1j}
        assert parse_fix("") == {}
        with pytest.raises(UsageError):
            parse_fix("2:0.1+0.2i")


class TestIntegrate:
    def test_triangle(self):
        code, report = run_json("integrate", "--tau", "0+2i", "wp(1-2)*wp(2-3)*wp(3-1)")
        ctx = new_context(2j)
        want = ctx.constant("g3") / 4 - ctx.constant("g2") * ctx.constant("eta1h") / 4
        assert code == config.EXIT_OK
        assert report["exit_hint"] == "ok"
        assert complex(*report["value"]) == pytest.approx(want, rel=1e-9)
        assert report["expr"] == "wp(1-2)*wp(1-3)*wp(2-3)"

    def test_zhat_integrates_to_zero(self):
        code, report = run_json("integrate", "--tau", "0+1i", "Z(1-2)")
        assert code == config.EXIT_OK
        assert abs(complex(*report["value"])) < 1e-12

    def test_trace(self):
        code, report = run_json("integrate", "--tau", "0+2i", "--trace", "wp(1-2)*wp(2-3)")
        assert code == config.EXIT_OK
        steps = report["steps"]
        assert [s["var"] for s in steps] == [1, 2, 3]
        assert steps[0]["anchor"] == 2
        assert parse(steps[0]["result"]).is_close(parse("-eta1h*wp(2-3)"))

    def test_order_and_anchor(self):
        _, first = run_json("integrate", "--tau", "0+2i", "--order", "3,1,2", "wp(1-2)*wp(2-3)")
        _, second = run_json("integrate", "--tau", "0+2i", "--anchor", "highest", "wp(1-2)*wp(2-3)")
        assert complex(*first["value"]) == pytest.approx(complex(*second["value"]), rel=1e-9)

    def test_explicit_anchor_index(self):
        code, report = run_json("integrate", "--tau", "0+2i", "--anchor", "2", "--trace", "wp(1-2)*wp(2-3)")
        assert code == config.EXIT_OK
        eta1h = new_context(2j).constant("eta1h")
        assert complex(*report["value"]) == pytest.approx(eta1h ** 2, rel=1e-10)
        assert report["steps"][1]["anchor"] == 3

    def test_deterministic(self):
        argv = ["integrate", "--tau", "0.3+1.7i", "--trace", "wp(1-2)^2*wp(2-3)"]
        _, first = run_json(*argv)
        _, second = run_json(*argv)
        first.pop("timing_ms")
        second.pop("timing_ms")
        assert first == second

    @pytest.mark.parametrize("argv", [
        ["integrate", "--tau", "0-1i", "wp(1-2)"],
        ["integrate", "--tau", "2i", "wp(1-2)"],
        ["integrate", "--tau", "0+1i", "wp(1-2"],
        ["integrate", "--tau", "0+1i", "--order", "1,1", "wp(1-2)"],
        ["integrate", "--tau", "0+1i", "--order", "1,3", "wp(1-2)"],
        ["integrate", "--tau", "0+1i", "--anchor", "middle", "wp(1-2)"],
        ["integrate", "--tau", "0+1i", "wp(1-2) + foo"],
        ["integrate", "wp(1-2)"],
        [],
    ])
    def test_usage_errors(self, argv):
        code, report = run_json(*argv)
        assert code == config.EXIT_USAGE
        assert report["exit_hint"] == "usage"
        assert report["error"]["message"]

    def test_syntax_error_type(self):
        _, report = run_json("integrate", "--tau", "0+1i", "wp(1-2) $ 3")
        assert report["error"]["type"] == "ExprSyntaxError"


class TestConstantsAndExpand:
    def test_constants(self):
        code, report = run_json("constants", "--tau", "0+1i")
        assert code == config.EXIT_OK
        constants = report["constants"]
        assert set(constants) == {"E2", "E4", "E6", "G4", "G6", "g2", "g3", "eta1", "eta1h", "e1", "e2", "e3"}
        assert abs(complex(*constants["eta1h"])) < 1e-12
        assert abs(complex(*constants["g3"])) < 1e-10

    def test_expand_wp(self):
        code, report = run_json("expand", "--tau", "0+2i", "--var", "1", "--at", "2", "--order", "3", "wp(1-2)")
        assert code == config.EXIT_OK
        terms = report["series"]["terms"]
        assert [t["exponent"] for t in terms] == [-2, 2]
        assert report["series"]["trunc"] == 3
        six_g4 = 6 * new_context(2j).constant("G4")
        assert complex(*terms[1]["value"]) == pytest.approx(six_g4, rel=1e-12)

    def test_expand_with_fixed_points(self):
        code, report = run_json("expand", "--tau", "0+1i", "--var", "1", "--at", "2", "--order", "1",
                                "--fix", "2=0.1+0.2i,3=0.6+0.3i", "wp(1-3)")
        assert code == config.EXIT_OK
        assert all("value" in t for t in report["series"]["terms"])

    def test_expand_order_above_jet_cap(self):
        code, _ = run_json("expand", "--tau", "0+1i", "--var", "1", "--at", "2", "--order", "1000", "wp(1-2)")
        assert code == config.EXIT_USAGE


class TestPvAndCheck:
    def test_pv_agrees_with_engine(self):
        code, report = run_json("pv", "--tau", "0+1i", "--var", "1", "--fix", "2=0.3+0.4i", "wp(1-2)")
        assert code == config.EXIT_OK
        assert report["oracle"]["per_eps"]
        assert report["checks"][0]["name"] == "pv_vs_engine"
        assert report["checks"][0]["pass"]

    def test_pv_with_contour(self):
        code, report = run_json("pv", "--tau", "0+2i", "--var", "1", "--fix", "2=0.3+0.4i", "--contour", "wp(1-2)")
        assert code == config.EXIT_OK
        assert [c["name"] for c in report["checks"]] == ["pv_vs_engine", "contour_vs_engine"]

    def test_pv_missing_fix(self):
        code, report = run_json("pv", "--tau", "0+1i", "--var", "1", "wp(1-2)")
        assert code == config.EXIT_USAGE
        assert "missing" in report["error"]["message"]

    def test_unknown_suite(self):
        code, _ = run_json("check", "--suite", "everything")
        assert code == config.EXIT_USAGE

    def test_paper_suite(self):
        code, report = run_json("check", "--suite", "paper")
        assert code == config.EXIT_OK
        names = [c["name"] for c in report["checks"]]
        assert "pv_agreement[wp(1-2), tau=0+1i]" in names
        assert "pv_agreement[wp(1-2), tau=0+2i]" in names
        assert all(c["pass"] for c in report["checks"])

    def test_kernel_suite(self):
        code, report = run_json("check", "--suite", "kernel", "--tau", "0+2i")
        assert code == config.EXIT_OK
        assert report["checks"]
        assert all(c["pass"] for c in report["checks"])


class TestTextOutput:
    def test_text_report(self):
        out = io.StringIO()
        code = run(["integrate", "--tau", "0+1i", "wp(1-2)*wp(2-3)"], out=out)
        text = out.getvalue()
        assert code == config.EXIT_OK
        assert text.startswith("command: integrate")
        assert "value:" in text

    def test_format_checks_table(self):
        report = {
            "command": "check",
            "tau": None,
            "expr": None,
            "value": None,
            "steps": [],
            "oracle": None,
            "checks": [{"name": "demo", "pass": True, "got": [1.0, 0.0], "want": [1.0, 0.0],
                        "rel_err": 0.0, "detail": ""}],
            "exit_hint": "ok",
        }
        text = format_text(report)
        assert "demo" in text
        assert "1/1 checks passed" in text

    def test_expand_text(self):
        out = io.StringIO()
        code = run(["expand", "--tau", "0+2i", "--var", "1", "--at", "2", "--order", "3", "wp(1-2)"], out=out)
        lines = out.getvalue().splitlines()
        assert code == config.EXIT_OK
        assert lines[-3].startswith("1 [= ") and lines[-3].endswith("· w^-2")
        assert "G4 [= " in lines[-2] and lines[-2].endswith("· w^2")
        assert lines[-1] == "O(w^4)"
