import io
import json

import pytest

from iatc.cli import run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


EXAMPLE_TREE = """\
{}
exists t0
exists t1
exists t2
t2 -> t0 ~ t1
|
  exists t3
  exists t4
  t1 ~ t3 -> t4
  tell x : t3
  ask x : t4
|
  ask y : t2
"""


def test_infer_solved():
    assert call("infer", "(\\x. x) y", "--ctx", "y:Int", "--system", "stlc") == (0, "Int\n", "")


def test_infer_ambiguous():
    code, out, _ = call("infer", "\\x. x", "--system", "stlc")
    assert (code, out) == (2, "a -> a (ambiguous: 1 unsolved)\n")


def test_infer_type_error_names_constraint_and_path():
    code, out, _ = call("infer", "(\\x : Int. x) y", "--ctx", "y : Bool", "--system", "stlc")
    assert code == 1
    assert out == "error: mismatch [2, 0] at ask y : t2: Bool ~ Int\n"


def test_infer_hm():
    assert call("infer", "let id = \\x. x in id id")[:2] == (0, "forall a. a -> a\n")


def test_check():
    assert call("check", "\\x : Int. x", "--type", "Int -> Int")[0] == 0
    assert call("check", "\\x : Int. x", "--type", "Bool -> Int")[0] == 1


def test_free_variables():
    code, out, _ = call("fv", "f (g x)", "--system", "stlc")
    assert code == 0
    assert out == "f : a -> b\ng : c -> a\nx : c\n|- b\n"


def test_tree_golden():
    assert call("tree", "(\\x. x) y", "--system", "stlc", "--format", "text") == (0, EXAMPLE_TREE, "")


def test_tree_formats():
    code, out, _ = call("tree", "\\x. x", "--format", "json")
    assert code == 0 and json.loads(out)["nodes"][0]["kind"] == "exists"
    code, out, _ = call("tree", "\\x. x", "--format", "dot", "--system", "stlc")
    assert out.startswith("digraph tree {")
    code, out, _ = call("tree", "(\\x. x) y", "--system", "stlc", "--lift")
    assert out.splitlines()[1:6] == [f"exists t{i}" for i in range(5)]
    assert call("tree", "\\x. x", "--lift")[0] == 3


def test_flat():
    code, out, _ = call("flat", "\\x. x", "--system", "stlc")
    assert code == 0
    assert out.splitlines()[-1] == "linear: ok"


def test_modes():
    code, out, _ = call("modes", "--mode", "+ + -")
    assert code == 0
    assert "tf+ ~ tp- ->+ tr-" in out
    code, out, _ = call("modes")
    assert code == 0 and "unmoded (Var: InCtx cannot produce x without search)" in out
    assert call("modes", "--mode", "+ - +")[0] == 1


def test_fuzz_small():
    code, out, _ = call("fuzz", "--count", "50", "--seed", "1", "--reference", "M")
    assert code == 0 and "verdict mismatches: 0" in out


def test_trace_goes_to_stderr():
    code, out, err = call("infer", "(\\x. x) y", "--ctx", "y : Int", "--system", "stlc", "--trace")
    assert out == "Int\n"
    assert err.splitlines()[0] == "[0] exists t0 :: declare"


def test_json_envelope():
    code, out, _ = call("infer", "\\x. x x", "--format", "json")
    doc = json.loads(out)
    assert code == 1
    assert list(doc) == ["status", "result", "diagnostics"]
    assert doc["status"] == "unsat" and doc["diagnostics"][0].startswith("occurs-check")


def test_context_from_file(tmp_path):
    path = tmp_path / "ctx.txt"
    path.write_text("y : Int")
    assert call("infer", "y", "--ctx", f"@{path}")[:2] == (0, "Int\n")


@pytest.mark.parametrize("argv", [
    ("infer", "\\x"),
    ("bogus",),
    ("infer", "x", "--unknown"),
    ("check", "x"),
    ("infer", "x", "--ctx", "y : "),
    ("infer", "let x = y in x", "--system", "stlc"),
    ("modes", "--mode", "+ +"),
])
def test_usage_errors(argv):
    code, out, err = call(*argv)
    assert code == 3
    assert out == ""


def test_output_is_deterministic():
    for argv in [("infer", "\\y. let f = \\x. y in f", "--trace"), ("tree", "let id = \\x. x in id id"),
                 ("fuzz", "--count", "30", "--seed", "2")]:
        assert call(*argv) == call(*argv)


def test_module_entry_point_exit_codes():
    import subprocess
    import sys
    runs = {
        ("infer", "\\x. x", "--system", "stlc"): 2,
        ("infer", "\\x. x"): 0,
        ("infer", "(\\x : Int. x) y", "--ctx", "y : Bool", "--system", "stlc"): 1,
        ("infer", "(\\x."): 3,
        ("bogus",): 3,
    }
    for argv, code in runs.items():
        proc = subprocess.run([sys.executable, "-m", "iatc", *argv], capture_output=True, text=True)
        assert proc.returncode == code, (argv, proc.stdout, proc.stderr)
