import subprocess
import sys

from conftest import CORPUS, corpus_text

from minimz.driver import check_text

TREE = """
data mutable tree a =
  Leaf
| Node { left: tree a; elem: a; right: tree a }

val size: [a] tree a -> int

val size (t) =
  match t with
  | Leaf -> 0
  | Node { left = l; elem = x; right = r } -> add (add (size l, size r), 1)
"""


def codes(diags):
    return [d.code for d in diags]


def test_borrowing_call_returns_the_permission():
    src = TREE + """
val twice: [a] (t: tree a) -> int
val twice (t) = add (size t, size t)
"""
    _, _, diags = check_text(src, "t")
    assert diags == []


def test_consuming_call_removes_the_permission():
    src = TREE + """
val gone: [a] (consumes t: tree a) -> int
val gone (t) = 0

val bad: [a] (consumes t: tree a) -> int
val bad (t) = add (gone t, gone t)
"""
    _, _, diags = check_text(src, "t")
    assert codes(diags) == ["E-SUBSUME"]


def test_call_without_permission_fails():
    src = TREE + """
val gone: [a] (consumes t: tree a) -> int
val gone (t) = 0

val bad: [a] (consumes t: tree a) -> int
val bad (t) =
  let u = gone t in
  size t
"""
    _, _, diags = check_text(src, "t")
    assert codes(diags) == ["E-SUBSUME"]


def test_identity_lambda_unannotated_codomain():
    src = """
val mk: () -> (int -> int)
val mk () = fun (x: int) -> x
"""
    _, _, diags = check_text(src, "t")
    assert diags == []


def test_borrowed_domain_must_survive_to_exit():
    src = TREE + """
val gone: [a] (consumes t: tree a) -> int
val gone (t) = 0

val leak: [a] (t: tree a) -> int
val leak (t) = gone t
"""
    _, _, diags = check_text(src, "t")
    assert codes(diags) == ["E-CONSUMED"]


def test_match_refines_and_restores():
    # both branches restore t @ tree a and return int: the join succeeds
    _, _, diags = check_text(TREE, "t")
    assert diags == []


def test_non_exhaustive_match():
    src = TREE + """
val bad: [a] (t: tree a) -> int
val bad (t) =
  match t with
  | Leaf -> 0
"""
    _, _, diags = check_text(src, "t")
    assert codes(diags) == ["E-MATCH"]


def test_declarations_only_file_checks():
    _, _, diags = check_text("data d = K { v: int }\nval f: int -> int", "t")
    assert diags == []


def test_branch_result_types_must_join():
    src = TREE + """
val bad: [a] (t: tree a) -> int
val bad (t) =
  match t with
  | Leaf -> 0
  | Node { left = l; elem = x; right = r } -> true
"""
    _, _, diags = check_text(src, "t")
    assert codes(diags) == ["E-SUBSUME"]


def test_consumed_marker_respected_in_exit_goals():
    src = TREE + """
val ok: [a] (consumes t: tree a) -> int
val ok (t) = 0
"""
    _, _, diags = check_text(src, "t")
    assert diags == []  # dropping a consumed (owned) permission is fine


def test_field_write_requires_mutable():
    src = """
val bad: (consumes l: list int) -> int
val bad (l) =
  match l with
  | Nil -> 0
  | Cons { head = h; tail = rest } -> (l.head <- 5; 0)
"""
    _, _, diags = check_text(src, "t")
    assert codes(diags) == ["E-SUBSUME"]


def test_tag_update():
    src = TREE + """
val chop: [a] (consumes t: tree a) -> (| t @ tree a)
val chop (t) =
  match t with
  | Leaf -> ()
  | Node { left = l; elem = x; right = r } ->
      tag of t <- Leaf
"""
    # Changing Node -> Leaf abandons the field permissions (affine drop) and
    # leaves t a well-formed leaf.
    _, _, diags = check_text(src, "t")
    assert diags == []


def test_arity_mismatch_is_e_arity():
    src = TREE + """
val f: (int, int) -> int
val f (x, y) = x

val bad: () -> int
val bad () = f 1
"""
    _, _, diags = check_text(src, "t")
    assert codes(diags) == ["E-ARITY"]


def test_determinism_across_processes():
    """Two separate checker runs produce identical diagnostic lines."""
    target = CORPUS / "neg" / "neg_double_stop.mz"
    cmd = [sys.executable, "-m", "minimz", "check", str(target)]
    first = subprocess.run(cmd, capture_output=True, text=True)
    second = subprocess.run(cmd, capture_output=True, text=True)
    assert first.returncode == 1 and second.returncode == 1
    assert first.stderr == second.stderr


def test_exactly_one_diagnostic_for_double_stop():
    text = corpus_text("neg/neg_double_stop.mz")
    _, _, diags = check_text(text, "neg_double_stop.mz")
    assert codes(diags) == ["E-SUBSUME"]


def test_explicit_instantiation_kind_mismatch():
    src = TREE + """
val gone: [a] (consumes t: tree a) -> int
val gone (t) = 0

val bad: (consumes t: tree int) -> int
val bad (t) = gone [t @ tree int] t
"""
    _, _, diags = check_text(src, "t")
    assert codes(diags) == ["E-KIND"]


def test_diagnostic_spans_are_inside_the_source():
    from conftest import CORPUS

    for rel in sorted((CORPUS / "neg").glob("*.mz")):
        text = rel.read_text(encoding="utf-8")
        _, _, diags = check_text(text, rel.name)
        assert diags
        for d in diags:
            assert 0 <= d.span.start <= len(text)
            assert d.span.start + d.span.length <= len(text)
