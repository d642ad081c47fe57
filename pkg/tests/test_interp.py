import pytest

from conftest import corpus_text, value_to_pylist

from minimz.driver import run_text
from minimz.interp import RuntimeTrap, VBool, VInt, _wrap64


def test_size_of_three_node_tree():
    value, interp = run_text(corpus_text("run/run_size.mz"), "main", "run_size.mz")
    assert isinstance(value, VInt) and value.value == 3


def test_size_of_leaf():
    src = corpus_text("pos/tree_size.mz") + """
val main: () -> int
val main () = size Leaf
"""
    value, _ = run_text(src, "main", "t")
    assert isinstance(value, VInt) and value.value == 0


def test_plain_closure_can_fire_twice():
    src = """
val main: () -> int
val main () =
  let f = fun (x: int) : int = add (x, 1) in
  add (f 1, f 2)
"""
    value, _ = run_text(src, "main", "t")
    assert value.value == 5


def test_one_shot_reuse_traps():
    text = corpus_text("dyn/double_wand.mz")
    with pytest.raises(RuntimeTrap) as exc:
        run_text(text, "main", "t", checked=False)
    assert exc.value.kind == "ONE_SHOT_REUSE"


def test_double_barrel_shares_one_cell():
    text = corpus_text("dyn/double_barrel.mz")
    with pytest.raises(RuntimeTrap) as exc:
        run_text(text, "main", "t", checked=False)
    assert exc.value.kind == "ONE_SHOT_REUSE"


def test_checked_corpus_runs_trap_free():
    for rel, entry in [
        ("run/run_adt_loop.mz", "main"),
        ("run/run_oo_loop.mz", "main"),
        ("run/run_cps_loop.mz", "main"),
        ("run/run_iter.mz", "main"),
        ("run/run_filter.mz", "main"),
        ("run/run_same_fringe.mz", "main"),
    ]:
        value, interp = run_text(corpus_text(rel), entry, rel)
        assert value is not None


def test_adt_loop_sequence():
    value, interp = run_text(corpus_text("run/run_adt_loop.mz"), "main", "t")
    assert value_to_pylist(interp, value) == [1, 2, 3]


def test_same_fringe_run():
    value, _ = run_text(corpus_text("run/run_same_fringe.mz"), "main", "t")
    assert isinstance(value, VBool) and value.value is True


def test_determinism_value_and_trace():
    text = corpus_text("run/run_adt_loop.mz")
    v1, i1 = run_text(text, "main", "t", trace=True)
    v2, i2 = run_text(text, "main", "t", trace=True)
    assert i1.render(v1) == i2.render(v2)
    assert i1.trace == i2.trace
    assert i1.stats.steps == i2.stats.steps


def test_trace_reports_allocations_and_oneshots():
    text = corpus_text("run/run_adt_loop.mz")
    _, interp = run_text(text, "main", "t", trace=True)
    assert any(line.startswith("alloc") for line in interp.trace)
    assert any(line.startswith("oneshot") for line in interp.trace)


def test_step_limit_traps():
    src = """
val spin: (n: int) -> int
val spin (n) = spin n

val main: () -> int
val main () = spin 0
"""
    with pytest.raises(RuntimeTrap) as exc:
        run_text(src, "main", "t", checked=False, max_steps=1000)
    assert exc.value.kind == "STEP_LIMIT"


def test_division_by_zero_traps():
    src = """
val main: () -> int
val main () = div (1, 0)
"""
    with pytest.raises(RuntimeTrap) as exc:
        run_text(src, "main", "t")
    assert exc.value.kind == "DIV_ZERO"


def test_64_bit_wraparound():
    assert _wrap64(2**63) == -(2**63)
    assert _wrap64(-(2**63) - 1) == 2**63 - 1
    assert _wrap64(42) == 42


def test_stop_is_constant_time_mid_iteration():
    text = corpus_text("run/run_stop_cost.mz")
    counts = []
    for entry in ["stop_cost_1", "stop_cost_100", "stop_cost_1000"]:
        _, interp = run_text(text, entry, "t")
        (steps,) = interp.stats.call_steps["stop"]
        counts.append(steps)
    assert counts[0] == counts[1] == counts[2]


def test_runaway_recursion_traps_instead_of_crashing():
    src = """
val spin: (n: int) -> int
val spin (n) = add (1, spin n)

val main: () -> int
val main () = spin 0
"""
    with pytest.raises(RuntimeTrap) as exc:
        run_text(src, "main", "t", checked=False, max_steps=100_000_000)
    assert exc.value.kind == "STEP_LIMIT"
