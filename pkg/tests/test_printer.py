from minimz.ast import TConcrete, TSingleton, TTuple
from minimz.parser import parse_file, parse_type
from minimz.printer import pretty_print, print_type


def test_concrete_with_singleton_fields():
    ty = TConcrete(
        "Node",
        (
            ("left", TSingleton("l")),
            ("elem", TSingleton("x")),
            ("right", TSingleton("r")),
        ),
        None,
    )
    assert print_type(ty) == "Node { left = l; elem = x; right = r }"


def test_empty_tuple():
    assert print_type(TTuple(())) == "()"


def test_forall_arrow_roundtrip():
    source = "[a, s: perm] (f: (a | s) -> bool, t: tree a | s) -> bool"
    ty = parse_type(source)
    assert parse_type(print_type(ty)) == ty


def test_wand_roundtrip():
    source = "{ammo: perm} ((| consumes (pre * ammo)) -> (| post) | ammo)"
    ty = parse_type(source)
    assert parse_type(print_type(ty)) == ty


def test_file_roundtrip_small():
    source = """
data mutable tree a =
  Leaf
| Node { left: tree a; elem: a; right: tree a }

val size: [a] tree a -> int

val size (t) =
  match t with
  | Leaf -> 0
  | Node { left = l; elem = x; right = r } -> add (add (size l, size r), 1)
"""
    file = parse_file(source, "x.mz")
    assert parse_file(pretty_print(file), "x.mz") == file


def test_printer_deterministic():
    source = "val f: [a, p: perm] (consumes x: (a | p)) -> (| p)"
    file = parse_file(source)
    assert pretty_print(file) == pretty_print(parse_file(pretty_print(file)))
