"""AST node definitions for the surface language.

Every node carries a source span (byte offset + length) that is excluded
from structural equality, so two parses of the same text compare equal
even when whitespace differs.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Span:
    start: int
    length: int

    @property
    def end(self) -> int:
        return self.start + self.length

    def merge(self, other: "Span") -> "Span":
        start = min(self.start, other.start)
        end = max(self.end, other.end)
        return Span(start, end - start)


DUMMY = Span(0, 0)


def _span_field() -> Span:
    return field(default=DUMMY, compare=False, repr=False)  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# Kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kind:
    pass


@dataclass(frozen=True)
class KType(Kind):
    def __str__(self) -> str:
        return "type"


@dataclass(frozen=True)
class KPerm(Kind):
    def __str__(self) -> str:
        return "perm"


@dataclass(frozen=True)
class KArrow(Kind):
    params: tuple[Kind, ...]
    result: Kind

    def __str__(self) -> str:
        args = ", ".join(str(p) for p in self.params)
        return f"({args}) -> {self.result}"


KIND_TYPE = KType()
KIND_PERM = KPerm()


# ---------------------------------------------------------------------------
# Types (and permissions; permissions are types of kind PERM)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Type:
    pass


@dataclass(frozen=True)
class TVar(Type):
    name: str
    span: Span = _span_field()


@dataclass(frozen=True)
class TMeta(Type):
    """Unification variable introduced by the checker; never produced by parsing."""

    name: str
    kind: Kind = KIND_TYPE
    span: Span = _span_field()


@dataclass(frozen=True)
class TApp(Type):
    head: str
    args: tuple[Type, ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class TupleComp:
    name: str | None
    ty: Type
    consumed: bool = False


@dataclass(frozen=True)
class TTuple(Type):
    comps: tuple[TupleComp, ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class TArrow(Type):
    domain: Type
    codomain: Type
    span: Span = _span_field()


@dataclass(frozen=True)
class TBar(Type):
    """`(t | p)`: the carrier type together with a permission."""

    carrier: Type
    perm: Type
    consumed: bool = False
    span: Span = _span_field()


@dataclass(frozen=True)
class TConcrete(Type):
    """Structural tagged-record type, e.g. `Node { left = l; elem = x; right = r }`.

    Field values are types; a field bound to a name is a Singleton.
    """

    tag: str
    fields: tuple[tuple[str, Type], ...]
    bar: Type | None = None
    span: Span = _span_field()


@dataclass(frozen=True)
class TSingleton(Type):
    name: str
    span: Span = _span_field()


@dataclass(frozen=True)
class TForall(Type):
    binders: tuple[tuple[str, Kind], ...]
    body: Type
    span: Span = _span_field()


@dataclass(frozen=True)
class TExists(Type):
    binders: tuple[tuple[str, Kind], ...]
    body: Type
    span: Span = _span_field()


@dataclass(frozen=True)
class TAt(Type):
    """Anchored permission `x @ t`."""

    anchor: str
    ty: Type
    span: Span = _span_field()


@dataclass(frozen=True)
class TStar(Type):
    """Permission conjunction `p * q * ...`, kept flat after normalization."""

    items: tuple[Type, ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class TEmpty(Type):
    span: Span = _span_field()


UNIT = TTuple(())


# ---------------------------------------------------------------------------
# Patterns
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pattern:
    pass


@dataclass(frozen=True)
class PVar(Pattern):
    name: str
    span: Span = _span_field()


@dataclass(frozen=True)
class PTuple(Pattern):
    items: tuple[Pattern, ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class PTag(Pattern):
    tag: str
    fields: tuple[tuple[str, Pattern], ...]
    span: Span = _span_field()


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class EVar(Expr):
    name: str
    span: Span = _span_field()


@dataclass(frozen=True)
class EInt(Expr):
    value: int
    span: Span = _span_field()


@dataclass(frozen=True)
class EBool(Expr):
    value: bool
    span: Span = _span_field()


@dataclass(frozen=True)
class ELet(Expr):
    pattern: Pattern
    bound: Expr
    body: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class ECall(Expr):
    callee: Expr
    arg: Expr
    type_args: tuple[Type, ...] | None = None
    span: Span = _span_field()


@dataclass(frozen=True)
class EMatch(Expr):
    scrutinee: Expr
    branches: tuple[tuple[Pattern, Expr], ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class EIf(Expr):
    cond: Expr
    then: Expr
    otherwise: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class EField(Expr):
    obj: Expr
    name: str
    span: Span = _span_field()


@dataclass(frozen=True)
class EAssign(Expr):
    obj: Expr
    name: str
    value: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class ETagUpdate(Expr):
    obj: Expr
    tag: str
    fields: tuple[tuple[str, Expr], ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class EConstruct(Expr):
    tag: str
    fields: tuple[tuple[str, Expr], ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class ETuple(Expr):
    items: tuple[Expr, ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class ELambda(Expr):
    domain: Type
    codomain: Type | None
    body: Expr
    span: Span = _span_field()


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Branch:
    tag: str
    fields: tuple[tuple[str, Type], ...]
    bar: Type | None
    span: Span = _span_field()


@dataclass(frozen=True)
class Decl:
    pass


@dataclass(frozen=True)
class DData(Decl):
    name: str
    mutable: bool
    params: tuple[tuple[str, Kind], ...]
    branches: tuple[Branch, ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class DAlias(Decl):
    name: str
    params: tuple[tuple[str, Kind], ...]
    body: Type
    span: Span = _span_field()


@dataclass(frozen=True)
class DAbstract(Decl):
    name: str
    params: tuple[tuple[str, Kind], ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class DValSig(Decl):
    name: str
    ty: Type
    span: Span = _span_field()


@dataclass(frozen=True)
class DValDef(Decl):
    name: str
    params: tuple[str, ...]
    body: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class SourceFile:
    path: str
    decls: tuple[Decl, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SourceFile):
            return NotImplemented
        return self.decls == other.decls  # path is not structural

    def __hash__(self) -> int:
        return hash(self.decls)
