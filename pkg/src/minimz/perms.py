"""The permission algebra.

Permissions are types of kind PERM, normalized into flat lists of atoms:
anchored atoms `x @ t` and permission variables. The environment is an
ordered multiset of atoms; extraction deterministically removes the first
match (affine atoms are removed, duplicable ones are not).

Subsumption search order per goal atom: exact match, singleton
unification, alias expansion, fold of a structural permission to its
nominal type, split of a nominal permission along a structural one, and
existential witness via unification metavariables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

from .ast import (
    KIND_PERM,
    TApp,
    TArrow,
    TAt,
    TBar,
    TConcrete,
    TEmpty,
    TExists,
    TForall,
    TMeta,
    TSingleton,
    TStar,
    TTuple,
    TVar,
    Type,
    TupleComp,
)
from .kinds import AliasInfo, DataInfo, Env, PrimInfo

_fresh_counter = itertools.count()


def fresh_name(base: str) -> str:
    """Names of the form `base$k`; `$` is not lexable, so no collisions
    with user-written identifiers are possible."""
    return f"{base}${next(_fresh_counter)}"


def reset_fresh_names() -> None:
    global _fresh_counter
    _fresh_counter = itertools.count()


# ---------------------------------------------------------------------------
# Duplicability
# ---------------------------------------------------------------------------


DUPLICABLE = "DUPLICABLE"
AFFINE = "AFFINE"


_dup_memo: dict[tuple[int, Type], str] = {}


def duplicability(t: Type, env: Env, _assume: frozenset[str] | None = None) -> str:
    """Least-fixed-point duplicability; recursive occurrences are optimistically
    assumed duplicable and iterated until stable (sufficient for `list`)."""
    if _assume is None:
        key = (id(env), t)
        cached = _dup_memo.get(key)
        if cached is not None:
            return cached
        result = duplicability(t, env, frozenset())
        if len(_dup_memo) > 100_000:
            _dup_memo.clear()
        _dup_memo[key] = result
        return result
    if isinstance(t, (TEmpty, TSingleton)):
        return DUPLICABLE
    if isinstance(t, TMeta):
        return AFFINE
    if isinstance(t, TVar):
        return AFFINE  # rigid type/permission variable
    if isinstance(t, TArrow):
        return DUPLICABLE
    if isinstance(t, TForall):
        return duplicability(t.body, env, _assume)
    if isinstance(t, TExists):
        return duplicability(t.body, env, _assume)
    if isinstance(t, TBar):
        if duplicability(t.carrier, env, _assume) == AFFINE:
            return AFFINE
        return duplicability(t.perm, env, _assume)
    if isinstance(t, TTuple):
        for comp in t.comps:
            if duplicability(comp.ty, env, _assume) == AFFINE:
                return AFFINE
        return DUPLICABLE
    if isinstance(t, TAt):
        return duplicability(t.ty, env, _assume)
    if isinstance(t, TStar):
        for item in t.items:
            if duplicability(item, env, _assume) == AFFINE:
                return AFFINE
        return DUPLICABLE
    if isinstance(t, TConcrete):
        info = env.tags.get(t.tag)
        if info is not None:
            data = env.types.get(info[0])
            if isinstance(data, DataInfo) and data.mutable:
                return AFFINE
        for _, fty in t.fields:
            if duplicability(fty, env, _assume) == AFFINE:
                return AFFINE
        if t.bar is not None and duplicability(t.bar, env, _assume) == AFFINE:
            return AFFINE
        return DUPLICABLE
    if isinstance(t, TApp):
        info = env.types.get(t.head)
        if isinstance(info, PrimInfo):
            return DUPLICABLE
        if isinstance(info, AliasInfo):
            return duplicability(expand_alias(env, t), env, _assume)
        if isinstance(info, DataInfo):
            if info.mutable:
                return AFFINE
            key = t.head
            if key in _assume:
                return DUPLICABLE  # optimistic; iterated below
            inner = _assume | {key}
            subst = dict(zip((n for n, _ in info.params), t.args))
            for branch in info.branches.values():
                for _, fty in branch.fields:
                    if duplicability(subst_type(fty, subst), env, inner) == AFFINE:
                        return AFFINE
                if branch.bar is not None:
                    if duplicability(subst_type(branch.bar, subst), env, inner) == AFFINE:
                        return AFFINE
            return DUPLICABLE
        return AFFINE  # abstract type
    raise TypeError(f"unknown type node {t!r}")


# ---------------------------------------------------------------------------
# Substitution (capture-avoiding) and alias expansion
# ---------------------------------------------------------------------------


def subst_type(t: Type, subst: dict[str, Type], values: dict[str, str] | None = None) -> Type:
    """Substitute type/permission variables and (optionally) value anchors.

    `subst` maps binder names to types; `values` maps value names (anchors,
    singleton references, component names) to other value names.
    """
    values = values or {}

    def ren(name: str) -> str:
        return values.get(name, name)

    if isinstance(t, TVar):
        return subst.get(t.name, t)
    if isinstance(t, (TMeta, TEmpty)):
        return t
    if isinstance(t, TSingleton):
        return replace(t, name=ren(t.name))
    if isinstance(t, TApp):
        return replace(t, args=tuple(subst_type(a, subst, values) for a in t.args))
    if isinstance(t, TArrow):
        dom, values2 = _subst_domain(t.domain, subst, values)
        return replace(t, domain=dom, codomain=subst_type(t.codomain, subst, values2))
    if isinstance(t, TTuple):
        dom, _ = _subst_domain(t, subst, values)
        return dom
    if isinstance(t, TBar):
        dom, _ = _subst_domain(t, subst, values)
        return dom
    if isinstance(t, TConcrete):
        fields = tuple((n, subst_type(f, subst, values)) for n, f in t.fields)
        bar = subst_type(t.bar, subst, values) if t.bar is not None else None
        return replace(t, fields=fields, bar=bar)
    if isinstance(t, (TForall, TExists)):
        binders = []
        inner = dict(subst)
        free = _free_in_values(subst, values)
        for name, kind in t.binders:
            if name in free:
                new_name = fresh_name(name)
                inner[name] = TVar(new_name)
                binders.append((new_name, kind))
            else:
                inner.pop(name, None)
                binders.append((name, kind))
        return replace(t, binders=tuple(binders), body=subst_type(t.body, inner, values))
    if isinstance(t, TAt):
        return replace(t, anchor=ren(t.anchor), ty=subst_type(t.ty, subst, values))
    if isinstance(t, TStar):
        return replace(t, items=tuple(subst_type(i, subst, values) for i in t.items))
    raise TypeError(f"unknown type node {t!r}")


def _subst_domain(
    t: Type, subst: dict[str, Type], values: dict[str, str]
) -> tuple[Type, dict[str, str]]:
    """Substitute inside a tuple/bar, keeping track of component-name binders:
    a component name shadows any outer value renaming."""
    if isinstance(t, TBar):
        carrier, values2 = _subst_domain(t.carrier, subst, values)
        return replace(t, carrier=carrier, perm=subst_type(t.perm, subst, values2)), values2
    if isinstance(t, TTuple):
        values2 = dict(values)
        comps = []
        for comp in t.comps:
            ty = subst_type(comp.ty, subst, values2)
            if comp.name is not None:
                values2.pop(comp.name, None)
            comps.append(TupleComp(comp.name, ty, comp.consumed))
        return replace(t, comps=tuple(comps)), values2
    return subst_type(t, subst, values), values


def _free_in_values(subst: dict[str, Type], values: dict[str, str]) -> set[str]:
    free: set[str] = set()
    for t in subst.values():
        free |= free_type_vars(t)
    return free


def free_type_vars(t: Type) -> set[str]:
    out: set[str] = set()

    def walk(u: Type, bound: frozenset[str]) -> None:
        if isinstance(u, TVar):
            if u.name not in bound:
                out.add(u.name)
        elif isinstance(u, TApp):
            for a in u.args:
                walk(a, bound)
        elif isinstance(u, TArrow):
            walk(u.domain, bound)
            walk(u.codomain, bound)
        elif isinstance(u, TTuple):
            for c in u.comps:
                walk(c.ty, bound)
        elif isinstance(u, TBar):
            walk(u.carrier, bound)
            walk(u.perm, bound)
        elif isinstance(u, TConcrete):
            for _, f in u.fields:
                walk(f, bound)
            if u.bar is not None:
                walk(u.bar, bound)
        elif isinstance(u, (TForall, TExists)):
            walk(u.body, bound | {n for n, _ in u.binders})
        elif isinstance(u, TAt):
            walk(u.ty, bound)
        elif isinstance(u, TStar):
            for i in u.items:
                walk(i, bound)

    walk(t, frozenset())
    return out


def expand_alias(env: Env, t: TApp) -> Type:
    info = env.types.get(t.head)
    assert isinstance(info, AliasInfo) and info.body is not None
    subst = dict(zip((n for n, _ in info.params), t.args))
    return subst_type(info.body, subst)


def is_alias(env: Env, t: Type) -> bool:
    return isinstance(t, TApp) and isinstance(env.types.get(t.head), AliasInfo)


def instantiate(q: Type, witnesses: list[Type], env: Env) -> Type:
    """Instantiate the outermost quantifier with explicit witnesses."""
    if not isinstance(q, (TForall, TExists)):
        raise ValueError("instantiate requires a quantified type")
    if len(witnesses) != len(q.binders):
        raise ValueError(
            f"expected {len(q.binders)} type argument(s), got {len(witnesses)}"
        )
    subst = {name: w for (name, _), w in zip(q.binders, witnesses)}
    return subst_type(q.body, subst)


# ---------------------------------------------------------------------------
# Normalization of permissions into atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    pass


@dataclass(frozen=True)
class Anchored(Atom):
    anchor: str
    ty: Type

    def __str__(self) -> str:
        from .printer import print_type

        return f"{self.anchor} @ {print_type(self.ty, 4)}"


@dataclass(frozen=True)
class PermVar(Atom):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class MetaPerm(Atom):
    """A permission metavariable awaiting an existential witness."""

    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


def normalize(perm: Type) -> list[Atom]:
    """Flatten a permission into atoms; `x @ (t | p)` splits into `x @ t * p`."""
    atoms: list[Atom] = []

    def walk(p: Type) -> None:
        if isinstance(p, TEmpty):
            return
        if isinstance(p, TStar):
            for item in p.items:
                walk(item)
            return
        if isinstance(p, TVar):
            atoms.append(PermVar(p.name))
            return
        if isinstance(p, TMeta):
            atoms.append(MetaPerm(p.name))
            return
        if isinstance(p, TAt):
            ty = p.ty
            while isinstance(ty, TBar):
                walk(ty.perm)
                ty = ty.carrier
            atoms.append(Anchored(p.anchor, ty))
            return
        raise TypeError(f"not a permission: {p!r}")

    walk(perm)
    return atoms


def admit_atoms(anchor: str, ty: Type) -> list[Atom]:
    """Atoms released when a value of type `ty` is bound to `anchor`:
    bar permissions split off eagerly so they are visible to extraction."""
    perms: list[Atom] = []
    while isinstance(ty, TBar):
        perms.extend(normalize(ty.perm))
        ty = ty.carrier
    return [Anchored(anchor, ty)] + perms


def atoms_to_type(atoms: list[Atom]) -> Type:
    items: list[Type] = []
    for a in atoms:
        if isinstance(a, Anchored):
            items.append(TAt(a.anchor, a.ty))
        elif isinstance(a, PermVar):
            items.append(TVar(a.name))
        else:
            items.append(TMeta(a.name, KIND_PERM))
    if not items:
        return TEmpty()
    if len(items) == 1:
        return items[0]
    return TStar(tuple(items))


# ---------------------------------------------------------------------------
# The permission environment
# ---------------------------------------------------------------------------


class SubsumptionFailure(Exception):
    def __init__(self, goal: Atom, env: "PermEnv", note: str = ""):
        super().__init__(f"cannot extract {goal}")
        self.goal = goal
        self.env = env
        self.note = note


@dataclass
class PermEnv:
    """Ordered multiset of permission atoms. Operations return new values.

    `globals` is a shared side table of duplicable permissions for top-level
    values; they are never extracted and never copied per operation.
    """

    env: Env
    atoms: tuple[Atom, ...] = ()
    globals: dict[str, Type] | None = None

    def __str__(self) -> str:
        return " * ".join(str(a) for a in self.atoms) if self.atoms else "empty"

    def add(self, *new: Atom) -> "PermEnv":
        return PermEnv(self.env, self.atoms + tuple(new), self.globals)

    def add_perm(self, perm: Type) -> "PermEnv":
        return self.add(*normalize(perm))

    def global_type(self, anchor: str) -> Type | None:
        if self.globals is None:
            return None
        return self.globals.get(anchor)

    def remove_index(self, idx: int) -> "PermEnv":
        return PermEnv(self.env, self.atoms[:idx] + self.atoms[idx + 1 :], self.globals)

    def replace_index(self, idx: int, *new: Atom) -> "PermEnv":
        return PermEnv(
            self.env, self.atoms[:idx] + tuple(new) + self.atoms[idx + 1 :], self.globals
        )

    def atoms_of(self, anchor: str) -> list[tuple[int, Anchored]]:
        return [
            (i, a)
            for i, a in enumerate(self.atoms)
            if type(a) is Anchored and a.anchor == anchor
        ]

    def duplicable_atoms(self) -> list[Atom]:
        out = []
        for a in self.atoms:
            if isinstance(a, Anchored) and duplicability(a.ty, self.env) == DUPLICABLE:
                out.append(a)
        return out

    def has_affine(self, goal: Atom) -> bool:
        """Does the env hold an affine atom anchored like `goal`? Used to
        classify a lambda-body failure as an illegal capture: duplicable
        atoms are copied into closure environments, so only an affine
        holding explains the miss."""
        for a in self.atoms:
            if isinstance(a, Anchored) and isinstance(goal, Anchored):
                if a.anchor == goal.anchor and duplicability(a.ty, self.env) == AFFINE:
                    return True
            elif isinstance(a, PermVar) and isinstance(goal, PermVar):
                if a.name == goal.name:
                    return True
        return False


# ---------------------------------------------------------------------------
# split_concrete
# ---------------------------------------------------------------------------


def split_concrete(p: Anchored, env: Env, names: list[str] | None = None) -> list[Atom]:
    """Split `x @ Tag{f1: t1; ...}` into the structural atom with fresh
    singleton fields plus one anchored atom per field, preserving order.
    Optional `names` pins the introduced field anchors (used by match
    patterns); otherwise fresh names are generated.
    """
    ty = p.ty
    assert isinstance(ty, TConcrete)
    fields: list[tuple[str, Type]] = []
    out: list[Atom] = []
    for i, (fname, fty) in enumerate(ty.fields):
        if isinstance(fty, TSingleton):
            fields.append((fname, fty))
            continue
        anchor = names[i] if names is not None else fresh_name(fname)
        fields.append((fname, TSingleton(anchor)))
        out.append(Anchored(anchor, fty))
    structural = Anchored(p.anchor, TConcrete(ty.tag, tuple(fields), None))
    result: list[Atom] = [structural] + out
    if ty.bar is not None:
        result.extend(normalize(ty.bar))
    return result
