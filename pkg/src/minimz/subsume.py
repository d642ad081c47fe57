"""Subsumption-based extraction of permissions from an environment.

The entry point is `Subsumer.subsume`, which extracts a list of goal
atoms from a `PermEnv`, solving unification metavariables along the way.
The leftover environment is the frame. Search is deterministic; there is
no backtracking across conjuncts beyond one retry pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    KIND_TYPE,
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
from .kinds import DataInfo, Env, domain_bar, domain_comps
from .perms import (
    Anchored,
    Atom,
    DUPLICABLE,
    MetaPerm,
    PermEnv,
    PermVar,
    SubsumptionFailure,
    admit_atoms,
    atoms_to_type,
    duplicability,
    expand_alias,
    fresh_name,
    is_alias,
    normalize,
    subst_type,
)

_MAX_DEPTH = 80


class Unifier:
    def __init__(self) -> None:
        self.bindings: dict[str, Type] = {}
        self._counter = 0

    def fresh(self, base: str, kind=KIND_TYPE) -> TMeta:
        self._counter += 1
        return TMeta(f"{base}%{self._counter}", kind)

    def snapshot(self) -> dict[str, Type]:
        return dict(self.bindings)

    def restore(self, snap: dict[str, Type]) -> None:
        self.bindings = snap

    def shallow(self, t: Type) -> Type:
        while isinstance(t, TMeta) and t.name in self.bindings:
            t = self.bindings[t.name]
        return t

    def resolve(self, t: Type) -> Type:
        """Deep substitution of solved metavariables."""
        if not self.bindings:
            return t
        t = self.shallow(t)
        if isinstance(t, TMeta):
            return t

        def deep(u: Type) -> Type:
            if isinstance(u, TMeta):
                r = self.shallow(u)
                if isinstance(r, TMeta):
                    return r
                return self.resolve(r)
            return u

        return _map_type(t, deep)

    def bind(self, name: str, ty: Type) -> bool:
        ty = self.resolve(ty)
        if isinstance(ty, TMeta) and ty.name == name:
            return True
        if name in _meta_names(ty):
            return False  # occurs check
        self.bindings[name] = ty
        return True


def _meta_names(t: Type) -> set[str]:
    names: set[str] = set()
    _map_type(t, lambda u: (names.add(u.name), u)[1] if isinstance(u, TMeta) else u)
    return names


def _map_type(t: Type, f) -> Type:
    """Bottom-up map over a type; `f` is applied to every node."""
    from dataclasses import replace

    if isinstance(t, (TVar, TMeta, TEmpty, TSingleton)):
        return f(t)
    if isinstance(t, TApp):
        return f(replace(t, args=tuple(_map_type(a, f) for a in t.args)))
    if isinstance(t, TArrow):
        return f(replace(t, domain=_map_type(t.domain, f), codomain=_map_type(t.codomain, f)))
    if isinstance(t, TTuple):
        comps = tuple(TupleComp(c.name, _map_type(c.ty, f), c.consumed) for c in t.comps)
        return f(replace(t, comps=comps))
    if isinstance(t, TBar):
        return f(replace(t, carrier=_map_type(t.carrier, f), perm=_map_type(t.perm, f)))
    if isinstance(t, TConcrete):
        fields = tuple((n, _map_type(ft, f)) for n, ft in t.fields)
        bar = _map_type(t.bar, f) if t.bar is not None else None
        return f(replace(t, fields=fields, bar=bar))
    if isinstance(t, (TForall, TExists)):
        return f(replace(t, body=_map_type(t.body, f)))
    if isinstance(t, TAt):
        return f(replace(t, ty=_map_type(t.ty, f)))
    if isinstance(t, TStar):
        return f(replace(t, items=tuple(_map_type(i, f) for i in t.items)))
    raise TypeError(f"unknown type node {t!r}")


@dataclass
class Subsumer:
    env: Env
    uni: Unifier = field(default_factory=Unifier)

    # ------------------------------------------------------------------
    # unification
    # ------------------------------------------------------------------

    def unify(self, a: Type, b: Type, ren_a: dict[str, str] | None = None,
              ren_b: dict[str, str] | None = None, depth: int = 0) -> bool:
        """Structural unification; metavariables may occur on either side.
        `ren_a`/`ren_b` carry alpha-renamings of bound names."""
        if depth > _MAX_DEPTH:
            return False
        ren_a = ren_a if ren_a is not None else {}
        ren_b = ren_b if ren_b is not None else {}
        a = self.uni.shallow(a)
        b = self.uni.shallow(b)
        a = _strip_empty_bar(a)
        b = _strip_empty_bar(b)
        if isinstance(a, TMeta):
            return self.uni.bind(a.name, _apply_ren(b, ren_b))
        if isinstance(b, TMeta):
            return self.uni.bind(b.name, _apply_ren(a, ren_a))
        if isinstance(a, TVar) and isinstance(b, TVar):
            return ren_a.get(a.name, a.name) == ren_b.get(b.name, b.name)
        if isinstance(a, TEmpty) and isinstance(b, TEmpty):
            return True
        if isinstance(a, TSingleton) and isinstance(b, TSingleton):
            return ren_a.get(a.name, a.name) == ren_b.get(b.name, b.name)
        if isinstance(a, TApp) and isinstance(b, TApp) and a.head == b.head:
            return all(
                self.unify(x, y, ren_a, ren_b, depth + 1) for x, y in zip(a.args, b.args)
            )
        if is_alias(self.env, a):
            return self.unify(expand_alias(self.env, a), b, ren_a, ren_b, depth + 1)
        if is_alias(self.env, b):
            return self.unify(a, expand_alias(self.env, b), ren_a, ren_b, depth + 1)
        if isinstance(a, TApp) and isinstance(b, TApp):
            return False
        if isinstance(a, TArrow) and isinstance(b, TArrow):
            return self._unify_arrow(a, b, ren_a, ren_b, depth)
        if isinstance(a, TTuple) and isinstance(b, TTuple):
            ren_a2, ren_b2 = dict(ren_a), dict(ren_b)
            if len(a.comps) != len(b.comps):
                return False
            for ca, cb in zip(a.comps, b.comps):
                if ca.consumed != cb.consumed:
                    return False
                if not self.unify(ca.ty, cb.ty, ren_a2, ren_b2, depth + 1):
                    return False
                self._bind_comp_names(ca.name, cb.name, ren_a2, ren_b2)
            return True
        if isinstance(a, TBar) and isinstance(b, TBar):
            if a.consumed != b.consumed:
                return False
            if not self.unify(a.carrier, b.carrier, ren_a, ren_b, depth + 1):
                return False
            return self.unify_perms(a.perm, b.perm, ren_a, ren_b, depth)
        if isinstance(a, TConcrete) and isinstance(b, TConcrete):
            if a.tag != b.tag or len(a.fields) != len(b.fields):
                return False
            for (na, fa), (nb, fb) in zip(a.fields, b.fields):
                if na != nb or not self.unify(fa, fb, ren_a, ren_b, depth + 1):
                    return False
            pa = a.bar if a.bar is not None else TEmpty()
            pb = b.bar if b.bar is not None else TEmpty()
            return self.unify_perms(pa, pb, ren_a, ren_b, depth)
        if isinstance(a, (TForall, TExists)) and type(a) is type(b):
            if len(a.binders) != len(b.binders):
                return False
            ren_a2, ren_b2 = dict(ren_a), dict(ren_b)
            for (na, ka), (nb, kb) in zip(a.binders, b.binders):
                if ka != kb:
                    return False
                tok = fresh_name("alpha")
                ren_a2[na] = tok
                ren_b2[nb] = tok
            return self.unify(a.body, b.body, ren_a2, ren_b2, depth + 1)
        if isinstance(b, TForall):
            # A polymorphic permission meets a monomorphic requirement by
            # instantiating its binders.
            subst = {n: self.uni.fresh(n, k) for n, k in b.binders}
            return self.unify(a, subst_type(b.body, subst), ren_a, ren_b, depth + 1)
        if isinstance(a, TAt) and isinstance(b, TAt):
            if ren_a.get(a.anchor, a.anchor) != ren_b.get(b.anchor, b.anchor):
                return False
            return self.unify(a.ty, b.ty, ren_a, ren_b, depth + 1)
        if isinstance(a, (TAt, TStar, TEmpty, TVar)) or isinstance(b, (TAt, TStar, TEmpty, TVar)):
            # permission-kinded comparison falls back to multiset matching
            try:
                return self.unify_perms(a, b, ren_a, ren_b, depth)
            except TypeError:
                return False
        return False

    def _bind_comp_names(
        self, na: str | None, nb: str | None, ren_a: dict[str, str], ren_b: dict[str, str]
    ) -> None:
        if na is None and nb is None:
            return
        tok = fresh_name("comp")
        if na is not None:
            ren_a[na] = tok
        if nb is not None:
            ren_b[nb] = tok

    def _unify_arrow(
        self, a: TArrow, b: TArrow, ren_a: dict[str, str], ren_b: dict[str, str], depth: int
    ) -> bool:
        comps_a, comps_b = domain_comps(a.domain), domain_comps(b.domain)
        bar_a, cons_a = domain_bar(a.domain)
        bar_b, cons_b = domain_bar(b.domain)
        if len(comps_a) != len(comps_b) or cons_a != cons_b:
            return False
        ren_a2, ren_b2 = dict(ren_a), dict(ren_b)
        for ca, cb in zip(comps_a, comps_b):
            if ca.consumed != cb.consumed:
                return False
            if not self.unify(ca.ty, cb.ty, ren_a2, ren_b2, depth + 1):
                return False
            self._bind_comp_names(ca.name, cb.name, ren_a2, ren_b2)
        pa = bar_a if bar_a is not None else TEmpty()
        pb = bar_b if bar_b is not None else TEmpty()
        if not self.unify_perms(pa, pb, ren_a2, ren_b2, depth):
            return False
        return self.unify(a.codomain, b.codomain, ren_a2, ren_b2, depth + 1)

    def unify_perms(
        self, a: Type, b: Type, ren_a: dict[str, str], ren_b: dict[str, str], depth: int = 0
    ) -> bool:
        """Multiset unification of two permissions. Matches rigid atoms
        pairwise; a single unmatched metavariable on one side absorbs the
        other side's remainder (remaining metavariables default to empty)."""
        atoms_a = normalize(self.uni.resolve(_apply_ren(a, ren_a)))
        atoms_b = normalize(self.uni.resolve(_apply_ren(b, ren_b)))
        rigid_a = [x for x in atoms_a if not isinstance(x, MetaPerm)]
        metas_a = [x for x in atoms_a if isinstance(x, MetaPerm)]
        rigid_b = [x for x in atoms_b if not isinstance(x, MetaPerm)]
        metas_b = [x for x in atoms_b if isinstance(x, MetaPerm)]
        remaining = list(rigid_b)
        unmatched_a: list[Atom] = []
        for atom in rigid_a:
            for i, other in enumerate(remaining):
                if self._atoms_unifiable(atom, other, depth):
                    del remaining[i]
                    break
            else:
                unmatched_a.append(atom)
        if metas_a:
            first, *rest = metas_a
            if not self.uni.bind(first.name, atoms_to_type(remaining)):
                return False
            remaining = []
            for m in rest:
                if not self.uni.bind(m.name, TEmpty()):
                    return False
        if unmatched_a:
            if metas_b:
                first, *rest = metas_b
                if not self.uni.bind(first.name, atoms_to_type(unmatched_a)):
                    return False
                unmatched_a = []
                for m in rest:
                    if not self.uni.bind(m.name, TEmpty()):
                        return False
            else:
                return False
        for m in metas_b:
            if m.name not in self.uni.bindings:
                if not self.uni.bind(m.name, TEmpty()):
                    return False
        return not remaining and not unmatched_a

    def _atoms_unifiable(self, a: Atom, b: Atom, depth: int) -> bool:
        snap = self.uni.snapshot()
        ok = False
        if isinstance(a, Anchored) and isinstance(b, Anchored):
            ok = a.anchor == b.anchor and self.unify(a.ty, b.ty, None, None, depth + 1)
        elif isinstance(a, PermVar) and isinstance(b, PermVar):
            ok = a.name == b.name
        if not ok:
            self.uni.restore(snap)
        return ok

    # ------------------------------------------------------------------
    # opening packed atoms
    # ------------------------------------------------------------------

    def open_atom(self, penv: PermEnv, idx: int) -> PermEnv | None:
        """Expose one more layer of the atom at `idx`: expand an alias, open
        an existential (skolemizing its binders), split off a bar permission,
        or decompose a tuple type into a structural tuple plus components.
        Returns None when the atom is already in head form."""
        atom = penv.atoms[idx]
        if not isinstance(atom, Anchored):
            return None
        ty = self.uni.resolve(atom.ty)
        if is_alias(self.env, ty):
            return penv.replace_index(idx, Anchored(atom.anchor, expand_alias(self.env, ty)))
        if isinstance(ty, TExists):
            subst: dict[str, Type] = {}
            for name, kind in ty.binders:
                subst[name] = TVar(fresh_name(name))
            return penv.replace_index(idx, Anchored(atom.anchor, subst_type(ty.body, subst)))
        if isinstance(ty, TBar):
            out = [Anchored(atom.anchor, ty.carrier)] + normalize(ty.perm)
            return penv.replace_index(idx, *out)
        if isinstance(ty, TTuple) and not _is_structural_tuple(ty):
            # If a structural view of the same tuple is already around, pin the
            # released component permissions to its component names.
            pinned: list[str] | None = None
            for _, other in penv.atoms_of(atom.anchor):
                oty = self.uni.resolve(other.ty)
                if (
                    isinstance(oty, TTuple)
                    and _is_structural_tuple(oty)
                    and len(oty.comps) == len(ty.comps)
                ):
                    pinned = [c.ty.name for c in oty.comps]  # type: ignore[union-attr]
                    break
            comps: list[TupleComp] = []
            extra: list[Atom] = []
            values: dict[str, str] = {}
            for i, comp in enumerate(ty.comps):
                cty = subst_type(comp.ty, {}, values)
                if isinstance(cty, TSingleton):
                    anchor = cty.name
                elif pinned is not None:
                    anchor = pinned[i]
                    extra.extend(admit_atoms(anchor, cty))
                else:
                    anchor = fresh_name(comp.name or "c")
                    extra.extend(admit_atoms(anchor, cty))
                if comp.name is not None:
                    values[comp.name] = anchor
                comps.append(TupleComp(None, TSingleton(anchor), False))
            structural = Anchored(atom.anchor, TTuple(tuple(comps)))
            return penv.replace_index(idx, structural, *extra)
        return None

    def head_atom(self, penv: PermEnv, anchor: str, want) -> tuple[PermEnv, int] | None:
        """Find (opening as needed) an atom for `anchor` whose type satisfies
        the predicate `want`."""
        for _ in range(_MAX_DEPTH):
            hits = penv.atoms_of(anchor)
            for idx, atom in hits:
                if want(self.uni.resolve(atom.ty)):
                    return penv, idx
            progressed = False
            for idx, atom in hits:
                opened = self.open_atom(penv, idx)
                if opened is not None:
                    penv = opened
                    progressed = True
                    break
            if not progressed:
                return None
        return None

    # ------------------------------------------------------------------
    # subsumption
    # ------------------------------------------------------------------

    def subsume(
        self, penv: PermEnv, goals: list[Atom], defer: list[Atom] | None = None
    ) -> PermEnv:
        pending: list[Atom] = list(goals)
        failed: list[tuple[Atom, SubsumptionFailure]] = []
        for goal in pending:
            snap = self.uni.snapshot()
            try:
                penv = self.subsume_atom(penv, goal, defer=defer)
            except SubsumptionFailure as exc:
                self.uni.restore(snap)
                failed.append((goal, exc))
        still: list[tuple[Atom, SubsumptionFailure]] = []
        for goal, first_exc in failed:
            snap = self.uni.snapshot()
            try:
                penv = self.subsume_atom(penv, goal, defer=defer)
            except SubsumptionFailure:
                self.uni.restore(snap)
                still.append((goal, first_exc))
        if still:
            raise still[0][1]
        return penv

    def subsume_perm(self, penv: PermEnv, perm: Type) -> PermEnv:
        return self.subsume(penv, normalize(self.uni.resolve(perm)))

    def subsume_atom(
        self, penv: PermEnv, goal: Atom, depth: int = 0, defer: list[Atom] | None = None
    ) -> PermEnv:
        if depth > _MAX_DEPTH:
            raise SubsumptionFailure(goal, penv, "search depth exceeded")
        if isinstance(goal, MetaPerm):
            bound = self.uni.bindings.get(goal.name)
            if bound is None:
                if defer is not None:
                    # A later component's unification may still solve this
                    # metavariable; postpone it.
                    defer.append(goal)
                    return penv
                # Unconstrained permission metavariable defaults to empty.
                self.uni.bind(goal.name, TEmpty())
                return penv
            return self.subsume(penv, normalize(self.uni.resolve(bound)))
        if isinstance(goal, PermVar):
            for i, atom in enumerate(penv.atoms):
                if isinstance(atom, PermVar) and atom.name == goal.name:
                    return penv.remove_index(i)
            raise SubsumptionFailure(goal, penv)
        assert isinstance(goal, Anchored)
        ty = self.uni.resolve(goal.ty)
        ty = _strip_empty_bar(ty)
        if isinstance(ty, TMeta):
            hits = penv.atoms_of(goal.anchor)
            if not hits:
                raise SubsumptionFailure(goal, penv)
            idx, atom = hits[0]
            if not self.uni.bind(ty.name, atom.ty):
                raise SubsumptionFailure(goal, penv)
            return self._extract(penv, idx)
        if isinstance(ty, TBar):
            penv = self.subsume_atom(
                penv, Anchored(goal.anchor, ty.carrier), depth + 1, defer=defer
            )
            return self.subsume(penv, normalize(self.uni.resolve(ty.perm)), defer=defer)
        if isinstance(ty, TExists):
            subst: dict[str, Type] = {}
            for name, kind in ty.binders:
                subst[name] = self.uni.fresh(name, kind)
            return self.subsume_atom(
                penv, Anchored(goal.anchor, subst_type(ty.body, subst)), depth + 1, defer=defer
            )
        if isinstance(ty, TEmpty):
            return penv
        if isinstance(ty, TSingleton):
            if ty.name == goal.anchor:
                return penv
            found = self._find_exact(penv, goal.anchor, ty, depth)
            if found is not None:
                return found
            raise SubsumptionFailure(goal, penv)
        if isinstance(ty, TTuple):
            return self._subsume_tuple(penv, goal.anchor, ty, depth)
        if isinstance(ty, TConcrete):
            return self._subsume_concrete(penv, goal.anchor, ty, depth)

        hits = penv.atoms_of(goal.anchor)
        # exact match first
        for idx, atom in hits:
            snap = self.uni.snapshot()
            if self.unify(ty, atom.ty, None, None, depth + 1):
                return self._extract(penv, idx)
            self.uni.restore(snap)
        gty = penv.global_type(goal.anchor)
        if gty is not None:
            snap = self.uni.snapshot()
            if self.unify(ty, gty, None, None, depth + 1):
                return penv  # global permissions are duplicable
            self.uni.restore(snap)
        # alias expansion of the goal
        if is_alias(self.env, ty):
            return self.subsume_atom(
                penv, Anchored(goal.anchor, expand_alias(self.env, ty)), depth + 1
            )
        # opening packed environment atoms (aliases, existentials, bars)
        for idx, _ in hits:
            opened = self.open_atom(penv, idx)
            if opened is not None:
                return self.subsume_atom(opened, goal, depth + 1)
        # fold a structural permission to the nominal goal
        if isinstance(ty, TApp) and isinstance(self.env.types.get(ty.head), DataInfo):
            info = self.env.types[ty.head]
            for idx, atom in hits:
                sty = atom.ty
                if isinstance(sty, TConcrete) and sty.tag in info.branches:
                    folded = self._fold_at(penv, idx, sty, ty, depth)
                    if folded is not None:
                        return folded
        # split a nominal permission along a structural one
        split = self._try_split(penv, goal.anchor)
        if split is not None:
            return self.subsume_atom(split, goal, depth + 1)
        raise SubsumptionFailure(goal, penv)

    def _find_exact(self, penv: PermEnv, anchor: str, ty: Type, depth: int) -> PermEnv | None:
        for idx, atom in penv.atoms_of(anchor):
            snap = self.uni.snapshot()
            if self.unify(ty, atom.ty, None, None, depth + 1):
                return self._extract(penv, idx)
            self.uni.restore(snap)
        gty = penv.global_type(anchor)
        if gty is not None:
            snap = self.uni.snapshot()
            if self.unify(ty, gty, None, None, depth + 1):
                return penv  # global permissions are duplicable
            self.uni.restore(snap)
        return None

    def _extract(self, penv: PermEnv, idx: int) -> PermEnv:
        atom = penv.atoms[idx]
        if isinstance(atom, Anchored) and duplicability(
            self.uni.resolve(atom.ty), self.env
        ) == DUPLICABLE:
            return penv
        return penv.remove_index(idx)

    def _open_any(self, penv: PermEnv, anchor: str) -> PermEnv | None:
        for idx, _ in penv.atoms_of(anchor):
            opened = self.open_atom(penv, idx)
            if opened is not None:
                return opened
        return None

    def _subsume_tuple(self, penv: PermEnv, anchor: str, ty: TTuple, depth: int) -> PermEnv:
        found = self.head_atom(
            penv, anchor, lambda t: isinstance(t, TTuple) and _is_structural_tuple(t)
        )
        if found is None:
            raise SubsumptionFailure(Anchored(anchor, ty), penv)
        penv, idx = found
        atom = penv.atoms[idx]
        actual = atom.ty
        assert isinstance(actual, TTuple)
        if len(actual.comps) != len(ty.comps):
            raise SubsumptionFailure(Anchored(anchor, ty), penv)
        values: dict[str, str] = {}
        working = self._extract(penv, idx)
        for comp, actual_comp in zip(ty.comps, actual.comps):
            target = actual_comp.ty
            assert isinstance(target, TSingleton)
            comp_ty = subst_type(self.uni.resolve(comp.ty), {}, values)
            working = self.subsume_atom(working, Anchored(target.name, comp_ty), depth + 1)
            if comp.name is not None:
                values[comp.name] = target.name
        return working

    def _subsume_concrete(self, penv: PermEnv, anchor: str, ty: TConcrete, depth: int) -> PermEnv:
        found = self.head_atom(
            penv, anchor, lambda t: isinstance(t, TConcrete) and t.tag == ty.tag
        )
        if found is None:
            raise SubsumptionFailure(Anchored(anchor, ty), penv)
        penv, idx = found
        atom = penv.atoms[idx]
        actual = atom.ty
        assert isinstance(actual, TConcrete)
        working = self._extract(penv, idx)
        values: dict[str, str] = {}
        for (fname, fty), (aname, aty) in zip(ty.fields, actual.fields):
            if fname != aname:
                raise SubsumptionFailure(Anchored(anchor, ty), penv)
            goal_field = subst_type(self.uni.resolve(fty), {}, values)
            if not isinstance(aty, TSingleton):
                # The structural permission owns this field's content
                # directly; the types must agree.
                if not self.unify(goal_field, aty):
                    raise SubsumptionFailure(Anchored(anchor, ty), penv)
                continue
            if isinstance(goal_field, TSingleton):
                if goal_field.name != aty.name and not self.unify(goal_field, aty):
                    raise SubsumptionFailure(Anchored(anchor, ty), penv)
            else:
                working = self.subsume_atom(
                    working, Anchored(aty.name, goal_field), depth + 1
                )
        if ty.bar is not None:
            working = self.subsume(working, normalize(self.uni.resolve(ty.bar)))
        return working

    def _fold_at(
        self, penv: PermEnv, idx: int, structural: TConcrete, ty: TApp, depth: int
    ) -> PermEnv | None:
        """Fold the structural atom at `idx` into the nominal goal `ty`."""
        info = self.env.types[ty.head]
        assert isinstance(info, DataInfo)
        branch = info.branches[structural.tag]
        subst = dict(zip((n for n, _ in info.params), ty.args))
        snap = self.uni.snapshot()
        try:
            working = self._extract(penv, idx)
            for (fname, declared), (aname, actual) in zip(branch.fields, structural.fields):
                if not isinstance(actual, TSingleton):
                    raise SubsumptionFailure(Anchored(structural.tag, ty), penv)
                goal_field = subst_type(declared, subst)
                working = self.subsume_atom(
                    working, Anchored(actual.name, goal_field), depth + 1
                )
            if branch.bar is not None:
                working = self.subsume_perm(working, subst_type(branch.bar, subst))
            return working
        except SubsumptionFailure:
            self.uni.restore(snap)
            return None

    def _try_split(self, penv: PermEnv, wanted_anchor: str) -> PermEnv | None:
        """Split `y @ D args` along a structural `y @ Tag{.. f = wanted ..}`,
        releasing one permission per singleton field. Also splits a raw tuple
        permission along a structural tuple naming the wanted anchor."""
        for sidx, satom in enumerate(penv.atoms):
            if not isinstance(satom, Anchored):
                continue
            sty = self.uni.resolve(satom.ty)
            if isinstance(sty, TTuple) and _is_structural_tuple(sty):
                if any(c.ty.name == wanted_anchor for c in sty.comps):  # type: ignore[union-attr]
                    for ridx, ratom in penv.atoms_of(satom.anchor):
                        rty = self.uni.resolve(ratom.ty)
                        if (
                            isinstance(rty, TTuple)
                            and not _is_structural_tuple(rty)
                            and len(rty.comps) == len(sty.comps)
                        ):
                            return self.open_atom(penv, ridx)
                continue
            if not isinstance(sty, TConcrete):
                continue
            if not any(
                isinstance(f, TSingleton) and f.name == wanted_anchor for _, f in sty.fields
            ):
                continue
            info_entry = self.env.tags.get(sty.tag)
            if info_entry is None:
                continue
            data_name, branch = info_entry
            info = self.env.types[data_name]
            assert isinstance(info, DataInfo)
            for nidx, natom in enumerate(penv.atoms):
                if nidx == sidx or not isinstance(natom, Anchored):
                    continue
                if natom.anchor != satom.anchor:
                    continue
                nty = self.uni.resolve(natom.ty)
                while is_alias(self.env, nty):
                    nty = expand_alias(self.env, nty)
                if not (isinstance(nty, TApp) and nty.head == data_name):
                    continue
                subst = dict(zip((n for n, _ in info.params), nty.args))
                new_atoms: list[Atom] = []
                for (fname, declared), (aname, actual) in zip(branch.fields, sty.fields):
                    if isinstance(actual, TSingleton):
                        new_atoms.extend(admit_atoms(actual.name, subst_type(declared, subst)))
                if branch.bar is not None:
                    new_atoms.extend(normalize(subst_type(branch.bar, subst)))
                return penv.remove_index(nidx).add(*new_atoms)
        return None


def _is_structural_tuple(t: TTuple) -> bool:
    return all(isinstance(c.ty, TSingleton) for c in t.comps)


def _strip_empty_bar(t: Type) -> Type:
    if isinstance(t, TBar) and isinstance(t.perm, TEmpty):
        return _strip_empty_bar(t.carrier)
    return t


def _apply_ren(t: Type, ren: dict[str, str]) -> Type:
    if not ren:
        return t
    subst = {name: TVar(tok) for name, tok in ren.items()}
    values = dict(ren)
    return subst_type(t, subst, values)
