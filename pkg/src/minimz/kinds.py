"""Name resolution and kind checking.

Runs after parsing and before permission checking. Rewrites the AST so
that nullary type-constructor references become `TApp(name, ())`, the
builtin `empty` becomes `TEmpty`, and every type is well-kinded. Value
anchors inside types (`x @ t`, `=x`, singleton fields) are checked
against the lexical value scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ast import (
    Branch,
    DAbstract,
    DAlias,
    DData,
    DValDef,
    DValSig,
    Decl,
    EAssign,
    EBool,
    ECall,
    EConstruct,
    EField,
    EIf,
    EInt,
    ELambda,
    ELet,
    EMatch,
    ETagUpdate,
    ETuple,
    EVar,
    Expr,
    KArrow,
    KIND_PERM,
    KIND_TYPE,
    Kind,
    PTag,
    PTuple,
    PVar,
    Pattern,
    SourceFile,
    Span,
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


class ResolveError(Exception):
    def __init__(self, code: str, message: str, span: Span):
        super().__init__(message)
        self.code = code
        self.message = message
        self.span = span


@dataclass
class DataInfo:
    name: str
    mutable: bool
    params: tuple[tuple[str, Kind], ...]
    branches: dict[str, Branch] = field(default_factory=dict)

    @property
    def kind(self) -> Kind:
        if not self.params:
            return KIND_TYPE
        return KArrow(tuple(k for _, k in self.params), KIND_TYPE)


@dataclass
class AliasInfo:
    name: str
    params: tuple[tuple[str, Kind], ...]
    body: Type | None = None

    @property
    def kind(self) -> Kind:
        result = KIND_TYPE if self.body is None else kind_tag(self.body)
        if not self.params:
            return result
        return KArrow(tuple(k for _, k in self.params), result)


@dataclass
class AbstractInfo:
    name: str
    params: tuple[tuple[str, Kind], ...]

    @property
    def kind(self) -> Kind:
        if not self.params:
            return KIND_TYPE
        return KArrow(tuple(k for _, k in self.params), KIND_TYPE)


@dataclass
class PrimInfo:
    """Builtin base type (int, bool)."""

    name: str

    params: tuple[tuple[str, Kind], ...] = ()

    @property
    def kind(self) -> Kind:
        return KIND_TYPE


TypeInfo = DataInfo | AliasInfo | AbstractInfo | PrimInfo


def kind_tag(t: Type) -> Kind:
    """Shallow syntactic kind of a resolved alias body (TYPE vs PERM)."""
    if isinstance(t, (TAt, TStar, TEmpty)):
        return KIND_PERM
    if isinstance(t, (TForall, TExists)):
        return kind_tag(t.body)
    return KIND_TYPE


@dataclass
class Env:
    """Resolution environment: type constructors, tags, and value signatures."""

    types: dict[str, TypeInfo] = field(default_factory=dict)
    tags: dict[str, tuple[str, Branch]] = field(default_factory=dict)
    sigs: dict[str, Type] = field(default_factory=dict)
    sig_order: list[str] = field(default_factory=list)

    def lookup_type(self, name: str, span: Span) -> TypeInfo:
        info = self.types.get(name)
        if info is None:
            raise ResolveError("E-UNBOUND", f"unbound type name {name!r}", span)
        return info

    def data_of_tag(self, tag: str, span: Span) -> tuple[str, Branch]:
        entry = self.tags.get(tag)
        if entry is None:
            raise ResolveError("E-MATCH", f"unknown data tag {tag!r}", span)
        return entry

    def clone(self) -> "Env":
        return Env(dict(self.types), dict(self.tags), dict(self.sigs), list(self.sig_order))


@dataclass
class Scope:
    """Lexical scopes used while resolving one declaration."""

    tyvars: dict[str, Kind] = field(default_factory=dict)
    values: set[str] = field(default_factory=set)

    def child(self) -> "Scope":
        return Scope(dict(self.tyvars), set(self.values))

    def bind_tyvar(self, name: str, kind: Kind, span: Span) -> None:
        old = self.tyvars.get(name)
        if old is not None and old != kind:
            raise ResolveError(
                "E-KIND", f"binder {name!r} shadows a binder of a different kind", span
            )
        self.tyvars[name] = kind


class Resolver:
    def __init__(self, env: Env | None = None):
        self.env = env if env is not None else Env()
        if "int" not in self.env.types:
            self.env.types["int"] = PrimInfo("int")
            self.env.types["bool"] = PrimInfo("bool")

    # -- declaration registration -------------------------------------------

    def register(self, decl: Decl) -> None:
        if isinstance(decl, (DData, DAlias, DAbstract)):
            if decl.name in self.env.types:
                raise ResolveError("E-KIND", f"duplicate type name {decl.name!r}", decl.span)
            if isinstance(decl, DData):
                info = DataInfo(decl.name, decl.mutable, decl.params)
                for branch in decl.branches:
                    if branch.tag in self.env.tags:
                        raise ResolveError(
                            "E-KIND", f"duplicate data tag {branch.tag!r}", branch.span
                        )
                    self.env.tags[branch.tag] = (decl.name, branch)
                    info.branches[branch.tag] = branch
                self.env.types[decl.name] = info
            elif isinstance(decl, DAlias):
                self.env.types[decl.name] = AliasInfo(decl.name, decl.params)
            else:
                self.env.types[decl.name] = AbstractInfo(decl.name, decl.params)

    def resolve_file(self, file: SourceFile) -> SourceFile:
        for decl in file.decls:
            self.register(decl)
        resolved: list[Decl] = []
        defs_seen: set[str] = set()
        for decl in file.decls:
            if isinstance(decl, DData):
                scope = Scope()
                for name, kind in decl.params:
                    scope.bind_tyvar(name, kind, decl.span)
                branches = []
                for branch in decl.branches:
                    fields = tuple(
                        (fname, self.check_kind(self.resolve_type(fty, scope), KIND_TYPE, scope))
                        for fname, fty in branch.fields
                    )
                    bar = None
                    if branch.bar is not None:
                        bar = self.check_kind(self.resolve_type(branch.bar, scope), KIND_PERM, scope)
                    branches.append(replace(branch, fields=fields, bar=bar))
                info = self.env.types[decl.name]
                assert isinstance(info, DataInfo)
                new_decl = replace(decl, branches=tuple(branches))
                for branch in branches:
                    info.branches[branch.tag] = branch
                    self.env.tags[branch.tag] = (decl.name, branch)
                resolved.append(new_decl)
            elif isinstance(decl, DAlias):
                scope = Scope()
                for name, kind in decl.params:
                    scope.bind_tyvar(name, kind, decl.span)
                body = self.resolve_type(decl.body, scope)
                info = self.env.types[decl.name]
                assert isinstance(info, AliasInfo)
                info.body = body
                resolved.append(replace(decl, body=body))
            elif isinstance(decl, DAbstract):
                resolved.append(decl)
            elif isinstance(decl, DValSig):
                if decl.name in self.env.sigs:
                    raise ResolveError(
                        "E-KIND", f"duplicate value signature {decl.name!r}", decl.span
                    )
                ty = self.check_kind(self.resolve_type(decl.ty, Scope()), KIND_TYPE, Scope())
                self.env.sigs[decl.name] = ty
                self.env.sig_order.append(decl.name)
                resolved.append(replace(decl, ty=ty))
            elif isinstance(decl, DValDef):
                sig = self.env.sigs.get(decl.name)
                if sig is None:
                    raise ResolveError(
                        "E-UNBOUND",
                        f"definition of {decl.name!r} has no preceding signature",
                        decl.span,
                    )
                if decl.name in defs_seen:
                    raise ResolveError(
                        "E-KIND", f"duplicate definition of {decl.name!r}", decl.span
                    )
                defs_seen.add(decl.name)
                resolved.append(self.resolve_def(decl, sig))
            else:
                resolved.append(decl)
        self.check_alias_cycles()
        return SourceFile(file.path, tuple(resolved))

    def check_alias_cycles(self) -> None:
        graph: dict[str, set[str]] = {}
        for name, info in self.env.types.items():
            if isinstance(info, AliasInfo) and info.body is not None:
                graph[name] = _alias_refs(info.body)
        state: dict[str, int] = {}

        def visit(name: str, path: list[str]) -> None:
            if state.get(name) == 2:
                return
            if state.get(name) == 1:
                cycle = " -> ".join(path + [name])
                raise ResolveError("E-KIND", f"cyclic alias: {cycle}", Span(0, 0))
            state[name] = 1
            for dep in graph.get(name, ()):
                if dep in graph:
                    visit(dep, path + [name])
            state[name] = 2

        for name in graph:
            visit(name, [])

    # -- types --------------------------------------------------------------

    def resolve_type(self, t: Type, scope: Scope) -> Type:
        if isinstance(t, TVar):
            if t.name in scope.tyvars:
                return t
            if t.name == "empty":
                return TEmpty(t.span)
            info = self.env.lookup_type(t.name, t.span)
            if info.params:
                raise ResolveError(
                    "E-KIND",
                    f"type constructor {t.name!r} expects {len(info.params)} argument(s)",
                    t.span,
                )
            return TApp(t.name, (), t.span)
        if isinstance(t, TApp):
            if t.head in scope.tyvars:
                raise ResolveError(
                    "E-KIND", f"type variable {t.head!r} cannot take arguments", t.span
                )
            info = self.env.lookup_type(t.head, t.span)
            if len(info.params) != len(t.args):
                raise ResolveError(
                    "E-KIND",
                    f"type constructor {t.head!r} expects {len(info.params)} argument(s), "
                    f"got {len(t.args)}",
                    t.span,
                )
            args = []
            for (pname, pkind), arg in zip(info.params, t.args):
                args.append(self.check_kind(self.resolve_type(arg, scope), pkind, scope))
            return replace(t, args=tuple(args))
        if isinstance(t, TArrow):
            dom, scope2 = self.resolve_domain(t.domain, scope)
            cod = self.check_kind(self.resolve_type(t.codomain, scope2), KIND_TYPE, scope2)
            return replace(t, domain=dom, codomain=cod)
        if isinstance(t, TTuple):
            resolved, _ = self.resolve_domain(t, scope)
            return resolved
        if isinstance(t, TBar):
            resolved, _ = self.resolve_domain(t, scope)
            return resolved
        if isinstance(t, TConcrete):
            _, branch = self.env.data_of_tag(t.tag, t.span)
            declared = [f for f, _ in branch.fields]
            actual = [f for f, _ in t.fields]
            if declared != actual:
                raise ResolveError(
                    "E-MATCH",
                    f"fields of {t.tag!r} must be exactly {declared}, got {actual}",
                    t.span,
                )
            fields = tuple((fname, self.resolve_type(fty, scope)) for fname, fty in t.fields)
            bar = None
            if t.bar is not None:
                bar = self.check_kind(self.resolve_type(t.bar, scope), KIND_PERM, scope)
            return replace(t, fields=fields, bar=bar)
        if isinstance(t, TSingleton):
            if t.name not in scope.values:
                raise ResolveError("E-UNBOUND", f"unbound value name {t.name!r}", t.span)
            return t
        if isinstance(t, (TForall, TExists)):
            scope2 = scope.child()
            for name, kind in t.binders:
                scope2.bind_tyvar(name, kind, t.span)
            body = self.resolve_type(t.body, scope2)
            return replace(t, body=body)
        if isinstance(t, TAt):
            if t.anchor not in scope.values:
                raise ResolveError("E-UNBOUND", f"unbound value name {t.anchor!r}", t.span)
            ty = self.check_kind(self.resolve_type(t.ty, scope), KIND_TYPE, scope)
            return replace(t, ty=ty)
        if isinstance(t, TStar):
            items = tuple(
                self.check_kind(self.resolve_type(i, scope), KIND_PERM, scope) for i in t.items
            )
            return replace(t, items=items)
        if isinstance(t, (TEmpty, TMeta)):
            return t
        raise TypeError(f"unknown type node {t!r}")

    def resolve_domain(self, t: Type, scope: Scope) -> tuple[Type, Scope]:
        """Resolve a tuple/bar type, binding component names left to right.

        Returns the resolved type and the scope extended with component names
        (used by arrow codomains).
        """
        if isinstance(t, TBar):
            carrier, scope2 = self.resolve_domain(t.carrier, scope)
            perm = self.check_kind(self.resolve_type(t.perm, scope2), KIND_PERM, scope2)
            return replace(t, carrier=carrier, perm=perm), scope2
        if isinstance(t, TTuple):
            scope2 = scope.child()
            comps = []
            for comp in t.comps:
                ty = self.check_kind(self.resolve_type(comp.ty, scope2), KIND_TYPE, scope2)
                if comp.name is not None:
                    scope2.values.add(comp.name)
                comps.append(TupleComp(comp.name, ty, comp.consumed))
            return replace(t, comps=tuple(comps)), scope2
        return self.check_kind(self.resolve_type(t, scope), KIND_TYPE, scope), scope

    def check_kind(self, t: Type, expected: Kind, scope: Scope) -> Type:
        actual = self.kind_of(t, scope)
        if actual != expected:
            raise ResolveError(
                "E-KIND",
                f"expected kind {expected}, found {actual} for {_describe(t)}",
                getattr(t, "span", Span(0, 0)),
            )
        return t

    def kind_of(self, t: Type, scope: Scope) -> Kind:
        if isinstance(t, TVar):
            return scope.tyvars.get(t.name, KIND_TYPE)
        if isinstance(t, TMeta):
            return t.kind
        if isinstance(t, (TAt, TStar, TEmpty)):
            return KIND_PERM
        if isinstance(t, TApp):
            info = self.env.types.get(t.head)
            if isinstance(info, AliasInfo):
                if info.body is None:
                    raise ResolveError(
                        "E-KIND",
                        f"alias {t.head!r} used before its definition",
                        getattr(t, "span", Span(0, 0)),
                    )
                kind = info.kind
                return kind.result if isinstance(kind, KArrow) else kind
            return KIND_TYPE
        if isinstance(t, (TForall, TExists)):
            scope2 = scope.child()
            for name, kind in t.binders:
                scope2.tyvars[name] = kind
            return self.kind_of(t.body, scope2)
        return KIND_TYPE

    # -- expressions ----------------------------------------------------------

    def resolve_def(self, decl: DValDef, sig: Type) -> DValDef:
        scope = Scope()
        sig_body = sig
        while isinstance(sig_body, TForall):
            for name, kind in sig_body.binders:
                scope.bind_tyvar(name, kind, decl.span)
            sig_body = sig_body.body
        if not isinstance(sig_body, TArrow):
            raise ResolveError(
                "E-KIND", f"signature of {decl.name!r} is not a function type", decl.span
            )
        comps = domain_comps(sig_body.domain)
        if len(comps) != len(decl.params):
            raise ResolveError(
                "E-ARITY",
                f"{decl.name!r} signature expects {len(comps)} parameter(s), "
                f"definition has {len(decl.params)}",
                decl.span,
            )
        scope.values.update(self.env.sigs.keys())
        scope.values.update(decl.params)
        body = self.resolve_expr(decl.body, scope)
        return replace(decl, body=body)

    def resolve_expr(self, e: Expr, scope: Scope) -> Expr:
        if isinstance(e, EVar):
            if e.name not in scope.values:
                raise ResolveError("E-UNBOUND", f"unbound value name {e.name!r}", e.span)
            return e
        if isinstance(e, (EInt, EBool)):
            return e
        if isinstance(e, ELet):
            bound = self.resolve_expr(e.bound, scope)
            scope2 = scope.child()
            self.bind_pattern(e.pattern, scope2)
            body = self.resolve_expr(e.body, scope2)
            return replace(e, bound=bound, body=body)
        if isinstance(e, ECall):
            callee = self.resolve_expr(e.callee, scope)
            arg = self.resolve_expr(e.arg, scope)
            targs = e.type_args
            if targs is not None:
                targs = tuple(self.resolve_type(t, scope) for t in targs)
            return replace(e, callee=callee, arg=arg, type_args=targs)
        if isinstance(e, EMatch):
            scrutinee = self.resolve_expr(e.scrutinee, scope)
            branches = []
            seen_tags: set[str] = set()
            for pat, body in e.branches:
                assert isinstance(pat, PTag)
                data_name, branch = self.env.data_of_tag(pat.tag, pat.span)
                if pat.tag in seen_tags:
                    raise ResolveError("E-MATCH", f"duplicate branch {pat.tag!r}", pat.span)
                seen_tags.add(pat.tag)
                declared = [f for f, _ in branch.fields]
                actual = [f for f, _ in pat.fields]
                if declared != actual:
                    raise ResolveError(
                        "E-MATCH",
                        f"pattern for {pat.tag!r} must bind exactly {declared}, got {actual}",
                        pat.span,
                    )
                scope2 = scope.child()
                self.bind_pattern(pat, scope2)
                branches.append((pat, self.resolve_expr(body, scope2)))
            return replace(e, scrutinee=scrutinee, branches=tuple(branches))
        if isinstance(e, EIf):
            return replace(
                e,
                cond=self.resolve_expr(e.cond, scope),
                then=self.resolve_expr(e.then, scope),
                otherwise=self.resolve_expr(e.otherwise, scope),
            )
        if isinstance(e, EField):
            return replace(e, obj=self.resolve_expr(e.obj, scope))
        if isinstance(e, EAssign):
            return replace(
                e, obj=self.resolve_expr(e.obj, scope), value=self.resolve_expr(e.value, scope)
            )
        if isinstance(e, ETagUpdate):
            self.env.data_of_tag(e.tag, e.span)
            return replace(
                e,
                obj=self.resolve_expr(e.obj, scope),
                fields=tuple((n, self.resolve_expr(v, scope)) for n, v in e.fields),
            )
        if isinstance(e, EConstruct):
            _, branch = self.env.data_of_tag(e.tag, e.span)
            declared = [f for f, _ in branch.fields]
            actual = [f for f, _ in e.fields]
            if declared != actual:
                raise ResolveError(
                    "E-MATCH",
                    f"construction of {e.tag!r} must set exactly {declared}, got {actual}",
                    e.span,
                )
            return replace(
                e, fields=tuple((n, self.resolve_expr(v, scope)) for n, v in e.fields)
            )
        if isinstance(e, ETuple):
            return replace(e, items=tuple(self.resolve_expr(i, scope) for i in e.items))
        if isinstance(e, ELambda):
            domain, scope2 = self.resolve_domain(e.domain, scope)
            codomain = e.codomain
            if codomain is not None:
                codomain = self.check_kind(self.resolve_type(codomain, scope2), KIND_TYPE, scope2)
            body = self.resolve_expr(e.body, scope2)
            return replace(e, domain=domain, codomain=codomain, body=body)
        raise TypeError(f"unknown expression {e!r}")

    def bind_pattern(self, p: Pattern, scope: Scope, seen: set[str] | None = None) -> None:
        if seen is None:
            seen = set()
        if isinstance(p, PVar):
            if p.name in seen:
                raise ResolveError(
                    "E-MATCH", f"pattern binds {p.name!r} more than once", p.span
                )
            seen.add(p.name)
            scope.values.add(p.name)
        elif isinstance(p, PTuple):
            for item in p.items:
                self.bind_pattern(item, scope, seen)
        elif isinstance(p, PTag):
            for _, sub in p.fields:
                self.bind_pattern(sub, scope, seen)


def _alias_refs(t: Type) -> set[str]:
    refs: set[str] = set()

    def walk(u: Type) -> None:
        if isinstance(u, TApp):
            refs.add(u.head)
            for a in u.args:
                walk(a)
        elif isinstance(u, TArrow):
            walk(u.domain)
            walk(u.codomain)
        elif isinstance(u, TTuple):
            for c in u.comps:
                walk(c.ty)
        elif isinstance(u, TBar):
            walk(u.carrier)
            walk(u.perm)
        elif isinstance(u, TConcrete):
            for _, f in u.fields:
                walk(f)
            if u.bar is not None:
                walk(u.bar)
        elif isinstance(u, (TForall, TExists)):
            walk(u.body)
        elif isinstance(u, TAt):
            walk(u.ty)
        elif isinstance(u, TStar):
            for i in u.items:
                walk(i)

    walk(t)
    return refs


def _describe(t: Type) -> str:
    from .printer import print_type

    return print_type(t)


def domain_comps(domain: Type) -> tuple[TupleComp, ...]:
    """The component list of an arrow domain."""
    if isinstance(domain, TBar):
        return domain_comps(domain.carrier)
    if isinstance(domain, TTuple):
        return domain.comps
    return (TupleComp(None, domain, False),)


def domain_bar(domain: Type) -> tuple[Type | None, bool]:
    """The permission side of an arrow domain and whether it is consumed."""
    if isinstance(domain, TBar):
        return domain.perm, domain.consumed
    return None, False


def resolve(file: SourceFile, base: Env | None = None) -> tuple[SourceFile, Env]:
    """Resolve and kind-check a source file on top of an optional base env."""
    resolver = Resolver(base)
    resolved = resolver.resolve_file(file)
    return resolved, resolver.env
