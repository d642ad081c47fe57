"""Recursive-descent parser producing a span-annotated AST.

Precedence inside a type, loosest to tightest: quantifiers, `->`, `*`,
`@`, application. Inside parentheses the bar `|` binds looser than the
component commas, so `(a, b | p)` is a two-component tuple carrying
permission `p`.
"""

from __future__ import annotations

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
    TForall,
    TExists,
    TSingleton,
    TStar,
    TTuple,
    TVar,
    Type,
    TupleComp,
)
from .lexer import Token, tokenize


class ParseError(Exception):
    def __init__(self, message: str, span: Span, expected: tuple[str, ...] = ()):
        super().__init__(message)
        self.message = message
        self.span = span
        self.expected = expected


# Tokens that may begin an expression atom (application arguments).
_EXPR_ATOM_START = ("INT", "LIDENT", "UIDENT")


class Parser:
    def __init__(self, tokens: list[Token], path: str = "<input>"):
        self.tokens = tokens
        self.pos = 0
        self.path = path

    # -- token plumbing ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, message: str, expected: tuple[str, ...] = ()) -> ParseError:
        tok = self.peek()
        what = f"{tok.kind} {tok.text!r}" if tok.kind != "EOF" else "end of input"
        return ParseError(f"{message}, found {what}", tok.span, expected)

    def expect_op(self, op: str) -> Token:
        tok = self.peek()
        if not tok.is_op(op):
            raise self.error(f"expected {op!r}", (op,))
        return self.next()

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if not tok.is_kw(word):
            raise self.error(f"expected keyword {word!r}", (word,))
        return self.next()

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise self.error(f"expected {kind}", (kind,))
        return self.next()

    # -- declarations ------------------------------------------------------

    def parse_file(self) -> SourceFile:
        decls: list[Decl] = []
        while self.peek().kind != "EOF":
            decls.append(self.parse_decl())
        return SourceFile(self.path, tuple(decls))

    def parse_decl(self) -> Decl:
        tok = self.peek()
        if tok.is_kw("data"):
            return self.parse_data()
        if tok.is_kw("alias"):
            return self.parse_alias()
        if tok.is_kw("abstract"):
            return self.parse_abstract()
        if tok.is_kw("val"):
            return self.parse_val()
        raise self.error("expected a declaration", ("data", "alias", "abstract", "val"))

    def parse_type_params(self) -> tuple[tuple[str, Kind], ...]:
        params: list[tuple[str, Kind]] = []
        while True:
            tok = self.peek()
            if tok.kind == "LIDENT":
                self.next()
                params.append((tok.text, KIND_TYPE))
            elif tok.is_op("(") and self.peek(1).kind == "LIDENT" and self.peek(2).is_op(":"):
                self.next()
                name = self.expect("LIDENT").text
                self.expect_op(":")
                self.expect_kw("perm")
                self.expect_op(")")
                params.append((name, KIND_PERM))
            else:
                break
        return tuple(params)

    def parse_data(self) -> DData:
        start = self.expect_kw("data")
        mutable = False
        if self.peek().is_kw("mutable"):
            self.next()
            mutable = True
        name = self.expect("LIDENT")
        params = self.parse_type_params()
        self.expect_op("=")
        branches = [self.parse_branch()]
        while self.peek().is_op("|"):
            self.next()
            branches.append(self.parse_branch())
        span = start.span.merge(branches[-1].span)
        return DData(name.text, mutable, params, tuple(branches), span)

    def parse_branch(self) -> Branch:
        tag = self.expect("UIDENT")
        fields: list[tuple[str, Type]] = []
        bar: Type | None = None
        span = tag.span
        if self.peek().is_op("{"):
            self.next()
            while self.peek().kind == "LIDENT":
                fname = self.next().text
                self.expect_op(":")
                fty = self.parse_type()
                fields.append((fname, fty))
                if self.peek().is_op(";"):
                    self.next()
                else:
                    break
            if self.peek().is_op("|"):
                self.next()
                bar = self.parse_type()
            close = self.expect_op("}")
            span = tag.span.merge(close.span)
        return Branch(tag.text, tuple(fields), bar, span)

    def parse_alias(self) -> DAlias:
        start = self.expect_kw("alias")
        name = self.expect("LIDENT")
        params = self.parse_type_params()
        self.expect_op("=")
        body = self.parse_type()
        return DAlias(name.text, params, body, start.span.merge(_type_span(body)))

    def parse_abstract(self) -> DAbstract:
        start = self.expect_kw("abstract")
        name = self.expect("LIDENT")
        params = self.parse_type_params()
        return DAbstract(name.text, params, start.span.merge(name.span))

    def parse_val(self) -> Decl:
        start = self.expect_kw("val")
        name = self.expect("LIDENT")
        if self.peek().is_op(":"):
            self.next()
            ty = self.parse_type()
            return DValSig(name.text, ty, start.span.merge(_type_span(ty)))
        if self.peek().is_op("("):
            self.next()
            params: list[str] = []
            if not self.peek().is_op(")"):
                params.append(self.expect("LIDENT").text)
                while self.peek().is_op(","):
                    self.next()
                    params.append(self.expect("LIDENT").text)
            self.expect_op(")")
            self.expect_op("=")
            body = self.parse_expr()
            return DValDef(name.text, tuple(params), body, start.span.merge(_expr_span(body)))
        raise self.error("expected ':' (signature) or '(' (definition) after val name", (":", "("))

    # -- types -------------------------------------------------------------

    def parse_type(self) -> Type:
        tok = self.peek()
        if tok.is_op("[") or (tok.is_op("{") and self._brace_starts_binders()):
            return self.parse_quantified()
        return self.parse_arrow()

    def _brace_starts_binders(self) -> bool:
        # `{a, b: perm}` quantifier vs nothing else: `{` never begins a type
        # atom (concrete types follow a tag), so a brace here is binders.
        return True

    def parse_quantified(self) -> Type:
        tok = self.peek()
        if tok.is_op("["):
            open_tok = self.next()
            binders = self.parse_binders()
            self.expect_op("]")
            body = self.parse_type()
            return TForall(binders, body, open_tok.span.merge(_type_span(body)))
        if tok.is_op("{"):
            open_tok = self.next()
            binders = self.parse_binders()
            self.expect_op("}")
            body = self.parse_type()
            return TExists(binders, body, open_tok.span.merge(_type_span(body)))
        return self.parse_arrow()

    def parse_binders(self) -> tuple[tuple[str, Kind], ...]:
        binders: list[tuple[str, Kind]] = []
        while True:
            name = self.expect("LIDENT")
            kind: Kind = KIND_TYPE
            if self.peek().is_op(":"):
                self.next()
                self.expect_kw("perm")
                kind = KIND_PERM
            binders.append((name.text, kind))
            if self.peek().is_op(","):
                self.next()
            else:
                break
        return tuple(binders)

    def parse_arrow(self) -> Type:
        left = self.parse_star()
        if self.peek().is_op("->"):
            self.next()
            right = self.parse_type()
            return TArrow(left, right, _type_span(left).merge(_type_span(right)))
        return left

    def parse_star(self) -> Type:
        first = self.parse_at()
        if not self.peek().is_op("*"):
            return first
        items = [first]
        while self.peek().is_op("*"):
            self.next()
            items.append(self.parse_at())
        return TStar(tuple(items), _type_span(items[0]).merge(_type_span(items[-1])))

    def parse_at(self) -> Type:
        left = self.parse_app()
        if self.peek().is_op("@"):
            at = self.next()
            if not isinstance(left, TVar):
                raise ParseError("left side of '@' must be a value name", at.span)
            right = self.parse_app()
            return TAt(left.name, right, _type_span(left).merge(_type_span(right)))
        return left

    def parse_app(self) -> Type:
        head = self.parse_type_atom()
        if isinstance(head, TVar):
            args: list[Type] = []
            while self._starts_type_atom():
                args.append(self.parse_type_atom())
            if args:
                return TApp(head.name, tuple(args), _type_span(head).merge(_type_span(args[-1])))
        return head

    def _starts_type_atom(self) -> bool:
        tok = self.peek()
        return tok.kind in ("LIDENT", "UIDENT") or tok.is_op("(")

    def parse_type_atom(self) -> Type:
        tok = self.peek()
        if tok.kind == "LIDENT":
            self.next()
            return TVar(tok.text, tok.span)
        if tok.kind == "UIDENT":
            self.next()
            return self.parse_concrete_tail(tok)
        if tok.is_op("="):
            self.next()
            name = self.expect("LIDENT")
            return TSingleton(name.text, tok.span.merge(name.span))
        if tok.is_op("("):
            return self.parse_paren_type()
        raise self.error("expected a type")

    def parse_concrete_tail(self, tag: Token) -> TConcrete:
        fields: list[tuple[str, Type]] = []
        bar: Type | None = None
        span = tag.span
        if self.peek().is_op("{"):
            self.next()
            while self.peek().kind == "LIDENT":
                fname = self.next().text
                if self.peek().is_op("="):
                    self.next()
                    val = self.expect("LIDENT")
                    fields.append((fname, TSingleton(val.text, val.span)))
                else:
                    self.expect_op(":")
                    fields.append((fname, self.parse_type()))
                if self.peek().is_op(";"):
                    self.next()
                else:
                    break
            if self.peek().is_op("|"):
                self.next()
                bar = self.parse_type()
            close = self.expect_op("}")
            span = tag.span.merge(close.span)
        return TConcrete(tag.text, tuple(fields), bar, span)

    def parse_paren_type(self) -> Type:
        open_tok = self.expect_op("(")
        comps: list[TupleComp] = []
        named_or_consumed = False
        while not self.peek().is_op(")") and not self.peek().is_op("|"):
            consumed = False
            if self.peek().is_kw("consumes"):
                self.next()
                consumed = True
                named_or_consumed = True
            name: str | None = None
            if self.peek().kind == "LIDENT" and self.peek(1).is_op(":"):
                name = self.next().text
                self.next()
                named_or_consumed = True
            ty = self.parse_type()
            comps.append(TupleComp(name, ty, consumed))
            if self.peek().is_op(","):
                self.next()
            else:
                break
        bar: Type | None = None
        bar_consumed = False
        if self.peek().is_op("|"):
            self.next()
            if self.peek().is_kw("consumes"):
                self.next()
                bar_consumed = True
            bar = self.parse_type()
        close = self.expect_op(")")
        span = open_tok.span.merge(close.span)
        plain = len(comps) == 1 and not named_or_consumed
        if bar is None:
            if plain:
                return comps[0].ty  # grouping parentheses
            return TTuple(tuple(comps), span)
        carrier: Type = comps[0].ty if plain else TTuple(tuple(comps), span)
        return TBar(carrier, bar, bar_consumed, span)

    # -- patterns ------------------------------------------------------------

    def parse_let_pattern(self) -> Pattern:
        tok = self.peek()
        if tok.kind == "LIDENT":
            self.next()
            return PVar(tok.text, tok.span)
        if tok.is_op("("):
            open_tok = self.next()
            items: list[Pattern] = []
            if not self.peek().is_op(")"):
                items.append(self.parse_let_pattern())
                while self.peek().is_op(","):
                    self.next()
                    items.append(self.parse_let_pattern())
            close = self.expect_op(")")
            if len(items) == 1:
                return items[0]
            return PTuple(tuple(items), open_tok.span.merge(close.span))
        raise self.error("expected a pattern")

    def parse_branch_pattern(self) -> Pattern:
        tag = self.expect("UIDENT")
        fields: list[tuple[str, Pattern]] = []
        span = tag.span
        if self.peek().is_op("{"):
            self.next()
            while self.peek().kind == "LIDENT":
                fname = self.next().text
                self.expect_op("=")
                fields.append((fname, self.parse_let_pattern()))
                if self.peek().is_op(";"):
                    self.next()
                else:
                    break
            close = self.expect_op("}")
            span = tag.span.merge(close.span)
        return PTag(tag.text, tuple(fields), span)

    # -- expressions ---------------------------------------------------------

    def parse_expr(self) -> Expr:
        tok = self.peek()
        if tok.is_kw("let"):
            start = self.next()
            pat = self.parse_let_pattern()
            self.expect_op("=")
            bound = self.parse_expr()
            self.expect_kw("in")
            body = self.parse_expr()
            return ELet(pat, bound, body, start.span.merge(_expr_span(body)))
        if tok.is_kw("fun"):
            return self.parse_lambda()
        if tok.is_kw("if"):
            start = self.next()
            cond = self.parse_expr()
            self.expect_kw("then")
            then = self.parse_expr()
            self.expect_kw("else")
            otherwise = self.parse_expr()
            return EIf(cond, then, otherwise, start.span.merge(_expr_span(otherwise)))
        if tok.is_kw("match"):
            return self.parse_match()
        return self.parse_seq()

    def parse_lambda(self) -> ELambda:
        start = self.expect_kw("fun")
        if not self.peek().is_op("("):
            raise self.error("expected '(' after fun", ("(",))
        domain = self.parse_paren_type()
        if not isinstance(domain, (TTuple, TBar)):
            domain = TTuple((TupleComp(None, domain, False),))
        codomain: Type | None = None
        if self.peek().is_op(":"):
            self.next()
            codomain = self.parse_type()
            self.expect_op("=")
        else:
            self.expect_op("->")
        body = self.parse_expr()
        return ELambda(domain, codomain, body, start.span.merge(_expr_span(body)))

    def parse_match(self) -> EMatch:
        start = self.expect_kw("match")
        scrutinee = self.parse_expr()
        self.expect_kw("with")
        if self.peek().is_op("|"):
            self.next()
        branches: list[tuple[Pattern, Expr]] = []
        while True:
            pat = self.parse_branch_pattern()
            self.expect_op("->")
            body = self.parse_expr()
            branches.append((pat, body))
            if self.peek().is_op("|"):
                self.next()
            else:
                break
        return EMatch(scrutinee, tuple(branches), start.span.merge(_expr_span(branches[-1][1])))

    def parse_seq(self) -> Expr:
        first = self.parse_assign()
        if self.peek().is_op(";"):
            self.next()
            rest = self.parse_expr()
            # Sequencing is sugar for a let with an unmentionable binder.
            return ELet(PVar("seq%"), first, rest, _expr_span(first).merge(_expr_span(rest)))
        return first

    def parse_assign(self) -> Expr:
        tok = self.peek()
        if (
            tok.kind == "LIDENT"
            and tok.text == "tag"
            and self.peek(1).kind == "LIDENT"
            and self.peek(1).text == "of"
        ):
            self.next()
            self.next()
            obj = self.parse_postfix()
            self.expect_op("<-")
            tag = self.expect("UIDENT")
            fields: list[tuple[str, Expr]] = []
            end_span = tag.span
            if self.peek().is_op("{"):
                self.next()
                while self.peek().kind == "LIDENT":
                    fname = self.next().text
                    self.expect_op("=")
                    fields.append((fname, self.parse_assign()))
                    if self.peek().is_op(";"):
                        self.next()
                    else:
                        break
                end_span = self.expect_op("}").span
            return ETagUpdate(obj, tag.text, tuple(fields), tok.span.merge(end_span))
        e = self.parse_app_expr()
        if self.peek().is_op("<-"):
            arrow = self.next()
            if not isinstance(e, EField):
                raise ParseError("left side of '<-' must be a field access", arrow.span)
            value = self.parse_assign()
            return EAssign(e.obj, e.name, value, _expr_span(e).merge(_expr_span(value)))
        return e

    def parse_app_expr(self) -> Expr:
        head = self.parse_postfix()
        type_args: tuple[Type, ...] | None = None
        if self.peek().is_op("["):
            self.next()
            targs = [self.parse_type()]
            while self.peek().is_op(","):
                self.next()
                targs.append(self.parse_type())
            self.expect_op("]")
            type_args = tuple(targs)
        result = head
        first = True
        while self._starts_expr_atom():
            arg = self.parse_postfix()
            result = ECall(
                result,
                arg,
                type_args if first else None,
                _expr_span(result).merge(_expr_span(arg)),
            )
            first = False
        if first and type_args is not None:
            raise ParseError("type application must be followed by an argument", _expr_span(head))
        return result

    def _starts_expr_atom(self) -> bool:
        tok = self.peek()
        if tok.kind in _EXPR_ATOM_START:
            return True
        if tok.is_op("("):
            return True
        if tok.is_kw("true") or tok.is_kw("false"):
            return True
        return False

    def parse_postfix(self) -> Expr:
        e = self.parse_atom_expr()
        while self.peek().is_op("."):
            self.next()
            name = self.expect("LIDENT")
            e = EField(e, name.text, _expr_span(e).merge(name.span))
        return e

    def parse_atom_expr(self) -> Expr:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return EInt(int(tok.text), tok.span)
        if tok.is_kw("true"):
            self.next()
            return EBool(True, tok.span)
        if tok.is_kw("false"):
            self.next()
            return EBool(False, tok.span)
        if tok.kind == "LIDENT":
            self.next()
            return EVar(tok.text, tok.span)
        if tok.kind == "UIDENT":
            self.next()
            fields: list[tuple[str, Expr]] = []
            span = tok.span
            if self.peek().is_op("{"):
                self.next()
                while self.peek().kind == "LIDENT":
                    fname = self.next().text
                    self.expect_op("=")
                    fields.append((fname, self.parse_assign()))
                    if self.peek().is_op(";"):
                        self.next()
                    else:
                        break
                span = tok.span.merge(self.expect_op("}").span)
            return EConstruct(tok.text, tuple(fields), span)
        if tok.is_op("("):
            open_tok = self.next()
            items: list[Expr] = []
            if not self.peek().is_op(")"):
                items.append(self.parse_expr())
                while self.peek().is_op(","):
                    self.next()
                    items.append(self.parse_expr())
            close = self.expect_op(")")
            if len(items) == 1:
                return items[0]
            return ETuple(tuple(items), open_tok.span.merge(close.span))
        raise self.error("expected an expression")


def _type_span(t: Type) -> Span:
    return getattr(t, "span", Span(0, 0))


def _expr_span(e: Expr) -> Span:
    return getattr(e, "span", Span(0, 0))


def parse_file(text: str, path: str = "<input>") -> SourceFile:
    return Parser(tokenize(text), path).parse_file()


def parse_type(text: str) -> Type:
    parser = Parser(tokenize(text))
    ty = parser.parse_type()
    if parser.peek().kind != "EOF":
        raise parser.error("trailing input after type")
    return ty


def parse_expr(text: str) -> Expr:
    parser = Parser(tokenize(text))
    e = parser.parse_expr()
    if parser.peek().kind != "EOF":
        raise parser.error("trailing input after expression")
    return e
