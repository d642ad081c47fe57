"""Tokenizer for `.mz` source text.

Identifiers are ASCII: `[a-z][a-zA-Z0-9_']*` for values and type names,
`[A-Z][a-zA-Z0-9_']*` for data tags. Line comments start with `--`.
"""

from __future__ import annotations

import re

from .ast import Span

KEYWORDS = frozenset(
    [
        "data",
        "mutable",
        "alias",
        "abstract",
        "val",
        "perm",
        "consumes",
        "let",
        "in",
        "match",
        "with",
        "fun",
        "if",
        "then",
        "else",
        "true",
        "false",
    ]
)




class LexError(Exception):
    def __init__(self, message: str, span: Span):
        super().__init__(message)
        self.message = message
        self.span = span


class Token:
    __slots__ = ("kind", "text", "span")

    def __init__(self, kind: str, text: str, span: Span):
        self.kind = kind  # KW, LIDENT, UIDENT, INT, OP, EOF
        self.text = text
        self.span = span

    def is_kw(self, word: str) -> bool:
        return self.kind == "KW" and self.text == word

    def is_op(self, op: str) -> bool:
        return self.kind == "OP" and self.text == op

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.text!r})"


_TOKEN_RE = re.compile(
    r"""(?P<skip>[ \t\r\n]+|--[^\n]*)
      | (?P<int>[0-9]+)
      | (?P<word>[a-zA-Z][a-zA-Z0-9_']*)
      | (?P<op>->|<-|[@*|={}()\[\],;:.])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    n = len(text)
    for match in _TOKEN_RE.finditer(text):
        if match.start() != pos:
            raise LexError(f"illegal character {text[pos]!r}", Span(pos, 1))
        pos = match.end()
        kind = match.lastgroup
        if kind == "skip":
            continue
        word = match.group()
        if kind == "int":
            tokens.append(Token("INT", word, Span(match.start(), len(word))))
        elif kind == "word":
            if word in KEYWORDS:
                tokens.append(Token("KW", word, Span(match.start(), len(word))))
            elif "A" <= word[0] <= "Z":
                tokens.append(Token("UIDENT", word, Span(match.start(), len(word))))
            else:
                tokens.append(Token("LIDENT", word, Span(match.start(), len(word))))
        else:
            tokens.append(Token("OP", word, Span(match.start(), len(word))))
    if pos != n:
        raise LexError(f"illegal character {text[pos]!r}", Span(pos, 1))
    tokens.append(Token("EOF", "", Span(n, 0)))
    return tokens


def line_col(text: str, offset: int) -> tuple[int, int]:
    """1-based line and column of a byte offset."""
    line = text.count("\n", 0, offset) + 1
    last_nl = text.rfind("\n", 0, offset)
    col = offset - last_nl if last_nl >= 0 else offset + 1
    return line, col
