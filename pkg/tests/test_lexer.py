import pytest
from hypothesis import given, strategies as st

from minimz.ast import Span
from minimz.lexer import LexError, line_col, tokenize


def kinds_and_texts(tokens):
    return [(t.kind, t.text) for t in tokens if t.kind != "EOF"]


def test_data_mutable_tree():
    tokens = kinds_and_texts(tokenize("data mutable tree a"))
    assert tokens == [
        ("KW", "data"),
        ("KW", "mutable"),
        ("LIDENT", "tree"),
        ("LIDENT", "a"),
    ]


def test_empty_input():
    tokens = tokenize("")
    assert len(tokens) == 1 and tokens[0].kind == "EOF"


def test_permission_conjunction():
    tokens = kinds_and_texts(tokenize("t @ tree a * x @ a"))
    assert tokens == [
        ("LIDENT", "t"),
        ("OP", "@"),
        ("LIDENT", "tree"),
        ("LIDENT", "a"),
        ("OP", "*"),
        ("LIDENT", "x"),
        ("OP", "@"),
        ("LIDENT", "a"),
    ]


def test_keywords_are_closed_set():
    text = "data mutable alias abstract val perm consumes let in match with fun if then else true false"
    tokens = tokenize(text)
    assert all(t.kind == "KW" for t in tokens[:-1])


def test_line_comments_are_skipped():
    tokens = kinds_and_texts(tokenize("-- a comment\nval -- trailing\n"))
    assert tokens == [("KW", "val")]


def test_uident_vs_lident():
    tokens = kinds_and_texts(tokenize("Node left x'2"))
    assert tokens == [("UIDENT", "Node"), ("LIDENT", "left"), ("LIDENT", "x'2")]


def test_illegal_character_has_span():
    with pytest.raises(LexError) as exc:
        tokenize("val x ?")
    assert exc.value.span == Span(6, 1)


def test_unicode_identifier_rejected():
    with pytest.raises(LexError):
        tokenize("val café")


def test_spans_cover_source():
    text = "val size: [a] tree a -> int"
    for tok in tokenize(text)[:-1]:
        assert text[tok.span.start : tok.span.end] == tok.text


@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=200))
def test_tokenizer_totality(text):
    """tokenize never loops and emits at most one token per character."""
    try:
        tokens = tokenize(text)
    except LexError:
        return
    assert len(tokens) - 1 <= len(text)


def test_line_col():
    text = "ab\ncd\nef"
    assert line_col(text, 0) == (1, 1)
    assert line_col(text, 3) == (2, 1)
    assert line_col(text, 7) == (3, 2)
