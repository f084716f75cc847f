"""Minimal s-expression reader/printer shared by the expression syntax,
the rewrite-rule database, and the ``.mlm`` implementation file format."""

from __future__ import annotations


class SexprError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def parse(text: str):
    """Parse one s-expression; atoms are returned as strings."""
    forms, rest = parse_many(text)
    if len(forms) != 1:
        raise SexprError(f"expected a single form, found {len(forms)}")
    return forms[0]


def parse_many(text: str):
    tokens = tokenize(text)
    forms = []
    pos = 0
    while pos < len(tokens):
        form, pos = _parse_at(tokens, pos)
        forms.append(form)
    return forms, pos


def _parse_at(tokens: list[str], pos: int):
    if pos >= len(tokens):
        raise SexprError("unexpected end of input")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while True:
            if pos >= len(tokens):
                raise SexprError("unbalanced '('")
            if tokens[pos] == ")":
                return items, pos + 1
            item, pos = _parse_at(tokens, pos)
            items.append(item)
    if tok == ")":
        raise SexprError("unbalanced ')'")
    return tok, pos + 1


def format_sexpr(form) -> str:
    if isinstance(form, str):
        return form
    return "(" + " ".join(format_sexpr(f) for f in form) + ")"
