"""Tiny prefix DSL for building expression trees from the command line.

Grammar:  expr := NUMBER | CALL;  CALL := op '(' expr {',' expr} ')'
with ops iota, sigma, const, sum, prod, sub, neg, partial.  Leaf names
inside iota/sigma resolve against the catalogs, e.g.
``prod(iota(heaviside@0), iota(delta@0))`` or ``partial(1, iota(delta@0))``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import catalog
from .genfunc import Const, GenFuncExpr, Iota, Product, Sigma, Sum, partial


class DslParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_TOKEN = re.compile(r"""
    (?P<num>-?\d+\.?\d*(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z][A-Za-z0-9@:.^/+\-]*)
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<comma>,)
  | (?P<ws>\s+)
""", re.VERBOSE)


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str):
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DslParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append(_Token(kind, m.group(), pos))
        pos = m.end()
    out.append(_Token("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind):
        tok = self.tokens[self.i]
        if tok.kind != kind:
            raise DslParseError(f"expected {kind}, found {tok.text or 'end'!r}", tok.pos)
        self.i += 1
        return tok

    def parse(self) -> GenFuncExpr:
        expr = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise DslParseError(f"trailing input {tok.text!r}", tok.pos)
        return expr

    def expr(self) -> GenFuncExpr:
        tok = self.peek()
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if self.peek().kind == "lpar":
                return self.call(tok)
            raise DslParseError(
                f"bare name {tok.text!r}; leaves must appear inside iota(...) or sigma(...)",
                tok.pos,
            )
        raise DslParseError(f"expected expression, found {tok.text or 'end'!r}", tok.pos)

    def call(self, head) -> GenFuncExpr:
        self.take("lpar")
        op = head.text
        if op == "iota":
            name = self.take("name").text
            self.take("rpar")
            try:
                return Iota(catalog.distribution(name))
            except catalog.UnknownNameError as exc:
                raise DslParseError(str(exc), head.pos) from None
        if op == "sigma":
            name = self.take("name").text
            self.take("rpar")
            try:
                return Sigma(catalog.smooth_function(name))
            except catalog.UnknownNameError as exc:
                raise DslParseError(str(exc), head.pos) from None
        if op == "const":
            tok = self.take("num")
            self.take("rpar")
            return Const(float(tok.text))
        if op == "partial":
            tok = self.take("num")
            axis = int(float(tok.text))
            self.take("comma")
            child = self.expr()
            self.take("rpar")
            return partial(axis, child)
        args = [self.expr()]
        while self.peek().kind == "comma":
            self.take("comma")
            args.append(self.expr())
        self.take("rpar")
        if op == "sum":
            return Sum(tuple(args))
        if op == "prod":
            if len(args) != 2:
                raise DslParseError("prod takes exactly 2 arguments", head.pos)
            return Product(args[0], args[1])
        if op == "sub":
            if len(args) != 2:
                raise DslParseError("sub takes exactly 2 arguments", head.pos)
            return Sum((args[0], Product(Const(-1.0), args[1])))
        if op == "neg":
            if len(args) != 1:
                raise DslParseError("neg takes exactly 1 argument", head.pos)
            return Product(Const(-1.0), args[0])
        raise DslParseError(f"unknown operation {op!r}", head.pos)


def parse_expression(text: str) -> GenFuncExpr:
    return _Parser(text).parse()
