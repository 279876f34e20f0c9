"""Recursive-descent parser for the trigger DSL.

Any malformed input raises TriggerSyntaxError / TriggerSemanticError (never
anything else); '&&' binds tighter than '||'; '#' starts a line comment.
"""

from __future__ import annotations

import re

from .dsl import (
    Atom,
    BIN_OPS,
    BoolOp,
    COMPARATORS,
    Command,
    FEATURES,
    Ite,
    Ref,
    TriggerSemanticError,
    TriggerSpec,
    TriggerSyntaxError,
)

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>==|!=|<=|>=|&&|\|\||[{}\[\]();:,.<>+\-*/])
""", re.VERBOSE)

KEYWORDS = {"trigger", "window", "phi", "xi", "duration", "ite",
            "cruise", "left", "right", "speed", "t"}


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise TriggerSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str):
        tok = self.peek()
        raise TriggerSyntaxError(message + (f", got {tok.text!r}" if tok.text else ", got end of input"),
                                 tok.line, tok.col)

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            self.fail(f"expected {text!r}")
        return self.next()

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.next()
            return True
        return False

    # ------------------------------------------------------------------

    def parse_trigger(self) -> TriggerSpec:
        self.expect("trigger")
        name_tok = self.peek()
        if name_tok.kind != "ident" or name_tok.text in KEYWORDS:
            self.fail("expected trigger name")
        name = self.next().text
        self.expect("{")
        self.expect("window")
        window = self.parse_int()
        self.expect(";")
        self.expect("phi")
        self.expect(":")
        phi = self.parse_form()
        self.expect(";")
        self.expect("xi")
        self.expect(":")
        self.expect("[")
        commands = [self.parse_cmd()]
        while self.accept(","):
            commands.append(self.parse_cmd())
        self.expect("]")
        self.expect(";")
        duration = None
        if self.accept("duration"):
            duration = self.parse_int()
            self.expect(";")
        self.expect("}")
        if self.peek().kind != "eof":
            self.fail("trailing input after trigger")
        spec = TriggerSpec(name=name, window=window, phi=phi,
                           commands=tuple(commands), duration=duration)
        spec.validate()
        return spec

    def parse_int(self) -> int:
        tok = self.peek()
        if tok.kind != "num" or not tok.text.isdigit():
            self.fail("expected an integer")
        return int(self.next().text)

    def parse_num(self) -> float:
        sign = 1.0
        if self.accept("-"):
            sign = -1.0
        tok = self.peek()
        if tok.kind != "num":
            self.fail("expected a number")
        return sign * float(self.next().text)

    # form := or_form ; or_form := and_form ("||" and_form)* ;
    # and_form := primary ("&&" primary)*
    def parse_form(self):
        left = self.parse_and()
        while self.accept("||"):
            right = self.parse_and()
            left = BoolOp("or", left, right)
        return left

    def parse_and(self):
        left = self.parse_primary()
        while self.accept("&&"):
            right = self.parse_primary()
            left = BoolOp("and", left, right)
        return left

    def parse_primary(self):
        tok = self.peek()
        if tok.text == "(":
            self.next()
            inner = self.parse_form()
            self.expect(")")
            return inner
        if tok.text == "ite":
            self.next()
            self.expect("(")
            cond = self.parse_form()
            self.expect(",")
            then = self.parse_form()
            self.expect(",")
            other = self.parse_form()
            self.expect(")")
            return Ite(cond, then, other)
        return self.parse_atom()

    def parse_atom(self) -> Atom:
        lhs = self.parse_ref()
        op = None
        rhs = None
        if self.peek().text in BIN_OPS:
            op = self.next().text
            rhs = self.parse_ref()
        tok = self.peek()
        if tok.text not in COMPARATORS:
            self.fail("expected a comparator")
        cmp_ = self.next().text
        value = self.parse_num()
        return Atom(lhs, op, rhs, cmp_, value)

    def parse_ref(self) -> Ref:
        tok = self.peek()
        if tok.text not in ("a", "e"):
            self.fail("expected 'a' or 'e'")
        vehicle = self.next().text
        self.expect(".")
        feat = self.peek()
        if feat.text not in FEATURES:
            self.fail("expected feature x, v, or lane")
        feature = self.next().text
        self.expect("[")
        self.expect("t")
        offset = 0
        if self.accept("-"):
            offset = self.parse_int()
        self.expect("]")
        return Ref(vehicle, feature, offset)

    def parse_cmd(self) -> Command:
        if self.accept("cruise"):
            return Command()
        lane = 0
        speed = None
        seen = False
        while True:
            tok = self.peek()
            if tok.text == "left":
                if lane:
                    raise TriggerSemanticError("conflicting lane actions in one command")
                self.next()
                lane = -1
            elif tok.text == "right":
                if lane:
                    raise TriggerSemanticError("conflicting lane actions in one command")
                self.next()
                lane = 1
            elif tok.text == "speed":
                if speed is not None:
                    raise TriggerSemanticError("duplicate speed action in one command")
                self.next()
                self.expect("(")
                speed = self.parse_num()
                self.expect(")")
            else:
                if not seen:
                    self.fail("expected cruise, left, right, or speed(...)")
                break
            seen = True
            if not self.accept("+"):
                break
        return Command(lane=lane, speed=speed)


def parse_trigger(text) -> TriggerSpec:
    """Parse DSL text into a TriggerSpec; round-trips through format_trigger."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TriggerSyntaxError(f"input is not valid UTF-8: {exc}", 1, 1) from None
    return _Parser(text).parse_trigger()
