"""Distribution spec documents: a strict JSON subset describing a DistExpr.

Node kinds::

    {"atoms": [[location, weight], ...]}
    {"cauchy": {"scale": s}}
    {"gaussian": {"mean": m, "variance": v}}
    {"convolve": [node, ...]}
    {"mix": [{"weight": w, "dist": node}, ...]}

Only objects, arrays, numbers and strings are accepted; ``true``,
``false``, ``null``, ``NaN`` and ``Infinity`` are rejected with a position.
"""

from __future__ import annotations

import json
import re

from .errors import ParseError, ValidationError
from .measures import AtomicLeaf, CauchyLeaf, Convolve, DistExpr, GaussianLeaf, Mixture, canonicalize

_NUMBER = re.compile(r"-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?")
_STRING = re.compile(r'"(?:[^"\\\x00-\x1f]|\\(?:["\\/bfnrt]|u[0-9a-fA-F]{4}))*"')


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def where(self, pos=None):
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def fail(self, message, pos=None):
        raise ParseError(*self.where(pos), message)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch):
        if self.peek() != ch:
            got = self.peek() or "end of input"
            self.fail(f"expected {ch!r}, got {got!r}")
        self.pos += 1

    def document(self):
        value = self.value()
        if self.peek():
            self.fail("trailing characters after document")
        return value

    def value(self):
        ch = self.peek()
        start = self.pos
        if ch == "{":
            return self.obj()
        if ch == "[":
            return self.array()
        if ch == '"':
            m = _STRING.match(self.text, self.pos)
            if not m:
                self.fail("malformed string")
            self.pos = m.end()
            return json.loads(m.group())
        m = _NUMBER.match(self.text, self.pos)
        if m and m.end() > start:
            self.pos = m.end()
            num = float(m.group())
            if num != num or num in (float("inf"), float("-inf")):
                self.fail("number out of range", start)
            return num
        if ch == "":
            self.fail("unexpected end of input")
        word = re.match(r"[A-Za-z]+", self.text[self.pos :])
        token = word.group() if word else ch
        self.fail(f"unsupported token {token!r}")

    def obj(self):
        self.expect("{")
        out = {}
        if self.peek() == "}":
            self.pos += 1
            return out
        while True:
            if self.peek() != '"':
                self.fail("expected a string key")
            key_pos = self.pos
            key = self.value()
            if key in out:
                self.fail(f"duplicate key {key!r}", key_pos)
            self.expect(":")
            out[key] = (self.value(), key_pos)
            if self.peek() == ",":
                self.pos += 1
                continue
            self.expect("}")
            return out

    def array(self):
        self.expect("[")
        out = []
        if self.peek() == "]":
            self.pos += 1
            return out
        while True:
            out.append(self.value())
            if self.peek() == ",":
                self.pos += 1
                continue
            self.expect("]")
            return out


def _strip(value):
    """Drop key positions from parsed objects."""
    if isinstance(value, dict):
        return {k: _strip(v) for k, (v, _) in value.items()}
    if isinstance(value, list):
        return [_strip(v) for v in value]
    return value


def _number(v, what):
    if not isinstance(v, float):
        raise ValidationError(f"{what} must be a number")
    return v


def _build(node, path="$") -> DistExpr:
    if not isinstance(node, dict) or len(node) != 1:
        raise ValidationError(f"{path}: expected an object with exactly one node kind")
    (kind, body), = node.items()
    here = f"{path}.{kind}"
    if kind == "atoms":
        if not isinstance(body, list) or not body:
            raise ValidationError(f"{here}: expected a non-empty array of [location, weight]")
        pairs = []
        for k, pair in enumerate(body):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ValidationError(f"{here}[{k}]: expected [location, weight]")
            loc, w = (_number(x, f"{here}[{k}]") for x in pair)
            if w <= 0:
                raise ValidationError(f"{here}[{k}]: weight must be positive")
            pairs.append((loc, w))
        try:
            return AtomicLeaf(canonicalize(pairs))
        except ValidationError as exc:
            raise ValidationError(f"{here}: {exc}") from None
    if kind == "cauchy":
        if not isinstance(body, dict) or set(body) != {"scale"}:
            raise ValidationError(f"{here}: expected {{\"scale\": s}}")
        return _wrap(here, CauchyLeaf, _number(body["scale"], f"{here}.scale"))
    if kind == "gaussian":
        if not isinstance(body, dict) or not set(body) <= {"mean", "variance"} or "variance" not in body:
            raise ValidationError(f"{here}: expected {{\"mean\": m, \"variance\": v}}")
        mean = _number(body.get("mean", 0.0), f"{here}.mean")
        return _wrap(here, GaussianLeaf, mean, _number(body["variance"], f"{here}.variance"))
    if kind == "convolve":
        if not isinstance(body, list) or not body:
            raise ValidationError(f"{here}: expected a non-empty array")
        return _wrap(here, Convolve, tuple(_build(c, f"{here}[{k}]") for k, c in enumerate(body)))
    if kind == "mix":
        if not isinstance(body, list) or not body:
            raise ValidationError(f"{here}: expected a non-empty array")
        comps = []
        for k, item in enumerate(body):
            if not isinstance(item, dict) or set(item) != {"weight", "dist"}:
                raise ValidationError(f"{here}[{k}]: expected {{\"weight\": w, \"dist\": node}}")
            comps.append((_number(item["weight"], f"{here}[{k}].weight"), _build(item["dist"], f"{here}[{k}].dist")))
        return _wrap(here, Mixture, tuple(comps))
    raise ValidationError(f"{path}: unknown node kind {kind!r}")


def _wrap(path, cls, *args):
    try:
        return cls(*args)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def parse_spec(text: str) -> DistExpr:
    """Parse and validate a spec document."""
    return _build(_strip(_Parser(text).document()))


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_spec(expr: DistExpr) -> str:
    """Canonical single-line text for ``expr``; inverse of :func:`parse_spec`."""
    if isinstance(expr, AtomicLeaf):
        body = ", ".join(f"[{_fmt(x)}, {_fmt(w)}]" for x, w in expr.measure.atoms)
        return f'{{"atoms": [{body}]}}'
    if isinstance(expr, CauchyLeaf):
        return f'{{"cauchy": {{"scale": {_fmt(expr.scale)}}}}}'
    if isinstance(expr, GaussianLeaf):
        return f'{{"gaussian": {{"mean": {_fmt(expr.mean)}, "variance": {_fmt(expr.variance)}}}}}'
    if isinstance(expr, Convolve):
        return '{"convolve": [' + ", ".join(serialize_spec(p) for p in expr.parts) + "]}"
    if isinstance(expr, Mixture):
        items = ", ".join(f'{{"weight": {_fmt(w)}, "dist": {serialize_spec(d)}}}' for w, d in expr.components)
        return '{"mix": [' + items + "]}"
    raise ValidationError(f"{type(expr).__name__} has no spec-file form")
