"""Symbolic metadata predicates: AST, URL grammar, and evaluation.

Grammar: ``<GROUP>[<gi>][<field>][<op>][<ai>]=<value>`` pairs joined by
``&``, with GROUP in {AND, OR}. Pairs sharing (GROUP, gi, field, op)
accumulate their values into one predicate ordered by ``ai``; each
(GROUP, gi) forms a group of predicates; multiple groups combine
conjunctively. Values are percent-encoded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from urllib.parse import quote, unquote

from .errors import EngineError, FilterParseError

OPS = ("eq", "inList", "gte", "lte")
GROUP_KINDS = ("AND", "OR")

# Index payload schema: the only fields searches may filter on.
PAYLOAD_FIELDS = ("source", "year", "doi_present", "has_fulltext", "language")

Scalar = str | int | float


@dataclass(frozen=True)
class Predicate:
    field: str
    op: str
    args: tuple[Scalar, ...]

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown filter op '{self.op}'")
        if not self.args:
            raise ValueError("predicate needs at least one argument")
        if self.op in ("eq", "gte", "lte") and len(self.args) != 1:
            raise ValueError(f"op '{self.op}' takes exactly one argument")
        if self.op in ("gte", "lte") and not isinstance(self.args[0], (int, float)):
            raise ValueError(f"op '{self.op}' requires a numeric argument")

    def fields(self) -> set[str]:
        return {self.field}


@dataclass(frozen=True)
class Group:
    kind: str  # "AND" | "OR"
    children: tuple["Group | Predicate", ...]

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"unknown group kind '{self.kind}'")
        if not self.children:
            raise ValueError("group needs at least one child")

    def fields(self) -> set[str]:
        names: set[str] = set()
        for child in self.children:
            names |= child.fields()
        return names


FilterExpr = Group | Predicate


_PAIR_KEY_RE = re.compile(
    r"^(?P<kind>[A-Z]+)\[(?P<gi>\d+)\]\[(?P<field>[A-Za-z0-9_-]+)\]\[(?P<op>[A-Za-z]+)\]\[(?P<ai>\d+)\]$"
)
_INT_RE = re.compile(r"^[+-]?\d+$")


def _typed_value(op: str, raw: str, position: int) -> Scalar:
    if op in ("gte", "lte"):
        if _INT_RE.match(raw):
            return int(raw)
        try:
            return float(raw)
        except ValueError:
            raise FilterParseError(
                "filter_error", f"op '{op}' requires a numeric value, got {raw!r}", position=position
            ) from None
    return raw


def parse_filter(encoded: str) -> FilterExpr:
    """Parse the URL filter grammar into an AST.

    Raises position-annotated errors for syntax faults and unknown ops; an
    empty string is rejected (callers pass None for "no filter").
    """
    if encoded == "":
        raise FilterParseError("empty_filter", "filter string is empty", position=0)

    # (kind, gi) -> {(field, op) -> {ai -> value}}, remembering first-seen order
    groups: dict[tuple[str, int], dict[tuple[str, str], dict[int, Scalar]]] = {}
    position = 0
    for pair in encoded.split("&"):
        if pair == "":
            raise FilterParseError("filter_error", "empty clause", position=position)
        key, sep, raw_value = pair.partition("=")
        if not sep:
            raise FilterParseError("filter_error", "clause has no '=' value", position=position)
        match = _PAIR_KEY_RE.match(key)
        if not match:
            raise FilterParseError("filter_error", f"malformed clause key {key!r}", position=position)
        kind = match.group("kind")
        if kind not in GROUP_KINDS:
            raise FilterParseError("filter_error", f"unknown group kind {kind!r}", position=position)
        op = match.group("op")
        if op not in OPS:
            raise FilterParseError("unknown_op", f"unknown filter op {op!r}", position=position)
        gi = int(match.group("gi"))
        ai = int(match.group("ai"))
        value = _typed_value(op, unquote(raw_value), position)
        predicates = groups.setdefault((kind, gi), {})
        args = predicates.setdefault((match.group("field"), op), {})
        if ai in args:
            raise FilterParseError("filter_error", f"duplicate argument index {ai}", position=position)
        args[ai] = value
        position += len(pair) + 1

    built: list[Group] = []
    for (kind, _gi), predicates in groups.items():
        children = []
        for (field_name, op), args in predicates.items():
            ordered = tuple(args[ai] for ai in sorted(args))
            try:
                children.append(Predicate(field_name, op, ordered))
            except ValueError as exc:
                raise FilterParseError("filter_error", str(exc), position=0) from None
        built.append(Group(kind, tuple(children)))
    if len(built) == 1:
        return built[0]
    return Group("AND", tuple(built))


def _format_value(value: Scalar) -> str:
    if isinstance(value, bool):  # bools never appear in parsed ASTs; guard anyway
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value) if isinstance(value, float) else str(value)
    return quote(value, safe="")


def print_filter(expr: FilterExpr) -> str:
    """Render an AST back into the URL grammar, canonically numbered.

    Only shapes the grammar can express are accepted: a single group of
    predicates, or a conjunction of such groups. A bare predicate prints as
    a one-predicate AND group.
    """
    if isinstance(expr, Predicate):
        expr = Group("AND", (expr,))
    if isinstance(expr, Group) and all(isinstance(c, Predicate) for c in expr.children):
        group_list = [expr]
    elif (
        isinstance(expr, Group)
        and expr.kind == "AND"
        and all(
            isinstance(c, Group) and all(isinstance(p, Predicate) for p in c.children)
            for c in expr.children
        )
    ):
        group_list = list(expr.children)  # type: ignore[arg-type]
    else:
        raise EngineError(
            "filter_error",
            "filter tree is nested too deeply for the URL grammar",
            stage="filter",
        )

    pairs: list[str] = []
    counters = {"AND": 0, "OR": 0}
    for group in group_list:
        gi = counters[group.kind]
        counters[group.kind] += 1
        for predicate in group.children:
            for ai, value in enumerate(predicate.args):
                pairs.append(
                    f"{group.kind}[{gi}][{predicate.field}][{predicate.op}][{ai}]={_format_value(value)}"
                )
    return "&".join(pairs)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _scalar_matches(payload_value, arg: Scalar) -> bool:
    """eq-style match of one payload scalar against one filter argument.

    Grammar arguments are strings; they are coerced to the payload value's
    type (bool then numeric), falling back to case-sensitive string equality.
    """
    if payload_value is None:
        return False
    if isinstance(payload_value, bool):
        if isinstance(arg, str):
            lowered = arg.lower()
            if lowered in ("true", "false"):
                return payload_value is (lowered == "true")
        return False
    if isinstance(payload_value, (int, float)):
        if isinstance(arg, (int, float)):
            return float(payload_value) == float(arg)
        try:
            return float(payload_value) == float(arg)
        except ValueError:
            return False
    if isinstance(payload_value, str):
        return isinstance(arg, str) and payload_value == arg
    return False


def _evaluate_predicate(predicate: Predicate, payload: dict) -> bool:
    value = payload.get(predicate.field)
    candidates = value if isinstance(value, list) else [value]
    if predicate.op == "eq":
        return any(_scalar_matches(v, predicate.args[0]) for v in candidates)
    if predicate.op == "inList":
        return any(_scalar_matches(v, arg) for v in candidates for arg in predicate.args)
    # gte / lte: numeric payloads only; absent fields never match
    if value is None:
        return False
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise EngineError(
            "filter_error",
            f"op '{predicate.op}' applied to non-numeric field '{predicate.field}'",
            stage="filter",
        )
    bound = float(predicate.args[0])
    return float(value) >= bound if predicate.op == "gte" else float(value) <= bound


def evaluate_filter(expr: FilterExpr, payload: dict) -> bool:
    """Standard boolean semantics over a flat payload map."""
    if isinstance(expr, Predicate):
        return _evaluate_predicate(expr, payload)
    results = (evaluate_filter(child, payload) for child in expr.children)
    return all(results) if expr.kind == "AND" else any(results)
