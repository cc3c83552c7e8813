"""Independent reference implementations used to check the engine.

These deliberately re-derive results from first principles (per-record
filtering, scoring, sorting, slicing) rather than calling into the
vectorstore's search path.
"""

from __future__ import annotations

import numpy as np

from askengine.filters import Group, Predicate


def oracle_eval(expr, payload) -> bool:
    """Direct boolean evaluation of a filter tree over one payload."""
    if isinstance(expr, Group):
        values = [oracle_eval(child, payload) for child in expr.children]
        return all(values) if expr.kind == "AND" else any(values)
    raw = payload.get(expr.field)
    values = raw if isinstance(raw, list) else [raw]

    def eq_one(value, arg):
        if value is None:
            return False
        if isinstance(value, bool):
            return (
                isinstance(arg, str)
                and arg.lower() in ("true", "false")
                and value == (arg.lower() == "true")
            )
        if isinstance(value, (int, float)):
            try:
                return float(value) == float(arg)
            except (TypeError, ValueError):
                return False
        return value == arg

    if expr.op == "eq":
        return any(eq_one(v, expr.args[0]) for v in values)
    if expr.op == "inList":
        return any(eq_one(v, a) for v in values for a in expr.args)
    if raw is None:
        return False
    return float(raw) >= float(expr.args[0]) if expr.op == "gte" else float(raw) <= float(expr.args[0])


def brute_force_search(records, query, filter_expr, offset, limit):
    """Reference scan: filter -> cosine -> sort -> slice.

    ``records`` is an iterable of (doc_id, vector, payload). Scores use the
    same float64 dot-product primitive as the engine so equality is exact.
    """
    query64 = np.ascontiguousarray(np.asarray(query), dtype=np.float64)
    scored = []
    for doc_id, vector, payload in records:
        if filter_expr is not None and not oracle_eval(filter_expr, payload):
            continue
        vector64 = np.ascontiguousarray(np.asarray(vector), dtype=np.float64)
        scored.append((doc_id, float(np.dot(vector64, query64))))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[offset : offset + limit]


def random_unit_vectors(rng: np.random.Generator, count: int, dimension: int) -> np.ndarray:
    matrix = rng.standard_normal((count, dimension)).astype(np.float32)
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix


def random_payload(rng: np.random.Generator) -> dict:
    return {
        "source": f"S{int(rng.integers(1, 4))}",
        "year": None if rng.random() < 0.1 else int(rng.integers(1990, 2031)),
        "doi_present": bool(rng.random() < 0.4),
        "has_fulltext": bool(rng.random() < 0.25),
        "language": None if rng.random() < 0.2 else ("en" if rng.random() < 0.7 else "de"),
    }


def random_filter(rng: np.random.Generator) -> Group:
    """A random well-typed filter over the standard payload schema."""

    def predicate() -> Predicate:
        field = ["source", "year", "doi_present", "has_fulltext", "language"][int(rng.integers(0, 5))]
        if field == "year":
            op = ["eq", "gte", "lte", "inList"][int(rng.integers(0, 4))]
            if op in ("gte", "lte"):
                return Predicate(field, op, (int(rng.integers(1985, 2035)),))
            if op == "inList":
                n = int(rng.integers(1, 4))
                return Predicate(field, op, tuple(str(int(rng.integers(1985, 2035))) for _ in range(n)))
            return Predicate(field, "eq", (str(int(rng.integers(1985, 2035))),))
        if field in ("doi_present", "has_fulltext"):
            return Predicate(field, "eq", ("true" if rng.random() < 0.5 else "false",))
        choices = ["S1", "S2", "S3"] if field == "source" else ["en", "de", "fr"]
        if rng.random() < 0.5:
            return Predicate(field, "eq", (choices[int(rng.integers(0, len(choices)))],))
        n = int(rng.integers(1, 4))
        return Predicate(field, "inList", tuple(choices[int(rng.integers(0, len(choices)))] for _ in range(n)))

    kind = "AND" if rng.random() < 0.5 else "OR"
    children = tuple(predicate() for _ in range(int(rng.integers(1, 4))))
    if rng.random() < 0.3:
        inner = Group("OR" if kind == "AND" else "AND", tuple(predicate() for _ in range(int(rng.integers(1, 3)))))
        children = children + (inner,)
    return Group(kind, children)
