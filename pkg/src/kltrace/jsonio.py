"""JSON interchange: elements, functors, systems, values, trace tables.

Rationals travel as ``"p/q"`` strings so exactness survives the wire; all
emitted structures are in canonical order so equal inputs serialise to
identical bytes.
"""

from __future__ import annotations

import json
import re
from fractions import Fraction
from typing import Any

from .effects import EffectKind, EffectValue, dist_value, set_value
from .finset import UNIT, Atom, Elem, FinSet, Pair, Tag, Unit
from .polyfun import (
    Coprod,
    Const,
    IdF,
    PolyFunctor,
    Prod,
    apply_obj,
    elem_to_word,
    label_id,
    label_id_term,
    match_label_id,
    match_label_id_term,
)
from .traces import System, TraceTable

__all__ = [
    "SchemaError",
    "InvariantError",
    "fraction_to_str",
    "fraction_from_str",
    "elem_to_json",
    "elem_from_json",
    "elem_key",
    "effect_value_to_json",
    "functor_to_json",
    "functor_from_json",
    "system_to_json",
    "parse_system",
    "render_word",
    "trace_table_to_json",
]

_NAME_RE = re.compile(r"^[^\s.,()$]+$")


class SchemaError(ValueError):
    """The input does not match the expected shape."""

    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class InvariantError(ValueError):
    """The input parses but violates a value invariant."""

    def __init__(self, location: str, reason: str) -> None:
        self.location = location
        self.reason = reason
        super().__init__(f"{location}: {reason}")


def fraction_to_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def fraction_from_str(text: str, path: str = "weight") -> Fraction:
    if not isinstance(text, str):
        raise SchemaError(path, "rationals are written as 'p/q' strings")
    num, sep, den = text.partition("/")
    try:
        if not sep:
            return Fraction(int(num))
        return Fraction(int(num), int(den))
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(path, f"bad rational {text!r}: {exc}") from None


def _check_name(name: Any, path: str) -> str:
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise SchemaError(
            path,
            f"bad name {name!r}: names are non-empty and avoid whitespace, '.', ',', parentheses and '$'",
        )
    return name


def elem_to_json(e: Elem) -> Any:
    if isinstance(e, Unit):
        return "()"
    if isinstance(e, Atom):
        return e.name
    if isinstance(e, Pair):
        return ["pair", elem_to_json(e.left), elem_to_json(e.right)]
    if isinstance(e, Tag):
        return ["tag", e.index, elem_to_json(e.payload)]
    raise TypeError(f"not an element: {e!r}")


def elem_from_json(obj: Any, path: str = "elem") -> Elem:
    if obj == "()":
        return UNIT
    if isinstance(obj, str):
        if not obj:
            raise SchemaError(path, "atom names are non-empty")
        return Atom(obj)
    if isinstance(obj, list) and len(obj) == 3 and obj[0] == "pair":
        return Pair(elem_from_json(obj[1], path), elem_from_json(obj[2], path))
    if isinstance(obj, list) and len(obj) == 3 and obj[0] == "tag":
        if not isinstance(obj[1], int) or obj[1] < 0:
            raise SchemaError(path, "tag index is a natural number")
        return Tag(obj[1], elem_from_json(obj[2], path))
    raise SchemaError(path, f"not an element: {obj!r}")


def elem_key(e: Elem) -> str:
    return json.dumps(elem_to_json(e), separators=(",", ":"))


def effect_value_to_json(v: EffectValue) -> dict:
    if v.kind.is_set_kind:
        return {"kind": v.kind.json_name, "set": [elem_to_json(e) for e in v.entries]}
    return {
        "kind": v.kind.json_name,
        "dist": {elem_key(e): fraction_to_str(w) for e, w in v.entries},
    }


def functor_to_json(functor: PolyFunctor) -> dict:
    alphabet = match_label_id(functor)
    if alphabet is not None and all(isinstance(a, Atom) for a in alphabet):
        return {"kind": "label-id", "alphabet": [a.name for a in alphabet]}
    alphabet = match_label_id_term(functor)
    if alphabet is not None and all(isinstance(a, Atom) for a in alphabet):
        return {"kind": "label-id-term", "alphabet": [a.name for a in alphabet]}
    if isinstance(functor, IdF):
        return {"kind": "id"}
    if isinstance(functor, Const):
        return {"kind": "const", "set": [elem_to_json(e) for e in functor.carrier]}
    if isinstance(functor, Coprod):
        return {"kind": "coprod", "args": [functor_to_json(g) for g in functor.args]}
    if isinstance(functor, Prod):
        return {
            "kind": "prod",
            "args": [functor_to_json(functor.left), functor_to_json(functor.right)],
        }
    raise TypeError(f"not a polynomial functor: {functor!r}")


def _alphabet_from_json(obj: Any, path: str) -> FinSet:
    if not isinstance(obj, list) or not obj:
        raise SchemaError(path, "alphabet is a non-empty list of names")
    return FinSet(Atom(_check_name(a, path)) for a in obj)


def functor_from_json(obj: Any, path: str = "functor") -> PolyFunctor:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError(path, "functors are objects with a 'kind'")
    kind = obj["kind"]
    if kind == "id":
        return IdF()
    if kind == "const":
        if "set" not in obj or not isinstance(obj["set"], list):
            raise SchemaError(path, "constant functors carry a 'set' list")
        return Const(FinSet(elem_from_json(e, path) for e in obj["set"]))
    if kind == "coprod":
        args = obj.get("args")
        if not isinstance(args, list):
            raise SchemaError(path, "coproducts carry an 'args' list")
        return Coprod(
            tuple(functor_from_json(g, f"{path}.args[{i}]") for i, g in enumerate(args))
        )
    if kind == "prod":
        args = obj.get("args")
        if not isinstance(args, list) or len(args) != 2:
            raise SchemaError(path, "products carry exactly two 'args'")
        return Prod(
            functor_from_json(args[0], f"{path}.args[0]"),
            functor_from_json(args[1], f"{path}.args[1]"),
        )
    if kind == "label-id":
        return label_id(_alphabet_from_json(obj.get("alphabet"), f"{path}.alphabet"))
    if kind == "label-id-term":
        return label_id_term(
            _alphabet_from_json(obj.get("alphabet"), f"{path}.alphabet")
        )
    raise SchemaError(path, f"unknown functor kind {kind!r}")


def system_to_json(system: System) -> dict:
    if not all(isinstance(x, Atom) for x in system.states):
        raise ValueError("only systems with named states serialise to JSON")
    terminated = match_label_id_term(system.functor) is not None
    labelled = terminated or match_label_id(system.functor) is not None
    if not labelled:
        raise ValueError("only labelled systems serialise to JSON")
    out_transitions: dict[str, list] = {}
    for x in system.states:
        rows = []
        for entry in system.step(x).entries:
            if system.kind.is_set_kind:
                e, w = entry, None
            else:
                e, w = entry
            row: dict[str, Any] = {}
            if terminated:
                if isinstance(e, Tag) and e.index == 1:
                    row["terminate"] = True
                else:
                    e = e.payload
                    row["label"] = e.left.name
                    row["target"] = e.right.name
            else:
                row["label"] = e.left.name
                row["target"] = e.right.name
            if w is not None:
                row["weight"] = fraction_to_str(w)
            rows.append(row)
        out_transitions[x.name] = rows
    return {
        "monad": system.kind.json_name,
        "functor": functor_to_json(system.functor),
        "states": [x.name for x in system.states],
        "transitions": out_transitions,
    }


def parse_system(obj: Any) -> System:
    """Validate and build a system from its JSON form.

    Shape problems raise ``SchemaError`` with the offending path; value
    problems (a distribution row off full mass, an empty non-empty-powerset
    row) raise ``InvariantError`` naming the state.
    """
    if not isinstance(obj, dict):
        raise SchemaError("$", "a system is a JSON object")
    try:
        kind = EffectKind.from_json_name(obj.get("monad"))
    except (ValueError, TypeError):
        raise SchemaError("monad", f"unknown monad {obj.get('monad')!r}") from None
    functor = functor_from_json(obj.get("functor"), "functor")
    terminated = match_label_id_term(functor) is not None
    alphabet = match_label_id(functor) or match_label_id_term(functor)
    if alphabet is None:
        raise SchemaError("functor", "system transitions need a labelled functor")

    raw_states = obj.get("states")
    if not isinstance(raw_states, list) or not raw_states:
        raise SchemaError("states", "a non-empty list of state names is required")
    names = [_check_name(s, f"states[{i}]") for i, s in enumerate(raw_states)]
    if len(set(names)) != len(names):
        raise SchemaError("states", "state names must be distinct")
    states = FinSet(Atom(s) for s in names)

    raw_transitions = obj.get("transitions", {})
    if not isinstance(raw_transitions, dict):
        raise SchemaError("transitions", "an object keyed by state names is required")
    for key in raw_transitions:
        if key not in names:
            raise SchemaError(f"transitions.{key}", "not a declared state")

    base = apply_obj(functor, states)
    moves = {}
    for name in names:
        rows = raw_transitions.get(name, [])
        path = f"transitions.{name}"
        if not isinstance(rows, list):
            raise SchemaError(path, "a list of transitions is required")
        elems = []
        weighted = []
        for i, row in enumerate(rows):
            rpath = f"{path}[{i}]"
            if not isinstance(row, dict):
                raise SchemaError(rpath, "a transition is an object")
            if row.get("terminate"):
                if not terminated:
                    raise SchemaError(rpath, "this functor has no termination")
                unknown = set(row) - {"terminate", "weight"}
                if unknown:
                    raise SchemaError(rpath, f"unexpected field {sorted(unknown)[0]!r}")
                e: Elem = Tag(1, UNIT)
            else:
                unknown = set(row) - {"label", "target", "weight"}
                if unknown:
                    raise SchemaError(rpath, f"unexpected field {sorted(unknown)[0]!r}")
                if "label" not in row or "target" not in row:
                    raise SchemaError(rpath, "a transition needs 'label' and 'target'")
                label = Atom(_check_name(row["label"], f"{rpath}.label"))
                if label not in alphabet:
                    raise SchemaError(rpath + ".label", f"{row['label']!r} is not in the alphabet")
                if row["target"] not in names:
                    raise SchemaError(rpath + ".target", f"{row['target']!r} is not a state")
                e = Pair(label, Atom(row["target"]))
                if terminated:
                    e = Tag(0, e)
            if kind.is_set_kind:
                if "weight" in row:
                    raise SchemaError(rpath, "set-kind transitions carry no weight")
                elems.append(e)
            else:
                if "weight" not in row:
                    raise SchemaError(rpath, "distribution transitions need a weight")
                weighted.append((e, fraction_from_str(row["weight"], rpath + ".weight")))
        try:
            if kind.is_set_kind:
                moves[Atom(name)] = set_value(kind, base, elems)
            else:
                moves[Atom(name)] = dist_value(kind, base, weighted)
        except ValueError as exc:
            raise InvariantError(name, str(exc)) from None
    try:
        return System.build(kind, functor, states, moves)
    except ValueError as exc:
        raise InvariantError("system", str(exc)) from None


def render_word(labels: tuple[Elem, ...], terminated: bool) -> str:
    parts = [a.name if isinstance(a, Atom) else elem_key(a) for a in labels]
    if terminated:
        parts.append("$")
    return ".".join(parts)


def _stage_value_json(functor: PolyFunctor, v: EffectValue) -> dict:
    labelled = (
        match_label_id(functor) is not None or match_label_id_term(functor) is not None
    )

    def key(e: Elem) -> str:
        if labelled:
            labels, term = elem_to_word(functor, e)
            return render_word(labels, term)
        return elem_key(e)

    if v.kind.is_set_kind:
        return {"set": [key(e) for e in v.entries]}
    return {"dist": {key(e): fraction_to_str(w) for e, w in v.entries}}


def trace_table_to_json(table: TraceTable, only_state: Elem | None = None) -> dict:
    system = table.system
    states = [only_state] if only_state is not None else list(system.states)
    per_state = {}
    for x in states:
        name = x.name if isinstance(x, Atom) else elem_key(x)
        per_state[name] = [
            _stage_value_json(system.functor, table.value(n, x))
            for n in range(table.depth + 1)
        ]
    return {
        "monad": system.kind.json_name,
        "functor": functor_to_json(system.functor),
        "depth": table.depth,
        "states": per_state,
    }
