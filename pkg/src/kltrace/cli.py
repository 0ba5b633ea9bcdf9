"""Batch command line: parse descriptions, dispatch analyses, render reports.

Every command is a pure function of its input files and flags; reports have
no timestamps, witness lists are canonically ordered, and identical inputs
produce byte-identical output.  Exit codes: 0 for pass or info, 1 when a
checked property fails, 2 for malformed input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from typing import IO, Any, Sequence

from . import __version__
from .distlaw import (
    LawSpec,
    canonical_law,
    check_law_axioms,
    check_morphism,
    check_omega_suitable,
    identity_endo_morphism,
    identity_monad_morphism,
    inclusion_morphism,
    relabel_morphism,
    support_morphism,
    transform_system,
)
from .effects import EffectKind, SamplerConfig, check_monad_laws
from .finset import Atom, FinMap, FinSet
from .jsonio import (
    InvariantError,
    SchemaError,
    fraction_to_str,
    functor_from_json,
    parse_system,
    system_to_json,
    trace_table_to_json,
)
from .polyfun import match_label_id, match_label_id_term
from .report import Report
from .traces import (
    System,
    check_coherence,
    equiv_partitions,
    lasso_membership,
    pseudo_metric,
    stage_semantics,
    verify_omega_consistency,
)

__all__ = ["main"]


def _digest(parts: Sequence[bytes]) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
        h.update(b"\x00")
    return h.hexdigest()[:16]


def _meta(args: argparse.Namespace, raw_inputs: Sequence[bytes]) -> dict:
    flags = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "format")
    }
    blob = json.dumps(flags, sort_keys=True, default=str).encode()
    return {
        "tool": "kltrace",
        "version": __version__,
        "command": args.command,
        "input_digest": _digest([blob, *raw_inputs]),
    }


class _CliError(Exception):
    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


def _read_json(path: str) -> tuple[Any, bytes]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise _CliError(path, f"cannot read: {exc}") from None
    try:
        return json.loads(raw), raw
    except json.JSONDecodeError as exc:
        raise _CliError(path, f"not JSON: {exc}") from None


def _load_system(path: str) -> tuple[System, bytes]:
    obj, raw = _read_json(path)
    return parse_system(obj), raw


def _parse_labels(text: str, alphabet: FinSet, flag: str) -> tuple[Atom, ...]:
    if text == "":
        return ()
    labels = []
    for part in text.split("."):
        a = Atom(part) if part else None
        if a is None or a not in alphabet:
            raise _CliError(flag, f"label {part!r} is not in the alphabet")
        labels.append(a)
    return tuple(labels)


def _alphabet_flag(args: argparse.Namespace) -> FinSet:
    names = [s for s in (args.alphabet or "").split(",") if s]
    if not names:
        raise _CliError("--alphabet", "a comma-separated list of labels is required")
    return FinSet(Atom(n) for n in names)


def _functor_flag(args: argparse.Namespace):
    spec = {"kind": args.functor, "alphabet": (args.alphabet or "").split(",")}
    if args.functor in ("label-id", "label-id-term"):
        _alphabet_flag(args)
        return functor_from_json(spec)
    if args.functor == "id":
        return functor_from_json({"kind": "id"})
    raise _CliError("--functor", f"unknown functor shape {args.functor!r}")


def _sampler(args: argparse.Namespace) -> SamplerConfig:
    return SamplerConfig(
        denominator_bound=args.denominator_bound,
        seed=args.seed,
    )


def _morphism_for(args: argparse.Namespace, kind: EffectKind, functor):
    via = args.via
    if via == "support":
        theta = support_morphism()
        upsilon = identity_endo_morphism(functor)
    elif via == "inclusion":
        theta = inclusion_morphism()
        upsilon = identity_endo_morphism(functor)
    elif via.startswith("relabel:"):
        table, _ = _read_json(via.split(":", 1)[1])
        if not isinstance(table, dict) or not table:
            raise _CliError("--via", "relabel files map label names to label names")
        alphabet = match_label_id(functor)
        if alphabet is None:
            raise _CliError("--via", "relabelling needs a plain labelled functor")
        codomain = FinSet(Atom(str(v)) for v in table.values())
        graph = {Atom(str(k)): Atom(str(v)) for k, v in table.items()}
        if FinSet(graph) != alphabet:
            raise _CliError("--via", "relabel file must cover the alphabet exactly")
        theta = identity_monad_morphism(kind)
        upsilon = relabel_morphism(FinMap(alphabet, codomain, graph))
    else:
        raise _CliError("--via", f"unknown morphism {via!r}")
    if theta.source is not kind:
        raise _CliError(
            "--via", f"{via} starts from {theta.source.json_name}, not {kind.json_name}"
        )
    return theta, upsilon


def _render(payload: dict, fmt: str, out: IO[str]) -> None:
    if fmt == "json":
        out.write(json.dumps(payload, indent=2) + "\n")
        return
    if fmt == "table":
        _render_table(payload, out)
        return
    if fmt == "dot":
        _render_dot(payload, out)
        return
    raise _CliError("--format", f"unknown format {fmt!r}")


def _render_table(payload: dict, out: IO[str]) -> None:
    status = payload.get("status")
    out.write(f"status: {status}\n")
    for key, value in payload.items():
        if key in ("status", "witnesses", "meta"):
            continue
        if isinstance(value, (str, int, float, bool)) or value is None:
            out.write(f"{key}: {value}\n")
    table = payload.get("table")
    if isinstance(table, dict):
        for state, stages in table.get("states", {}).items():
            for n, cell in enumerate(stages):
                body = cell.get("set")
                if body is None:
                    dist = cell.get("dist", {})
                    body = [f"{k}:{v}" for k, v in dist.items()]
                rendered = ", ".join(s if s else "<empty word>" for s in body)
                out.write(f"{state}\tstage {n}\t{{{rendered}}}\n")
    partitions = payload.get("partitions")
    if isinstance(partitions, list):
        for p in partitions:
            blocks = " | ".join(",".join(b) for b in p["blocks"])
            out.write(f"stage {p['stage']}\t{blocks}\n")
    for w in payload.get("witnesses", []):
        body = "; ".join(f"{k}={v}" for k, v in w.items())
        out.write(f"witness: {body}\n")


def _render_dot(payload: dict, out: IO[str]) -> None:
    system = payload.get("system")
    if system is None:
        raise _CliError("--format", "dot output needs a system-based command")
    lines = ["digraph system {", "  rankdir=LR;"]
    partitions = payload.get("partitions")
    if partitions:
        deepest = partitions[-1]
        for i, block in enumerate(deepest["blocks"]):
            lines.append(f"  subgraph cluster_{i} {{")
            lines.append(f'    label="stage {deepest["stage"]} block {i}";')
            for name in block:
                lines.append(f'    "{name}";')
            lines.append("  }")
    else:
        for name in system["states"]:
            lines.append(f'  "{name}";')
    terminated = system["functor"].get("kind") == "label-id-term"
    if terminated:
        lines.append('  "$stop" [shape=point];')
    for state, rows in system["transitions"].items():
        for row in rows:
            label = row.get("label", "$")
            if "weight" in row:
                label = f"{label} {row['weight']}"
            target = f'"{row["target"]}"' if "target" in row else '"$stop"'
            lines.append(f'  "{state}" -> {target} [label="{label}"];')
    lines.append("}")
    out.write("\n".join(lines) + "\n")


def _finish(
    payload: dict, report_status: str, fmt: str, out: IO[str]
) -> int:
    payload["status"] = report_status
    _render(payload, fmt, out)
    if report_status == "fail":
        return 1
    return 0


def _report_payload(report: Report, meta: dict, **extra) -> dict:
    payload = {"status": report.status, "witnesses": [dict(w) for w in report.witnesses]}
    payload.update(extra)
    payload["stats"] = dict(report.stats)
    payload["meta"] = meta
    return payload


# ---------------------------------------------------------------------------
# Commands

def _cmd_check_laws(args: argparse.Namespace, out: IO[str]) -> int:
    kind = EffectKind.from_json_name(args.monad)
    functor = _functor_flag(args)
    cfg = _sampler(args)
    monad_report = check_monad_laws(kind, args.max_base, cfg)
    law = canonical_law(kind, functor)
    axiom_report = check_law_axioms(law, args.max_base, cfg)
    witnesses = [
        {"suite": "monad-laws", **w} for w in monad_report.witnesses
    ] + [{"suite": "law-axioms", **w} for w in axiom_report.witnesses]
    status = "pass" if monad_report.ok and axiom_report.ok else "fail"
    payload = {
        "status": status,
        "witnesses": witnesses,
        "stats": {
            "monad-laws": dict(monad_report.stats),
            "law-axioms": dict(axiom_report.stats),
        },
        "meta": _meta(args, []),
    }
    return _finish(payload, status, args.format, out)


def _cmd_check_omega(args: argparse.Namespace, out: IO[str]) -> int:
    kind = EffectKind.from_json_name(args.monad)
    functor = _functor_flag(args)
    law = canonical_law(kind, functor)
    report = check_omega_suitable(law, args.max_base, _sampler(args))
    payload = _report_payload(report, _meta(args, []))
    return _finish(payload, report.status, args.format, out)


def _laws_for_morphism(args, theta, upsilon) -> tuple[LawSpec, LawSpec]:
    law = canonical_law(theta.source, upsilon.source)
    law2 = canonical_law(theta.target, upsilon.target)
    return law, law2


def _cmd_check_morphism(args: argparse.Namespace, out: IO[str]) -> int:
    kind = EffectKind.from_json_name(args.monad)
    functor = _functor_flag(args)
    theta, upsilon = _morphism_for(args, kind, functor)
    law, law2 = _laws_for_morphism(args, theta, upsilon)
    report = check_morphism(theta, upsilon, law, law2, args.max_base, _sampler(args))
    payload = _report_payload(report, _meta(args, []))
    return _finish(payload, report.status, args.format, out)


def _cmd_transform(args: argparse.Namespace, out: IO[str]) -> int:
    system, raw = _load_system(args.system)
    theta, upsilon = _morphism_for(args, system.kind, system.functor)
    morphism_check = "skipped"
    if not args.unchecked:
        law, law2 = _laws_for_morphism(args, theta, upsilon)
        report = check_morphism(theta, upsilon, law, law2, args.max_base, _sampler(args))
        morphism_check = report.status
        if not report.ok:
            payload = _report_payload(report, _meta(args, [raw]))
            return _finish(payload, "fail", args.format, out)
    transformed = transform_system(theta, upsilon, system)
    payload = {
        "status": "info",
        "witnesses": [],
        "morphism_check": morphism_check,
        "system": system_to_json(transformed),
        "meta": _meta(args, [raw]),
    }
    return _finish(payload, "info", args.format, out)


def _state_flag(system: System, name: str | None, flag: str = "--state") -> Atom:
    if name is None:
        raise _CliError(flag, "a state name is required")
    state = Atom(name)
    if state not in system.states:
        raise _CliError(flag, f"unknown state {name!r}")
    return state


def _cmd_traces(args: argparse.Namespace, out: IO[str]) -> int:
    system, raw = _load_system(args.system)
    table = stage_semantics(system, args.depth)
    only = _state_flag(system, args.state) if args.state else None
    payload = {
        "status": "info",
        "witnesses": [],
        "table": trace_table_to_json(table, only),
        "system": system_to_json(system),
        "meta": _meta(args, [raw]),
    }
    return _finish(payload, "info", args.format, out)


def _cmd_coherence(args: argparse.Namespace, out: IO[str]) -> int:
    system, raw = _load_system(args.system)
    table = stage_semantics(system, args.depth)
    report = check_coherence(table)
    payload = _report_payload(report, _meta(args, [raw]), system=system_to_json(system))
    return _finish(payload, report.status, args.format, out)


def _cmd_equiv(args: argparse.Namespace, out: IO[str]) -> int:
    system, raw = _load_system(args.system)
    table = stage_semantics(system, args.depth)
    result = equiv_partitions(table)
    partitions = [
        {
            "stage": p.stage,
            "blocks": [[x.name for x in block] for block in p.blocks],
        }
        for p in result.partitions
    ]
    status = "info" if result.ok else "fail"
    payload = {
        "status": status,
        "witnesses": [dict(w) for w in result.refinement_violations],
        "partitions": partitions,
        "system": system_to_json(system),
        "meta": _meta(args, [raw]),
    }
    return _finish(payload, status, args.format, out)


def _cmd_metric(args: argparse.Namespace, out: IO[str]) -> int:
    system, raw = _load_system(args.system)
    if not args.pair or "," not in args.pair:
        raise _CliError("--pair", "two comma-separated state names are required")
    left, right = args.pair.split(",", 1)
    x = _state_flag(system, left, "--pair")
    y = _state_flag(system, right, "--pair")
    table = stage_semantics(system, args.depth)
    result = pseudo_metric(table, x, y)
    payload = {
        "status": "info",
        "witnesses": [],
        "pair": [x.name, y.name],
        "exact": result.exact,
        "value": fraction_to_str(result.value),
        "agree_depth": result.agree_depth,
        "system": system_to_json(system),
        "meta": _meta(args, [raw]),
    }
    return _finish(payload, "info", args.format, out)


def _cmd_omega_member(args: argparse.Namespace, out: IO[str]) -> int:
    system, raw = _load_system(args.system)
    x = _state_flag(system, args.state)
    alphabet = match_label_id(system.functor) or match_label_id_term(system.functor)
    if alphabet is None:
        raise _CliError("system", "omega membership needs a labelled functor")
    if args.lasso is None or "," not in args.lasso:
        raise _CliError("--lasso", "expected 'u,v' with dot-separated labels")
    u_text, v_text = args.lasso.split(",", 1)
    u = _parse_labels(u_text, alphabet, "--lasso")
    v = _parse_labels(v_text, alphabet, "--lasso")
    if not v:
        raise _CliError("--lasso", "the loop word must be non-empty")
    result = lasso_membership(system, x, u, v)
    consistency = verify_omega_consistency(system, x, u, v, args.depth)
    certificate: dict[str, Any] = {}
    if result.member:
        certificate["stem"] = [[y.name, pos] for y, pos in result.stem]
        certificate["cycle"] = [[y.name, pos] for y, pos in result.cycle]
    else:
        certificate["refuting_depth"] = result.refuting_depth
    status = "info" if consistency.ok else "fail"
    payload = {
        "status": status,
        "witnesses": [dict(w) for w in consistency.witnesses],
        "member": result.member,
        "certificate": certificate,
        "consistency": dict(consistency.stats),
        "system": system_to_json(system),
        "meta": _meta(args, [raw]),
    }
    return _finish(payload, status, args.format, out)


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kltrace",
        description="stage-indexed trace semantics for finite branching systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, system_input: bool) -> None:
        p.add_argument("--format", choices=["json", "table", "dot"], default="json")
        p.add_argument("--depth", type=int, default=6)
        p.add_argument("--max-base", type=int, default=2, dest="max_base")
        p.add_argument(
            "--denominator-bound", type=int, default=3, dest="denominator_bound"
        )
        p.add_argument("--seed", type=int, default=0)
        if system_input:
            p.add_argument("system", help="system description (JSON file)")
        else:
            p.add_argument("--monad", required=True)
            p.add_argument("--functor", default="label-id")
            p.add_argument("--alphabet", default="a,b")

    p = sub.add_parser("check-laws", help="monad laws plus distributive-law axioms")
    common(p, system_input=False)
    p.set_defaults(func=_cmd_check_laws)

    p = sub.add_parser("check-omega", help="the stagewise-extension square")
    common(p, system_input=False)
    p.set_defaults(func=_cmd_check_omega)

    p = sub.add_parser("check-morphism", help="coherence of a law morphism")
    common(p, system_input=False)
    p.add_argument("--via", required=True, help="support | inclusion | relabel:FILE")
    p.set_defaults(func=_cmd_check_morphism)

    p = sub.add_parser("transform", help="carry a system along a law morphism")
    common(p, system_input=True)
    p.add_argument("--via", required=True, help="support | inclusion | relabel:FILE")
    p.add_argument("--unchecked", action="store_true")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("traces", help="stage-indexed trace semantics")
    common(p, system_input=True)
    p.add_argument("--state", default=None)
    p.set_defaults(func=_cmd_traces)

    p = sub.add_parser("coherence", help="restriction agreement between stages")
    common(p, system_input=True)
    p.set_defaults(func=_cmd_coherence)

    p = sub.add_parser("equiv", help="stagewise equivalence partitions")
    common(p, system_input=True)
    p.set_defaults(func=_cmd_equiv)

    p = sub.add_parser("metric", help="behavioural distance of a state pair")
    common(p, system_input=True)
    p.add_argument("--pair", required=True, help="X,Y")
    p.set_defaults(func=_cmd_metric)

    p = sub.add_parser("omega-member", help="ultimately periodic word membership")
    common(p, system_input=True)
    p.add_argument("--state", default=None)
    p.add_argument("--lasso", required=True, help="'u,v' with dot-separated labels")
    p.set_defaults(func=_cmd_omega_member)

    return parser


def main(argv: Sequence[str] | None = None, out: IO[str] | None = None) -> int:
    out = out if out is not None else sys.stdout
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args, out)
    except (SchemaError, InvariantError, _CliError) as exc:
        kind = "invariant" if isinstance(exc, InvariantError) else "schema"
        payload = {
            "status": "error",
            "error": {
                "type": kind,
                "location": getattr(exc, "path", getattr(exc, "location", "$")),
                "reason": getattr(exc, "reason", str(exc)),
            },
        }
        out.write(json.dumps(payload, indent=2) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
