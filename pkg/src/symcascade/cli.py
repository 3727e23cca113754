"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 model or parse error, 3 inference error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence, TextIO

from . import fixtures
from ._version import __version__
from .adversary import AttackResult, CascadeReport, Norm, cascade_report, minimal_flip_radius, stability_radius
from .errors import (
    FileSyntaxError,
    FormulaSyntaxError,
    IntegerOverflow,
    ModelError,
    ModelMismatch,
    SimplexViolation,
    ZeroPartition,
)
from .formula import enumerate_models
from .inference import PosteriorResult, map_constrained, map_unconstrained, partition_z
from .io import error_report, finite_or_none, make_report, read_model, to_json
from .model import Model

MODEL_ERRORS = (FileSyntaxError, FormulaSyntaxError, ModelError, SimplexViolation, ModelMismatch)
INFERENCE_ERRORS = (ZeroPartition, IntegerOverflow)


class UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fmt(p: float) -> str:
    return f"{p:.6g}"


def _named(model: Model, x) -> dict:
    return dict(zip(model.names, (int(v) for v in x)))


def _show(model: Model, x) -> str:
    return " ".join(f"{n}={v}" for n, v in zip(model.names, x))


def _names(model: Model, indices) -> list[str]:
    return [model.names[i] for i in sorted(indices)]


def _show_dist(probs) -> str:
    return "[" + ", ".join(_fmt(p) for p in probs) + "]"


# payloads ---------------------------------------------------------------


def _map_payload(model: Model, res: PosteriorResult, constrained: bool) -> dict:
    payload = {
        "kind": "map",
        "constrained": constrained,
        "assignment": _named(model, res.assignment),
        "probability": res.probability,
    }
    if constrained:
        z = partition_z(model)
        payload["partition"] = {"z": z.z, "satisfying_count": z.satisfying_count}
    return payload


def _attack_payload(model: Model, res: AttackResult) -> dict:
    return {
        "kind": "attack",
        "var": model.names[res.var],
        "norm": res.norm.value,
        "feasible": res.feasible,
        "radius": finite_or_none(res.radius),
        "witness": list(res.witness.probs) if res.witness is not None else None,
        "clean_map": _named(model, res.clean_map),
        "flipped_map": _named(model, res.flipped_map) if res.flipped_map is not None else None,
        "target": _named(model, res.target) if res.target is not None else None,
    }


def _cascade_payload(model: Model, rep: CascadeReport) -> dict:
    return {
        "kind": "cascade",
        "attacked_var": model.names[rep.attacked_var],
        "clean_map": {"assignment": _named(model, rep.clean_map), "probability": rep.clean_map_prob},
        "attacked_map": {"assignment": _named(model, rep.attacked_map), "probability": rep.attacked_map_prob},
        "clean_umap": {"assignment": _named(model, rep.clean_umap), "probability": rep.clean_umap_prob},
        "attacked_umap": {"assignment": _named(model, rep.attacked_umap), "probability": rep.attacked_umap_prob},
        "flipped_constrained": _names(model, rep.flipped_constrained),
        "flipped_unconstrained": _names(model, rep.flipped_unconstrained),
        "collateral": _names(model, rep.collateral),
        "cascades": rep.cascades,
    }


# human-readable ---------------------------------------------------------


def _attack_lines(model: Model, res: AttackResult) -> list[str]:
    head = f"attack on {model.names[res.var]} ({res.norm.value})"
    if res.target is not None:
        head += f" targeting {_show(model, res.target)}"
    if not res.feasible:
        return [f"{head}: infeasible; MAP {_show(model, res.clean_map)} cannot be changed this way"]
    return [
        f"{head}: radius≈{_fmt(res.radius)}, MAP {_show(model, res.clean_map)} -> {_show(model, res.flipped_map)}",
        f"witness {model.names[res.var]} = {_show_dist(res.witness.probs)}",
    ]


def _cascade_lines(model: Model, rep: CascadeReport) -> list[str]:
    def members(indices):
        return " ".join(_names(model, indices)) or "none"

    return [
        f"clean    MAP (unconstrained): {_show(model, rep.clean_umap)}, p≈{_fmt(rep.clean_umap_prob)}",
        f"clean    MAP (constrained):   {_show(model, rep.clean_map)}, p≈{_fmt(rep.clean_map_prob)}",
        f"attacked MAP (unconstrained): {_show(model, rep.attacked_umap)}, p≈{_fmt(rep.attacked_umap_prob)}",
        f"attacked MAP (constrained):   {_show(model, rep.attacked_map)}, p≈{_fmt(rep.attacked_map_prob)}",
        f"flipped (unconstrained): {members(rep.flipped_unconstrained)}",
        f"flipped (constrained): {members(rep.flipped_constrained)}",
        f"collateral: {members(rep.collateral)}",
    ]


# commands ---------------------------------------------------------------


def _parse_target(model: Model, text: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        if parts and all("=" in p for p in parts):
            pairs = dict((k.strip(), int(v)) for k, v in (p.split("=", 1) for p in parts))
            if set(pairs) != set(model.names):
                raise UsageError(f"--target must assign every variable: {', '.join(model.names)}")
            return model.check_assignment([pairs[n] for n in model.names])
        return model.check_assignment([int(p) for p in parts])
    except ValueError as exc:
        if isinstance(exc, ModelError):
            raise
        raise UsageError(f"cannot parse --target {text!r}") from None


def _parse_probs(text: str) -> list[float]:
    try:
        return [float(p) for p in text.strip("[]").split(",")]
    except ValueError:
        raise UsageError(f"cannot parse --dist {text!r}") from None


def _cmd_solve(args):
    model = read_model(args.file)
    if args.unconstrained:
        res = map_unconstrained(model)
        text = [f"MAP (unconstrained): {_show(model, res.assignment)}, p≈{_fmt(res.probability)}"]
    else:
        res = map_constrained(model)
        z = partition_z(model)
        text = [
            f"MAP (constrained): {_show(model, res.assignment)}, p≈{_fmt(res.probability)}",
            f"Z≈{_fmt(z.clamped)} over {z.satisfying_count} satisfying assignments",
        ]
    return model, _map_payload(model, res, not args.unconstrained), text


def _cmd_models(args):
    model = read_model(args.file)
    found = enumerate_models(model.constraint, model)
    text = [_show(model, x) for x in found] + [f"{len(found)} satisfying assignments"]
    payload = {"kind": "models", "count": len(found), "assignments": [_named(model, x) for x in found]}
    return model, payload, text


def _cmd_attack(args):
    model = read_model(args.file)
    target = _parse_target(model, args.target) if args.target else None
    res = minimal_flip_radius(model, args.var, args.norm, target)
    return model, _attack_payload(model, res), _attack_lines(model, res)


def _cmd_radius(args):
    model = read_model(args.file)
    st = stability_radius(model, args.norm)
    payload = {
        "kind": "stability",
        "norm": Norm.parse(args.norm).value,
        "feasible": st.feasible,
        "radius": finite_or_none(st.radius),
        "weakest_var": model.names[st.weakest_var] if st.feasible else None,
        "attack": _attack_payload(model, st.result) if st.feasible else None,
    }
    if st.feasible:
        text = [f"stability radius ({args.norm}): {_fmt(st.radius)} at {model.names[st.weakest_var]}"]
        text += _attack_lines(model, st.result)
    else:
        text = [f"stability radius ({args.norm}): infinite; no single variable can change the MAP"]
    return model, payload, text


def _cmd_cascade(args):
    model = read_model(args.file)
    attacked = model.with_dist(args.var, _parse_probs(args.dist))
    rep = cascade_report(model, attacked, args.var)
    return model, _cascade_payload(model, rep), _cascade_lines(model, rep)


def _cmd_paper_example(args):
    clean = fixtures.addition_model(args.epsilon)
    attacked = fixtures.attacked_addition_model(args.epsilon)
    rep = cascade_report(clean, attacked, 0)
    payload = {
        "kind": "paper-example",
        "epsilon": args.epsilon,
        "dists": {"x1": list(clean.dists[0].probs), "x2": list(clean.dists[1].probs)},
        "attacked_x1": list(attacked.dists[0].probs),
        "cascade": _cascade_payload(clean, rep),
    }
    text = [
        f"addition example, epsilon = {args.epsilon}",
        f"x1 = {_show_dist(clean.dists[0].probs)}, x2 = {_show_dist(clean.dists[1].probs)}",
        f"attack: x1 -> {_show_dist(attacked.dists[0].probs)}",
    ] + _cascade_lines(clean, rep)
    return clean, payload, text


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="symcascade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--json", action="store_true", help="emit a JSON report")
    common = _ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="emit a JSON report")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("solve", parents=[common], help="MAP assignment and its probability")
    p.add_argument("file")
    p.add_argument("--unconstrained", action="store_true", help="ignore the constraint")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("models", parents=[common], help="list satisfying assignments")
    p.add_argument("file")
    p.set_defaults(func=_cmd_models)

    p = sub.add_parser("attack", parents=[common], help="minimal flip of one variable")
    p.add_argument("file")
    p.add_argument("--var", required=True)
    p.add_argument("--norm", choices=["tv", "linf"], default="tv")
    p.add_argument("--target", help="assignment to force, e.g. 2,3 or x1=2,x2=3")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("radius", parents=[common], help="stability radius over all variables")
    p.add_argument("file")
    p.add_argument("--norm", choices=["tv", "linf"], default="tv")
    p.set_defaults(func=_cmd_radius)

    p = sub.add_parser("cascade", parents=[common], help="replace one dist and compare MAPs")
    p.add_argument("file")
    p.add_argument("--var", required=True)
    p.add_argument("--dist", required=True, help="comma-separated probabilities")
    p.set_defaults(func=_cmd_cascade)

    p = sub.add_parser("paper-example", parents=[common], help="reproduce the addition example")
    p.add_argument("--epsilon", type=float, default=fixtures.EPSILON)
    p.set_defaults(func=_cmd_paper_example)
    return parser


def run(argv: Sequence[str], stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(argv)
    as_json = "--json" in argv

    def fail(exc: BaseException, code: int) -> int:
        if as_json:
            print(json.dumps(error_report(exc, code)), file=stderr)
        else:
            print(f"error: {exc}", file=stderr)
        return code

    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        if not as_json:
            print(exc, file=stderr)
            return 1
        return fail(exc, 1)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    try:
        model, payload, text = args.func(args)
    except UsageError as exc:
        return fail(exc, 1)
    except OSError as exc:
        return fail(FileNotFoundError(f"cannot read model file {args.file!r}: {exc.strerror}"), 2)
    except UnicodeDecodeError as exc:
        return fail(exc, 2)
    except MODEL_ERRORS as exc:
        return fail(exc, 2)
    except INFERENCE_ERRORS as exc:
        return fail(exc, 3)

    if args.json:
        print(to_json(make_report(argv, model, payload)), file=stdout)
    else:
        print("\n".join(text), file=stdout)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)
