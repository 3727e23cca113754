"""Model files and JSON reports.

Model file syntax, one statement per line, ``#`` starts a comment::

    var x1 in 1..4 from "z1"      # optional evidence label, a JSON string
    var x2 in {1, 2, 3, 4}        # explicit value list, for non-contiguous domains
    dist x1 = [0.9, 0.1, 0, 0]
    dist x2 = [0.249667, 0.249667, 0.249666, 0.251]
    constraint x1 + x2 = 5

All ``var`` lines come first, then one ``dist`` per variable, then exactly one
``constraint``.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from pathlib import Path

from ._version import __version__
from .errors import (
    ArityError,
    DuplicateName,
    FileSyntaxError,
    FormulaSyntaxError,
    SymcascadeError,
    UnknownVariable,
)
from .formula import parse, to_text
from .model import CategoricalDist, DomainSpec, Model, VariableDecl, build_model

SCHEMA_VERSION = 1

_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_INT = r"[+-]?[0-9]+"
_NUMBER = re.compile(r"\s*([+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)\s*\Z")
_VAR = re.compile(
    rf"var\s+(?P<name>\S+)\s+in\s+(?:(?P<lo>{_INT})\s*\.\.\s*(?P<hi>{_INT})|\{{(?P<values>[^}}]*)\}})"
    r'(?:\s+from\s+(?P<label>"(?:[^"\\]|\\.)*"))?\s*\Z'
)
_DIST = re.compile(rf"dist\s+(?P<name>\S+)\s*=\s*\[(?P<probs>[^\]]*)\]\s*\Z")
_STRING_OR_COMMENT = re.compile(r'"(?:[^"\\]|\\.)*"|#')


def _strip_comment(line: str) -> str:
    for m in _STRING_OR_COMMENT.finditer(line):
        if m.group() == "#":
            return line[: m.start()]
    return line


def _located(exc: SymcascadeError, line: int) -> SymcascadeError:
    exc.line = line
    exc.args = (f"line {line}: {exc}",)
    return exc


def load_model(text: str) -> Model:
    """Parse model-file text into a validated :class:`Model`.

    Structural problems raise :class:`FileSyntaxError`; content problems raise
    the same errors as :func:`build_model` and :func:`parse`, with a ``line``
    attribute and the line number in the message.
    """
    decls: list[VariableDecl] = []
    decl_lines: dict[str, int] = {}
    dists: dict[str, CategoricalDist] = {}
    constraint = None
    constraint_line = 0
    stage = 0  # 0 vars, 1 dists, 2 constraint seen
    last = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        last = lineno
        line = _strip_comment(raw)
        body = line.strip()
        if not body:
            continue
        col = len(line) - len(line.lstrip()) + 1
        keyword = body.split(None, 1)[0]
        if stage == 2:
            raise FileSyntaxError("nothing may follow the constraint statement", lineno, col)

        if keyword == "var":
            if stage > 0:
                raise FileSyntaxError("'var' statements must precede all 'dist' statements", lineno, col)
            m = _VAR.match(body)
            if m is None:
                raise FileSyntaxError(
                    "expected 'var <name> in <lo>..<hi>' or 'var <name> in {v, ...}'", lineno, col
                )
            name = m["name"]
            try:
                if m["values"] is not None:
                    items = [s.strip() for s in m["values"].split(",")]
                    if not all(re.fullmatch(_INT, s) for s in items):
                        raise FileSyntaxError("domain values must be integers", lineno, col)
                    domain = DomainSpec(tuple(int(s) for s in items))
                else:
                    domain = DomainSpec.range(int(m["lo"]), int(m["hi"]))
                label = json.loads(m["label"]) if m["label"] else None
                if name in decl_lines:
                    raise DuplicateName(f"variable {name!r} declared twice")
                decls.append(VariableDecl(name, domain, label))
            except FileSyntaxError:
                raise
            except SymcascadeError as exc:
                raise _located(exc, lineno) from None
            decl_lines[name] = lineno

        elif keyword == "dist":
            if stage == 0 and not decls:
                raise FileSyntaxError("'dist' before any 'var' statement", lineno, col)
            stage = 1
            m = _DIST.match(body)
            if m is None:
                raise FileSyntaxError("expected 'dist <name> = [p, p, ...]'", lineno, col)
            name = m["name"]
            if name not in decl_lines:
                raise _located(UnknownVariable(f"'dist' for undeclared variable {name!r}"), lineno)
            if name in dists:
                raise FileSyntaxError(f"second 'dist' for {name}", lineno, col)
            probs = []
            for item in m["probs"].split(","):
                num = _NUMBER.match(item)
                if num is None:
                    raise FileSyntaxError(
                        f"expected a decimal probability, found {item.strip()!r}", lineno,
                        line.find("[") + 2,
                    )
                probs.append(float(num.group(1)))
            decl = decls[list(decl_lines).index(name)]
            if len(probs) != len(decl.domain):
                raise _located(
                    ArityError(
                        f"dist {name} has {len(probs)} entries, domain has {len(decl.domain)} values"
                    ),
                    lineno,
                )
            try:
                dists[name] = CategoricalDist(tuple(probs))
            except SymcascadeError as exc:
                raise _located(exc, lineno) from None

        elif keyword == "constraint":
            if stage == 0:
                raise FileSyntaxError("'constraint' before the 'dist' statements", lineno, col)
            stage = 2
            start = line.index("constraint") + len("constraint")
            source = line[start:]
            try:
                constraint = parse(source)
            except FormulaSyntaxError as exc:
                # diagnostic offsets are bytes into the constraint text
                prefix = source.encode("utf-8")[: exc.diagnostic.offset].decode("utf-8", "replace")
                exc.column = start + len(prefix) + 1
                raise _located(exc, lineno) from None
            constraint_line = lineno
        else:
            raise FileSyntaxError(f"unknown statement {keyword!r}", lineno, col)

    missing = [d.name for d in decls if d.name not in dists]
    if constraint is None:
        raise FileSyntaxError("missing 'constraint' statement", last + 1)
    if missing:
        raise FileSyntaxError(f"no 'dist' for {', '.join(missing)}", constraint_line)
    try:
        return build_model(decls, [dists[d.name] for d in decls], constraint)
    except SymcascadeError as exc:
        raise _located(exc, constraint_line) from None


def read_model(path: str | Path) -> Model:
    return load_model(Path(path).read_text(encoding="utf-8"))


def _domain_text(domain: DomainSpec) -> str:
    values = domain.values
    if domain.is_contiguous and len(values) > 1:
        return f"{values[0]}..{values[-1]}"
    return "{" + ", ".join(map(str, values)) + "}"


def dump_model(model: Model) -> str:
    """Canonical text form: declaration order, single spaces, shortest round-trip floats."""
    lines = []
    for v in model.variables:
        line = f"var {v.name} in {_domain_text(v.domain)}"
        if v.evidence_label is not None:
            line += f" from {json.dumps(v.evidence_label)}"
        lines.append(line)
    for v, d in zip(model.variables, model.dists):
        lines.append(f"dist {v.name} = [{', '.join(repr(p) for p in d.probs)}]")
    lines.append(f"constraint {to_text(model.constraint)}")
    return "\n".join(lines) + "\n"


def model_digest(model: Model) -> str:
    return "sha256:" + hashlib.sha256(dump_model(model).encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def finite_or_none(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def make_report(command: list[str], model: Model | None, result: dict) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "tool": "symcascade",
        "version": __version__,
        "command": list(command),
        "model_digest": model_digest(model) if model is not None else None,
        "result": result,
    }


def error_report(exc: BaseException, exit_code: int) -> dict:
    error = {"type": type(exc).__name__, "message": str(exc), "exit_code": exit_code}
    for attr in ("line", "column"):
        if getattr(exc, attr, None) is not None:
            error[attr] = getattr(exc, attr)
    diagnostic = getattr(exc, "diagnostic", None)
    if diagnostic is not None:
        error["offset"] = diagnostic.offset
    return {"schema": SCHEMA_VERSION, "tool": "symcascade", "version": __version__, "error": error}


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False)


def report_schema() -> dict:
    return json.loads((Path(__file__).parent / "report.schema.json").read_text(encoding="utf-8"))
