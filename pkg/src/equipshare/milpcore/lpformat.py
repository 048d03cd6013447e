"""Reading and writing the CPLEX-style LP text format.

Coefficients are written as exact decimals. A row whose coefficients include
a non-terminating rational (e.g. 1/3) is multiplied through by the least
common denominator first, which keeps the row exact. The objective is handled
the same way, and the factor is recorded in an ``\\ objective scale`` comment
so readers can divide it back out.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Sequence, TextIO

from ..rational import decimal_str, is_terminating, to_fraction
from .model import BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, MILPModel

LINE_WIDTH = 200
SCALE_COMMENT = "\\ objective scale:"


class LPFormatError(ValueError):
    pass


def _row_scale(coefs) -> int:
    scale = 1
    for v in coefs:
        if isinstance(v, Fraction) and v.denominator != 1 and not is_terminating(v):
            scale = scale * v.denominator // math.gcd(scale, v.denominator)
    return scale


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return decimal_str(v)


def _expr(parts: list[str], terms, names, scale: int) -> None:
    first = True
    for c, v in terms:
        if scale != 1:
            v = v * scale
        neg = v < 0
        mag = -v if neg else v
        coef = "" if mag == 1 else _fmt(mag) + " "
        if first:
            parts.append(("- " if neg else "") + coef + names[c])
            first = False
        else:
            parts.append(("- " if neg else "+ ") + coef + names[c])


def _wrap(head: str, parts: list[str], out: list[str]) -> None:
    line = head
    for p in parts:
        if len(line) + 1 + len(p) > LINE_WIDTH and line.strip():
            out.append(line)
            line = "   " + p
        else:
            line = line + " " + p if line else p
    out.append(line)


def write_lp(model: MILPModel, fh: TextIO | None = None, comments: Sequence[str] = ()) -> str | None:
    """Write ``model``; returns the text when no file handle is given.

    ``comments`` become backslash comment lines after the model name.
    """
    model.validate()
    names = model.var_names
    out: list[str] = [f"\\ Model {model.name}"]
    out.extend(f"\\ {c}" for c in comments)
    obj_terms = list(model.objective.items())
    oscale = _row_scale([v for _c, v in obj_terms] + [model.obj_constant])
    if oscale != 1:
        out.append(f"{SCALE_COMMENT} {oscale}")
    out.append("Minimize")
    parts: list[str] = []
    _expr(parts, obj_terms, names, oscale)
    const = model.obj_constant * oscale
    if const != 0 or not parts:
        if parts:
            parts.append(("- " if const < 0 else "+ ") + _fmt(abs(const)))
        else:
            parts.append(_fmt(const))
    _wrap(" obj:", parts, out)
    out.append("Subject To")
    senses = {LE: "<=", GE: ">=", EQ: "="}
    sink = fh
    buf = out
    for r in range(model.num_rows):
        cols, coefs = model.row(r)
        scale = _row_scale(list(coefs) + [model.rhs[r]])
        rhs = model.rhs[r] * scale
        parts = []
        _expr(parts, zip(cols, coefs), names, scale)
        if not parts:
            parts.append("0 " + names[0]) if names else parts.append("0")
        parts.append(senses[model.sense[r]])
        parts.append(_fmt(rhs))
        _wrap(f" {model.row_names[r]}:", parts, buf)
        if sink is not None and len(buf) > 50000:
            sink.write("\n".join(buf) + "\n")
            buf.clear()
    out = buf
    out.append("Bounds")
    generals, binaries = [], []
    for j, name in enumerate(names):
        lo, hi, kind = model.lb[j], model.ub[j], model.kind[j]
        if kind == BINARY and lo == 0 and hi == 1:
            binaries.append(name)
        elif kind != CONTINUOUS:
            generals.append(name)
        if lo == -math.inf and hi == math.inf:
            out.append(f" {name} free")
        elif lo == hi:
            out.append(f" {name} = {_fmt(lo)}")
        elif lo != -math.inf and hi == math.inf:
            out.append(f" {name} >= {_fmt(lo)}")
        else:
            lo_s = "-inf" if lo == -math.inf else _fmt(lo)
            hi_s = "+inf" if hi == math.inf else _fmt(hi)
            out.append(f" {lo_s} <= {name} <= {hi_s}")
    if generals:
        out.append("Generals")
        _wrap("", generals, out)
    if binaries:
        out.append("Binaries")
        _wrap("", binaries, out)
    out.append("End")
    text = "\n".join(out) + "\n"
    if sink is not None:
        sink.write(text)
        return None
    return text


def save_lp(model: MILPModel, path, comments: Sequence[str] = ()) -> None:
    with open(path, "w", newline="\n") as fh:
        write_lp(model, fh, comments)


# --- reading -------------------------------------------------------------------

_SECTIONS = {
    "minimize": "obj",
    "minimum": "obj",
    "min": "obj",
    "maximize": "max",
    "maximum": "max",
    "max": "max",
    "subject to": "rows",
    "such that": "rows",
    "st": "rows",
    "s.t.": "rows",
    "bounds": "bounds",
    "bound": "bounds",
    "generals": "gen",
    "general": "gen",
    "gen": "gen",
    "integers": "gen",
    "binaries": "bin",
    "binary": "bin",
    "bin": "bin",
    "end": "end",
}

_TOKEN = re.compile(r"\s*(<=|>=|=<|=>|=|<|>|[+-]|[A-Za-z_][\w.\[\]]*|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)")


def _tokens(text: str) -> list[str]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise LPFormatError(f"cannot parse near {text[pos:pos + 20]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def _is_number(tok: str) -> bool:
    return tok[0].isdigit() or tok[0] == "."


def _linear(tokens: list[str]):
    """Parse 'c1 x1 + c2 x2 - 3' into (terms, constant)."""
    terms, const = [], Fraction(0)
    sign, coef = 1, None
    for tok in tokens:
        if tok in "+-":
            if coef is not None:
                const += sign * coef
                coef = None
            sign = sign * (-1 if tok == "-" else 1)
        elif _is_number(tok):
            coef = Fraction(tok) if coef is None else coef * Fraction(tok)
        else:
            terms.append((tok, sign * (coef if coef is not None else 1)))
            sign, coef = 1, None
    if coef is not None:
        const += sign * coef
    return terms, const


def read_lp(source: str | TextIO) -> MILPModel:
    text = source if isinstance(source, str) else source.read()
    model = MILPModel()
    oscale = Fraction(1)
    section = None
    stmts: dict[str, list[str]] = {k: [] for k in ("obj", "rows", "bounds", "gen", "bin")}
    for raw in text.splitlines():
        if raw.startswith(SCALE_COMMENT):
            oscale = Fraction(raw[len(SCALE_COMMENT):].strip())
            continue
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "max":
                raise LPFormatError("maximisation models are not supported")
            if section == "end":
                break
            continue
        if section is None:
            raise LPFormatError(f"content before any section: {line!r}")
        stmts[section].append(line)

    def statements(lines):
        # a new statement starts at a line with 'name:' or, for rows, after a completed sense + rhs
        joined = []
        for line in lines:
            if re.match(r"^\s*[A-Za-z_][\w.\[\]]*\s*:", line) or not joined:
                joined.append(line.strip())
            else:
                joined[-1] += " " + line.strip()
        return joined

    declared: dict[str, int] = {}

    def col(name):
        if name not in declared:
            declared[name] = model.add_var(name, 0, math.inf)
        return declared[name]

    def bound_value(tok: str):
        low = tok.lower()
        if low in ("inf", "+inf", "infinity", "+infinity"):
            return math.inf
        if low in ("-inf", "-infinity"):
            return -math.inf
        return Fraction(tok)

    def set_lb(j, v):
        return lambda: model.lb.__setitem__(j, v)

    def set_ub(j, v):
        return lambda: model.ub.__setitem__(j, v)

    # Bound lines come first so columns keep the writer's declaration order.
    bound_actions = []
    for line in stmts["bounds"]:
        s = line.strip()
        parts = s.split()
        if len(parts) == 2 and parts[1].lower() == "free":
            j = col(parts[0])
            bound_actions += [set_lb(j, -math.inf), set_ub(j, math.inf)]
            continue
        m = re.match(r"^(\S+)\s*(<=|>=|=<|=>|=)\s*(\S+)(?:\s*(<=|=<)\s*(\S+))?$", s)
        if not m:
            raise LPFormatError(f"cannot parse bound {s!r}")
        a, op, b, op2, c = m.groups()
        if op2:
            j = col(b)
            bound_actions += [set_lb(j, bound_value(a)), set_ub(j, bound_value(c))]
        elif op == "=":
            j = col(a)
            bound_actions += [set_lb(j, bound_value(b)), set_ub(j, bound_value(b))]
        else:
            a_is_var = bool(re.match(r"^[A-Za-z_]", a)) and a.lower() not in ("inf", "infinity")
            var, val = (a, b) if a_is_var else (b, a)
            j = col(var)
            le = op in ("<=", "=<")
            if not a_is_var:
                le = not le
            bound_actions.append(set_ub(j, bound_value(val)) if le else set_lb(j, bound_value(val)))

    obj_name = None
    obj_terms, obj_const = [], Fraction(0)
    for st in statements(stmts["obj"]):
        m = re.match(r"^\s*([A-Za-z_][\w.\[\]]*)\s*:(.*)$", st)
        body = m.group(2) if m else st
        obj_name = m.group(1) if m else obj_name
        t, c = _linear(_tokens(body))
        obj_terms += t
        obj_const += c
    pending_rows = []
    for st in statements(stmts["rows"]):
        m = re.match(r"^\s*([A-Za-z_][\w.\[\]]*)\s*:(.*)$", st)
        name, body = (m.group(1), m.group(2)) if m else (None, st)
        toks = _tokens(body)
        idx = next((k for k, t in enumerate(toks) if t in ("<=", ">=", "=", "<", ">", "=<", "=>")), None)
        if idx is None:
            raise LPFormatError(f"row without sense: {st!r}")
        sense = {"<=": LE, "<": LE, "=<": LE, ">=": GE, ">": GE, "=>": GE, "=": EQ}[toks[idx]]
        terms, const = _linear(toks[:idx])
        rterms, rconst = _linear(toks[idx + 1:])
        if rterms:
            raise LPFormatError(f"variables on the right-hand side: {st!r}")
        pending_rows.append((name, terms, sense, rconst - const))
    for name, terms, _sense, _rhs in pending_rows:
        for v, _c in terms:
            col(v)
    for v, _c in obj_terms:
        col(v)
    for name, terms, sense, rhs in pending_rows:
        model.add_constraint([(col(v), c) for v, c in terms], sense, rhs, name=name)
    model.set_objective([(col(v), c / oscale) for v, c in obj_terms], obj_const / oscale)

    for apply in bound_actions:
        apply()
    for line in stmts["gen"]:
        for name in line.split():
            model.kind[col(name)] = INTEGER
    for line in stmts["bin"]:
        for name in line.split():
            j = col(name)
            model.kind[j] = BINARY
            model.lb[j], model.ub[j] = max(model.lb[j], 0), min(model.ub[j], 1)
    for j in range(model.num_vars):
        for attr in ("lb", "ub"):
            v = getattr(model, attr)[j]
            if isinstance(v, Fraction) and v.denominator == 1:
                getattr(model, attr)[j] = v.numerator
    return model


def _same(u, v) -> bool:
    if u == v:
        return True
    if math.inf in (abs(u), abs(v)):
        return False
    # non-terminating bounds are written as 17-digit decimals
    return abs(to_fraction(u) - to_fraction(v)) <= Fraction(1, 10**12) * (1 + abs(to_fraction(u)))


def equivalent(a: MILPModel, b: MILPModel) -> list[str]:
    """Differences between two models up to positive row scaling; empty means equivalent."""
    diffs = []
    if a.var_names != b.var_names:
        return ["variable lists differ"]
    for j, name in enumerate(a.var_names):
        if not (_same(a.lb[j], b.lb[j]) and _same(a.ub[j], b.ub[j])):
            diffs.append(f"bounds of {name}")
        ka, kb = a.kind[j], b.kind[j]
        if (ka == CONTINUOUS) != (kb == CONTINUOUS):
            diffs.append(f"kind of {name}")
    if {k: to_fraction(v) for k, v in a.objective.items()} != {k: to_fraction(v) for k, v in b.objective.items()}:
        diffs.append("objective")
    if to_fraction(a.obj_constant) != to_fraction(b.obj_constant):
        diffs.append("objective constant")
    if a.num_rows != b.num_rows:
        return diffs + ["row count"]
    for r in range(a.num_rows):
        ca, va = a.row(r)
        cb, vb = b.row(r)
        da = dict(zip(ca, map(to_fraction, va)))
        db = dict(zip(cb, map(to_fraction, vb)))
        if a.sense[r] != b.sense[r] or set(da) != set(db):
            diffs.append(f"row {a.row_names[r]}")
            continue
        if not da:
            continue
        k = next(iter(da))
        ratio = db[k] / da[k]
        if ratio <= 0 or any(db[c] != ratio * da[c] for c in da) or to_fraction(b.rhs[r]) != ratio * to_fraction(a.rhs[r]):
            diffs.append(f"row {a.row_names[r]}")
    return diffs
