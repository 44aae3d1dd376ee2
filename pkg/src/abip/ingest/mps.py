"""MPS reader and writer.

Both fixed-column and whitespace-delimited (free) layouts are read.  The
layout is detected from the ROWS section: if every row record splits into
exactly two tokens the file is read as free format, otherwise the fixed
column positions are used.

Every constraint comes back as an equality.  L and G rows gain a slack
column with bounds ``[0, inf)`` (``[0, |R|]`` when ranged), which matches the
row and column counts usually quoted for NETLIB problems.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..lp_model import GeneralLp, StandardLp

__all__ = ["MpsParseError", "parse_mps", "read_mps", "write_mps"]

_SECTIONS = {"NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA", "OBJSENSE", "OBJSENSE MAX", "OBJSENSE MIN"}
_FIXED_FIELDS = ((1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61))


class MpsParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class _Raw:
    name: str = ""
    objective_row: str | None = None
    row_names: list = field(default_factory=list)
    row_types: dict = field(default_factory=dict)
    col_index: dict = field(default_factory=dict)
    col_names: list = field(default_factory=list)
    entries: dict = field(default_factory=dict)
    cost: dict = field(default_factory=dict)
    rhs: dict = field(default_factory=dict)
    ranges: dict = field(default_factory=dict)
    lower: dict = field(default_factory=dict)
    upper: dict = field(default_factory=dict)
    objective_constant: float = 0.0
    maximize: bool = False
    rhs_set: str | None = None
    range_set: str | None = None
    bound_set: str | None = None


def _number(tok: str, lineno: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise MpsParseError(f"cannot parse number {tok!r}", lineno) from None
    if math.isnan(val):
        raise MpsParseError("NaN is not a valid coefficient", lineno)
    return val


def _fixed_tokens(line: str) -> list[str]:
    out = []
    for lo, hi in _FIXED_FIELDS:
        if lo >= len(line):
            break
        out.append(line[lo:hi].strip())
    while out and out[-1] == "":
        out.pop()
    return out


def _detect_free(lines: list[tuple[int, str]]) -> bool:
    in_rows = False
    for _, line in lines:
        if not line[:1].isspace():
            key = line.split()[0].upper()
            if in_rows and key != "ROWS":
                break
            in_rows = key == "ROWS"
            continue
        if in_rows and len(line.split()) != 2:
            return False
    return True


def _pairs(tokens: list[str], lineno: int, what: str):
    """Split ``[set] name value [name value]`` into (set, [(name, value)])."""
    if len(tokens) in (3, 5):
        setname, rest = tokens[0], tokens[1:]
    elif len(tokens) in (2, 4):
        setname, rest = None, tokens
    else:
        raise MpsParseError(f"malformed {what} record", lineno)
    return setname, [(rest[k], _number(rest[k + 1], lineno)) for k in range(0, len(rest), 2)]


def _strip_comment(raw: str) -> str | None:
    line = raw.rstrip("\r\n")
    if not line.strip() or line.lstrip().startswith("*"):
        return None
    return line


def parse_mps(text, fmt: str | None = None) -> GeneralLp:
    """Parse MPS text (``str``, ``bytes`` or a text stream) into a :class:`GeneralLp`.

    ``fmt`` may force ``"fixed"`` or ``"free"``; by default it is detected.
    """
    if isinstance(text, bytes):
        text = text.decode("latin-1")
    elif not isinstance(text, str):
        text = text.read()
        if isinstance(text, bytes):
            text = text.decode("latin-1")
    lines = []
    for k, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if line is not None:
            lines.append((k, line))
    if fmt is None:
        free = _detect_free(lines)
    elif fmt in ("free", "fixed"):
        free = fmt == "free"
    else:
        raise ValueError("fmt must be 'free', 'fixed' or None")

    raw = _Raw()
    section = None
    seen_end = False
    for lineno, line in lines:
        if not line[:1].isspace():
            head = line.split()
            key = head[0].upper()
            if key == "OBJSENSE" and len(head) > 1:
                raw.maximize = head[1].upper() in ("MAX", "MAXIMIZE")
                section = "OBJSENSE_DONE"
                continue
            if key not in _SECTIONS:
                if section == "OBJSENSE" and key in ("MAX", "MIN", "MAXIMIZE", "MINIMIZE"):
                    raw.maximize = key.startswith("MAX")
                    continue
                raise MpsParseError(f"malformed section header {head[0]!r}", lineno)
            section = key
            if key == "NAME":
                raw.name = line[4:].strip() if len(head) > 1 else ""
            elif key == "ENDATA":
                seen_end = True
                break
            continue
        tokens = line.split() if free else _fixed_tokens(line)
        if not tokens:
            continue
        if not free and section in ("COLUMNS", "RHS", "RANGES"):
            # the type field is unused in these sections and must be blank
            if tokens[0]:
                raise MpsParseError(f"unexpected text {tokens[0]!r} in columns 2-3", lineno)
            tokens = tokens[1:]
        if section is None:
            raise MpsParseError("data record before any section header", lineno)
        if section == "OBJSENSE":
            raw.maximize = tokens[0].upper() in ("MAX", "MAXIMIZE")
        elif section == "ROWS":
            _row_record(raw, tokens, lineno)
        elif section == "COLUMNS":
            _column_record(raw, tokens, lineno)
        elif section == "RHS":
            _rhs_record(raw, tokens, lineno)
        elif section == "RANGES":
            _range_record(raw, tokens, lineno)
        elif section == "BOUNDS":
            _bound_record(raw, tokens, lineno)
        elif section == "NAME":
            raise MpsParseError("unexpected data in NAME section", lineno)
        else:
            raise MpsParseError(f"data record in section {section}", lineno)
    if not seen_end:
        raise MpsParseError("missing ENDATA")
    return _assemble(raw)


def _row_record(raw: _Raw, tokens, lineno):
    if len(tokens) != 2:
        raise MpsParseError("ROWS record needs a type and a name", lineno)
    kind, name = tokens[0].upper(), tokens[1]
    if kind not in ("N", "E", "L", "G"):
        raise MpsParseError(f"unknown row type {tokens[0]!r}", lineno)
    if name in raw.row_types or name == raw.objective_row:
        raise MpsParseError(f"duplicate row name {name!r}", lineno)
    if kind == "N":
        if raw.objective_row is None:
            raw.objective_row = name
        else:
            # additional free rows carry no constraint
            raw.row_types[name] = "FREE"
        return
    raw.row_types[name] = kind
    raw.row_names.append(name)


def _column_record(raw: _Raw, tokens, lineno):
    if len(tokens) >= 3 and tokens[1].strip("'").upper() == "MARKER":
        return
    if len(tokens) not in (3, 5):
        raise MpsParseError("malformed COLUMNS record", lineno)
    col = tokens[0]
    j = raw.col_index.get(col)
    if j is None:
        j = len(raw.col_names)
        raw.col_index[col] = j
        raw.col_names.append(col)
    for k in range(1, len(tokens), 2):
        row, val = tokens[k], _number(tokens[k + 1], lineno)
        if row == raw.objective_row:
            raw.cost[j] = raw.cost.get(j, 0.0) + val
            continue
        kind = raw.row_types.get(row)
        if kind is None:
            raise MpsParseError(f"column {col!r} references undeclared row {row!r}", lineno)
        if kind == "FREE":
            continue
        key = (row, j)
        if key in raw.entries:
            raise MpsParseError(f"duplicate entry for row {row!r}, column {col!r}", lineno)
        raw.entries[key] = val


def _rhs_record(raw: _Raw, tokens, lineno):
    setname, pairs = _pairs(tokens, lineno, "RHS")
    if raw.rhs_set is None:
        raw.rhs_set = setname or ""
    elif (setname or "") != raw.rhs_set:
        return
    for row, val in pairs:
        if row == raw.objective_row:
            raw.objective_constant = -val
            continue
        kind = raw.row_types.get(row)
        if kind is None:
            raise MpsParseError(f"RHS references undeclared row {row!r}", lineno)
        if kind != "FREE":
            raw.rhs[row] = val


def _range_record(raw: _Raw, tokens, lineno):
    setname, pairs = _pairs(tokens, lineno, "RANGES")
    if raw.range_set is None:
        raw.range_set = setname or ""
    elif (setname or "") != raw.range_set:
        return
    for row, val in pairs:
        kind = raw.row_types.get(row)
        if kind is None:
            raise MpsParseError(f"RANGES references undeclared row {row!r}", lineno)
        if kind != "FREE":
            raw.ranges[row] = val


_BOUND_TYPES = {"UP", "LO", "FX", "FR", "MI", "PL", "BV", "LI", "UI"}


def _bound_record(raw: _Raw, tokens, lineno):
    kind = tokens[0].upper()
    if kind not in _BOUND_TYPES:
        raise MpsParseError(f"unsupported bound type {tokens[0]!r}", lineno)
    needs_value = kind in ("UP", "LO", "FX", "LI", "UI")
    rest = tokens[1:]
    if needs_value:
        if len(rest) == 3:
            setname, col, val = rest[0], rest[1], _number(rest[2], lineno)
        elif len(rest) == 2:
            setname, col, val = None, rest[0], _number(rest[1], lineno)
        else:
            raise MpsParseError("malformed BOUNDS record", lineno)
    else:
        if len(rest) in (2, 3):
            setname, col = rest[0], rest[1]
        elif len(rest) == 1:
            setname, col = None, rest[0]
        else:
            raise MpsParseError("malformed BOUNDS record", lineno)
        val = None
    if raw.bound_set is None:
        raw.bound_set = setname or ""
    elif (setname or "") != raw.bound_set:
        return
    j = raw.col_index.get(col)
    if j is None:
        raise MpsParseError(f"BOUNDS references undeclared column {col!r}", lineno)
    if kind in ("UP", "UI"):
        raw.upper[j] = val
        if val < 0 and raw.lower.get(j, 0.0) == 0.0:
            raw.lower[j] = -math.inf
    elif kind in ("LO", "LI"):
        raw.lower[j] = val
    elif kind == "FX":
        raw.lower[j] = val
        raw.upper[j] = val
    elif kind == "FR":
        raw.lower[j] = -math.inf
        raw.upper[j] = math.inf
    elif kind == "MI":
        raw.lower[j] = -math.inf
    elif kind == "PL":
        raw.upper[j] = math.inf
    elif kind == "BV":
        raw.lower[j] = 0.0
        raw.upper[j] = 1.0


def _assemble(raw: _Raw) -> GeneralLp:
    m = len(raw.row_names)
    n0 = len(raw.col_names)
    row_pos = {name: i for i, name in enumerate(raw.row_names)}
    rows, cols, vals = [], [], []
    for (row, j), val in raw.entries.items():
        if val != 0.0:
            rows.append(row_pos[row])
            cols.append(j)
            vals.append(val)
    b = np.array([raw.rhs.get(name, 0.0) for name in raw.row_names], dtype=np.float64)
    c = np.zeros(n0)
    for j, val in raw.cost.items():
        c[j] = val
    lower = np.zeros(n0)
    upper = np.full(n0, math.inf)
    for j, val in raw.lower.items():
        lower[j] = val
    for j, val in raw.upper.items():
        upper[j] = val

    slack_lower, slack_upper, slack_names = [], [], []
    for i, name in enumerate(raw.row_names):
        kind = raw.row_types[name]
        rng = raw.ranges.get(name)
        if kind == "E" and rng is None:
            continue
        if kind == "E":
            # b <= a'x <= b + R for R > 0, b + R <= a'x <= b for R < 0
            sign = -1.0 if rng > 0 else 1.0
            width = abs(rng)
        elif kind == "L":
            sign, width = 1.0, (abs(rng) if rng is not None else math.inf)
        else:
            sign, width = -1.0, (abs(rng) if rng is not None else math.inf)
        rows.append(i)
        cols.append(n0 + len(slack_names))
        vals.append(sign)
        slack_lower.append(0.0)
        slack_upper.append(width)
        slack_names.append(f"{name}_slack")
    n = n0 + len(slack_names)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(m, n))
    c = np.concatenate([c, np.zeros(len(slack_names))])
    lower = np.concatenate([lower, slack_lower])
    upper = np.concatenate([upper, slack_upper])
    offset = raw.objective_constant
    if raw.maximize:
        c = -c
        offset = -offset
    return GeneralLp(
        A=A, b=b, c=c, lower=lower, upper=upper, objective_offset=offset,
        row_names=tuple(raw.row_names), col_names=tuple(raw.col_names) + tuple(slack_names),
        name=raw.name, objective_sense=-1 if raw.maximize else 1,
    )


def read_mps(path: str | os.PathLike, fmt: str | None = None) -> GeneralLp:
    with open(path, "rb") as fh:
        data = fh.read()
    lp = parse_mps(data, fmt=fmt)
    if not lp.name:
        stem = os.path.splitext(os.path.basename(os.fspath(path)))[0]
        lp = GeneralLp(lp.A, lp.b, lp.c, lp.lower, lp.upper, lp.objective_offset,
                       lp.row_names, lp.col_names, stem, lp.objective_sense)
    return lp


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "1e+30" if x > 0 else "-1e+30"
    return repr(float(x))


def write_mps(lp: GeneralLp | StandardLp, stream=None, name: str | None = None, row_types=None) -> str:
    """Write ``lp`` as free-format MPS and return the text.

    Every row is an equality unless ``row_types`` (a sequence of ``"E"``,
    ``"L"``, ``"G"``) says otherwise; for a :class:`StandardLp` all columns
    get the default bounds ``[0, inf)``.
    """
    A = sp.csc_matrix(lp.A)
    m, n = A.shape
    if isinstance(lp, GeneralLp):
        lower, upper = lp.lower, lp.upper
        rnames = list(lp.row_names) if lp.row_names else [f"R{i}" for i in range(m)]
        cnames = list(lp.col_names) if lp.col_names else [f"C{j}" for j in range(n)]
        sense = lp.objective_sense
    else:
        lower, upper = np.zeros(n), np.full(n, math.inf)
        rnames = [f"R{i}" for i in range(m)]
        cnames = [f"C{j}" for j in range(n)]
        sense = 1
    if row_types is None:
        row_types = ["E"] * m
    if len(row_types) != m:
        raise ValueError("row_types does not match the row count")
    c = lp.c * sense
    offset = lp.objective_offset * sense
    out = io.StringIO()
    out.write(f"NAME {name if name is not None else (lp.name or 'LP')}\n")
    if sense < 0:
        out.write("OBJSENSE\n    MAX\n")
    out.write("ROWS\n N obj\n")
    for i in range(m):
        out.write(f" {row_types[i]} {rnames[i]}\n")
    out.write("COLUMNS\n")
    for j in range(n):
        if c[j] != 0.0:
            out.write(f"    {cnames[j]} obj {_fmt(c[j])}\n")
        for p in range(A.indptr[j], A.indptr[j + 1]):
            out.write(f"    {cnames[j]} {rnames[A.indices[p]]} {_fmt(A.data[p])}\n")
        if c[j] == 0.0 and A.indptr[j] == A.indptr[j + 1]:
            out.write(f"    {cnames[j]} obj 0.0\n")
    out.write("RHS\n")
    for i in range(m):
        if lp.b[i] != 0.0:
            out.write(f"    RHS {rnames[i]} {_fmt(lp.b[i])}\n")
    if offset != 0.0:
        out.write(f"    RHS obj {_fmt(-offset)}\n")
    bounds = []
    for j in range(n):
        lo, up = lower[j], upper[j]
        if lo == up:
            bounds.append(f" FX BND {cnames[j]} {_fmt(lo)}")
            continue
        if math.isinf(lo) and math.isinf(up):
            bounds.append(f" FR BND {cnames[j]}")
            continue
        if math.isinf(lo):
            bounds.append(f" MI BND {cnames[j]}")
        elif lo != 0.0:
            bounds.append(f" LO BND {cnames[j]} {_fmt(lo)}")
        if not math.isinf(up):
            bounds.append(f" UP BND {cnames[j]} {_fmt(up)}")
    if bounds:
        out.write("BOUNDS\n")
        out.write("\n".join(bounds) + "\n")
    out.write("ENDATA\n")
    text = out.getvalue()
    if stream is not None:
        if isinstance(stream, (str, os.PathLike)):
            with open(stream, "w") as fh:
                fh.write(text)
        else:
            stream.write(text)
    return text
