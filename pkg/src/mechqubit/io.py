"""Flat config files, delimited tables and run reports.

Tables are CSV with ``#``-prefixed metadata lines ahead of the header row.
Reports are a single JSON document. Floats are written with ``repr`` so
every file parses back to identical values.
"""

import ast
import csv
import io
import json
import math
import operator
import re
from dataclasses import dataclass, field

import numpy as np

REPORT_FORMAT = "mechqubit-report/1"

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub,
           ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "inf": math.inf}


def parse_real(text) -> float:
    """Parse a number, allowing ``pi`` and simple arithmetic (``3*pi/2``, ``3pi/2``)."""
    if isinstance(text, (int, float)):
        return float(text)
    src = re.sub(r"(\d)\s*pi", r"\1*pi", str(text).strip().lower())
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError:
        raise ValueError(f"cannot parse number {text!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"cannot parse number {text!r}")

    return float(ev(tree))


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Values stay strings."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


@dataclass
class Table:
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _unfmt(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def format_table(table: Table) -> str:
    buf = io.StringIO()
    for key, value in table.meta.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def parse_table(text: str) -> Table:
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        elif line:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [tuple(_unfmt(v) for v in row) for row in reader]
    return Table(columns, rows, meta)


def write_table(path, table: Table) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_table(table))


def read_table(path) -> Table:
    with open(path) as fh:
        return parse_table(fh.read())


def format_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def parse_report(text: str) -> dict:
    data = json.loads(text)
    if data.get("format") != REPORT_FORMAT:
        raise ValueError(f"not a {REPORT_FORMAT} document")
    return data


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        fh.write(format_report(report))


def read_report(path) -> dict:
    with open(path) as fh:
        return parse_report(fh.read())
