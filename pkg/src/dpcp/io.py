"""Text formats for matrices, graphs, traces and reports.

Matrix CSV: first line ``rows,cols``, then ``rows`` lines of ``cols``
comma-separated decimals. An empty field marks an unobserved entry. Reals
are written with 17 significant digits, which round-trips IEEE doubles.

Graph JSON: ``{"n": N, "edges": [[i, j], ...]}`` with ``0 <= i < j < N``;
an optional ``"positions"`` list of ``[x, y]`` pairs is kept for plotting.
"""

import json
import math
from pathlib import Path

import numpy as np

from .datagen import MeterGraph, ObservationSet, is_connected
from .errors import ParseError, ValidationError


def fmt(x):
    return format(float(x), ".17g")


def write_matrix(path, A, mask=None):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {A.shape}")
    if mask is not None and np.shape(mask) != A.shape:
        raise ValidationError("mask shape does not match matrix")
    rows, cols = A.shape
    lines = [f"{rows},{cols}"]
    for i in range(rows):
        if mask is None:
            lines.append(",".join(fmt(v) for v in A[i]))
        else:
            lines.append(",".join(fmt(v) if m else "" for v, m in zip(A[i], mask[i])))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_int(tok, lineno, path):
    try:
        v = int(tok.strip())
    except ValueError:
        raise ParseError(f"header field {tok!r} is not an integer", lineno, path) from None
    if v < 1:
        raise ParseError(f"header dimension must be positive, got {v}", lineno, path)
    return v


def read_matrix(path):
    """Parse a matrix CSV into ``(values, mask)``; blanks read as 0 with mask 0."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc}", path=path) from None
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError("empty file", 1, path)
    header = lines[0].split(",")
    if len(header) != 2:
        raise ParseError("header must be 'rows,cols'", 1, path)
    rows, cols = (_parse_int(t, 1, path) for t in header)
    body = lines[1:]
    if len(body) != rows:
        raise ParseError(f"expected {rows} data lines, found {len(body)}", len(lines), path)
    values = np.zeros((rows, cols))
    mask = np.zeros((rows, cols))
    for i, line in enumerate(body):
        lineno = i + 2
        fields = line.split(",")
        if len(fields) != cols:
            raise ParseError(f"row {i} has {len(fields)} fields, expected {cols}", lineno, path)
        for j, tok in enumerate(fields):
            tok = tok.strip()
            if not tok:
                continue
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(f"row {i} field {j}: {tok!r} is not a number", lineno, path) from None
            if not math.isfinite(v):
                raise ParseError(f"row {i} field {j}: non-finite value {tok!r}", lineno, path)
            values[i, j] = v
            mask[i, j] = 1.0
    return values, mask


def read_observations(path):
    Y, mask = read_matrix(path)
    return ObservationSet(Y, mask)


def write_observations(path, obs):
    write_matrix(path, obs.Y, obs.mask)


def read_graph(path):
    """Load and validate a graph JSON file (ranges, duplicates, connectivity)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None
    if not isinstance(doc, dict) or "n" not in doc or "edges" not in doc:
        raise ParseError('graph JSON must be an object with "n" and "edges"', path=path)
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValidationError(f"graph 'n' must be a positive integer, got {n!r}")
    edges = []
    for e in doc["edges"]:
        if (
            not isinstance(e, list)
            or len(e) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in e)
        ):
            raise ValidationError(f"edge {e!r} must be a pair of integers")
        i, j = e
        if not 0 <= i < j < n:
            raise ValidationError(f"edge {e} violates 0 <= i < j < {n}")
        edges.append((i, j))
    positions = doc.get("positions")
    if positions is not None:
        positions = np.asarray(positions, dtype=float)
    g = MeterGraph.from_edges(n, edges, positions)
    if not is_connected(g):
        raise ValidationError("graph is disconnected")
    return g


def write_graph(path, g):
    doc = {"n": g.n_nodes, "edges": [list(e) for e in g.edges]}
    if g.positions is not None:
        doc["positions"] = [[float(a), float(b)] for a, b in np.asarray(g.positions)]
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, doc):
    """Deterministic JSON (sorted keys; NaN and inf become null)."""
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None


def _cell(v):
    return "" if v is None or not math.isfinite(v) else fmt(v)


def write_dpcp_trace(path, trace):
    """``k,e_X,e_O,consensus_max,objective,consensus_node0,...``; blank when unknown."""
    n = len(trace[0].consensus) if trace else 0
    header = ["k", "e_X", "e_O", "consensus_max", "objective"]
    header += [f"consensus_node{i}" for i in range(n)]
    lines = [",".join(header)]
    for tr in trace:
        row = [str(tr.k), _cell(tr.e_X), _cell(tr.e_O), _cell(tr.consensus_max), _cell(tr.objective)]
        row += [_cell(v) for v in tr.consensus]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_central_trace(path, sol):
    """``iter,objective,spectral_gap,inf_gap``; iteration 0 is the warm start."""
    lines = ["iter,objective,spectral_gap,inf_gap"]
    for i, f in enumerate(sol.objective_trace):
        if 1 <= i <= len(sol.spectral_trace):
            gaps = (sol.spectral_trace[i - 1], sol.inf_trace[i - 1])
        else:
            gaps = (None, None)
        lines.append(",".join([str(i), _cell(f), _cell(gaps[0]), _cell(gaps[1])]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv_table(path):
    """Read a headed numeric CSV into ``{column: array}``; blanks become NaN."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    cols = {h: [] for h in header}
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields", lineno, path)
        for h, tok in zip(header, fields):
            cols[h].append(float(tok) if tok else float("nan"))
    return {h: np.asarray(v) for h, v in cols.items()}


def downsample(A, factor):
    """Keep every ``factor``-th column from column 0, dropping a partial tail.

    A horizon of ``T`` keeps ``T // factor`` columns: ``0, factor, 2*factor, ...``.
    """
    if int(factor) != factor or factor < 1:
        raise ValidationError(f"downsampling factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    A = np.asarray(A)
    keep = (A.shape[1] // factor) * factor
    if keep == 0:
        raise ValidationError(f"horizon {A.shape[1]} is shorter than factor {factor}")
    return A[:, :keep:factor]
