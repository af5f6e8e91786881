"""Text formats: matrices/vectors, trace CSV and reference-solution JSON.

Matrix files start with a ``n m`` header line (``n`` for vectors) followed
by the entries in row-major order, one matrix row per line.  Floats are
written with 17 significant digits, which round-trips every double.
"""
from __future__ import annotations

import csv
import io
import json

import numpy as np

from .errors import DimensionMismatch
from .experiments import ReferenceSolution

TRACE_COLUMNS = ("k", "objective", "gap", "inner_sweeps", "inner_residual", "nu_hat",
                 "theta", "rho", "delta_hat", "wall_ns")


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def format_matrix(M):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        lines = [str(M.size), " ".join(fmt(x) for x in M)]
    elif M.ndim == 2:
        lines = [f"{M.shape[0]} {M.shape[1]}"]
        lines += [" ".join(fmt(x) for x in row) for row in M]
    else:
        raise DimensionMismatch("only vectors and matrices can be written")
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    tokens = text.split()
    if not tokens:
        raise ValueError("empty matrix file")
    header = text.lstrip().splitlines()[0].split()
    dims = [int(t) for t in header]
    if len(dims) not in (1, 2) or any(d < 1 for d in dims):
        raise ValueError(f"bad header {header!r}")
    values = np.array([float(t) for t in tokens[len(dims):]], dtype=np.float64)
    expected = int(np.prod(dims))
    if values.size != expected:
        raise DimensionMismatch(f"header promises {expected} entries, found {values.size}")
    return values.reshape(dims)


def write_matrix(path, M):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_matrix(M))


def read_matrix(path):
    with open(path, encoding="ascii") as fh:
        return parse_matrix(fh.read())


write_plan = write_matrix
read_plan = read_matrix


def trace_rows(trace, reference=None, wall_time=False):
    """Yield CSV rows (lists of strings) for ``trace``; header first."""
    cols = [c for c in TRACE_COLUMNS if c != "gap" or reference is not None]
    yield cols
    for rec in trace.records:
        row = []
        for c in cols:
            if c == "gap":
                row.append(fmt(rec.objective - reference.objective))
            elif c == "wall_ns":
                row.append(fmt(rec.wall_ns) if wall_time else "")
            else:
                row.append(fmt(getattr(rec, c)))
        yield row


def status_line(trace, error=None):
    if error is not None:
        return f"# status=failed error={type(error).__name__}: {error}"
    if trace.converged is False:
        return "# status=not_converged"
    return "# status=completed"


def write_trace_csv(fh_or_path, trace, reference=None, wall_time=False, error=None):
    """Write the trace CSV followed by a ``# status=...`` footer comment.

    Wall-clock times are left blank unless ``wall_time`` is set, so repeated
    runs produce identical bytes.
    """
    if isinstance(fh_or_path, (str, bytes)) or hasattr(fh_or_path, "__fspath__"):
        with open(fh_or_path, "w", encoding="ascii", newline="") as fh:
            return write_trace_csv(fh, trace, reference, wall_time, error)
    writer = csv.writer(fh_or_path, lineterminator="\n")
    for row in trace_rows(trace, reference, wall_time):
        writer.writerow(row)
    fh_or_path.write(status_line(trace, error) + "\n")
    fh_or_path.flush()


def _parse_cell(col, cell):
    if cell == "":
        return None
    if col in ("k", "inner_sweeps", "wall_ns"):
        return int(cell)
    return float(cell)


def read_trace_csv(path):
    """Parse a trace CSV; returns ``(rows, footer)`` with rows as dicts."""
    with open(path, encoding="ascii", newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    footer = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    reader = csv.reader(io.StringIO("\n".join(body)))
    header = next(reader)
    rows = [{c: _parse_cell(c, cell) for c, cell in zip(header, r)} for r in reader]
    return rows, footer


def reference_to_json(ref):
    doc = {
        "objective": fmt(ref.objective),
        "solver": ref.solver,
        "beta": ref.beta,
        "iters": ref.iters,
        "inner": ref.inner,
        "problem_digest": ref.problem_digest,
        "plan_digest": ref.plan_digest,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def reference_from_json(text):
    doc = json.loads(text)
    return ReferenceSolution(objective=float(doc["objective"]), solver=doc["solver"],
                             beta=float(doc["beta"]), iters=int(doc["iters"]),
                             inner=doc["inner"], problem_digest=doc["problem_digest"],
                             plan_digest=doc.get("plan_digest", ""))


def write_reference(path, ref):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(reference_to_json(ref))


def read_reference(path):
    with open(path, encoding="ascii") as fh:
        return reference_from_json(fh.read())


def write_gap_csv(fh, blocks):
    """``blocks`` is a list of ``(label, [(k, gap), ...])``."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["solver_label", "k", "gap"])
    for label, gaps in blocks:
        for k, gap in gaps:
            writer.writerow([label, k, fmt(gap)])
