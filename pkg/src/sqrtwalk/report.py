"""Self-describing run reports.

A report is a JSON object with the keys ``command``, ``version``,
``seed``, ``config`` (the fully resolved parameters) and ``result``, plus
``warnings`` when any were raised and ``wall_time_s`` when timing is
requested.  The CSV rendering puts everything except the tabular rows in
``# key: value`` comment lines above a fixed header; the columns for each
command are listed in :data:`CSV_COLUMNS`.
"""

import csv
import dataclasses
import io
import json
import math
from importlib import resources

import numpy as np

SCHEMA_FILE = "report.schema.json"

CSV_COLUMNS = {
    "psi": ["p", "x", "value", "est_error"],
    "v": ["p", "x", "t", "clipped", "derivative", "value"],
    "exponent": ["solve", "input", "value", "bracket_lo", "bracket_hi", "residual", "iterations"],
    "simulate": ["n", "survivors", "trials", "p_hat", "stderr"],
    "tail-fit": ["n_min", "n_max", "points", "slope", "intercept", "slope_stderr",
                 "naive_stderr"],
    "localprob": ["n", "bin_lo", "bin_width", "count", "trials", "p_hat", "stderr"],
    "enumerate": ["n", "p_survive"],
    "w-direct": ["a", "b", "method", "value", "stderr", "n_used", "trials"],
    "w-decomp": ["a", "b", "method", "value", "stderr", "n_used", "trials"],
    "harmonic-check": ["a", "b", "c", "steps", "horizon", "lhs", "lhs_stderr", "rhs",
                       "rhs_stderr", "discrepancy", "combined_stderr", "z", "passed"],
    "audit": ["points", "max_drift", "worst_x", "worst_t", "positive_points",
              "nondegenerate", "excursions", "passed"],
    "search-constants": ["C", "R", "form", "max_drift", "points", "passed"],
    "kappa": ["n", "kappa", "rel_err"],
}


def plain(obj):
    """Recursively convert to JSON-ready builtins; non-finite floats become None."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.as_dict() if hasattr(obj, "as_dict") else dataclasses.asdict(obj)
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def build(command, version, seed, config, result, warnings=(), wall_time=None):
    rep = {"command": command, "version": version, "seed": int(seed),
           "config": plain(config), "result": plain(result)}
    if warnings:
        rep["warnings"] = [str(w) for w in warnings]
    if wall_time is not None:
        rep["wall_time_s"] = float(wall_time)
    return rep


def to_json(report):
    return json.dumps(report, indent=2) + "\n"


def _rows(command, result):
    """(rows, summary) where summary holds the non-tabular part of the result."""
    if command in ("simulate", "localprob"):
        return result["estimates"], {k: v for k, v in result.items() if k != "estimates"}
    if command == "enumerate":
        rows = [{"n": i + 1, "p_survive": p} for i, p in enumerate(result["p_survive"])]
        return rows, {}
    if command == "kappa":
        return result["per_n"], {k: v for k, v in result.items() if k != "per_n"}
    if command == "tail-fit":
        fit = dict(result["fit"])
        fit["n_min"], fit["n_max"] = fit.pop("n_range")
        return [fit], {"curve": result["curve"]}
    if command == "audit":
        wp = result["worst_point"]
        row = dict(result, worst_x=wp["x"], worst_t=wp["t"])
        return [row], {k: result[k] for k in ("config", "dist", "worst_point")}
    if command == "search-constants":
        a = result["audit"]
        row = {"C": result["C"], "R": result["R"], "form": a["config"]["form"],
               "max_drift": a["max_drift"], "points": a["points"], "passed": a["passed"]}
        return [row], {"audit": a}
    if command in ("w-direct", "w-decomp"):
        return [result], {"flags": result.get("flags", {})}
    if command == "harmonic-check":
        keep = set(CSV_COLUMNS[command])
        return [result], {k: v for k, v in result.items() if k not in keep}
    return [result], {}


def _cell(v):
    if v is None:
        return "nan"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(report):
    command = report["command"]
    rows, summary = _rows(command, report["result"])
    buf = io.StringIO()
    compact = dict(separators=(",", ":"))
    buf.write(f"# command: {command}\n")
    buf.write(f"# version: {report['version']}\n")
    buf.write(f"# seed: {report['seed']}\n")
    buf.write(f"# config: {json.dumps(report['config'], **compact)}\n")
    if summary:
        buf.write(f"# summary: {json.dumps(summary, **compact)}\n")
    for w in report.get("warnings", []):
        buf.write(f"# warning: {w}\n")
    if "wall_time_s" in report:
        buf.write(f"# wall_time_s: {report['wall_time_s']!r}\n")
    cols = CSV_COLUMNS[command]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        writer.writerow([_cell(r.get(k)) for k in cols])
    return buf.getvalue()


def render(report, fmt):
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    raise ValueError(f"unknown format {fmt!r}")


def load_schema():
    text = resources.files(__package__).joinpath("schemas", SCHEMA_FILE).read_text()
    return json.loads(text)


def validate(report):
    """Raise ``jsonschema.ValidationError`` if the report breaks the schema."""
    import jsonschema

    jsonschema.validate(report, load_schema())
