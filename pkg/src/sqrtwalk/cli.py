"""Command-line front end.

Every subcommand resolves its parameters from built-in defaults, then an
optional JSON ``--config`` file, then explicit flags (later wins), runs
one library operation and writes a report (see :mod:`sqrtwalk.report`).
Failures print ``{"error": {...}}`` on stderr and exit nonzero: 2 for
invalid input or a violated precondition, 3 for a numerical failure.
"""

import argparse
import json
import sys
import time
import warnings

from . import __version__
from .rng import SeedSpec

REQUIRED = object()

_BOUNDARY = [
    ("c", float, REQUIRED, "boundary coefficient: kill when a + S(n) <= c sqrt(n + b)"),
    ("a", float, REQUIRED, "starting position (must exceed c sqrt(b))"),
    ("b", float, 0.0, "time shift b >= 0"),
]
_DIST = [
    ("dist", str, "gaussian", "step law: gaussian, rademacher, uniform, sym_pareto, "
                              "finite_discrete"),
    ("beta", float, None, "tail index for sym_pareto (default 2.5)"),
    ("atoms", str, None, "finite_discrete atoms: JSON array of {value, prob} or a file path"),
]


def _int_list(text):
    """Comma list of integers; an item ``lo:hi`` expands to 2^lo, ..., 2^hi."""
    if isinstance(text, list):
        return [int(v) for v in text]
    out = []
    for item in str(text).split(","):
        item = item.strip()
        if ":" in item:
            lo, hi = (int(v) for v in item.split(":"))
            out.extend(2 ** k for k in range(lo, hi + 1))
        elif item:
            out.append(int(item))
    return out


def _bins(text):
    """``lo:width`` pairs separated by commas."""
    if isinstance(text, list):
        return [tuple(map(float, b)) for b in text]
    bins = []
    for item in str(text).split(","):
        lo, width = item.split(":")
        bins.append((float(lo), float(width)))
    return bins


def _flag(v):
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes"):
        return True
    if str(v).lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


COMMANDS = {
    "psi": ("psi_p(x) = e^{x^2/4} D_p(x)", [
        ("p", float, REQUIRED, "order"),
        ("x", float, REQUIRED, "argument"),
        ("rel_tol", float, 1e-10, "quadrature relative tolerance"),
        ("abs_tol", float, 1e-12, "quadrature absolute tolerance"),
    ]),
    "v": ("V_p(x, t) = t^{p/2} psi_p(x / sqrt t), optionally clipped or differentiated", [
        ("p", float, REQUIRED, "order"),
        ("x", float, REQUIRED, "space coordinate"),
        ("t", float, REQUIRED, "time coordinate (>= 0)"),
        ("clipped", _flag, False, "zero below x = c(p) sqrt(t)"),
        ("derivative", str, "none", "none, x or t"),
    ]),
    "exponent": ("p(c) or c(p); give exactly one of --c and --p", [
        ("c", float, None, "boundary coefficient"),
        ("p", float, None, "exponent"),
        ("tol", float, 1e-10, "root tolerance"),
    ]),
    "simulate": ("Monte Carlo P(T > n)", _BOUNDARY + _DIST + [
        ("horizons", _int_list, REQUIRED, "increasing n values; lo:hi means 2^lo..2^hi"),
        ("trials", int, 100000, "number of paths"),
    ]),
    "tail-fit": ("power-law fit of a simulated survival curve", _BOUNDARY + _DIST + [
        ("horizons", _int_list, REQUIRED, "increasing n values; lo:hi means 2^lo..2^hi"),
        ("trials", int, 100000, "number of paths"),
        ("n_min", int, 1, "smallest n in the fit"),
        ("n_max", int, None, "largest n in the fit"),
        ("min_survivors", int, 100, "drop points with fewer survivors"),
    ]),
    "localprob": ("frequencies of {a + S(n) in (lo, lo + width], T > n}", _BOUNDARY + _DIST + [
        ("n", int, REQUIRED, "time"),
        ("bins", _bins, REQUIRED, "lo:width pairs, comma separated"),
        ("trials", int, 100000, "number of paths"),
    ]),
    "enumerate": ("exact P(T > n), n = 1..horizon, for finitely supported steps",
                  _BOUNDARY + [
                      ("dist", str, "rademacher", "rademacher or finite_discrete"),
                      ("atoms", str, None, "finite_discrete atoms (JSON or path)"),
                      ("horizon", int, REQUIRED, "last n"),
                  ]),
    "w-direct": ("W(a, b) as the plateau of E[V(a + S(n), b + n); T > n]",
                 _BOUNDARY + _DIST + [
                     ("trials", int, 20000, "number of paths"),
                     ("plateau_tol", float, 1e-3, "relative plateau tolerance"),
                     ("n_start", int, 1024, "first n of the doubling grid"),
                     ("n_cap", int, 16384, "last n of the doubling grid"),
                 ]),
    "w-decomp": ("W(a, b) from the drift decomposition", _BOUNDARY + _DIST + [
        ("trials", int, 20000, "number of paths"),
        ("n_max", int, None, "path cap (default 100 (1 + a^2))"),
    ]),
    "harmonic-check": ("W_{N+m}(a, b) against E[W_N(a + S(m), b + m); T > m]",
                       _BOUNDARY + _DIST + [
                           ("trials", int, 20000, "paths per side"),
                           ("steps", int, 1, "m"),
                           ("horizon", int, 256, "N"),
                           ("perturb", float, 1.0, "factor applied to the right side"),
                           ("nodes", int, 32, "quadrature nodes for Gaussian steps"),
                       ]),
    "audit": ("one-step drift of the correction h or g over a point set", [
        ("c", float, REQUIRED, "boundary coefficient"),
        ("p1", float, REQUIRED, "auxiliary exponent, 0 < p1 < p(c)"),
        ("delta", float, 0.1, "correction exponent gap"),
        ("gamma", float, 0.25, "region offset above c(p1)"),
        ("C", float, REQUIRED, "correction constant"),
        ("R", float, REQUIRED, "shift constant"),
        ("points", str, None, "JSON array of [x, t] (default: canonical region grid)"),
        ("tol", float, 1e-8, "largest admissible drift"),
    ] + [o for o in _DIST if o[0] != "dist"] + [
        ("dist", str, "rademacher", "step law"),
    ]),
    "search-constants": ("smallest (C, R) = (2^k, 2^m) passing the audit", [
        ("c", float, REQUIRED, "boundary coefficient"),
        ("p1", float, REQUIRED, "auxiliary exponent"),
        ("delta", float, 0.1, "correction exponent gap"),
        ("gamma", float, 0.25, "region offset above c(p1)"),
        ("k_max", int, 20, "largest log2 C"),
        ("m_max", int, 20, "largest log2 R"),
        ("tol", float, 1e-8, "largest admissible drift"),
        ("allow_unit", _flag, False, "accept p1 = 1 (time-power correction)"),
    ] + [o for o in _DIST if o[0] != "dist"] + [
        ("dist", str, "rademacher", "step law"),
    ]),
    "kappa": ("tail constant from p_hat(n) n^{p(c)/2} / W(a, b)", _BOUNDARY + _DIST + [
        ("n_grid", _int_list, REQUIRED, "increasing n values; lo:hi means 2^lo..2^hi"),
        ("trials", int, 1000000, "survival paths"),
        ("w_trials", int, 20000, "paths for W"),
        ("w_n_max", int, None, "path cap for W (default max n_grid)"),
    ]),
}

GLOBAL_DEFAULTS = {"seed": 0, "threads": None, "format": "json", "out": None}


class CliError(Exception):
    def __init__(self, message, kind="UsageError", code=2):
        super().__init__(message)
        self.kind = kind
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _opt(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = _Parser(prog="sqrtwalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (help_text, options) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text,
                           argument_default=argparse.SUPPRESS)
        g = p.add_argument_group("common")
        g.add_argument("--seed", type=int, help="master seed (default 0)")
        g.add_argument("--threads", type=int, help="worker thread hint; never changes results")
        g.add_argument("--format", choices=["json", "csv"], help="report format (default json)")
        g.add_argument("--out", help="write the report here instead of stdout")
        g.add_argument("--config", help="JSON file of parameters; flags take precedence")
        g.add_argument("--timing", action="store_true",
                       help="embed wall time in the report (breaks byte-identical output)")
        for oname, typ, default, ohelp in options:
            suffix = " (required)" if default is REQUIRED else f" (default {default})"
            if typ is _flag:
                p.add_argument(_opt(oname), dest=oname, nargs="?", const=True, type=_flag,
                               help=ohelp + suffix)
            else:
                p.add_argument(_opt(oname), dest=oname, type=typ, help=ohelp + suffix)
    return parser


def resolve(command, explicit, file_cfg):
    """Merge defaults, config file and explicit flags into one dict."""
    options = COMMANDS[command][1]
    types = {o[0]: o[1] for o in options}
    known = set(types) | set(GLOBAL_DEFAULTS)
    cfg = dict(GLOBAL_DEFAULTS)
    cfg.update({o[0]: o[2] for o in options})
    for key, val in file_cfg.items():
        key = key.replace("-", "_")
        if key not in known:
            raise CliError(f"unknown config key {key!r} for {command}")
        if key in types and val is not None:
            try:
                val = types[key](val)
            except (TypeError, ValueError) as exc:
                raise CliError(f"bad value for {key}: {exc}") from None
        cfg[key] = val
    cfg.update(explicit)
    missing = [k for k, v in cfg.items() if v is REQUIRED]
    if missing:
        raise CliError("missing required parameter(s): " + ", ".join(_opt(k) for k in missing))
    if cfg["format"] not in ("json", "csv"):
        raise CliError(f"format must be json or csv, got {cfg['format']!r}")
    return cfg


def _dist(cfg):
    from .walk_model import IncrementDistribution

    return IncrementDistribution.parse(cfg["dist"], cfg.get("beta"), cfg.get("atoms"))


def _boundary(cfg):
    from .walk_model import Boundary

    return Boundary(cfg["c"], cfg["a"], cfg["b"])


# ----------------------------------------------------------------------
# command bodies: each takes the resolved config and a SeedSpec


def _run_psi(cfg, seed):
    from .special_fn import QuadratureConfig, eval_psi

    q = QuadratureConfig(rel_tol=cfg["rel_tol"], abs_tol=cfg["abs_tol"])
    r = eval_psi(cfg["p"], cfg["x"], q)
    return {"p": cfg["p"], "x": cfg["x"], "value": r.value, "est_error": r.est_error}


def _run_v(cfg, seed):
    from . import special_fn as sf

    pt = sf.SpaceTimePoint(cfg["x"], cfg["t"])
    d = cfg["derivative"]
    if d not in ("none", "x", "t"):
        raise CliError(f"derivative must be none, x or t, got {d!r}")
    if d != "none" and cfg["clipped"]:
        raise CliError("derivatives are of the unclipped V")
    if d == "x":
        val = sf.dV_dx(cfg["p"], pt)
    elif d == "t":
        val = sf.dV_dt(cfg["p"], pt)
    elif cfg["clipped"]:
        val = sf.eval_V_clipped(cfg["p"], pt)
    else:
        val = sf.eval_V(cfg["p"], pt)
    return {"p": cfg["p"], "x": cfg["x"], "t": cfg["t"], "clipped": cfg["clipped"],
            "derivative": d, "value": val}


def _run_exponent(cfg, seed):
    from .exponent_solver import c_of_p, p_of_c

    if (cfg["c"] is None) == (cfg["p"] is None):
        raise CliError("give exactly one of --c and --p")
    if cfg["c"] is not None:
        r = p_of_c(cfg["c"], cfg["tol"])
        solve, inp = "p_of_c", cfg["c"]
    else:
        r = c_of_p(cfg["p"], cfg["tol"])
        solve, inp = "c_of_p", cfg["p"]
    return dict(solve=solve, input=inp, **r.as_dict())


def _curve(cfg, seed):
    from .mc_engine import estimate_survival

    return estimate_survival(_boundary(cfg), _dist(cfg), cfg["horizons"], cfg["trials"], seed)


def _run_simulate(cfg, seed):
    return {"estimates": [e.as_dict() for e in _curve(cfg, seed)]}


def _run_tail_fit(cfg, seed):
    from .mc_engine import fit_tail_exponent

    curve = _curve(cfg, seed)
    fit = fit_tail_exponent(curve, cfg["n_min"], cfg["n_max"], cfg["min_survivors"])
    return {"fit": fit.as_dict(), "curve": [e.as_dict() for e in curve]}


def _run_localprob(cfg, seed):
    from .mc_engine import estimate_local_prob

    est = estimate_local_prob(_boundary(cfg), _dist(cfg), cfg["n"], cfg["bins"], cfg["trials"],
                              seed)
    return {"estimates": [e.as_dict() for e in est]}


def _run_enumerate(cfg, seed):
    from .walk_model import IncrementDistribution, enumerate_survival

    dist = IncrementDistribution.parse(cfg["dist"], None, cfg.get("atoms"))
    return {"p_survive": enumerate_survival(_boundary(cfg), dist, cfg["horizon"])}


def _run_w_direct(cfg, seed):
    from .harmonic import estimate_W_direct

    _boundary(cfg)
    return estimate_W_direct(cfg["a"], cfg["b"], _dist(cfg), cfg["c"], cfg["trials"], seed,
                             cfg["plateau_tol"], cfg["n_start"], cfg["n_cap"]).as_dict()


def _run_w_decomp(cfg, seed):
    from .harmonic import estimate_W_decomp

    _boundary(cfg)
    return estimate_W_decomp(cfg["a"], cfg["b"], _dist(cfg), cfg["c"], cfg["trials"], seed,
                             cfg["n_max"]).as_dict()


def _run_harmonic(cfg, seed):
    from .harmonic import verify_harmonicity

    _boundary(cfg)
    return verify_harmonicity(cfg["a"], cfg["b"], _dist(cfg), cfg["c"], cfg["trials"], seed,
                              steps=cfg["steps"], horizon=cfg["horizon"],
                              perturb=cfg["perturb"], nodes=cfg["nodes"])


def _run_audit(cfg, seed):
    from .harmonic import AuditConfig, audit_supermartingale, canonical_region

    ac = AuditConfig(cfg["c"], cfg["p1"], cfg["delta"], cfg["C"], cfg["R"], cfg["gamma"])
    if cfg["points"] is None:
        pts = canonical_region(ac)
    else:
        src = cfg["points"]
        if src.lstrip().startswith("["):
            pts = json.loads(src)
        else:
            with open(src) as fh:
                pts = json.load(fh)
    return audit_supermartingale(ac, _dist(cfg), pts, cfg["tol"])


def _run_search(cfg, seed):
    from .harmonic import search_correction_constants

    C, R, rep = search_correction_constants(cfg["c"], cfg["p1"], cfg["delta"], cfg["gamma"],
                                            _dist(cfg), cfg["k_max"], cfg["m_max"], cfg["tol"],
                                            allow_unit=cfg["allow_unit"])
    return {"C": C, "R": R, "audit": rep}


def _run_kappa(cfg, seed):
    from .harmonic import estimate_kappa

    _boundary(cfg)
    return estimate_kappa(cfg["c"], cfg["a"], cfg["b"], _dist(cfg), cfg["n_grid"],
                          cfg["trials"], seed, w_trials=cfg["w_trials"],
                          w_n_max=cfg["w_n_max"]).as_dict()


RUNNERS = {
    "psi": _run_psi, "v": _run_v, "exponent": _run_exponent, "simulate": _run_simulate,
    "tail-fit": _run_tail_fit, "localprob": _run_localprob, "enumerate": _run_enumerate,
    "w-direct": _run_w_direct, "w-decomp": _run_w_decomp, "harmonic-check": _run_harmonic,
    "audit": _run_audit, "search-constants": _run_search, "kappa": _run_kappa,
}


def _numerical_errors():
    from .exponent_solver import ExponentSolveError
    from .harmonic import GridTooCoarseError, SearchExhaustedError
    from .special_fn import PsiRangeError, QuadratureError
    from .walk_model import StateSpaceError

    return (ExponentSolveError, GridTooCoarseError, SearchExhaustedError, QuadratureError,
            StateSpaceError, PsiRangeError, ArithmeticError)


def _emit_error(command, kind, message, code):
    err = {"error": {"type": kind, "message": message, "command": command, "exit_code": code}}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def run(command, args):
    """Run one parsed command; returns (report text, output path)."""
    from . import report
    from .mc_engine import set_threads

    cfg_path = args.pop("config", None)
    timing = args.pop("timing", False)
    file_cfg = {}
    if cfg_path is not None:
        try:
            with open(cfg_path) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise CliError("config file must hold a JSON object")
    cfg = resolve(command, args, file_cfg)
    seed = SeedSpec(cfg["seed"])
    set_threads(cfg["threads"])
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = RUNNERS[command](cfg, seed)
    wall = time.perf_counter() - t0
    notes = sorted({str(w.message) for w in caught
                    if not issubclass(w.category, (DeprecationWarning, ImportWarning))})
    # the thread hint and output path do not affect results and are not echoed
    echoed = {k: v for k, v in cfg.items() if k not in ("threads", "out")}
    rep = report.build(command, __version__, cfg["seed"], echoed, result, notes,
                       wall if timing else None)
    sys.stderr.write(f"wall_time_s: {wall:.3f}\n")
    return report.render(rep, cfg["format"]), cfg["out"]


def main(argv=None):
    command = None
    try:
        args = vars(build_parser().parse_args(argv))
        command = args.pop("command")
        text, out = run(command, args)
    except CliError as exc:
        return _emit_error(command, exc.kind, str(exc), exc.code)
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)
    except _numerical_errors() as exc:
        return _emit_error(command, type(exc).__name__, str(exc), 3)
    except (ValueError, TypeError, KeyError, NotImplementedError, OSError) as exc:
        return _emit_error(command, "PreconditionError", f"{type(exc).__name__}: {exc}", 2)
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
