"""Square-root boundaries, step laws, single-path evolution, and exact
survival enumeration for finitely supported steps."""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from . import _draw
from .rng import SeedSpec

KINDS = ("gaussian", "rademacher", "uniform", "sym_pareto", "finite_discrete")
STATE_CAP = 2**26


class StateSpaceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Boundary:
    """Killing curve x = c sqrt(n + b) for the walk a + S(n)."""

    c: float
    a: float
    b: float = 0.0

    def __post_init__(self):
        for name in ("c", "a", "b"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.b < 0:
            raise ValueError(f"need b >= 0, got b={self.b}")
        edge = self.c * math.sqrt(self.b)
        if not self.a > edge:
            raise ValueError(f"need a > c*sqrt(b): {self.a} <= {edge}")

    def as_dict(self):
        return {"c": self.c, "a": self.a, "b": self.b}


def boundary_value(bd, t):
    """g(t) = c sqrt(t + b) - a, the level S(t) must stay above."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return bd.c * math.sqrt(t + bd.b) - bd.a


@dataclass(frozen=True)
class IncrementDistribution:
    """Zero-mean, unit-variance step law.

    Build instances with :meth:`gaussian`, :meth:`rademacher`,
    :meth:`uniform`, :meth:`sym_pareto` or :meth:`finite_discrete`.
    """

    kind: str
    beta: Optional[float] = None
    values: tuple = field(default=())
    probs: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "sym_pareto":
            if self.beta is None or not self.beta > 2:
                raise ValueError("sym_pareto needs beta > 2")
        if self.kind == "finite_discrete":
            v = np.asarray(self.values, float)
            q = np.asarray(self.probs, float)
            if v.size == 0 or v.shape != q.shape:
                raise ValueError("finite_discrete needs matching non-empty values and probs")
            if np.any(q < 0) or not np.all(np.isfinite(v)):
                raise ValueError("probabilities must be nonnegative and values finite")
            if abs(q.sum() - 1.0) > 1e-12:
                raise ValueError("probabilities must sum to one")
            if abs(np.dot(q, v)) > 1e-12:
                raise ValueError(f"mean must be 0 (got {np.dot(q, v)!r})")
            if abs(np.dot(q, v * v) - 1.0) > 1e-12:
                raise ValueError(f"variance must be 1 (got {np.dot(q, v * v)!r})")

    # constructors -----------------------------------------------------
    @classmethod
    def gaussian(cls):
        return cls("gaussian")

    @classmethod
    def rademacher(cls):
        return cls("rademacher")

    @classmethod
    def uniform(cls):
        return cls("uniform")

    @classmethod
    def sym_pareto(cls, beta):
        return cls("sym_pareto", beta=float(beta))

    @classmethod
    def finite_discrete(cls, atoms):
        """``atoms`` is a sequence of (value, prob) pairs or {value, prob} dicts.

        Probabilities within 1e-9 of summing to one are renormalized;
        anything else is rejected.
        """
        vals, probs = [], []
        for atom in atoms:
            if isinstance(atom, dict):
                v, q = atom["value"], atom["prob"]
            else:
                v, q = atom
            vals.append(float(v))
            probs.append(float(q))
        q = np.asarray(probs)
        total = q.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")
        q = q / total
        return cls("finite_discrete", values=tuple(vals), probs=tuple(q.tolist()))

    @classmethod
    def from_json(cls, text_or_path):
        """finite_discrete atoms from a JSON array of {value, prob}."""
        s = str(text_or_path)
        if s.lstrip()[:1] in ("[", "{"):
            data = json.loads(s)
        else:
            with open(s) as fh:
                data = json.load(fh)
        if not isinstance(data, list):
            raise ValueError("atom document must be a JSON array")
        return cls.finite_discrete(data)

    @classmethod
    def parse(cls, name, beta=None, atoms=None):
        if name == "sym_pareto":
            return cls.sym_pareto(2.5 if beta is None else beta)
        if name == "finite_discrete":
            if atoms is None:
                raise ValueError("finite_discrete needs an atom document")
            return cls.from_json(atoms)
        return cls(name)

    # properties -------------------------------------------------------
    @property
    def is_discrete(self):
        return self.kind in ("rademacher", "finite_discrete")

    @property
    def sigma(self):
        """Scale of the symmetric Pareto law."""
        return math.sqrt((self.beta - 2.0) / self.beta)

    @property
    def theta0(self):
        """P(X > t) >= theta0 t^-beta for t >= 1 (sym_pareto only)."""
        if self.kind != "sym_pareto":
            return None
        return 0.5 * self.sigma ** self.beta

    def atoms(self):
        if self.kind == "rademacher":
            return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
        if self.kind == "finite_discrete":
            return np.asarray(self.values, float), np.asarray(self.probs, float)
        raise ValueError(f"{self.kind} has no atoms")

    def abs_moment_finite(self, q):
        """Whether E|X|^q is finite."""
        if self.kind == "sym_pareto":
            return q < self.beta
        return True

    def tail(self, t):
        """P(X > t)."""
        if self.kind == "gaussian":
            return float(special.ndtr(-t))
        if self.kind == "uniform":
            r = math.sqrt(3.0)
            return min(1.0, max(0.0, (r - t) / (2 * r)))
        if self.kind == "sym_pareto":
            s = self.sigma
            if t >= s:
                return 0.5 * (t / s) ** (-self.beta)
            if t >= -s:
                return 0.5
            return 1.0 - 0.5 * (-t / s) ** (-self.beta)
        v, q = self.atoms()
        return float(q[v > t].sum())

    def kernel_spec(self):
        """(kind code, params, atom values, cumulative probs) for compiled code."""
        code = {"gaussian": _draw.GAUSSIAN, "rademacher": _draw.RADEMACHER,
                "uniform": _draw.UNIFORM, "sym_pareto": _draw.SYM_PARETO,
                "finite_discrete": _draw.FINITE}[self.kind]
        params = np.zeros(2)
        vals = np.zeros(1)
        cum = np.ones(1)
        if self.kind == "sym_pareto":
            params[:] = (self.beta, self.sigma)
        if self.kind == "finite_discrete":
            vals = np.asarray(self.values, float)
            cum = np.cumsum(np.asarray(self.probs, float))
            cum[-1] = 1.0
        return code, params, vals, cum

    def as_dict(self):
        d = {"kind": self.kind}
        if self.kind == "sym_pareto":
            d.update(beta=self.beta, sigma=self.sigma, theta0=self.theta0)
        if self.kind == "finite_discrete":
            d["atoms"] = [{"value": v, "prob": q} for v, q in zip(self.values, self.probs)]
        return d

    def sample(self, seed, n, stream_id=0):
        """``n`` consecutive increments from stream (seed, stream_id)."""
        code, params, vals, cum = self.kernel_spec()
        out = np.empty(int(n))
        _draw.draw_path(code, params, vals, cum, np.uint64(seed), np.uint64(stream_id),
                        int(n), out)
        return out


@dataclass(frozen=True)
class PathOutcome:
    survived: bool
    stopping_time: Optional[int]
    terminal_position: float

    def __post_init__(self):
        if self.survived != (self.stopping_time is None):
            raise ValueError("survived must hold exactly when there is no stopping time")
        if self.stopping_time is not None and self.stopping_time < 1:
            raise ValueError("stopping time is at least 1")


class PathStream:
    """Per-path counter stream: stream id ``SeedSpec.base + replica``."""

    def __init__(self, seed, replica=0):
        if not isinstance(seed, SeedSpec):
            seed = SeedSpec(int(seed))
        self.seed = seed
        self.replica = int(replica)

    def increments(self, dist, n):
        sid = (self.seed.base + self.replica) % 2**64
        return dist.sample(self.seed.master_seed, n, stream_id=sid)


def run_to_horizon(bd, dist, horizon, rng_stream):
    """Walk a + S(n) for n = 1..horizon, stopping on the first n with
    a + S(n) <= c sqrt(n + b).

    ``rng_stream`` is a :class:`PathStream` or an explicit sequence of
    increments (a scripted stream); a scripted stream shorter than the
    steps actually taken raises.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if isinstance(rng_stream, PathStream):
        steps = rng_stream.increments(dist, horizon)
    else:
        steps = np.asarray(list(rng_stream), float)
    pos = bd.a
    for n in range(1, horizon + 1):
        if n > steps.size:
            raise RuntimeError(f"random stream exhausted after {steps.size} steps")
        pos = pos + steps[n - 1]
        if pos <= bd.c * math.sqrt(n + bd.b):
            return PathOutcome(False, n, float(pos))
    return PathOutcome(True, None, float(pos))


def survival_measures(bd, dist, horizon, key_decimals=10):
    """Exact sub-probability measures of a + S(n) on {T > n}, n = 0..horizon.

    Returned as a list of (positions, masses) pairs.  Coincident positions
    are merged (keys rounded to ``key_decimals``), so lattice laws stay
    polynomial in the horizon.
    """
    vals, probs = dist.atoms()
    pos = np.array([float(bd.a)])
    mass = np.array([1.0])
    out = [(pos, mass)]
    for n in range(1, int(horizon) + 1):
        npos = (pos[:, None] + vals[None, :]).ravel()
        nmass = (mass[:, None] * probs[None, :]).ravel()
        alive = npos > bd.c * math.sqrt(n + bd.b)
        npos, nmass = npos[alive], nmass[alive]
        if npos.size > STATE_CAP:
            raise StateSpaceError(f"more than {STATE_CAP} states at step {n}")
        keys = np.round(npos, key_decimals)
        uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        pos = npos[first]
        mass = np.bincount(inv, weights=nmass, minlength=uniq.size)
        out.append((pos, mass))
    return out


def enumerate_survival(bd, dist, horizon):
    """[P(T > n) for n = 1..horizon] by dynamic programming."""
    if not dist.is_discrete:
        raise ValueError("enumeration needs a finitely supported law")
    meas = survival_measures(bd, dist, horizon)
    return [float(m.sum()) for _, m in meas[1:]]
