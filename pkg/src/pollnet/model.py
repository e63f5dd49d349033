"""Network description, validation and the static (load-independent) solvers.

A :class:`NetworkModel` holds everything except the absolute arrival rates:
those are fixed by picking a total load and scaling the arrival weights
(:func:`scale_to_load`), which keeps the rate ratios constant as the
heavy-traffic limit requires.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

KINDS = ("deterministic", "exponential", "uniform", "gamma")

RESIDUAL_TOL = 1e-10
PIVOT_TOL = 1e-12
ROW_SUM_TOL = 1e-12


class ModelError(ValueError):
    """Invalid network description; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(f"invalid model ({len(self.violations)} violation(s)): {lines}")


class SingularSystemError(ArithmeticError):
    """The routing matrix does not let every customer leave the network."""


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    where: str = ""


@dataclass(frozen=True)
class DistributionSpec:
    """A service or switch-over time distribution with closed-form moments.

    Parameters per kind: ``deterministic(value)``, ``exponential(mean)``,
    ``uniform(lower, upper)``, ``gamma(shape, rate)``.
    """

    kind: str
    params: tuple[float, ...]

    @classmethod
    def deterministic(cls, value: float) -> "DistributionSpec":
        return cls("deterministic", (float(value),))

    @classmethod
    def exponential(cls, mean: float) -> "DistributionSpec":
        return cls("exponential", (float(mean),))

    @classmethod
    def uniform(cls, lower: float, upper: float) -> "DistributionSpec":
        return cls("uniform", (float(lower), float(upper)))

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "DistributionSpec":
        return cls("gamma", (float(shape), float(rate)))

    @property
    def mean(self) -> float:
        p = self.params
        if self.kind in ("deterministic", "exponential"):
            return p[0]
        if self.kind == "uniform":
            return 0.5 * (p[0] + p[1])
        if self.kind == "gamma":
            return p[0] / p[1]
        raise ValueError(f"unknown distribution kind {self.kind!r}")

    @property
    def second_moment(self) -> float:
        p = self.params
        if self.kind == "deterministic":
            return p[0] * p[0]
        if self.kind == "exponential":
            return 2.0 * p[0] * p[0]
        if self.kind == "uniform":
            lo, hi = p
            return (lo * lo + lo * hi + hi * hi) / 3.0
        if self.kind == "gamma":
            shape, rate = p
            return shape * (shape + 1.0) / (rate * rate)
        raise ValueError(f"unknown distribution kind {self.kind!r}")

    @property
    def variance(self) -> float:
        if self.kind == "deterministic":
            return 0.0
        return max(self.second_moment - self.mean**2, 0.0)

    def problems(self, allow_zero_mean: bool) -> list[str]:
        """Human-readable reasons this spec is unusable (empty when fine)."""
        if self.kind not in KINDS:
            return [f"unknown kind {self.kind!r}"]
        arity = {"deterministic": 1, "exponential": 1, "uniform": 2, "gamma": 2}[self.kind]
        if len(self.params) != arity:
            return [f"{self.kind} takes {arity} parameter(s), got {len(self.params)}"]
        if not all(math.isfinite(x) for x in self.params):
            return ["parameters must be finite"]
        out = []
        p = self.params
        if self.kind == "deterministic" and p[0] < 0:
            out.append("value must be >= 0")
        elif self.kind == "exponential" and p[0] <= 0:
            out.append("mean must be > 0")
        elif self.kind == "uniform" and not 0 <= p[0] <= p[1]:
            out.append("need 0 <= lower <= upper")
        elif self.kind == "gamma" and (p[0] <= 0 or p[1] <= 0):
            out.append("shape and rate must be > 0")
        if not out and not allow_zero_mean and self.mean <= 0:
            out.append("service time mean must be > 0")
        return out

    def to_dict(self) -> dict:
        names = {
            "deterministic": ("value",),
            "exponential": ("mean",),
            "uniform": ("lower", "upper"),
            "gamma": ("shape", "rate"),
        }[self.kind]
        return {"kind": self.kind, **dict(zip(names, self.params))}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        kind = d.get("kind")
        if kind == "deterministic":
            return cls.deterministic(d["value"])
        if kind == "exponential":
            return cls.exponential(d["mean"])
        if kind == "uniform":
            return cls.uniform(d["lower"], d["upper"])
        if kind == "gamma":
            return cls.gamma(d["shape"], d["rate"])
        raise ValueError(f"unknown distribution kind {kind!r}")


ZERO = DistributionSpec.deterministic(0.0)


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Cyclic single-server network with gated service and Markov routing.

    ``switchover[i]`` is incurred when the server leaves queue ``i`` for
    ``i + 1`` (mod ``n``). ``routing[i][j]`` is the probability that a
    customer finishing service at ``i`` joins ``j``; the row deficit is the
    exit probability.
    """

    arrival_weights: np.ndarray
    service: tuple[DistributionSpec, ...]
    switchover: tuple[DistributionSpec, ...]
    routing: np.ndarray
    name: str = ""

    def __post_init__(self):
        w = np.array(self.arrival_weights, dtype=float).reshape(-1)
        n = len(w)
        p = np.array(self.routing, dtype=float)
        if p.size == 0:
            p = np.zeros((n, n))
        w.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "arrival_weights", w)
        object.__setattr__(self, "routing", p)
        sw = tuple(ZERO if s.kind == "uniform" and s.params == (0.0, 0.0) else s for s in self.switchover)
        object.__setattr__(self, "service", tuple(self.service))
        object.__setattr__(self, "switchover", sw)

    @property
    def n(self) -> int:
        return len(self.arrival_weights)

    @property
    def b(self) -> np.ndarray:
        return np.array([s.mean for s in self.service])

    @property
    def b2(self) -> np.ndarray:
        return np.array([s.second_moment for s in self.service])

    @property
    def r(self) -> np.ndarray:
        """Per-queue mean switch-over times."""
        return np.array([s.mean for s in self.switchover])

    @property
    def exit_prob(self) -> np.ndarray:
        return 1.0 - self.routing.sum(axis=1)

    def relabel(self, order: Sequence[int]) -> "NetworkModel":
        """The same physical network visited in ``order``.

        Position ``k`` of the new model is physical queue ``order[k]``; the
        switch-over out of each position keeps the old index's distribution.
        Only queue parameters and routing move, so the relabelled model
        differs from the original in visit order alone.
        """
        order = list(order)
        p = self.routing[np.ix_(order, order)]
        return NetworkModel(
            arrival_weights=self.arrival_weights[order],
            service=tuple(self.service[k] for k in order),
            switchover=self.switchover,
            routing=p,
            name=self.name,
        )

    def with_switchover(self, switchover) -> "NetworkModel":
        return NetworkModel(self.arrival_weights, self.service, tuple(switchover), self.routing, self.name)

    def with_service(self, service) -> "NetworkModel":
        return NetworkModel(self.arrival_weights, tuple(service), self.switchover, self.routing, self.name)

    def digest(self) -> str:
        blob = json.dumps(
            {
                "w": self.arrival_weights.tolist(),
                "s": [d.to_dict() for d in self.service],
                "r": [d.to_dict() for d in self.switchover],
                "p": self.routing.tolist(),
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class TrafficSolution:
    """Per-queue quantities of a model at one set of absolute arrival rates."""

    model: NetworkModel
    lam: np.ndarray
    gamma: np.ndarray
    rho_i: np.ndarray
    rho: float
    tsm1: np.ndarray
    tsm2: np.ndarray
    agg1: float
    agg2: float
    r: float
    r2: float
    unstable: bool = field(default=False)


def _lu(a: np.ndarray):
    with warnings.catch_warnings():
        # exact-zero pivots are reported through SingularSystemError below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise SingularSystemError(
            "I - P is numerically singular: some customers are never routed out of the network"
        )
    return lu, piv


def _solve(a: np.ndarray, rhs: np.ndarray, factor=None) -> np.ndarray:
    factor = factor or _lu(a)
    x = scipy.linalg.lu_solve(factor, rhs)
    res = np.max(np.abs(a @ x - rhs), initial=0.0)
    scale = max(1.0, np.max(np.abs(rhs), initial=0.0))
    if not np.all(np.isfinite(x)) or res > RESIDUAL_TOL * scale:
        raise SingularSystemError(f"linear solve residual {res:.3g} exceeds tolerance")
    return x


def validate(model: NetworkModel) -> list[Violation]:
    """Every violated model invariant; an empty list means the model is usable."""
    out: list[Violation] = []
    n = model.n
    w = model.arrival_weights
    p = model.routing
    if n < 1:
        return [Violation("queue-count", "need at least one queue", "n")]
    if len(model.service) != n:
        out.append(Violation("dimension", f"{len(model.service)} service specs for {n} queues", "service"))
    if len(model.switchover) != n:
        out.append(Violation("dimension", f"{len(model.switchover)} switch-over specs for {n} queues", "switchover"))
    if p.shape != (n, n):
        out.append(Violation("dimension", f"routing is {p.shape}, expected {(n, n)}", "routing"))
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        out.append(Violation("negative-weight", "arrival weights must be finite and >= 0", "arrival_weights"))
    elif not np.any(w > 0):
        out.append(Violation("no-arrivals", "at least one arrival weight must be positive", "arrival_weights"))
    for i, s in enumerate(model.service):
        for msg in s.problems(allow_zero_mean=False):
            out.append(Violation("distribution", msg, f"service[{i}]"))
    for i, s in enumerate(model.switchover):
        for msg in s.problems(allow_zero_mean=True):
            out.append(Violation("distribution", msg, f"switchover[{i}]"))
    if p.shape != (n, n):
        return out
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        out.append(Violation("routing-range", "routing entries must lie in [0, 1]", "routing"))
        return out
    rows = p.sum(axis=1)
    for i in np.flatnonzero(rows > 1 + ROW_SUM_TOL):
        out.append(Violation("row-stochasticity", f"routing row {i} sums to {rows[i]:.6g} > 1", f"routing[{i}]"))
    if out:
        return out
    # Leakiness certified by solving the total-service equations with unit means.
    try:
        x = _solve(np.eye(n) - p, np.ones(n))
        if np.any(x < 1 - RESIDUAL_TOL):
            raise SingularSystemError("non-positive total service")
    except SingularSystemError as exc:
        out.append(Violation("non-leaky routing", str(exc), "routing"))
    return out


def check(model: NetworkModel) -> NetworkModel:
    violations = validate(model)
    if violations:
        raise ModelError(violations)
    return model


def switchover_aggregate(model: NetworkModel) -> tuple[float, float]:
    """Mean and second moment of the total switch-over time in one cycle."""
    r = float(sum(s.mean for s in model.switchover))
    var = float(sum(s.variance for s in model.switchover))
    return r, var + r * r


def total_service_moments(model: NetworkModel) -> tuple[np.ndarray, np.ndarray]:
    """First two moments of the total service a customer collects from entry at each queue until exit."""
    n = model.n
    p = model.routing
    a = np.eye(n) - p
    factor = _lu(a)
    b = model.b
    tsm1 = _solve(a, b, factor)
    tsm2 = _solve(a, model.b2 + 2.0 * b * (p @ tsm1), factor)
    return tsm1, tsm2


def _arrivals(model: NetworkModel, lam: np.ndarray) -> np.ndarray:
    return _solve(np.eye(model.n) - model.routing.T, lam)


def solve_traffic(model: NetworkModel, lambda_abs) -> TrafficSolution:
    """Solve the traffic equations and collect every load-dependent quantity.

    ``unstable`` is set when the total load reaches one; the heavy-traffic
    routines accept that (they work at load one), everything else refuses.
    """
    lam = np.asarray(lambda_abs, dtype=float).reshape(-1)
    if lam.shape != (model.n,) or np.any(lam < 0):
        raise ValueError("lambda_abs must be a nonnegative vector with one rate per queue")
    gamma = _arrivals(model, lam)
    rho_i = gamma * model.b
    rho = float(rho_i.sum())
    tsm1, tsm2 = total_service_moments(model)
    total = lam.sum()
    if total > 0:
        agg1 = float(lam @ tsm1 / total)
        agg2 = float(lam @ tsm2 / total)
    else:
        agg1 = agg2 = math.nan
    r, r2 = switchover_aggregate(model)
    return TrafficSolution(
        model=model,
        lam=lam,
        gamma=gamma,
        rho_i=rho_i,
        rho=rho,
        tsm1=tsm1,
        tsm2=tsm2,
        agg1=agg1,
        agg2=agg2,
        r=r,
        r2=r2,
        unstable=rho >= 1.0,
    )


def scale_to_load(model: NetworkModel, rho_target: float) -> np.ndarray:
    """Absolute external rates proportional to the weights giving total load ``rho_target``."""
    if not rho_target > 0:
        raise ValueError(f"rho_target must be positive, got {rho_target}")
    w = model.arrival_weights
    unit = float((_arrivals(model, w) * model.b).sum())
    if unit <= 0:
        raise ValueError("arrival weights produce zero load")
    return w * (rho_target / unit)


def traffic_at(model: NetworkModel, rho: float) -> TrafficSolution:
    return solve_traffic(model, scale_to_load(model, rho))
