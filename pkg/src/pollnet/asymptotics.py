"""Light- and heavy-traffic limits of the mean waiting times and their interpolation.

Heavy-traffic quantities are always evaluated on the model rescaled to total
load one (:func:`ht_coefficients` does the rescaling); the per-step helpers
take that load-one :class:`~pollnet.model.TrafficSolution` directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NetworkModel, TrafficSolution, check, traffic_at


class UndefinedLimitError(ValueError):
    """A limit does not exist for the given model (e.g. a queue that never sees traffic)."""


@dataclass(frozen=True, eq=False)
class GammaLaw:
    """Gamma distribution in (shape, rate) form; mean is ``shape / rate``."""

    shape: float
    rate: float

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def variance(self) -> float:
        return self.shape / self.rate**2

    def length_biased(self) -> "GammaLaw":
        return GammaLaw(self.shape + 1.0, self.rate)


@dataclass(frozen=True, eq=False)
class QueueLengthLawHT:
    """(1 - rho) X_i converges in law to ``coeff[i] * Gamma(shape, 1)``."""

    coeff: np.ndarray
    shape: float

    @property
    def mean(self) -> np.ndarray:
        return self.coeff * self.shape

    @property
    def variance(self) -> np.ndarray:
        return self.coeff**2 * self.shape


@dataclass(frozen=True, eq=False)
class HtCoefficients:
    traffic: TrafficSolution
    u: np.ndarray
    delta: float
    delta_i: np.ndarray
    alpha: float
    mu: float
    w_ht: np.ndarray


@dataclass(frozen=True, eq=False)
class LtLimits:
    w_lt: np.ndarray


def ht_u_vector(traffic: TrafficSolution) -> np.ndarray:
    lam, rho_i, gamma = traffic.lam, traffic.rho_i, traffic.gamma
    p = traffic.model.routing
    n = len(lam)
    u = np.empty(n)
    for i in range(n):
        # no wraparound: only positions i..n-1 of the current cycle
        u[i] = lam[i] * rho_i[i:].sum() + gamma[i:] @ p[i:, i]
    return u


def ht_delta(traffic: TrafficSolution, u: np.ndarray) -> float:
    return float(u @ traffic.tsm1)


def ht_delta_i(traffic: TrafficSolution) -> np.ndarray:
    """Fluid-limit mean amount of work present at each queue (load one)."""
    m = traffic.model
    n = m.n
    lam, gamma, rho_i, bt = traffic.lam, traffic.gamma, traffic.rho_i, traffic.tsm1
    b, p = m.b, m.routing
    # feed[k, i]: work rate into queue i while the server serves queue k
    feed = gamma[:, None] * bt[None, :] * (lam[None, :] * b[:, None] + p)
    out = np.empty(n)
    for i in range(n):
        acc = 0.5 * rho_i[i] * gamma[i] * bt[i] * (1.0 + lam[i] * b[i] + p[i, i])
        built = 0.0
        for step in range(1, n):
            j = (i + step) % n
            built += feed[(j - 1) % n, i]
            acc += rho_i[j] * (0.5 * feed[j, i] + built)
        out[i] = acc
    return out


def ht_wait(coeffs: HtCoefficients, traffic: TrafficSolution | None = None) -> np.ndarray:
    t = traffic if traffic is not None else coeffs.traffic
    return _ht_wait(t, coeffs.delta, coeffs.delta_i)


def _ht_wait(t: TrafficSolution, delta: float, delta_i: np.ndarray) -> np.ndarray:
    dead = np.flatnonzero(t.gamma <= 0)
    if dead.size:
        raise UndefinedLimitError(f"queues {dead.tolist()} receive no traffic; their heavy-traffic wait is undefined")
    bracket = t.r + t.agg2 / (2.0 * delta * t.agg1)
    return bracket * delta_i / (t.tsm1 * t.gamma)


def ht_coefficients(model: NetworkModel) -> HtCoefficients:
    check(model)
    t = traffic_at(model, 1.0)
    u = ht_u_vector(t)
    delta = ht_delta(t, u)
    delta_i = ht_delta_i(t)
    mu = 2.0 * delta * t.agg1 / t.agg2
    return HtCoefficients(
        traffic=t,
        u=u,
        delta=delta,
        delta_i=delta_i,
        alpha=t.r * mu,
        mu=mu,
        w_ht=_ht_wait(t, delta, delta_i),
    )


def cycle_time_law(coeffs: HtCoefficients) -> GammaLaw:
    """Limit law of (1 - rho) C_i, the same for every queue."""
    return GammaLaw(coeffs.alpha, coeffs.mu)


def queue_length_law(coeffs: HtCoefficients, traffic: TrafficSolution | None = None) -> QueueLengthLawHT:
    t = traffic if traffic is not None else coeffs.traffic
    scale = t.agg2 / (2.0 * t.agg1)
    return QueueLengthLawHT(coeff=scale * coeffs.u / coeffs.delta, shape=coeffs.alpha)


def lt_wait(traffic: TrafficSolution) -> LtLimits:
    """Mean waits as the load vanishes: a customer is alone in the network.

    An external arrival waits for the residual of a full switch-over cycle;
    a customer routed from ``j`` waits for the switch-overs from ``j`` up to
    its new queue (a whole cycle when routed back to ``j`` itself).
    """
    m = traffic.model
    if traffic.r <= 0:
        raise UndefinedLimitError("light-traffic limit needs a positive mean total switch-over time")
    gamma, lam = traffic.gamma, traffic.lam
    dead = np.flatnonzero(gamma <= 0)
    if dead.size:
        raise UndefinedLimitError(f"queues {dead.tolist()} receive no traffic; their light-traffic wait is undefined")
    n, r_k, p = m.n, m.r, m.routing
    residual = traffic.r2 / (2.0 * traffic.r)
    w = np.empty(n)
    for i in range(n):
        acc = lam[i] / gamma[i] * residual
        for back in range(1, n + 1):
            j = (i - back) % n
            if p[j, i] == 0:
                continue
            travel = sum(r_k[(j + s) % n] for s in range(back))
            acc += gamma[j] * p[j, i] / gamma[i] * travel
        w[i] = acc
    return LtLimits(w_lt=w)


def interpolate_wait(w_lt, w_ht, rho: float) -> np.ndarray:
    """Closed-form mean waits at load ``rho`` matching both traffic limits."""
    if not 0 <= rho < 1:
        raise ValueError(f"interpolation needs 0 <= rho < 1, got {rho}")
    w_lt = np.asarray(w_lt, dtype=float)
    w_ht = np.asarray(w_ht, dtype=float)
    return (w_lt + (w_ht - w_lt) * rho) / (1.0 - rho)


def lt_limits(model: NetworkModel) -> LtLimits:
    """LT limits of a model; they do not depend on the load, evaluated at load one for convenience."""
    check(model)
    return lt_wait(traffic_at(model, 1.0))
