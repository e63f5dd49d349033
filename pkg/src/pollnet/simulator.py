"""Discrete-event simulation of the gated polling network with routing.

Each stochastic stream (external arrivals, services, routing decisions and
switch-overs, one of each per queue) has its own generator spawned from the
run seed, so changing one distribution leaves every other stream's samples
untouched.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernel as K
from .model import DistributionSpec, NetworkModel, check, scale_to_load, solve_traffic
from .stats import ratio_batch_means

CHUNK = 1 << 14
RING0 = 1 << 10


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    seed: int = 1
    rho_target: float = 0.5
    target_served: int = 1_000_000
    warmup_customers: int | None = None
    batches: int = 20
    record_polling_vectors: bool = False
    record_waits: bool = False

    @property
    def warmup(self) -> int:
        if self.warmup_customers is not None:
            return int(self.warmup_customers)
        return max(100_000, self.target_served // 100)

    def problems(self) -> list[str]:
        out = []
        if not 0 < self.rho_target < 1:
            out.append(f"rho_target must lie in (0, 1), got {self.rho_target}")
        if self.batches < 2:
            out.append("need at least two batches")
        if self.target_served < self.batches * 100:
            out.append(f"target_served {self.target_served} < 100 * batches ({self.batches * 100})")
        if self.warmup < 0:
            out.append("warmup must be >= 0")
        return out


@dataclass(eq=False)
class SimResult:
    rho_target: float
    lam: np.ndarray
    mean_wait: np.ndarray
    wait_ci: np.ndarray
    served: np.ndarray
    mean_cycle: float
    cycle_ci: float
    cycle_second_moment: float
    cycle_mean_per_queue: np.ndarray
    cycle_ci_per_queue: np.ndarray
    polling_mean: np.ndarray
    polling_var: np.ndarray
    polling_count: int
    realized_rho: float
    sim_time: float
    visits: int
    wall_time: float
    gate_errors: int = 0
    polling_vectors: np.ndarray | None = field(default=None, repr=False)
    cycle_samples: np.ndarray | None = field(default=None, repr=False)
    wait_samples: np.ndarray | None = field(default=None, repr=False)
    wait_queues: np.ndarray | None = field(default=None, repr=False)

    @property
    def cycle_variance(self) -> float:
        return self.cycle_second_moment - self.mean_cycle**2


def sample(spec: DistributionSpec, rng: np.random.Generator, size=None):
    """Draw from ``spec``; ``size=None`` gives a single float."""
    p = spec.params
    if spec.kind == "deterministic":
        return p[0] if size is None else np.full(size, p[0])
    if spec.kind == "exponential":
        return rng.exponential(p[0], size)
    if spec.kind == "uniform":
        return rng.uniform(p[0], p[1], size)
    if spec.kind == "gamma":
        return rng.gamma(p[0], 1.0 / p[1], size)
    raise ValueError(f"unknown distribution kind {spec.kind!r}")


def _switch_offsets(r: np.ndarray) -> np.ndarray:
    n = len(r)
    off = np.zeros((n, n))
    for q in range(n):
        for j in range(n):
            off[q, j] = sum(r[(q + s) % n] for s in range((j - q) % n))
    return off


class _Engine:
    """Owns the kernel's arrays and refills them between kernel calls."""

    def __init__(self, model: NetworkModel, cfg: SimConfig, lam: np.ndarray):
        n = model.n
        self.model = model
        self.lam = lam
        children = np.random.SeedSequence(cfg.seed).spawn(4 * n)
        gens = [np.random.Generator(np.random.PCG64(c)) for c in children]
        self.g_ia, self.g_svc, self.g_rt, self.g_sw = (gens[k * n:(k + 1) * n] for k in range(4))

        self.ia_buf = np.zeros((n, CHUNK))
        self.svc_buf = np.zeros((n, CHUNK))
        self.rt_buf = np.zeros((n, CHUNK))
        self.sw_buf = np.zeros((n, CHUNK))
        self.ia_pos = np.full(n, CHUNK, dtype=np.int64)
        self.next_ext = np.full(n, np.inf)
        for j in range(n):
            self._refill_svc(j)
            self._refill_rt(j)
            self._refill_sw(j)
            if lam[j] > 0:
                self._refill_ia(j)
                self.next_ext[j] = self.ia_buf[j, 0]
                self.ia_pos[j] = 1
        self.svc_pos = np.zeros(n, dtype=np.int64)
        self.rt_pos = np.zeros(n, dtype=np.int64)
        self.sw_pos = np.zeros(n, dtype=np.int64)

        self.ring = np.zeros((n, RING0))
        self.head = np.zeros(n, dtype=np.int64)
        self.size = np.zeros(n, dtype=np.int64)
        self.cum_route = np.cumsum(model.routing, axis=1)
        self.offsets = _switch_offsets(model.r)
        self.last_poll = np.full(n, -1.0)

        nb = cfg.batches
        self.wait_sum = np.zeros((nb, n))
        self.wait_cnt = np.zeros((nb, n), dtype=np.int64)
        self.cyc_sum = np.zeros((nb, n))
        self.cyc_cnt = np.zeros((nb, n), dtype=np.int64)
        self.cyc_sq = np.zeros(n)
        self.pv_sum = np.zeros(n)
        self.pv_sq = np.zeros(n)
        self.served_q = np.zeros(n, dtype=np.int64)
        self.wait_log = np.zeros(1024 if cfg.record_waits else 0)
        self.wait_log_q = np.zeros(len(self.wait_log), dtype=np.int32)
        self.pv_log = np.zeros((1024 if cfg.record_polling_vectors else 0, n), dtype=np.int64)
        self.cyc_log = np.zeros(len(self.pv_log))

        all_det = all(s.kind == "deterministic" for s in model.switchover)
        self.ist = np.zeros(K.N_ISTATE, dtype=np.int64)
        self.fst = np.zeros(K.N_FSTATE)
        self.ist[K.I_PHASE] = K.POLL
        self.ist[K.I_WARMUP] = cfg.warmup
        self.ist[K.I_TARGET] = cfg.target_served
        self.ist[K.I_NB] = nb
        self.ist[K.I_REC_W] = int(cfg.record_waits)
        self.ist[K.I_REC_PV] = int(cfg.record_polling_vectors)
        self.ist[K.I_SKIP] = int(all_det and not cfg.record_polling_vectors)
        self.fst[K.F_RDET] = float(model.r.sum())

    def _refill_ia(self, j):
        self.ia_buf[j] = self.g_ia[j].exponential(1.0 / self.lam[j], CHUNK)
        self.ia_pos[j] = 0

    def _refill_svc(self, j):
        self.svc_buf[j] = sample(self.model.service[j], self.g_svc[j], CHUNK)

    def _refill_rt(self, j):
        self.rt_buf[j] = self.g_rt[j].random(CHUNK)

    def _refill_sw(self, j):
        self.sw_buf[j] = sample(self.model.switchover[j], self.g_sw[j], CHUNK)

    def _grow_ring(self):
        n, cap = self.ring.shape
        new = np.zeros((n, 2 * cap))
        for j in range(n):
            idx = (self.head[j] + np.arange(self.size[j])) % cap
            new[j, : self.size[j]] = self.ring[j, idx]
        self.ring = new
        self.head[:] = 0

    def run(self):
        while True:
            code = K.advance(
                self.ist, self.fst, self.ring, self.head, self.size, self.next_ext,
                self.ia_buf, self.ia_pos, self.svc_buf, self.svc_pos,
                self.rt_buf, self.rt_pos, self.sw_buf, self.sw_pos,
                self.cum_route, self.offsets, self.last_poll,
                self.wait_sum, self.wait_cnt, self.cyc_sum, self.cyc_cnt, self.cyc_sq,
                self.pv_sum, self.pv_sq, self.served_q,
                self.wait_log, self.wait_log_q, self.pv_log, self.cyc_log,
            )
            j = int(self.ist[K.I_MISSING])
            if code == K.DONE:
                return
            if code == K.NEED_IA:
                self._refill_ia(j)
            elif code == K.NEED_SVC:
                self._refill_svc(j)
                self.svc_pos[j] = 0
            elif code == K.NEED_ROUTE:
                self._refill_rt(j)
                self.rt_pos[j] = 0
            elif code == K.NEED_SW:
                self._refill_sw(j)
                self.sw_pos[j] = 0
            elif code == K.GROW_RING:
                self._grow_ring()
            elif code == K.GROW_WAITS:
                self.wait_log = np.concatenate([self.wait_log, np.zeros(len(self.wait_log))])
                self.wait_log_q = np.concatenate([self.wait_log_q, np.zeros(len(self.wait_log_q), np.int32)])
            elif code == K.GROW_POLLS:
                self.pv_log = np.concatenate([self.pv_log, np.zeros_like(self.pv_log)])
                self.cyc_log = np.concatenate([self.cyc_log, np.zeros_like(self.cyc_log)])
            else:  # pragma: no cover
                raise RuntimeError(f"kernel returned unknown code {code}")


def run(model: NetworkModel, config: SimConfig) -> SimResult:
    """Simulate ``model`` at load ``config.rho_target`` until ``target_served`` post-warmup completions."""
    check(model)
    bad = config.problems()
    if bad:
        raise SimConfigError("; ".join(bad))
    if model.r.sum() <= 0:
        raise SimConfigError("simulation needs a positive total switch-over time")
    lam = scale_to_load(model, config.rho_target)
    traffic = solve_traffic(model, lam)
    if traffic.unstable:
        raise SimConfigError(f"load {traffic.rho} is not below one")

    started = time.perf_counter()
    eng = _Engine(model, config, lam)
    eng.run()
    wall = time.perf_counter() - started

    ist, fst = eng.ist, eng.fst
    mean_wait, wait_ci = ratio_batch_means(eng.wait_sum, eng.wait_cnt)
    cyc_mean, cyc_ci = ratio_batch_means(eng.cyc_sum, eng.cyc_cnt)
    ncyc = eng.cyc_cnt.sum(axis=0)
    npoll = int(ist[K.I_POLLS])
    pv_mean = eng.pv_sum / npoll if npoll else np.full(model.n, math.nan)
    pv_var = eng.pv_sq / npoll - pv_mean**2 if npoll else np.full(model.n, math.nan)
    span = fst[K.F_TEND] - fst[K.F_TWARM]
    nv, nw = int(ist[K.I_NPV]), int(ist[K.I_NWAIT])
    return SimResult(
        rho_target=config.rho_target,
        lam=lam,
        mean_wait=mean_wait,
        wait_ci=wait_ci,
        served=eng.served_q.copy(),
        mean_cycle=float(cyc_mean[0]),
        cycle_ci=float(cyc_ci[0]),
        cycle_second_moment=float(eng.cyc_sq[0] / ncyc[0]) if ncyc[0] else math.nan,
        cycle_mean_per_queue=cyc_mean,
        cycle_ci_per_queue=cyc_ci,
        polling_mean=pv_mean,
        polling_var=pv_var,
        polling_count=npoll,
        realized_rho=float(fst[K.F_BUSY] / span) if span > 0 else math.nan,
        sim_time=float(span),
        visits=int(ist[K.I_VISITS]),
        wall_time=wall,
        gate_errors=int(ist[K.I_GATE_ERR]),
        polling_vectors=eng.pv_log[:nv].copy() if config.record_polling_vectors else None,
        cycle_samples=eng.cyc_log[:nv].copy() if config.record_polling_vectors else None,
        wait_samples=eng.wait_log[:nw].copy() if config.record_waits else None,
        wait_queues=eng.wait_log_q[:nw].copy() if config.record_waits else None,
    )


def export_samples(result: SimResult, prefix) -> list[Path]:
    """Write recorded raw samples as CSV files next to ``prefix``; returns the paths written."""
    prefix = Path(prefix)
    written = []
    if result.polling_vectors is not None:
        path = prefix.with_name(prefix.name + "_polling.csv")
        n = result.polling_vectors.shape[1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle_q1"] + [f"x{j + 1}" for j in range(n)])
            for c, row in zip(result.cycle_samples, result.polling_vectors):
                w.writerow(["" if math.isnan(c) else repr(float(c))] + row.tolist())
        written.append(path)
    if result.wait_samples is not None:
        path = prefix.with_name(prefix.name + "_waits.csv")
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["queue", "wait"])
            for q, x in zip(result.wait_queues, result.wait_samples):
                w.writerow([int(q) + 1, repr(float(x))])
        written.append(path)
    return written
