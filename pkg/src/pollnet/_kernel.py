"""Compiled event loop for the gated polling network.

The loop is resumable: it runs until a pre-drawn sample buffer or a growable
array is exhausted, saves its position in ``ist``/``fst`` and returns a code
telling the Python driver what to refill. Every check happens before any
state is mutated, so re-entering after a refill continues exactly where the
loop stopped.

Only one customer is in service at a time, so a service start and its
completion are handled in one step. Equal-time ordering: a completion
precedes an external arrival, which precedes a switch-over completion
(arrivals at a polling instant make it through the gate).
"""

import math

import numpy as np
from numba import njit

DONE = 0
NEED_IA = 1
NEED_SVC = 2
NEED_ROUTE = 3
NEED_SW = 4
GROW_RING = 5
GROW_WAITS = 6
GROW_POLLS = 7

POLL = 0
SERVE = 1
ROUTE = 2
SWITCH = 3

# integer state slots
I_PHASE = 0
I_Q = 1
I_GATE = 2
I_DEST = 3
I_SERVED = 4
I_WARMUP = 5
I_TARGET = 6
I_NB = 7
I_MISSING = 8
I_INSYS = 9
I_POLLS = 10
I_NWAIT = 11
I_NPV = 12
I_REC_W = 13
I_REC_PV = 14
I_SKIP = 15
I_VISITS = 16
I_GATE_ERR = 17
N_ISTATE = 18

# float state slots
F_T = 0
F_TWARM = 1
F_BUSY = 2
F_RDET = 3
F_TEND = 4
N_FSTATE = 5


@njit(cache=True)
def _batch(ist):
    k = (ist[I_SERVED] - ist[I_WARMUP]) * ist[I_NB] // ist[I_TARGET]
    if k < 0:
        return 0
    if k >= ist[I_NB]:
        return ist[I_NB] - 1
    return k


@njit(cache=True)
def _drain(j, t, inclusive, ist, ring, head, size, next_ext, ia_buf, ia_pos):
    cap = ring.shape[1]
    chunk = ia_buf.shape[1]
    while next_ext[j] < t or (inclusive and next_ext[j] == t):
        if ia_pos[j] >= chunk:
            ist[I_MISSING] = j
            return NEED_IA
        if size[j] >= cap:
            ist[I_MISSING] = j
            return GROW_RING
        ring[j, (head[j] + size[j]) % cap] = next_ext[j]
        size[j] += 1
        ist[I_INSYS] += 1
        next_ext[j] += ia_buf[j, ia_pos[j]]
        ia_pos[j] += 1
    return DONE


@njit(cache=True)
def _skip_idle(ist, fst, next_ext, offsets, last_poll, cyc_sum, cyc_cnt, cyc_sq, warm):
    """Jump over whole empty cycles when all switch-overs are deterministic.

    The jump stops one cycle short of the next external arrival, so every
    polling instant it elides finds all queues empty.
    """
    n = next_ext.shape[0]
    t = fst[F_T]
    r = fst[F_RDET]
    m = next_ext.min()
    if not m > t + r:
        return False
    k = int(math.floor((m - t) / r))
    if t + k * r >= m:
        k -= 1
    if k < 1:
        return False
    q = ist[I_Q]
    b = _batch(ist)
    for j in range(n):
        tj = t + offsets[q, j]
        lp = last_poll[j]
        if warm:
            if lp >= 0.0:
                c = tj - lp
                cyc_sum[b, j] += c + (k - 1) * r
                cyc_cnt[b, j] += k
                cyc_sq[j] += c * c + (k - 1) * r * r
            else:
                cyc_sum[b, j] += (k - 1) * r
                cyc_cnt[b, j] += k - 1
                cyc_sq[j] += (k - 1) * r * r
        last_poll[j] = tj + (k - 1) * r
    if warm:
        ist[I_POLLS] += k
    ist[I_VISITS] += k * n
    fst[F_T] = t + k * r
    return True


@njit(cache=True)
def advance(ist, fst, ring, head, size, next_ext,
            ia_buf, ia_pos, svc_buf, svc_pos, rt_buf, rt_pos, sw_buf, sw_pos,
            cum_route, offsets, last_poll,
            wait_sum, wait_cnt, cyc_sum, cyc_cnt, cyc_sq,
            pv_sum, pv_sq, served_q,
            wait_log, wait_log_q, pv_log, cyc_log):
    n = ring.shape[0]
    chunk = svc_buf.shape[1]
    stop = ist[I_WARMUP] + ist[I_TARGET]
    while True:
        phase = ist[I_PHASE]
        q = ist[I_Q]
        t = fst[F_T]
        warm = ist[I_SERVED] >= ist[I_WARMUP]

        if phase == POLL:
            if ist[I_SKIP] == 1 and ist[I_INSYS] == 0:
                if _skip_idle(ist, fst, next_ext, offsets, last_poll, cyc_sum, cyc_cnt, cyc_sq, warm):
                    continue
            record_pv = warm and q == 0 and ist[I_REC_PV] == 1
            if record_pv and ist[I_NPV] >= pv_log.shape[0]:
                return GROW_POLLS
            if q == 0:
                for j in range(n):
                    code = _drain(j, t, True, ist, ring, head, size, next_ext, ia_buf, ia_pos)
                    if code != DONE:
                        return code
            else:
                code = _drain(q, t, True, ist, ring, head, size, next_ext, ia_buf, ia_pos)
                if code != DONE:
                    return code
            lp = last_poll[q]
            c = t - lp if lp >= 0.0 else np.nan
            if warm:
                if lp >= 0.0:
                    b = _batch(ist)
                    cyc_sum[b, q] += c
                    cyc_cnt[b, q] += 1
                    cyc_sq[q] += c * c
                if q == 0:
                    for j in range(n):
                        x = float(size[j])
                        pv_sum[j] += x
                        pv_sq[j] += x * x
                    ist[I_POLLS] += 1
                if record_pv:
                    k = ist[I_NPV]
                    for j in range(n):
                        pv_log[k, j] = size[j]
                    cyc_log[k] = c
                    ist[I_NPV] = k + 1
            last_poll[q] = t
            ist[I_GATE] = size[q]
            ist[I_VISITS] += 1
            ist[I_PHASE] = SERVE

        elif phase == SERVE:
            if ist[I_GATE] == 0:
                ist[I_PHASE] = SWITCH
                continue
            if ist[I_GATE] > size[q]:
                ist[I_GATE_ERR] += 1
            if svc_pos[q] >= chunk:
                ist[I_MISSING] = q
                return NEED_SVC
            if rt_pos[q] >= chunk:
                ist[I_MISSING] = q
                return NEED_ROUTE
            if warm and ist[I_REC_W] == 1 and ist[I_NWAIT] >= wait_log.shape[0]:
                return GROW_WAITS
            cap = ring.shape[1]
            a = ring[q, head[q]]
            head[q] = (head[q] + 1) % cap
            size[q] -= 1
            ist[I_INSYS] -= 1
            ist[I_GATE] -= 1
            s = svc_buf[q, svc_pos[q]]
            svc_pos[q] += 1
            u = rt_buf[q, rt_pos[q]]
            rt_pos[q] += 1
            if warm:
                w = t - a
                b = _batch(ist)
                wait_sum[b, q] += w
                wait_cnt[b, q] += 1
                served_q[q] += 1
                fst[F_BUSY] += s
                if ist[I_REC_W] == 1:
                    k = ist[I_NWAIT]
                    wait_log[k] = w
                    wait_log_q[k] = q
                    ist[I_NWAIT] = k + 1
            t += s
            fst[F_T] = t
            ist[I_SERVED] += 1
            if ist[I_SERVED] == ist[I_WARMUP]:
                fst[F_TWARM] = t
            if ist[I_SERVED] >= stop:
                fst[F_TEND] = t
                return DONE
            dest = -1
            for j in range(n):
                if u < cum_route[q, j]:
                    dest = j
                    break
            if dest >= 0:
                ist[I_DEST] = dest
                ist[I_PHASE] = ROUTE

        elif phase == ROUTE:
            j = ist[I_DEST]
            code = _drain(j, t, False, ist, ring, head, size, next_ext, ia_buf, ia_pos)
            if code != DONE:
                return code
            cap = ring.shape[1]
            if size[j] >= cap:
                ist[I_MISSING] = j
                return GROW_RING
            ring[j, (head[j] + size[j]) % cap] = t
            size[j] += 1
            ist[I_INSYS] += 1
            ist[I_PHASE] = SERVE

        else:
            if sw_pos[q] >= chunk:
                ist[I_MISSING] = q
                return NEED_SW
            t += sw_buf[q, sw_pos[q]]
            sw_pos[q] += 1
            fst[F_T] = t
            ist[I_Q] = (q + 1) % n
            ist[I_PHASE] = POLL
