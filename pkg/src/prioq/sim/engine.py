"""Slot-exact simulation kernel.

Within slot ``n`` the server first removes one unit of work (if any) from
the customer the discipline selects, then every arrival chain makes one
transition and transitions into active states deliver batches.  Unfinished
work therefore follows ``X_n = max(X_{n-1} - 1, 0) + B_n``.

Each class draws all its randomness (chain moves, batch sizes, service
times) from its own PCG64 stream, so removing a class leaves the sample
paths of the others untouched.

The kernel never reallocates: it returns early when a queue buffer could
overflow in the next slot, and :func:`simulate` grows the buffers and
resumes.
"""

from __future__ import annotations

import numba as nb
import numpy as np

FCFS, PREEMPTIVE_RESUME, NONPREEMPTIVE = 0, 1, 2
DISCIPLINES = {"fcfs": FCFS, "pr": PREEMPTIVE_RESUME, "np": NONPREEMPTIVE}
ALIASES = {"preemptive-resume": "pr", "nonpreemptive": "np"}

INVARIANT_PERIOD = 10_000

# slots of the integer scalar block
X_, CURRENT, LAST_EMPTY, VIOLATIONS, BUSY_N, REC_N = range(6)
# slots of the float scalar block
X_TIME, BUSY_SUM, BUSY_FACT2 = range(3)

# All PCG64 instances share this entry point; only the state pointer differs.
_next_double = np.random.PCG64(0).ctypes.next_double


@nb.njit(inline="always")
def _draw(cdf, start, length, values, u):
    for i in range(length - 1):
        if u < cdf[start + i]:
            return values[start + i]
    return values[start + length - 1]


@nb.njit(nogil=True)
def run_kernel(
    discipline,
    first_slot,
    slots,
    warmup,
    states,
    n_states,
    trans_off,
    trans_cdf,
    batch_idx,
    batch_len,
    batch_cdf,
    batch_val,
    max_batch,
    svc_off,
    svc_len,
    svc_cdf,
    svc_val,
    arr_slot,
    rem,
    start,
    head,
    cnt,
    waiting,
    work,
    chain,
    iscal,
    fscal,
    wait_sum,
    wait_n,
    queue_time,
    work_time,
    comp_sum,
    comp_n,
    rec,
    record_waits,
    check_invariant,
):
    """Simulate slots ``first_slot..slots``; return the first slot not simulated."""
    K = states.shape[0]
    mask = arr_slot.shape[1] - 1
    X = iscal[X_]
    current = iscal[CURRENT]
    for n in range(first_slot, slots + 1):
        for k in range(K):
            if cnt[k] + max_batch[k] > mask + 1:
                iscal[X_] = X
                iscal[CURRENT] = current
                return n
        if record_waits and iscal[REC_N] >= rec.shape[0]:
            iscal[X_] = X
            iscal[CURRENT] = current
            return n
        in_window = n > warmup
        # (1) service
        if X > 0:
            c = -1
            if discipline == PREEMPTIVE_RESUME:
                for k in range(K):
                    if cnt[k] > 0:
                        c = k
                        break
            elif current >= 0:
                c = current
            elif discipline == NONPREEMPTIVE:
                for k in range(K):
                    if cnt[k] > 0:
                        c = k
                        break
            else:
                best = np.int64(-1)
                for k in range(K):
                    if cnt[k] > 0:
                        a = arr_slot[k, head[k]]
                        if c < 0 or a < best:
                            c = k
                            best = a
            h = head[c]
            if start[c, h] < 0:
                start[c, h] = n
                waiting[c] -= 1
                if in_window:
                    w = n - arr_slot[c, h] - 1
                    wait_sum[c] += w
                    wait_n[c] += 1
                    if record_waits:
                        r = iscal[REC_N]
                        rec[r, 0] = c
                        rec[r, 1] = arr_slot[c, h]
                        rec[r, 2] = w
                        iscal[REC_N] = r + 1
            rem[c, h] -= 1
            work[c] -= 1
            X -= 1
            if rem[c, h] == 0:
                if in_window and start[c, h] > warmup:
                    comp_sum[c] += n - start[c, h] + 1
                    comp_n[c] += 1
                head[c] = (h + 1) & mask
                cnt[c] -= 1
                current = -1
            elif discipline != PREEMPTIVE_RESUME:
                current = c
        if in_window:
            for k in range(K):
                queue_time[k] += waiting[k]
        # (2) arrivals
        for k in range(K):
            m1 = n_states[k]
            row = trans_off[k] + chain[k] * m1
            u = _next_double(states[k])
            j = m1 - 1
            for jj in range(m1 - 1):
                if u < trans_cdf[row + jj]:
                    j = jj
                    break
            if j > 0:
                e = row + j
                b = _draw(batch_cdf, batch_idx[e], batch_len[e], batch_val, _next_double(states[k]))
                for _ in range(b):
                    s = _draw(svc_cdf, svc_off[k], svc_len[k], svc_val, _next_double(states[k]))
                    t = (head[k] + cnt[k]) & mask
                    arr_slot[k, t] = n
                    rem[k, t] = s
                    start[k, t] = -1
                    cnt[k] += 1
                    waiting[k] += 1
                    work[k] += s
                    X += s
            chain[k] = j
        # (3) statistics
        if in_window:
            fscal[X_TIME] += X
            for k in range(K):
                work_time[k] += work[k]
            if X == 0:
                last = iscal[LAST_EMPTY]
                if last >= 0:
                    f = n - last
                    iscal[BUSY_N] += 1
                    fscal[BUSY_SUM] += f
                    fscal[BUSY_FACT2] += f * (f - 1.0)
                iscal[LAST_EMPTY] = n
        if check_invariant and n % INVARIANT_PERIOD == 0:
            total = 0
            for k in range(K):
                for i in range(cnt[k]):
                    total += rem[k, (head[k] + i) & mask]
            if total != X:
                iscal[VIOLATIONS] += 1
    iscal[X_] = X
    iscal[CURRENT] = current
    return slots + 1


def _grown_queues(arr_slot, rem, start, head, cnt):
    """Double the ring buffers, unrolling each class's queue to the front."""
    K, cap = arr_slot.shape
    out = [np.empty((K, 2 * cap), np.int64) for _ in range(3)]
    for k in range(K):
        idx = (head[k] + np.arange(cnt[k])) % cap
        for new, old in zip(out, (arr_slot, rem, start)):
            new[k, : cnt[k]] = old[k, idx]
        head[k] = 0
    return out


def simulate(
    discipline: int,
    slots: int,
    warmup: int,
    states: np.ndarray,
    tables,
    record_waits: bool = False,
    check_invariant: bool = False,
):
    """Run one replication to completion, growing buffers as the kernel requests."""
    K = states.shape[0]
    cap = 64
    while cap < 2 * int(tables.max_batch.max()):
        cap *= 2
    arr_slot, rem, start = (np.empty((K, cap), np.int64) for _ in range(3))
    head, cnt, waiting, work, chain = (np.zeros(K, np.int64) for _ in range(5))
    iscal = np.zeros(6, np.int64)
    iscal[CURRENT] = -1
    iscal[LAST_EMPTY] = -1
    fscal = np.zeros(3)
    wait_sum, queue_time, work_time, comp_sum = (np.zeros(K) for _ in range(4))
    wait_n, comp_n = (np.zeros(K, np.int64) for _ in range(2))
    rec = np.empty((1024 if record_waits else 0, 3), np.int64)

    n = 1
    while n <= slots:
        n = run_kernel(
            discipline,
            n,
            slots,
            warmup,
            states,
            *tables.kernel_args(),
            arr_slot,
            rem,
            start,
            head,
            cnt,
            waiting,
            work,
            chain,
            iscal,
            fscal,
            wait_sum,
            wait_n,
            queue_time,
            work_time,
            comp_sum,
            comp_n,
            rec,
            record_waits,
            check_invariant,
        )
        if n <= slots:
            if record_waits and iscal[REC_N] >= rec.shape[0]:
                rec = np.concatenate([rec, np.empty_like(rec)])
            else:
                arr_slot, rem, start = _grown_queues(arr_slot, rem, start, head, cnt)
    return dict(
        wait_sum=wait_sum,
        wait_n=wait_n,
        queue_time=queue_time,
        work_time=work_time,
        comp_sum=comp_sum,
        comp_n=comp_n,
        x_time=float(fscal[X_TIME]),
        busy_n=int(iscal[BUSY_N]),
        busy_sum=float(fscal[BUSY_SUM]),
        busy_fact2=float(fscal[BUSY_FACT2]),
        invariant_violations=int(iscal[VIOLATIONS]),
        waits=rec[: iscal[REC_N]].copy(),
    )
