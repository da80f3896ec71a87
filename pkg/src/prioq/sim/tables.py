"""Flatten a :class:`SystemSpec` into the cumulative tables the kernel samples from."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import Pmf, SystemSpec


def guarded_cdf(probs) -> np.ndarray:
    """Cumulative sums with the last positive entry (and everything after) pinned to 1."""
    probs = np.asarray(probs, dtype=float)
    cdf = np.cumsum(probs)
    positive = np.flatnonzero(probs > 0)
    if positive.size:
        cdf[positive[-1] :] = 1.0
    return cdf


@dataclass(frozen=True)
class SamplingTables:
    n_states: np.ndarray
    trans_off: np.ndarray
    trans_cdf: np.ndarray
    batch_idx: np.ndarray
    batch_len: np.ndarray
    batch_cdf: np.ndarray
    batch_val: np.ndarray
    max_batch: np.ndarray
    svc_off: np.ndarray
    svc_len: np.ndarray
    svc_cdf: np.ndarray
    svc_val: np.ndarray

    def kernel_args(self):
        return (
            self.n_states,
            self.trans_off,
            self.trans_cdf,
            self.batch_idx,
            self.batch_len,
            self.batch_cdf,
            self.batch_val,
            self.max_batch,
            self.svc_off,
            self.svc_len,
            self.svc_cdf,
            self.svc_val,
        )


def build_tables(system: SystemSpec) -> SamplingTables:
    n_states, trans_off, trans_cdf = [], [], []
    batch_idx, batch_len = [], []
    batch_cdf, batch_val = [], []
    svc_off, svc_len, svc_cdf, svc_val = [], [], [], []
    max_batch = []
    pmf_slot: dict[Pmf, int] = {}
    offset = 0

    def batch_table(pmf: Pmf) -> int:
        if pmf not in pmf_slot:
            pmf_slot[pmf] = len(batch_val)
            batch_cdf.extend(guarded_cdf(pmf.probs))
            batch_val.extend(pmf.values)
        return pmf_slot[pmf]

    for stream, service in system.classes:
        P = stream.full_matrix()
        m1 = P.shape[0]
        n_states.append(m1)
        trans_off.append(offset)
        offset += m1 * m1
        for i in range(m1):
            trans_cdf.extend(guarded_cdf(np.clip(P[i], 0.0, None)))
            for j in range(m1):
                if j == 0:
                    batch_idx.append(-1)
                    batch_len.append(0)
                    continue
                entry = stream.alpha[j - 1] if i == 0 else stream.T[i - 1][j - 1]
                batch_idx.append(batch_table(entry.batch))
                batch_len.append(len(entry.batch.values))
        max_batch.append(max((max(e.batch.values) for _, e in stream.active_entries()), default=0))
        svc_off.append(len(svc_val))
        svc_len.append(len(service.pmf.values))
        svc_cdf.extend(guarded_cdf(service.pmf.probs))
        svc_val.extend(service.pmf.values)

    i64 = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
    f64 = lambda xs: np.asarray(xs, dtype=float)  # noqa: E731
    return SamplingTables(
        i64(n_states),
        i64(trans_off),
        f64(trans_cdf),
        i64(batch_idx),
        i64(batch_len),
        f64(batch_cdf),
        i64(batch_val),
        i64(max_batch),
        i64(svc_off),
        i64(svc_len),
        f64(svc_cdf),
        i64(svc_val),
    )
