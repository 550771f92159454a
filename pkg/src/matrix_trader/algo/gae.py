"""Generalized advantage estimation."""

from __future__ import annotations

import numpy as np


def compute_gae(rewards, values, dones, bootstrap_value: float,
                gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Exponentially weighted advantage estimates and value targets.

    delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t
    A_t     = delta_t + gamma * lam * (1 - done_t) * A_{t+1}

    v_{t+1} for the final step is `bootstrap_value`. Done flags zero both
    terms, so no credit leaks across episode boundaries. Returned as
    float64 (advantages, returns) with returns_t = A_t + v_t.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=np.float64)
    if not (len(r) == len(v) == len(d)):
        raise ValueError(
            f"length mismatch: rewards {len(r)}, values {len(v)}, dones {len(d)}"
        )
    n = len(r)
    adv = np.empty(n, dtype=np.float64)
    last = 0.0
    for t in range(n - 1, -1, -1):
        next_value = bootstrap_value if t == n - 1 else v[t + 1]
        nonterminal = 1.0 - d[t]
        delta = r[t] + gamma * next_value * nonterminal - v[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv, adv + v
