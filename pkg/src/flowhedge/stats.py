"""Two-sample hypothesis tests used to compare reward distributions.

Both tests return plain dicts so results serialise directly.  Degenerate
inputs (zero variance, all ties) are flagged rather than raising.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, stdtr


def _rankdata(x: np.ndarray) -> np.ndarray:
    """Mid-ranks (ties share the average rank), 1-based."""
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(sx):
        j = i
        while j + 1 < len(sx) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def welch_t_test(a, b) -> dict:
    """Welch's unequal-variance t-test with Welch-Satterthwaite dof."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least 2 points")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        if ma == mb:
            return {"t_stat": 0.0, "dof": float(na + nb - 2), "p_two_sided": 1.0,
                    "degenerate": True}
        return {"t_stat": math.copysign(math.inf, ma - mb), "dof": float(na + nb - 2),
                "p_two_sided": 0.0, "degenerate": True}
    t = (ma - mb) / math.sqrt(se2)
    dof = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = 2.0 * float(stdtr(dof, -abs(t)))
    return {"t_stat": float(t), "dof": float(dof), "p_two_sided": min(p, 1.0),
            "degenerate": False}


def mann_whitney_u(a, b) -> dict:
    """Mann-Whitney U with mid-rank ties, tie-corrected normal approximation
    and continuity correction.  U counts pairs where a exceeds b (ties half)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least 2 points")
    n = na + nb
    pooled = np.concatenate([a, b])
    ranks = _rankdata(pooled)
    r_a = ranks[:na].sum()
    u_a = r_a - 0.5 * na * (na + 1)

    mu = 0.5 * na * nb
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts.astype(float) ** 3 - counts))
    var = na * nb / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return {"U": float(u_a), "p_two_sided": 1.0, "degenerate": True}
    diff = u_a - mu
    cc = 0.5 * math.copysign(1.0, diff) if diff != 0.0 else 0.0
    z = (diff - cc) / math.sqrt(var)
    p = 2.0 * float(ndtr(-abs(z)))
    return {"U": float(u_a), "p_two_sided": min(p, 1.0), "degenerate": False}
