from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import kstwobign
from statsmodels.stats.multitest import multipletests

from config.settings import ENERGY_PERMUTATIONS, ENERGY_MAX_SAMPLES

logger = logging.getLogger(__name__)

CONSISTENT = "consistent with equality"
INCONSISTENT = "inconsistent"
HYPOTHESIS_VIOLATED = "hypothesis violated"


class SampleError(ValueError):
    pass


@dataclass
class TestReport:
    test: str
    statistic: float
    p_value: float | None
    corrected_alpha: float
    verdict: str
    alpha: float = 0.01
    correction: str = "holm"
    breakdown: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @property
    def consistent(self) -> bool:
        return self.verdict == CONSISTENT

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "corrected_alpha": self.corrected_alpha,
            "verdict": self.verdict,
            "alpha": self.alpha,
            "correction": self.correction,
            "breakdown": self.breakdown,
            "details": self.details,
        }


def _clean(xs, name: str) -> np.ndarray:
    arr = np.asarray(xs, dtype=float).reshape(-1)
    if arr.size == 0:
        raise SampleError(f"{name} is empty")
    return arr


def ks_two_sample(xs, ys) -> tuple[float, float]:
    a = np.sort(_clean(xs, "first sample"))
    b = np.sort(_clean(ys, "second sample"))
    n1, n2 = a.size, b.size
    pooled = np.concatenate([a, b])
    cdf1 = np.searchsorted(a, pooled, side="right") / n1
    cdf2 = np.searchsorted(b, pooled, side="right") / n2
    d = float(np.max(np.abs(cdf1 - cdf2)))
    en = np.sqrt(n1 * n2 / (n1 + n2))
    p = float(kstwobign.sf((en + 0.12 + 0.11 / en) * d)) if d > 0 else 1.0
    return d, min(max(p, 0.0), 1.0)


def _subsample(x: np.ndarray, limit: int, rng: np.random.Generator) -> np.ndarray:
    if x.shape[0] <= limit:
        return x
    return x[np.sort(rng.choice(x.shape[0], size=limit, replace=False))]


def _energy_from_distances(dist: np.ndarray, first: np.ndarray) -> float:
    """Scaled energy statistic for the split given by the boolean mask `first`."""
    w1 = first.astype(float)
    w2 = 1.0 - w1
    n, m = w1.sum(), w2.sum()
    between = w1 @ dist @ w2 / (n * m)
    within1 = w1 @ dist @ w1 / (n * n)
    within2 = w2 @ dist @ w2 / (m * m)
    return float(n * m / (n + m) * (2 * between - within1 - within2))


def energy_distance_test(A, B, n_permutations: int = ENERGY_PERMUTATIONS, seed: int = 0,
                         max_samples: int = ENERGY_MAX_SAMPLES) -> tuple[float, float]:
    """Energy statistic of two vector samples with a permutation p-value.

    Samples larger than `max_samples` are subsampled deterministically from the seed.
    """
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if a.shape[1] != b.shape[1]:
        raise SampleError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise SampleError("energy test needs non-empty samples")

    rng = np.random.default_rng(seed)
    a = _subsample(a, max_samples, rng)
    b = _subsample(b, max_samples, rng)
    pooled = np.vstack([a, b])
    dist = cdist(pooled, pooled)
    first = np.zeros(pooled.shape[0], dtype=bool)
    first[:a.shape[0]] = True

    statistic = max(_energy_from_distances(dist, first), 0.0)
    if n_permutations <= 0:
        return statistic, None
    hits = 0
    for _ in range(n_permutations):
        if _energy_from_distances(dist, rng.permutation(first)) >= statistic:
            hits += 1
    return statistic, (1 + hits) / (1 + n_permutations)


def moment_compare(A, B, orders: int = 2) -> dict:
    """Two-sample z-scores per coordinate for means (order 1) and variances (order 2)."""
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise SampleError("moment comparison needs at least two samples per group")
    if a.shape[1] != b.shape[1]:
        raise SampleError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if orders not in (1, 2):
        raise ValueError("orders must be 1 or 2")

    def z(diff, se):
        degenerate = np.where(diff == 0, 0.0, np.copysign(np.inf, diff))
        return np.where(se > 0, diff / np.where(se > 0, se, 1.0), degenerate)

    na, nb = a.shape[0], b.shape[0]
    va, vb = a.var(axis=0, ddof=1), b.var(axis=0, ddof=1)
    out = {"mean": z(a.mean(axis=0) - b.mean(axis=0), np.sqrt(va / na + vb / nb)).tolist()}
    if orders == 2:
        m4a = np.mean((a - a.mean(axis=0)) ** 4, axis=0)
        m4b = np.mean((b - b.mean(axis=0)) ** 4, axis=0)
        se = np.sqrt(np.maximum(m4a - va ** 2, 0.0) / na + np.maximum(m4b - vb ** 2, 0.0) / nb)
        out["variance"] = z(va - vb, se).tolist()
    return out


def holm(p_values, alpha: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Holm step-down correction: (reject flags, adjusted p-values, smallest corrected threshold)."""
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return np.zeros(0, dtype=bool), p, alpha
    reject, adjusted, _, _ = multipletests(p, alpha=alpha, method="holm")
    return reject, adjusted, alpha / p.size


def combine(name: str, entries: list, alpha: float, details: dict | None = None) -> TestReport:
    reject, adjusted, corrected = holm([e["p_value"] for e in entries], alpha)
    for e, r, adj in zip(entries, reject, adjusted):
        e["adjusted_p_value"] = float(adj)
        e["reject"] = bool(r)
    verdict = INCONSISTENT if reject.any() else CONSISTENT
    worst = min(entries, key=lambda e: e["p_value"]) if entries else None
    report = TestReport(
        test=name,
        statistic=worst["statistic"] if worst else 0.0,
        p_value=float(adjusted.min()) if len(adjusted) else None,
        corrected_alpha=corrected,
        verdict=verdict,
        alpha=alpha,
        breakdown=entries,
        details=details or {},
    )
    logger.info(f"{name}: {len(entries)} tests, {int(reject.sum())} rejections, verdict '{verdict}'")
    return report
