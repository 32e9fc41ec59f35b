"""Interventions on Markov update mappings G: R^p x R^d -> R^p.

H_G(y, u) is G evaluated at y with zeta(y) inserted at position m, with the
m'th output coordinate removed.
"""
from typing import Callable
import logging

import numpy as np

from driver.streams import path_stream
from intervention.sde_ops import InterventionSpec, insert_column
from stats.tests import ks_two_sample, combine, TestReport

logger = logging.getLogger(__name__)


def _zeta_batch(m: int, zeta) -> Callable:
    if isinstance(zeta, InterventionSpec):
        return zeta.value
    if callable(zeta):
        return lambda y: np.asarray(zeta(y), dtype=float) * np.ones(y.shape[0])
    return InterventionSpec(m, zeta).value


def intervene_update(G: Callable, m: int, zeta) -> Callable:
    """Returns H_G acting on batches: y (n, p-1), u (n, d) -> (n, p-1)."""
    value = _zeta_batch(m, zeta)

    def H(y, u):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.delete(G(insert_column(y, m, value(y)), u), m, axis=1)

    return H


def run_chain(H: Callable, y0, sample_noise: Callable, n_steps: int, n_samples: int,
              stream: np.random.Generator) -> np.ndarray:
    y = np.tile(np.asarray(y0, dtype=float), (n_samples, 1))
    out = np.empty((n_samples, n_steps + 1, y.shape[1]))
    out[:, 0] = y
    for k in range(1, n_steps + 1):
        y = H(y, sample_noise(stream, n_samples))
        out[:, k] = y
    return out


def compare_intervened_chains(G: Callable, G_tilde: Callable, m: int, zeta, y0,
                              noise: Callable, noise_tilde: Callable, n_steps: int = 10,
                              n_samples: int = 10_000, seed: int = 0, alpha: float = 0.01) -> TestReport:
    """KS tests per step and coordinate between the chains of H_G and H_G~, Holm-corrected.

    `noise(stream, n)` and `noise_tilde(stream, n)` draw (n, d) noise for G and G~.
    """
    H = intervene_update(G, m, zeta)
    H_tilde = intervene_update(G_tilde, m, zeta)
    first = run_chain(H, y0, noise, n_steps, n_samples, path_stream(seed, 0))
    second = run_chain(H_tilde, y0, noise_tilde, n_steps, n_samples, path_stream(seed, 1))

    entries = []
    for k in range(1, n_steps + 1):
        for i in range(first.shape[2]):
            d, p = ks_two_sample(first[:, k, i], second[:, k, i])
            entries.append({"test": "ks", "step": k, "coordinate": i, "statistic": d, "p_value": p})
    return combine("intervened-chains", entries, alpha,
                   {"target": m, "n_steps": n_steps, "n_samples": n_samples, "seed": seed})
