"""Independent reference implementations used only to generate expected
values in tests. Deliberately simple and slow; nothing here is shared with
the library's inference path."""

from __future__ import annotations

import math
from itertools import product

import numpy as np


def pg_series_mean(b: float, c: float, terms: int = 1_000_000) -> float:
    """Mean of the Polya-Gamma distribution straight from its construction as
    an infinite sum of scaled gammas, with an integral tail correction."""
    k = np.arange(1, terms + 1)
    a = abs(c) / (2.0 * math.pi)
    denom = (k - 0.5) ** 2 + a * a
    head = float(np.sum(1.0 / denom))
    if a > 0:
        tail = (math.pi / 2.0 - math.atan(terms / a)) / a
    else:
        tail = 1.0 / terms
    return b * (head + tail) / (2.0 * math.pi**2)


def pg_oracle_draws(
    b: int, c: float, size: int, rng: np.random.Generator, terms: int = 200
) -> np.ndarray:
    """Sample PG(b, c) by truncating the sum-of-gammas construction at
    ``terms`` terms, then rescaling so the mean matches the full series."""
    k = np.arange(1, terms + 1)
    denom = (k - 0.5) ** 2 + (c / (2.0 * math.pi)) ** 2
    g = rng.gamma(b, 1.0, size=(size, terms))
    draws = (g / denom).sum(axis=1) / (2.0 * math.pi**2)
    truncated_mean = b * float(np.sum(1.0 / denom)) / (2.0 * math.pi**2)
    return draws * (pg_series_mean(b, c, terms=10**6) / truncated_mean)


def _normal_logpdf(y, mean, var):
    return -0.5 * (math.log(2.0 * math.pi * var) + (y - mean) ** 2 / var)


def _path_logprob(path, y, X, model, init):
    """Joint log density of (path, y) under the model conventions: emission
    t uses X[t], the transition into t uses X[t]."""
    logp = math.log(init[path[0] - 1])
    for t in range(1, len(path)):
        beta = model.transitions.beta(path[t - 1])
        p_stay = 1.0 / (1.0 + math.exp(-float(X[t] @ beta)))
        logp += math.log(p_stay if path[t] == path[t - 1] else 1.0 - p_stay)
    for t, label in enumerate(path):
        s = model.state(label)
        logp += _normal_logpdf(y[t], float(X[t] @ s.B), s.sigma2)
    return logp


def enumerate_paths(y, X, model, init=(0.5, 0.5)):
    """Exhaustive posterior over all 2^T hidden paths.

    Returns (path -> posterior probability, log marginal likelihood,
    smoothed marginals (T, 2), filtered marginals (T, 2)).
    """
    y = np.asarray(y, float)
    X = np.asarray(X, float)
    T = len(y)
    logps = {}
    for path in product((1, 2), repeat=T):
        logps[path] = _path_logprob(path, y, X, model, init)
    mx = max(logps.values())
    weights = {p: math.exp(lp - mx) for p, lp in logps.items()}
    total = sum(weights.values())
    posterior = {p: w / total for p, w in weights.items()}
    log_marginal = mx + math.log(total)
    smoothed = np.zeros((T, 2))
    for path, pr in posterior.items():
        for t, label in enumerate(path):
            smoothed[t, label - 1] += pr
    filtered = np.zeros((T, 2))
    for t in range(T):
        prefix_w = {}
        for prefix in product((1, 2), repeat=t + 1):
            lp = _path_logprob(prefix, y[: t + 1], X[: t + 1], model, init)
            prefix_w[prefix] = lp
        m = max(prefix_w.values())
        norm = sum(math.exp(lp - m) for lp in prefix_w.values())
        for prefix, lp in prefix_w.items():
            filtered[t, prefix[-1] - 1] += math.exp(lp - m) / norm
    return posterior, log_marginal, smoothed, filtered
