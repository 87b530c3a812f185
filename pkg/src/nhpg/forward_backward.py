"""Scaled forward recursion, exact backward smoothing, and backward path
simulation for the two-state model.

Data layout: ``y`` has T observations and the design matrix ``X`` has T rows,
where ``X[t]`` is the *lagged* design row entering the emission mean of
``y[t]``. The transition leaving observation t (into t+1) uses ``X[t+1]``,
which by the lag convention is the covariate row observed on the same day as
``y[t]``. The initial state law is uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import NhpgModel
from .series import CovariatePanel, DatedSeries


class LikelihoodError(RuntimeError):
    """Non-finite likelihood during the forward pass."""

    def __init__(self, t: int):
        super().__init__(f"non-finite likelihood contribution at index {t}")
        self.t = t


@dataclass(frozen=True)
class ForwardLattice:
    """Per-step filtered state probabilities and the accumulated
    log normalizing constant (the observed-data log-likelihood)."""

    pi: np.ndarray
    log_norm: float


@dataclass(frozen=True)
class StatePath:
    """Hidden path with labels in {1, 2}."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64)
        if z.ndim != 1 or not np.all((z == 1) | (z == 2)):
            raise ValueError("state labels must be 1 or 2")
        object.__setattr__(self, "z", z)

    def __len__(self) -> int:
        return len(self.z)


@njit(cache=True)
def _logistic(eta):
    if eta >= 0.0:
        return 1.0 / (1.0 + np.exp(-eta))
    e = np.exp(eta)
    return e / (1.0 + e)


@njit(cache=True)
def emission_logdens_kernel(y, X, b1, s1, b2, s2):
    T = y.shape[0]
    out = np.empty((T, 2))
    c1 = -0.5 * np.log(2.0 * np.pi * s1)
    c2 = -0.5 * np.log(2.0 * np.pi * s2)
    for t in range(T):
        m1 = 0.0
        m2 = 0.0
        for j in range(X.shape[1]):
            m1 += X[t, j] * b1[j]
            m2 += X[t, j] * b2[j]
        r1 = y[t] - m1
        r2 = y[t] - m2
        out[t, 0] = c1 - 0.5 * r1 * r1 / s1
        out[t, 1] = c2 - 0.5 * r2 * r2 / s2
    return out


@njit(cache=True)
def _trans_probs(X, t, beta1, beta2):
    """Self-transition probabilities for the step into observation t."""
    eta1 = 0.0
    eta2 = 0.0
    for j in range(X.shape[1]):
        eta1 += X[t, j] * beta1[j]
        eta2 += X[t, j] * beta2[j]
    return _logistic(eta1), _logistic(eta2)


@njit(cache=True)
def forward_kernel(logf, X, beta1, beta2, pi):
    """Fill pi with filtered probabilities; returns (log_norm, bad_t).

    bad_t is -1 on success, else the first index whose normalizer is not a
    positive finite number.
    """
    T = logf.shape[0]
    log_norm = 0.0
    a0 = 0.0
    a1 = 0.0
    for t in range(T):
        m = logf[t, 0] if logf[t, 0] > logf[t, 1] else logf[t, 1]
        if not np.isfinite(m):
            return 0.0, t
        f0 = np.exp(logf[t, 0] - m)
        f1 = np.exp(logf[t, 1] - m)
        if t == 0:
            a0 = 0.5 * f0
            a1 = 0.5 * f1
        else:
            p11, p22 = _trans_probs(X, t, beta1, beta2)
            pred0 = pi[t - 1, 0] * p11 + pi[t - 1, 1] * (1.0 - p22)
            pred1 = pi[t - 1, 0] * (1.0 - p11) + pi[t - 1, 1] * p22
            a0 = pred0 * f0
            a1 = pred1 * f1
        c = a0 + a1
        if not (c > 0.0 and np.isfinite(c)):
            return 0.0, t
        pi[t, 0] = a0 / c
        pi[t, 1] = a1 / c
        log_norm += np.log(c) + m
    return log_norm, -1


@njit(cache=True)
def backward_sample_kernel(pi, X, beta1, beta2, rng):
    T = pi.shape[0]
    z = np.empty(T, dtype=np.int64)
    z[T - 1] = 1 if rng.random() < pi[T - 1, 0] else 2
    for t in range(T - 2, -1, -1):
        p11, p22 = _trans_probs(X, t + 1, beta1, beta2)
        if z[t + 1] == 1:
            w0 = p11 * pi[t, 0]
            w1 = (1.0 - p22) * pi[t, 1]
        else:
            w0 = (1.0 - p11) * pi[t, 0]
            w1 = p22 * pi[t, 1]
        z[t] = 1 if rng.random() * (w0 + w1) < w0 else 2
    return z


@njit(cache=True)
def smoothed_kernel(pi, X, beta1, beta2):
    T = pi.shape[0]
    sm = np.empty((T, 2))
    sm[T - 1, 0] = pi[T - 1, 0]
    sm[T - 1, 1] = pi[T - 1, 1]
    for t in range(T - 2, -1, -1):
        p11, p22 = _trans_probs(X, t + 1, beta1, beta2)
        p12 = 1.0 - p11
        p21 = 1.0 - p22
        pred0 = pi[t, 0] * p11 + pi[t, 1] * p21
        pred1 = pi[t, 0] * p12 + pi[t, 1] * p22
        r0 = sm[t + 1, 0] / pred0
        r1 = sm[t + 1, 1] / pred1
        sm[t, 0] = pi[t, 0] * (p11 * r0 + p12 * r1)
        sm[t, 1] = pi[t, 1] * (p21 * r0 + p22 * r1)
        norm = sm[t, 0] + sm[t, 1]
        sm[t, 0] /= norm
        sm[t, 1] /= norm
    return sm


def _as_arrays(model: NhpgModel, y, x) -> tuple[np.ndarray, np.ndarray]:
    yv = y.values if isinstance(y, DatedSeries) else np.asarray(y, float)
    X = x.design_matrix() if isinstance(x, CovariatePanel) else np.asarray(x, float)
    if X.shape[0] != len(yv):
        raise ValueError(
            f"{len(yv)} observations but {X.shape[0]} design rows"
        )
    if X.shape[1] != model.r:
        raise ValueError(
            f"design dimension {X.shape[1]} != model dimension {model.r}"
        )
    return yv, X


def forward_pass(model: NhpgModel, y, x) -> ForwardLattice:
    """Filtered probabilities P(Z_t = i | y_1..y_t) with per-step scaling.

    The accumulated log normalizer equals the observed-data log-likelihood.
    """
    yv, X = _as_arrays(model, y, x)
    logf = emission_logdens_kernel(
        yv, X, model.state1.B, model.state1.sigma2,
        model.state2.B, model.state2.sigma2,
    )
    pi = np.empty((len(yv), 2))
    log_norm, bad = forward_kernel(
        logf, X, model.transitions.beta1, model.transitions.beta2, pi
    )
    if bad >= 0:
        raise LikelihoodError(bad)
    return ForwardLattice(pi=pi, log_norm=float(log_norm))


def backward_sample(
    lattice: ForwardLattice, model: NhpgModel, x, rng: np.random.Generator
) -> StatePath:
    """Joint draw of the hidden path from its exact posterior."""
    X = x.design_matrix() if isinstance(x, CovariatePanel) else np.asarray(x, float)
    z = backward_sample_kernel(
        lattice.pi, X, model.transitions.beta1, model.transitions.beta2, rng
    )
    return StatePath(z)


def smoothed_marginals(lattice: ForwardLattice, model: NhpgModel, x) -> np.ndarray:
    """Exact marginal probabilities P(Z_t = i | y_1..y_T) for every t."""
    X = x.design_matrix() if isinstance(x, CovariatePanel) else np.asarray(x, float)
    return smoothed_kernel(
        lattice.pi, X, model.transitions.beta1, model.transitions.beta2
    )
