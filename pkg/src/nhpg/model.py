"""Two-regime generative model: per-state Gaussian regressions on lagged
design rows, with logistic covariate-driven self-transition probabilities.

Conventions used throughout the package:

* design rows ``x`` have a leading intercept, length ``r``;
* the emission mean for the observation at time t uses the design row of the
  *previous* day, while the transition leaving time t uses the row of day t;
* states are labelled 1 and 2; the off-diagonal transition coefficients are
  structurally zero, so only the two self-transition vectors are stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .series import CovariatePanel, DatedSeries

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class StateParams:
    """Regression coefficients (intercept first) and emission variance of
    one regime."""

    B: np.ndarray
    sigma2: float

    def __post_init__(self):
        B = np.asarray(self.B, dtype=np.float64)
        if B.ndim != 1 or not np.all(np.isfinite(B)):
            raise ValueError("B must be a finite vector")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive and finite, got {self.sigma2}")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def r(self) -> int:
        return len(self.B)


@dataclass(frozen=True)
class TransitionParams:
    """Logistic coefficients of the two self-transition rows. The
    off-diagonal coefficients are fixed at zero by convention and never
    stored."""

    beta1: np.ndarray
    beta2: np.ndarray

    def __post_init__(self):
        b1 = np.asarray(self.beta1, dtype=np.float64)
        b2 = np.asarray(self.beta2, dtype=np.float64)
        for name, b in (("beta1", b1), ("beta2", b2)):
            if b.ndim != 1 or not np.all(np.isfinite(b)):
                raise ValueError(f"{name} must be a finite vector")
        if len(b1) != len(b2):
            raise ValueError("beta1 and beta2 must have equal length")
        object.__setattr__(self, "beta1", b1)
        object.__setattr__(self, "beta2", b2)

    @property
    def r(self) -> int:
        return len(self.beta1)

    def beta(self, state: int) -> np.ndarray:
        return self.beta1 if state == 1 else self.beta2


@dataclass(frozen=True)
class NhpgModel:
    """Full parameter set: two emission regimes plus transition coefficients,
    all sharing design dimension r."""

    state1: StateParams
    state2: StateParams
    transitions: TransitionParams

    def __post_init__(self):
        dims = {self.state1.r, self.state2.r, self.transitions.r}
        if len(dims) != 1:
            raise ValueError(f"parameter blocks disagree on dimension: {dims}")

    @property
    def r(self) -> int:
        return self.state1.r

    def state(self, label: int) -> StateParams:
        return self.state1 if label == 1 else self.state2

    def to_json(self, covariate_names=()) -> str:
        doc = {
            "b1": [float(v) for v in self.state1.B],
            "sigma2_1": self.state1.sigma2,
            "b2": [float(v) for v in self.state2.B],
            "sigma2_2": self.state2.sigma2,
            "beta1": [float(v) for v in self.transitions.beta1],
            "beta2": [float(v) for v in self.transitions.beta2],
            "covariate_names": list(covariate_names),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> tuple["NhpgModel", list]:
        doc = json.loads(text)
        model = cls(
            StateParams(np.array(doc["b1"]), doc["sigma2_1"]),
            StateParams(np.array(doc["b2"]), doc["sigma2_2"]),
            TransitionParams(np.array(doc["beta1"]), np.array(doc["beta2"])),
        )
        return model, list(doc.get("covariate_names", []))


def stable_logistic(eta: float) -> float:
    """logistic(eta) without overflow anywhere on the float range."""
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


def transition_row(x_t: np.ndarray, beta_i: np.ndarray) -> tuple[float, float]:
    """Self-transition probability pair (p_ii, 1 - p_ii) for design row x_t."""
    x_t = np.asarray(x_t, dtype=np.float64)
    beta_i = np.asarray(beta_i, dtype=np.float64)
    if x_t.shape != beta_i.shape:
        raise ValueError(
            f"design row has length {x_t.shape} but coefficients {beta_i.shape}"
        )
    p = stable_logistic(float(x_t @ beta_i))
    return p, 1.0 - p


def emission_logdensity(y_t: float, x_prev: np.ndarray, state: StateParams) -> float:
    """Gaussian log-density of y_t with mean x_prev . B and the state's
    variance."""
    mean = float(np.asarray(x_prev, dtype=np.float64) @ state.B)
    resid = y_t - mean
    return -0.5 * (LOG_2PI + math.log(state.sigma2)) - 0.5 * resid * resid / state.sigma2


def simulate(
    model: NhpgModel,
    covariates: CovariatePanel,
    z1: int,
    rng: np.random.Generator,
) -> tuple[DatedSeries, np.ndarray]:
    """Forward-simulate the model over a covariate panel.

    The hidden path covers every panel row, starting from ``z1``; transitions
    out of row t use design row t. Observations start at the second panel row
    (the first row only supplies the lagged emission design), so the returned
    series has one value fewer than the panel has rows.

    Returns the observations and the full hidden path (length = panel rows).
    """
    if covariates.nrows < 2:
        raise ValueError("need at least 2 covariate rows to simulate")
    if z1 not in (1, 2):
        raise ValueError(f"initial state must be 1 or 2, got {z1}")
    x = covariates.design_matrix()
    n = x.shape[0]
    if x.shape[1] != model.r:
        raise ValueError(
            f"panel design dimension {x.shape[1]} != model dimension {model.r}"
        )
    z = np.empty(n, dtype=np.int64)
    z[0] = z1
    for t in range(n - 1):
        p_stay, _ = transition_row(x[t], model.transitions.beta(int(z[t])))
        if rng.random() < p_stay:
            z[t + 1] = z[t]
        else:
            z[t + 1] = 3 - z[t]
    y = np.empty(n - 1)
    for t in range(1, n):
        s = model.state(int(z[t]))
        y[t - 1] = x[t - 1] @ s.B + math.sqrt(s.sigma2) * rng.standard_normal()
    return DatedSeries(covariates.dates[1:], y, "simulated"), z
