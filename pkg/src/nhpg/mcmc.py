"""Gibbs sampler for the two-regime model and its summarization layer.

One sweep cycles three blocks:

1. hidden path by forward filtering / backward sampling,
2. per-state regression parameters from the Normal-Inverse-Gamma conditional
   (variance drawn marginally of the coefficients, then coefficients given
   the variance),
3. self-transition coefficients via Polya-Gamma augmentation.

State labels are made identifiable by enforcing sigma2_1 >= sigma2_2 at the
end of each sweep; when violated, every parameter block and the sampled path
are relabelled together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .forward_backward import (
    StatePath,
    backward_sample_kernel,
    emission_logdens_kernel,
    forward_kernel,
    smoothed_kernel,
)
from .model import NhpgModel, StateParams, TransitionParams
from .polya_gamma import pg_draw
from .series import CovariatePanel, DatedSeries


class ChainError(RuntimeError):
    """Numerical failure mid-chain. Carries the failing sweep index and the
    draws retained up to that point."""

    def __init__(self, sweep: int, t: int, checkpoint: "McmcDraws | None"):
        super().__init__(
            f"non-finite likelihood at sweep {sweep}, observation {t}"
        )
        self.sweep = sweep
        self.t = t
        self.checkpoint = checkpoint


@dataclass(frozen=True)
class Priors:
    """Weakly-informative defaults sized for z-scored covariates.

    The regression block uses the conjugate structure B | sigma2 ~ Normal
    with precision ``prec_b0 / sigma2`` and sigma2 ~ Inverse-Gamma. The
    transition block uses an independent Normal on each coefficient vector;
    ``prec_beta0`` may be a scalar or a per-coordinate vector (the latter
    allows pinning individual coefficients near a fixed value).
    """

    mean_b0: float | np.ndarray = 0.0
    prec_b0: float = 0.01
    ig_shape: float = 2.5
    ig_scale: float = 0.5
    mean_beta0: float | np.ndarray = 0.0
    prec_beta0: float | np.ndarray = 0.01

    def __post_init__(self):
        if not self.prec_b0 > 0:
            raise ValueError("prec_b0 must be positive")
        if not self.ig_shape > 1:
            raise ValueError("ig_shape must exceed 1 so the prior mean exists")
        if not self.ig_scale > 0:
            raise ValueError("ig_scale must be positive")
        if not np.all(np.asarray(self.prec_beta0) > 0):
            raise ValueError("prec_beta0 must be positive")

    def expand(self, r: int) -> tuple[np.ndarray, float, float, float, np.ndarray, np.ndarray]:
        """Broadcast scalar hyperparameters to design dimension r."""
        b0 = np.broadcast_to(np.asarray(self.mean_b0, float), (r,)).copy()
        beta_mean = np.broadcast_to(np.asarray(self.mean_beta0, float), (r,)).copy()
        beta_prec = np.broadcast_to(np.asarray(self.prec_beta0, float), (r,)).copy()
        return b0, float(self.prec_b0), float(self.ig_shape), float(self.ig_scale), beta_mean, beta_prec


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 20_000
    burn_in: int = 10_000
    thin: int = 2
    seed: int = 0
    chains: int = 1

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must be in [0, iterations)")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class McmcDraws:
    """Retained sweeps: parameter blocks, sampled paths, and the exact
    smoothed P(Z_t = 1) computed under each retained parameter draw."""

    b: np.ndarray          # (n, 2, r)
    sigma2: np.ndarray     # (n, 2)
    beta: np.ndarray       # (n, 2, r)
    paths: np.ndarray      # (n, T) labels in {1, 2}
    smoothed_p1: np.ndarray  # (n, T)
    loglik: np.ndarray     # (n,)
    prior_fallbacks: np.ndarray  # counts: [mean s1, mean s2, logit s1, logit s2]
    dates: np.ndarray | None = None
    covariate_names: tuple = ()

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def r(self) -> int:
        return self.b.shape[2]

    @property
    def T(self) -> int:
        return self.paths.shape[1]

    def model_at(self, k: int) -> NhpgModel:
        return NhpgModel(
            StateParams(self.b[k, 0], self.sigma2[k, 0]),
            StateParams(self.b[k, 1], self.sigma2[k, 1]),
            TransitionParams(self.beta[k, 0], self.beta[k, 1]),
        )

    def smoothed_matrix(self, k: int) -> np.ndarray:
        p1 = self.smoothed_p1[k]
        return np.column_stack([p1, 1.0 - p1])

    @classmethod
    def concat(cls, parts: list["McmcDraws"]) -> "McmcDraws":
        first = parts[0]
        return cls(
            b=np.concatenate([p.b for p in parts]),
            sigma2=np.concatenate([p.sigma2 for p in parts]),
            beta=np.concatenate([p.beta for p in parts]),
            paths=np.concatenate([p.paths for p in parts]),
            smoothed_p1=np.concatenate([p.smoothed_p1 for p in parts]),
            loglik=np.concatenate([p.loglik for p in parts]),
            prior_fallbacks=np.sum([p.prior_fallbacks for p in parts], axis=0),
            dates=first.dates,
            covariate_names=first.covariate_names,
        )


@dataclass(frozen=True)
class CoefficientSummary:
    name: str
    state: int
    block: str  # "mean" or "transition"
    mean: float
    q025: float
    q975: float
    significant: bool


@dataclass(frozen=True)
class PosteriorSummary:
    coefficients: tuple
    smoothed_p1: np.ndarray
    assigned_state: np.ndarray
    state_sizes: tuple
    dates: np.ndarray | None = None


@njit(cache=True)
def _chol_solve(L, rhs):
    """Solve (L L') x = rhs for lower-triangular L."""
    r = L.shape[0]
    w = np.empty(r)
    for i in range(r):
        acc = rhs[i]
        for j in range(i):
            acc -= L[i, j] * w[j]
        w[i] = acc / L[i, i]
    x = np.empty(r)
    for i in range(r - 1, -1, -1):
        acc = w[i]
        for j in range(i + 1, r):
            acc -= L[j, i] * x[j]
        x[i] = acc / L[i, i]
    return x


@njit(cache=True)
def _solve_upper(L, v):
    """Solve L' x = v for lower-triangular L (maps N(0,I) to N(0, (LL')^-1))."""
    r = L.shape[0]
    x = np.empty(r)
    for i in range(r - 1, -1, -1):
        acc = v[i]
        for j in range(i + 1, r):
            acc -= L[j, i] * x[j]
        x[i] = acc / L[i, i]
    return x


@njit(cache=True)
def _invgamma_draw(shape, scale, rng):
    g = rng.gamma(shape, 1.0 / scale)
    if g <= 0.0:
        g = 1e-300
    return 1.0 / g


@njit(cache=True)
def mean_update_kernel(y, X, z, b0, prec_b0, ig_shape, ig_scale, rng):
    """Blocked Normal-Inverse-Gamma draw per state.

    States visited fewer than r + 2 times fall back to a prior draw; the
    returned flags record which states did.
    """
    T, r = X.shape
    out_b = np.empty((2, r))
    out_s2 = np.empty(2)
    fallback = np.zeros(2, dtype=np.bool_)
    for s in range(2):
        label = s + 1
        n_s = 0
        K = np.zeros((r, r))
        rhs = np.zeros(r)
        yty = 0.0
        for t in range(T):
            if z[t] == label:
                n_s += 1
                yt = y[t]
                yty += yt * yt
                for j in range(r):
                    xj = X[t, j]
                    rhs[j] += xj * yt
                    for k in range(j, r):
                        K[j, k] += xj * X[t, k]
        if n_s < r + 2:
            fallback[s] = True
            s2 = _invgamma_draw(ig_shape, ig_scale, rng)
            out_s2[s] = s2
            sd = np.sqrt(s2 / prec_b0)
            for j in range(r):
                out_b[s, j] = b0[j] + sd * rng.standard_normal()
            continue
        b0Kb0 = 0.0
        for j in range(r):
            rhs[j] += prec_b0 * b0[j]
            b0Kb0 += prec_b0 * b0[j] * b0[j]
            K[j, j] += prec_b0
            for k in range(j + 1, r):
                K[k, j] = K[j, k]
        L = np.linalg.cholesky(K)
        b_n = _chol_solve(L, rhs)
        quad = 0.0
        for j in range(r):
            quad += rhs[j] * b_n[j]
        a_n = ig_shape + 0.5 * n_s
        c_n = ig_scale + 0.5 * (yty + b0Kb0 - quad)
        if c_n < 1e-300:
            c_n = 1e-300
        s2 = _invgamma_draw(a_n, c_n, rng)
        out_s2[s] = s2
        v = np.empty(r)
        for j in range(r):
            v[j] = rng.standard_normal()
        step = _solve_upper(L, v)
        sd = np.sqrt(s2)
        for j in range(r):
            out_b[s, j] = b_n[j] + sd * step[j]
    return out_b, out_s2, fallback


@njit(cache=True)
def logistic_update_kernel(X, z, beta_cur, beta_mean, beta_prec, rng):
    """Polya-Gamma augmented Normal draw of each self-transition row.

    For each state, the responses are the indicators of staying, with design
    rows taken from the day of the transition. States never exited fall back
    to a prior draw.
    """
    T, r = X.shape
    out = np.empty((2, r))
    fallback = np.zeros(2, dtype=np.bool_)
    for s in range(2):
        label = s + 1
        P = np.zeros((r, r))
        rhs = np.empty(r)
        for j in range(r):
            P[j, j] = beta_prec[j]
            rhs[j] = beta_prec[j] * beta_mean[j]
        m = 0
        for t in range(T - 1):
            if z[t] != label:
                continue
            m += 1
            eta = 0.0
            for j in range(r):
                eta += X[t + 1, j] * beta_cur[s, j]
            w = pg_draw(eta, rng)
            kappa = (1.0 if z[t + 1] == label else 0.0) - 0.5
            for j in range(r):
                xj = X[t + 1, j]
                rhs[j] += kappa * xj
                for k in range(j, r):
                    P[j, k] += w * xj * X[t + 1, k]
        if m == 0:
            fallback[s] = True
            for j in range(r):
                out[s, j] = beta_mean[j] + rng.standard_normal() / np.sqrt(beta_prec[j])
            continue
        for j in range(r):
            for k in range(j + 1, r):
                P[k, j] = P[j, k]
        L = np.linalg.cholesky(P)
        mean = _chol_solve(L, rhs)
        v = np.empty(r)
        for j in range(r):
            v[j] = rng.standard_normal()
        step = _solve_upper(L, v)
        for j in range(r):
            out[s, j] = mean[j] + step[j]
    return out, fallback


@njit(cache=True)
def _chain_kernel(y, X, z, b, s2, beta,
                  b0, prec_b0, ig_shape, ig_scale, beta_mean, beta_prec,
                  iterations, burn_in, thin, enforce_order, rng,
                  out_b, out_s2, out_beta, out_z, out_sm, out_ll, fallbacks):
    T = y.shape[0]
    n_keep = out_b.shape[0]
    keep = 0
    pi = np.empty((T, 2))
    for sweep in range(iterations):
        logf = emission_logdens_kernel(y, X, b[0], s2[0], b[1], s2[1])
        ll, bad = forward_kernel(logf, X, beta[0], beta[1], pi)
        if bad >= 0:
            return 1, sweep, bad, keep
        z = backward_sample_kernel(pi, X, beta[0], beta[1], rng)
        b, s2, fb_mean = mean_update_kernel(
            y, X, z, b0, prec_b0, ig_shape, ig_scale, rng
        )
        beta, fb_logit = logistic_update_kernel(
            X, z, beta, beta_mean, beta_prec, rng
        )
        for s in range(2):
            if fb_mean[s]:
                fallbacks[s] += 1
            if fb_logit[s]:
                fallbacks[2 + s] += 1
        if enforce_order and s2[0] < s2[1]:
            for j in range(b.shape[1]):
                tmp = b[0, j]; b[0, j] = b[1, j]; b[1, j] = tmp
                tmp = beta[0, j]; beta[0, j] = beta[1, j]; beta[1, j] = tmp
            tmp = s2[0]; s2[0] = s2[1]; s2[1] = tmp
            for t in range(T):
                z[t] = 3 - z[t]
        if sweep >= burn_in and (sweep - burn_in) % thin == 0 and keep < n_keep:
            logf2 = emission_logdens_kernel(y, X, b[0], s2[0], b[1], s2[1])
            ll2, bad2 = forward_kernel(logf2, X, beta[0], beta[1], pi)
            if bad2 >= 0:
                return 1, sweep, bad2, keep
            sm = smoothed_kernel(pi, X, beta[0], beta[1])
            for j in range(b.shape[1]):
                out_b[keep, 0, j] = b[0, j]
                out_b[keep, 1, j] = b[1, j]
                out_beta[keep, 0, j] = beta[0, j]
                out_beta[keep, 1, j] = beta[1, j]
            out_s2[keep, 0] = s2[0]
            out_s2[keep, 1] = s2[1]
            for t in range(T):
                out_z[keep, t] = z[t]
                out_sm[keep, t] = sm[t, 0]
            out_ll[keep] = ll2
            keep += 1
    return 0, iterations, -1, keep


def _coerce_inputs(y, x) -> tuple[np.ndarray, np.ndarray, np.ndarray | None, tuple]:
    if isinstance(y, DatedSeries):
        yv, dates = y.values, y.dates
    else:
        yv, dates = np.ascontiguousarray(y, dtype=np.float64), None
    if isinstance(x, CovariatePanel):
        X, names = x.design_matrix(), x.names
    else:
        X, names = np.ascontiguousarray(x, dtype=np.float64), ()
    if X.shape[0] != len(yv):
        raise ValueError(f"{len(yv)} observations but {X.shape[0]} design rows")
    return yv, X, dates, tuple(names)


def _coerce_path(z) -> np.ndarray:
    arr = z.z if isinstance(z, StatePath) else np.asarray(z, dtype=np.int64)
    return np.ascontiguousarray(arr, dtype=np.int64)


def sample_mean_params(
    y, x, z, priors: Priors, rng: np.random.Generator
) -> tuple[StateParams, StateParams]:
    """One conjugate draw of (B_s, sigma2_s) for each state given the path."""
    yv, X, _, _ = _coerce_inputs(y, x)
    zv = _coerce_path(z)
    b0, prec_b0, ig_shape, ig_scale, _, _ = priors.expand(X.shape[1])
    b, s2, _ = mean_update_kernel(yv, X, zv, b0, prec_b0, ig_shape, ig_scale, rng)
    return StateParams(b[0], s2[0]), StateParams(b[1], s2[1])


def sample_logistic_params(
    x, z, priors: Priors, rng: np.random.Generator,
    current: TransitionParams | None = None,
) -> TransitionParams:
    """One Polya-Gamma augmented draw of both self-transition rows.

    ``current`` supplies the coefficients the latent PG variables condition
    on; it defaults to the prior mean (appropriate only for a first sweep).
    """
    if isinstance(x, CovariatePanel):
        X = x.design_matrix()
    else:
        X = np.ascontiguousarray(x, dtype=np.float64)
    zv = _coerce_path(z)
    if X.shape[0] != len(zv):
        raise ValueError(f"path length {len(zv)} but {X.shape[0]} design rows")
    _, _, _, _, beta_mean, beta_prec = priors.expand(X.shape[1])
    if current is None:
        beta_cur = np.vstack([beta_mean, beta_mean])
    else:
        beta_cur = np.vstack([current.beta1, current.beta2])
    beta, _ = logistic_update_kernel(X, zv, beta_cur, beta_mean, beta_prec, rng)
    return TransitionParams(beta[0], beta[1])


def initial_path(y: np.ndarray) -> np.ndarray:
    """Deterministic starting path: above-median squared demeaned values go
    to state 1 (the high-variance label), the rest to state 2."""
    v = (y - y.mean()) ** 2
    return np.where(v > np.median(v), 1, 2).astype(np.int64)


def run_chain(
    y, x, priors: Priors, config: McmcConfig, chain_index: int = 0
) -> McmcDraws:
    """Run one chain and return the retained draws.

    Deterministic given (config.seed, chain_index). Numerical failure raises
    :class:`ChainError` carrying the sweep index and retained draws so far.
    """
    yv, X, dates, names = _coerce_inputs(y, x)
    T, r = X.shape
    b0, prec_b0, ig_shape, ig_scale, beta_mean, beta_prec = priors.expand(r)
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(chain_index,))
    )
    z0 = initial_path(yv)
    b_init, s2_init, _ = mean_update_kernel(
        yv, X, z0, b0, prec_b0, ig_shape, ig_scale, rng
    )
    beta_start = np.vstack([beta_mean, beta_mean])
    beta_init, _ = logistic_update_kernel(
        X, z0, beta_start, beta_mean, beta_prec, rng
    )
    n_keep = config.n_retained
    out_b = np.empty((n_keep, 2, r))
    out_s2 = np.empty((n_keep, 2))
    out_beta = np.empty((n_keep, 2, r))
    out_z = np.empty((n_keep, T), dtype=np.int8)
    out_sm = np.empty((n_keep, T))
    out_ll = np.empty(n_keep)
    fallbacks = np.zeros(4, dtype=np.int64)
    status, sweep, bad_t, kept = _chain_kernel(
        yv, X, z0, b_init, s2_init, beta_init,
        b0, prec_b0, ig_shape, ig_scale, beta_mean, beta_prec,
        config.iterations, config.burn_in, config.thin, True, rng,
        out_b, out_s2, out_beta, out_z, out_sm, out_ll, fallbacks,
    )
    if status != 0:
        checkpoint = None
        if kept > 0:
            checkpoint = McmcDraws(
                out_b[:kept], out_s2[:kept], out_beta[:kept], out_z[:kept],
                out_sm[:kept], out_ll[:kept], fallbacks, dates, names,
            )
        raise ChainError(sweep, bad_t, checkpoint)
    return McmcDraws(
        out_b, out_s2, out_beta, out_z, out_sm, out_ll, fallbacks, dates, names
    )


def run_chains(y, x, priors: Priors, config: McmcConfig, parallel: bool = False) -> list:
    """Run config.chains independent chains with isolated random streams."""
    if config.chains == 1 or not parallel:
        return [run_chain(y, x, priors, config, i) for i in range(config.chains)]
    import concurrent.futures as cf
    import multiprocessing as mp

    with cf.ProcessPoolExecutor(
        max_workers=config.chains, mp_context=mp.get_context("fork")
    ) as pool:
        futures = [
            pool.submit(run_chain, y, x, priors, config, i)
            for i in range(config.chains)
        ]
        return [f.result() for f in futures]


def coefficient_names(r: int, covariate_names=()) -> list:
    names = list(covariate_names)
    if len(names) != r - 1:
        names = [f"x{j}" for j in range(1, r)]
    return ["intercept"] + names


def summarize(draws: McmcDraws, level: float = 0.05) -> PosteriorSummary:
    """Posterior means, equal-tailed credible intervals, significance flags,
    per-date mean smoothed probabilities, and the induced state decision."""
    if draws.n < 100:
        raise ValueError(f"need at least 100 retained draws, have {draws.n}")
    lo, hi = level / 2, 1 - level / 2
    names = coefficient_names(draws.r, draws.covariate_names)
    rows = []
    for s in range(2):
        for j, name in enumerate(names):
            rows.append(_summary_row(name, s + 1, "mean", draws.b[:, s, j], lo, hi))
        rows.append(_summary_row("sigma2", s + 1, "mean", draws.sigma2[:, s], lo, hi))
    for s in range(2):
        for j, name in enumerate(names):
            rows.append(
                _summary_row(name, s + 1, "transition", draws.beta[:, s, j], lo, hi)
            )
    p1 = draws.smoothed_p1.mean(axis=0)
    assigned = np.where(p1 > 0.5, 1, 2)
    sizes = (int(np.sum(assigned == 1)), int(np.sum(assigned == 2)))
    return PosteriorSummary(
        coefficients=tuple(rows),
        smoothed_p1=p1,
        assigned_state=assigned,
        state_sizes=sizes,
        dates=draws.dates,
    )


def _summary_row(name, state, block, samples, lo, hi) -> CoefficientSummary:
    q025 = float(np.quantile(samples, lo))
    q975 = float(np.quantile(samples, hi))
    return CoefficientSummary(
        name=name,
        state=state,
        block=block,
        mean=float(samples.mean()),
        q025=q025,
        q975=q975,
        significant=bool(q025 > 0 or q975 < 0),
    )


@dataclass(frozen=True)
class ParameterDiagnostic:
    name: str
    rhat: float
    ess: float
    degenerate: bool


@dataclass(frozen=True)
class DiagnosticsReport:
    parameters: tuple
    warnings: tuple
    prior_fallbacks: tuple

    def worst_rhat(self) -> float:
        return max(p.rhat for p in self.parameters)


def _parameter_matrix(d: McmcDraws) -> tuple[np.ndarray, list]:
    names = coefficient_names(d.r, d.covariate_names)
    cols = []
    labels = []
    for s in range(2):
        for j, name in enumerate(names):
            cols.append(d.b[:, s, j])
            labels.append(f"mean.{name}.state{s + 1}")
        cols.append(d.sigma2[:, s])
        labels.append(f"mean.sigma2.state{s + 1}")
    for s in range(2):
        for j, name in enumerate(names):
            cols.append(d.beta[:, s, j])
            labels.append(f"transition.{name}.state{s + 1}")
    return np.column_stack(cols), labels


def _gelman_rubin(chains: np.ndarray) -> tuple[float, bool]:
    """Classic potential scale reduction over (m, n) draws of one scalar."""
    m, n = chains.shape
    means = chains.mean(axis=1)
    w = float(np.mean(chains.var(axis=1, ddof=1)))
    b_over_n = float(np.var(means, ddof=1))
    if w == 0.0:
        return 1.0, True
    if b_over_n == 0.0:
        # identical chains: between-chain variance vanishes exactly
        return 1.0, True
    var_plus = (n - 1) / n * w + b_over_n
    return float(np.sqrt(var_plus / w)), False


def _ess(chains: np.ndarray) -> float:
    """Effective sample size by Geyer's initial positive sequence, averaged
    across chains."""
    m, n = chains.shape
    if n < 4:
        return float(m * n)
    acf = np.zeros(n - 1)
    for c in range(m):
        x = chains[c] - chains[c].mean()
        denom = float(np.dot(x, x))
        if denom == 0.0:
            return float(m * n)
        full = np.correlate(x, x, mode="full")[n - 1:]
        acf += full / denom
    acf /= m
    tau = 1.0
    k = 1
    while k + 1 < len(acf):
        pair = acf[k] + acf[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
        k += 2
    return float(m * n / tau)


def diagnostics(chain_draws: list) -> DiagnosticsReport:
    """Cross-chain convergence report: potential scale reduction and
    effective sample size per parameter, with warnings above 1.1."""
    if len(chain_draws) < 2:
        raise ValueError("diagnostics requires at least 2 chains")
    mats = []
    labels = None
    for d in chain_draws:
        mat, labels = _parameter_matrix(d)
        mats.append(mat)
    n = min(m.shape[0] for m in mats)
    stacked = np.stack([m[:n] for m in mats])  # (chains, n, P)
    params = []
    warnings = []
    for p, label in enumerate(labels):
        rhat, degenerate = _gelman_rubin(stacked[:, :, p])
        ess = _ess(stacked[:, :, p])
        params.append(ParameterDiagnostic(label, rhat, ess, degenerate))
        if degenerate:
            warnings.append(f"{label}: degenerate between-chain variance (identical chains?)")
        elif rhat > 1.1:
            warnings.append(f"{label}: potential scale reduction {rhat:.3f} exceeds 1.1")
    fallbacks = np.sum([d.prior_fallbacks for d in chain_draws], axis=0)
    for idx, what in enumerate(
        ["mean state1", "mean state2", "transition state1", "transition state2"]
    ):
        if fallbacks[idx] > 0:
            warnings.append(
                f"prior fallback used {int(fallbacks[idx])} times for {what} "
                "(sparse state occupancy)"
            )
    return DiagnosticsReport(
        parameters=tuple(params),
        warnings=tuple(warnings),
        prior_fallbacks=tuple(int(v) for v in fallbacks),
    )
