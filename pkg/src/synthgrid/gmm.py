"""Gaussian mixture baseline: EM fit on normalized daily profiles, sampling,
and a JSON checkpoint format.

Components use diagonal covariance (a full 96x96 covariance is
ill-conditioned at a few hundred training days).  Means are initialized
k-means++ style from the run seed, and variances are floored to keep the
likelihood bounded.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import ParameterError, SchemaError
from .ingest import DailyProfileSet, NormalizationRecord, SLOTS_PER_DAY

VARIANCE_FLOOR = 1e-6          # normalized units
WEIGHT_PRUNE_THRESHOLD = 1e-8


@dataclass(frozen=True)
class GmmModel:
    """Fitted diagonal-covariance mixture over day profiles."""

    weights: np.ndarray        # (K,), sums to 1
    means: np.ndarray          # (K, 96)
    variances: np.ndarray      # (K, 96), each >= VARIANCE_FLOOR
    log_likelihood_trace: np.ndarray
    channel: str
    norm: NormalizationRecord | None = None
    seed: int | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ParameterError("weights must be non-negative and sum to 1")
        if np.any(np.asarray(self.variances) < VARIANCE_FLOOR - 1e-12):
            raise ParameterError("variances below the variance floor")

    @property
    def n_components(self) -> int:
        return len(self.weights)


def _log_gaussian_diag(x, means, variances):
    """Per-day, per-component diagonal Gaussian log density.  (n, K) result."""
    # x: (n, d); means/variances: (K, d)
    diff = x[:, None, :] - means[None, :, :]
    return -0.5 * (
        np.sum(diff * diff / variances[None, :, :], axis=2)
        + np.sum(np.log(2.0 * np.pi * variances), axis=1)[None, :]
    )


def _kmeanspp_init(x, k, rng):
    """Pick k initial means: first uniformly, the rest weighted by squared
    distance to the nearest already-chosen mean."""
    n = x.shape[0]
    chosen = [rng.integers(n)]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            chosen.append(rng.integers(n))
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, np.sum((x - x[chosen[-1]]) ** 2, axis=1))
    return x[chosen].copy()


def responsibilities(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """E-step posteriors; each row sums to 1."""
    log_p = _log_gaussian_diag(x, model.means, model.variances)
    log_w = np.log(model.weights)[None, :]
    log_post = log_p + log_w
    return np.exp(log_post - logsumexp(log_post, axis=1, keepdims=True))


def fit_gmm(
    train: DailyProfileSet,
    k: int,
    seed: int,
    max_iter: int = 200,
    tol: float = 1e-6,
) -> GmmModel:
    """Fit a K-component diagonal GMM by EM on the day rows of `train`.

    Iterates until the log-likelihood improves by less than `tol` or
    `max_iter` is reached.  Components whose weight collapses below
    1e-8 are pruned with a warning.
    """
    x = train.profiles
    n = x.shape[0]
    if k <= 0 or k > n:
        raise ParameterError(f"k must be in [1, n_days={n}], got {k}")
    if max_iter <= 0:
        raise ParameterError("max_iter must be positive")

    rng = np.random.default_rng(seed)
    means = _kmeanspp_init(x, k, rng)
    variances = np.maximum(x.var(axis=0), VARIANCE_FLOOR)[None, :].repeat(k, axis=0)
    weights = np.full(k, 1.0 / k)

    trace = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        # E step
        log_p = _log_gaussian_diag(x, means, variances)
        log_post = log_p + np.log(weights)[None, :]
        log_norm = logsumexp(log_post, axis=1, keepdims=True)
        gamma = np.exp(log_post - log_norm)
        ll = float(log_norm.sum())
        trace.append(ll)

        # M step
        nk = gamma.sum(axis=0)
        weights = nk / n
        keep = weights >= WEIGHT_PRUNE_THRESHOLD
        if not np.all(keep):
            warnings.warn(
                f"pruned {int((~keep).sum())} collapsed GMM component(s)", RuntimeWarning
            )
            gamma = gamma[:, keep]
            nk = nk[keep]
            weights = nk / nk.sum()
            means = means[keep]
            variances = variances[keep]
        means = (gamma.T @ x) / nk[:, None]
        sq = (gamma.T @ (x * x)) / nk[:, None]
        variances = np.maximum(sq - means * means, VARIANCE_FLOOR)

        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll

    weights = weights / weights.sum()
    return GmmModel(
        weights=weights,
        means=means,
        variances=variances,
        log_likelihood_trace=np.asarray(trace),
        channel=train.channel,
        norm=train.norm,
        seed=seed,
    )


def sample_gmm(model: GmmModel, n: int, seed: int) -> DailyProfileSet:
    """Draw n synthetic days: component by weight, then a diagonal Gaussian
    draw, clipped to [0, 1] in normalized space."""
    if n <= 0:
        raise ParameterError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    comps = rng.choice(model.n_components, size=n, p=model.weights)
    eps = rng.standard_normal((n, model.means.shape[1]))
    days = model.means[comps] + np.sqrt(model.variances[comps]) * eps
    days = np.clip(days, 0.0, 1.0)
    dates = tuple(f"synthetic-{i:04d}" for i in range(n))
    return DailyProfileSet(
        profiles=days, channel=model.channel, dates=dates, norm=model.norm, normalized=True
    )


def bic_sweep(train: DailyProfileSet, ks, seed: int, max_iter: int = 200, tol: float = 1e-6):
    """Bayesian information criterion for each candidate K; lower is better."""
    n, d = train.profiles.shape
    out = {}
    for k in ks:
        model = fit_gmm(train, k, seed=seed, max_iter=max_iter, tol=tol)
        ll = float(model.log_likelihood_trace[-1])
        n_params = (model.n_components - 1) + 2 * model.n_components * d
        out[k] = -2.0 * ll + n_params * np.log(n)
    return out


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------

def save_gmm(model: GmmModel, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "kind": "gmm",
        "k": model.n_components,
        "weights": model.weights.tolist(),
        "means": model.means.tolist(),
        "variances": model.variances.tolist(),
        "log_likelihood_trace": model.log_likelihood_trace.tolist(),
        "channel": model.channel,
        "normalization": (
            None if model.norm is None else {"min": model.norm.vmin, "max": model.norm.vmax}
        ),
        "seed": model.seed,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_gmm(path) -> GmmModel:
    path = Path(path)
    payload = json.loads(path.read_text())
    if payload.get("kind") != "gmm":
        raise SchemaError(f"{path.name} is not a GMM checkpoint")
    norm = payload.get("normalization")
    record = None if norm is None else NormalizationRecord(vmin=norm["min"], vmax=norm["max"])
    means = np.asarray(payload["means"], dtype=np.float64)
    if means.shape[1] != SLOTS_PER_DAY:
        raise SchemaError(f"checkpoint means have {means.shape[1]} columns, expected {SLOTS_PER_DAY}")
    return GmmModel(
        weights=np.asarray(payload["weights"], dtype=np.float64),
        means=means,
        variances=np.asarray(payload["variances"], dtype=np.float64),
        log_likelihood_trace=np.asarray(payload["log_likelihood_trace"], dtype=np.float64),
        channel=payload["channel"],
        norm=record,
        seed=payload.get("seed"),
    )
