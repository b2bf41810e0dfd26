"""Gaussian mixture machinery: types, density evaluation, sampling, EM
fitting with restarts, BIC/AIC model selection, and MAP assignment.

All parameter containers are immutable after construction; fitting
functions are deterministic given their seed (per-restart RNGs are derived
as ``seed + restart_index``, so any parallel schedule reproduces the
serial result).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import NumericalError, ValidationError

_LOG2PI = math.log(2.0 * math.pi)

PDF_FLOOR = 1e-300
DEFAULT_RIDGE = 1e-6


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GaussianComponent:
    """One Gaussian: location vector and SPD scatter matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _readonly(np.atleast_1d(self.mean))
        cov = _readonly(np.atleast_2d(self.cov))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValidationError(f"bad component shapes: mean {mean.shape}, cov {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("component parameters must be finite")
        if np.max(np.abs(cov - cov.T)) >= 1e-12 * max(1.0, np.max(np.abs(cov))):
            raise ValidationError("covariance matrix is not symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"covariance is not positive-definite: {exc}") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", _readonly(chol))
        inv_chol = solve_triangular(chol, np.eye(mean.size), lower=True)
        object.__setattr__(self, "_inv_chol", _readonly(inv_chol))
        log_det_chol = float(np.sum(np.log(np.diag(chol))))
        object.__setattr__(self, "_log_norm", -log_det_chol - 0.5 * mean.size * _LOG2PI)

    @property
    def d(self) -> int:
        return self.mean.size

    @property
    def chol(self) -> np.ndarray:
        return self._chol  # type: ignore[attr-defined]

    def sigmas(self) -> np.ndarray:
        """Per-axis standard deviations (sqrt of the covariance diagonal)."""
        return np.sqrt(np.diag(self.cov))

    def entropy(self) -> float:
        """Closed-form differential entropy 0.5*log((2*pi*e)^d |cov|)."""
        log_det = 2.0 * float(np.sum(np.log(np.diag(self.chol))))
        return 0.5 * (self.d * (_LOG2PI + 1.0) + log_det)

    def __hash__(self):
        return hash((self.mean.tobytes(), self.cov.tobytes()))

    def __eq__(self, other):
        return (
            isinstance(other, GaussianComponent)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
        )


@dataclass(frozen=True)
class MixtureDensity:
    """Convex combination of Gaussian components; always integrates to 1."""

    terms: tuple[tuple[float, GaussianComponent], ...]

    def __post_init__(self):
        terms = tuple((float(c), comp) for c, comp in self.terms)
        if not terms:
            raise ValidationError("mixture needs at least one term")
        d = terms[0][1].d
        for i, (c, comp) in enumerate(terms):
            if not (c > 0 and math.isfinite(c)):
                raise ValidationError(f"term {i}: coefficient must be positive, got {c}")
            if comp.d != d:
                raise ValidationError(f"term {i}: dimension {comp.d} != {d}")
        s = sum(c for c, _ in terms)
        if abs(s - 1.0) > 1e-9:
            raise ValidationError(f"mixture coefficients sum to {s}, expected 1")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_means", _readonly(np.stack([comp.mean for _, comp in terms])))
        object.__setattr__(
            self, "_inv_chols", _readonly(np.stack([comp._inv_chol for _, comp in terms]))
        )
        object.__setattr__(
            self, "_log_norms", _readonly(np.array([comp._log_norm for _, comp in terms]))
        )
        object.__setattr__(self, "_log_coefs", _readonly(np.log([c for c, _ in terms])))

    @classmethod
    def single(cls, mean, cov) -> "MixtureDensity":
        return cls(((1.0, GaussianComponent(np.asarray(mean, float), np.asarray(cov, float))),))

    @classmethod
    def from_parameters(cls, coefs, means, covs) -> "MixtureDensity":
        try:
            comps = [GaussianComponent(m, c) for m, c in zip(means, covs)]
        except NumericalError as exc:
            raise NumericalError(f"component construction failed: {exc}") from exc
        return cls(tuple(zip(np.asarray(coefs, float), comps)))

    @property
    def d(self) -> int:
        return self.terms[0][1].d

    @property
    def n_components(self) -> int:
        return len(self.terms)

    def coefs(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    def logpdf(self, points: np.ndarray) -> np.ndarray:
        """Vectorised mixture log-density at an (m, d) array of points."""
        points = np.ascontiguousarray(points, dtype=np.float64)
        return np.asarray(
            kernels.mixture_logpdf(
                points, self._means, self._inv_chols, self._log_norms, self._log_coefs
            )
        )

    def pdf_batch(self, points: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(points))

    def component_logpdfs(self, points: np.ndarray) -> np.ndarray:
        points = np.ascontiguousarray(points, dtype=np.float64)
        return np.asarray(
            kernels.component_logpdfs(points, self._means, self._inv_chols, self._log_norms)
        )

    def support_box(self, n_sigmas: float) -> list[tuple[float, float]]:
        """Per-axis interval covering every component mean +- n_sigmas stds."""
        los, his = [], []
        for axis in range(self.d):
            lo = min(comp.mean[axis] - n_sigmas * comp.sigmas()[axis] for _, comp in self.terms)
            hi = max(comp.mean[axis] + n_sigmas * comp.sigmas()[axis] for _, comp in self.terms)
            los.append(lo)
            his.append(hi)
        return list(zip(los, his))

    def axis_breakpoints(self, axis: int) -> np.ndarray:
        """Quadrature seed points: component means +- a few sigmas on one axis."""
        offsets = np.array([-12.0, -6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0, 12.0])
        pts = [comp.mean[axis] + offsets * comp.sigmas()[axis] for _, comp in self.terms]
        return np.unique(np.concatenate(pts))


def scaled_combination(parts: Sequence[tuple[float, MixtureDensity]]) -> tuple[float, MixtureDensity]:
    """Represent sum_j scale_j * mix_j as (total_mass, normalised mixture).

    The term lists are concatenated, never refit.
    """
    total = sum(s for s, _ in parts)
    if not total > 0:
        raise ValidationError("combination must have positive total mass")
    terms = []
    for s, mix in parts:
        for c, comp in mix.terms:
            terms.append((s * c / total, comp))
    return total, MixtureDensity(tuple(terms))


@dataclass(frozen=True)
class Subcluster:
    """A weighted density: one node of the merge hierarchy."""

    id: int
    weight: float
    density: MixtureDensity
    members: frozenset[int]

    def __post_init__(self):
        if not (0.0 < self.weight <= 1.0 + 1e-12):
            raise ValidationError(f"subcluster weight must be in (0, 1], got {self.weight}")
        if not self.members:
            raise ValidationError("subcluster members must be nonempty")
        object.__setattr__(self, "members", frozenset(self.members))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EMConfig:
    max_iter: int = 1000
    reps: int = 10
    tol: float = 1e-6
    ridge: float = DEFAULT_RIDGE
    rescue_limit: int = 3


@dataclass
class FittedModel:
    """A fitted mixture plus everything needed for model comparison."""

    mixture: MixtureDensity
    log_likelihood: float
    n_params: int
    n_obs: int
    criterion_scores: dict[int, tuple[float, float]]
    map_labels: Optional[np.ndarray]
    seed: int
    ll_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_iter: int = 0

    @property
    def K(self) -> int:
        return self.mixture.n_components

    @property
    def d(self) -> int:
        return self.mixture.d

    @property
    def bic(self) -> float:
        return -2.0 * self.log_likelihood + self.n_params * math.log(self.n_obs)

    @property
    def aic(self) -> float:
        return -2.0 * self.log_likelihood + 2.0 * self.n_params

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "K": self.K,
            "coefs": self.mixture.coefs().tolist(),
            "means": [comp.mean.tolist() for _, comp in self.mixture.terms],
            "covs": [comp.cov.tolist() for _, comp in self.mixture.terms],
            "logL": self.log_likelihood,
            "bic": self.bic,
            "aic": self.aic,
        }

    @classmethod
    def from_dict(cls, payload: dict, n_obs: Optional[int] = None) -> "FittedModel":
        try:
            mix = MixtureDensity.from_parameters(payload["coefs"], payload["means"], payload["covs"])
            logl = float(payload["logL"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed model payload: {exc}") from exc
        K, d = mix.n_components, mix.d
        n_params = count_parameters(K, d)
        if n_obs is None:
            # recover n from the stored BIC so round-trips keep the scores
            n_obs = int(round(math.exp((float(payload["bic"]) + 2 * logl) / n_params)))
        model = cls(
            mixture=mix,
            log_likelihood=logl,
            n_params=n_params,
            n_obs=max(n_obs, 1),
            criterion_scores={},
            map_labels=None,
            seed=-1,
        )
        model.criterion_scores = {K: (model.bic, model.aic)}
        return model


def count_parameters(K: int, d: int) -> int:
    """Free parameters of a K-component full-covariance mixture in d dims."""
    return (K - 1) + K * d + K * (d * (d + 1)) // 2


def pdf(mix: MixtureDensity, x) -> float:
    """Mixture density at a single point, clamped below at 1e-300."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != mix.d:
        raise ValidationError(f"point has dimension {x.size}, mixture has {mix.d}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("point must be finite")
    return float(max(np.exp(mix.logpdf(x[None, :]))[0], PDF_FLOOR))


def sample(mix: MixtureDensity, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws; component chosen by coefficient, then Cholesky transform."""
    if n < 1:
        raise ValidationError(f"need n >= 1 draws, got {n}")
    rng = np.random.default_rng(seed)
    coefs = mix.coefs()
    idx = rng.choice(mix.n_components, size=n, p=coefs / coefs.sum())
    z = rng.standard_normal((n, mix.d))
    out = np.empty((n, mix.d))
    for k, (_, comp) in enumerate(mix.terms):
        mask = idx == k
        if np.any(mask):
            out[mask] = comp.mean + z[mask] @ comp.chol.T
    return out


def _logsumexp_rows(lp: np.ndarray) -> np.ndarray:
    m = lp.max(axis=1)
    return m + np.log(np.exp(lp - m[:, None]).sum(axis=1))


class _RepFailure(Exception):
    pass


def _em_single(data: np.ndarray, K: int, rng: np.random.Generator, cfg: EMConfig):
    n, d = data.shape
    base_cov = np.atleast_2d(np.cov(data.T)) + cfg.ridge * np.eye(d)
    means = data[rng.choice(n, size=K, replace=False)].copy()
    covs = np.tile(base_cov, (K, 1, 1))
    coefs = np.full(K, 1.0 / K)

    eye_d = np.eye(d)

    def prepare(covs):
        try:
            chols = np.linalg.cholesky(covs)  # batched over components
        except np.linalg.LinAlgError:
            raise _RepFailure("a covariance lost positive-definiteness")
        inv_chols = np.linalg.solve(chols, np.broadcast_to(eye_d, (K, d, d)))
        diags = np.diagonal(chols, axis1=1, axis2=2)
        log_norms = -np.log(diags).sum(axis=1) - 0.5 * d * _LOG2PI
        return inv_chols, log_norms

    trace = []
    rescues = 0
    prev_ll = None
    n_m_steps = 0
    eye = np.eye(d)
    while True:
        inv_chols, log_norms = prepare(covs)
        lp = np.asarray(kernels.component_logpdfs(data, means, inv_chols, log_norms))
        lp += np.log(coefs)
        log_z = _logsumexp_rows(lp)
        ll = float(log_z.sum())
        if not math.isfinite(ll):
            raise _RepFailure("log-likelihood became non-finite")
        trace.append(ll)
        resp = np.exp(lp - log_z[:, None])
        if prev_ll is not None and abs(ll - prev_ll) <= cfg.tol * abs(prev_ll):
            break
        if n_m_steps >= cfg.max_iter:
            break
        prev_ll = ll

        nk = resp.sum(axis=0)
        empty = np.flatnonzero(nk < 1e-10)
        if empty.size:
            rescues += empty.size
            if rescues > cfg.rescue_limit:
                raise _RepFailure(f"{rescues} empty-component rescues, giving up")
            for k in empty:
                means[k] = data[rng.integers(n)]
                covs[k] = base_cov
                coefs[k] = 1.0 / K
            coefs = coefs / coefs.sum()
            prev_ll = None  # parameters jumped; restart the convergence window
            continue

        coefs = nk / n
        means = (resp.T @ data) / nk[:, None]
        for k in range(K):
            xc = data - means[k]
            cov = (resp[:, k][:, None] * xc).T @ xc / nk[k]
            cov += cfg.ridge * eye
            covs[k] = 0.5 * (cov + cov.T)
        n_m_steps += 1

    return coefs, means, covs, ll, resp, np.asarray(trace), n_m_steps


def em_fit(data: np.ndarray, K: int, seed: int, cfg: EMConfig = EMConfig()) -> FittedModel:
    """Best-of-``cfg.reps`` EM fit with K full-covariance components.

    Initial means are randomly selected observations, initial covariances the
    sample covariance, coefficients equal; a ridge is added to every
    covariance diagonal at each M-step. Components whose responsibility mass
    collapses are re-seeded from a random observation (up to
    ``cfg.rescue_limit`` times per restart).
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValidationError(f"data must be 2-D, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValidationError("data contains non-finite values")
    n, d = data.shape
    if not 1 <= K < n:
        raise ValidationError(f"need 1 <= K < n, got K={K}, n={n}")

    best = None
    failures = []
    for rep in range(cfg.reps):
        rng = np.random.default_rng(seed + rep)
        try:
            result = _em_single(data, K, rng, cfg)
        except _RepFailure as exc:
            failures.append(f"rep {rep}: {exc}")
            continue
        if best is None or result[3] > best[1][3]:
            best = (rep, result)
    if best is None:
        raise NumericalError(f"all {cfg.reps} EM restarts failed for K={K}: " + "; ".join(failures))

    _, (coefs, means, covs, ll, resp, trace, n_iter) = best
    mixture = MixtureDensity.from_parameters(coefs, means, covs)
    model = FittedModel(
        mixture=mixture,
        log_likelihood=ll,
        n_params=count_parameters(K, d),
        n_obs=n,
        criterion_scores={},
        map_labels=np.argmax(resp, axis=1),
        seed=seed,
        ll_trace=trace,
        n_iter=n_iter,
    )
    model.criterion_scores = {K: (model.bic, model.aic)}
    return model


def fit_candidates(
    data: np.ndarray, k_min: int, k_max: int, seed: int, cfg: EMConfig = EMConfig()
) -> tuple[dict[int, FittedModel], dict[int, str]]:
    """One em_fit per K in [k_min, k_max]; returns (candidates, failures)."""
    if not 1 <= k_min <= k_max:
        raise ValidationError(f"need 1 <= k_min <= k_max, got {k_min}..{k_max}")
    candidates: dict[int, FittedModel] = {}
    failures: dict[int, str] = {}
    for K in range(k_min, k_max + 1):
        try:
            candidates[K] = em_fit(data, K, seed, cfg)
        except (NumericalError, ValidationError) as exc:
            failures[K] = str(exc)
    return candidates, failures


def select_model(
    data: np.ndarray,
    k_min: int,
    k_max: int,
    criterion: str,
    seed: int,
    cfg: EMConfig = EMConfig(),
    candidates: Optional[dict[int, FittedModel]] = None,
) -> FittedModel:
    """Fit each K in range and return the model minimising BIC or AIC.

    ``candidates`` lets callers that need both criteria reuse one sweep of
    fits; passing the output of :func:`fit_candidates` is identical to
    refitting because em_fit is deterministic given (data, K, seed).
    """
    criterion = criterion.lower()
    if criterion not in ("bic", "aic"):
        raise ValidationError(f"criterion must be 'bic' or 'aic', got {criterion!r}")
    if candidates is None:
        candidates, failures = fit_candidates(data, k_min, k_max, seed, cfg)
    else:
        failures = {}
    if not candidates:
        raise NumericalError(
            "model selection failed for every K: "
            + "; ".join(f"K={k}: {msg}" for k, msg in failures.items())
        )
    scores = {K: (m.bic, m.aic) for K, m in candidates.items()}
    key = (lambda K: (scores[K][0], K)) if criterion == "bic" else (lambda K: (scores[K][1], K))
    best_k = min(candidates, key=key)
    chosen = replace_scores(candidates[best_k], scores)
    return chosen


def replace_scores(model: FittedModel, scores: dict[int, tuple[float, float]]) -> FittedModel:
    out = FittedModel(
        mixture=model.mixture,
        log_likelihood=model.log_likelihood,
        n_params=model.n_params,
        n_obs=model.n_obs,
        criterion_scores=dict(sorted(scores.items())),
        map_labels=model.map_labels,
        seed=model.seed,
        ll_trace=model.ll_trace,
        n_iter=model.n_iter,
    )
    return out


def map_assign(model: FittedModel, data: np.ndarray) -> np.ndarray:
    """Label each row by its maximum-posterior component (ties: lowest index)."""
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != model.d:
        raise ValidationError(f"data shape {data.shape} does not match model dimension {model.d}")
    mix = model.mixture
    lp = mix.component_logpdfs(data) + mix._log_coefs  # type: ignore[attr-defined]
    return np.argmax(lp, axis=1)
