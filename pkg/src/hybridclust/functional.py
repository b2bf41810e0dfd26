"""Numerical density functionals: entropy, KL information, Bhattacharyya
coefficient and Bayes-overlap integrals over Gaussian mixtures.

Two evaluation modes, chosen by :class:`IntegrationContext`:

* ``quadrature`` (d <= 2): deterministic adaptive panel quadrature over a
  box covering every component mean +- ``support_sigmas`` standard
  deviations per axis.
* ``importance`` (any d): seeded self-normalised-free importance sampling,
  estimator ``mean(h(x_i) / q(x_i))`` with x_i drawn from a proposal
  mixture q. A :class:`SamplePool` can be shared across many functional
  evaluations so that comparisons use common random numbers.

Gaussian closed forms for KL and the Bhattacharyya distance are provided
alongside; the test suite pins them against the quadrature path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import quadrature
from .errors import NumericalError, ValidationError
from .mixture import GaussianComponent, MixtureDensity, scaled_combination, sample

LOG_FLOOR = 1e-300


class SamplePool:
    """Importance-sampling state shared across functional evaluations.

    Draws once from the proposal, then caches per-component density columns
    so that any mixture built from already-seen components costs only a
    matrix-vector product to evaluate.
    """

    def __init__(self, proposal: MixtureDensity, n_samples: int, seed: int):
        self.proposal = proposal
        self.n_samples = int(n_samples)
        self.seed = int(seed)
        self._samples: Optional[np.ndarray] = None
        self._inv_q: Optional[np.ndarray] = None
        self._comp_pdf: dict[GaussianComponent, np.ndarray] = {}

    def _materialize(self):
        if self._samples is None:
            self._samples = sample(self.proposal, self.n_samples, self.seed)
            log_q = self.proposal.logpdf(self._samples)
            self._inv_q = np.exp(-log_q)

    @property
    def samples(self) -> np.ndarray:
        self._materialize()
        return self._samples  # type: ignore[return-value]

    @property
    def inv_q(self) -> np.ndarray:
        self._materialize()
        return self._inv_q  # type: ignore[return-value]

    def mixture_pdf(self, mix: MixtureDensity) -> np.ndarray:
        """Mixture density at the pooled samples, from cached component columns."""
        self._materialize()
        out = np.zeros(self.n_samples)
        for coef, comp in mix.terms:
            col = self._comp_pdf.get(comp)
            if col is None:
                lp = np.asarray(
                    MixtureDensity(((1.0, comp),)).logpdf(self._samples)  # type: ignore[arg-type]
                )
                col = np.exp(lp)
                self._comp_pdf[comp] = col
            out += coef * col
        return out


@dataclass(frozen=True)
class IntegrationContext:
    """How to evaluate density integrals."""

    mode: str = "quadrature"
    quad_rel_tol: float = 1e-9
    support_sigmas: float = 12.0
    is_samples: int = 100_000
    seed: int = 0
    pool: Optional[SamplePool] = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in ("quadrature", "importance"):
            raise ValidationError(f"mode must be 'quadrature' or 'importance', got {self.mode!r}")
        if self.is_samples < 1000:
            raise ValidationError(f"is_samples must be >= 1000, got {self.is_samples}")
        if self.support_sigmas < 6:
            raise ValidationError(f"support_sigmas must be >= 6, got {self.support_sigmas}")

    def with_pool(self, pool: SamplePool) -> "IntegrationContext":
        return replace(self, pool=pool)

    def __hash__(self):
        return hash((self.mode, self.quad_rel_tol, self.support_sigmas, self.is_samples, self.seed, id(self.pool)))


@dataclass(frozen=True)
class FunctionalEstimate:
    value: float
    std_error: float
    mode: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NumericalError(f"functional estimate is not finite: {self.value}")
        if self.std_error < 0:
            raise NumericalError(f"negative std_error: {self.std_error}")


def _union_box(mixes: Sequence[MixtureDensity], n_sigmas: float, domain=None):
    d = mixes[0].d
    if domain is not None:
        box = [tuple(map(float, ax)) for ax in domain]
        if len(box) != d:
            raise ValidationError(f"domain has {len(box)} axes, mixtures have {d}")
    else:
        boxes = [m.support_box(n_sigmas) for m in mixes]
        box = [
            (min(b[ax][0] for b in boxes), max(b[ax][1] for b in boxes))
            for ax in range(d)
        ]
    breaks = [np.concatenate([m.axis_breakpoints(ax) for m in mixes]) for ax in range(d)]
    return box, breaks


def _quad(
    integrand: Callable[[np.ndarray], np.ndarray],
    mixes: Sequence[MixtureDensity],
    ctx: IntegrationContext,
    domain=None,
) -> FunctionalEstimate:
    d = mixes[0].d
    if d > 2:
        raise NumericalError(
            f"deterministic quadrature supports d <= 2 (got d={d}); use importance sampling"
        )
    box, breaks = _union_box(mixes, ctx.support_sigmas, domain)
    if d == 1:
        value, _ = quadrature.integrate_1d(
            integrand, box[0][0], box[0][1], breaks[0], rel_tol=ctx.quad_rel_tol
        )
    else:
        value, _ = quadrature.integrate_2d(integrand, box, breaks, rel_tol=ctx.quad_rel_tol)
    return FunctionalEstimate(value=float(value), std_error=0.0, mode="quadrature")


def _pool_for(ctx: IntegrationContext, mixes: Sequence[MixtureDensity]) -> SamplePool:
    if ctx.pool is not None:
        return ctx.pool
    share = 1.0 / len(mixes)
    _, proposal = scaled_combination([(share, m) for m in mixes])
    return SamplePool(proposal, ctx.is_samples, ctx.seed)


def _importance(
    h_of_points: Callable[[SamplePool], np.ndarray],
    mixes: Sequence[MixtureDensity],
    ctx: IntegrationContext,
) -> FunctionalEstimate:
    pool = _pool_for(ctx, mixes)
    vals = h_of_points(pool) * pool.inv_q
    m = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    return FunctionalEstimate(value=m, std_error=se, mode="importance")


def _clamped_log(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, LOG_FLOOR))


# ---------------------------------------------------------------------------
# The four functionals
# ---------------------------------------------------------------------------


def entropy_functional(
    scale: float, mix: MixtureDensity, ctx: IntegrationContext, domain=None
) -> FunctionalEstimate:
    """-integral of g log g for the scaled density g = scale * mix.

    No normalisation requirement: the caller may pass any positive scale,
    so sub- and super-normalised functions are supported directly.
    """
    if not scale > 0:
        raise ValidationError(f"scale must be positive, got {scale}")
    log_scale = math.log(scale)

    if ctx.mode == "quadrature" or domain is not None:
        def integrand(pts):
            lp = mix.logpdf(pts) + log_scale
            return -np.exp(lp) * lp

        return _quad(integrand, [mix], ctx, domain)

    def h(pool: SamplePool):
        g = scale * pool.mixture_pdf(mix)
        return -g * _clamped_log(g)

    return _importance(h, [mix], ctx)


def kl_information(
    p: MixtureDensity, q: MixtureDensity, ctx: IntegrationContext, domain=None
) -> FunctionalEstimate:
    """integral of p log(p/q): information lost approximating p by q."""
    if p.d != q.d:
        raise ValidationError(f"dimension mismatch: {p.d} vs {q.d}")

    if ctx.mode == "quadrature" or domain is not None:
        def integrand(pts):
            lp = p.logpdf(pts)
            lq = q.logpdf(pts)
            return np.exp(lp) * (lp - lq)

        return _quad(integrand, [p, q], ctx, domain)

    def h(pool: SamplePool):
        pv = pool.mixture_pdf(p)
        qv = pool.mixture_pdf(q)
        return pv * (_clamped_log(pv) - _clamped_log(qv))

    return _importance(h, [p, q], ctx)


def bhattacharyya_coeff(
    p: MixtureDensity, q: MixtureDensity, ctx: IntegrationContext, domain=None
) -> FunctionalEstimate:
    """integral of sqrt(p * q), the overlap coefficient in [0, 1]."""
    if p.d != q.d:
        raise ValidationError(f"dimension mismatch: {p.d} vs {q.d}")

    if ctx.mode == "quadrature" or domain is not None:
        def integrand(pts):
            return np.exp(0.5 * (p.logpdf(pts) + q.logpdf(pts)))

        return _quad(integrand, [p, q], ctx, domain)

    def h(pool: SamplePool):
        return np.sqrt(pool.mixture_pdf(p) * pool.mixture_pdf(q))

    return _importance(h, [p, q], ctx)


def bayes_overlap(
    wp: tuple[float, MixtureDensity],
    wq: tuple[float, MixtureDensity],
    ctx: IntegrationContext,
    domain=None,
) -> FunctionalEstimate:
    """integral of min(w_k p, w_l q): two-class Bayes error mass."""
    (w_k, p), (w_l, q) = wp, wq
    if not (w_k > 0 and w_l > 0):
        raise ValidationError(f"weights must be positive, got {w_k}, {w_l}")
    if abs(w_k + w_l - 1.0) > 1e-12:
        raise ValidationError(f"weights must sum to 1, got {w_k + w_l}")
    if p.d != q.d:
        raise ValidationError(f"dimension mismatch: {p.d} vs {q.d}")
    lw_k, lw_l = math.log(w_k), math.log(w_l)

    if ctx.mode == "quadrature" or domain is not None:
        def integrand(pts):
            return np.exp(np.minimum(lw_k + p.logpdf(pts), lw_l + q.logpdf(pts)))

        return _quad(integrand, [p, q], ctx, domain)

    def h(pool: SamplePool):
        return np.minimum(w_k * pool.mixture_pdf(p), w_l * pool.mixture_pdf(q))

    return _importance(h, [p, q], ctx)


# ---------------------------------------------------------------------------
# Gaussian closed forms
# ---------------------------------------------------------------------------


def gauss_kl_closed(a: GaussianComponent, b: GaussianComponent) -> float:
    """KL information of a from b for single Gaussians (standard form)."""
    if a.d != b.d:
        raise ValidationError(f"dimension mismatch: {a.d} vs {b.d}")
    linv_b = b._inv_chol  # type: ignore[attr-defined]
    la = a.chol
    tr = float(np.sum((linv_b @ la) ** 2))
    diff = linv_b @ (b.mean - a.mean)
    quad = float(diff @ diff)
    log_det_ratio = 2.0 * float(np.sum(np.log(np.diag(b.chol))) - np.sum(np.log(np.diag(la))))
    return 0.5 * (tr + quad - a.d + log_det_ratio)


def gauss_bhat_closed(a: GaussianComponent, b: GaussianComponent) -> float:
    """Bhattacharyya distance between single Gaussians."""
    if a.d != b.d:
        raise ValidationError(f"dimension mismatch: {a.d} vs {b.d}")
    m = 0.5 * (a.cov + b.cov)
    try:
        lm = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"averaged covariance is singular: {exc}") from exc
    diff = np.linalg.solve(lm, b.mean - a.mean)
    quad = 0.125 * float(diff @ diff)
    log_det_m = 2.0 * float(np.sum(np.log(np.diag(lm))))
    log_det_a = 2.0 * float(np.sum(np.log(np.diag(a.chol))))
    log_det_b = 2.0 * float(np.sum(np.log(np.diag(b.chol))))
    return quad + 0.5 * (log_det_m - 0.5 * (log_det_a + log_det_b))
