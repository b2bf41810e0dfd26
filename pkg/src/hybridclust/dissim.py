"""The seven density-based dissimilarity measures over weighted subclusters.

Each measure sees a pair of subclusters (weight pi, density p). Absolute
weights enter SE/wSE and the min(pi_k, pi_l) factors; JS and Err use the
pair-relative weights w = pi / (pi_k + pi_l). Single-Gaussian pairs take
closed-form fast paths for Bhat/KLdiv/KLinf (and for the single-density
entropy terms, via the exact scaling identity H(c p) = c H(p) - c log c);
everything else is evaluated numerically through :mod:`.functional`, with
no mixture-KL approximations anywhere.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .functional import (
    IntegrationContext,
    LOG_FLOOR,
    bayes_overlap,
    bhattacharyya_coeff,
    entropy_functional,
    gauss_bhat_closed,
    gauss_kl_closed,
    kl_information,
)
from .mixture import MixtureDensity, Subcluster, scaled_combination

LOG2 = math.log(2.0)


class Measure(enum.Enum):
    """Measure kinds, by their CLI names."""

    SE = "se"
    WSE = "wse"
    JS = "js"
    ERR = "err"
    BHAT = "bhat"
    KLDIV = "kldiv"
    KLINF = "klinf"

    @property
    def display(self) -> str:
        return {"se": "SE", "wse": "wSE", "js": "JS", "err": "Err",
                "bhat": "Bhat", "kldiv": "KLdiv", "klinf": "KLinf"}[self.value]

    @property
    def analytic_range(self) -> tuple[float, float]:
        """Analytic (min, max); infinite ends reported as +-inf."""
        return {
            "se": (-math.inf, 0.0),
            "wse": (-math.inf, 0.0),
            "js": (0.0, LOG2),
            "err": (0.5, 1.0),
            "bhat": (0.0, math.inf),
            "kldiv": (0.0, math.inf),
            "klinf": (0.0, math.inf),
        }[self.value]

    @classmethod
    def parse(cls, name: str) -> "Measure":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValidationError(
                f"unknown measure {name!r}; expected one of "
                + ", ".join(m.value for m in cls)
            ) from None


ALL_MEASURES = tuple(Measure)


@dataclass(frozen=True)
class WeightedPair:
    """Two subclusters plus their pair-relative weights."""

    k: Subcluster
    l: Subcluster

    def __post_init__(self):
        if self.k.density.d != self.l.density.d:
            raise ValidationError(
                f"pair dimensions differ: {self.k.density.d} vs {self.l.density.d}"
            )
        total = self.k.weight + self.l.weight
        if not total > 0:
            raise ValidationError("pair weights must be positive")

    @property
    def w_k(self) -> float:
        return self.k.weight / (self.k.weight + self.l.weight)

    @property
    def w_l(self) -> float:
        return self.l.weight / (self.k.weight + self.l.weight)

    def swapped(self) -> "WeightedPair":
        return WeightedPair(self.l, self.k)


def _entropy_term(scale: float, mix: MixtureDensity, ctx, domain) -> float:
    # single Gaussians have exact entropy; the scaling identity is exact too
    if domain is None and mix.n_components == 1:
        h = mix.terms[0][1].entropy()
        return scale * h - scale * math.log(scale)
    return entropy_functional(scale, mix, ctx, domain=domain).value


def _kl_term(p: MixtureDensity, q: MixtureDensity, ctx, domain) -> float:
    if domain is None and p.n_components == 1 and q.n_components == 1:
        return gauss_kl_closed(p.terms[0][1], q.terms[0][1])
    return kl_information(p, q, ctx, domain=domain).value


def evaluate(
    measure: Measure,
    pair: WeightedPair,
    ctx: IntegrationContext,
    domain=None,
) -> float:
    """Dissimilarity between the two subclusters of ``pair``.

    Symmetric in (k, l) for every kind. ``domain`` restricts all integrals
    to an explicit box (used by the noise-property checker); closed-form
    fast paths are disabled whenever it is set.
    """
    pk, pl = pair.k.density, pair.l.density
    wk_abs, wl_abs = pair.k.weight, pair.l.weight
    min_pi = min(wk_abs, wl_abs)
    try:
        if measure is Measure.SE:
            _, comb = scaled_combination([(wk_abs, pk), (wl_abs, pl)])
            return (
                _entropy_term(wk_abs + wl_abs, comb, ctx, domain)
                - _entropy_term(wk_abs, pk, ctx, domain)
                - _entropy_term(wl_abs, pl, ctx, domain)
            )
        if measure is Measure.WSE:
            _, half = scaled_combination([(1.0, pk), (1.0, pl)])
            return (
                (wk_abs + wl_abs) * _entropy_term(2.0, half, ctx, domain)
                - wk_abs * _entropy_term(1.0, pk, ctx, domain)
                - wl_abs * _entropy_term(1.0, pl, ctx, domain)
            )
        if measure is Measure.JS:
            _, mixed = scaled_combination([(pair.w_k, pk), (pair.w_l, pl)])
            return (
                _entropy_term(1.0, mixed, ctx, domain)
                - pair.w_k * _entropy_term(1.0, pk, ctx, domain)
                - pair.w_l * _entropy_term(1.0, pl, ctx, domain)
            )
        if measure is Measure.ERR:
            ov = bayes_overlap((pair.w_k, pk), (pair.w_l, pl), ctx, domain=domain)
            return 1.0 - ov.value
        if measure is Measure.BHAT:
            if domain is None and pk.n_components == 1 and pl.n_components == 1:
                return min_pi * gauss_bhat_closed(pk.terms[0][1], pl.terms[0][1])
            rho = bhattacharyya_coeff(pk, pl, ctx, domain=domain).value
            return -min_pi * math.log(max(rho, LOG_FLOOR))
        if measure is Measure.KLDIV:
            return min_pi * (_kl_term(pk, pl, ctx, domain) + _kl_term(pl, pk, ctx, domain))
        if measure is Measure.KLINF:
            return min_pi * min(_kl_term(pk, pl, ctx, domain), _kl_term(pl, pk, ctx, domain))
    except NumericalError as exc:
        raise NumericalError(
            f"{measure.display} on pair (id {pair.k.id}, id {pair.l.id}): {exc}"
        ) from exc
    raise ValidationError(f"unknown measure {measure!r}")


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("HYBRIDCLUST_THREADS", "1")))
    except ValueError:
        return 1


def pairwise_matrix(state, measure: Measure, ctx: IntegrationContext) -> np.ndarray:
    """Symmetric matrix of pairwise dissimilarities; diagonal is NaN.

    Each unordered pair is evaluated once and mirrored.
    """
    subs = state.subclusters
    n = len(subs)
    if n < 2:
        raise ValidationError(f"need at least 2 subclusters, got {n}")
    out = np.full((n, n), np.nan)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def job(ij):
        i, j = ij
        try:
            return evaluate(measure, WeightedPair(subs[i], subs[j]), ctx)
        except NumericalError as exc:
            raise NumericalError(f"pairwise entry ({i}, {j}): {exc}") from exc

    workers = _thread_count()
    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(job, pairs))
    else:
        values = [job(ij) for ij in pairs]
    for (i, j), v in zip(pairs, values):
        out[i, j] = out[j, i] = v
    return out
