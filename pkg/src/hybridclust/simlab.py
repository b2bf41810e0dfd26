"""Simulation study: cluster-sample generators, misclassification metrics,
and the repetition runner that summarises excess misclassification per
dissimilarity measure with 95% confidence intervals.

Cluster parameters follow the benchmark catalogue of six families
(student_t, cauchy, uniform, gamma, gauss_noise, gauss_laplace) in two or
three dimensions; for d = 2 only the leading two coordinates of the
printed parameter vectors are used. Sample sizes are n1 = n2 = 100 d and
n3 = 50 d (small), ten times that (large); the noisy family adds 50 d
unlabelled background points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Optional, Sequence

import numpy as np

from .dissim import Measure
from .errors import NumericalError, ValidationError
from .functional import IntegrationContext
from .merge import ClusterState, run_to_c
from .mixture import EMConfig, fit_candidates, select_model

FAMILIES = ("student_t", "cauchy", "uniform", "gamma", "gauss_noise", "gauss_laplace")

_T_MEANS = np.array([[0.0, 0.0, 0.0], [20.0, 15.0, 10.0], [15.0, -15.0, 10.0]])
_UNIF_A = np.array([[-5.0, -5.0, -5.0], [5.0, 5.0, 5.0], [10.0, 5.0, 5.0]])
_UNIF_B = np.array([[6.0, 6.0, 6.0], [10.0, 10.0, 10.0], [20.0, 20.0, 20.0]])
_GAMMA_MEANS = np.array([[0.0, 0.0, 0.0], [0.0, -2.0, 10.0], [10.0, 10.0, 10.0]])
_GAMMA_ALPHA = np.array([[1.0, 2.0, 4.0, 4.0], [0.5, 1.0, 2.0, 2.0], [2.0, 2.0, 5.0, 5.0]])
_GAMMA_GAMMA = np.ones((3, 3))
_NOISE_MEANS = np.array([[0.0, 0.0, 0.0], [2.0, 3.0, 2.0], [5.0, -2.0, 10.0]])
_NOISE_COV_SCALE = np.array([1.0, 2.0, 2.0])
_NOISE_BOX = (-30.0, 40.0)
_GL_MEANS = np.array([[0.0, 0.0, 0.0], [15.0, -5.0, 10.0], [5.0, -10.0, 15.0]])
_GL_GAUSS_VAR = 5.0
_GL_LAPLACE_SCALE = 0.1  # per-axis Laplace scale parameter
_GL_MIX = 0.5


@dataclass(frozen=True)
class ScenarioC:
    family: str
    dim: int
    size: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.dim not in (2, 3):
            raise ValidationError(f"dim must be 2 or 3, got {self.dim}")
        if self.size not in ("small", "large"):
            raise ValidationError(f"size must be 'small' or 'large', got {self.size!r}")

    @property
    def cluster_sizes(self) -> tuple[int, int, int]:
        mult = 1 if self.size == "small" else 10
        return (mult * self.dim * 100, mult * self.dim * 100, mult * self.dim * 50)

    @property
    def n_noise(self) -> int:
        return self.dim * 50 if self.family == "gauss_noise" else 0


@dataclass(frozen=True)
class LabeledSample:
    points: np.ndarray
    true_labels: np.ndarray  # -1 marks noise rows
    noise_mask: np.ndarray


def _sample_t(rng, mean, nu, n, d):
    z = rng.standard_normal((n, d))
    w = rng.chisquare(nu, size=n)
    return mean[:d] + z * np.sqrt(nu / w)[:, None]


def generate(scn: ScenarioC, seed: int) -> LabeledSample:
    """Deterministic draw of one labelled sample for the scenario."""
    rng = np.random.default_rng(seed)
    d = scn.dim
    sizes = scn.cluster_sizes
    blocks, labels = [], []
    for c, n in enumerate(sizes):
        if scn.family in ("student_t", "cauchy"):
            nu = 2.0 if scn.family == "student_t" else 1.0
            x = _sample_t(rng, _T_MEANS[c], nu, n, d)
        elif scn.family == "uniform":
            x = rng.uniform(_UNIF_A[c, :d], _UNIF_B[c, :d], size=(n, d))
        elif scn.family == "gamma":
            x0 = rng.gamma(_GAMMA_ALPHA[c, 0], 1.0, size=n)
            xj = rng.gamma(_GAMMA_ALPHA[c, 1 : d + 1], 1.0, size=(n, d))
            x = _GAMMA_MEANS[c, :d] + _GAMMA_GAMMA[c, :d] * (x0[:, None] + xj)
        elif scn.family == "gauss_noise":
            x = _NOISE_MEANS[c, :d] + math.sqrt(_NOISE_COV_SCALE[c]) * rng.standard_normal((n, d))
        elif scn.family == "gauss_laplace":
            gauss = _GL_MEANS[c, :d] + math.sqrt(_GL_GAUSS_VAR) * rng.standard_normal((n, d))
            lap = rng.laplace(_GL_MEANS[c, :d], _GL_LAPLACE_SCALE, size=(n, d))
            pick = rng.random(n) < _GL_MIX
            x = np.where(pick[:, None], gauss, lap)
        else:  # pragma: no cover
            raise ValidationError(scn.family)
        blocks.append(x)
        labels.append(np.full(n, c))
    if scn.n_noise:
        blocks.append(rng.uniform(_NOISE_BOX[0], _NOISE_BOX[1], size=(scn.n_noise, d)))
        labels.append(np.full(scn.n_noise, -1))
    points = np.concatenate(blocks)
    true_labels = np.concatenate(labels)
    return LabeledSample(
        points=points, true_labels=true_labels, noise_mask=true_labels < 0
    )


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def misclassification_rate(
    final_labels,
    true_labels,
    noise_mask=None,
    n_clusters: Optional[int] = None,
) -> float:
    """Fraction wrongly clustered under the best final-cluster -> class
    bijection (brute force over C! bijections, C <= 6). Noise-masked rows
    are excluded from both numerator and denominator."""
    final_labels = np.asarray(final_labels)
    true_labels = np.asarray(true_labels)
    if final_labels.shape != true_labels.shape:
        raise ValidationError("label vectors must have equal length")
    keep = np.ones(len(final_labels), bool) if noise_mask is None else ~np.asarray(noise_mask)
    fl, tl = final_labels[keep], true_labels[keep]
    classes = np.unique(tl)
    C = len(classes)
    if n_clusters is None:
        n_clusters = len(np.unique(fl))
        if n_clusters != C:
            raise ValidationError(
                f"{n_clusters} distinct final labels but {C} true classes; "
                "a bijection needs equal counts"
            )
    elif n_clusters != C:
        raise ValidationError(f"n_clusters={n_clusters} but {C} true classes")
    if C > 6:
        raise ValidationError(f"brute-force bijection search supports C <= 6, got {C}")
    conf = np.zeros((C, n_clusters), dtype=np.int64)
    for ci, cls in enumerate(classes):
        sel = tl == cls
        for f in range(n_clusters):
            conf[ci, f] = int(np.sum(fl[sel] == f))
    total = int(conf.sum())
    best = 0
    for perm in permutations(range(n_clusters)):
        best = max(best, int(sum(conf[ci, perm[ci]] for ci in range(C))))
    return float(total - best) / total


def _subcluster_class_counts(map_labels, true_labels, noise_mask):
    map_labels = np.asarray(map_labels)
    true_labels = np.asarray(true_labels)
    if map_labels.shape != true_labels.shape:
        raise ValidationError("label vectors must have equal length")
    keep = np.ones(len(map_labels), bool) if noise_mask is None else ~np.asarray(noise_mask)
    ml, tl = map_labels[keep], true_labels[keep]
    classes = np.unique(tl)
    K = int(ml.max()) + 1 if len(ml) else 0
    counts = np.zeros((K, len(classes)), dtype=np.int64)
    for ci, cls in enumerate(classes):
        sel = tl == cls
        vals, ns = np.unique(ml[sel], return_counts=True)
        counts[vals, ci] = ns
    return counts


def min_misclassification(map_labels, true_labels, noise_mask=None) -> float:
    """Lowest achievable misclassification over all surjective groupings of
    subclusters into classes.

    Solved exactly by dynamic programming over class-coverage bitmasks
    (O(K * C * 2^C)), so the result equals exhaustive enumeration.
    """
    counts = _subcluster_class_counts(map_labels, true_labels, noise_mask)
    K, C = counts.shape
    if K < C:
        raise ValidationError(f"need at least as many subclusters as classes: K={K} < C={C}")
    full = (1 << C) - 1
    neg = -np.inf
    dp = np.full(1 << C, neg)
    dp[0] = 0.0
    for k in range(K):
        ndp = np.full(1 << C, neg)
        for mask in range(1 << C):
            if dp[mask] == neg:
                continue
            for c in range(C):
                nm = mask | (1 << c)
                cand = dp[mask] + counts[k, c]
                if cand > ndp[nm]:
                    ndp[nm] = cand
        dp = ndp
    total = int(counts.sum())
    if not np.isfinite(dp[full]):
        raise NumericalError("coverage DP failed; no surjective assignment found")
    return float(total - dp[full]) / total


# ---------------------------------------------------------------------------
# Repetition runner
# ---------------------------------------------------------------------------


@dataclass
class RepRow:
    rep: int
    criterion: str
    measure: str
    k_selected: int
    misclass: float
    min_misclass: float

    @property
    def excess(self) -> float:
        return self.misclass - self.min_misclass


@dataclass
class RunSummary:
    scenario: ScenarioC
    criterion: str
    measure: str
    mean_excess: float
    ci_halfwidth: float
    n_reps: int
    n_failed: int


@dataclass
class ExperimentResult:
    scenario: ScenarioC
    rows: list[RepRow]
    summaries: list[RunSummary]
    failures: list[str] = field(default_factory=list)

    def mean_excess(self, criterion: str, measure: Measure) -> float:
        for s in self.summaries:
            if s.criterion == criterion and s.measure == measure.value:
                return s.mean_excess
        raise KeyError((criterion, measure))


def final_labels_from_merge(state: ClusterState, map_labels: np.ndarray) -> np.ndarray:
    """Map per-point component indices through the merge grouping."""
    comp_to_final: dict[int, int] = {}
    for pos, sub in enumerate(state.subclusters):
        for m in sub.members:
            comp_to_final[m] = pos
    return np.array([comp_to_final[int(k)] for k in map_labels])


def run_experiment(
    scn: ScenarioC,
    measures: Sequence[Measure],
    criteria: Sequence[str],
    reps: int,
    C: int,
    base_seed: int,
    k_min: int = 1,
    k_max: int = 12,
    em_cfg: EMConfig = EMConfig(),
    integration: str = "importance",
    is_samples: int = 100_000,
) -> ExperimentResult:
    """Generate/fit/merge/score ``reps`` times; seed of rep r is base+r.

    Per repetition there is one sample, one model-selection sweep shared by
    the criteria, and one merge run per (criterion, measure). The excess is
    misclassification minus the fit's minimum misclassification.
    """
    if reps < 2:
        raise ValidationError(f"need reps >= 2, got {reps}")
    rows: list[RepRow] = []
    failures: list[str] = []
    for r in range(reps):
        seed = base_seed + r
        sample = generate(scn, seed)
        try:
            candidates, fit_failures = fit_candidates(
                sample.points, k_min, k_max, seed, em_cfg
            )
        except (NumericalError, ValidationError) as exc:
            failures.append(f"rep {r}: fitting failed: {exc}")
            continue
        for criterion in criteria:
            try:
                model = select_model(
                    sample.points, k_min, k_max, criterion, seed, em_cfg, candidates=candidates
                )
            except NumericalError as exc:
                failures.append(f"rep {r} [{criterion}]: selection failed: {exc}")
                continue
            if model.K < C:
                failures.append(
                    f"rep {r} [{criterion}]: selected K={model.K} < C={C}, cannot merge"
                )
                continue
            min_mis = min_misclassification(
                model.map_labels, sample.true_labels, sample.noise_mask
            )
            ctx = IntegrationContext(
                mode=integration, is_samples=is_samples, seed=seed
            )
            for measure in measures:
                try:
                    final_state, _ = run_to_c(
                        ClusterState.from_model(model), measure, C, ctx
                    )
                    finals = final_labels_from_merge(final_state, model.map_labels)
                    mis = misclassification_rate(
                        finals, sample.true_labels, sample.noise_mask, n_clusters=C
                    )
                except (NumericalError, ValidationError) as exc:
                    failures.append(f"rep {r} [{criterion}/{measure.value}]: {exc}")
                    continue
                rows.append(
                    RepRow(
                        rep=r,
                        criterion=criterion,
                        measure=measure.value,
                        k_selected=model.K,
                        misclass=mis,
                        min_misclass=min_mis,
                    )
                )
    summaries = []
    for criterion in criteria:
        for measure in measures:
            sel = [row for row in rows if row.criterion == criterion and row.measure == measure.value]
            if not sel:
                continue
            ex = np.array([row.excess for row in sel])
            sd = float(ex.std(ddof=1)) if len(ex) > 1 else 0.0
            summaries.append(
                RunSummary(
                    scenario=scn,
                    criterion=criterion,
                    measure=measure.value,
                    mean_excess=float(ex.mean()),
                    ci_halfwidth=1.96 * sd / math.sqrt(len(ex)),
                    n_reps=len(ex),
                    n_failed=reps - len({row.rep for row in sel}),
                )
            )
    return ExperimentResult(scenario=scn, rows=rows, summaries=summaries, failures=failures)
