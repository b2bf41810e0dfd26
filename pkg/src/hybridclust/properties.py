"""Executable checks for the six data-independent properties of the
dissimilarity measures, over a fixed probe catalog of weighted pairs.

Empirical extrema over the catalog (probe_inf / probe_sup) stand in for a
measure's minimum and maximum where those are infinite; where a measure
has a known finite extreme (see ``Measure.analytic_range``) the limit
check tests attainment of that value directly. The catalog bundles the
pairs from the benchmark one-dimensional scenarios, so the known
counterexample configurations are always present as witnesses.

The noise check is the one place where integrals are evaluated on a
restricted window (the concentrated component's 12-sigma box): the
flattening component's own far tail would otherwise dominate every
log-based functional and no measure could register the "low maximum
density looks like nothing" behaviour the check is after.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .dissim import ALL_MEASURES, Measure, WeightedPair, evaluate
from .errors import NumericalError, ValidationError
from .functional import IntegrationContext
from .mixture import MixtureDensity, Subcluster

LOG2 = math.log(2.0)

# limit-sequence parameters (all one-dimensional)
EQUALITY_WEIGHTS = (0.1, 0.25, 0.5)
ORTHO_GAPS = (10.0, 20.0, 40.0)
ORTHO_SPLITS = ((0.5, 0.5), (0.8, 0.2))
OUTLIER_WEIGHTS = tuple(10.0 ** -k for k in range(1, 7))
NOISE_SIGMAS = tuple(10.0 ** k for k in range(2, 8))
NOISE_WINDOW_SIGMAS = 12.0
MODE_A_INCREASE = (0.5, 0.1, 0.01, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
MODE_A_DECREASE = (0.9, 0.99, 0.999)

EXACT_TOL = 1e-6       # exact-arithmetic comparisons
MONOTONE_SLACK = 1e-7  # quadrature noise allowance in trend checks
MODE_LIMIT_TOL = 1e-3  # the mode sequences stop at a = 1e-8 / 0.999
GROWTH_FACTOR = 1.5    # per-doubling growth demanded of unbounded measures


class PropertyKind(enum.Enum):
    SYMMETRY = "symmetry"
    EQUALITY = "equality"
    ORTHOGONALITY = "orthogonality"
    OUTLIER = "outlier"
    NOISE = "noise"
    MODE = "mode"

    @property
    def display(self) -> str:
        return self.value.capitalize()


ALL_PROPERTIES = tuple(PropertyKind)

# column order used by the printed table
TABLE_COLUMNS = (
    PropertyKind.EQUALITY,
    PropertyKind.ORTHOGONALITY,
    PropertyKind.SYMMETRY,
    PropertyKind.OUTLIER,
    PropertyKind.NOISE,
    PropertyKind.MODE,
)

EXPECTED_TABLE = {
    Measure.SE: (False, True, True, False, False, False),
    Measure.WSE: (False, False, True, False, False, False),
    Measure.JS: (True, False, True, False, False, False),
    Measure.ERR: (True, True, True, False, False, True),
    Measure.BHAT: (True, True, True, True, False, True),
    Measure.KLDIV: (True, True, True, True, False, True),
    Measure.KLINF: (True, True, True, True, True, True),
}


@dataclass(frozen=True)
class ScenarioB:
    """One benchmark scenario: fixed (mean, std, weight) component triples."""

    label: str
    components: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        total = sum(w for _, _, w in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"scenario {self.label}: weights sum to {total}")

    def subcluster(self, idx: int, sid: int = 0) -> Subcluster:
        mu, sd, w = self.components[idx]
        return Subcluster(
            id=sid, weight=w, density=MixtureDensity.single([mu], [[sd * sd]]),
            members=frozenset({sid}),
        )

    def pair(self, i: int, j: int) -> WeightedPair:
        return WeightedPair(self.subcluster(i, 0), self.subcluster(j, 1))


SCENARIOS_B: dict[str, ScenarioB] = {
    "a": ScenarioB("a", ((-3.0, 1.0, 0.475), (0.0, 1.0, 0.475), (3.1, 1.0, 0.05))),
    "b": ScenarioB("b", ((-1.0, 1.0, 0.505), (4.0, 1.0, 0.490), (10.0, 0.5, 0.005))),
    "c": ScenarioB(
        "c",
        ((-1.5, 1.0, 0.332), (1.5, 1.0, 0.332), (-15.0, 15.0, 0.168), (15.0, 15.0, 0.168)),
    ),
    "d": ScenarioB("d", ((0.0, 1.0, 1 / 3), (3.0, 1.0, 1 / 3), (3.0, 0.2, 1 / 3))),
    "e": ScenarioB(
        "e",
        ((-2.9, 1.0, 0.4), (0.0, 1.0, 0.4), (2.5, 0.24, 0.1), (2.5, 0.24, 0.1)),
    ),
    "f": ScenarioB(
        "f",
        ((-4.0, 0.75, 2 / 3), (4.0, 0.75, 1 / 9), (6.0, 0.75, 1 / 9), (8.0, 0.75, 1 / 9)),
    ),
}

# the pairs each scenario's discussion is about, plus (f)'s third equal pair
_CATALOG_SCENARIO_PAIRS = (
    ("a", 0, 1), ("a", 1, 2),
    ("d", 0, 1), ("d", 1, 2),
    ("e", 0, 1), ("e", 2, 3),
    ("f", 0, 1), ("f", 1, 2), ("f", 2, 3),
)
_CATALOG_RANDOM_PAIRS = 8
_CATALOG_SEED = 0


@dataclass(frozen=True)
class PropertyVerdict:
    measure: Measure
    prop: PropertyKind
    passed: Optional[bool]  # None = indeterminate (integration failure)
    limit_trace: tuple[tuple[float, float], ...]
    probe_inf: float
    probe_sup: float
    detail: str = ""

    @property
    def indeterminate(self) -> bool:
        return self.passed is None


def _make_pair(w0, m0, s0, w1, m1, s1) -> WeightedPair:
    return WeightedPair(
        Subcluster(0, w0, MixtureDensity.single([m0], [[s0 * s0]]), frozenset({0})),
        Subcluster(1, w1, MixtureDensity.single([m1], [[s1 * s1]]), frozenset({1})),
    )


@lru_cache(maxsize=1)
def probe_catalog() -> tuple[WeightedPair, ...]:
    """Fixed catalog: 9 scenario pairs plus 8 seeded random 1-D pairs."""
    pairs = []
    for label, i, j in _CATALOG_SCENARIO_PAIRS:
        pairs.append(SCENARIOS_B[label].pair(i, j))
    rng = np.random.default_rng(_CATALOG_SEED)
    for _ in range(_CATALOG_RANDOM_PAIRS):
        mus = rng.uniform(-10.0, 10.0, 2)
        sds = rng.uniform(0.2, 5.0, 2)
        while True:
            ws = rng.uniform(0.05, 0.9, 2)
            if ws.sum() <= 1.0:
                break
        pairs.append(_make_pair(ws[0], mus[0], sds[0], ws[1], mus[1], sds[1]))
    return tuple(pairs)


@lru_cache(maxsize=64)
def _catalog_values(measure: Measure, ctx: IntegrationContext) -> np.ndarray:
    return np.array([evaluate(measure, p, ctx) for p in probe_catalog()])


def _limit_tol(vals: np.ndarray) -> float:
    return max(1e-4 * float(vals.max() - vals.min()), 1e-6)


def _identical_pair(weight: float) -> WeightedPair:
    return _make_pair(weight, 0.0, 1.0, weight, 0.0, 1.0)


def _converges_to_floor(trace, probe_inf, tol) -> tuple[bool, str]:
    last, prev = trace[-1][1], trace[-2][1]
    if abs(last - prev) >= tol:
        return False, f"no convergence: last step moved {abs(last - prev):.3g} (tol {tol:.3g})"
    if last > probe_inf + tol:
        return False, f"limit {last:.6g} stays above the floor {probe_inf:.6g}"
    return True, ""


def _attains_max(seq: list[float], analytic_max: float) -> tuple[bool, str]:
    if math.isfinite(analytic_max):
        gap = abs(seq[-1] - analytic_max)
        if gap > EXACT_TOL:
            return False, f"endpoint misses the maximum {analytic_max:.6g} by {gap:.3g}"
        return True, ""
    if seq[0] <= 0:
        return False, "sequence not positive, cannot diverge"
    for a, b in zip(seq, seq[1:]):
        if b < GROWTH_FACTOR * a:
            return False, f"growth stalls: {a:.6g} -> {b:.6g}"
    return True, ""


def _nondecreasing(seq: list[float]) -> bool:
    return all(b >= a - MONOTONE_SLACK for a, b in zip(seq, seq[1:]))


def check_property(
    measure: Measure, prop: PropertyKind, ctx: IntegrationContext
) -> PropertyVerdict:
    """Run one (measure, property) limit check; quadrature mode required."""
    if ctx.mode != "quadrature":
        raise ValidationError("property checks require a quadrature context (1-D scenarios)")
    try:
        vals = _catalog_values(measure, ctx)
    except NumericalError as exc:
        return PropertyVerdict(measure, prop, None, (), math.nan, math.nan, f"catalog failed: {exc}")
    probe_inf, probe_sup = float(vals.min()), float(vals.max())
    tol = _limit_tol(vals)
    analytic_min, analytic_max = measure.analytic_range

    try:
        if prop is PropertyKind.SYMMETRY:
            worst = 0.0
            trace = []
            for p in probe_catalog():
                d_kl = evaluate(measure, p, ctx)
                d_lk = evaluate(measure, p.swapped(), ctx)
                worst = max(worst, abs(d_kl - d_lk))
                trace.append((float(p.w_k), d_kl - d_lk))
            ok = worst < EXACT_TOL
            detail = f"max |D(k,l) - D(l,k)| = {worst:.3g}"

        elif prop is PropertyKind.EQUALITY:
            trace = []
            ok = True
            for w in EQUALITY_WEIGHTS:
                d = evaluate(measure, _identical_pair(w), ctx)
                trace.append((w, d))
                if d > probe_inf + EXACT_TOL:
                    ok = False
            detail = f"identical-pair values vs empirical minimum {probe_inf:.6g}"

        elif prop is PropertyKind.ORTHOGONALITY:
            trace = []
            ok = True
            details = []
            for w_k, w_l in ORTHO_SPLITS:
                seq = []
                for gap in ORTHO_GAPS:
                    d = evaluate(measure, _make_pair(w_k, 0.0, 1.0, w_l, gap, 1.0), ctx)
                    seq.append(d)
                    trace.append((gap, d))
                if not _nondecreasing(seq):
                    ok = False
                    details.append(f"split {w_k}/{w_l}: not nondecreasing")
                    continue
                attained, why = _attains_max(seq, analytic_max)
                if not attained:
                    ok = False
                    details.append(f"split {w_k}/{w_l}: {why}")
            detail = "; ".join(details) or "maximum attained under both weight splits"

        elif prop is PropertyKind.OUTLIER:
            trace = []
            for w in OUTLIER_WEIGHTS:
                trace.append((w, evaluate(measure, _make_pair(w, 0.0, 1.0, w, 1.0, 1.0), ctx)))
            ok, detail = _converges_to_floor(trace, probe_inf, tol)

        elif prop is PropertyKind.NOISE:
            window = [(-NOISE_WINDOW_SIGMAS, NOISE_WINDOW_SIGMAS)]
            trace = []
            for s in NOISE_SIGMAS:
                d = evaluate(
                    measure, _make_pair(0.5, 0.0, s, 0.5, 0.0, 1.0), ctx, domain=window
                )
                trace.append((s, d))
            ok, detail = _converges_to_floor(trace, probe_inf, tol)

        elif prop is PropertyKind.MODE:
            # equality under a -> 1 and orthogonality under a -> 0 are
            # prerequisites: a measure failing either cannot satisfy this one
            eq = check_property(measure, PropertyKind.EQUALITY, ctx)
            orth = check_property(measure, PropertyKind.ORTHOGONALITY, ctx)
            if eq.indeterminate or orth.indeterminate:
                return PropertyVerdict(measure, prop, None, (), probe_inf, probe_sup,
                                       "prerequisite checks indeterminate")
            trace = []
            inc = []
            for a in MODE_A_INCREASE:
                d = evaluate(measure, _make_pair(0.5, 0.0, 1.0, 0.5, 0.0, math.sqrt(a)), ctx)
                inc.append(d)
                trace.append((a, d))
            dec = []
            for a in MODE_A_DECREASE:
                d = evaluate(measure, _make_pair(0.5, 0.0, 1.0, 0.5, 0.0, math.sqrt(a)), ctx)
                dec.append(d)
                trace.append((a, d))
            ok = eq.passed and orth.passed
            details = [] if ok else ["fails equality or orthogonality prerequisite"]
            if not _nondecreasing(inc):
                ok = False
                details.append("a->0 branch not increasing")
            else:
                if math.isfinite(analytic_max):
                    gap = abs(inc[-1] - analytic_max)
                    if gap > MODE_LIMIT_TOL:
                        ok = False
                        details.append(f"a->0 endpoint misses maximum by {gap:.3g}")
                elif inc[-1] - inc[-2] < MODE_LIMIT_TOL:
                    ok = False
                    details.append("a->0 branch stopped growing")
            if not _nondecreasing(dec[::-1]):
                ok = False
                details.append("a->1 branch not decreasing")
            floor = max(probe_inf, analytic_min) if math.isfinite(analytic_min) else probe_inf
            if dec[-1] > floor + MODE_LIMIT_TOL:
                ok = False
                details.append(f"a->1 endpoint {dec[-1]:.6g} stays above minimum {floor:.6g}")
            detail = "; ".join(details) or "both branches reach their extremes"

        else:  # pragma: no cover
            raise ValidationError(f"unknown property {prop!r}")
    except NumericalError as exc:
        return PropertyVerdict(measure, prop, None, (), probe_inf, probe_sup, str(exc))

    return PropertyVerdict(measure, prop, bool(ok), tuple(trace), probe_inf, probe_sup, detail)


def table1(ctx: IntegrationContext) -> dict[Measure, dict[PropertyKind, PropertyVerdict]]:
    """All 7 x 6 verdicts; raises if any cell is indeterminate."""
    out: dict[Measure, dict[PropertyKind, PropertyVerdict]] = {}
    bad = []
    for measure in ALL_MEASURES:
        out[measure] = {}
        for prop in TABLE_COLUMNS:
            v = check_property(measure, prop, ctx)
            out[measure][prop] = v
            if v.indeterminate:
                bad.append(f"({measure.display}, {prop.display}): {v.detail}")
    if bad:
        raise NumericalError("indeterminate property cells: " + "; ".join(bad))
    return out


def table1_matrix(ctx: IntegrationContext) -> dict[Measure, tuple[bool, ...]]:
    verdicts = table1(ctx)
    return {
        m: tuple(verdicts[m][p].passed for p in TABLE_COLUMNS) for m in ALL_MEASURES
    }


def format_table(matrix: dict[Measure, tuple[bool, ...]]) -> str:
    header = ["measure"] + [p.display for p in TABLE_COLUMNS]
    widths = [9] + [max(13, len(h) + 1) for h in header[1:]]
    lines = ["".join(h.ljust(w) for h, w in zip(header, widths))]
    for m in ALL_MEASURES:
        cells = ["x" if v else "-" for v in matrix[m]]
        lines.append("".join(c.ljust(w) for c, w in zip([m.display] + cells, widths)))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Scenario orderings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrderingResult:
    label: str
    description: str
    lhs: float
    rhs: float
    holds: bool


def _unweighted_bhat_distance(scn: ScenarioB, i: int, j: int, ctx) -> float:
    from .functional import gauss_bhat_closed

    a = scn.subcluster(i).density.terms[0][1]
    b = scn.subcluster(j).density.terms[0][1]
    return gauss_bhat_closed(a, b)


def _unweighted_kl_sym(scn: ScenarioB, i: int, j: int, ctx) -> float:
    from .functional import gauss_kl_closed

    a = scn.subcluster(i).density.terms[0][1]
    b = scn.subcluster(j).density.terms[0][1]
    return gauss_kl_closed(a, b) + gauss_kl_closed(b, a)


def scenario_orderings(ctx: IntegrationContext, margin: float = 1e-6) -> list[OrderingResult]:
    """The six benchmark-scenario inequalities, each with a strict margin."""
    out = []

    def add(label, desc, lhs, rhs, reversed_=False):
        holds = (lhs > rhs + margin) if reversed_ else (lhs < rhs - margin)
        out.append(OrderingResult(label, desc, lhs, rhs, holds))

    a = SCENARIOS_B["a"]
    add("a", "Bhattacharyya distance (unweighted): d(1,2) < d(2,3)",
        _unweighted_bhat_distance(a, 0, 1, ctx), _unweighted_bhat_distance(a, 1, 2, ctx))
    add("a", "symmetrised KL (unweighted): d(1,2) < d(2,3)",
        _unweighted_kl_sym(a, 0, 1, ctx), _unweighted_kl_sym(a, 1, 2, ctx))

    b = SCENARIOS_B["b"]
    add("b", "SE(1,2) < SE(2,3)",
        evaluate(Measure.SE, b.pair(0, 1), ctx), evaluate(Measure.SE, b.pair(1, 2), ctx))
    add("b", "Err(1,2) < Err(2,3)",
        evaluate(Measure.ERR, b.pair(0, 1), ctx), evaluate(Measure.ERR, b.pair(1, 2), ctx))

    c = SCENARIOS_B["c"]
    noise_weight = c.components[2][2] + c.components[3][2]
    noise_density = MixtureDensity(
        (
            (0.5, c.subcluster(2).density.terms[0][1]),
            (0.5, c.subcluster(3).density.terms[0][1]),
        )
    )
    noise_sub = Subcluster(1, noise_weight, noise_density, frozenset({2, 3}))
    add("c", "Bhat(1,2) < Bhat(1, 3+4)",
        evaluate(Measure.BHAT, c.pair(0, 1), ctx),
        evaluate(Measure.BHAT, WeightedPair(c.subcluster(0, 0), noise_sub), ctx))

    d = SCENARIOS_B["d"]
    add("d", "KLdiv(1,2) < KLdiv(2,3)",
        evaluate(Measure.KLDIV, d.pair(0, 1), ctx), evaluate(Measure.KLDIV, d.pair(1, 2), ctx))
    add("d", "KLinf(1,2) > KLinf(2,3)",
        evaluate(Measure.KLINF, d.pair(0, 1), ctx), evaluate(Measure.KLINF, d.pair(1, 2), ctx),
        reversed_=True)

    e = SCENARIOS_B["e"]
    add("e", "SE(1,2) < SE(3,4)",
        evaluate(Measure.SE, e.pair(0, 1), ctx), evaluate(Measure.SE, e.pair(2, 3), ctx))

    f = SCENARIOS_B["f"]
    add("f", "JS(1,2) < JS(2,3)",
        evaluate(Measure.JS, f.pair(0, 1), ctx), evaluate(Measure.JS, f.pair(1, 2), ctx))

    return out
