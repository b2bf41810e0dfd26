"""Command-line surface: fit, merge, properties, simulate, eval, demo-faithful.

Every command is deterministic given --seed. Exit codes: 0 success,
1 input/validation error, 2 numerical failure. All JSON outputs carry a
``meta`` block (seed, settings, tool version) sufficient to reproduce the
run; CSV outputs are paired with a JSON that carries the same block.
"""

from __future__ import annotations

import functools
import sys

import click
import numpy as np

from . import __version__
from .dataio import bundled_faithful, lagged_pairs, load_csv, read_json, write_csv, write_json
from .dissim import ALL_MEASURES, Measure
from .errors import NumericalError, ValidationError
from .functional import IntegrationContext
from .merge import ClusterState, Dendrogram, elbow_curve, merge_pair, merge_step, run_to_c
from .mixture import EMConfig, FittedModel, em_fit, map_assign, select_model
from .properties import TABLE_COLUMNS, check_property, scenario_orderings
from .simlab import (
    FAMILIES,
    ScenarioC,
    min_misclassification,
    misclassification_rate,
    run_experiment,
)


def _meta(seed: int, **settings) -> dict:
    return {"seed": seed, "settings": settings, "tool_version": __version__}


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except NumericalError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _integration_context(integration: str, is_samples: int, seed: int) -> IntegrationContext:
    return IntegrationContext(mode=integration, is_samples=is_samples, seed=seed)


@click.group()
@click.version_option(__version__)
def main():
    """Hybrid clustering: mixture fitting plus density-based merging."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(), help="Feature CSV.")
@click.option("--kmin", default=1, show_default=True)
@click.option("--kmax", default=10, show_default=True)
@click.option("--criterion", type=click.Choice(["bic", "aic"]), default="bic", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--em-reps", default=10, show_default=True)
@click.option("--max-iter", default=1000, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(), help="Model JSON output.")
@handle_errors
def fit(input_path, kmin, kmax, criterion, seed, em_reps, max_iter, out_path):
    """Fit mixtures over a K range and keep the criterion-best model."""
    X, _, names = load_csv(input_path)
    cfg = EMConfig(reps=em_reps, max_iter=max_iter)
    model = select_model(X, kmin, kmax, criterion, seed, cfg)
    payload = model.to_dict()
    payload["criterion_scores"] = {
        str(k): {"bic": b, "aic": a} for k, (b, a) in model.criterion_scores.items()
    }
    payload["n_obs"] = model.n_obs
    payload["features"] = names
    payload["meta"] = _meta(
        seed, input=str(input_path), kmin=kmin, kmax=kmax, criterion=criterion,
        em_reps=em_reps, max_iter=max_iter,
    )
    write_json(out_path, payload)
    click.echo(f"selected K={model.K} by {criterion} (logL={model.log_likelihood:.3f}); wrote {out_path}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(), help="Model JSON from fit.")
@click.option("--measure", required=True, help="One of: " + ", ".join(m.value for m in ALL_MEASURES))
@click.option("--clusters", "C", required=True, type=int, help="Final cluster count.")
@click.option("--seed", default=0, show_default=True)
@click.option("--integration", type=click.Choice(["quadrature", "importance"]), default="quadrature", show_default=True)
@click.option("--is-samples", default=100_000, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(), help="Dendrogram JSON output (a CSV is written alongside).")
@handle_errors
def merge(model_path, measure, C, seed, integration, is_samples, out_path):
    """Hierarchically merge a fitted model down to C clusters."""
    measure = Measure.parse(measure)
    payload = read_json(model_path)
    model = FittedModel.from_dict(payload, n_obs=payload.get("n_obs"))
    ctx = _integration_context(integration, is_samples, seed)
    state, dendrogram = run_to_c(ClusterState.from_model(model), measure, C, ctx)
    out = dendrogram.to_payload()
    out["final_clusters"] = [sorted(s.members) for s in state.subclusters]
    out["final_weights"] = [s.weight for s in state.subclusters]
    if dendrogram.records:
        out["elbow"] = [
            {"remaining_clusters": r, "normalized_value": v} for r, v in elbow_curve(dendrogram)
        ]
    out["meta"] = _meta(
        seed, model=str(model_path), measure=measure.value, clusters=C,
        integration=integration, is_samples=is_samples,
    )
    write_json(out_path, out)
    csv_path = str(out_path).rsplit(".", 1)[0] + ".csv"
    write_csv(csv_path, ["step", "i", "j", "value", "remaining"], dendrogram.csv_rows())
    click.echo(f"merged {model.K} -> {C} clusters with {measure.display}; wrote {out_path} and {csv_path}")


@main.command("properties")
@click.option("--measure", "measure_name", default=None, help="Restrict to one measure row.")
@click.option("--trace", is_flag=True, help="Include limit traces in the JSON report.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(), help="Optional JSON report path.")
@handle_errors
def properties_cmd(measure_name, trace, seed, out_path):
    """Check the six data-independent properties for each measure."""
    ctx = IntegrationContext(seed=seed)
    measures = [Measure.parse(measure_name)] if measure_name else list(ALL_MEASURES)
    verdicts = {}
    for m in measures:
        verdicts[m] = {p: check_property(m, p, ctx) for p in TABLE_COLUMNS}
    matrix = {m: tuple(verdicts[m][p].passed for p in TABLE_COLUMNS) for m in measures}
    header = ["measure"] + [p.display for p in TABLE_COLUMNS]
    widths = [9] + [max(13, len(h) + 1) for h in header[1:]]
    click.echo("".join(h.ljust(w) for h, w in zip(header, widths)))
    for m in measures:
        cells = ["x" if v else ("?" if v is None else "-") for v in matrix[m]]
        click.echo("".join(c.ljust(w) for c, w in zip([m.display] + cells, widths)))
    if out_path:
        payload = {
            "columns": [p.value for p in TABLE_COLUMNS],
            "rows": {
                m.value: {
                    p.value: {
                        "pass": verdicts[m][p].passed,
                        "probe_inf": verdicts[m][p].probe_inf,
                        "probe_sup": verdicts[m][p].probe_sup,
                        "detail": verdicts[m][p].detail,
                        **({"trace": [list(t) for t in verdicts[m][p].limit_trace]} if trace else {}),
                    }
                    for p in TABLE_COLUMNS
                }
                for m in measures
            },
            "meta": _meta(seed, measure=measure_name, trace=trace),
        }
        write_json(out_path, payload)
        click.echo(f"wrote {out_path}")


@main.command()
@click.option("--dist", type=click.Choice(FAMILIES), required=True)
@click.option("--dim", type=click.Choice(["2", "3"]), default="2", show_default=True)
@click.option("--size", type=click.Choice(["small", "large"]), default="small", show_default=True)
@click.option("--reps", default=20, show_default=True)
@click.option("--criteria", default="bic", show_default=True, help="Comma-separated: bic,aic.")
@click.option("--measures", default="se,js,err,bhat,kldiv,klinf", show_default=True)
@click.option("--clusters", "C", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--kmin", default=1, show_default=True)
@click.option("--kmax", default=12, show_default=True)
@click.option("--integration", type=click.Choice(["quadrature", "importance"]), default="importance", show_default=True)
@click.option("--is-samples", default=100_000, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(), help="Per-rep results CSV (summary JSON alongside).")
@handle_errors
def simulate(dist, dim, size, reps, criteria, measures, C, seed, kmin, kmax, integration, is_samples, out_path):
    """Run the repetition study for one scenario family."""
    scn = ScenarioC(dist, int(dim), size)
    measure_list = [Measure.parse(m) for m in measures.split(",") if m.strip()]
    criteria_list = [c.strip().lower() for c in criteria.split(",") if c.strip()]
    for c in criteria_list:
        if c not in ("bic", "aic"):
            raise ValidationError(f"unknown criterion {c!r}")
    result = run_experiment(
        scn, measure_list, criteria_list, reps, C, seed,
        k_min=kmin, k_max=kmax, integration=integration, is_samples=is_samples,
    )
    rows = [
        (r.rep, r.criterion, r.measure, r.k_selected, r.misclass, r.min_misclass, r.excess)
        for r in result.rows
    ]
    write_csv(out_path, ["rep", "criterion", "measure", "K_selected", "misclass", "min_misclass", "excess"], rows)
    summary_path = str(out_path).rsplit(".", 1)[0] + "_summary.json"
    payload = {
        "scenario": {"family": dist, "dim": int(dim), "size": size},
        "summaries": [
            {
                "criterion": s.criterion, "measure": s.measure,
                "mean_excess": s.mean_excess, "ci_halfwidth": s.ci_halfwidth,
                "n_reps": s.n_reps, "n_failed": s.n_failed,
            }
            for s in result.summaries
        ],
        "failures": result.failures,
        "meta": _meta(
            seed, dist=dist, dim=int(dim), size=size, reps=reps, criteria=criteria_list,
            measures=[m.value for m in measure_list], clusters=C, kmin=kmin, kmax=kmax,
            integration=integration, is_samples=is_samples,
        ),
    }
    write_json(summary_path, payload)
    click.echo(f"wrote {out_path} and {summary_path} ({len(result.rows)} rows, {len(result.failures)} failures)")


@main.command("eval")
@click.option("--input", "input_path", required=True, type=click.Path(), help="CSV with a trailing label column.")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--dendrogram", "dendro_path", default=None, type=click.Path(), help="Optional dendrogram JSON; adds the merged clustering's misclassification.")
@click.option("--features", default=None, help="Comma-separated feature column subset, e.g. col1,col2,col3.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def eval_cmd(input_path, model_path, dendro_path, features, seed, out_path):
    """Misclassification report for a labelled data set and a fitted model."""
    X, y, names = load_csv(input_path)
    if y is None:
        raise ValidationError(f"{input_path}: eval needs a trailing 'label' column")
    if features:
        wanted = [f.strip() for f in features.split(",") if f.strip()]
        missing = [f for f in wanted if f not in names]
        if missing:
            raise ValidationError(f"feature columns not found: {missing}")
        X = X[:, [names.index(f) for f in wanted]]
    payload = read_json(model_path)
    model = FittedModel.from_dict(payload, n_obs=payload.get("n_obs"))
    labels = map_assign(model, X)
    report = {
        "n_obs": int(X.shape[0]),
        "K": model.K,
        "min_misclassification": min_misclassification(labels, y),
        "meta": _meta(seed, input=str(input_path), model=str(model_path),
                      dendrogram=dendro_path, features=features),
    }
    if dendro_path:
        dendrogram = Dendrogram.from_payload(read_json(dendro_path))
        state = ClusterState.from_model(model)
        for rec in dendrogram.records:
            state = merge_pair(state, rec.merged_ids[0], rec.merged_ids[1])
        finals = np.empty(len(labels), dtype=int)
        for pos, sub in enumerate(state.subclusters):
            for member in sub.members:
                finals[labels == member] = pos
        report["misclassification"] = misclassification_rate(
            finals, y, n_clusters=state.count
        )
        report["final_clusters"] = [sorted(s.members) for s in state.subclusters]
    write_json(out_path, report)
    click.echo(f"wrote {out_path}")


@main.command("demo-faithful")
@click.option("--seed", default=0, show_default=True)
@click.option("--clusters", "C", default=3, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(), help="Optional JSON report path.")
@handle_errors
def demo_faithful(seed, C, out_path):
    """Geyser demo: lagged eruption pairs, K=4 fit, SE vs Bhat first merges.

    The bundled data are the 272 Old Faithful eruption records (duration in
    minutes, waiting time); consecutive eruption durations form the
    two-dimensional lagged pairs, so 271 rows enter the fit.
    """
    data = bundled_faithful()
    pairs = lagged_pairs(data[:, 0])
    # 30 restarts: the stable four-blob optimum, not a local split of one blob
    model = em_fit(pairs, 4, seed, EMConfig(reps=30))
    ctx = IntegrationContext(seed=seed)
    state = ClusterState.from_model(model)
    first = {}
    for measure in (Measure.SE, Measure.BHAT):
        _, record = merge_step(state, measure, ctx)
        first[measure] = record
        mk = sorted(state.subclusters[state.index_of(record.merged_ids[0])].members)
        ml = sorted(state.subclusters[state.index_of(record.merged_ids[1])].members)
        click.echo(
            f"{measure.display:5s} first merge: components {record.merged_ids} "
            f"(members {mk}+{ml}), dissimilarity {record.value:.6f}"
        )
    differ = first[Measure.SE].merged_ids != first[Measure.BHAT].merged_ids
    click.echo(f"SE and Bhat pick {'different' if differ else 'the same'} first merges")
    se_state, se_dendro = run_to_c(state, Measure.SE, C, ctx)
    bhat_state, bhat_dendro = run_to_c(state, Measure.BHAT, C, ctx)
    if out_path:
        payload = {
            "n_pairs": int(pairs.shape[0]),
            "K": model.K,
            "component_means": [c.mean.tolist() for _, c in model.mixture.terms],
            "component_weights": model.mixture.coefs().tolist(),
            "first_merge": {
                m.value: list(first[m].merged_ids) for m in (Measure.SE, Measure.BHAT)
            },
            "first_merges_differ": bool(differ),
            "final_clusters": {
                "se": [sorted(s.members) for s in se_state.subclusters],
                "bhat": [sorted(s.members) for s in bhat_state.subclusters],
            },
            "meta": _meta(seed, clusters=C, K=4, data="bundled Old Faithful (272 eruptions)"),
        }
        write_json(out_path, payload)
        click.echo(f"wrote {out_path}")


@main.command("orderings")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
@handle_errors
def orderings_cmd(seed, out_path):
    """Evaluate the six benchmark-scenario inequalities."""
    ctx = IntegrationContext(seed=seed)
    results = scenario_orderings(ctx)
    for r in results:
        click.echo(f"({r.label}) {r.description}: lhs={r.lhs:.6f} rhs={r.rhs:.6f} -> {'holds' if r.holds else 'VIOLATED'}")
    if out_path:
        write_json(out_path, {
            "orderings": [
                {"label": r.label, "description": r.description, "lhs": r.lhs,
                 "rhs": r.rhs, "holds": r.holds}
                for r in results
            ],
            "meta": _meta(seed),
        })
        click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
