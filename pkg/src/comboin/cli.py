"""Command-line interface: boundary tables, simulation studies, reports,
offline next-dose/selection queries, and the conduct service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import blrm
from .boundaries import decision_table, format_table_csv, format_table_text, lambda_boundaries
from .core import (
    DesignParams,
    DesignVariant,
    DoseGrid,
    SubsetMask,
    TrialState,
    TrialStatus,
)
from .engine import apply_cohort, decide_next
from .files import (
    list_bundled,
    load_mask,
    load_scenario,
    load_study_config,
    load_trial_file,
    params_from_dict,
)
from .isotonic import fit_isotonic, select_mtc
from .posterior import BetaPosterior
from .report import StudyReport, render_csv, render_figure, render_table
from .simulator import run_study, run_matrix


@click.group()
def main():
    """Dose-escalation designs for dual-agent combinations."""


@main.command()
@click.option("--phi", type=float, required=True, help="target DLT probability")
@click.option("--phi1", type=float, default=None, help="under-dosing threshold (default 0.6*phi)")
@click.option("--phi2", type=float, default=None, help="overdosing threshold (default 1.4*phi)")
def boundaries(phi, phi1, phi2):
    """Print the escalation/de-escalation boundaries."""
    phi1 = phi1 if phi1 is not None else 0.6 * phi
    phi2 = phi2 if phi2 is not None else 1.4 * phi
    le, ld = lambda_boundaries(phi, phi1, phi2)
    click.echo(f"lambda_e = {le:.6f}")
    click.echo(f"lambda_d = {ld:.6f}")


@main.command()
@click.option("--phi", type=float, required=True)
@click.option("--phi1", type=float, default=None)
@click.option("--phi2", type=float, default=None)
@click.option("--epsilon", type=float, default=0.95, show_default=True)
@click.option("--nmax", type=int, default=45, show_default=True)
@click.option("--csv", "as_csv", is_flag=True, help="emit CSV instead of aligned text")
def table(phi, phi1, phi2, epsilon, nmax, as_csv):
    """Print the per-n decision table."""
    params = DesignParams.from_target(phi, phi1, phi2, epsilon=epsilon)
    t = decision_table(params, nmax)
    click.echo(format_table_csv(t) if as_csv else format_table_text(t), nl=False)


def _design_params(doc: dict | None, design: str, overrides: dict) -> DesignParams:
    base = dict(doc or {})
    base["design"] = design
    base.update({k: v for k, v in overrides.items() if v is not None})
    if "phi" not in base:
        base["phi"] = 0.30
    return params_from_dict(base)


@main.command()
@click.option("--scenario", "scenario_ref", required=True,
              help="scenario file or bundled name (see list-data)")
@click.option("--mask", "mask_ref", default=None,
              help="mask file or bundled name; defaults to the scenario's own mask")
@click.option("--design", type=click.Choice([d.value for d in DesignVariant]), default="boin-cs",
              show_default=True)
@click.option("--reps", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--phi", type=float, default=0.30, show_default=True)
@click.option("--epsilon", type=float, default=0.95, show_default=True)
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--mcmc-burnin", type=int, default=2000, show_default=True,
              help="sampler burn-in for model-guided tie-breaking")
@click.option("--mcmc-draws", type=int, default=4000, show_default=True)
@click.option("--mcmc-scale", type=float, default=0.5, show_default=True,
              help="initial proposal scale before adaptation")
@click.option("--per-trial", is_flag=True, help="include one record per replication")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="write JSON records here instead of stdout")
def simulate(scenario_ref, mask_ref, design, reps, seed, phi, epsilon, parallelism,
             mcmc_burnin, mcmc_draws, mcmc_scale, per_trial, out_path):
    """Monte Carlo operating characteristics for one scenario and design."""
    from .simulator import run_trials, summarize

    grid, scenario_mask, scenario = load_scenario(scenario_ref)
    mask = load_mask(mask_ref, grid) if mask_ref else scenario_mask
    params = _design_params(None, design, {"phi": phi, "epsilon": epsilon})
    mcmc = blrm.McmcConfig(burn_in=mcmc_burnin, draws=mcmc_draws, initial_scale=mcmc_scale)
    results = run_trials(scenario, grid, mask, params, reps, seed, parallelism, mcmc=mcmc)
    oc = summarize(scenario, results)
    record = {"scenario": scenario.name, "config": mask_ref or "scenario-mask",
              "design": design} | oc.as_dict()
    if per_trial:
        record["trials"] = [
            {
                "selection": list(r.selection) if r.selection else None,
                "total_n": r.total_n,
                "total_dlt": r.total_dlt,
                "pts_over_tox": r.pts_over_tox,
                "stop_reason": r.stop_reason.value,
                "path": [[list(cell), dlt] for cell, dlt in r.path],
            }
            for r in results
        ]
    payload = json.dumps([record], indent=1)
    if out_path:
        Path(out_path).write_text(payload)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(payload)


@main.command("simulate-matrix")
@click.option("--config", "config_ref", required=True,
              help="study config file or bundled name (see list-data)")
@click.option("--reps", type=int, default=None, help="override the config's replication count")
@click.option("--seed", type=int, default=None, help="override the config's root seed")
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def simulate_matrix(config_ref, reps, seed, parallelism, out_path):
    """Run the scenario x configuration cross product from a study config."""
    cfg = load_study_config(config_ref)
    loaded = [load_scenario(ref) for ref in cfg["scenarios"]]
    grid = loaded[0][0]
    scenarios = [s for _, _, s in loaded]
    configs = []
    for c in cfg["configs"]:
        mask = load_mask(c["mask"], grid)
        params = _design_params(cfg.get("params"), c["design"], {})
        configs.append((c.get("label", f"{c['mask']}/{c['design']}"), mask, params))
    mcmc = blrm.McmcConfig(**cfg["mcmc"]) if "mcmc" in cfg else None
    records = run_matrix(
        scenarios, grid, configs,
        reps if reps is not None else cfg.get("reps", 1000),
        seed if seed is not None else cfg.get("seed", 0),
        parallelism,
        mcmc=mcmc,
    )
    payload = json.dumps(records, indent=1)
    if out_path:
        Path(out_path).write_text(payload)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(payload)


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON records produced by simulate / simulate-matrix")
@click.option("--format", "fmt", type=click.Choice(["table", "csv", "figure"]), default="table",
              show_default=True)
@click.option("--metric", type=click.Choice(["selection", "overdose", "sample_size", "dlt"]),
              default="selection", show_default=True, help="figure metric")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="output file (required for figures)")
def report(in_path, fmt, metric, out_path):
    """Render simulation records as an aligned table, CSV, or bar figure."""
    records = json.loads(Path(in_path).read_text())
    study = StudyReport.from_records(records)
    if fmt == "table":
        click.echo(render_table(study), nl=False)
    elif fmt == "csv":
        text = render_csv(study)
        if out_path:
            Path(out_path).write_text(text)
            click.echo(f"wrote {out_path}")
        else:
            click.echo(text, nl=False)
    else:
        if not out_path:
            raise click.UsageError("--out is required for figures")
        render_figure(study, metric, out_path)
        click.echo(f"wrote {out_path}")


def _replay_trial_file(doc: dict) -> tuple[DoseGrid, SubsetMask, DesignParams, TrialState]:
    import dataclasses

    from .core import mark_eliminated

    params = params_from_dict(doc["params"])
    grid = DoseGrid(tuple(doc["grid"]["levels_a"]), tuple(doc["grid"]["levels_b"]))
    mask_cells = doc.get("mask")
    mask = SubsetMask.from_cells(grid, [tuple(c) for c in mask_cells]) if mask_cells else SubsetMask.full(grid)
    state = TrialState.initial(grid)
    for entry in doc["cohorts"]:
        at = tuple(entry["at"])
        state = dataclasses.replace(state, current=at)
        state = apply_cohort(state, mask, at, entry["dlt"], params.cohort_size)
        post = BetaPosterior.from_counts(state.y_at(at), state.n_at(at), params.prior_a, params.prior_b)
        if state.n_at(at) >= params.min_n_eliminate and post.overdose_prob(params.phi) >= params.epsilon - 1e-12:
            state = mark_eliminated(state, mask, at)
    return grid, mask, params, state


@main.command("next-dose")
@click.option("--state", "state_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="trial-state JSON: params, grid, mask, cohorts")
@click.option("--seed", type=int, default=0, show_default=True, help="seed for tie-breaking")
def next_dose(state_path, seed):
    """Recommend the next combination for a recorded dosing history."""
    doc = load_trial_file(state_path)
    grid, mask, params, state = _replay_trial_file(doc)
    if state.status is not TrialStatus.RUNNING:
        click.echo(f"trial stopped: {state.status.value}")
        return
    decision = decide_next(state, grid, mask, params, np.random.default_rng(seed))
    click.echo(f"action: {decision.action.value}")
    if decision.next:
        click.echo(f"next combination: {decision.next} doses {grid.doses(decision.next)}")
    if decision.candidates:
        click.echo(f"candidates: {sorted(decision.candidates)} (tie_break={decision.tie_break.value})")


@main.command("select-mtc")
@click.option("--state", "state_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
def select_mtc_cmd(state_path, seed):
    """Isotonic estimates and the selected combination for a stopped trial."""
    import dataclasses

    doc = load_trial_file(state_path)
    grid, mask, params, state = _replay_trial_file(doc)
    if state.status is TrialStatus.RUNNING:
        state = dataclasses.replace(state, status=TrialStatus.STOPPED_MAX_N)
    fit = fit_isotonic(state, mask)
    for cell in fit.cells():
        click.echo(f"  {cell}: observed {state.y_at(cell)}/{state.n_at(cell)}"
                   f" -> isotonic {fit.estimates[cell]:.4f}")
    chosen = select_mtc(fit, state, params, rng=np.random.default_rng(seed))
    if chosen is None:
        click.echo("selection: none")
    else:
        click.echo(f"selection: {chosen} doses {grid.doses(chosen)}")


@main.command("list-data")
def list_data():
    """List bundled scenarios, masks, and study configs."""
    for kind in ("scenarios", "masks", "studies"):
        click.echo(f"{kind}: {', '.join(list_bundled(kind))}")


@main.command()
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default="trial-data", show_default=True)
@click.option("--token", default=None, help="require this X-Auth-Token header on every request")
@click.option("--ui-dir", default=None, type=click.Path(exists=True, file_okay=False),
              help="also serve this static directory at /")
def serve(port, host, data_dir, token, ui_dir):
    """Run the trial-conduct HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(data_dir, token)
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
