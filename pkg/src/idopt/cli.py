"""Command-line interface.

Subcommands: generate, rjt, spu, oracle, model, solve, solve-lp,
experiment, report. Options can come from flags or from a key=value
config file passed with --config (flags win).
"""

from __future__ import annotations

import json
import sys
import time

import click

from .diagram import Policy, prune_irrelevant
from .errors import IdoptError
from .experiment import (ExperimentConfig, parse_results_csv, render_figures,
                         report as render_report, run_experiment)
from .formulation import VARIANTS, assemble, moments_assignment
from .generators import FAMILIES, generate, policy_count
from .inference import brute_force_meu, policy_moments, spu
from .io import load_instance, save_instance
from .model import parse_lp, write_solution
from .rjt import build_rjt_auto, build_soluble_rjt
from .solve import extract_policy, roundtrip_external, solve_lp, solve_milp


def _read_config(path):
    out = {}
    if path:
        with open(path) as f:
            for raw in f:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, val = line.partition("=")
                out[key.strip().replace("-", "_")] = val.strip()
    return out


def _cfg(config, key, given, cast, default):
    if given is not None:
        return given
    if key in config:
        return cast(config[key])
    return default


def _policy_json(id_, pol):
    return {id_.label(v): [[float(x) for x in row] for row in t]
            for v, t in sorted(pol.tables.items())}


def _pick_rjt(id_, kind):
    if kind == "soluble":
        return build_soluble_rjt(id_)
    return build_rjt_auto(id_)


@click.group()
def main():
    """Influence-diagram MEU: junction trees, SPU, MILP formulations."""


@main.command("generate")
@click.option("--family", type=click.Choice(FAMILIES), required=True)
@click.option("--omega-s", type=int, default=2, show_default=True)
@click.option("--omega-a", type=int, default=2, show_default=True)
@click.option("--horizon", "-T", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", "-o", type=click.Path(), default=None,
              help="Instance JSON path (stdout when omitted).")
def cli_generate(family, omega_s, omega_a, horizon, seed, output):
    """Generate a random instance of one of the built-in families."""
    id_, p = generate(family, omega_s, omega_a, horizon, seed)
    if output:
        save_instance(output, id_, p)
        click.echo(f"wrote {output} ({len(id_.vertices)} vertices, "
                   f"|policies| = {policy_count(id_, p)})")
    else:
        save_instance(sys.stdout, id_, p)


@main.command("rjt")
@click.argument("instance", type=click.Path(exists=True))
@click.option("--builder", type=click.Choice(["auto", "soluble"]), default="auto",
              show_default=True)
@click.option("--dot", type=click.Path(), default=None,
              help="Also write a DOT rendering of the cluster tree.")
def cli_rjt(instance, builder, dot):
    """Print the rooted junction tree in residual-offspring notation."""
    id_, p = load_instance(instance)
    rjt = _pick_rjt(id_, builder)
    for i in rjt.tree_order():
        click.echo(rjt.format_cluster(i, id_.graph.labels))
    if dot:
        with open(dot, "w") as f:
            f.write(rjt.to_dot(id_.graph.labels))


@main.command("spu")
@click.argument("instance", type=click.Path(exists=True))
@click.option("--max-sweeps", type=int, default=100, show_default=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
def cli_spu(instance, max_sweeps, tol):
    """Run single policy update from the uniform policy."""
    id_, p = load_instance(instance)
    id_, p = prune_irrelevant(id_, p)
    rjt = build_rjt_auto(id_)
    t0 = time.perf_counter()
    res = spu(id_, p, rjt, Policy.uniform(id_, p), max_sweeps=max_sweeps, tol=tol)
    out = {"value": res.value, "policy": _policy_json(id_, res.policy),
           "iterations": res.sweeps,
           "wall_time_ms": 1000.0 * (time.perf_counter() - t0)}
    click.echo(json.dumps(out))


@main.command("oracle")
@click.argument("instance", type=click.Path(exists=True))
@click.option("--cap", type=int, default=10_000_000, show_default=True,
              help="Abort when the deterministic policy count exceeds this.")
def cli_oracle(instance, cap):
    """Brute-force the MEU by enumerating deterministic policies."""
    id_, p = load_instance(instance)
    id_, p = prune_irrelevant(id_, p)
    t0 = time.perf_counter()
    pol, val = brute_force_meu(id_, p, cap=cap)
    out = {"value": val, "policy": _policy_json(id_, pol),
           "iterations": policy_count(id_, p),
           "wall_time_ms": 1000.0 * (time.perf_counter() - t0)}
    click.echo(json.dumps(out))


@main.command("model")
@click.argument("instance", type=click.Path(exists=True))
@click.option("--variant", type=click.Choice(VARIANTS), default="qperpb",
              show_default=True)
@click.option("--integral/--relaxed", default=True, show_default=True)
@click.option("--rjt", "rjt_kind", type=click.Choice(["auto", "soluble"]),
              default="auto", show_default=True)
@click.option("--lp", type=click.Path(), required=True,
              help="LP file output path.")
def cli_model(instance, variant, integral, rjt_kind, lp):
    """Write one of the four model variants in LP format."""
    id_, p = load_instance(instance)
    id_, p = prune_irrelevant(id_, p)
    rjt = _pick_rjt(id_, rjt_kind)
    model = assemble(id_, p, rjt, variant, integral=integral)
    model.write_lp(lp)
    click.echo(f"wrote {lp}: {len(model.variables)} variables, "
               f"{len(model.constraints)} constraints")


@main.command("solve")
@click.argument("instance", type=click.Path(exists=True))
@click.option("--variant", type=click.Choice(VARIANTS), default="qperpb",
              show_default=True)
@click.option("--rjt", "rjt_kind", type=click.Choice(["auto", "soluble"]),
              default="auto", show_default=True)
@click.option("--relax", is_flag=True, help="Solve the LP relaxation only.")
@click.option("--time-limit", type=float, default=None)
@click.option("--threads", type=int, default=1, show_default=True,
              help="Accepted for interface compatibility; solving is serial.")
@click.option("--solver-cmd", type=str, default=None,
              help="External command consuming <lp path> <solution path>.")
@click.option("--no-warm-start", is_flag=True, help="Skip the SPU warm start.")
def cli_solve(instance, variant, rjt_kind, relax, time_limit, threads,
              solver_cmd, no_warm_start):
    """Solve an instance through the MILP (or its relaxation)."""
    id_, p = load_instance(instance)
    id_, p = prune_irrelevant(id_, p)
    rjt = _pick_rjt(id_, rjt_kind)
    model = assemble(id_, p, rjt, variant, integral=not relax)
    if solver_cmd:
        res = roundtrip_external(model, solver_cmd)
    elif relax:
        res = solve_lp(model)
    else:
        warm = None
        if not no_warm_start:
            sres = spu(id_, p, rjt, Policy.uniform(id_, p))
            warm = moments_assignment(
                id_, p, rjt, policy_moments(id_, p, rjt, sres.policy), sres.policy)
        res = solve_milp(model, warm=warm, time_limit=time_limit)
    out = {"status": res.status, "value": res.value, "bound": res.bound,
           "nodes": res.nodes, "wall_time_ms": 1000.0 * res.wall_time}
    if not relax and res.status == "optimal" and not solver_cmd:
        out["policy"] = _policy_json(id_, extract_policy(id_, res, p))
    click.echo(json.dumps(out))


@main.command("solve-lp")
@click.argument("lp_file", type=click.Path(exists=True))
@click.argument("solution_file", type=click.Path())
def cli_solve_lp(lp_file, solution_file):
    """Solve an LP file and write `name value` lines.

    This is the reference implementation of the external-solver contract
    used by --solver-cmd.
    """
    with open(lp_file) as f:
        model = parse_lp(f.read())
    res = solve_lp(model)
    write_solution(solution_file, res.assignment)
    click.echo(f"objective {res.value}")


@main.command("experiment")
@click.option("--config", type=click.Path(exists=True), default=None,
              help="key=value file with defaults for the options below.")
@click.option("--family", type=click.Choice(FAMILIES), default=None)
@click.option("--omega-s", type=int, default=None)
@click.option("--omega-a", type=int, default=None)
@click.option("--horizon", "-T", type=int, default=None)
@click.option("--seeds", type=int, default=None, help="Number of seeds.")
@click.option("--variants", type=str, default=None,
              help="Comma-separated subset of " + ",".join(VARIANTS))
@click.option("--time-limit", type=float, default=None)
@click.option("--threads", type=int, default=None)
@click.option("--output", "-o", type=click.Path(), default=None,
              help="CSV output path (stdout when omitted).")
def cli_experiment(config, family, omega_s, omega_a, horizon, seeds, variants,
                   time_limit, threads, output):
    """Run seeds x variants for one family/size and emit the results table."""
    conf = _read_config(config)
    family = _cfg(conf, "family", family, str, None)
    if family is None:
        raise click.UsageError("--family is required (flag or config)")
    variants_str = _cfg(conf, "variants", variants, str, ",".join(VARIANTS))
    cfg = ExperimentConfig(
        family=family,
        omega_s=_cfg(conf, "omega_s", omega_s, int, 3),
        omega_a=_cfg(conf, "omega_a", omega_a, int, 2),
        horizon=_cfg(conf, "horizon", horizon, int, 3),
        n_seeds=_cfg(conf, "seeds", seeds, int, 10),
        variants=tuple(v.strip() for v in variants_str.split(",") if v.strip()),
        time_limit=_cfg(conf, "time_limit", time_limit, float, None),
        threads=_cfg(conf, "threads", threads, int, 1),
    )
    click.echo(f"# estimated |policies| per instance: "
               f"{policy_count(*prune_irrelevant(*generate(cfg.family, cfg.omega_s, cfg.omega_a, cfg.horizon, 0)))}",
               err=True)
    results = run_experiment(cfg)
    text = render_report(results, "csv")
    if output:
        with open(output, "w") as f:
            f.write(text)
        click.echo(f"wrote {output}")
    else:
        click.echo(text, nl=False)


@main.command("report")
@click.argument("results_csv", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]),
              default="markdown", show_default=True)
@click.option("--plot", type=click.Path(), default=None,
              help="Directory for summary figures (PNG), rendered alongside "
                   "the delimited output.")
def cli_report(results_csv, fmt, plot):
    """Re-render a results CSV as csv or markdown, optionally with figures."""
    with open(results_csv) as f:
        rows = parse_results_csv(f.read())
    click.echo(render_report(rows, fmt), nl=False)
    if plot:
        for path in render_figures(rows, plot):
            click.echo(f"figure: {path}", err=True)


def run():
    try:
        main(standalone_mode=True)
    except IdoptError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run()
