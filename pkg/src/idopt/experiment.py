"""Experiment harness: run instance families through SPU + MILP, report.

Per (seed, variant) cell the harness generates and prunes the instance,
builds the junction tree (the extended, seeded tree for pomdp_lm cut
variants), warm starts from SPU, solves the MILP, and records the root
integrality gap, the final gap, the SPU gap and the wall time. Aggregated
rows report means over seeds and the shifted geometric mean of the times
(shift 1s, recorded in the report metadata).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .diagram import Policy, prune_irrelevant
from .formulation import VARIANTS, assemble, moments_assignment
from .generators import FAMILIES, generate, policy_count
from .inference import policy_moments, spu
from .rjt import build_rjt_auto, build_rjt_seeded
from .solve import OPTIMAL, TIME_LIMIT, solve_lp, solve_milp

TIME_SHIFT = 1.0  # seconds, for the shifted geometric mean

COLUMNS = ("family", "omega_s", "omega_a", "horizon", "policies", "variant",
           "int_gap", "final_gap", "spu_gap", "time")


@dataclass
class ExperimentConfig:
    family: str
    omega_s: int
    omega_a: int
    horizon: int
    n_seeds: int = 10
    variants: tuple[str, ...] = VARIANTS
    time_limit: Optional[float] = None
    threads: int = 1
    seed_base: int = 0
    brute_force_cap: int = 10_000_000

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}")
        if self.omega_s < 1 or self.omega_a < 1 or self.horizon < 1:
            raise ValueError("omega_s, omega_a and horizon must be >= 1")


def experiment_rjt(id_, family: str, variant: str):
    """The tree the harness uses: for pomdp_lm with cuts, the extended tree
    seeded with {s_{t-1}, a_{t-1}, s_t} at each a_t; otherwise the online
    builder's tree."""
    if family == "pomdp_lm" and variant in ("qperp1", "qperpb"):
        from .graphs import topological_sort
        seeds = {}
        by_label = {id_.label(v): v for v in id_.vertices}
        t = 2
        while f"a{t}" in by_label:
            seeds[by_label[f"a{t}"]] = [by_label[f"s{t-1}"], by_label[f"a{t-1}"],
                                        by_label[f"s{t}"]]
            t += 1
        return build_rjt_seeded(id_, topological_sort(id_.graph), seeds)
    return build_rjt_auto(id_)


def run_cell(cfg: ExperimentConfig, seed: int, variant: str) -> dict:
    """One (seed, variant) measurement; errors are captured in the status."""
    row = {"family": cfg.family, "omega_s": cfg.omega_s, "omega_a": cfg.omega_a,
           "horizon": cfg.horizon, "seed": seed, "variant": variant,
           "status": "ok"}
    try:
        id_, p = generate(cfg.family, cfg.omega_s, cfg.omega_a, cfg.horizon, seed)
        id_, p = prune_irrelevant(id_, p)
        row["policies"] = policy_count(id_, p)
        rjt = experiment_rjt(id_, cfg.family, variant)
        spu_res = spu(id_, p, rjt, Policy.uniform(id_, p))
        warm = moments_assignment(id_, p, rjt,
                                  policy_moments(id_, p, rjt, spu_res.policy),
                                  spu_res.policy)
        model = assemble(id_, p, rjt, variant, integral=True)
        root = solve_lp(model)
        milp = solve_milp(model, warm=warm, time_limit=cfg.time_limit)
        best = milp.value
        denom = max(1e-12, abs(best))
        row.update({
            "int_gap": 100.0 * (root.value - best) / denom,
            "final_gap": 100.0 * (milp.bound - best) / denom,
            "spu_gap": 100.0 * (best - spu_res.value) / denom,
            "time": milp.wall_time + root.wall_time,
            "nodes": milp.nodes,
            "optimal": milp.status == OPTIMAL,
        })
        if milp.status == TIME_LIMIT:
            row["status"] = "TL"
    except Exception as e:  # keep the sweep going, mark the cell
        row["status"] = f"error: {type(e).__name__}: {e}"
    return row


def shifted_geometric_mean(times: Sequence[float], shift: float = TIME_SHIFT) -> float:
    if not times:
        return 0.0
    logs = [math.log(t + shift) for t in times]
    return math.exp(sum(logs) / len(logs)) - shift


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """All seeds x variants, aggregated per variant in config order."""
    cells = [(seed, variant)
             for variant in cfg.variants
             for seed in range(cfg.seed_base, cfg.seed_base + cfg.n_seeds)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda sv: run_cell(cfg, *sv), cells))
    else:
        results = [run_cell(cfg, seed, var) for seed, var in cells]
    by_variant: dict[str, list[dict]] = {v: [] for v in cfg.variants}
    for row in results:
        by_variant[row["variant"]].append(row)

    table = []
    for variant in cfg.variants:
        rows = by_variant[variant]
        good = [r for r in rows if r["status"] in ("ok", "TL")]
        agg = {"family": cfg.family, "omega_s": cfg.omega_s,
               "omega_a": cfg.omega_a, "horizon": cfg.horizon,
               "policies": good[0]["policies"] if good else "",
               "variant": variant}
        if not good:
            agg.update({"int_gap": "ERR", "final_gap": "ERR",
                        "spu_gap": "ERR", "time": "ERR"})
            table.append(agg)
            continue
        mean = lambda key: sum(r[key] for r in good) / len(good)
        agg["int_gap"] = mean("int_gap")
        agg["final_gap"] = "Opt" if all(r["optimal"] for r in good) \
            else mean("final_gap")
        agg["spu_gap"] = mean("spu_gap")
        agg["time"] = "TL" if all(r["status"] == "TL" for r in good) \
            else shifted_geometric_mean([r["time"] for r in good])
        if any(r["status"].startswith("error") for r in rows):
            agg["int_gap"] = "ERR"
        table.append(agg)
    return table


def _format_cell(key: str, value) -> str:
    if isinstance(value, str):
        return value
    if key in ("int_gap", "final_gap", "spu_gap"):
        rounded = round(value, 2) + 0.0  # normalize -0.0
        return f"{rounded:.2f}"
    if key == "time":
        return f"{value:.3f}"
    return str(value)


def report(results: list[dict], fmt: str = "csv") -> str:
    """Render the aggregated table; gaps in percent with two decimals,
    "Opt" for solved-to-optimality final gaps, "TL" for timed-out cells."""
    rows = [[_format_cell(k, r.get(k, "")) for k in COLUMNS] for r in results]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(rows)
        buf.write(f"# shifted geometric mean time, shift={TIME_SHIFT}s\n")
        return buf.getvalue()
    if fmt == "markdown":
        head = "| " + " | ".join(COLUMNS) + " |"
        sep = "|" + "|".join("---" for _ in COLUMNS) + "|"
        body = ["| " + " | ".join(r) + " |" for r in rows]
        note = f"\nTimes are shifted geometric means (shift {TIME_SHIFT:.0f}s)."
        return "\n".join([head, sep] + body) + note + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def parse_results_csv(text: str) -> list[dict]:
    rows = []
    for rec in csv.DictReader(l for l in text.splitlines() if not l.startswith("#")):
        row = dict(rec)
        for key in ("int_gap", "final_gap", "spu_gap", "time"):
            try:
                row[key] = float(row[key])
            except (ValueError, TypeError):
                pass
        rows.append(row)
    return rows


def render_figures(results: list[dict], outdir: str) -> list[str]:
    """Bar charts of the root gap and time per variant, one file per
    (family, size) group, written alongside the delimited output."""
    import os

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(outdir, exist_ok=True)
    groups: dict[tuple, list[dict]] = {}
    for r in results:
        key = (r["family"], r["omega_s"], r["omega_a"], r["horizon"])
        groups.setdefault(key, []).append(r)
    written = []
    for (family, ws, wa, horizon), rows in groups.items():
        variants = [r["variant"] for r in rows]
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
        for ax, key, title in ((axes[0], "int_gap", "root gap (%)"),
                               (axes[1], "time", "time (s)")):
            vals = [r[key] if isinstance(r[key], (int, float)) else 0.0
                    for r in rows]
            ax.bar(range(len(variants)), vals, color="#4878a8")
            ax.set_xticks(range(len(variants)))
            ax.set_xticklabels(variants, rotation=20)
            ax.set_title(title)
            ax.grid(axis="y", alpha=0.3)
        fig.suptitle(f"{family} (omega_s={ws}, omega_a={wa}, T={horizon})")
        fig.tight_layout()
        path = os.path.join(outdir, f"{family}_{ws}_{wa}_{horizon}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
