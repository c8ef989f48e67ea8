"""Config-driven experiment runner: dispatch, CSV/JSON artifacts, reports.

CSV bodies are deterministic functions of the config (fixed float format,
'\\n' line endings, no locale, no timestamps); wall time and other
run-specific metadata live only in the JSON report's provenance block.
Scientific non-convergence is recorded in result rows and summary flags,
never raised as an error.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import (
    ExperimentConfig,
    build_blocks,
    build_mixing,
    build_prior,
    prior_output_dim,
)
from .injectivity import (
    SWEEP_CSV_HEADER,
    brute_force_collision_oracle,
    codimension_probe,
    collision_search,
    regime_label,
    threshold_sweep,
)
from .measurements import (
    BlockStructure,
    MixingMatrix,
    block_structure_for_power_spectrum,
    second_moment_blocks,
    separable_measurement,
    to_real_fourier,
)
from .mra import (
    GroupAction,
    draw_ground_truth,
    estimate_second_moment,
    exact_population_moment,
    extract_invariants,
    recover,
    sample_complexity_sweep,
    select_conditioned_instance,
    simulate_observations,
)
from .priors import (
    GeneratorNetwork,
    SparsePrior,
    estimate_image_dimension,
    random_relu_network,
)

__all__ = ["RunReport", "run"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    cols = header.split(",")
    for row in rows:
        if isinstance(row, dict):
            lines.append(",".join(_fmt(row.get(c)) for c in cols))
        else:
            lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _parallel_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _collect_seeds(obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            if "seed" in k and isinstance(v, (int, list)):
                out.extend(v if isinstance(v, list) else [v])
            else:
                _collect_seeds(v, out)
    elif isinstance(obj, list):
        for v in obj:
            _collect_seeds(v, out)


@dataclass
class RunReport:
    config_echo: dict
    results: dict
    provenance: dict
    csv_files: list[str]

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config_echo,
                "results": self.results,
                "provenance": self.provenance,
                "csv_files": self.csv_files,
            },
            indent=2,
            sort_keys=True,
        )


def run(config: ExperimentConfig, out_dir=None, threads: int = 1) -> RunReport:
    """Execute one experiment config and write its artifacts to out_dir."""
    t0 = time.perf_counter()
    out = Path(out_dir if out_dir is not None else (config.output_dir or "."))
    out.mkdir(parents=True, exist_ok=True)

    runner = {
        "measure": _run_measure,
        "collide": _run_collide,
        "probe-dim": _run_probe_dim,
        "mra-sim": _run_mra_sim,
        "sweep": _run_sweep,
    }[config.command]
    results, csv_files = runner(config.parameters, out, threads)

    seeds: list[int] = []
    _collect_seeds(config.parameters, seeds)
    report = RunReport(
        config_echo=config.to_dict(),
        results=results,
        provenance={
            "seed_list": seeds,
            "config_sha256": config.content_hash(),
            "wall_time_s": round(time.perf_counter() - t0, 3),
        },
        csv_files=[str(p) for p in csv_files],
    )
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    return report


# ---------------------------------------------------------------------------
# measure
# ---------------------------------------------------------------------------

def _run_measure(p: dict, out: Path, threads: int):
    if "signal" in p:
        sig = np.asarray(p["signal"], dtype=float)
    else:
        sig = np.loadtxt(p["signal_path"]).reshape(-1)
    if p.get("domain", "block") == "time":
        sig = to_real_fourier(sig)
    N = sig.shape[0]
    blocks = build_blocks(p, N)
    if "mixing" in p:
        A = build_mixing(p["mixing"], N)
        values = separable_measurement(sig, A, blocks)
    else:
        values = second_moment_blocks(sig, blocks)
    path = out / "measurement.csv"
    header = ",".join(f"b{k + 1}" for k in range(blocks.R))
    write_csv(path, header, [list(values)])
    return {"values": [float(v) for v in values], "blocks": list(blocks.dims)}, [path]


# ---------------------------------------------------------------------------
# collide
# ---------------------------------------------------------------------------

def _prior_dimension_summary(prior) -> int:
    if isinstance(prior, SparsePrior):
        return prior.sparsity
    return estimate_image_dimension(prior, trials=32, seed=0).value


def _run_collide(p: dict, out: Path, threads: int):
    prior = build_prior(p["prior"])
    N = prior_output_dim(prior)
    blocks = build_blocks(p, N)
    kind = p["mixing"]["kind"]
    mixing_seeds = p.get("mixing_seeds") or [p["mixing"].get("seed", 0)]
    M = _prior_dimension_summary(prior)
    regime = "non-generic" if kind == "identity" else regime_label(N, M, kind)
    search_kwargs = {
        k: p[k] for k in ("residual_tol", "separation_tol", "penalty") if k in p
    }

    def one(mseed):
        A = (
            MixingMatrix.identity(N)
            if kind == "identity"
            else build_mixing({"kind": kind, "seed": mseed}, N)
        )
        rep = collision_search(
            prior,
            A,
            blocks,
            restarts=int(p.get("restarts", 200)),
            seed=int(p.get("seed", 0)),
            **search_kwargs,
        )
        return mseed, rep

    reports = _parallel_map(one, mixing_seeds, threads)
    rows = [
        {
            "N": N,
            "M": M,
            "regime": regime,
            "kind": kind,
            "seed": mseed,
            "verdict": rep.verdict,
            "residual": rep.residual,
            "separation": rep.separation,
        }
        for mseed, rep in reports
    ]
    path = out / "collisions.csv"
    write_csv(path, SWEEP_CSV_HEADER, rows)
    collisions = sum(r["verdict"] == "collision" for r in rows)
    results = {
        "N": N,
        "M": M,
        "regime": regime,
        "collisions_found": collisions,
        "searches": len(rows),
        "all_converged": all(rep.converged for _, rep in reports),
    }
    if p.get("oracle_check"):
        oracle = brute_force_collision_oracle(
            prior,
            MixingMatrix.identity(N)
            if kind == "identity"
            else build_mixing({"kind": kind, "seed": mixing_seeds[0]}, N),
            blocks,
            grid_points_per_axis=int(p.get("oracle_grid", 41)),
        )
        results["oracle_verdict"] = oracle.verdict
    return results, [path]


# ---------------------------------------------------------------------------
# probe-dim
# ---------------------------------------------------------------------------

PROBE_CSV_HEADER = (
    "pair,N,manifold,ambient_dim,estimated_solution_dim,theoretical_bound,"
    "converged,residual"
)


def _run_probe_dim(p: dict, out: Path, threads: int):
    N = int(p["N"])
    blocks = build_blocks(p, N)
    manifold = p["manifold"]
    pairs = int(p.get("pairs", 20))
    base_seed = int(p["seed"])

    probe_kwargs = {
        k: p[k] for k in ("restarts", "residual_target", "rank_rtol") if k in p
    }

    def one(i):
        rng = np.random.default_rng(np.random.SeedSequence((base_seed, i)))
        x = rng.normal(size=N)
        y = rng.normal(size=N)
        est = codimension_probe(
            x,
            y,
            manifold,
            blocks,
            seed=np.random.SeedSequence((base_seed, i, 0xB)),
            **probe_kwargs,
        )
        return i, est

    probes = _parallel_map(one, range(pairs), threads)
    rows = [
        {
            "pair": i,
            "N": N,
            "manifold": manifold,
            "ambient_dim": est.ambient_dim,
            "estimated_solution_dim": est.estimated_solution_dim,
            "theoretical_bound": est.theoretical_bound,
            "converged": est.converged,
            "residual": est.residual,
        }
        for i, est in probes
    ]
    path = out / "probes.csv"
    write_csv(path, PROBE_CSV_HEADER, rows)
    converged = [est for _, est in probes if est.converged]
    within = [est for est in converged if est.estimated_solution_dim <= est.theoretical_bound]
    equal = [est for est in converged if est.estimated_solution_dim == est.theoretical_bound]
    results = {
        "pairs": pairs,
        "converged": len(converged),
        "within_bound": len(within),
        "equal_to_bound": len(equal),
        "theoretical_bound": rows[0]["theoretical_bound"] if rows else None,
        "ambient_dim": rows[0]["ambient_dim"] if rows else None,
    }
    return results, [path]


# ---------------------------------------------------------------------------
# mra-sim
# ---------------------------------------------------------------------------

MRA_CSV_HEADER = "repeat,sigma,n,invariant_rmse,recovery_error,recovery_converged"
BLOCKSCALAR_CSV_HEADER = (
    "block,dim,energy,exact_offblock_max,exact_scalar_dev,mc_rel_frobenius"
)


def _build_group(spec: dict) -> GroupAction:
    if spec["kind"] == "so3-bandlimited":
        return GroupAction.sphere(int(spec["L"]))
    return GroupAction(spec["kind"], int(spec["N"]))


def _run_mra_sim(p: dict, out: Path, threads: int):
    group = _build_group(p["group"])
    blocks = group.blocks
    N = group.N
    sigma = float(p["sigma"])
    n = int(p["n"])
    base_seed = int(p["seed"])

    prior = A = None
    if "prior" in p:
        prior = build_prior(p["prior"])
        A = (
            MixingMatrix.identity(N)
            if p.get("mixing", {}).get("kind", "identity") == "identity"
            else build_mixing(p["mixing"], N)
        )
        _, _, x_star, _, _ = draw_ground_truth(
            prior, A.entries, p.get("true_seed", 0), p.get("signal_norm")
        )
    else:
        rng = np.random.default_rng(int(p.get("signal_seed", 0)))
        x_star = rng.normal(size=N)
        x_star /= np.linalg.norm(x_star)

    csv_files = []
    results: dict = {"group": group.kind, "N": N, "sigma": sigma, "n": n}

    if p.get("block_scalar_check"):
        M_exact = exact_population_moment(x_star, group)
        energies = second_moment_blocks(x_star, blocks)
        obs = simulate_observations(x_star, group, n, sigma, seed=base_seed)
        M_mc = estimate_second_moment(obs).matrix
        rows = []
        off_mask = np.ones((N, N), dtype=bool)
        for sl in blocks.slices():
            off_mask[sl, sl] = False
        off_max = float(np.max(np.abs(M_exact[off_mask]))) if off_mask.any() else 0.0
        for k, sl in enumerate(blocks.slices()):
            d = blocks.dims[k]
            target = (energies[k] / d) * np.eye(d)
            exact_dev = float(np.max(np.abs(M_exact[sl, sl] - target)))
            mc_rel = float(
                np.linalg.norm(M_mc[sl, sl] - target) / np.linalg.norm(target)
            )
            rows.append(
                {
                    "block": k,
                    "dim": d,
                    "energy": float(energies[k]),
                    "exact_offblock_max": off_max,
                    "exact_scalar_dev": exact_dev,
                    "mc_rel_frobenius": mc_rel,
                }
            )
        path = out / "blockscalar.csv"
        write_csv(path, BLOCKSCALAR_CSV_HEADER, rows)
        csv_files.append(path)
        results["exact_scalar_dev_max"] = max(r["exact_scalar_dev"] for r in rows)
        results["mc_rel_frobenius_max"] = max(r["mc_rel_frobenius"] for r in rows)

    if p.get("recover") and prior is not None:
        repeats = int(p.get("repeats", 1))
        true_inv = second_moment_blocks(x_star, blocks)

        def one(rep):
            obs = simulate_observations(
                x_star, group, n, sigma, seed=np.random.SeedSequence((base_seed, rep))
            )
            inv = extract_invariants(estimate_second_moment(obs), blocks)
            rec = recover(
                inv,
                prior,
                A,
                blocks,
                seed=np.random.SeedSequence((base_seed, rep, 0xC)),
                restarts=int(p.get("recover_restarts", 20)),
            )
            rmse = float(np.sqrt(np.mean((inv - true_inv) ** 2)))
            return {
                "repeat": rep,
                "sigma": sigma,
                "n": n,
                "invariant_rmse": rmse,
                "recovery_error": rec.error_fn(x_star),
                "recovery_converged": rec.converged,
            }

        rows = _parallel_map(one, range(repeats), threads)
        path = out / "mra.csv"
        write_csv(path, MRA_CSV_HEADER, rows)
        csv_files.append(path)
        results["median_recovery_error"] = float(
            np.median([r["recovery_error"] for r in rows])
        )
        results["all_recoveries_converged"] = all(r["recovery_converged"] for r in rows)

    if not csv_files:
        # bare simulation: report invariant estimates only
        obs = simulate_observations(x_star, group, n, sigma, seed=base_seed)
        inv = extract_invariants(estimate_second_moment(obs), blocks)
        rows = [
            {"repeat": 0, "sigma": sigma, "n": n, "invariant_rmse": float(
                np.sqrt(np.mean((inv - second_moment_blocks(x_star, blocks)) ** 2))
            ), "recovery_error": None, "recovery_converged": None}
        ]
        path = out / "mra.csv"
        write_csv(path, MRA_CSV_HEADER, rows)
        csv_files.append(path)

    return results, csv_files


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

SAMPLE_COMPLEXITY_CSV_HEADER = "sigma,n_star,median_error,seeds_used"


def _relu_family(widths_spec):
    def family(N, M, seed):
        hidden = [int(w) for w in (widths_spec or [])] or [max(2 * M, 6)]
        return random_relu_network(tuple([M] + hidden + [N]), seed=seed)

    return family


def _sparse_family(kind):
    def family(N, M, seed):
        from .config import build_prior as _bp

        return _bp({"type": "sparse", "kind": kind, "N": N, "M": M, "seed": seed})

    return family


def _run_sweep(p: dict, out: Path, threads: int):
    if p["sweep_kind"] == "threshold":
        fam_spec = p.get("prior_family", {"type": "relu-network"})
        if fam_spec["type"] == "relu-network":
            family = _relu_family(fam_spec.get("hidden_widths"))
        else:
            family = _sparse_family(fam_spec.get("kind", "generic-orthonormal"))
        result = threshold_sweep(
            family,
            [int(v) for v in p["N_range"]],
            [int(v) for v in p["M_range"]],
            p["mixing_kind"],
            [int(s) for s in p["seeds"]],
            restarts=int(p.get("restarts", 50)),
        )
        path = out / "sweep.csv"
        write_csv(path, SWEEP_CSV_HEADER, result.rows)
        cells = [
            {
                "N": c.N,
                "M": c.M,
                "regime": c.regime,
                "collisions_found_fraction": c.collisions_found_fraction,
            }
            for c in result.cells
        ]
        return {"cells": cells}, [path]

    # sample-complexity
    group = _build_group(p["group"])
    prior = build_prior(p["prior"])
    A = build_mixing(p["mixing"], group.N)
    true_seed = p.get("true_seed", 0)
    if true_seed == "auto-conditioned":
        true_seed = select_conditioned_instance(
            prior,
            A.entries,
            group.blocks,
            signal_norm=p.get("signal_norm"),
            amp_threshold=float(p.get("amp_threshold", 6.0)),
        )
    result = sample_complexity_sweep(
        prior,
        A,
        group,
        [float(s) for s in p["sigma_list"]],
        float(p["target_error"]),
        [int(s) for s in p["seeds"]],
        true_seed=int(true_seed),
        signal_norm=p.get("signal_norm"),
        n_min=int(p.get("n_min", 8)),
        n_cap=int(p.get("n_cap", 10_000_000)),
        grid_ratio=float(p.get("grid_ratio", 2.0 ** 0.25)),
        recover_restarts=int(p.get("recover_restarts", 10)),
    )
    path = out / "samplecomplexity.csv"
    write_csv(path, SAMPLE_COMPLEXITY_CSV_HEADER, result.rows)
    saturated = [r["sigma"] for r in result.rows if r["n_star"] is None]
    return {
        "fitted_slope": result.fitted_slope,
        "resolved_true_seed": int(true_seed),
        "saturated_sigmas": saturated,
        "rows": result.rows,
    }, [path]
