"""Experiment execution: seeded parallel sweeps, reduction, file emission.

Workers receive immutable job descriptors and realization indices;
per-realization seeds derive from (master seed, index), and the parent
reduces results in realization order, so outputs are byte-identical for
any worker count. All CSV numbers are written with 17 significant
digits in lowercase scientific notation.

Files written by the ensemble experiments
-----------------------------------------
moments.csv             quantity, empirical, stderr, theory_exact, theory_asymptotic
density_bulk.csv        bin_lo, bin_hi, density, theory   (non-zero base eigenvalues)
density_corrections.csv bin_lo, bin_hi, density, theory   (bulk corrections)
density_emerging.csv    bin_lo, bin_hi, density, theory   (emerging corrections, T < N)
separated_*.csv         marginals of detached eigenvalues (block populations)
block_overlap.csv       per-realization block weights of the detached
                        emerging eigenvector (block-diagonal runs)
moments.json            the raw moment report with standard errors
run.json                config, derived quantities, versions, wall time
*.png                   one figure per density table plus a moment summary
                        (unless figures are disabled)
"""

from __future__ import annotations

import csv
import json
import multiprocessing
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .ensembles import (EnsembleShape, PopulationCorrelation, build_banded,
                        build_block_diagonal, build_identity, build_one_block,
                        cwoe_sample, derive_seed, rank_tolerance,
                        sample_gaussian, wishart)
from .portfolio import (aggregate_sweep, build_model, realization_ratios,
                        sweep_seed)
from .powermap import Deformation, power_map
from .spectral import (SpectralSplit, block_overlap, detach_by_largest_gap,
                       eigh, empirical_moments, histogram)
from . import theory

__all__ = ["run_experiment", "ENSEMBLE_EXPERIMENTS"]

ENSEMBLE_EXPERIMENTS = ("woe-emerging", "cwoe-one-block", "cwoe-blocks",
                        "cwoe-banded")


def fmt(x) -> str:
    """17-significant-digit lowercase scientific form; empty for missing."""
    if x is None:
        return ""
    x = float(x)
    if np.isnan(x):
        return ""
    return f"{x:.16e}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# ensemble experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleJob:
    """Immutable descriptor shipped to worker processes."""

    experiment: str
    n_series: int
    horizon: int
    variance: float
    q: float
    master_seed: int
    population_kind: str | None
    population_args: tuple
    want_overlap: bool


def build_population(kind: str | None, args: tuple,
                     n_series: int) -> PopulationCorrelation:
    if kind is None or kind == "identity":
        return build_identity(n_series)
    if kind == "one-block":
        return build_one_block(n_series, args[0])
    if kind == "block-diagonal":
        return build_block_diagonal(args[0])
    if kind == "banded":
        return build_banded(n_series, args[0])
    raise ValueError(f"unknown population kind {kind!r}")


_JOB: EnsembleJob | None = None
_POPULATION: PopulationCorrelation | None = None


def _init_ensemble_worker(job: EnsembleJob) -> None:
    global _JOB, _POPULATION
    _JOB = job
    _POPULATION = build_population(job.population_kind, job.population_args,
                                   job.n_series)


def _run_realization(index: int):
    """One seeded realization: spectra of C and C^(q), plus diagnostics."""
    job, xi = _JOB, _POPULATION
    shape = EnsembleShape(n_series=job.n_series, horizon=job.horizon,
                          variance=job.variance)
    seed = derive_seed(job.master_seed, index)
    if job.population_kind is None:
        sample = wishart(sample_gaussian(shape, seed))
    else:
        sample = cwoe_sample(xi, shape, seed)
    deformed_matrix = power_map(sample.entries, Deformation(job.q))
    base = eigh(sample.entries).values
    overlap = None
    if job.want_overlap:
        system = eigh(deformed_matrix, want_vectors=True)
        deformed = system.values
        count = max(job.n_series - job.horizon, 0)
        if count >= 3:
            detached, _, _ = detach_by_largest_gap(deformed[:count])
            idx = int(np.argmin(np.abs(deformed[:count] - detached)))
            overlap = block_overlap(system.vectors, xi.blocks, [idx])[0]
    else:
        deformed = eigh(deformed_matrix).values
    zeros_below_tol = int(np.sum(base <= rank_tolerance(sample.entries)))
    return index, base, deformed, overlap, zeros_below_tol


def _map_realizations(job: EnsembleJob, realizations: int, workers: int):
    indices = range(realizations)
    if workers <= 1:
        _init_ensemble_worker(job)
        results = [_run_realization(i) for i in indices]
    else:
        ctx = multiprocessing.get_context()
        with ctx.Pool(processes=workers, initializer=_init_ensemble_worker,
                      initargs=(job,)) as pool:
            results = pool.map(_run_realization, indices)
    return sorted(results, key=lambda r: r[0])


def _bulk_range(experiment: str, splits, kappa: float, variance: float,
                c: float | None, n_detached: int):
    """Default window [0, 1.2 * upper bulk edge] for the base bulk."""
    if experiment == "woe-emerging":
        upper = theory.mp_support(kappa, variance)[1]
    elif experiment == "cwoe-one-block":
        upper = theory.oneblock_support(kappa, c)[1]
    else:
        # no closed-form edge: use the largest non-detached eigenvalue
        end = -n_detached if n_detached else None
        upper = max(float(s.base_values[s.emerging_count:end].max())
                    for s in splits) / 1.2 * 1.05
    return 0.0, 1.2 * upper


def _spread_range(values: np.ndarray) -> tuple[float, float]:
    """Default window mean +- 5 std for narrow correction clusters."""
    center = float(values.mean())
    spread = float(values.std())
    if spread == 0.0:
        spread = max(abs(center), 1.0) * 1e-12
    return center - 5.0 * spread, center + 5.0 * spread


def _n_detached(population_kind, population_args, n_series, kappa) -> int:
    """How many collective eigenvalues detach from the base bulk."""
    if population_kind == "one-block":
        c = population_args[0]
        return 0 if theory.oneblock_separated_position(n_series, kappa, c) is None else 1
    if population_kind == "block-diagonal":
        count = 0
        for size, c in population_args[0]:
            if c > 0 and c >= 1.0 / (size * np.sqrt(kappa)):
                count += 1
        return count
    return 0


def _moment_table(experiment: str, moments, splits, config):
    """Rows (quantity, empirical, stderr, theory_exact, theory_asymptotic)."""
    n = config["n_series"]
    t = config["horizon"]
    kappa = t / n
    alpha = config["q"] - 1.0
    c = config.get("population", {}).get("c")
    se = moments.standard_errors

    exact1 = exact2 = None
    asym1 = asym2 = None
    s_th = r_th = None
    bulk_th = (None, None)
    emg_th = (None, None)
    if experiment == "woe-emerging":
        exact1 = theory.delta_m1_exact(t, alpha)
        exact2 = theory.delta_m2_exact(t, n, alpha)
        asym1, asym2 = theory.delta_m_asymptotic(t, kappa, alpha)
        params = theory.ansatz_asymptotic(t, alpha)
        s_th, r_th = params.s, params.r
        if kappa <= 1.0:
            bulk_th = theory.bulk_moment_extrapolation(exact1, exact2, s_th, kappa)
            emg_th = theory.emerging_moments(s_th, kappa)
    elif experiment == "cwoe-one-block":
        asym1, asym2 = theory.oneblock_delta_moments(t, kappa, c, alpha)
        params, bulk = theory.oneblock_ansatz(asym1, asym2, c, kappa)
        s_th, r_th = params.s, params.r
        if kappa <= 1.0:
            bulk_th = bulk
            emg_th = (asym1 - bulk[0], asym2 - bulk[1])

    # empirical ansatz parameters from the measured moments
    s_emp = r_emp = None
    try:
        dm1, dm2 = (moments.total if kappa >= 1.0 else moments.bulk)
        if experiment == "cwoe-one-block":
            params_emp, _ = theory.oneblock_ansatz(*moments.total, c, kappa)
        else:
            params_emp = theory.ansatz_invert(dm1, dm2, kappa)
        s_emp, r_emp = params_emp.s, params_emp.r
    except ValueError:
        pass

    rows = [
        ("delta_m1_total", moments.total[0], se[0], exact1, asym1),
        ("delta_m2_total", moments.total[1], se[1], exact2, asym2),
        ("delta_m1_emerging", moments.emerging[0], se[2], None, emg_th[0]),
        ("delta_m2_emerging", moments.emerging[1], se[3], None, emg_th[1]),
        ("delta_m1_bulk", moments.bulk[0], se[4], None, bulk_th[0]),
        ("delta_m2_bulk", moments.bulk[1], se[5], None, bulk_th[1]),
        ("ansatz_s", s_emp, None, None, s_th),
        ("ansatz_r", r_emp, None, None, r_th),
    ]

    top_base = np.array([s.base_values[-1] for s in splits])
    top_corr = np.array([s.corrections[-1] for s in splits])
    sep_pos = None
    if experiment == "cwoe-one-block":
        sep_pos = theory.oneblock_separated_position(n, kappa, c)
    est = None
    if sep_pos is not None:
        est = theory.largest_correction_estimate(sep_pos, alpha)
    rows.append(("largest_eigenvalue", float(top_base.mean()),
                 float(top_base.std(ddof=1) / np.sqrt(len(splits))) if len(splits) > 1 else 0.0,
                 sep_pos, None))
    rows.append(("largest_correction", float(top_corr.mean()),
                 float(top_corr.std(ddof=1) / np.sqrt(len(splits))) if len(splits) > 1 else 0.0,
                 None, est))
    return rows


def _density_outputs(experiment, splits, config, xi_spectrum, out_dir, figures):
    """Histogram CSVs (+ theory columns and figures) for one ensemble run."""
    n = config["n_series"]
    t = config["horizon"]
    kappa = t / n
    variance = config.get("variance", 1.0)
    alpha = config["q"] - 1.0
    bins = config.get("histogram", {}).get("bins", 40)
    hist_cfg = config.get("histogram", {})
    pop_cfg = config.get("population", {})
    c = pop_cfg.get("c")
    kind = pop_cfg.get("kind")
    blocks = pop_cfg.get("blocks")
    n_detached = _n_detached(kind, (blocks,) if kind == "block-diagonal" else (c,),
                             n, kappa)
    written = []

    def emit(name, hist, theory_at):
        mids = 0.5 * (hist.bin_edges[:-1] + hist.bin_edges[1:])
        curve = theory_at(mids) if theory_at is not None else None
        rows = []
        for i, (lo, hi, d) in enumerate(hist.csv_rows()):
            rows.append((fmt(lo), fmt(hi), fmt(d),
                         fmt(curve[i]) if curve is not None else ""))
        path = Path(out_dir) / f"{name}.csv"
        _write_csv(path, ("bin_lo", "bin_hi", "density", "theory"), rows)
        written.append(path.name)
        if figures:
            fig_path = Path(out_dir) / f"{name}.png"
            plotting.render_density(fig_path, hist.bin_edges, hist.density,
                                    theory=curve, title=name.replace("_", " "))
            written.append(fig_path.name)

    base_bulk = np.concatenate([s.base_values[s.emerging_count:] for s in splits])
    bulk_norm = min(kappa, 1.0)
    bulk_range = tuple(hist_cfg.get("bulk_range") or
                       _bulk_range(experiment, splits, kappa, variance, c,
                                   n_detached))
    bulk_hist = histogram(base_bulk, bins, bulk_range, bulk_norm)

    if experiment == "woe-emerging":
        bulk_theory = lambda x: theory.mp_density(x, kappa, variance)
    elif experiment == "cwoe-one-block":
        bulk_theory = lambda x: theory.oneblock_density(x, n, kappa, c)[0]
    else:
        resolvent_cfg = config.get("resolvent") or {}
        bulk_theory = lambda x: theory.cwoe_density_grid(
            x, xi_spectrum, kappa, variance,
            epsilon=resolvent_cfg.get("epsilon"),
            include_zero_modes=False)
    emit("density_bulk", bulk_hist, bulk_theory)

    corr_bulk = np.concatenate([s.bulk for s in splits])
    corr_range = tuple(hist_cfg.get("corrections_range") or _spread_range(corr_bulk))
    corr_hist = histogram(corr_bulk, bins, corr_range, bulk_norm)
    corr_theory = None
    if experiment == "woe-emerging":
        params = theory.ansatz_asymptotic(t, alpha)
        corr_theory = lambda x: theory.ansatz_density(x, params, kappa)
    elif experiment == "cwoe-one-block":
        m1, m2 = theory.oneblock_delta_moments(t, kappa, c, alpha)
        params, _ = theory.oneblock_ansatz(m1, m2, c, kappa)
        scaled = theory.AnsatzParams(s=params.s * (1.0 - c), r=params.r)
        corr_theory = lambda x: theory.ansatz_density(x, scaled, kappa)
    emit("density_corrections", corr_hist, corr_theory)

    if kappa < 1.0:
        emerging = np.concatenate([s.emerging for s in splits])
        emg_range = tuple(hist_cfg.get("emerging_range") or _spread_range(emerging))
        emg_hist = histogram(emerging, bins, emg_range, 1.0 - kappa)
        emit("density_emerging", emg_hist, None)

    if n_detached and len(splits) >= 3:
        sep_base = np.concatenate([s.base_values[-n_detached:] for s in splits])
        sep_corr = np.concatenate([s.corrections[-n_detached:] for s in splits])
        sep_emg = np.array([detach_by_largest_gap(s.emerging)[0] for s in splits
                            if s.emerging_count >= 3])
        for name, values in (("separated_bulk", sep_base),
                             ("separated_corrections", sep_corr),
                             ("separated_emerging", sep_emg)):
            if values.size == 0:
                continue
            lo, hi = _spread_range(values)
            emit(name, histogram(values, bins, (lo, hi), 1.0), None)
    return written


def _run_ensemble(config: dict, out_dir: Path, workers: int,
                  figures: bool) -> list[str]:
    experiment = config["experiment"]
    pop_cfg = config.get("population", {})
    kind = None if experiment == "woe-emerging" else pop_cfg["kind"]
    if kind == "block-diagonal":
        args = (tuple((int(s), float(cc)) for s, cc in pop_cfg["blocks"]),)
    elif kind is None:
        args = ()
    else:
        args = (float(pop_cfg["c"]),)
    job = EnsembleJob(
        experiment=experiment,
        n_series=int(config["n_series"]),
        horizon=int(config["horizon"]),
        variance=float(config.get("variance", 1.0)),
        q=float(config["q"]),
        master_seed=int(config["master_seed"]),
        population_kind=kind,
        population_args=args,
        want_overlap=(kind == "block-diagonal"),
    )
    results = _map_realizations(job, int(config["realizations"]), workers)

    count = max(job.n_series - job.horizon, 0)
    splits = [SpectralSplit(base_values=base, deformed_values=deformed,
                            emerging_count=count)
              for _, base, deformed, _, _ in results]
    moments = empirical_moments(splits)

    xi_spectrum = build_population(kind, args, job.n_series).spectrum \
        if kind is not None else np.ones(job.n_series)

    written = []
    rows = _moment_table(experiment, moments, splits, config)
    _write_csv(out_dir / "moments.csv",
               ("quantity", "empirical", "stderr", "theory_exact",
                "theory_asymptotic"),
               [(q, fmt(e), fmt(s), fmt(te), fmt(ta))
                for q, e, s, te, ta in rows])
    written.append("moments.csv")
    (out_dir / "moments.json").write_text(moments.to_json() + "\n")
    written.append("moments.json")
    if figures:
        plotting.render_moments(out_dir / "moments.png",
                                [(q, e if e is not None else float("nan"),
                                  s if s is not None else 0.0,
                                  ta if ta is not None else te)
                                 for q, e, s, te, ta in rows
                                 if q.startswith("delta_")],
                                title=f"{experiment} moments")
        written.append("moments.png")

    written += _density_outputs(experiment, splits, config, xi_spectrum,
                                out_dir, figures)

    if job.want_overlap:
        overlap_rows = []
        for index, _, _, overlap, _ in results:
            if overlap is not None:
                overlap_rows.append((index, *[fmt(v) for v in overlap]))
        n_blocks = len(pop_cfg["blocks"])
        _write_csv(out_dir / "block_overlap.csv",
                   ("realization", *[f"block_{i + 1}" for i in range(n_blocks)]),
                   overlap_rows)
        written.append("block_overlap.csv")

    zeros = [z for *_, z in results]
    summary = {
        "zero_modes_per_realization": zeros,
        "expected_zero_modes": count,
    }
    (out_dir / "rank_check.json").write_text(json.dumps(summary, indent=2) + "\n")
    written.append("rank_check.json")
    return written


# ---------------------------------------------------------------------------
# portfolio experiment
# ---------------------------------------------------------------------------

_PORTFOLIO_JOB = None


def _init_portfolio_worker(model, horizons, q_grid, realizations, master_seed):
    global _PORTFOLIO_JOB
    from .ensembles import matrix_sqrt
    _PORTFOLIO_JOB = (model, list(horizons), [float(q) for q in q_grid],
                      realizations, master_seed,
                      matrix_sqrt(model.model_covariance),
                      model.minimum_variance)


def _portfolio_realization(args):
    horizon_index, realization_index = args
    model, horizons, q_grid, realizations, master_seed, root, minimum = _PORTFOLIO_JOB
    horizon = horizons[horizon_index]
    seed = sweep_seed(master_seed, horizon_index, realizations, realization_index)
    ratios = realization_ratios(model, horizon, q_grid, seed,
                                root=root, minimum=minimum)
    return horizon_index, realization_index, ratios


def _run_portfolio(config: dict, out_dir: Path, workers: int,
                   figures: bool) -> list[str]:
    pcfg = config.get("portfolio", {})
    model = build_model(
        n_assets=int(pcfg.get("n_assets", 100)),
        n_blocks=int(pcfg.get("n_blocks", 5)),
        block_coeff=float(pcfg.get("block_coeff", 0.5)),
        vol_range=tuple(pcfg.get("vol_range", (0.1, 0.4))),
        vol_seed=int(pcfg.get("vol_seed", 2001)),
    )
    horizons = [int(t) for t in pcfg.get("horizons", (50, 75, 150, 200, 300))]
    q_grid = [float(q) for q in
              pcfg.get("q_grid", [round(1.1 + 0.1 * i, 10) for i in range(14)])]
    realizations = int(config["realizations"])
    master_seed = int(config["master_seed"])

    jobs = [(hi, ri) for hi in range(len(horizons)) for ri in range(realizations)]
    init_args = (model, horizons, q_grid, realizations, master_seed)
    if workers <= 1:
        _init_portfolio_worker(*init_args)
        raw = [_portfolio_realization(j) for j in jobs]
    else:
        ctx = multiprocessing.get_context()
        with ctx.Pool(processes=workers, initializer=_init_portfolio_worker,
                      initargs=init_args) as pool:
            raw = pool.map(_portfolio_realization, jobs)
    raw.sort(key=lambda r: (r[0], r[1]))

    samples: dict[tuple[int, float | None], list[float]] = {}
    for hi, _, ratios in raw:
        for q, value in ratios.items():
            if not np.isnan(value):
                samples.setdefault((horizons[hi], q), []).append(value)
    cells = aggregate_sweep(horizons, q_grid, samples, realizations)

    hom = model.homogeneous_ratio
    rows = [(c.method, c.horizon,
             fmt(c.exponent) if c.exponent is not None else "",
             fmt(c.mean_ratio), fmt(c.stderr), fmt(hom))
            for c in cells]
    _write_csv(out_dir / "portfolio.csv",
               ("method", "T", "q", "mean_ratio", "stderr", "homogeneous_ratio"),
               rows)
    written = ["portfolio.csv"]
    model_record = {
        "n_assets": model.n_assets,
        "homogeneous_ratio": hom,
        "minimum_variance": model.minimum_variance,
        "volatilities": [float(v) for v in model.volatilities],
    }
    (out_dir / "portfolio_model.json").write_text(
        json.dumps(model_record, indent=2) + "\n")
    written.append("portfolio_model.json")
    if figures:
        plotting.render_portfolio(out_dir / "portfolio.png", cells, hom,
                                  title="minimum-variance ratio vs horizon")
        written.append("portfolio.png")
    return written


# ---------------------------------------------------------------------------
# theory tables
# ---------------------------------------------------------------------------

def _theory_quantity(name: str, t: int | None, n: int | None, c: float | None,
                     alpha: float | None, variance: float):
    kappa = (t / n) if (t and n) else None
    if name == "delta_m1_exact":
        return theory.delta_m1_exact(t, alpha)
    if name == "delta_m2_exact":
        return theory.delta_m2_exact(t, n, alpha)
    if name == "delta_m1_asymptotic":
        return theory.delta_m_asymptotic(t, kappa, alpha)[0]
    if name == "delta_m2_asymptotic":
        return theory.delta_m_asymptotic(t, kappa, alpha)[1]
    if name == "ansatz_s_asymptotic":
        return theory.ansatz_asymptotic(t, alpha).s
    if name == "ansatz_r_asymptotic":
        return theory.ansatz_asymptotic(t, alpha).r
    if name == "oneblock_delta_m1":
        return theory.oneblock_delta_moments(t, kappa, c, alpha)[0]
    if name == "oneblock_delta_m2":
        return theory.oneblock_delta_moments(t, kappa, c, alpha)[1]
    if name == "mp_lambda_minus":
        return theory.mp_support(kappa, variance)[0]
    if name == "mp_lambda_plus":
        return theory.mp_support(kappa, variance)[1]
    if name == "oneblock_separated_position":
        return theory.oneblock_separated_position(n, kappa, c)
    if name == "oneblock_largest_correction_estimate":
        pos = theory.oneblock_separated_position(n, kappa, c)
        return None if pos is None else theory.largest_correction_estimate(pos, alpha)
    raise ValueError(f"unknown theory quantity {name!r}")


THEORY_QUANTITIES = (
    "delta_m1_exact", "delta_m2_exact", "delta_m1_asymptotic",
    "delta_m2_asymptotic", "ansatz_s_asymptotic", "ansatz_r_asymptotic",
    "oneblock_delta_m1", "oneblock_delta_m2", "mp_lambda_minus",
    "mp_lambda_plus", "oneblock_separated_position",
    "oneblock_largest_correction_estimate",
)


def _run_theory_table(config: dict, out_dir: Path, workers: int,
                      figures: bool) -> list[str]:
    tcfg = config["theory_table"]
    quantities = tcfg["quantities"]
    horizons = [int(t) for t in tcfg["horizons"]]
    n = tcfg.get("n_series")
    c = tcfg.get("c")
    alpha = tcfg.get("alpha")
    variance = float(tcfg.get("variance", 1.0))
    rows = []
    for name in quantities:
        for t in horizons:
            kappa = (t / n) if n else None
            value = _theory_quantity(name, t, n, c, alpha, variance)
            rows.append((name, t, n if n is not None else "",
                         fmt(kappa), fmt(c), fmt(alpha), fmt(value)))
    _write_csv(out_dir / "theory_table.csv",
               ("quantity", "T", "N", "kappa", "c", "alpha", "value"), rows)
    return ["theory_table.csv"]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def run_experiment(config: dict, workers: int = 1) -> dict:
    """Execute one experiment config; returns the provenance record."""
    start = time.time()
    out_dir = Path(config["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    figures = bool(config.get("figures", True))
    experiment = config["experiment"]

    if experiment in ENSEMBLE_EXPERIMENTS:
        outputs = _run_ensemble(config, out_dir, workers, figures)
    elif experiment == "portfolio":
        outputs = _run_portfolio(config, out_dir, workers, figures)
    elif experiment == "theory-table":
        outputs = _run_theory_table(config, out_dir, workers, figures)
    else:
        raise ValueError(f"unknown experiment {experiment!r}")

    record = {
        "config": config,
        "workers": workers,
        "versions": {
            "emspec": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": time.time() - start,
        "outputs": outputs,
    }
    (out_dir / "run.json").write_text(json.dumps(record, indent=2) + "\n")
    return record
