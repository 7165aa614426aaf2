"""Command-line front end: run, validate, theory-table.

Configs are JSON files; command-line flags override file values. The
``EMSPEC_WORKERS`` environment variable is the fallback for --workers.
Invalid configs and solver failures exit non-zero with a machine-readable
JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .runner import ENSEMBLE_EXPERIMENTS, THEORY_QUANTITIES, run_experiment
from .theory import ConvergenceError

__all__ = ["main", "load_config", "validate_config"]

EXPERIMENTS = ENSEMBLE_EXPERIMENTS + ("portfolio", "theory-table")

_CONFIG_KEYS = {
    "experiment", "n_series", "horizon", "q", "variance", "realizations",
    "master_seed", "output_dir", "workers", "figures", "histogram",
    "population", "resolvent", "portfolio", "theory_table",
}

_DEFAULTS = {
    "variance": 1.0,
    "realizations": 1,
    "master_seed": 0,
    "output_dir": "out",
    "workers": None,
    "figures": True,
}

# parameters each theory-table quantity needs beyond the horizon grid
_QUANTITY_NEEDS = {
    "delta_m1_exact": ("alpha",),
    "delta_m2_exact": ("alpha", "n_series"),
    "delta_m1_asymptotic": ("alpha", "n_series"),
    "delta_m2_asymptotic": ("alpha", "n_series"),
    "ansatz_s_asymptotic": ("alpha",),
    "ansatz_r_asymptotic": ("alpha",),
    "oneblock_delta_m1": ("alpha", "n_series", "c"),
    "oneblock_delta_m2": ("alpha", "n_series", "c"),
    "mp_lambda_minus": ("n_series",),
    "mp_lambda_plus": ("n_series",),
    "oneblock_separated_position": ("n_series", "c"),
    "oneblock_largest_correction_estimate": ("alpha", "n_series", "c"),
}


def load_config(path: str) -> dict:
    with open(path) as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise ValueError("config must be a JSON object")
    return config


def _diag(level: str, field: str, message: str) -> dict:
    return {"level": level, "field": field, "message": message}


def validate_config(config: dict) -> list[dict]:
    """Collect every violation and warning; never stops at the first."""
    out: list[dict] = []
    err = lambda f, m: out.append(_diag("error", f, m))
    warn = lambda f, m: out.append(_diag("warning", f, m))

    unknown = set(config) - _CONFIG_KEYS
    for key in sorted(unknown):
        warn(key, f"unknown config key {key!r} is ignored")

    experiment = config.get("experiment")
    if experiment not in EXPERIMENTS:
        err("experiment", f"experiment must be one of {sorted(EXPERIMENTS)}, "
                          f"got {experiment!r}")
        return out

    def positive_int(fieldname, minimum=1):
        value = config.get(fieldname)
        if not isinstance(value, int) or value < minimum:
            err(fieldname, f"{fieldname} must be an integer >= {minimum}, "
                           f"got {value!r}")
            return None
        return value

    if experiment in ENSEMBLE_EXPERIMENTS:
        n = positive_int("n_series", 2)
        t = positive_int("horizon", 1)
        positive_int("realizations", 1)
        q = config.get("q")
        if not isinstance(q, (int, float)) or not math.isfinite(q):
            err("q", f"q must be a finite number, got {q!r}")
            q = None
        elif q < 1.0:
            err("q", f"exponent below 1 is not supported (q={q})")
        variance = config.get("variance", 1.0)
        if not isinstance(variance, (int, float)) or not variance > 0:
            err("variance", f"variance must be > 0, got {variance!r}")
        hist = config.get("histogram", {})
        if hist and not isinstance(hist, dict):
            err("histogram", "histogram must be an object")
        elif isinstance(hist, dict):
            bins = hist.get("bins", 40)
            if not isinstance(bins, int) or bins < 1:
                err("histogram.bins", f"bins must be an integer >= 1, got {bins!r}")

        pop = config.get("population")
        expected_kind = {"cwoe-one-block": "one-block",
                         "cwoe-blocks": "block-diagonal",
                         "cwoe-banded": "banded"}.get(experiment)
        if expected_kind is None:
            if pop and pop.get("kind") not in (None, "identity"):
                warn("population", "population is ignored for woe-emerging")
        else:
            if not isinstance(pop, dict) or pop.get("kind") != expected_kind:
                err("population", f"{experiment} requires population.kind = "
                                  f"{expected_kind!r}")
            elif expected_kind == "block-diagonal":
                blocks = pop.get("blocks")
                if (not isinstance(blocks, list) or not blocks or
                        not all(isinstance(b, (list, tuple)) and len(b) == 2
                                for b in blocks)):
                    err("population.blocks",
                        "blocks must be a non-empty list of [size, coeff] pairs")
                else:
                    for i, (size, coeff) in enumerate(blocks):
                        if not isinstance(size, int) or size < 1:
                            err(f"population.blocks[{i}]",
                                f"block size must be an integer >= 1, got {size!r}")
                        if not isinstance(coeff, (int, float)) or not 0 <= coeff < 1:
                            err(f"population.blocks[{i}]",
                                f"coefficient must be in [0, 1), got {coeff!r}")
                    if n is not None and all(isinstance(b[0], int) for b in blocks):
                        total = sum(b[0] for b in blocks)
                        if total != n:
                            err("population.blocks",
                                f"block sizes sum to {total}, expected n_series={n}")
            else:
                coeff = pop.get("c") if isinstance(pop, dict) else None
                if not isinstance(coeff, (int, float)) or not 0 <= coeff < 1:
                    err("population.c",
                        f"coefficient must be in [0, 1), got {coeff!r}")

        # linear-response guard, mirrored from the theory module
        if n and t and isinstance(q, (int, float)) and q >= 1.0:
            kappa = t / n
            alpha = q - 1.0
            if kappa < 0.1:
                warn("horizon", f"linear response unreliable at small kappa "
                                f"({kappa:.3f} < 0.1); moment comparisons will "
                                f"be poor")
            if t > 1 and alpha * math.log(t) ** 2 > 0.1:
                warn("q", f"linear response unreliable: alpha*ln(T)^2 = "
                          f"{alpha * math.log(t) ** 2:.3f} > 0.1")

    elif experiment == "portfolio":
        positive_int("realizations", 1)
        pcfg = config.get("portfolio", {})
        if not isinstance(pcfg, dict):
            err("portfolio", "portfolio must be an object")
        else:
            n_assets = pcfg.get("n_assets", 100)
            n_blocks = pcfg.get("n_blocks", 5)
            if not isinstance(n_assets, int) or n_assets < 2:
                err("portfolio.n_assets", f"n_assets must be an integer >= 2, "
                                          f"got {n_assets!r}")
            if not isinstance(n_blocks, int) or n_blocks < 1:
                err("portfolio.n_blocks", f"n_blocks must be an integer >= 1, "
                                          f"got {n_blocks!r}")
            elif isinstance(n_assets, int) and n_assets % n_blocks != 0:
                err("portfolio.n_blocks",
                    f"n_assets={n_assets} not divisible by n_blocks={n_blocks}")
            coeff = pcfg.get("block_coeff", 0.5)
            if not isinstance(coeff, (int, float)) or not 0 <= coeff < 1:
                err("portfolio.block_coeff",
                    f"block_coeff must be in [0, 1), got {coeff!r}")
            for q in pcfg.get("q_grid", []):
                if not isinstance(q, (int, float)) or q < 1.0:
                    err("portfolio.q_grid", f"exponent below 1 is not supported "
                                            f"(q={q!r})")
            for t in pcfg.get("horizons", []):
                if not isinstance(t, int) or t < 2:
                    err("portfolio.horizons", f"horizons must be integers >= 2, "
                                              f"got {t!r}")

    elif experiment == "theory-table":
        tcfg = config.get("theory_table")
        if not isinstance(tcfg, dict):
            err("theory_table", "theory-table requires a theory_table object")
            return out
        quantities = tcfg.get("quantities")
        if not isinstance(quantities, list) or not quantities:
            err("theory_table.quantities", "quantities must be a non-empty list")
            quantities = []
        for name in quantities:
            if name not in THEORY_QUANTITIES:
                err("theory_table.quantities",
                    f"unknown quantity {name!r}; known: {sorted(THEORY_QUANTITIES)}")
                continue
            for need in _QUANTITY_NEEDS[name]:
                if tcfg.get(need) is None:
                    err(f"theory_table.{need}",
                        f"quantity {name!r} requires theory_table.{need}")
        horizons = tcfg.get("horizons")
        if (not isinstance(horizons, list) or not horizons or
                not all(isinstance(t, int) and t >= 2 for t in horizons)):
            err("theory_table.horizons",
                "horizons must be a non-empty list of integers >= 2")
        c = tcfg.get("c")
        if c is not None and (not isinstance(c, (int, float)) or not 0 <= c < 1):
            err("theory_table.c", f"coefficient must be in [0, 1), got {c!r}")

    return out


def _resolve_workers(args, config: dict) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    if config.get("workers"):
        return max(1, int(config["workers"]))
    env = os.environ.get("EMSPEC_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _apply_overrides(config: dict, args) -> dict:
    config = dict(config)
    if getattr(args, "seed", None) is not None:
        config["master_seed"] = args.seed
    if getattr(args, "realizations", None) is not None:
        config["realizations"] = args.realizations
    if getattr(args, "out", None) is not None:
        config["output_dir"] = args.out
    if getattr(args, "figures", None) is not None:
        config["figures"] = args.figures
    config.setdefault("output_dir", _DEFAULTS["output_dir"])
    config.setdefault("master_seed", _DEFAULTS["master_seed"])
    config.setdefault("realizations", _DEFAULTS["realizations"])
    return config


def _fail(payload: dict, code: int) -> int:
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="emspec",
        description="Emerging spectra of singular correlation matrices "
                    "under power-map deformations")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override master_seed")
        p.add_argument("--realizations", type=int, default=None,
                       help="override realization count")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (fallback: EMSPEC_WORKERS)")
        p.add_argument("--out", default=None, help="override output directory")
        fig = p.add_mutually_exclusive_group()
        fig.add_argument("--figures", dest="figures", action="store_true",
                         default=None, help="render PNG figures (default)")
        fig.add_argument("--no-figures", dest="figures", action="store_false",
                         help="skip figure rendering")

    add_common(sub.add_parser("run", help="run an experiment config"))
    sub.add_parser("validate", help="validate a config and print diagnostics") \
        .add_argument("--config", required=True)
    tt = sub.add_parser("theory-table", help="emit closed-form value tables")
    add_common(tt)

    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        return _fail({"error": f"cannot load config: {exc}"}, 2)

    if args.command == "validate":
        diagnostics = validate_config(config)
        print(json.dumps(diagnostics, indent=2))
        return 2 if any(d["level"] == "error" for d in diagnostics) else 0

    config = _apply_overrides(config, args)
    if args.command == "theory-table" and config.get("experiment") is None:
        config["experiment"] = "theory-table"
    diagnostics = validate_config(config)
    for d in diagnostics:
        if d["level"] == "warning":
            print(f"warning: {d['field']}: {d['message']}", file=sys.stderr)
    errors = [d for d in diagnostics if d["level"] == "error"]
    if errors:
        return _fail({"error": "invalid config", "diagnostics": errors}, 2)

    workers = _resolve_workers(args, config)
    try:
        record = run_experiment(config, workers=workers)
    except ConvergenceError as exc:
        return _fail({"error": str(exc), "residual": exc.residual,
                      "iterations": exc.iterations}, 3)
    except (ValueError, RuntimeError) as exc:
        return _fail({"error": str(exc)}, 1)
    print(json.dumps({"status": "ok", "output_dir": config["output_dir"],
                      "outputs": record["outputs"],
                      "wall_time_s": round(record["wall_time_s"], 3)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
