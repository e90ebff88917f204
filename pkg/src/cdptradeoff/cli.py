"""Command-line front end: surface sweeps, property audits, oracle probes.

Subcommands:

``sweep``
    Load a problem instance and budget grids from a JSON config, solve every
    (D, P) cell, and emit a deterministic CSV (one row per cell; floats in
    shortest round-trip form, ``inf`` spelled literally, infeasible values
    left empty).  ``--dump-kernels`` additionally writes the optimizing
    kernels as JSON.

``audit``
    Run the randomized property suites with a given seed and trial count and
    emit the report as canonical JSON.  Exits 0 when every suite passes and
    1 otherwise.

``probe-scdp-convexity``
    Evaluate the strong surface on the config grids with the exhaustive
    lattice oracle and report midpoint-convexity violations along the
    distortion axis.  The strong surface has no convexity guarantee; the
    probe reports evidence instead of judging, so it always exits 0 unless
    the lattice would be too large (exit 4).

Exit codes: 0 success (and audit pass), 1 audit failure, 2 configuration
error, 3 I/O error, 4 size cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .audit import DEFAULT_SEED, DEFAULT_TRIALS, run_audit
from .classify import DecisionRegion, bayes_region
from .errors import CdpError, ConfigError, SizeError
from .metrics import (
    HELLINGER,
    KULLBACK_LEIBLER,
    RENYI,
    TOTAL_VARIATION,
    DistortionMatrix,
    DivergenceKind,
)
from .oracle import grid_search_scdp
from .prob_core import Alphabet, Channel, MixtureSource
from .solver import ProblemInstance, SolveStatus, sweep_surface

EXIT_OK = 0
EXIT_AUDIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SIZE = 4


@dataclass(frozen=True, eq=False)
class RunConfig:
    """A fully built problem instance plus the budget grids and sweep mode."""

    instance: ProblemInstance
    d_grid: tuple
    p_grid: tuple
    mode: str
    seed: int = DEFAULT_SEED


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _get(raw: dict, field: str, path: str):
    if field not in raw:
        raise ConfigError(path, "missing required field")
    return raw[field]


def _as_float(value, path: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {value!r}") from None
    if math.isnan(out):
        raise ConfigError(path, "NaN is not a valid value")
    return out


def _as_grid(value, path: str) -> tuple:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a non-empty list of numbers")
    grid = tuple(_as_float(v, f"{path}[{i}]") for i, v in enumerate(value))
    if any(g < 0.0 for g in grid):
        raise ConfigError(path, "budgets must be nonnegative")
    if list(grid) != sorted(grid):
        raise ConfigError(path, "grid must be sorted ascending")
    return grid


def _build_source(raw, path: str) -> MixtureSource:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    prior1 = _as_float(_get(raw, "prior1", f"{path}.prior1"), f"{path}.prior1")
    class1 = _get(raw, "class1", f"{path}.class1")
    class2 = _get(raw, "class2", f"{path}.class2")
    try:
        return MixtureSource.from_masses(
            prior1, 1.0 - prior1, np.asarray(class1, dtype=float), np.asarray(class2, dtype=float)
        )
    except (CdpError, ValueError, TypeError) as err:
        raise ConfigError(path, str(err)) from None


def _build_degrade(raw, source: MixtureSource, path: str) -> Channel:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    kind = _get(raw, "type", f"{path}.type")
    try:
        if kind == "bsc":
            flip = _as_float(_get(raw, "flip", f"{path}.flip"), f"{path}.flip")
            if source.alphabet.size != 2:
                raise ConfigError(path, "bsc degradation needs a binary source")
            return Channel.bsc(flip)
        if kind == "identity":
            return Channel.identity(source.alphabet)
        if kind == "rows":
            rows = np.asarray(_get(raw, "rows", f"{path}.rows"), dtype=float)
            if rows.ndim != 2 or rows.shape[0] != source.alphabet.size:
                raise ConfigError(
                    path, f"rows must be a {source.alphabet.size}-row stochastic matrix"
                )
            return Channel(source.alphabet, Alphabet(rows.shape[1]), rows)
    except ConfigError:
        raise
    except (CdpError, ValueError, TypeError) as err:
        raise ConfigError(path, str(err)) from None
    raise ConfigError(f"{path}.type", f"unknown degradation type {kind!r}")


def _build_divergence(raw, path: str) -> DivergenceKind:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    name = _get(raw, "name", f"{path}.name")
    try:
        if name == TOTAL_VARIATION:
            return DivergenceKind.total_variation()
        if name == KULLBACK_LEIBLER:
            return DivergenceKind.kullback_leibler()
        if name == HELLINGER:
            return DivergenceKind.hellinger()
        if name == RENYI:
            alpha = _as_float(_get(raw, "alpha", f"{path}.alpha"), f"{path}.alpha")
            return DivergenceKind.renyi(alpha)
    except ConfigError:
        raise
    except (CdpError, ValueError) as err:
        raise ConfigError(path, str(err)) from None
    raise ConfigError(f"{path}.name", f"unknown divergence {name!r}")


def _build_distortion(raw, source: MixtureSource, restore: Alphabet, path: str) -> DistortionMatrix:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    kind = _get(raw, "type", f"{path}.type")
    try:
        if kind == "hamming":
            return DistortionMatrix.hamming(source.alphabet, restore)
        if kind == "matrix":
            cost = np.asarray(_get(raw, "cost", f"{path}.cost"), dtype=float)
            return DistortionMatrix(source.alphabet, restore, cost)
    except ConfigError:
        raise
    except (CdpError, ValueError, TypeError) as err:
        raise ConfigError(path, str(err)) from None
    raise ConfigError(f"{path}.type", f"unknown distortion type {kind!r}")


def _build_classifier(raw, source: MixtureSource, restore: Alphabet, path: str) -> DecisionRegion:
    if raw is None:
        raw = {"type": "bayes"}
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    kind = _get(raw, "type", f"{path}.type")
    if kind == "bayes":
        if restore.size != source.alphabet.size:
            raise ConfigError(
                path,
                "the source-optimal classifier needs restoration and source alphabets of equal size",
            )
        return DecisionRegion(restore, bayes_region(source).members)
    if kind == "indices":
        indices = _get(raw, "indices", f"{path}.indices")
        try:
            return DecisionRegion.from_indices(restore, indices)
        except (CdpError, ValueError, TypeError, IndexError) as err:
            raise ConfigError(path, str(err)) from None
    raise ConfigError(f"{path}.type", f"unknown classifier type {kind!r}")


def build_instance(raw: dict) -> ProblemInstance:
    """Build a problem instance from a parsed config object."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    source = _build_source(_get(raw, "source", "source"), "source")
    degrade = _build_degrade(_get(raw, "degrade", "degrade"), source, "degrade")
    restore_size = raw.get("restore_size", source.alphabet.size)
    if not isinstance(restore_size, int) or restore_size < 1:
        raise ConfigError("restore_size", f"expected a positive integer, got {restore_size!r}")
    restore = Alphabet(restore_size)
    delta = _build_distortion(_get(raw, "distortion", "distortion"), source, restore, "distortion")
    kind = _build_divergence(_get(raw, "divergence", "divergence"), "divergence")
    classifier = _build_classifier(raw.get("classifier"), source, restore, "classifier")
    try:
        return ProblemInstance(
            source=source,
            degrade=degrade,
            restore_alphabet=restore,
            delta=delta,
            divergence=kind,
            classifier=classifier,
        )
    except CdpError as err:
        raise ConfigError("config", str(err)) from None


def load_config(path: str) -> RunConfig:
    """Read and validate a JSON config file into a runnable configuration."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"invalid JSON: {err}") from None
    instance = build_instance(raw)
    d_grid = _as_grid(_get(raw, "d_grid", "d_grid"), "d_grid")
    p_grid = _as_grid(_get(raw, "p_grid", "p_grid"), "p_grid")
    mode = raw.get("mode", "both")
    if mode not in ("cdp", "scdp", "both"):
        raise ConfigError("mode", f"expected 'cdp', 'scdp', or 'both', got {mode!r}")
    if any(math.isfinite(p) for p in p_grid) and not instance.perception_defined():
        raise ConfigError(
            "p_grid",
            "finite perception budgets need restoration and source alphabets of equal size",
        )
    seed = raw.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or isinstance(seed, bool) or not (0 <= seed < 2**64):
        raise ConfigError("seed", f"expected an unsigned 64-bit integer, got {seed!r}")
    return RunConfig(instance=instance, d_grid=d_grid, p_grid=p_grid, mode=mode, seed=seed)


# ---------------------------------------------------------------------------
# Output formatting
# ---------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def _write_sweep_csv(fh, tables) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["mode", "D", "P", "value", "status", "achieved_D", "achieved_P", "iterations"])
    for table in tables:
        for i, d in enumerate(table.d_grid):
            for j, p in enumerate(table.p_grid):
                cell = table.cells[i][j]
                writer.writerow(
                    [
                        table.mode,
                        _fmt_float(d),
                        _fmt_float(p),
                        _fmt_float(cell.value),
                        cell.status.value,
                        _fmt_float(cell.achieved_distortion),
                        _fmt_float(cell.achieved_perception),
                        str(int(cell.certificate.get("iterations", 0))),
                    ]
                )


def _kernel_dump(tables) -> dict:
    cells = []
    for table in tables:
        for i, d in enumerate(table.d_grid):
            for j, p in enumerate(table.p_grid):
                cell = table.cells[i][j]
                cells.append(
                    {
                        "mode": table.mode,
                        "D": d,
                        "P": p,
                        "status": cell.status.value,
                        "kernel": None if cell.kernel is None else cell.kernel.matrix.tolist(),
                    }
                )
    return {"cells": cells}


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    modes = ("cdp", "scdp") if config.mode == "both" else (config.mode,)
    tables = [sweep_surface(config.instance, config.d_grid, config.p_grid, m) for m in modes]
    buffer = io.StringIO()
    _write_sweep_csv(buffer, tables)
    _emit(buffer.getvalue(), args.out)
    if args.dump_kernels:
        payload = json.dumps(_kernel_dump(tables), sort_keys=True, indent=2) + "\n"
        _emit(payload, args.dump_kernels)
    return EXIT_OK


def cmd_audit(args) -> int:
    # The instance in the config is validated up front (a malformed config is a
    # config error even though the randomized suites draw their own instances);
    # the config also carries the default seed, which --seed overrides.
    seed = args.seed
    if args.config is not None:
        config = load_config(args.config)
        if seed is None:
            seed = config.seed
    if seed is None:
        seed = DEFAULT_SEED
    report = run_audit(seed=seed, trials=args.trials)
    payload = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    _emit(payload, args.out)
    return EXIT_OK if report.passed else EXIT_AUDIT_FAIL


def cmd_probe_scdp_convexity(args) -> int:
    config = load_config(args.config)
    step = args.oracle_step
    values = {}
    slacks = {}
    slack = None
    for d in config.d_grid:
        for p in config.p_grid:
            result = grid_search_scdp(config.instance, d, p, step)
            slack = max(slack, result.lipschitz_slack) if slack is not None else result.lipschitz_slack
            slacks[(d, p)] = result.lipschitz_slack
            values[(d, p)] = result.value if result.status is SolveStatus.OPTIMAL else math.nan
    violations = []
    worst = 0.0
    d_grid = config.d_grid
    for p in config.p_grid:
        for i in range(len(d_grid) - 2):
            lo, mid, hi = d_grid[i], d_grid[i + 1], d_grid[i + 2]
            if abs((lo + hi) / 2.0 - mid) > 1e-12:
                continue
            v = (values[(lo, p)], values[(mid, p)], values[(hi, p)])
            if any(math.isnan(x) for x in v):
                continue
            raw_excess = v[1] - 0.5 * (v[0] + v[2])
            # Grid values overestimate the true minimum by at most the cell's
            # slack and never undercut it, so only the midpoint's uncertainty
            # can fake an excess; a violation counts once it clears that.
            certified = raw_excess - slacks[(mid, p)] - 1e-9
            worst = max(worst, certified)
            if certified > 0.0:
                violations.append(
                    {
                        "P": p,
                        "d_lo": lo,
                        "d_mid": mid,
                        "d_hi": hi,
                        "excess": raw_excess,
                        "excess_beyond_slack": certified,
                    }
                )
    payload = {
        "grid": {"D": list(d_grid), "P": list(config.p_grid), "step": step},
        "lipschitz_slack": slack,
        "cells": [
            {"D": d, "P": p, "value": (None if math.isnan(v) else v)}
            for (d, p), v in sorted(values.items())
        ],
        "violations": violations,
        "max_violation": worst,
        "note": (
            "the strong surface carries no convexity guarantee; positive "
            "excess beyond slack exhibits an actual non-convexity"
        ),
    }
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdp-tradeoff",
        description="classification-distortion-perception tradeoff surfaces for discrete two-class sources",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="solve a (D, P) grid and emit CSV")
    p_sweep.add_argument("--config", required=True, help="JSON problem description")
    p_sweep.add_argument("--out", default="-", help="CSV destination (default stdout)")
    p_sweep.add_argument(
        "--dump-kernels", default=None, metavar="PATH", help="also write optimizing kernels as JSON"
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_audit = sub.add_parser("audit", help="run the randomized property suites")
    p_audit.add_argument("--config", default=None, help="JSON problem description (validated; supplies the default seed)")
    p_audit.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_audit.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p_audit.add_argument("--out", default="-", help="JSON destination (default stdout)")
    p_audit.set_defaults(func=cmd_audit)

    p_probe = sub.add_parser(
        "probe-scdp-convexity",
        help="search for strong-surface convexity violations with the lattice oracle",
    )
    p_probe.add_argument("--config", required=True, help="JSON problem description")
    p_probe.add_argument("--oracle-step", type=float, default=0.1, help="lattice step (must divide 1)")
    p_probe.add_argument("--out", default="-", help="JSON destination (default stdout)")
    p_probe.set_defaults(func=cmd_probe_scdp_convexity)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SizeError as err:
        print(f"size cap exceeded: {err}", file=sys.stderr)
        return EXIT_SIZE
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    except (CdpError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
