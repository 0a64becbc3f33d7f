"""Reproducible experiment runner.

`condlaw <experiment> --config <path> [--seed N] [--out <path>]
[--format csv|json] [--workers K]`

Configs are flat key=value text or a JSON object; every run echoes its
config, the library version, and a config hash, so a report is
re-runnable from its own metadata.  Exit status: 0 when all scientific
verdicts pass, 2 when any verdict fails, 1 on operational errors
(which includes bad configs and out-of-domain parameters).

Determinism contract: identical config plus seed gives byte-identical
CSV bodies, regardless of --workers, because every sampling chunk owns
a seed derived from (master_seed, chunk index).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .conditional import (
    ConditionedEnsemble,
    exact_conditional_pmf,
    local_limit_report,
    mean_match_tilt,
    moment_profile,
    occupancy_model,
)
from .hashing import (
    HashSequence,
    block_decompose,
    enumerate_all,
    hashing_pair_model,
    insert_all,
)
from .limits import (
    LD_MIN_HITS,
    LD_TOLERANCE,
    berry_esseen_sweep,
    cf_bound_audit,
    conditional_ld_check,
    constants_ledger,
    tail_log_bracket,
)
from .seeds import derive_seed

__all__ = [
    "ConfigError",
    "RunReport",
    "derive_seed",
    "main",
    "parse_config_text",
    "run",
    "validate_config",
    "write_report",
]


class ConfigError(ValueError):
    """Invalid configuration; carries one message per offending field."""

    def __init__(self, problems):
        self.problems = tuple(problems)
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------------------
# config parsing


def _parse_scalar(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_config_text(text: str) -> dict:
    """Parse a config file body: a JSON object, or flat key=value
    lines with '#' comments and comma-separated lists (brackets
    around a list are allowed and ignored)."""
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"invalid JSON config: {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError(["top-level JSON config must be an object"])
        return data
    out: dict = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith(";"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            problems.append(f"line {lineno}: expected key=value, got {line!r}")
            continue
        if key in out:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        if value.startswith("[") and value.endswith("]"):
            parts = [p.strip() for p in value[1:-1].split(",")]
            out[key] = [_parse_scalar(p) for p in parts if p]
        elif "," in value:
            parts = [p.strip() for p in value.split(",")]
            out[key] = [_parse_scalar(p) for p in parts if p]
        else:
            out[key] = _parse_scalar(value)
    if problems:
        raise ConfigError(problems)
    return out


@dataclass(frozen=True)
class _Field:
    name: str
    kind: str
    required: bool = False
    default: object = None


_SCHEMAS: dict[str, tuple[_Field, ...]] = {
    "hashing-sim": (
        _Field("m", "int", required=True),
        _Field("addresses", "int_list"),
        _Field("n", "int"),
    ),
    "enumerate": (
        _Field("n", "int", required=True),
        _Field("method", "str", default="auto"),
    ),
    "berry-esseen": (
        _Field("family", "str", default="occupancy"),
        _Field("lam", "float", required=True),
        _Field("n_grid", "int_list", required=True),
        _Field("samples", "int", required=True),
        _Field("v_offset", "float", default=0.0),
        _Field("flatness_factor", "float", default=2.0),
        _Field("progeny_cap", "int"),
    ),
    "tails": (
        _Field("lam", "float", required=True),
        _Field("y_grid", "float_list", required=True),
        _Field("budget", "int", required=True),
        _Field("tolerance", "float", default=LD_TOLERANCE),
        _Field("min_hits", "int", default=LD_MIN_HITS),
        _Field("chunk_size", "int", default=1_000_000),
        _Field("progeny_cap", "int"),
    ),
    "ld-conditional": (
        _Field("family", "str", default="hashing"),
        _Field("n", "int", required=True),
        _Field("k", "int", required=True),
        _Field("y_grid", "float_list", required=True),
        _Field("samples", "int", required=True),
        _Field("tolerance", "float", default=LD_TOLERANCE),
        _Field("min_hits", "int", default=LD_MIN_HITS),
        _Field("chunk_size", "int", default=50_000),
        _Field("progeny_cap", "int"),
    ),
    "exact-conditional": (
        _Field("family", "str", default="occupancy"),
        _Field("lam", "float", required=True),
        _Field("n", "int", required=True),
        _Field("k", "int"),
        _Field("x_tail_tol", "float", default=1e-16),
    ),
    "audit-hypotheses": (
        _Field("family", "str", default="occupancy"),
        _Field("lam", "float", required=True),
        _Field("n_grid", "int_list", required=True),
        _Field("eta0", "float", default=math.pi),
        _Field("s_points", "int", default=81),
        _Field("t_points", "int", default=41),
    ),
}


def _coerce(value, kind: str):
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"expected an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"expected a number, got {value!r}")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {value!r}")
        return value
    if kind.endswith("_list"):
        inner = kind[: -len("_list")]
        items = value if isinstance(value, (list, tuple)) else [value]
        return [_coerce(item, inner) for item in items]
    raise ValueError(f"unknown field kind {kind!r}")


def validate_config(experiment: str, raw: dict) -> dict:
    """Coerce raw values against the experiment schema; every
    offending field is reported, not just the first."""
    if experiment not in _SCHEMAS:
        raise ConfigError([f"unknown experiment {experiment!r}"])
    fields = _SCHEMAS[experiment]
    known = {f.name for f in fields} | {"master_seed", "experiment"}
    problems = [f"unknown key {k!r}" for k in sorted(raw) if k not in known]
    if "experiment" in raw and raw["experiment"] != experiment:
        problems.append(
            f"config names experiment {raw['experiment']!r}, running {experiment!r}"
        )
    out: dict = {}
    for f in fields:
        if f.name in raw:
            try:
                out[f.name] = _coerce(raw[f.name], f.kind)
            except ValueError as exc:
                problems.append(f"key {f.name!r}: {exc}")
        elif f.required:
            problems.append(f"missing required key {f.name!r}")
        elif f.default is not None:
            out[f.name] = f.default
    try:
        out["master_seed"] = _coerce(raw.get("master_seed", 0), "int")
    except ValueError as exc:
        problems.append(f"key 'master_seed': {exc}")
    if problems:
        raise ConfigError(problems)
    return out


# ---------------------------------------------------------------------------
# report rendering


def _render_json(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_render_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        parts = (
            f"{json.dumps(str(k))}:{_render_json(v)}" for k, v in sorted(obj.items())
        )
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return "nan" if math.isnan(x) else format(x, ".17g")
    return str(value)


def _render_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_csv_cell(cell) for cell in row) for row in rows)
    return "\n".join(lines) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(_render_json(config).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunReport:
    """One experiment's echoed config, grid results, and verdicts."""

    experiment: str
    config: dict
    results: dict
    verdicts: dict
    csv_header: tuple[str, ...]
    csv_rows: tuple[tuple, ...]

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.verdicts.values())


def write_report(report: RunReport, fmt: str, path: str | None = None) -> str:
    """Serialize and write the report; returns the rendered text.

    CSV carries the grid rows under the experiment's fixed header.
    JSON is one object with config, results, and verdicts keys, floats
    at 17 significant digits.
    """
    if fmt == "csv":
        text = _render_csv(report.csv_header, report.csv_rows)
    elif fmt == "json":
        payload = {
            "config": report.config,
            "results": report.results,
            "verdicts": report.verdicts,
        }
        text = _render_json(payload) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise RuntimeError(f"cannot write report to {path}: {exc}") from exc
    return text


def _library_version() -> str:
    try:
        from importlib.metadata import version

        return version("condlaw")
    except Exception:
        return "0+unknown"


# ---------------------------------------------------------------------------
# experiments


def _build_model(family: str, lam: float):
    if family == "occupancy":
        return occupancy_model(lam)
    if family == "hashing":
        return hashing_pair_model(lam)
    raise ConfigError([f"unknown model family {family!r}"])


def _run_hashing_sim(cfg, map_fn):
    m = cfg["m"]
    if "addresses" in cfg:
        addresses = tuple(cfg["addresses"])
    elif "n" in cfg:
        rng = np.random.default_rng(derive_seed(cfg["master_seed"], 0, 0))
        addresses = tuple(int(a) for a in rng.integers(1, m + 1, size=cfg["n"]))
    else:
        raise ConfigError(["hashing-sim needs either 'addresses' or 'n'"])
    seq = HashSequence(table_size=m, addresses=addresses)
    res = insert_all(seq)
    blocks = block_decompose(seq)
    header = ("ball", "address", "final_cell", "displacement")
    rows = [
        (i + 1, a, int(res.final_cells[i]), int(res.displacements[i]))
        for i, a in enumerate(addresses)
    ]
    results = {
        "m": m,
        "n": len(addresses),
        "total_displacement": res.total,
        "occupied_cells": int(res.occupancy.sum()),
        "block_lengths": list(blocks.lengths),
        "block_displacements": list(blocks.displacements),
    }
    verdicts = {
        "blocks_consistent": blocks.total == res.total == int(res.displacements.sum())
    }
    return results, verdicts, header, rows


def _run_enumerate(cfg, map_fn):
    n = cfg["n"]
    counts = enumerate_all(n, method=cfg["method"])
    nonzero = np.flatnonzero(counts.counts)
    max_disp = int(nonzero[-1]) if nonzero.size else 0
    header = ("displacement", "count")
    rows = [(int(d), int(c)) for d, c in enumerate(counts.counts)]
    results = {
        "n": n,
        "method": counts.method,
        "total_sequences": counts.total_sequences,
        "max_displacement": max_disp,
        "mean_displacement": float(counts.mean()),
    }
    verdicts = {
        "counts_sum_matches": int(counts.counts.sum()) == counts.total_sequences,
        "max_displacement_matches": max_disp == n * (n - 1) // 2,
    }
    return results, verdicts, header, rows


def _run_berry_esseen(cfg, map_fn):
    model = _build_model(cfg["family"], cfg["lam"])
    report = berry_esseen_sweep(
        model,
        cfg["n_grid"],
        cfg["samples"],
        master_seed=cfg["master_seed"],
        v_offset=cfg["v_offset"],
        progeny_cap=cfg.get("progeny_cap"),
        map_fn=map_fn,
    )
    header = ("N", "samples", "D", "DsqrtN", "ci")
    rows = [
        (r.n_summands, r.sample_count, r.distance, r.scaled_distance, r.ci_halfwidth)
        for r in report.rows
    ]
    ratio = report.flatness_ratio
    flat = True if math.isnan(ratio) else ratio <= cfg["flatness_factor"]
    results = {"verdict": report.verdict, "flatness_ratio": ratio}
    verdicts = {
        "tau_positive": report.verdict == "ok",
        "flat_within_factor": report.verdict == "ok" and flat,
    }
    return results, verdicts, header, rows


def _ld_rows(report):
    header = ("y", "hits", "draws", "normalized", "ci", "verdict")
    rows = [
        (r.level, r.hits, r.draws, r.normalized, r.ci_halfwidth, r.verdict)
        for r in report.rows
    ]
    results = {
        "alpha": report.alpha,
        "beta": report.beta,
        "tolerance": report.tolerance,
        "bracket_low": report.bracket[0],
        "bracket_high": report.bracket[1],
    }
    return results, header, rows


def _run_tails(cfg, map_fn):
    model = hashing_pair_model(cfg["lam"])
    report = tail_log_bracket(
        model,
        cfg["lam"],
        cfg["y_grid"],
        cfg["budget"],
        master_seed=cfg["master_seed"],
        tolerance=cfg["tolerance"],
        min_hits=cfg["min_hits"],
        chunk_size=cfg["chunk_size"],
        progeny_cap=cfg.get("progeny_cap"),
        map_fn=map_fn,
    )
    results, header, rows = _ld_rows(report)
    return results, {"all_inside": report.all_inside}, header, rows


def _run_ld_conditional(cfg, map_fn):
    ens = mean_match_tilt(cfg["family"], cfg["n"], cfg["k"])
    report = conditional_ld_check(
        ens,
        cfg["y_grid"],
        cfg["samples"],
        master_seed=cfg["master_seed"],
        tolerance=cfg["tolerance"],
        min_hits=cfg["min_hits"],
        chunk_size=cfg["chunk_size"],
        progeny_cap=cfg.get("progeny_cap"),
        map_fn=map_fn,
    )
    results, header, rows = _ld_rows(report)
    return results, {"all_inside": report.all_inside}, header, rows


def _run_exact_conditional(cfg, map_fn):
    model = _build_model(cfg["family"], cfg["lam"])
    n = cfg["n"]
    k = cfg["k"] if "k" in cfg else int(round(n * model.x_law.mean()))
    law = exact_conditional_pmf(
        ConditionedEnsemble(model, n, k), x_tail_tol=cfg["x_tail_tol"]
    )
    header = ("t", "prob")
    rows = [(float(t), float(p)) for t, p in zip(law.t_values, law.probs)]
    results = {
        "n": n,
        "k": k,
        "mean": law.mean(),
        "variance": law.variance(),
        "p_condition": law.p_condition,
        "y_scale": law.y_scale,
    }
    verdicts = {"normalized": abs(float(law.probs.sum()) - 1.0) <= 1e-9}
    return results, verdicts, header, rows


def _run_audit_hypotheses(cfg, map_fn):
    model = _build_model(cfg["family"], cfg["lam"])
    n_grid = cfg["n_grid"]
    rows = []

    def check(name, value, threshold, passed):
        rows.append((name, float(value), float(threshold), bool(passed)))
        return bool(passed)

    moments_ok = corr_ok = tau_ok = floor_ok = True
    for n in n_grid:
        profile = moment_profile(model, n)
        k = int(round(n * profile.x_mean))
        llr = local_limit_report(model.x_law, n, k)
        fin = math.isfinite
        moments_ok &= check(f"sigma_x[N={n}]", profile.x_std, 0.0, profile.x_std > 0)
        moments_ok &= check(
            f"rho_x[N={n}]", profile.x_rho, 0.0, fin(profile.x_rho) and profile.x_rho > 0
        )
        moments_ok &= check(f"sigma_y[N={n}]", profile.y_std, 0.0, profile.y_std > 0)
        moments_ok &= check(
            f"rho_y[N={n}]", profile.y_rho, 0.0, fin(profile.y_rho) and profile.y_rho > 0
        )
        corr_ok &= check(
            f"corr_abs[N={n}]",
            abs(profile.correlation),
            1.0,
            abs(profile.correlation) < 1.0 - 1e-9,
        )
        tau_ok &= check(f"tau[N={n}]", profile.tau, 0.0, profile.tau > 1e-12)
        floor_ok &= check(
            f"scaled_mass[N={n}]",
            llr.scaled_mass,
            llr.lower_bound_constant,
            llr.lower_bound_holds,
        )
    audit = cf_bound_audit(
        model, eta0=cfg["eta0"], s_points=cfg["s_points"], t_points=cfg["t_points"]
    )
    span_ok = check("c5", audit.c5, 0.0, audit.passed)
    span_ok &= check("c5_marginal", audit.c_marginal, 0.0, audit.c_marginal > 0)
    ledger = constants_ledger(model, n_grid, eta0=cfg["eta0"])
    ledger_ok = True
    for name, value in ledger.entries().items():
        ledger_ok &= check(
            f"ledger_{name}", value, 0.0, math.isfinite(value) and value > 0
        )
    header = ("check", "value", "threshold", "passed")
    results = {"n_grid": list(n_grid)}
    verdicts = {
        "moments_finite": bool(moments_ok),
        "correlation_strict": bool(corr_ok),
        "tau_positive": bool(tau_ok),
        "local_limit_floor": bool(floor_ok),
        "span_1": bool(span_ok),
        "ledger_positive": bool(ledger_ok),
    }
    return results, verdicts, header, rows


_RUNNERS = {
    "hashing-sim": _run_hashing_sim,
    "enumerate": _run_enumerate,
    "berry-esseen": _run_berry_esseen,
    "tails": _run_tails,
    "ld-conditional": _run_ld_conditional,
    "exact-conditional": _run_exact_conditional,
    "audit-hypotheses": _run_audit_hypotheses,
}


def run(experiment: str, config: dict, *, workers: int = 1) -> RunReport:
    """Execute one validated experiment config and assemble its report."""
    if experiment not in _RUNNERS:
        raise ConfigError([f"unknown experiment {experiment!r}"])
    runner = _RUNNERS[experiment]
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results, verdicts, header, rows = runner(config, pool.map)
    else:
        results, verdicts, header, rows = runner(config, None)
    elapsed = time.perf_counter() - start
    config_echo = {"experiment": experiment, **config}
    results = dict(results)
    results["rows"] = [dict(zip(header, row)) for row in rows]
    results["wall_clock_s"] = elapsed
    results["library_version"] = _library_version()
    results["config_hash"] = config_hash(config_echo)
    return RunReport(
        experiment=experiment,
        config=config_echo,
        results=results,
        verdicts=dict(verdicts),
        csv_header=tuple(header),
        csv_rows=tuple(tuple(row) for row in rows),
    )


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError([message])


def main(argv=None) -> int:
    parser = _Parser(
        prog="condlaw",
        description="Conditioned-pair limit experiments: simulation, "
        "enumeration, and hypothesis audits.",
    )
    parser.add_argument("experiment", choices=sorted(_RUNNERS))
    parser.add_argument("--config", required=True, help="key=value or JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override master_seed")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--workers", type=int, default=1)
    try:
        args = parser.parse_args(argv)
        with open(args.config, encoding="utf-8") as fh:
            raw = parse_config_text(fh.read())
        if args.seed is not None:
            raw["master_seed"] = args.seed
        cfg = validate_config(args.experiment, raw)
        report = run(args.experiment, cfg, workers=max(1, args.workers))
        write_report(report, args.format, args.out)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"condlaw: error: {exc}", file=sys.stderr)
        return 1
    return 0 if report.passed else 2


if __name__ == "__main__":
    sys.exit(main())
