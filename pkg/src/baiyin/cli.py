"""Batch-experiment runner.

A run is described by one JSON document::

    {"experiment": "mp-convergence",
     "parameters": {"p": 512, "n": 1024, "seeds": 20},
     "output": "mp.json",
     "format": "json"}

Every report is ``{"experiment", "version", "config", "results", "timestamp"}``.
Apart from ``timestamp`` the report is a pure function of the resolved
config: worker threads only change the schedule, never the numbers.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, chebpoly, comboracle, l1section, spectral, tailprobe
from ._accel import backend
from .errors import BaiyinError, ConfigError
from .randmat import GENERATOR_ID, MASK64, derive_seed, gen_sign_matrix

THREADS_ENV = "BAIYIN_THREADS"
FORMATS = ("json", "csv")


def _int(lo=None, hi=None):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError("expected an integer", key=key)
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ConfigError(f"value {v} outside [{lo}, {hi}]", key=key)
        return v
    return check


def _real(lo=None, hi=None, open_lo=False, open_hi=False):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError("expected a number", key=key)
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError("expected a finite number", key=key)
        if lo is not None and (v < lo or (open_lo and v == lo)):
            raise ConfigError(f"value {v} below range", key=key)
        if hi is not None and (v > hi or (open_hi and v == hi)):
            raise ConfigError(f"value {v} above range", key=key)
        return v
    return check


def _list(item):
    def check(key, v):
        if not isinstance(v, list) or not v:
            raise ConfigError("expected a nonempty list", key=key)
        return [item(key, x) for x in v]
    return check


_seed = _int(0, MASK64)
_pos = _int(1)

# experiment -> {parameter: (default, validator)}
SCHEMAS = {
    "mp-convergence": {
        "p": (512, _pos), "n": (1024, _pos), "seeds": (20, _pos), "seed": (0, _seed),
        "quad_steps": (4096, _int(16)), "edge_window": (0.15, _real(0, open_lo=True)),
    },
    "edge-deviation": {
        "p": (100, _pos), "n": (200, _pos), "eps": (0.3, _real(0, open_lo=True)),
        "trials": (1000, _pos), "seed": (0, _seed),
    },
    "lambda-min-tail": {
        "n": (1024, _int(2)), "delta": (0.5, _real(0, 0.5, open_lo=True)),
        "trials": (100, _pos), "seed": (7, _seed),
        "fit_n": ([32, 64, 128], _list(_int(2))),
        "fit_delta": ([0.1, 0.2, 0.3], _list(_real(0, 0.5, open_lo=True))),
        "fit_trials": (200, _int(0)),
    },
    "cheb-identities": {
        "l_max": (30, _int(0, chebpoly.MAX_DEGREE)), "theta_points": (1000, _pos),
        "draws": (1000, _pos), "seed": (0, _seed), "mu_max": (10.0, _real(0, open_lo=True)),
        "n_max": (100, _int(2)),
    },
    "comb-oracle": {
        "p": (2, _pos), "n": (2, _pos), "l": (2, _int(0, comboracle.MAX_ORACLE_DEGREE)),
        "max_pn": (0, _int(0, comboracle.MATRIX_BUDGET_PN)),
        "max_l": (4, _int(0, comboracle.MAX_ORACLE_DEGREE)),
    },
    "trace-bounds": {
        "p": (3, _pos), "n": (4, _pos), "l_max": (6, _int(1, chebpoly.MAX_DEGREE)),
        "samples": (1000, _pos), "seed": (0, _seed), "C": (1.0, _real(0, open_lo=True)),
    },
    "l1-embed": {
        "n": (128, _pos), "delta": (0.5, _real(0, 1, open_lo=True, open_hi=True)),
        "seeds": (20, _pos), "restarts": (64, _pos), "iters": (500, _pos), "seed": (0, _seed),
        "step": (l1section.DEFAULT_STEP, _real(0, open_lo=True)),
        "c0": (1.0, _real(0, open_lo=True)), "log_exponent": (1.0, _real()),
        "w_samples": (1000, _pos),
    },
    "constant-fit": {
        "p": ([16, 32, 64], _list(_pos)), "y": (0.5, _real(0, 1, open_lo=True)),
        "eps": ([0.1, 0.2, 0.4], _list(_real(0, 1, open_lo=True))),
        "trials": (200, _pos), "seed": (0, _seed),
        "cheb_p": (50, _int(2)), "cheb_n": (100, _int(2)),
        "cheb_degrees": ([2, 4, 8, 16], _list(_int(2))),
        "cheb_eps": ([0.01, 0.1, 0.5, 1.0], _list(_real(0, 1, open_lo=True))),
    },
}
EXPERIMENTS = tuple(SCHEMAS)
_TOP_KEYS = {"experiment", "parameters", "output", "format"}


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    output: str = "-"
    format: str = "json"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "parameters": dict(self.parameters),
            "output": self.output,
            "format": self.format,
        }


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def resolve(experiment, parameters, text=None, output="-", fmt="json") -> ExperimentConfig:
    """Validate ``parameters`` against the experiment schema and fill defaults."""
    if experiment not in SCHEMAS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}",
            key="experiment", line=_line_of(text, "experiment"),
        )
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}", key="format", line=_line_of(text, "format"))
    if not isinstance(output, str):
        raise ConfigError("output must be a string path", key="output", line=_line_of(text, "output"))
    schema = SCHEMAS[experiment]
    resolved = {}
    for key, value in parameters.items():
        if key not in schema:
            raise ConfigError(f"unknown parameter for {experiment}", key=key, line=_line_of(text, key))
        try:
            resolved[key] = schema[key][1](key, value)
        except ConfigError as exc:
            raise ConfigError(exc.reason, key=key, line=_line_of(text, key)) from None
    for key, (default, _) in schema.items():
        resolved.setdefault(key, default)
    return ExperimentConfig(experiment, dict(sorted(resolved.items())), output, fmt)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", line=1)
    for key in doc:
        if key not in _TOP_KEYS:
            raise ConfigError("unknown top-level key", key=key, line=_line_of(text, key))
    if "experiment" not in doc:
        raise ConfigError("missing field", key="experiment")
    params = doc.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be an object", key="parameters", line=_line_of(text, "parameters"))
    return resolve(doc["experiment"], params, text, doc.get("output", "-"), doc.get("format", "json"))


def serialize_config(config: ExperimentConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)


# ------------------------------------------------------------ experiments

def _mp_convergence(prm, workers):
    p, n = prm["p"], prm["n"]
    y = p / n
    a, b = spectral.mp_edges(y)
    seeds = [derive_seed(prm["seed"], i) for i in range(prm["seeds"])]

    def job(seed):
        summ = spectral.spectral_summary(gen_sign_matrix(p, n, seed))
        return summ, spectral.ks_distance(summ, quad_steps=prm["quad_steps"])

    out = _map(job, seeds, workers)
    w = prm["edge_window"]
    rows = []
    for seed, (summ, ks) in zip(seeds, out):
        rows.append({
            "seed": seed, "ks_distance": ks, "lambda_min": summ.lambda_min, "lambda_max": summ.lambda_max,
            "min_in_window": abs(summ.lambda_min - a) <= w, "max_in_window": abs(summ.lambda_max - b) <= w,
        })
    ks_vals = [r["ks_distance"] for r in rows]
    return {
        "rows": rows,
        "summary": {
            "y": y, "a": a, "b": b, "mean_ks_distance": float(np.mean(ks_vals)),
            "seeds_with_both_edges_in_window": sum(r["min_in_window"] and r["max_in_window"] for r in rows),
        },
    }


def _trial_rows(rep):
    return [
        {"trial": i, "lambda_min": lo, "lambda_max": hi}
        for i, (lo, hi) in enumerate(zip(rep.lambda_min, rep.lambda_max))
    ]


def _edge_deviation(prm, workers):
    rep = tailprobe.estimate_outside_probability(prm["p"], prm["n"], prm["eps"], prm["trials"], prm["seed"], workers)
    return {"rows": _trial_rows(rep), "summary": rep.to_dict()}


def _lambda_min_tail(prm, workers):
    rep = tailprobe.estimate_lambda_min_tail(prm["n"], prm["delta"], prm["trials"], prm["seed"], workers)
    fit_reports = []
    if prm["fit_trials"] > 0:
        for k, (fn, fd) in enumerate((fn, fd) for fn in prm["fit_n"] for fd in prm["fit_delta"]):
            fit_reports.append(tailprobe.estimate_lambda_min_tail(fn, fd, prm["fit_trials"], derive_seed(prm["seed"], k), workers))
    C = tailprobe.fit_theorem2_constant(fit_reports) if fit_reports else None
    summary = rep.to_dict()
    summary.update({
        "threshold": prm["delta"] ** 2 / 8,
        "edge_a": spectral.mp_edges(rep.p / rep.n)[0],
        "fitted_C": C,
        "tail_bound_fitted_C": None if C is None else tailprobe.theorem2_bound(prm["n"], prm["delta"], C),
        "tail_bound_C1": tailprobe.theorem2_bound(prm["n"], prm["delta"], 1.0),
        "fit_grid": [
            {"n": r.n, "p": r.p, "delta": math.sqrt(8 * r.epsilon), "hits": r.hits, "trials": r.trials, "estimate": r.estimate}
            for r in fit_reports
        ],
    })
    return {"rows": _trial_rows(rep), "summary": summary}


def _cheb_identities(prm, workers):
    rng = np.random.Generator(np.random.PCG64(prm["seed"]))
    theta = np.linspace(0.0, np.pi, prm["theta_points"] + 2)[1:-1]
    theta = theta[np.abs(np.sin(theta)) > 1e-8]
    rows = []
    worst_trig = 0.0
    for l in range(prm["l_max"] + 1):
        lhs = chebpoly.cheb_u(l, np.cos(theta)) * np.sin(theta)
        err = float(np.abs(lhs - np.sin((l + 1) * theta)).max())
        worst_trig = max(worst_trig, err)
        rows.append({"kind": "trig", "l": l, "max_abs_error": err})
    worst_rel = 0.0
    for k in range(prm["draws"]):
        n = int(rng.integers(2, prm["n_max"] + 1))
        p = int(rng.integers(2, n + 1))
        l = int(rng.integers(0, prm["l_max"] + 1))
        mu = float(rng.uniform(-prm["mu_max"], prm["mu_max"]))
        par = chebpoly.ShiftedChebParams.from_dims(p, n, l)
        r1, r2 = chebpoly.shifted_p(par, mu), chebpoly.shifted_p_via_cheb(par, mu)
        rel = abs(r1 - r2) / max(abs(r1), abs(r2), np.finfo(float).tiny)
        worst_rel = max(worst_rel, rel)
        rows.append({"kind": "closed_form", "p": p, "n": n, "l": l, "mu": mu, "relative_error": rel})
    return {"rows": rows, "summary": {"max_trig_error": worst_trig, "max_closed_form_relative_error": worst_rel}}


def _comb_oracle(prm, workers):
    if prm["max_pn"] > 0:
        cells = [(p, n, l) for p, n in comboracle.in_budget_pairs(prm["max_pn"]) for l in range(prm["max_l"] + 1)]
    else:
        cells = [(prm["p"], prm["n"], prm["l"])]
    rows = []
    for p, n, l in cells:
        row = comboracle.compare_comb_identity(p, n, l).to_dict()
        if l == 2:
            row["l2_gap_closed_form"] = comboracle.fraction_str(comboracle.l2_gap(p, n))
        rows.append(row)
    return {"rows": rows, "summary": {"cells": len(rows)}}


def _trace_bounds(prm, workers):
    p, n, L = prm["p"], prm["n"], prm["l_max"]
    y = p / n
    seeds = [derive_seed(prm["seed"], i) for i in range(prm["samples"])]
    traces = np.array(_map(lambda s: chebpoly.t_sequence(gen_sign_matrix(p, n, s), L).traces(), seeds, workers))
    mean = traces.mean(axis=0)
    se = traces.std(axis=0, ddof=1) / math.sqrt(len(seeds)) if len(seeds) > 1 else np.zeros(L + 1)
    exact_ok = p * n <= comboracle.MATRIX_BUDGET_PN
    rows = []
    for l in range(L + 1):
        row = {
            "l": l, "mc_mean_trace": float(mean[l]), "mc_standard_error": float(se[l]),
            "upper_bound": chebpoly.trace_upper_bound(l, y) if l >= 1 else None,
            "bound_valid": chebpoly.trace_bound_valid(l, y, n, prm["C"]),
        }
        if exact_ok and l <= comboracle.MAX_ORACLE_DEGREE:
            row["exact_mean_trace"] = comboracle.fraction_str(comboracle.exact_expected_trace(p, n, l))
        rows.append(row)
    return {"rows": rows, "summary": {"y": y, "proof_degree": chebpoly.proof_degree(n, y, prm["C"])}}


def _l1_embed(prm, workers):
    seeds = [derive_seed(prm["seed"], i) for i in range(prm["seeds"])]
    rows = []
    certs = []
    for s in seeds:
        sys_ = l1section.SignSystem.generate(prm["n"], prm["delta"], s)
        cert = l1section.min_khinchine(
            sys_, prm["restarts"], prm["iters"], seed=s, step=prm["step"],
            c0=prm["c0"], log_exponent=prm["log_exponent"], workers=workers,
        )
        certs.append(cert)
        sig = l1section.sigma_min_normalized(sys_)
        row = cert.to_dict()
        row["sigma_min_normalized"] = sig
        row["c1_sample"] = sig / prm["delta"]
        if sys_.w_block().shape[0]:
            wmax = l1section.w_block_upper(sys_, prm["w_samples"], derive_seed(s, 1))
            row["w_block_upper"] = wmax
            row["C3_sample"] = wmax / math.sqrt(prm["delta"])
        rows.append(row)
    fits = [c.c0_fit(prm["log_exponent"]) for c in certs]
    fits_sqrt = [c.c0_fit(0.5) for c in certs]
    return {
        "rows": rows,
        "summary": {
            "c0_fit_min": min(fits), "c0_fit_max": max(fits), "c0_fit_ratio": max(fits) / min(fits),
            "c0_fit_sqrt_log_min": min(fits_sqrt), "c0_fit_sqrt_log_max": max(fits_sqrt),
            "all_certified": all(c.min_estimate >= c.sigma_min_lower > 0 for c in certs),
            "gaussian_generator": l1section.GAUSSIAN_GENERATOR_ID,
        },
    }


def _constant_fit(prm, workers):
    reports = []
    k = 0
    for p in prm["p"]:
        n = max(p, int(round(p / prm["y"])))
        for eps in prm["eps"]:
            reports.append(tailprobe.estimate_outside_probability(p, n, eps, prm["trials"], derive_seed(prm["seed"], k), workers))
            k += 1
    C1 = tailprobe.fit_theorem1_constant(reports)
    par = chebpoly.ShiftedChebParams.from_dims(prm["cheb_p"], prm["cheb_n"])
    C_ch2 = chebpoly.fit_ch2_constant(par, prm["cheb_degrees"], prm["cheb_eps"])
    rows = [r.to_dict() for r in reports]
    for r in rows:
        r["tail_bound_fitted_C"] = None if C1 is None else tailprobe.theorem1_bound(r["p"], r["epsilon"], C1)
    return {
        "rows": rows,
        "summary": {"outside_tail_C": C1, "growth_floor_C": None if math.isinf(C_ch2) else C_ch2},
    }


RUNNERS = {
    "mp-convergence": _mp_convergence,
    "edge-deviation": _edge_deviation,
    "lambda-min-tail": _lambda_min_tail,
    "cheb-identities": _cheb_identities,
    "comb-oracle": _comb_oracle,
    "trace-bounds": _trace_bounds,
    "l1-embed": _l1_embed,
    "constant-fit": _constant_fit,
}


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(config: ExperimentConfig, threads=None) -> dict:
    """Execute ``config`` and return the report document (not written)."""
    threads = default_threads() if threads is None else max(1, int(threads))
    # single-threaded BLAS keeps floating-point results schedule independent
    with threadpool_limits(limits=1):
        results = RUNNERS[config.experiment](dict(config.parameters), threads)
    results["generator"] = GENERATOR_ID
    results["backend"] = backend()
    return {
        "experiment": config.experiment,
        "version": __version__,
        "config": config.to_dict(),
        "results": results,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def report_body(report: dict) -> str:
    """Canonical serialisation without the timestamp, for reproducibility checks."""
    body = {k: v for k, v in report.items() if k != "timestamp"}
    return json.dumps(body, sort_keys=True, indent=2)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    rows = report["results"].get("rows", [])
    fields = []
    for row in rows:
        for k, v in row.items():
            if k not in fields and not isinstance(v, (list, dict)):
                fields.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fields})
    return buf.getvalue()


def write_report(report: dict, path: str, fmt: str):
    text = render(report, fmt)
    if path in ("-", ""):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _parse_set(item):
    if "=" not in item:
        raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="baiyin",
        description="Run spectral-edge and l1-section experiments on random sign matrices.",
        epilog=f"Environment: {THREADS_ENV} caps worker threads when --threads is absent; "
               "BAIYIN_DISABLE_NUMBA=1 selects the pure-numpy kernels.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", metavar="PATH", help="JSON experiment document")
        sp.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], help="override a parameter")
        sp.add_argument("--seed", type=int, metavar="U64", help="master seed")
        sp.add_argument("--threads", type=int, metavar="N", help=f"worker threads (default ${THREADS_ENV} or 1)")
        sp.add_argument("--out", metavar="PATH", help="report path, '-' for stdout")
        sp.add_argument("--format", choices=FORMATS, help="report format")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
            base = parse_config(text)
            if base.experiment != args.experiment:
                raise ConfigError(
                    f"config selects {base.experiment!r} but subcommand is {args.experiment!r}", key="experiment"
                )
            params, output, fmt = dict(base.parameters), base.output, base.format
        else:
            params, output, fmt = {}, "-", "json"
        for item in args.set:
            key, value = _parse_set(item)
            params[key] = value
        if args.seed is not None:
            if "seed" not in SCHEMAS[args.experiment]:
                raise ConfigError("experiment takes no seed", key="seed")
            params["seed"] = args.seed
        if args.out is not None:
            output = args.out
        if args.format is not None:
            fmt = args.format
        config = resolve(args.experiment, params, output=output, fmt=fmt)
        report = run_experiment(config, args.threads)
        write_report(report, config.output, config.format)
    except (BaiyinError, OSError) as exc:
        print(f"baiyin {args.experiment}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
