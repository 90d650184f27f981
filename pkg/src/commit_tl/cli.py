"""Command-line entry point: ``commit-tl {simulate,select-aux,fit,infer,report}``.

Every result file is JSON of the form ``{"metadata": {...}, "result": {...}}``.
Only ``metadata`` carries run-dependent values (timestamp, runtimes), so two
runs with the same config produce identical ``result`` bytes.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .estimator import CommitConfig, fit_commit
from .exceptions import CommitError, DegenerateColumnError, UsageError
from .inference import InferenceConfig, debias_commit, nodewise_residuals
from .io import build_dataset, load_config, load_study_data
from .selection import select_auxiliary
from .simulation import SimConfig, run_study
from .solver import SolverOptions

log = logging.getLogger("commit_tl")


def _version():
    try:
        return version("commit-tl")
    except PackageNotFoundError:
        return "unknown"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _dump(command, result, out, extra_meta=None):
    meta = {
        "command": command,
        "version": _version(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        **(extra_meta or {}),
    }
    text = json.dumps({"metadata": _clean(meta), "result": _clean(result)}, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------ helpers


def _commit_config(cfg):
    return CommitConfig(
        lambda_aux=cfg.lambda_aux,
        lambda_w=cfg.lambda_w,
        cv_folds=cfg.cv_folds,
        seed=cfg.seed,
        solver=SolverOptions(fit_intercept=cfg.fit_intercept),
    )


def _candidates(cfg, study):
    if cfg.target is None:
        raise UsageError("config needs a 'target' outcome name")
    study.outcomes.column_index([cfg.target])
    if cfg.candidates == "all":
        return [c for c in study.outcomes.columns if c != cfg.target]
    names = list(cfg.candidates)
    study.outcomes.column_index(names)
    if cfg.target in names:
        raise UsageError("the target cannot also be a candidate")
    return names


def _select(cfg, study):
    cands = _candidates(cfg, study)
    if not cands:
        raise UsageError("no candidate outcomes to select from")
    Y = study.outcomes.values
    res = select_auxiliary(
        study.X,
        Y[:, study.outcomes.column_index([cfg.target])[0]],
        Y[:, study.outcomes.column_index(cands)],
        candidate_names=cands,
        r0=cfg.r0,
        p0=cfg.p0,
        k_folds=cfg.k_folds,
        seed=cfg.seed,
        config=_commit_config(cfg),
        correlation=cfg.correlation,
    )
    return res, cands


def _auxiliaries(cfg, study):
    if cfg.auxiliaries == "select":
        res, _ = _select(cfg, study)
        return list(res.selected_names)
    if cfg.auxiliaries == "all":
        return _candidates(cfg, study)
    names = list(cfg.auxiliaries)
    study.outcomes.column_index(names)
    return names


def _named(names, values):
    return {n: float(v) for n, v in zip(names, values)}


# ----------------------------------------------------------- commands


def cmd_simulate(cfg, args):
    try:
        sim = SimConfig.from_dict(cfg.simulation)
    except TypeError as exc:
        raise UsageError(f"bad simulation section: {exc}") from None
    if args.out is None:
        raise UsageError("simulate needs --out DIR")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    report = run_study(sim, n_jobs=cfg.n_jobs)
    elapsed = time.perf_counter() - t0

    cols = ["replication", "method", "mse", "sigma0_hat", "typeI_rejections", "typeI_tests",
            "power_rejections", "power_tests"]
    with (out / "records.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in report.records:
            w.writerow(["" if rec.get(c) is None else repr(rec[c]) if isinstance(rec[c], float)
                        else rec[c] for c in cols])

    summary = report.summary()
    runtimes = {}
    for m, s in summary["methods"].items():
        runtimes[m] = {"mean": s.pop("runtime_mean"), "total": s.pop("runtime_total")}
    _dump("simulate", summary, out / "summary.json",
          {"elapsed_seconds": elapsed, "runtimes": runtimes})
    return 0


def cmd_select_aux(cfg, args):
    study = load_study_data(cfg)
    res, cands = _select(cfg, study)
    result = {
        "target": cfg.target,
        "candidates": cands,
        "r_hat": _named(cands, res.r_hat),
        "p_hat": _named(cands, res.p_hat),
        "screened": [cands[j] for j in res.screened],
        "mse_by_m": res.mse_by_m,
        "m_opt": res.m_opt,
        "selected": list(res.selected_names),
        "thresholds": {"r0": res.thresholds[0], "p0": res.thresholds[1]},
        "folds": res.folds,
        "config": cfg.to_dict(),
    }
    _dump("select-aux", result, args.out)
    return 0


def _fit_payload(fit, aux):
    return {
        "no_auxiliaries": fit.no_auxiliaries,
        "target": fit.outcome_names[0],
        "auxiliaries": aux,
        "alpha": _named(aux, fit.alpha),
        "dropped": [aux[j] for j in fit.dropped_aux],
        "lambda_aux": _named(aux, fit.lambdas_aux),
        "lambda_w": fit.lambda_w,
        "intercept": fit.intercept,
        "coefficients": _named(fit.feature_names, fit.beta0),
        "w": _named(fit.feature_names, fit.w),
        "aux_coefficients": {a: _named(fit.feature_names, b) for a, b in zip(aux, fit.aux_betas)},
    }


def cmd_fit(cfg, args):
    study = load_study_data(cfg)
    aux = _auxiliaries(cfg, study)
    data = build_dataset(study, cfg.target, aux)
    fit = fit_commit(data, _commit_config(cfg))
    result = _fit_payload(fit, aux) | {"n_samples": data.n, "config": cfg.to_dict()}
    _dump("fit", result, args.out)
    return 0


def cmd_infer(cfg, args):
    study = load_study_data(cfg)
    aux = _auxiliaries(cfg, study)
    data = build_dataset(study, cfg.target, aux)
    fit = fit_commit(data, _commit_config(cfg))
    icfg = InferenceConfig(
        zeta=cfg.zeta,
        variance_method=cfg.variance_method,
        df=cfg.df,
        alpha_level=cfg.alpha,
        cv_folds=cfg.cv_folds,
        seed=cfg.seed,
        fit_intercept=cfg.fit_intercept,
    )
    try:
        nodewise = nodewise_residuals(data.X, icfg)
    except DegenerateColumnError as exc:
        names = [data.feature_names[k] for k in exc.columns]
        raise DegenerateColumnError(
            f"feature(s) {names} are constant or explained by the others; "
            "filter them before inference",
            names,
        ) from None
    res = debias_commit(fit, data, nodewise, icfg)
    rows = res.table()
    result = {
        "target": cfg.target,
        "auxiliaries": aux,
        "no_auxiliaries": fit.no_auxiliaries,
        "alpha": _named(aux, fit.alpha),
        "n_samples": data.n,
        "sigma0_hat": res.sigma0_hat,
        "variance_method": res.variance_method,
        "df": res.df,
        "alpha_level": res.alpha_level,
        "eta_star": res.eta_star,
        "features": rows,
        "config": cfg.to_dict(),
    }
    _dump("infer", result, args.out)
    if args.csv:
        with Path(args.csv).open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return 0


def _format_report(doc):
    meta, res = doc.get("metadata", {}), doc.get("result", {})
    cmd = meta.get("command")
    lines = [f"{cmd} result (commit-tl {meta.get('version', '?')}, {meta.get('timestamp', '?')})"]
    if cmd == "simulate":
        c = res["config"]
        lines.append(f"n={c['n']} p={c['p']} s={c['s']} replications={c['n_replications']} "
                     f"failed={res['n_failed']}")
        for m, s in res["methods"].items():
            parts = [f"  {m:14s} median MSE {s['mse_median']:.4g}"]
            if s.get("typeI_rate") is not None:
                parts.append(f"type-I {s['typeI_rate']:.4f}  power {s['power']:.4f}")
            lines.append("  ".join(parts))
    elif cmd == "select-aux":
        lines.append(f"target {res['target']}: screened {len(res['screened'])} of "
                     f"{len(res['candidates'])} candidates")
        for m, mse in enumerate(res["mse_by_m"], start=1):
            mark = " <" if m == res["m_opt"] else ""
            lines.append(f"  m={m:3d}  CV MSE {mse if mse is None else f'{mse:.5g}'}{mark}")
        lines.append(f"selected: {', '.join(res['selected']) or '(none)'}")
    elif cmd == "fit":
        flag = " (no auxiliaries: plain lasso)" if res["no_auxiliaries"] else ""
        lines.append(f"target {res['target']}{flag}")
        for a, v in res["alpha"].items():
            dropped = " (dropped)" if a in res["dropped"] else ""
            lines.append(f"  alpha[{a}] = {v:.4g}{dropped}")
        nz = {k: v for k, v in res["coefficients"].items() if v != 0}
        lines.append(f"{len(nz)} nonzero coefficients")
        for k, v in sorted(nz.items(), key=lambda kv: -abs(kv[1]))[:20]:
            lines.append(f"  {k:24s} {v: .4g}")
    elif cmd == "infer":
        feats = res["features"]
        level = res["alpha_level"]
        sig = [f for f in feats if f["p_adjusted"] < level]
        lines.append(f"target {res['target']}; sigma0_hat {res['sigma0_hat']:.4g} "
                     f"({res['variance_method']}); max bias factor {res['eta_star']:.3g}")
        lines.append(f"{len(sig)} of {len(feats)} features with BH-adjusted p < {level}")
        for f in sorted(sig, key=lambda f: f["p_value"]):
            lines.append(f"  {f['feature']:24s} {f['debiased']: .4g}  "
                         f"[{f['ci_lower']:.4g}, {f['ci_upper']:.4g}]  p={f['p_value']:.3g}")
    else:
        raise UsageError(f"unrecognised result file (command {cmd!r})")
    return "\n".join(lines) + "\n"


def load_result(path):
    """Parse a result JSON written by any subcommand."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"no such result file: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not a result JSON: {exc}") from None


def cmd_report(args):
    src = Path(args.input)
    if src.is_dir():
        src = src / "summary.json"
    sys.stdout.write(_format_report(load_result(src)))
    return 0


# --------------------------------------------------------------- main


def build_parser():
    parser = _Parser(prog="commit-tl", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("simulate", "run a simulation study (writes records.csv and summary.json)"),
        ("select-aux", "screen and choose auxiliary outcomes"),
        ("fit", "fit the transfer estimator"),
        ("infer", "debiased per-feature inference"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (repeatable; dotted keys for sections)")
        p.add_argument("--out", help="output file (directory for simulate); stdout if omitted")
        if name == "infer":
            p.add_argument("--csv", help="also write the per-feature table as CSV")
    p = sub.add_parser("report", help="print a human-readable summary of a result file")
    p.add_argument("--in", dest="input", required=True, help="result JSON or simulate output dir")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "select-aux": cmd_select_aux,
    "fit": cmd_fit,
    "infer": cmd_infer,
}


def _error_json(exc, code):
    err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("line", "column", "columns"):
        val = getattr(exc, attr, None)
        if val is not None:
            err[attr] = _clean(list(val) if attr == "columns" else val)
    return json.dumps({"error": err})


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if args.command == "report":
            return cmd_report(args)
        cfg = load_config(args.config, args.set)
        return COMMANDS[args.command](cfg, args)
    except CommitError as exc:
        err, code = exc, exc.exit_code
    except (TypeError, ValueError) as exc:
        # malformed config values surface here before any numerics run
        err, code = exc, 1
    except Exception as exc:  # noqa: BLE001 - reported as a numerical failure
        err, code = exc, 3
    sys.stderr.write(_error_json(err, code) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
