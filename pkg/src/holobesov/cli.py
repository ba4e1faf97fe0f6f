"""Command-line driver: ``holobesov {verify,rates,modulus,continue,report}``.

Every subcommand reads an INI config (see README), writes CSV and JSON files
into the output directory and prints a short summary.  Exit status is 0 on
success, 1 when a verified invariant fails and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .config import ExperimentConfig, default_config, load_config
from .errors import ConfigError, HolobesovError, InsufficientDataError

FLOAT = "{:.16e}"


# -- formatting ---------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return FLOAT.format(x)
    return str(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_quote(_fmt(v)) for v in row) + "\n")
    return buf.getvalue()


def _quote(s: str) -> str:
    return f'"{s}"' if "," in s else s


def _clean(obj):
    """JSON-safe copy: NaN becomes null, infinities become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _s_label(s: float) -> str:
    return f"{s:g}"


HEADERS = {
    "rates.csv": lambda cfg: ["function", "m", "degree", "E"] + [f"scaled_s{_s_label(s)}" for s in cfg.s],
    "modulus.csv": lambda cfg: ["function", "order", "k", "scale", "omega", "cells"],
    "verdicts.csv": lambda cfg: ["function", "s", "q", "seminorm", "sequence_norm", "verdict_modulus",
                                 "verdict_sequence", "superalgebraic", "slope"],
    "continue_global.csv": lambda cfg: ["function", "r", "S", "m", "ref", "ratio"],
    "continue_local.csv": lambda cfg: ["function", "r", "S", "omega", "ratio"],
    "continue_norms.csv": lambda cfg: ["function", "mode", "s", "q", "weighted_norm"],
}


# -- experiments -----------------------------------------------------------------------

def _rates_one(cfg: ExperimentConfig, spec, with_modulus: bool = True):
    from .besov import (besov_report, dyadic_degrees, global_best_approx, is_superalgebraic,
                        modulus, slope, suggested_order)
    dom = cfg.domain
    f = spec.build(dom.n)
    method = None if cfg.rates_method == "auto" else cfg.rates_method
    seq = global_best_approx(dom, f, dyadic_degrees(cfg.max_level), cfg.p, method)
    try:
        s_hat, resid = slope(seq)
    except InsufficientDataError:
        s_hat, resid = np.inf, 0.0
    sup = bool(is_superalgebraic(seq) or not np.isfinite(s_hat))
    out = {"label": spec.label, "seq": seq, "slope": s_hat, "residual": resid, "superalgebraic": sup}
    if not with_modulus:
        return out
    order = cfg.modulus_order or suggested_order(np.inf if sup else s_hat)
    scales = [2.0 ** -k for k in range(1, cfg.modulus_levels + 1)]
    table = modulus(dom, f, order, scales, R=cfg.decompositions, p=cfg.p, seed=cfg.seed,
                    method=cfg.modulus_method, per_cell=cfg.per_cell)
    out["table"] = table
    reports = []
    for q in cfg.q:
        for s in cfg.s:
            if s >= order:
                continue  # the modulus of order m only measures smoothness below m
            reports.append(besov_report(seq, table, s, q))
    out["reports"] = reports
    return out


def _map(cfg: ExperimentConfig, fn, items):
    """Apply fn(cfg, item) over items, in a worker pool when jobs > 1; order preserved."""
    items = list(items)
    if cfg.jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(items))) as pool:
            return list(pool.map(fn, [cfg] * len(items), items))
    return [fn(cfg, it) for it in items]


def rates_tables(cfg: ExperimentConfig, with_modulus: bool = True) -> dict:
    """File name -> text for the rates experiment."""
    fn = _rates_one if with_modulus else _rates_only
    results = _map(cfg, fn, cfg.functions)
    files = {}
    rows = []
    for r in results:
        seq = r["seq"]
        for m, (deg, E) in enumerate(zip(seq.degrees, seq.values)):
            rows.append([r["label"], m, int(deg), float(E)] + [float(E * 2.0 ** (m * s)) for s in cfg.s])
    files["rates.csv"] = _csv(HEADERS["rates.csv"](cfg), rows)
    summary = {"config": cfg.to_dict(), "functions": {}}
    for r in results:
        summary["functions"][r["label"]] = {
            "rates": r["seq"].to_dict(), "slope": r["slope"], "slope_residual": r["residual"],
            "superalgebraic": r["superalgebraic"]}
    if with_modulus:
        mrows, vrows = [], []
        for r in results:
            t = r["table"]
            for k, (h, w, c) in enumerate(zip(t.scales, t.values, t.cells), start=1):
                mrows.append([r["label"], t.m, k, float(h), float(w), int(c)])
            block = []
            for rep in r["reports"]:
                vrows.append([r["label"], rep.s, rep.q, rep.seminorm, rep.sequence, rep.verdict_modulus,
                              rep.verdict_sequence, rep.superalgebraic, rep.slope])
                block.append(rep.to_dict())
            entry = summary["functions"][r["label"]]
            entry["modulus"] = t.to_dict()
            entry["reports"] = block
            entry["verdict"] = _verdict_block(r["reports"])
        files["modulus.csv"] = _csv(HEADERS["modulus.csv"](cfg), mrows)
        files["verdicts.csv"] = _csv(HEADERS["verdicts.csv"](cfg), vrows)
    files["rates.json"] = _json(summary)
    return files


def _rates_only(cfg, spec):
    return _rates_one(cfg, spec, with_modulus=False)


def _verdict_block(reports) -> dict:
    """finite/divergent per (s, q), with a one-line summary."""
    cells = {}
    for rep in reports:
        key = f"s={_s_label(rep.s)},q={'inf' if np.isinf(rep.q) else _s_label(rep.q)}"
        v = rep.verdict_sequence if rep.verdict_sequence == rep.verdict_modulus else "disagree"
        cells[key] = v
    values = set(cells.values())
    if values == {"finite"}:
        summary = "all s finite"
    elif "disagree" in values:
        summary = "modulus and sequence verdicts disagree"
    else:
        summary = "mixed"
    return {"cells": cells, "summary": summary}


def _modulus_one(cfg, spec):
    return _rates_one(cfg, spec)


def modulus_tables(cfg: ExperimentConfig) -> dict:
    files = rates_tables(cfg)
    return {k: files[k] for k in ("modulus.csv",)} | {
        "modulus.json": _json({"config": cfg.to_dict(), "functions": {
            k: v.get("modulus") for k, v in json.loads(files["rates.json"])["functions"].items()}})}


def _weighted_norm(radii, S, s: float, q: float, eps: float) -> float:
    """Discrete ||S(r) r^{1 - 1/q - s}||_{L^q(0, eps)} from samples on a log grid."""
    radii, S = np.asarray(radii, float), np.asarray(S, float)
    order = np.argsort(radii)
    radii, S = radii[order], S[order]
    if np.isinf(q):
        return float(np.max(S * radii ** (1 - s)))
    g = (S * radii ** (1 - 1 / q - s)) ** q * radii  # dr = r d(log r)
    return float(trapezoid(g, np.log(radii)) ** (1 / q))


def _ratio(num: float, den: float, scale: float) -> float:
    """num / den, with values at the round-off floor (relative to ``scale``) counted as zero."""
    from .besov import ZERO_TOL
    floor = ZERO_TOL * max(scale, 1e-300)
    if num <= floor:
        return 0.0
    return num / den if den > floor else np.inf


def _continue_one(cfg: ExperimentConfig, spec):
    from .besov import dyadic_degrees, global_best_approx
    from .continuation import (band_profile, build_global, build_local, lambda_constant,
                               local_profile, sp_profile)
    dom = cfg.domain
    f = spec.build(dom.n)
    method = None if cfg.rates_method == "auto" else cfg.rates_method
    if method == "minimax" or np.isinf(cfg.p):
        method = None
    seq = global_best_approx(dom, f, dyadic_degrees(cfg.depth), 2, method)
    G = build_global(dom, dict(enumerate(seq.polys)), cfg.depth)
    rates = dict(enumerate(seq.values))
    order = None
    if cfg.level_order:
        order = (cfg.level_order,) + (2 * cfg.level_order + 1,) * dom.n
    grows = []
    for r, S, m, ref in band_profile(G, rates, cfg.continuation_p, cfg.per_band, order):
        grows.append([spec.label, r, S, m, ref, _ratio(S, ref, seq.norm)])
    # profile on a log grid for the weighted norm
    radii = G.epsilon * 7 / 8 * 2.0 ** (-np.arange(0, 2 * (G.depth + 1)) / 2)
    prof = sp_profile(G, cfg.continuation_p, radii, order)
    lam = lambda_constant(G, size=10000, seed=cfg.seed)
    L = build_local(dom, f, cfg.local_degree, cfg.local_depth, seed=cfg.seed)
    lrows = []
    for r, S, om in local_profile(L, f, cfg.local_radii, cfg.local_degree + 1, cfg.continuation_p,
                                  R=cfg.decompositions, seed=cfg.seed):
        lrows.append([spec.label, r, S, om, _ratio(S * r, om, seq.norm)])
    nrows = []
    for q in cfg.q:
        for s in cfg.s:
            nrows.append([spec.label, "global", s, q, _weighted_norm(prof.radii, prof.values, s, q, G.epsilon)])
            nrows.append([spec.label, "local", s, q,
                          _weighted_norm([r[1] for r in lrows], [r[2] for r in lrows], s, q, G.epsilon)])
    return {"label": spec.label, "global": grows, "local": lrows, "norms": nrows, "lambda": lam,
            "profile": list(zip(prof.radii.tolist(), prof.values.tolist())),
            "unresolved": L.whitney.unresolved}


def continue_tables(cfg: ExperimentConfig) -> dict:
    results = _map(cfg, _continue_one, cfg.functions)
    files = {
        "continue_global.csv": _csv(HEADERS["continue_global.csv"](cfg), [r for x in results for r in x["global"]]),
        "continue_local.csv": _csv(HEADERS["continue_local.csv"](cfg), [r for x in results for r in x["local"]]),
        "continue_norms.csv": _csv(HEADERS["continue_norms.csv"](cfg), [r for x in results for r in x["norms"]]),
    }
    summary = {"config": cfg.to_dict(), "functions": {}}
    for x in results:
        g = [r[5] for r in x["global"]]
        loc = [r[4] for r in x["local"]]
        summary["functions"][x["label"]] = {
            "lambda_constant": x["lambda"],
            "max_ratio_global": max(g) if g else 0.0,
            "max_ratio_local": max(loc) if loc else 0.0,
            "profile": x["profile"],
            "unresolved_cells": x["unresolved"],
        }
    lam = [v["lambda_constant"] for v in summary["functions"].values()]
    summary["suite_lambda_constant"] = max(lam) if lam else 0.0
    files["continue.json"] = _json(summary)
    return files


# -- plots --------------------------------------------------------------------------

def render_plots(out: Path, rates: dict, cont: dict) -> list:
    """PNG figures from the CSV tables; matplotlib is imported only here."""
    import csv

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    def table(text):
        return list(csv.DictReader(io.StringIO(text)))

    written = []

    def save(fig, name):
        path = out / name
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, rows in _group(table(rates["rates.csv"])).items():
        d = np.array([float(r["degree"]) for r in rows])
        E = np.array([float(r["E"]) for r in rows])
        keep = E > 0
        if keep.any():
            ax.loglog(d[keep], E[keep], "o-", label=label)
    ax.set_xlabel("degree 2^m")
    ax.set_ylabel("E_(2^m)(f)_p")
    ax.legend(fontsize=7)
    save(fig, "rates.png")

    if "modulus.csv" in rates:
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, rows in _group(table(rates["modulus.csv"])).items():
            h = np.array([float(r["scale"]) for r in rows])
            w = np.array([float(r["omega"]) for r in rows])
            keep = w > 0
            if keep.any():
                ax.loglog(h[keep], w[keep], "s-", label=label)
        ax.set_xlabel("scale h")
        ax.set_ylabel("omega_m(f, h)_p")
        ax.legend(fontsize=7)
        save(fig, "modulus.png")

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for label, rows in _group(table(cont["continue_global.csv"])).items():
        r = np.array([float(x["r"]) for x in rows])
        axes[0].semilogx(r, [float(x["ratio"]) for x in rows], "o-", label=label)
    axes[0].set_xlabel("r")
    axes[0].set_ylabel("S_p(f,r) / (2^m E_(2^m))")
    axes[0].set_title("global continuation")
    for label, rows in _group(table(cont["continue_local.csv"])).items():
        r = np.array([float(x["r"]) for x in rows])
        axes[1].semilogx(r, [float(x["ratio"]) for x in rows], "o-", label=label)
    axes[1].set_xlabel("r")
    axes[1].set_ylabel("S_p(f,r) r / omega(f, 10 r)")
    axes[1].set_title("local continuation")
    axes[0].legend(fontsize=7)
    save(fig, "continue.png")
    return written


def _group(rows):
    out = {}
    for r in rows:
        out.setdefault(r["function"], []).append(r)
    return out


# -- entry point ---------------------------------------------------------------------

def _write(out: Path, files: dict):
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")


def cmd_verify(cfg: ExperimentConfig) -> int:
    from .invariants import run_all
    checks = run_all(cfg.domain, cfg.size, cfg.seed)
    report = {"config": cfg.to_dict(), "passed": all(c.passed for c in checks),
              "checks": [{k: v for k, v in c.to_dict().items() if k != "seconds"} for c in checks]}
    _write(cfg.out, {"verify.json": _json(report)})
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.module:>13s}.{c.name:<26s} value={_fmt(c.value)} "
              f"threshold={_fmt(c.threshold)} [{c.seconds:.1f}s]", file=sys.stderr)
    print(f"{sum(c.passed for c in checks)}/{len(checks)} invariants passed")
    return 0 if report["passed"] else 1


def cmd_rates(cfg: ExperimentConfig) -> int:
    files = rates_tables(cfg)
    _write(cfg.out, files)
    summary = json.loads(files["rates.json"])
    for label, v in summary["functions"].items():
        print(f"{label}: slope={v['slope']} superalgebraic={v['superalgebraic']} "
              f"verdict={v['verdict']['summary']}")
    return 0


def cmd_modulus(cfg: ExperimentConfig) -> int:
    files = modulus_tables(cfg)
    _write(cfg.out, files)
    print(f"wrote {', '.join(sorted(files))} to {cfg.out}")
    return 0


def cmd_continue(cfg: ExperimentConfig) -> int:
    files = continue_tables(cfg)
    _write(cfg.out, files)
    summary = json.loads(files["continue.json"])
    for label, v in summary["functions"].items():
        print(f"{label}: lambda C={v['lambda_constant']} global ratio<={v['max_ratio_global']} "
              f"local ratio<={v['max_ratio_local']}")
    return 0


def cmd_report(cfg: ExperimentConfig) -> int:
    rates = rates_tables(cfg)
    cont = continue_tables(cfg)
    _write(cfg.out, rates | cont)
    figs = render_plots(cfg.out, rates, cont)
    print(f"wrote {len(rates) + len(cont)} tables and {len(figs)} figures to {cfg.out}")
    return 0


COMMANDS = {"verify": cmd_verify, "rates": cmd_rates, "modulus": cmd_modulus,
            "continue": cmd_continue, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="holobesov", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="INI experiment config (defaults if omitted)")
    ap.add_argument("--out", type=Path, help="output directory (overrides [run] out)")
    ap.add_argument("--seed", type=int, help="base seed (overrides [run] seed)")
    ap.add_argument("--jobs", type=int, help="worker processes (overrides [run] jobs)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.out is not None:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.jobs is not None:
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            cfg.jobs = args.jobs
    except ConfigError as exc:
        ap.print_usage(sys.stderr)
        print(f"holobesov: config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except HolobesovError as exc:
        print(f"holobesov: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
