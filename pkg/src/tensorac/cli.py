"""Config-driven experiment runner.

Subcommands: complexity, predict, classify, criteria, dist, tract, report.
Every knob lives in a JSON config and can be overridden by a flag (flags
win).  Outputs are deterministic: fixed column order, repr'd floats, cells
computed from a sorted (d, eps) grid.

Exit codes: 0 ok, 2 config error, 3 compute error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Optional

import numpy as np

from . import asympt, dist, families, spectra, tensor
from .errors import (CapExceeded, ComputeError, ConfigError, MissingResults,
                     TensoracError, TooLarge)

RESULT_COLUMNS = ["d", "eps", "n_lower", "n_upper", "ln_lower", "ln_upper",
                  "method"]


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    return obj


def _merged(config: dict, args: argparse.Namespace, keys: list[str]) -> dict:
    out = dict(config)
    for key in keys:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            out[key] = val
    return out


def _parse_spectrum(spec_cfg: dict) -> spectra.MarginalSpectrum:
    kind = spec_cfg.get("kind")
    if kind == "two-atom":
        return spectra.two_atom_spectrum(float(Fraction(str(spec_cfg["a"]))))
    if kind == "flat":
        return spectra.flat_spectrum(int(spec_cfg["l"]))
    if kind == "euler":
        return spectra.euler_spectrum(int(spec_cfg["r"]),
                                      int(spec_cfg.get("K", 10000)))
    if kind == "regvar":
        return spectra.regvar_spectrum(float(spec_cfg["beta"]),
                                       float(spec_cfg["p"]),
                                       float(spec_cfg["r"]),
                                       int(spec_cfg.get("K", 10 ** 5)))
    if kind == "loglog":
        return spectra.loglog_spectrum(float(spec_cfg["beta"]),
                                       float(spec_cfg["s"]),
                                       int(spec_cfg.get("K", 10 ** 6)))
    if kind == "json":
        if "path" in spec_cfg:
            with open(spec_cfg["path"], "r", encoding="utf-8") as fh:
                return spectra.spectrum_from_json(fh.read())
        return spectra.normalize(spec_cfg["weights"],
                                 float(spec_cfg.get("tail_bound", 0.0)))
    raise ConfigError(f"unknown spectrum kind: {kind!r}")


def _build_problem(problem_cfg: dict, d: int) -> tensor.TensorProblem:
    family = problem_cfg.get("family")
    if family == "degree":
        base = _parse_spectrum(problem_cfg["spectrum"])
        return tensor.TensorProblem.degree(base, d)
    if family == "euler-product":
        return families.euler_product_problem(
            beta=float(problem_cfg.get("beta", 1.0)),
            p=float(problem_cfg.get("p", 1.0)),
            d=d,
            tail_bound=float(problem_cfg.get("tail_bound", 1e-7)))
    if family == "product":
        specs = [_parse_spectrum(s) for s in problem_cfg["marginals"]]
        if len(specs) != d:
            raise ConfigError(f"product family has {len(specs)} marginals, "
                              f"d={d} requested")
        return tensor.TensorProblem.product(specs)
    raise ConfigError(f"unknown problem family: {family!r}")


def _validate_grid(cfg: dict) -> tuple[list[int], list[float]]:
    ds = cfg.get("d")
    eps = cfg.get("eps")
    if not ds or not isinstance(ds, list):
        raise ConfigError("d-list must be a nonempty list")
    ds = [int(v) for v in ds]
    if ds != sorted(ds) or any(v < 1 for v in ds):
        raise ConfigError("d-list must be ascending positive integers")
    if not eps or not isinstance(eps, list):
        raise ConfigError("eps-list must be a nonempty list")
    eps = [float(v) for v in eps]
    if any(not 0.0 < e < 1.0 for e in eps):
        raise ConfigError("eps values must lie in (0,1)")
    return ds, eps


# ---------------------------------------------------------------------------
# complexity computation for one cell
# ---------------------------------------------------------------------------

def _auto_grid(problem: tensor.TensorProblem) -> tuple[float, float, float]:
    """(a_d, b_d, x_max) from the first two moments of the U-variable sum."""
    mean = 0.0
    var = 0.0
    for spec, count in problem.groups():
        u = spectra.u_distribution(spec)
        m = u.mean()
        v = float(np.sum(u.masses * (u.positions - m) ** 2))
        mean += count * m
        var += count * v
    sd = math.sqrt(max(var, 1e-12))
    b_d = max(sd, 1.0)
    return 0.0, b_d, (mean + 12.0 * sd + 5.0) / b_d


def _convolution_cell(problem: tensor.TensorProblem, eps: float,
                      step: float) -> tensor.ComplexityInterval:
    a_d, b_d, x_max = _auto_grid(problem)
    G = tensor.convolve_G(problem, a_d, b_d, step, x_max)
    upper = tensor.lambda_quantile(G, eps)
    best = tensor.best_lower_bound(G, eps)
    return tensor.ComplexityInterval(
        n_lower=best.n_lower, n_upper=best.n_upper,
        ln_lower=best.ln_lower, ln_upper=upper.upper,
        method="ConvolutionBounds")


def _two_atom_degree(problem: tensor.TensorProblem) -> Optional[float]:
    if problem.base is None:
        return None
    w = problem.base.weights
    if w.size == 2 and problem.base.tail_bound == 0.0 and w[0] > 0.5:
        return float(w[0])
    return None


def _complexity_cell(problem: tensor.TensorProblem, eps: float, method: str,
                     n_cap: int, step: float) -> tensor.ComplexityInterval:
    if method == "heap":
        return tensor.exact_complexity(problem, eps, n_cap=n_cap)
    if method == "binomial":
        a = _two_atom_degree(problem)
        if a is None:
            raise ConfigError("binomial method needs a two-atom degree problem")
        return tensor.binomial_degree_complexity(a, problem.dimension, eps)
    if method == "convolution":
        return _convolution_cell(problem, eps, step)
    if method != "auto":
        raise ConfigError(f"unknown method {method!r}")
    a = _two_atom_degree(problem)
    if a is not None:
        return tensor.binomial_degree_complexity(a, problem.dimension, eps)
    try:
        return tensor.exact_complexity(problem, eps, n_cap=n_cap)
    except CapExceeded:
        return _convolution_cell(problem, eps, step)


def cmd_complexity(args: argparse.Namespace) -> int:
    cfg = _merged(_load_config(args.config),
                  args, ["d", "eps", "method", "n_cap", "step", "out",
                         "format", "seed", "threads"])
    ds, eps_list = _validate_grid(cfg)
    problem_cfg = cfg.get("problem")
    if not problem_cfg:
        raise ConfigError("config needs a 'problem' section")
    method = cfg.get("method", "auto")
    n_cap = int(cfg.get("n_cap", 2_000_000))
    step = float(cfg.get("step", 0.01))
    threads = int(cfg.get("threads", 1))

    cells = [(d, e) for d in ds for e in eps_list]

    def compute(cell):
        d, e = cell
        problem = _build_problem(problem_cfg, d)
        try:
            r = _complexity_cell(problem, e, method, n_cap, step)
        except TensoracError as exc:
            raise ComputeError(f"cell (d={d}, eps={e}): {exc}") from exc
        return (d, e, r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(compute, cells))
    else:
        results = [compute(c) for c in cells]
    results.sort(key=lambda t: (t[0], t[1]))

    rows = []
    for d, e, r in results:
        rows.append({
            "d": d, "eps": repr(e),
            "n_lower": "" if r.n_lower is None else str(r.n_lower),
            "n_upper": "" if r.n_upper is None else str(r.n_upper),
            "ln_lower": repr(r.ln_lower), "ln_upper": repr(r.ln_upper),
            "method": r.method,
        })
    _emit(cfg, args, rows, RESULT_COLUMNS, "complexity")
    return 0


# ---------------------------------------------------------------------------
# predict / classify
# ---------------------------------------------------------------------------

def _regime_from_config(cfg: dict) -> asympt.Regime:
    problem_cfg = cfg.get("problem") or {}
    family = problem_cfg.get("family")
    if family == "euler-product":
        return asympt.Regime(kind=asympt.RegimeKind.DICKMAN_PRODUCT,
                             beta=float(problem_cfg.get("beta", 1.0)))
    if family == "degree":
        spec = _parse_spectrum(problem_cfg["spectrum"])
        window = cfg.get("fit_window")
        return asympt.classify_degree_regime(
            spec, fit_window=tuple(window) if window else None)
    raise ConfigError(f"cannot classify family {family!r}")


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = _merged(_load_config(args.config),
                  args, ["d", "eps", "out", "format"])
    ds, eps_list = _validate_grid(cfg)
    regime = _regime_from_config(cfg)
    ctx = asympt.LawContext()
    rows = []
    for d in ds:
        for e in eps_list:
            p = asympt.predict_log_complexity(regime, d, e, ctx)
            rows.append({
                "d": d, "eps": repr(e), "regime": regime.kind.value,
                "a_d": repr(p.a_d), "b_d": repr(p.b_d), "q": repr(p.q),
                "ln_n_pred": repr(p.ln_n),
                "lnln_n_pred": "" if p.lnln_n is None else repr(p.lnln_n),
            })
    _emit(cfg, args, rows,
          ["d", "eps", "regime", "a_d", "b_d", "q", "ln_n_pred",
           "lnln_n_pred"], "predict")
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    cfg = _merged(_load_config(args.config), args, ["out", "format"])
    regime = _regime_from_config(cfg)
    payload = {
        "regime": regime.kind.value,
        "entropy": regime.entropy,
        "deviation": regime.deviation,
        "alpha": regime.alpha,
        "beta": regime.beta,
        "fit_residual": regime.fit_residual,
        "notes": regime.notes,
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    _write_text(cfg, "classify.json", text)
    print(text)
    return 0


# ---------------------------------------------------------------------------
# criteria / tract / dist
# ---------------------------------------------------------------------------

def _target_triplet(cfg: dict) -> dist.LevyTriplet:
    tgt = cfg.get("target") or {}
    kind = tgt.get("kind", "dickman")
    if kind == "dickman":
        beta = float(tgt.get("beta", 1.0))
        return dist.LevyTriplet(gamma=beta * math.pi / 4.0, sigma2=0.0,
                                kind="dickman", params={"beta": beta})
    if kind == "stable":
        law = dist.StableLaw(alpha=float(tgt["alpha"]),
                             rho=float(tgt.get("rho", 1.0)),
                             beta_skew=float(tgt.get("beta_skew", 1.0)),
                             mu=float(tgt.get("mu", 0.0)))
        return dist.levy_triplet_of(law)
    if kind == "normal":
        return dist.LevyTriplet(gamma=float(tgt.get("gamma", 0.0)),
                                sigma2=float(tgt.get("sigma2", 1.0)),
                                kind="zero", params={})
    raise ConfigError(f"unknown target kind {kind!r}")


def cmd_criteria(args: argparse.Namespace) -> int:
    cfg = _merged(_load_config(args.config), args,
                  ["d", "eps", "out", "format"])
    ds = cfg.get("d")
    if not ds:
        raise ConfigError("d-list must be a nonempty list")
    problem_cfg = cfg.get("problem")
    if not problem_cfg:
        raise ConfigError("config needs a 'problem' section")
    target = _target_triplet(cfg)
    N = cfg.get("N", 2)
    rows = []
    for d in [int(v) for v in ds]:
        problem = _build_problem(problem_cfg, d)
        b_d = float(cfg.get("b_d_factor", 1.0)) * math.log(max(d, 2))
        rep = asympt.check_conditions_ABC(problem, a_d=float(cfg.get("a_d", 0.0)),
                                          b_d=b_d, d=None, target=target, N=N)
        rows.append({"d": d, "b_d": repr(b_d),
                     "residual_a": repr(rep.residual_a),
                     "residual_b": repr(rep.residual_b),
                     "residual_c": repr(rep.residual_c)})
    _emit(cfg, args, rows,
          ["d", "b_d", "residual_a", "residual_b", "residual_c"], "criteria")
    return 0


def cmd_tract(args: argparse.Namespace) -> int:
    cfg = _merged(_load_config(args.config), args, ["out", "format"])
    d_max = int(cfg.get("d_max", 10000))
    rule_cfg = cfg.get("rule") or {}
    kind = rule_cfg.get("kind", "euler-dickman")
    if kind == "euler-dickman":
        r = families.euler_smoothness_rule(float(rule_cfg.get("beta", 1.0)),
                                           float(rule_cfg.get("p", 1.0)), d_max)
    elif kind == "linear":
        r = [int(rule_cfg.get("slope", 1)) * j for j in range(1, d_max + 1)]
    elif kind == "constant":
        r = [int(rule_cfg.get("value", 0))] * d_max
    elif kind == "list":
        r = [int(v) for v in rule_cfg["values"]]
    else:
        raise ConfigError(f"unknown rule kind {kind!r}")
    rep = asympt.euler_tractability_diagnostic(r, d_max)
    payload = {
        "d_max": d_max,
        "r_increasing": rep.r_increasing,
        "qpt_statistic_sup": rep.qpt_statistic_sup,
        "qpt_statistic_last": rep.qpt_statistic_last,
        "spt_partial_sums": {str(k): list(v) for k, v in
                             sorted(rep.spt_partial_sums.items())},
        "note": rep.note,
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    _write_text(cfg, "tract.json", text)
    print(text)
    return 0


def cmd_dist(args: argparse.Namespace) -> int:
    cfg = _merged(_load_config(args.config), args,
                  ["out", "format", "law", "beta", "alpha", "x", "u"])
    law_name = cfg.get("law", "dickman")
    xs = cfg.get("x") or []
    us = cfg.get("u") or []
    rows = []
    if law_name == "dickman":
        law = dist.dickman_build(float(cfg.get("beta", 1.0)))
        cdf, quant = (lambda x: dist.dickman_cdf(law, x),
                      lambda u: dist.dickman_quantile(law, u))
    elif law_name == "stable":
        slaw = dist.StableLaw(alpha=float(cfg.get("alpha", 1.0)),
                              rho=float(cfg.get("rho", 1.0)),
                              beta_skew=float(cfg.get("beta_skew", 1.0)),
                              mu=float(cfg.get("mu", 0.0)))
        cdf, quant = (lambda x: dist.stable_cdf(slaw, x),
                      lambda u: dist.stable_quantile(slaw, u))
    elif law_name == "normal":
        cdf, quant = dist.normal_cdf, dist.normal_quantile
    else:
        raise ConfigError(f"unknown law {law_name!r}")
    for x in xs:
        rows.append({"query": "cdf", "arg": repr(float(x)),
                     "value": repr(cdf(float(x)))})
    for u in us:
        rows.append({"query": "quantile", "arg": repr(float(u)),
                     "value": repr(quant(float(u)))})
    if not rows:
        raise ConfigError("dist needs at least one --x or --u query")
    _emit(cfg, args, rows, ["query", "arg", "value"], "dist")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args: argparse.Namespace) -> int:
    path = args.results
    if not path or not os.path.exists(path):
        raise MissingResults(f"results file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
    except (OSError, csv.Error) as exc:
        raise MissingResults(f"cannot parse results: {exc}") from exc
    if not rows or not {"d", "eps", "ln_lower", "ln_upper"} <= set(rows[0]):
        raise MissingResults("results file lacks the complexity columns")
    lines = [f"{'d':>10} {'eps':>8} {'ln n lower':>14} {'ln n upper':>14} "
             f"{'mid':>12} {'method':>18}"]
    plot_rows = []
    for row in rows:
        lo, hi = float(row["ln_lower"]), float(row["ln_upper"])
        mid = 0.5 * (lo + hi)
        lines.append(f"{row['d']:>10} {float(row['eps']):>8.3f} {lo:>14.4f} "
                     f"{hi:>14.4f} {mid:>12.4f} {row.get('method', ''):>18}")
        plot_rows.append({"d": row["d"], "eps": row["eps"],
                          "ln_mid": repr(mid),
                          "ln_lower": row["ln_lower"],
                          "ln_upper": row["ln_upper"]})
    text = "\n".join(lines)
    print(text)
    out = getattr(args, "out", None)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        _write_csv(os.path.join(out, "report_plot.csv"), plot_rows,
                   ["d", "eps", "ln_mid", "ln_lower", "ln_upper"])
    return 0


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _write_csv(path: str, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _rows_to_csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _emit(cfg: dict, args: argparse.Namespace, rows: list[dict],
          columns: list[str], stem: str) -> None:
    fmt = cfg.get("format", "csv")
    out = cfg.get("out")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    if fmt == "csv":
        text = _rows_to_csv_text(rows, columns)
        name = f"{stem}.csv"
    else:
        text = json.dumps(rows, sort_keys=True, indent=2) + "\n"
        name = f"{stem}.json"
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _write_text(cfg: dict, name: str, text: str) -> None:
    out = cfg.get("out")
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config path")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tensorac",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complexity", help="exact or bracketed n(eps)")
    _add_common(p)
    p.add_argument("--d", type=_int_list, help="comma-separated d list")
    p.add_argument("--eps", type=_float_list, help="comma-separated eps list")
    p.add_argument("--method",
                   choices=["auto", "heap", "binomial", "convolution"])
    p.add_argument("--n-cap", type=int, dest="n_cap")
    p.add_argument("--step", type=float)
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("predict", help="regime predictor at (d, eps)")
    _add_common(p)
    p.add_argument("--d", type=_int_list)
    p.add_argument("--eps", type=_float_list)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("classify", help="route a spectrum to its regime")
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("criteria", help="condition (A)(B)(C) residuals")
    _add_common(p)
    p.add_argument("--d", type=_int_list)
    p.set_defaults(func=cmd_criteria)

    p = sub.add_parser("dist", help="build and query limit laws")
    _add_common(p)
    p.add_argument("--law", choices=["dickman", "stable", "normal"])
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--x", type=_float_list, help="cdf query points")
    p.add_argument("--u", type=_float_list, help="quantile query levels")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("tract", help="Euler tractability diagnostics")
    _add_common(p)
    p.set_defaults(func=cmd_tract)

    p = sub.add_parser("report", help="render a results table")
    p.add_argument("results", help="path to a complexity CSV")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_report)

    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ComputeError, TooLarge, CapExceeded) as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return 3
    except TensoracError as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
