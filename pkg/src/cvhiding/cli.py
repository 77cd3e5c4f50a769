"""Experiment runner: sweeps, separation tables, and the validation suite.

Every run is driven by a resolved configuration (key = value file plus flag
overrides, flags win) whose hash is stamped into the CSV header comment, so
identical configurations reproduce identical output bytes.

Exit codes: 0 success, 2 configuration error, 3 invariant failure,
4 optimizer infeasible.
"""

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import gauss, metrics, thermal
from .optimize import InfeasibleError, OptimizerConfig, ansatz_ppt_sweep, optimize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_INFEASIBLE = 4

DEFAULTS = {
    "s_grid": [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0],
    "sigma": 1.0,
    "epsilon": 0.01,
    "n_copies": 100,
    "seed": 0,
    "samples": 100_000,
    "restarts": 32,
    "tol": 1e-9,
    "delta": 1e-8,
}


class ConfigError(ValueError):
    pass


class InvariantFailure(RuntimeError):
    pass


def parse_config_file(path: str) -> dict:
    """Minimal key = value parser; '#' starts a comment, lists are comma separated."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _parse_grid(text) -> list:
    if isinstance(text, list):
        return [float(x) for x in text]
    items = [part for part in str(text).replace(",", " ").split() if part]
    if not items:
        raise ConfigError("empty grid")
    return [float(x) for x in items]


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(parse_config_file(args.config))
    overrides = {
        "seed": args.seed,
        "sigma": args.sigma,
        "epsilon": args.epsilon,
        "n_copies": args.n_copies,
        "samples": args.samples,
        "restarts": args.restarts,
        "tol": args.tol,
    }
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    if args.s_grid is not None:
        cfg["s_grid"] = args.s_grid
    try:
        cfg["s_grid"] = _parse_grid(cfg["s_grid"])
        cfg["sigma"] = float(cfg["sigma"])
        cfg["epsilon"] = float(cfg["epsilon"])
        cfg["n_copies"] = int(cfg["n_copies"])
        cfg["seed"] = int(cfg["seed"])
        cfg["samples"] = int(cfg["samples"])
        cfg["restarts"] = int(cfg["restarts"])
        cfg["tol"] = float(cfg["tol"])
        cfg["delta"] = float(cfg["delta"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if not cfg["s_grid"]:
        raise ConfigError("s_grid must be nonempty")
    if not (0 < cfg["epsilon"] < 1):
        raise ConfigError("epsilon must lie in (0, 1)")
    if cfg["n_copies"] < 1:
        raise ConfigError("n_copies must be >= 1")
    cfg["experiment"] = args.command
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_csv(path: Path, cfg: dict, header: list, rows: list):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"# config={config_hash(cfg)}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def write_json(path: Path, cfg: dict, summary: dict):
    payload = {"config": cfg, "config_hash": config_hash(cfg), "summary": summary}
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def _out_paths(args, default_stem: str):
    out = Path(args.out) if args.out else Path(f"{default_stem}.csv")
    return out, out.with_suffix(".json")


def _lsq_slope(xs, ys):
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    return float(np.polyfit(xs, ys, 1)[0]) if len(xs) > 1 else float("nan")


def run_mi_sweep(args) -> int:
    cfg = resolve_config(args)
    csv_path, json_path = _out_paths(args, "mi_sweep")
    opt_cfg = OptimizerConfig(restarts=cfg["restarts"], seed=cfg["seed"],
                              feasibility_tol=cfg["tol"], objective="mutual-information")
    rows = []
    for s in cfg["s_grid"]:
        nonlocal_mi = metrics.mutual_information(
            metrics.outcome_covariance(gauss.tmsv_cov(s),
                                       gauss.nonlocal_epr_measurement(cfg["delta"])),
            cfg["sigma"],
        )
        res = optimize(s, cfg["sigma"], constrained=True, cfg=opt_cfg)
        rows.append([s, cfg["sigma"], res.objective_value, nonlocal_mi,
                     res.ppt_margin, res.bona_fide_margin, cfg["seed"]])
    header = ["s", "sigma", "i_glocc", "i_nonlocal", "ppt_margin", "bona_fide_margin", "seed"]
    write_csv(csv_path, cfg, header, rows)
    ss = [r[0] for r in rows]
    write_json(json_path, cfg, {
        "glocc_slope": _lsq_slope(ss, [r[2] for r in rows]),
        "nonlocal_slope": _lsq_slope(ss, [r[3] for r in rows]),
        "gap_at_max_s": rows[-1][3] - rows[-1][2],
    })
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def run_tv_sweep(args) -> int:
    cfg = resolve_config(args)
    csv_path, json_path = _out_paths(args, "tv_sweep")
    opt_cfg = OptimizerConfig(restarts=cfg["restarts"], seed=cfg["seed"],
                              feasibility_tol=cfg["tol"], objective="tv-sign-scheme")
    rows = []
    for s in cfg["s_grid"]:
        nl = metrics.tv_sign_scheme(gauss.nonlocal_epr_measurement(cfg["delta"]), s,
                                    cfg["sigma"])
        res = optimize(s, cfg["sigma"], constrained=True, cfg=opt_cfg)
        glocc = metrics.tv_sign_scheme(res.v_pi_star, s, cfg["sigma"])
        rows.append([s, cfg["sigma"], glocc.value, glocc.std_error,
                     nl.value, nl.std_error, cfg["seed"]])
    header = ["s", "sigma", "tv_glocc", "tv_glocc_err", "tv_nonlocal", "tv_nonlocal_err", "seed"]
    write_csv(csv_path, cfg, header, rows)
    write_json(json_path, cfg, {
        "tv_nonlocal_at_max_s": rows[-1][4],
        "tv_glocc_at_max_s": rows[-1][2],
        "separation_at_max_s": rows[-1][4] - rows[-1][2],
    })
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def run_multi_copy(args) -> int:
    cfg = resolve_config(args)
    csv_path, json_path = _out_paths(args, "multi_copy")
    s = cfg["s_grid"][-1]
    opt_cfg = OptimizerConfig(restarts=cfg["restarts"], seed=cfg["seed"],
                              feasibility_tol=cfg["tol"], objective="tv-sign-scheme")
    nonlocal_factor = metrics.tv_sign_scheme(
        gauss.nonlocal_epr_measurement(cfg["delta"]), s, cfg["sigma"]).value
    res = optimize(s, cfg["sigma"], constrained=True, cfg=opt_cfg)
    glocc_factor = metrics.tv_sign_scheme(res.v_pi_star, s, cfg["sigma"]).value
    rows = []
    for n in range(1, cfg["n_copies"] + 1):
        rows.append([n, s, metrics.tv_multi_copy(nonlocal_factor, n),
                     metrics.tv_multi_copy(glocc_factor, n)])
    write_csv(csv_path, cfg, ["n_copies", "s", "tv_nonlocal", "tv_glocc"], rows)
    write_json(json_path, cfg, {
        "s": s,
        "nonlocal_factor": nonlocal_factor,
        "glocc_factor": glocc_factor,
        "glocc_below_0.01_at": next((r[0] for r in rows if r[3] < 0.01), None),
    })
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def run_thermal_separation(args) -> int:
    cfg = resolve_config(args)
    csv_path, json_path = _out_paths(args, "thermal_separation")
    eps, seed = cfg["epsilon"], cfg["seed"]
    ladder = [n for n in (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000) if n < cfg["n_copies"]]
    ladder.append(cfg["n_copies"])
    rows = []
    for n in ladder:
        params = thermal.ThermalParams(eps, n_copies=n)
        povm = thermal.simulate_povm(params, +1, max(cfg["samples"], 1000), seed=seed)
        het = thermal.simulate_gaussian_tv(thermal.sigma_heterodyne(n), n, eps,
                                           n_trials=max(cfg["samples"], 1000), seed=seed + 1)
        epr = thermal.simulate_gaussian_tv(thermal.sigma_epr_homodyne(n), n, eps,
                                           n_trials=max(cfg["samples"], 1000), seed=seed + 2)
        bound = thermal.tv_upper_bound(n, eps)
        rows.append([
            eps, n, thermal.tv_nongaussian(n, eps), min(bound, 1.0), int(bound > 1.0),
            thermal.kl_quadratic(thermal.sigma_heterodyne(n), n, eps),
            thermal.kl_quadratic(thermal.sigma_epr_homodyne(n), n, eps),
            povm.value, povm.std_error, het.value, het.std_error, epr.value, epr.std_error,
        ])
    header = ["epsilon", "n_copies", "tv_nongaussian", "tv_gaussian_bound", "bound_clamped",
              "kl_heterodyne", "kl_epr_homodyne", "tv_povm_emp", "tv_povm_err",
              "tv_heterodyne_emp", "tv_heterodyne_err", "tv_epr_emp", "tv_epr_err"]
    write_csv(csv_path, cfg, header, rows)
    final = rows[-1]
    write_json(json_path, cfg, {
        "epsilon": eps,
        "n_copies": cfg["n_copies"],
        "tv_nongaussian": final[2],
        "tv_gaussian_bound": final[3],
        "gap": final[2] - final[3],
    })
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def _validate_checks(cfg):
    """Yield (name, ok, detail) for every runtime invariant."""
    tol = cfg["tol"]
    rng = np.random.Generator(np.random.Philox(key=cfg["seed"]))

    epr = gauss.nonlocal_epr_measurement(1e-6)
    report = gauss.is_bona_fide(epr, tol)
    yield "epr_bona_fide", report.ok, f"margins ({report.min_eig:.2e}, {report.min_eig_heisenberg:.2e})"
    ppt = gauss.is_ppt(epr, tol=tol) if report.ok else None
    if ppt is not None:
        yield "epr_ppt_violated", not ppt.ok, f"ppt margin {ppt.violating_eig:+.6f}"

    for name, v in [("vacuum", gauss.heterodyne_measurement()),
                    ("tmsv_s1", gauss.tmsv_cov(1.0)),
                    ("thermal_plus", gauss.thermal_pair_cov(cfg["epsilon"], +1)),
                    ("thermal_minus", gauss.thermal_pair_cov(cfg["epsilon"], -1))]:
        rep = gauss.is_bona_fide(v, tol)
        yield f"bona_fide_{name}", rep.ok, f"margin {rep.min_eig_heisenberg:.2e}"

    saturator = np.exp(-2.0 * 3.0) * np.eye(4)
    yield "saturator_unphysical", not gauss.is_bona_fide(saturator, tol).ok, "e^{-2s} I must fail"

    agree = True
    for _ in range(100):
        v = gauss.random_bona_fide_cov(rng)
        verdict_eig = gauss.is_ppt(v, tol=tol).ok
        tvt = gauss.partial_transpose(v)
        verdict_sym = bool(gauss.symplectic_eigenvalues(tvt).min() >= 1.0 - tol)
        agree &= verdict_eig == verdict_sym
    yield "ppt_dual_method_agreement", agree, "hermitian eigensolve vs symplectic spectrum"

    sweep = ansatz_ppt_sweep([1.0, 0.5, 0.1, 0.01])
    match = max(row["formula_eig_distance"] for row in sweep)
    yield "ppt_formula_match", match <= 1e-9, f"max eigenvalue distance {match:.2e}"

    quad = metrics.tv_sign_scheme(gauss.heterodyne_measurement(), 0.0, cfg["sigma"])
    mc = metrics.tv_monte_carlo_oracle(gauss.heterodyne_measurement(), 0.0, cfg["sigma"],
                                       n_samples=200_000, seed=cfg["seed"])
    pull = abs(quad.value - mc.value) / max(mc.std_error, 1e-12)
    yield "tv_quadrature_vs_mc", pull <= 4.0, f"pull {pull:.2f} sigma"

    params = thermal.ThermalParams(cfg["epsilon"], n_copies=20)
    total = sum(thermal.counts_prob(k, m, params)
                for k in range(21) for m in range(21 - k))
    yield "counts_normalisation", abs(total - 1.0) <= 1e-10, f"sum {total:.12f}"

    n, eps = cfg["n_copies"], cfg["epsilon"]
    het = thermal.kl_quadratic(thermal.sigma_heterodyne(n), n, eps)
    epr_kl = thermal.kl_quadratic(thermal.sigma_epr_homodyne(n), n, eps)
    sat = thermal.kl_quadratic(thermal.sigma_saturator(n), n, eps)
    yield "kl_heterodyne", abs(het - n * eps**2) <= 1e-12 * n, f"{het:.3e} vs {n * eps ** 2:.3e}"
    yield "kl_epr_homodyne", abs(epr_kl - 2 * n * eps**2) <= 1e-8 * 2 * n * eps**2, f"{epr_kl:.3e}"
    yield "kl_saturator", abs(sat - thermal.kl_upper_bound(n, eps)) <= 1e-10, f"{sat:.3e}"

    ceiling = thermal.kl_upper_bound(8, eps) + 1e-12
    ok_bound = True
    for i in range(100):
        g = rng.normal(size=(32, 32))
        ok_bound &= thermal.kl_quadratic(g @ g.T, 8, eps) <= ceiling
    yield "kl_bound_chain", ok_bound, "random PSD measurements stay below 4 N eps^2"


def run_validate(args) -> int:
    cfg = resolve_config(args)
    failures = 0
    try:
        for name, ok, detail in _validate_checks(cfg):
            status = "PASS" if ok else "FAIL"
            print(f"[{status}] {name}: {detail}")
            failures += 0 if ok else 1
    except (ValueError, RuntimeError) as exc:
        print(f"[FAIL] check aborted: {exc}")
        failures += 1
    print(f"{failures} failure(s)")
    if failures:
        raise InvariantFailure(f"{failures} invariant check(s) failed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvhiding",
                                     description="Gaussian data-hiding experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in [("mi-sweep", run_mi_sweep), ("tv-sweep", run_tv_sweep),
                       ("multi-copy", run_multi_copy),
                       ("thermal-separation", run_thermal_separation),
                       ("validate", run_validate)]:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output CSV path (JSON summary placed next to it)")
        p.add_argument("--samples", type=int)
        p.add_argument("--s-grid", dest="s_grid", help="comma separated squeezing values")
        p.add_argument("--sigma", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--n-copies", dest="n_copies", type=int)
        p.add_argument("--restarts", type=int)
        p.add_argument("--tol", type=float)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except InfeasibleError as exc:
        print(f"optimizer infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
