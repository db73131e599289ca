"""Command-line surface: train, predict, bounds, rademacher, verify, demo.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric or
infeasibility error, 4 verification failure.  All reports are byte-stable
under a fixed config and seed; timestamps live in run_meta.json only.
"""

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import complexity, figures, reports
from .config import RunConfig
from .constraints import ConstraintParams
from .data import Dataset, load_dataset, load_points_csv, load_points_svmlight
from .errors import (
    CkdrError,
    ConfigError,
    DataError,
    NumericError,
    VerificationError,
)
from .kernels import KernelSpec
from .model import evaluate, load_model, predict, save_model
from .oracle import ExplicitFeatureMap, explicit_covariance, explicit_projection_norm
from .spectral import build_bundle, load_bundle, projected_sigma_norm, save_bundle
from .trainer import TrainConfig, train


def _outdir(cfg):
    out = Path(cfg.output_dir())
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cached_bundle(path, specs, X):
    """Reuse cached eigenpairs when they match the anchor sample."""
    if path.exists():
        try:
            return load_bundle(path, specs, X)
        except (DataError, KeyError, ValueError):
            pass
    bundle = build_bundle(specs, X)
    save_bundle(bundle, path)
    return bundle


def cmd_train(args):
    cfg = RunConfig.parse(args.config)
    labeled, unlabeled, fmt = cfg.dataset_paths()
    ds = load_dataset(labeled, unlabeled, fmt)
    kernels = cfg.kernels()
    params = cfg.constraint_params()
    tc = cfg.train_config()
    out = _outdir(cfg)
    bundle = _cached_bundle(out / "bundle_u.json", kernels, ds.U)
    mdl, trace = train(ds.X, ds.y, ds.U, kernels, params, tc, bundle=bundle)
    save_model(mdl, out / "model.json")
    trace.to_csv(out / "trace.csv")
    err = float(np.mean(predict(mdl, ds.X) != ds.y))
    reports.write_json(
        {
            "training_error": err,
            "initial_objective": trace.initial_objective,
            "final_objective": trace.rounds[-1].objective if trace.rounds else trace.initial_objective,
            "rounds": len(trace.rounds),
            "stop_reason": trace.stop_reason,
            "seed": tc.seed,
        },
        out / "train_summary.json",
    )
    reports.write_run_metadata(out / "run_meta.json", sys.argv)
    if cfg.figures:
        figures.trace_figure(trace, out / "trace.png")
    print(f"trained: error={err:.4f} rounds={len(trace.rounds)} stop={trace.stop_reason}")
    print(f"wrote {out / 'model.json'} and {out / 'trace.csv'}")
    return 0


def cmd_predict(args):
    mdl = load_model(args.model)
    if args.format == "csv":
        X, _ = load_points_csv(args.data, labeled=args.labeled)
    else:
        X, _ = load_points_svmlight(args.data, labeled=args.labeled, d=mdl.anchor.shape[1])
    scores = np.atleast_1d(evaluate(mdl, X))
    labels = np.where(scores >= 0.0, 1, -1)
    header, rows = reports.predictions_rows(scores, labels)
    reports.write_csv(header, rows, args.out)
    print(f"wrote {args.out} ({len(rows)} predictions)")
    return 0


def cmd_bounds(args):
    cfg = RunConfig.parse(args.config)
    labeled, unlabeled, fmt = cfg.dataset_paths()
    ds = load_dataset(labeled, unlabeled, fmt)
    kernels = cfg.kernels()
    params = cfg.constraint_params()
    out = _outdir(cfg)
    bundle = _cached_bundle(out / "bundle_s.json", kernels, ds.X)
    p, m = bundle.p, bundle.m
    if args.model:
        mdl = load_model(args.model)
        rho = cfg.get("bounds.rho", 1.0)
        report = complexity.generalization_bound(mdl, ds.X, ds.y, rho, params, p, m, bundle=bundle)
    else:
        report = complexity.complexity_bound(params, p, m, bundle=bundle)
    report = _with_lower_bound(report, params, m)
    reports.write_json({"bounds": report, "seed": cfg.seed}, out / "bounds.json")
    header, rows = reports.bound_report_rows(report)
    reports.write_csv(header, rows, out / "bounds.csv")
    reports.write_run_metadata(out / "run_meta.json", sys.argv)
    if cfg.figures:
        figures.bounds_figure(report, None, out / "bounds.png")
    print(f"bound total={report.total:.6g} (term1={report.term1:.6g}, term2={report.term2:.6g})")
    print(f"wrote {out / 'bounds.json'}")
    return 0


def _with_lower_bound(report, params, m):
    return replace(report, lower_bound_value=complexity.lower_bound_value(params.lambda_r, m))


def cmd_rademacher(args):
    cfg = RunConfig.parse(args.config)
    labeled, unlabeled, fmt = cfg.dataset_paths()
    ds = load_dataset(labeled, unlabeled, fmt)
    kernels = cfg.kernels()
    params = cfg.constraint_params()
    out = _outdir(cfg)
    bundle = _cached_bundle(out / "bundle_s.json", kernels, ds.X)
    est = complexity.estimate_rademacher(
        bundle,
        params,
        n_draws=cfg.get("rademacher.draws", 10000),
        seed=cfg.seed,
        starts=cfg.get("rademacher.starts", 16),
        probe_draws=cfg.get("rademacher.probe_draws", 32),
        keep_draws=True,
    )
    payload = {
        "estimate": est.estimate,
        "stderr": est.stderr,
        "n_draws": est.n_draws,
        "method": est.method,
        "lower_estimate": est.lower_estimate,
        "m": bundle.m,
        "params": params,
        "seed": cfg.seed,
    }
    reports.write_json(payload, out / "rademacher.json")
    header, rows = reports.rademacher_rows(est, params, bundle.m)
    reports.write_csv(header, rows, out / "rademacher.csv")
    reports.write_run_metadata(out / "run_meta.json", sys.argv)
    if cfg.figures:
        figures.rademacher_figure(est.per_draw, est.estimate, out / "rademacher.png")
    print(f"rademacher estimate={est.estimate:.6g} stderr={est.stderr:.3g} method={est.method}")
    print(f"wrote {out / 'rademacher.json'}")
    return 0


# ---------------------------------------------------------------------------
# verification suite


def _check_eigengap():
    for eps in (1e-6, 0.5, 1.0):
        lhs, rhs = complexity.eigengap_tightness(eps)
        if abs(lhs - 2.0) > 1e-12 or abs(rhs - 2.0) > 1e-12:
            return False, f"eps={eps}: lhs={lhs!r} rhs={rhs!r}"
    return True, "lhs = rhs = 2 for all tested eps"


def _check_lower_bound_sandwich(draws, seed):
    ds, spec, params = complexity.lower_bound_construct(32, 4, 0.4)
    bundle = build_bundle([spec], ds.U)
    est = complexity.estimate_rademacher(bundle, params, n_draws=draws, seed=seed)
    target = complexity.lower_bound_value(params.lambda_r, ds.m)
    ok = est.estimate + 3 * est.stderr >= target
    return ok, f"estimate={est.estimate:.6f} (+3se) vs sqrt(lambda/2m)={target:.6f}"


def _check_khintchine(seed):
    exact, _ = complexity.khintchine_check(np.array([1.0, 1.0]) / math.sqrt(2.0), 0, 0, exhaustive=True)
    if abs(exact - complexity.KHINTCHINE_CONSTANT) > 1e-10:
        return False, f"exact two-coordinate case gave {exact!r}"
    rng = np.random.default_rng(seed)
    for m in (4, 16, 64):
        for _ in range(10):
            v = rng.standard_normal(m)
            v /= np.linalg.norm(v)
            est, se = complexity.khintchine_check(v, 20000, seed)
            if est < complexity.KHINTCHINE_CONSTANT - 3 * se:
                return False, f"m={m}: estimate {est:.4f} below 2^-1/2 - 3se"
    return True, "E|v.sigma| >= 2^-1/2 - 3se on all random unit vectors"


def _check_massart(seed):
    rng = np.random.default_rng(seed)
    for p, m in ((1, 6), (2, 8), (3, 12)):
        X = rng.standard_normal((m, 3))
        specs = [KernelSpec(kind="linear"), KernelSpec(kind="gaussian", bandwidth=2.0),
                 KernelSpec(kind="polynomial", degree=2)][:p]
        bundle = build_bundle(specs, X)
        est, se, bound = complexity.massart_check(bundle, 20000, seed)
        if est > bound + 3 * se:
            return False, f"p={p} m={m}: estimate {est:.4f} above bound {bound:.4f}"
        if m <= 8:
            exact, _, bound = complexity.massart_check(bundle, 0, 0, exhaustive=True)
            if exact > bound:
                return False, f"p={p} m={m}: exact value {exact:.4f} above bound {bound:.4f}"
    return True, "max-correlation estimates stay below sqrt(2 log(2pm))"


def _check_spectral_identity(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        m, d = int(rng.integers(3, 10)), int(rng.integers(1, 5))
        X = rng.standard_normal((m, d))
        spec = KernelSpec(kind="linear", normalize=False)
        bundle = build_bundle([spec], X)
        cov = explicit_covariance(ExplicitFeatureMap(spec, d), X)
        ref = np.sort(np.linalg.eigvalsh(cov))[::-1]
        n = min(m, d)
        if np.max(np.abs(bundle.eigenvalues[0][:n] - ref[:n])) > 1e-8 * max(ref[0], 1e-300):
            return False, "normalized-Gram eigenvalues disagreed with the covariance spectrum"
    return True, "normalized-Gram eigenvalues match covariance spectra"


def _check_projection_oracle(seed):
    rng = np.random.default_rng(seed)
    for _ in range(25):
        p = int(rng.integers(1, 4))
        m = int(rng.integers(3, 13))
        sizes = rng.integers(1, 3, size=p)
        d = int(sizes.sum())
        specs, maps, start = [], [], 0
        for k in range(p):
            coords = tuple(range(start, start + sizes[k]))
            start += sizes[k]
            spec = KernelSpec(kind="coordinate-linear", coords=coords, normalize=False)
            specs.append(spec)
            maps.append(ExplicitFeatureMap(spec, d))
        X = rng.standard_normal((m, d))
        bundle = build_bundle(specs, X)
        mu = rng.uniform(0.2, 1.0, size=p)
        sigma = rng.integers(0, 2, size=m) * 2.0 - 1.0
        for r in range(1, bundle.total_rank + 1):
            fast = projected_sigma_norm(bundle, mu, r, sigma)
            ref = explicit_projection_norm(maps, mu, r, sigma, X)
            if abs(fast - ref) > 1e-8 * max(abs(ref), 1e-12):
                return False, f"mismatch at p={p} m={m} r={r}: {fast!r} vs {ref!r}"
    return True, "fast projected norm matches the explicit-feature oracle"


def _check_concentration(trials, seed):
    gen = complexity.GaussianGenerator(variances=(0.40, 0.25, 0.12, 0.08, 0.05, 0.03))
    specs = [KernelSpec(kind="linear", normalize=False)]
    reps, slope = complexity.concentration_suite(gen, specs, r=2, m_list=(50, 100, 200, 400),
                                                 trials=trials, delta=0.05, seed=seed)
    for rep in reps:
        if rep.satisfaction_rate < 1.0 - rep.delta:
            return False, f"m={rep.m}: satisfaction {rep.satisfaction_rate:.3f} < 0.95", reps, slope
    if not -0.7 <= slope <= -0.3:
        return False, f"log-log slope {slope:.3f} outside -0.5 +- 0.2", reps, slope
    return True, f"rate >= 0.95 at every m; slope {slope:.3f}", reps, slope


def cmd_verify(args):
    cfg = RunConfig.parse(args.config)
    seed = cfg.seed
    draws = cfg.get("verify.draws", 20000)
    trials = cfg.get("verify.trials", 200)
    out = _outdir(cfg)
    results = []

    def run(name, fn):
        outcome = fn()
        ok, detail = outcome[0], outcome[1]
        print(f"{'PASS' if ok else 'FAIL'}: {name}: {detail}")
        results.append({"name": name, "ok": bool(ok), "detail": detail})
        return outcome

    run("eigengap tightness", _check_eigengap)
    run("lower-bound sandwich", lambda: _check_lower_bound_sandwich(draws, seed))
    run("khintchine constant", lambda: _check_khintchine(seed + 1))
    run("massart bound", lambda: _check_massart(seed + 2))
    run("spectral identity", lambda: _check_spectral_identity(seed + 3))
    run("projection oracle equivalence", lambda: _check_projection_oracle(seed + 4))
    conc = run("concentration experiment", lambda: _check_concentration(trials, seed + 5))
    reports.write_json({"checks": results, "seed": seed}, out / "verify.json")
    if len(conc) == 4:
        _, _, reps, slope = conc
        header, rows = reports.concentration_rows(reps, slope)
        reports.write_csv(header, rows, out / "concentration.csv")
        if cfg.figures:
            figures.concentration_figure(reps, slope, out / "concentration.png")
    reports.write_run_metadata(out / "run_meta.json", sys.argv)
    failures = [r["name"] for r in results if not r["ok"]]
    if failures:
        raise VerificationError(f"verification failed: {', '.join(failures)}")
    print(f"verification suite passed; wrote {out / 'verify.json'}")
    return 0


# ---------------------------------------------------------------------------
# demo

DEMO_POINTS = np.array([[-2.0, 1.0], [2.0, 1.0], [-2.0, -1.0], [2.0, -1.0]])
DEMO_LABELS = np.array([1, 1, -1, -1])


def cmd_demo(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = Dataset(X=DEMO_POINTS, y=DEMO_LABELS)
    rows = [[int(l)] + list(map(float, x)) for l, x in zip(ds.y, ds.X)]
    reports.write_csv(["label", "x1", "x2"], rows, out / "demo_data.csv")

    # plain pipeline: one fixed linear kernel, unsupervised rank-1 projection
    plain_params = ConstraintParams(r=1, lambda_r=1.0, nu=2.0, delta=0.05)
    plain_cfg = TrainConfig(loss="hinge", mode="coupled", max_rounds=20)
    plain_model, _ = train(ds.X, ds.y, ds.U, [KernelSpec(kind="linear")], plain_params, plain_cfg)
    plain_scores = np.atleast_1d(evaluate(plain_model, ds.X))
    plain_err = float(np.mean(np.where(plain_scores >= 0, 1, -1) != ds.y))

    # coupled pipeline: one kernel per coordinate, mixture learned jointly
    coupled_specs = [
        KernelSpec(kind="coordinate-linear", coords=(1,)),
        KernelSpec(kind="coordinate-linear", coords=(0,)),
    ]
    coupled_params = ConstraintParams(r=1, lambda_r=0.6, nu=8.0, delta=0.05)
    coupled_cfg = TrainConfig(loss="hinge", mode="coupled", max_rounds=20)
    coupled_model, coupled_trace = train(ds.X, ds.y, ds.U, coupled_specs, coupled_params, coupled_cfg)
    coupled_scores = np.atleast_1d(evaluate(coupled_model, ds.X))
    coupled_err = float(np.mean(np.where(coupled_scores >= 0, 1, -1) != ds.y))

    comparison = {
        "plain_training_error": plain_err,
        "coupled_training_error": coupled_err,
        "plain_scores": plain_scores.tolist(),
        "coupled_scores": coupled_scores.tolist(),
        "coupled_rounds": len(coupled_trace.rounds),
    }
    reports.write_json(comparison, out / "comparison.json")
    reports.write_csv(
        ["pipeline", "training_error"],
        [["plain-rank1", plain_err], ["coupled", coupled_err]],
        out / "comparison.csv",
    )
    figures.demo_figure(ds.X, ds.y, plain_scores, coupled_scores, out / "demo.png")
    save_model(coupled_model, out / "demo_model.json")
    print(f"plain rank-1 pipeline training error:  {plain_err:.2f}")
    print(f"coupled pipeline training error:       {coupled_err:.2f}")
    print(f"wrote {out / 'comparison.json'} and {out / 'demo.png'}")
    return 0


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage problems must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="ckdr", description="coupled kernel dimensionality reduction")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a coupled model")
    p_train.add_argument("-c", "--config", required=True)
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="score a dataset with a saved model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--format", choices=("csv", "svmlight"), default="csv")
    p_pred.add_argument("--labeled", action="store_true", help="data file carries a label column")
    p_pred.add_argument("--out", default="predictions.csv")
    p_pred.set_defaults(func=cmd_predict)

    p_bounds = sub.add_parser("bounds", help="compute the complexity/generalization bounds")
    p_bounds.add_argument("-c", "--config", required=True)
    p_bounds.add_argument("--model", default=None)
    p_bounds.set_defaults(func=cmd_bounds)

    p_rad = sub.add_parser("rademacher", help="Monte-Carlo Rademacher estimate")
    p_rad.add_argument("-c", "--config", required=True)
    p_rad.set_defaults(func=cmd_rademacher)

    p_verify = sub.add_parser("verify", help="run the verification suite")
    p_verify.add_argument("-c", "--config", required=True)
    p_verify.set_defaults(func=cmd_verify)

    p_demo = sub.add_parser("demo", help="two-pipeline comparison on the toy geometry")
    p_demo.add_argument("--out", default="demo_out")
    p_demo.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except VerificationError as exc:
        print(f"{exc}", file=sys.stderr)
        return 4
    except CkdrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
