"""Command-line front end: ``parsidict <command> [--config FILE] [flags]``.

Commands: synth, ingest, train, encode, eval, ablate, sweep.  A config file
holds flat ``key=value`` lines (``#`` comments) whose keys are the long flag
names with dashes or underscores; flags on the command line win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import formats, hyperparam, ingest, pipeline, solver, synth
from .core import DataMatrix, HyperParams
from .metrics import EvalReport

log = logging.getLogger("parsidict")


class ConfigError(ValueError):
    pass


# -- argument groups ---------------------------------------------------------

def _solver_args(p, lambda_defaults=True):
    p.add_argument("--n-atoms", type=int, default=128)
    p.add_argument("--lambda1", type=float, default=None,
                   help="override the theoretical lambda1")
    p.add_argument("--lambda2", type=float, default=None if lambda_defaults else 1.0)
    p.add_argument("--beta", type=float, default=2.0, help="Beta prior used to initialize R")
    p.add_argument("--T", "--t", dest="T", type=int, default=100)
    p.add_argument("--k-r", type=int, default=10)
    p.add_argument("--k-d", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--usage-threshold", type=float, default=1e-3)
    p.add_argument("--no-reinit", action="store_true", help="keep dead atoms as they are")
    p.add_argument("--norm", choices=["feature", "global", "noise"], default="feature")
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)


def _eval_args(p):
    p.add_argument("--k-encode", type=int, default=500)
    p.add_argument("--clip", choices=["auto", "on", "off"], default="auto",
                   help="clamp denormalized patches to [0,1] before scoring")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parsidict", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a synthetic data set")
    p.add_argument("--out", required=True, help="output PDL1 cache (ground truth next to it)")
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=50.0)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--row-sparsity", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ingest", help="extract patches and write train/test caches")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["cifar100", "cifar10", "pgm", "cache"], default="cifar100")
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--stride", type=int, default=8)
    p.add_argument("--train-count", type=int, default=20000)
    p.add_argument("--test-count", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="learn a dictionary")
    p.add_argument("--train", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--trace-out")
    p.add_argument("--report-out", help="lambda report CSV")
    _solver_args(p)

    p = sub.add_parser("encode", help="sparse-code a cache against a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="PDL1 cache of the n x m codes")
    p.add_argument("--k-r", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("eval", help="score a model on a test cache")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--report-out", required=True)
    p.add_argument("--usage-out")
    p.add_argument("--threshold", type=float, default=1e-3)
    _eval_args(p)

    for name, helptext in (("ablate", "four-way regularizer ablation"),
                           ("sweep", "lambda1 sweep for both regularizer variants")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--train", required=True)
        p.add_argument("--test", required=True)
        p.add_argument("--out", required=True)
        _solver_args(p, lambda_defaults=False)
        _eval_args(p)
        if name == "sweep":
            p.add_argument("--grid", required=True, help="comma list or start:stop:step")
    return ap


# -- config handling ---------------------------------------------------------

def _subparsers(ap):
    for action in ap._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def apply_config(ap, argv):
    """Parse ``argv`` honoring an optional ``--config FILE`` for the command."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return ap.parse_args(rest)
    command = next((tok for tok in rest if not tok.startswith("-")), None)
    subparsers = _subparsers(ap)
    if command not in subparsers:
        return ap.parse_args(rest)
    path = Path(known.config)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    values = formats.parse_key_values(path.read_text(encoding="utf-8"), str(path))
    sp = subparsers[command]
    by_dest = {a.dest: a for a in sp._actions if a.dest != "help"}
    defaults = {}
    for key, raw in values.items():
        dest = key.replace("-", "_")
        if dest == "t":
            dest = "T"
        action = by_dest.get(dest)
        if action is None:
            raise ConfigError(f"{path}: unknown key {key!r} for command {command!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = raw.lower() in ("1", "true", "yes", "on")
        else:
            val = action.type(raw) if action.type else raw
            if action.choices and val not in action.choices:
                raise ConfigError(f"{path}: {key}={raw} not in {sorted(action.choices)}")
            defaults[dest] = val
        action.required = False
    sp.set_defaults(**defaults)
    return ap.parse_args(rest)


def _need_file(path, what):
    if not Path(path).is_file():
        raise FileNotFoundError(f"{what} not found: {path}")


def _out_ok(*paths):
    for p in paths:
        if p is None:
            continue
        parent = Path(p).resolve().parent
        parent.mkdir(parents=True, exist_ok=True)


# -- helpers -----------------------------------------------------------------

def _solver_config(args) -> solver.SolverConfig:
    hp = HyperParams(lambda1=args.lambda1 if args.lambda1 is not None else 0.1,
                     lambda2=args.lambda2 if args.lambda2 is not None else 1.0,
                     beta=args.beta, T=args.T, k_r=args.k_r, k_d=args.k_d)
    return solver.SolverConfig(n_atoms=args.n_atoms, hp=hp, usage_threshold=args.usage_threshold,
                               tol=args.tol, reinit_dead_atoms=not args.no_reinit)


def _load_train(args):
    raw = DataMatrix(formats.read_cache(args.train))
    X = ingest.normalize(raw, mode=args.norm, noise_sigma=args.noise_sigma)
    in_unit = bool(raw.values.min() >= 0.0 and raw.values.max() <= 1.0)
    return X, in_unit


def _clip(choice, in_unit):
    if choice == "on" or (choice == "auto" and in_unit):
        return (0.0, 1.0)
    return None


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- commands ----------------------------------------------------------------

def cmd_synth(args):
    _out_ok(args.out)
    cfg = synth.SynthConfig(d=args.d, n=args.n, m=args.m, beta=args.beta, gamma=args.gamma,
                            delta=args.delta, sigma_noise=args.noise_sigma, seed=args.seed,
                            row_sparsity=args.row_sparsity)
    data = synth.generate(cfg)
    formats.write_cache(args.out, data.X.values)
    stem = str(Path(args.out).with_suffix(""))
    formats.write_ground_truth(stem + ".truth", data.D_true.atoms, data.R_true.values, data.z)
    print(f"samples {args.m} features {args.d} atoms {args.n}")


def cmd_ingest(args):
    if args.format == "pgm":
        if not Path(args.input).is_dir():
            raise FileNotFoundError(f"input directory not found: {args.input}")
    else:
        _need_file(args.input, "input")
    _out_ok(args.train_out, args.test_out)
    pcfg = ingest.PatchConfig(patch_size=args.patch_size, stride=args.stride,
                              train_count=args.train_count, test_count=args.test_count,
                              seed=args.seed)
    if args.format == "cache":
        X = DataMatrix(formats.read_cache(args.input))
    else:
        imgs = (ingest.load_gray_images(args.input) if args.format == "pgm"
                else ingest.load_cifar_binary(args.input, args.format))
        X = ingest.extract_patches(imgs, pcfg)
    train, test = ingest.split(X, pcfg)
    formats.write_cache(args.train_out, train.values)
    formats.write_cache(args.test_out, test.values)
    print(f"patches {X.m} train {train.m} test {test.m}")


def cmd_train(args):
    _need_file(args.train, "train cache")
    _out_ok(args.model_out, args.trace_out, args.report_out)
    X, in_unit = _load_train(args)
    cfg = _solver_config(args)
    result, report = pipeline.train(X, cfg, args.seed, lambda1=args.lambda1, lambda2=args.lambda2)
    extra = {"seed": args.seed, "n_iter": result.n_iter, "pixel_clip": int(in_unit),
             "norm": args.norm}
    formats.write_model(args.model_out, result.D, result.mu, result.sigma, result.hp, extra)
    if args.trace_out:
        formats.write_trace(args.trace_out, result.trace)
    if report is not None:
        if args.report_out:
            formats.write_csv(args.report_out, report.csv_header(), [report.csv_row()])
        print(report.text())
    t = result.trace
    print(f"atoms {result.D.n} iterations {result.n_iter} objective {t.total[-1]:.6g} "
          f"active {t.active_atoms[-1]}")


def _load_model(path):
    _need_file(path, "model")
    D, mu, sigma, meta = formats.read_model(path)
    return D, mu, sigma, formats.hp_from_meta(meta), meta


def cmd_encode(args):
    D, mu, sigma, hp, _ = _load_model(args.model)
    _need_file(args.data, "data cache")
    _out_ok(args.out)
    X = ingest.apply_normalization(DataMatrix(formats.read_cache(args.data)), mu, sigma)
    R = solver.encode(X, D, hp, k_r=args.k_r, tol=args.tol)
    formats.write_cache(args.out, R.values)
    print(f"codes {R.n}x{R.m}")


def cmd_eval(args):
    D, mu, sigma, hp, meta = _load_model(args.model)
    _need_file(args.test, "test cache")
    _out_ok(args.report_out, args.usage_out)
    X = ingest.apply_normalization(DataMatrix(formats.read_cache(args.test)), mu, sigma)
    clip = _clip(args.clip, meta.get("pixel_clip", "1") == "1")
    ev = pipeline.evaluate_model(D, hp, X, args.k_encode, args.threshold, clip)
    formats.write_csv(args.report_out, EvalReport.HEADER, [ev.report.csv_row()])
    if args.usage_out:
        formats.write_usage(args.usage_out, ev.report.usage_freq)
    r = ev.report
    print(f"rmse {r.rmse:.6g} psnr {r.psnr_db:.4g} ssim {r.ssim:.4g} active {r.active_atoms}")


ABLATE_COLUMNS = ["config", "lambda1", "lambda2", "rmse", "psnr", "ssim", "active_atoms",
                  "seed", "T", "k_r", "k_d"]
SWEEP_COLUMNS = ["variant", "lambda1", "lambda2", "rmse", "psnr", "ssim", "active_atoms",
                 "fit_error", "l_data", "l_model", "mdl_total", "theoretical"]


def _load_pair(args):
    _need_file(args.train, "train cache")
    _need_file(args.test, "test cache")
    _out_ok(args.out)
    X, in_unit = _load_train(args)
    Xt = ingest.apply_normalization(DataMatrix(formats.read_cache(args.test)), X.mu, X.sigma)
    return X, Xt, _clip(args.clip, in_unit)


def cmd_ablate(args):
    X, Xt, clip = _load_pair(args)
    cfg = _solver_config(args)
    rows, report = pipeline.run_ablation(X, Xt, cfg, args.seed, lambda1=args.lambda1,
                                         lambda2=args.lambda2, k_encode=args.k_encode,
                                         threshold=args.usage_threshold, clip=clip)
    formats.write_csv(args.out, ABLATE_COLUMNS, [[_fmt(r[c]) for c in ABLATE_COLUMNS] for r in rows])
    for r in rows:
        print(f"{r['config']:<24} rmse {r['rmse']:.6g} active {r['active_atoms']}")


def parse_grid(text: str):
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_sweep(args):
    grid = parse_grid(args.grid)
    X, Xt, clip = _load_pair(args)
    cfg = _solver_config(args)
    report, _ = hyperparam.theoretical_lambdas(X, cfg, args.seed)
    rows = pipeline.run_sweep(X, Xt, cfg, grid, args.seed, lambda2=args.lambda2,
                              theoretical_lambda1=report.lambda1_theoretical,
                              k_encode=args.k_encode, threshold=args.usage_threshold, clip=clip)
    formats.write_csv(args.out, SWEEP_COLUMNS, [[_fmt(r[c]) for c in SWEEP_COLUMNS] for r in rows])
    print(f"rows {len(rows)} theoretical lambda1 {report.lambda1_theoretical:.6g}")


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "train": cmd_train, "encode": cmd_encode,
            "eval": cmd_eval, "ablate": cmd_ablate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = apply_config(ap, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args)
    except SystemExit:
        raise
    except Exception as exc:  # one machine-parsable line, nonzero exit
        msg = str(exc).replace("\n", " ")
        print(f"parsidict: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
