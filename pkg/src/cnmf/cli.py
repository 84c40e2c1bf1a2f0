"""Command-line front end: generate instances, fit, benchmark, score.

Exit codes: 0 on success, 1 when an algorithm fails (locator, solver or
generator), 2 for usage and I/O errors. Every command is deterministic given
its config and seeds; the benchmark grid derives all randomness from
(master seed, cell index) so results never depend on worker scheduling.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import IterOptions, anls_fit, mult_fit
from .lecs import LecsConfig, lecs_fit
from .locate import LocateError
from .nnls import NnlsError
from .report import FitReport
from .rng import DOMAIN_BENCH, derive_seed
from .similarity import perm_score
from .synth import (
    GenerationError,
    NoiseSpec,
    SynthConfig,
    add_noise,
    gen_separable,
    noise_grid,
)
from . import io as cio

__all__ = ["main", "entry"]

FIT_ALGS = ("lecs", "lecs-pre", "mult", "anls")
BENCH_ALGS = FIT_ALGS + ("lecs-mult", "lecs-anls")
BENCH_HEADER = "noise,beta,trial,alg,score,rel_mse,seconds,chosen_t"
DEFAULT_BENCH_ALGS = ["lecs", "lecs-pre", "mult", "lecs-mult"]

_ALG_FAILURES = (LocateError, NnlsError, GenerationError)


def _fail_usage(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must contain a JSON object")
    return data


# ----------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    cfg = _load_json(args.config) if args.config else {}
    for name in ("N", "T", "K", "L"):
        flag = getattr(args, name)
        if flag is not None:
            cfg[name] = flag
    if args.p is not None:
        cfg["p"] = args.p
    if args.seed is not None:
        cfg["seed"] = args.seed
    missing = [name for name in ("N", "T", "K", "L") if name not in cfg]
    if missing:
        return _fail_usage(f"missing required config field(s): {', '.join(missing)}")

    config = SynthConfig(
        N=int(cfg["N"]),
        T=int(cfg["T"]),
        K=int(cfg["K"]),
        L=int(cfg["L"]),
        p=float(cfg.get("p", 0.75)),
        seed=int(cfg.get("seed", 0)),
    )
    noise_cfg = cfg.get("noise")
    if args.noise_kind is not None:
        noise_cfg = {
            "kind": args.noise_kind,
            "beta": args.beta if args.beta is not None else (noise_cfg or {}).get("beta"),
            "seed": args.noise_seed
            if args.noise_seed is not None
            else (noise_cfg or {}).get("seed", 0),
        }
    noise = None
    if noise_cfg is not None:
        if noise_cfg.get("beta") is None:
            return _fail_usage("noise requested without a beta value")
        noise = NoiseSpec(
            kind=str(noise_cfg["kind"]),
            beta=float(noise_cfg["beta"]),
            seed=int(noise_cfg.get("seed", 0)),
        )

    gt = gen_separable(config)
    noisy = add_noise(gt.x, noise) if noise is not None else None
    cio.write_ground_truth(args.out, gt, noisy=noisy, noise=noise)
    print(f"wrote instance to {args.out} (delta={gt.delta:.4g})")
    return 0


# ----------------------------------------------------------------- fit


def _lecs_threshold(args):
    if args.t is not None:
        return args.t
    if args.t_grid:
        return [float(v) for v in args.t_grid.split(",") if v.strip()]
    return None  # automatic sweep (also what --t-sweep selects)


def cmd_fit(args) -> int:
    x = cio.read_matrix_csv(args.matrix)
    out = Path(args.out)
    if args.alg in ("lecs", "lecs-pre"):
        if args.init:
            return _fail_usage("--init applies to the iterative fitters only")
        config = LecsConfig(
            k=args.K,
            l=args.L,
            threshold=_lecs_threshold(args),
            locator="spa-conic" if args.alg == "lecs" else "spa-preconditioned",
        )
        model, report = lecs_fit(x, config)
    else:
        init = cio.read_model(args.init) if args.init else None
        opts = IterOptions(
            max_iterations=args.iters, seed=args.seed, record_trace=True
        )
        fit = mult_fit if args.alg == "mult" else anls_fit
        model, report = fit(x, args.K, args.L, opts, init=init)

    out.mkdir(parents=True, exist_ok=True)
    cio.write_model(out, model)
    cio.write_report(out / "report.json", report)
    if not args.no_figures:
        from . import figures

        figures.factors_figure(model, out / "factors.png")
        if report.loss_trace:
            figures.loss_figure(report.loss_trace, out / "loss.png")
    print(f"rel_mse={report.rel_mse:.6g} -> {out}")
    return 0


# ----------------------------------------------------------------- bench


def _bench_config(args) -> dict:
    cfg = _load_json(args.config) if args.config else {}
    out = {
        "N": int(cfg.get("N", 100)),
        "T": int(cfg.get("T", 250)),
        "K": int(cfg.get("K", 3)),
        "L": int(cfg.get("L", 5)),
        "p": float(cfg.get("p", 0.75)),
        "kinds": list(cfg.get("noiseKinds", ["uniform", "gaussian", "exponential"])),
        "betas": [float(b) for b in cfg.get("betas", noise_grid())],
        "trials": int(cfg.get("trials", 10)),
        "algs": list(cfg.get("algorithms", DEFAULT_BENCH_ALGS)),
        "master_seed": int(cfg.get("masterSeed", 0)),
        "mult_iters": int(cfg.get("multIters", 200)),
        "anls_iters": int(cfg.get("anlsIters", 15)),
        "record_seconds": bool(cfg.get("recordSeconds", False)),
    }
    if args.trials is not None:
        out["trials"] = args.trials
    if args.master_seed is not None:
        out["master_seed"] = args.master_seed
    if args.kinds:
        out["kinds"] = [k.strip() for k in args.kinds.split(",") if k.strip()]
    if args.betas:
        out["betas"] = [float(b) for b in args.betas.split(",") if b.strip()]
    if args.algs:
        out["algs"] = [a.strip() for a in args.algs.split(",") if a.strip()]
    if args.record_seconds:
        out["record_seconds"] = True
    bad = [a for a in out["algs"] if a not in BENCH_ALGS]
    if bad:
        raise ValueError(f"unknown algorithm(s) {bad}; choose from {BENCH_ALGS}")
    return out


def _bench_cell(payload: dict) -> dict:
    """One benchmark grid cell; runs in a worker process."""
    started = time.perf_counter()
    alg = payload["alg"]
    k, l = payload["K"], payload["L"]
    xn = payload["xn"]
    score = math.nan
    rel = math.nan
    chosen = None
    try:
        if alg in ("lecs", "lecs-pre"):
            locator = "spa-conic" if alg == "lecs" else "spa-preconditioned"
            model, rep = lecs_fit(xn, LecsConfig(k=k, l=l, locator=locator))
            chosen = rep.chosen_t
        elif alg in ("mult", "anls"):
            opts = IterOptions(
                max_iterations=payload["iters"],
                seed=payload["alg_seed"],
                record_trace=False,
            )
            fit = mult_fit if alg == "mult" else anls_fit
            model, rep = fit(xn, k, l, opts)
        else:  # lecs-mult / lecs-anls: warm-start a baseline from the pipeline
            lecs_model, lecs_rep = lecs_fit(xn, LecsConfig(k=k, l=l))
            chosen = lecs_rep.chosen_t
            opts = IterOptions(
                max_iterations=payload["iters"],
                seed=payload["alg_seed"],
                record_trace=False,
            )
            fit = mult_fit if alg.endswith("mult") else anls_fit
            model, rep = fit(xn, k, l, opts, init=lecs_model)
        rel = rep.rel_mse
        score = perm_score(payload["h_true"], model.h)[0]
    except _ALG_FAILURES:
        pass  # recorded as NaN, the grid keeps going
    seconds = time.perf_counter() - started if payload["record_seconds"] else math.nan
    return {
        "noise": payload["kind"],
        "beta": payload["beta"],
        "trial": payload["trial"],
        "alg": alg,
        "score": score,
        "rel_mse": rel,
        "seconds": seconds,
        "chosen_t": chosen,
    }


def _worker_count(n_cells: int) -> int:
    workers = os.cpu_count() or 1
    cap = os.environ.get("CNMF_THREADS")
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, min(workers, n_cells))


def _fmt_field(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def cmd_bench(args) -> int:
    cfg = _bench_config(args)
    master = cfg["master_seed"]
    synth = {k: cfg[k] for k in ("N", "T", "K", "L", "p")}

    instances = {}
    for trial in range(cfg["trials"]):
        seed = derive_seed(master, DOMAIN_BENCH, 0, trial)
        instances[trial] = gen_separable(SynthConfig(seed=seed, **synth))

    kind_ids = {k: i for i, k in enumerate(sorted(cfg["kinds"]))}
    beta_ids = {b: i for i, b in enumerate(sorted(cfg["betas"]))}
    cells = sorted(
        (kind, beta, trial, alg)
        for kind in cfg["kinds"]
        for beta in cfg["betas"]
        for trial in range(cfg["trials"])
        for alg in cfg["algs"]
    )

    def payloads():
        for kind, beta, trial, alg in cells:
            gt = instances[trial]
            noise_seed = derive_seed(
                master, DOMAIN_BENCH, 1, kind_ids[kind], beta_ids[beta], trial
            )
            xn = add_noise(gt.x, NoiseSpec(kind=kind, beta=beta, seed=noise_seed))
            yield {
                "kind": kind,
                "beta": beta,
                "trial": trial,
                "alg": alg,
                "K": cfg["K"],
                "L": cfg["L"],
                "xn": xn,
                "h_true": gt.model.h,
                "iters": cfg["mult_iters"] if "mult" in alg else cfg["anls_iters"],
                "alg_seed": derive_seed(
                    master,
                    DOMAIN_BENCH,
                    2,
                    kind_ids[kind],
                    beta_ids[beta],
                    trial,
                    BENCH_ALGS.index(alg),
                ),
                "record_seconds": cfg["record_seconds"],
            }

    workers = _worker_count(len(cells))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_cell, payloads()))
    else:
        rows = [_bench_cell(p) for p in payloads()]

    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    lines = [BENCH_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                [
                    row["noise"],
                    repr(float(row["beta"])),
                    str(row["trial"]),
                    row["alg"],
                    _fmt_field(row["score"]),
                    _fmt_field(row["rel_mse"]),
                    _fmt_field(row["seconds"]),
                    _fmt_field(row["chosen_t"]),
                ]
            )
        )
    out.write_text("\n".join(lines) + "\n")
    if not args.no_figures:
        from . import figures

        figures.bench_figures(rows, out.parent if str(out.parent) else ".")
    print(f"wrote {len(rows)} rows to {out}")
    return 0


# ----------------------------------------------------------------- score


def cmd_score(args) -> int:
    h_true = cio.read_matrix_csv(args.h_true)
    h_est = cio.read_matrix_csv(args.h_est)
    if h_true.shape != h_est.shape:
        return _fail_usage(
            f"shape mismatch: {h_true.shape} vs {h_est.shape}"
        )
    score, perm = perm_score(h_true, h_est)
    print(json.dumps({"score": score, "permutation": list(perm)}))
    return 0


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cnmf",
        description="Convolutive NMF: separability-based pipeline, baselines "
        "and a reproducible benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic instance directory")
    p_gen.add_argument("--config", help="JSON config (N, T, K, L, p, seed, noise)")
    p_gen.add_argument("--out", required=True, help="output directory")
    for name in ("N", "T", "K", "L"):
        p_gen.add_argument(f"--{name}", type=int)
    p_gen.add_argument("--p", type=float)
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--noise-kind", choices=("uniform", "gaussian", "exponential"))
    p_gen.add_argument("--beta", type=float)
    p_gen.add_argument("--noise-seed", type=int)
    p_gen.set_defaults(func=cmd_gen)

    p_fit = sub.add_parser("fit", help="fit a CSV matrix with one algorithm")
    p_fit.add_argument("matrix", help="input matrix CSV")
    p_fit.add_argument("--alg", required=True, choices=FIT_ALGS)
    p_fit.add_argument("--K", type=int, required=True)
    p_fit.add_argument("--L", type=int, required=True)
    p_fit.add_argument("--t", type=float, help="fixed locator threshold")
    p_fit.add_argument(
        "--t-sweep",
        action="store_true",
        help="sweep thresholds derived from column norms (default when no --t)",
    )
    p_fit.add_argument("--t-grid", help="comma-separated explicit threshold grid")
    p_fit.add_argument("--iters", type=int, default=200, help="baseline iterations")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--init", help="model directory for baseline warm starts")
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.add_argument("--no-figures", action="store_true")
    p_fit.set_defaults(func=cmd_fit)

    p_bench = sub.add_parser("bench", help="run the benchmark grid to CSV")
    p_bench.add_argument("--config", help="JSON benchmark config")
    p_bench.add_argument("--out", required=True, help="output CSV path")
    p_bench.add_argument("--trials", type=int)
    p_bench.add_argument("--master-seed", type=int)
    p_bench.add_argument("--kinds", help="comma-separated noise kinds")
    p_bench.add_argument("--betas", help="comma-separated noise levels")
    p_bench.add_argument("--algs", help=f"comma-separated algorithms {BENCH_ALGS}")
    p_bench.add_argument(
        "--record-seconds",
        action="store_true",
        help="store wall times in the seconds column (breaks byte-identical reruns)",
    )
    p_bench.add_argument("--no-figures", action="store_true")
    p_bench.set_defaults(func=cmd_bench)

    p_score = sub.add_parser("score", help="permutation-matched row-cosine score")
    p_score.add_argument("h_true")
    p_score.add_argument("h_est")
    p_score.set_defaults(func=cmd_score)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _ALG_FAILURES as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
