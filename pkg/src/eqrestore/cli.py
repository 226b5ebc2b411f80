"""Config-driven command line: restoration runs, benchmark sweeps,
equivariant-denoising averaging experiments, and the verification suite.

Verbs: restore, bench, denoise-avg, verify.  Flags: --config PATH,
--seed U64, --out DIR, --threads N (EQR_THREADS as fallback).  Outputs
are written under --out with fixed names (restored.pnm, trace.csv,
report.csv, manifest.txt) and are byte-reproducible from the seed.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 numeric
failure (divergence) or failed verification checks.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .buffer import ImageBuffer
from .config import (format_value, get_typed, read_config, serialize_config,
                     validate_keys)
from .denoisers import (BoxDenoiser, Denoiser, EquivariantDenoiser, GaussianMMSE,
                        HuberTV, LinearSmoothing)
from .errors import ConfigError, EqrestoreError, NumericError, ParseError
from .fidelity import (BlurOperator, ProblemSpec, gaussian_problem,
                       make_observation, speckle_problem,
                       super_resolution_operator)
from .kernels import kernel_by_name
from .metrics import psnr, ssim
from .netpbm import read_netpbm, write_netpbm
from .rng import Rng
from .solvers import (RunTrace, SolverConfig, TraceOptions, constant_schedule,
                      linear_sigma_schedule, power_schedule, run)
from .textures import synthetic_texture
from .transforms import TransformLaw, law_from_name
from .verify import CHECKS, reports_to_csv, run_checks

TASKS = ("deblur", "super_resolution", "despeckle", "denoise", "verify")

# Published per-method hyperparameters (delta, sigma, lambda, iterations);
# restoration tasks run the unscaled quadratic fidelity these were tuned for.
_HYPERS = {
    "deblur": {
        "red": (1.5, 7 / 255, 0.15, 400),
        "ered": (1.5, 8 / 255, 0.17, 400),
        "snore": (1.5, 5 / 255, 0.5, 1000),
        "annealed_ered": (1.5, 5 / 255, 0.5, 1500),
        "pnp": (1.0, 4 / 255, 0.53, 400),
        "epnp": (1.0, 4 / 255, 0.53, 400),
        "snopnp": (1.0, 5 / 255, 0.53, 100),
    },
    "super_resolution": {
        "red": (2.0, 11 / 255, 0.07, 200),
        "ered": (2.0, 13 / 255, 0.05, 200),
    },
    "despeckle": {
        "red": (0.01, 8 / 255, 100.0, 100),
        "ered": (0.01, 8 / 255, 100.0, 100),
    },
}

_DEFAULT_NOISE = {"deblur": 5 / 255, "super_resolution": 1 / 255}
_DEFAULT_LAW = {"ered": "flip", "epnp": "flip", "annealed_ered": "flip"}

_COMMON_KEYS = {
    "task", "seed", "out", "input", "threads",
    "kernel.name", "kernel.path", "noise.sigma_y", "noise.looks", "sr.factor",
    "solver.algorithm", "solver.delta", "solver.alpha", "solver.schedule",
    "solver.sigma", "solver.lambda", "solver.iterations",
    "solver.sigma_start", "solver.sigma_end", "solver.segments",
    "law.group", "law.max_shift", "law.sigma",
    "denoiser.kind", "denoiser.c", "denoiser.eps", "denoiser.alpha",
    "denoiser.kernel_std", "denoiser.kernel_path", "denoiser.sigma0",
}
_BENCH_KEYS = _COMMON_KEYS | {"bench.methods", "bench.kernels", "bench.images",
                              "bench.count", "bench.size"}
_DENOISE_KEYS = _COMMON_KEYS | {"denoise_avg.sigmas", "denoise_avg.laws",
                                "denoise_avg.n_draws"}
_VERIFY_KEYS = {"task", "seed", "out", "verify.checks"}




def _stable_key(*parts) -> int:
    """Process-independent 32-bit key for derived seeds (hash() is salted)."""
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=4).digest(), "big")


def table7_defaults(task: str, algorithm: str) -> tuple[float, float, float, int]:
    table = _HYPERS.get(task, {})
    if algorithm in table:
        return table[algorithm]
    if algorithm in _HYPERS["deblur"]:
        return _HYPERS["deblur"][algorithm]
    raise ConfigError(f"no default hyperparameters for algorithm {algorithm!r}")


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def _load_input(cfg: dict, rng: Rng) -> ImageBuffer:
    spec = get_typed(cfg, "input", str, default="synthetic:128")
    if spec.startswith("synthetic"):
        parts = spec.split(":")
        size = int(parts[1]) if len(parts) > 1 else 128
        kind = parts[2] if len(parts) > 2 else "mix"
        return synthetic_texture(size, size, rng.spawn(11), kind=kind)
    return read_netpbm(spec)


def _load_kernel(cfg: dict, default_name: str) -> ImageBuffer:
    if "kernel.path" in cfg:
        return read_netpbm(str(cfg["kernel.path"]))
    return kernel_by_name(get_typed(cfg, "kernel.name", str, default=default_name))


def _build_denoiser(cfg: dict, sigma: float) -> Denoiser:
    kind = get_typed(cfg, "denoiser.kind", str, default="huber_tv")
    sigma0 = get_typed(cfg, "denoiser.sigma0", float, default=25 / 255)
    if sigma0 == 0:
        sigma0 = None
    if kind == "huber_tv":
        return HuberTV(get_typed(cfg, "denoiser.c", float, default=2e-3),
                       get_typed(cfg, "denoiser.eps", float, default=0.05),
                       sigma, sigma0=sigma0)
    if kind == "linear_smoothing":
        if "denoiser.kernel_path" in cfg:
            kern = read_netpbm(str(cfg["denoiser.kernel_path"]))
        else:
            from .kernels import gaussian_kernel
            kern = gaussian_kernel(get_typed(cfg, "denoiser.kernel_std", float,
                                             default=1.0))
        return LinearSmoothing(kern, get_typed(cfg, "denoiser.alpha", float,
                                               default=0.3),
                               sigma, sigma0=sigma0)
    if kind == "box":
        return BoxDenoiser(sigma)
    if kind == "gaussian_mmse":
        return GaussianMMSE(0.5, 0.05, sigma)
    raise ConfigError(f"unknown denoiser kind {kind!r}")


def _build_law(cfg: dict, algorithm: str, sigma: float) -> TransformLaw | None:
    name = get_typed(cfg, "law.group", str, default=_DEFAULT_LAW.get(algorithm))
    if name is None:
        return None
    params = {}
    if "law.max_shift" in cfg:
        params["max_shift"] = int(cfg["law.max_shift"])
    params["sigma"] = get_typed(cfg, "law.sigma", float, default=sigma)
    return law_from_name(name, params)


def _build_solver(cfg: dict, task: str, seed: int,
                  trace: TraceOptions) -> tuple[SolverConfig, float]:
    algorithm = get_typed(cfg, "solver.algorithm", str, default="ered")
    alias = algorithm
    if algorithm == "snore":
        algorithm = "ered"
    delta_d, sigma_d, lam_d, n_d = table7_defaults(task, alias)
    sigma = get_typed(cfg, "solver.sigma", float, default=sigma_d)
    lam = get_typed(cfg, "solver.lambda", float, default=lam_d)
    iterations = get_typed(cfg, "solver.iterations", int, default=n_d)

    schedule = None
    if algorithm in ("red", "ered", "annealed_ered"):
        delta = get_typed(cfg, "solver.delta", float, default=delta_d)
        kind = get_typed(cfg, "solver.schedule", str, default="constant")
        if kind == "constant":
            schedule = constant_schedule(delta)
        elif kind == "power":
            schedule = power_schedule(delta, get_typed(cfg, "solver.alpha", float,
                                                       default=0.9))
        else:
            raise ConfigError(f"unknown schedule {kind!r}")

    sigma_schedule = None
    if algorithm == "annealed_ered":
        start = get_typed(cfg, "solver.sigma_start", float, default=11 / 255)
        end = get_typed(cfg, "solver.sigma_end", float, default=sigma)
        segs = get_typed(cfg, "solver.segments", int, default=16)
        sigma_schedule = linear_sigma_schedule(start, end, segs)

    denoiser = _build_denoiser(cfg, sigma)
    if alias == "snore":
        law = law_from_name("gaussian_shift", {"sigma": sigma})
    else:
        law = _build_law(cfg, algorithm, sigma)
    if algorithm in ("ered", "epnp") and law is None:
        law = law_from_name("flip", {})

    config = SolverConfig(algorithm=algorithm, lam=lam, denoiser=denoiser,
                          iterations=iterations, seed=seed, schedule=schedule,
                          law=law, sigma_schedule=sigma_schedule, trace=trace)
    return config, sigma


def _build_problem(cfg: dict, task: str, clean: ImageBuffer, lam: float,
                   rng: Rng) -> tuple[ProblemSpec, ImageBuffer]:
    if task == "deblur":
        kernel = _load_kernel(cfg, "gaussian:2")
        sigma_y = get_typed(cfg, "noise.sigma_y", float,
                            default=_DEFAULT_NOISE[task])
        op = BlurOperator(kernel, clean.shape)
        p = gaussian_problem(op, None, lam, sigma_y, noise_scaled=False)
    elif task == "super_resolution":
        kernel = _load_kernel(cfg, "gaussian:2")
        sigma_y = get_typed(cfg, "noise.sigma_y", float,
                            default=_DEFAULT_NOISE[task])
        factor = get_typed(cfg, "sr.factor", int, default=2)
        op = super_resolution_operator(kernel, factor, clean.shape)
        p = gaussian_problem(op, None, lam, sigma_y, noise_scaled=False)
    elif task == "despeckle":
        looks = get_typed(cfg, "noise.looks", int, default=50)
        p = speckle_problem(clean.shape, None, lam, looks)
        clean = p.project(clean)
    elif task == "denoise":
        from .fidelity import IdentityOperator
        sigma_y = get_typed(cfg, "noise.sigma_y", float, default=10 / 255)
        p = gaussian_problem(IdentityOperator(clean.shape), None, lam, sigma_y,
                             noise_scaled=False)
    else:
        raise ConfigError(f"task {task!r} is not a restoration task")
    y = make_observation(p, clean, rng.spawn(23))
    return p.with_observation(y), clean


def _write_manifest(out_dir: str, cfg: dict, seed: int):
    resolved = dict(cfg)
    resolved["seed"] = seed
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"eqrestore {__version__}\n")
        fh.write(serialize_config(resolved))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_restore(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    task = get_typed(cfg, "task", str, default="deblur")
    if task not in ("deblur", "super_resolution", "despeckle", "denoise"):
        raise ConfigError(f"restore does not handle task {task!r}")
    validate_keys(cfg, _COMMON_KEYS)
    rng = Rng(seed)
    clean = _load_input(cfg, rng)
    trace_opts = TraceOptions(x_true=clean)
    solver, _sigma = _build_solver(cfg, task, seed, trace_opts)
    problem, clean = _build_problem(cfg, task, clean, solver.lam, rng)

    trace = run(solver, problem)
    os.makedirs(out_dir, exist_ok=True)
    write_netpbm(trace.final, os.path.join(out_dir, "restored.pnm"))
    with open(os.path.join(out_dir, "trace.csv"), "w", encoding="utf-8") as fh:
        trace.to_csv(fh)
    _write_manifest(out_dir, cfg, seed)

    obs_psnr = _observation_psnr(problem, clean)
    final_psnr = psnr(trace.final, clean)
    final_ssim = ssim(trace.final, clean) if min(clean.height, clean.width) >= 11 else float("nan")
    print(f"restore task={task} algorithm={solver.algorithm} N={solver.iterations} "
          f"psnr_obs={obs_psnr:.3f} psnr={final_psnr:.3f} ssim={final_ssim:.4f} "
          f"wall_ms={trace.wall_ms:.0f}")
    return 0


def _observation_psnr(problem: ProblemSpec, clean: ImageBuffer) -> float:
    if problem.y.shape == clean.shape:
        return psnr(problem.y, clean)
    from .solvers import default_x0
    return psnr(default_x0(problem), clean)


def cmd_bench(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    validate_keys(cfg, _BENCH_KEYS)
    task = get_typed(cfg, "task", str, default="deblur")
    methods = [str(m) for m in get_typed(cfg, "bench.methods", list, default=[])]
    if not methods:
        raise ConfigError("bench.methods must list at least one method")
    kernel_names = [str(k) for k in get_typed(cfg, "bench.kernels", list,
                                              default=["gaussian:2"])]
    images = _bench_images(cfg, seed)

    cells = [(img_name, kname, method)
             for img_name, _ in images for kname in kernel_names for method in methods]

    def run_cell(cell):
        img_name, kname, method = cell
        clean = dict(images)[img_name]
        cell_seed = Rng(seed).spawn(_stable_key(img_name, kname, method)).seed
        sub = dict(cfg)
        sub["solver.algorithm"] = method
        sub["kernel.name"] = kname
        rng = Rng(cell_seed)
        solver, _ = _build_solver(sub, task, cell_seed, TraceOptions())
        problem, clean_p = _build_problem(sub, task, clean, solver.lam, rng)
        trace = run(solver, problem)
        return (method, kname, img_name, psnr(trace.final, clean_p),
                ssim(trace.final, clean_p), solver.iterations, trace.wall_ms)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,kernel,image,psnr,ssim,iterations,wall_ms\n")
        for m, k, i, p, s, n, w in rows:
            fh.write(f"{m},{k},{i},{p:.6f},{s:.6f},{n},{w:.1f}\n")
        for method in sorted(set(r[0] for r in rows)):
            sel = [r for r in rows if r[0] == method]
            fh.write(f"{method},MEAN,,{np.mean([r[3] for r in sel]):.6f},"
                     f"{np.mean([r[4] for r in sel]):.6f},,\n")
    _write_manifest(out_dir, cfg, seed)
    print(f"bench wrote {len(rows)} rows to {path}")
    return 0


def _bench_images(cfg: dict, seed: int) -> list[tuple[str, ImageBuffer]]:
    spec = get_typed(cfg, "bench.images", str, default="synthetic")
    if spec.startswith("synthetic"):
        count = get_typed(cfg, "bench.count", int, default=2)
        size = get_typed(cfg, "bench.size", int, default=64)
        rng = Rng(seed)
        return [(f"synthetic{i}", synthetic_texture(size, size, rng.spawn(100 + i)))
                for i in range(count)]
    if not os.path.isdir(spec):
        raise ConfigError(f"bench.images directory {spec!r} not found")
    names = sorted(n for n in os.listdir(spec) if n.endswith((".pnm", ".pgm", ".ppm")))
    if not names:
        raise ConfigError(f"no NetPBM images in {spec!r}")
    return [(n, read_netpbm(os.path.join(spec, n))) for n in names]


def cmd_denoise_avg(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    validate_keys(cfg, _DENOISE_KEYS)
    sigmas = [float(s) for s in get_typed(cfg, "denoise_avg.sigmas", list,
                                          default=[5 / 255, 10 / 255, 20 / 255])]
    law_names = [str(l) for l in get_typed(cfg, "denoise_avg.laws", list,
                                           default=["identity", "rot90", "flip",
                                                    "translate", "subpixel_rotation"])]
    n_draws = get_typed(cfg, "denoise_avg.n_draws", int, default=10)
    images = _bench_images(cfg, seed) if "bench.images" in cfg else None
    if images is None:
        rng = Rng(seed)
        images = [("synthetic0", synthetic_texture(64, 64, rng.spawn(100)))]

    rows = []
    for img_name, clean in images:
        for sigma in sigmas:
            noise_rng = Rng(seed).spawn(_stable_key(img_name, sigma))
            noisy = ImageBuffer(clean.data + sigma * noise_rng.normal(clean.shape),
                                check=False)
            for law_name in law_names:
                den = _build_denoiser(cfg, sigma)
                law = law_from_name(law_name, {"sigma": sigma})
                mode = "exact" if law.enumerable and law_name in (
                    "identity", "rot90", "flip") else "monte_carlo"
                wrapper = EquivariantDenoiser(den, law, mode=mode, n_draws=n_draws)
                eval_rng = noise_rng.spawn(_stable_key(law_name))
                out = wrapper.denoise(noisy, eval_rng)
                rows.append((img_name, sigma, law_name, psnr(out, clean)))

    rows.sort()
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("image,sigma,law,psnr\n")
        for img_name, sigma, law_name, val in rows:
            fh.write(f"{img_name},{format_value(sigma)},{law_name},{val:.6f}\n")
    _write_manifest(out_dir, cfg, seed)
    print(f"denoise-avg wrote {len(rows)} rows to {path}")
    return 0


def cmd_verify(cfg: dict, out_dir: str, seed: int, threads: int) -> int:
    validate_keys(cfg, _VERIFY_KEYS, context="verify config")
    checks = get_typed(cfg, "verify.checks", list, default=["all"])
    names = [str(c) for c in checks]
    if names == ["all"]:
        names = sorted(CHECKS)
    reports = run_checks(names)

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8") as fh:
        reports_to_csv(reports, fh)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(r.summary_line() + "\n")
    _write_manifest(out_dir, cfg, seed)
    for r in reports:
        print(r.summary_line())
    return 0 if all(r.passed for r in reports) else 3


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="eqrestore", description=__doc__)
    parser.add_argument("command",
                        choices=["restore", "bench", "denoise-avg", "verify"])
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default="out")
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = read_config(args.config) if args.config else {}
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        out_dir = args.out if args.out != "out" or "out" not in cfg \
            else str(cfg["out"])
        threads = args.threads
        if threads is None:
            threads = int(cfg.get("threads", os.environ.get("EQR_THREADS", 1)))

        handler = {"restore": cmd_restore, "bench": cmd_bench,
                   "denoise-avg": cmd_denoise_avg, "verify": cmd_verify}[args.command]
        return handler(cfg, out_dir, seed, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except EqrestoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
