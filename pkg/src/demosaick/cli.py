"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
failure (non-finite values detected).
"""
from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import gradcheck as gc
from .cascade import CascadeParams, demosaick_forward, init_schedule
from .cfa import PATTERN_NAMES, MosaicObservation, bilinear_demosaick, make_pattern, mosaic
from .config import parse_config_file
from .metrics import linrgb_to_srgb, psnr
from .modelfile import ModelFormatError, load_model, save_model
from .noise import NoiseSpec, add_noise
from .pnm import FormatError, read_image, write_image
from .resdnet import ResDNetParams, init_resdnet, parameter_breakdown, resdnet_forward
from .training import TrainConfig, load_dataset, pretrain_denoiser, train_joint

PAPER_PARAM_TOTAL = 380_356


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pattern", choices=PATTERN_NAMES, default="bayer_rggb")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--noise-kind", choices=["iid_gaussian", "heteroscedastic"],
                   default="iid_gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", type=str, default="")
    p.add_argument("--config", type=str, default="")
    p.add_argument("--out", type=str, default="")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--precision", choices=["f32", "f64"], default="f64")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="demosaick")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mosaic", help="sample a clean image through a CFA, optionally adding noise")
    p.add_argument("input")
    p.add_argument("--a-shot", type=float, default=0.0)
    p.add_argument("--b-read", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=cmd_mosaic)

    p = sub.add_parser("demosaick", help="reconstruct an observation with a trained cascade")
    p.add_argument("input")
    _add_common(p)
    p.set_defaults(func=cmd_demosaick)

    p = sub.add_parser("bilinear", help="bilinear baseline reconstruction")
    p.add_argument("input")
    _add_common(p)
    p.set_defaults(func=cmd_bilinear)

    p = sub.add_parser("denoise", help="run the residual denoiser at a given noise level")
    p.add_argument("input")
    _add_common(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("pretrain", help="pretrain the denoiser (config-driven)")
    p.add_argument("--data", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="joint end-to-end cascade training (config-driven)")
    p.add_argument("--data", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a directory of (truth, observation) pairs")
    p.add_argument("directory")
    p.add_argument("--method", choices=["model", "bilinear"], default="model")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference verification of all adjoints")
    _add_common(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("params", help="trainable parameter count breakdown")
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--filters", type=int, default=64)
    p.add_argument("--steps", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_params)
    return parser


def _check_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {what}")
    return arr


def _noise_spec(args) -> NoiseSpec:
    values = parse_config_file(args.config) if args.config else {}
    return NoiseSpec(
        kind=values.get("noise.kind", args.noise_kind),
        sigma=float(values.get("noise.sigma", args.sigma)),
        a_shot=float(values.get("noise.a_shot", getattr(args, "a_shot", 0.0))),
        b_read=float(values.get("noise.b_read", getattr(args, "b_read", 0.0))),
        seed=int(values.get("noise.seed", args.seed)),
    )


def _load_cascade(args) -> CascadeParams:
    if not args.model:
        raise ValueError("--model is required")
    params = load_model(args.model)
    if isinstance(params, ResDNetParams):
        w, sigmas = init_schedule(10, 15.0, 1.0)
        params = CascadeParams(denoiser=params, w=w, sigmas=sigmas)
    return params


def _cast(params: CascadeParams, precision: str) -> CascadeParams:
    if precision == "f64":
        return params
    flat = {k: v.astype(np.float32).astype(np.float64) for k, v in params.flatten().items()}
    return CascadeParams.from_flat(flat, params.denoiser.depth)


def cmd_mosaic(args) -> int:
    image = read_image(args.input)
    if image.shape[2] != 3:
        raise FormatError("mosaic needs a 3-channel input")
    spec = _noise_spec(args)
    noisy = add_noise(image, spec)
    obs = mosaic(noisy, make_pattern(args.pattern), sigma=spec.sigma)
    _check_finite(obs.data, "observation")
    out = args.out or "mosaic.npy"
    write_image(out, obs.data, bitdepth=16)
    print(f"wrote {out}")
    return 0


def _read_observation(path, pattern_name: str, sigma: float) -> MosaicObservation:
    data = read_image(path)
    pattern = make_pattern(pattern_name)
    mask = pattern.mask(data.shape[0], data.shape[1])
    return MosaicObservation(data=data * mask, pattern=pattern, sigma=sigma)


def cmd_demosaick(args) -> int:
    obs = _read_observation(args.input, args.pattern, args.sigma)
    params = _cast(_load_cascade(args), args.precision)
    est, _ = demosaick_forward(obs, params)
    _check_finite(est, "estimate")
    out = args.out or "demosaicked.ppm"
    write_image(out, est)
    print(f"wrote {out}")
    return 0


def cmd_bilinear(args) -> int:
    obs = _read_observation(args.input, args.pattern, args.sigma)
    est = bilinear_demosaick(obs)
    _check_finite(est, "estimate")
    out = args.out or "bilinear.ppm"
    write_image(out, est)
    print(f"wrote {out}")
    return 0


def cmd_denoise(args) -> int:
    image = read_image(args.input)
    params = load_model(args.model) if args.model else None
    if params is None:
        raise ValueError("--model is required")
    den = params.denoiser if isinstance(params, CascadeParams) else params
    est, _ = resdnet_forward(image, args.sigma, den)
    _check_finite(est, "estimate")
    out = args.out or "denoised.ppm"
    write_image(out, est)
    print(f"wrote {out}")
    return 0


def _train_config(args) -> TrainConfig:
    values = parse_config_file(args.config) if args.config else {}
    values = {k: v for k, v in values.items() if not k.startswith("noise.")}
    return TrainConfig.from_dict(values)


def cmd_pretrain(args) -> int:
    cfg = _train_config(args)
    cfg.phase = "pretrain"
    images = load_dataset(args.data)
    params, _ = pretrain_denoiser(images, cfg)
    out = args.out or "denoiser.rdnc"
    save_model(params, out)
    print(f"wrote {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _train_config(args)
    cfg.phase = "joint"
    images = load_dataset(args.data)
    if args.model:
        init = load_model(args.model)
        if isinstance(init, CascadeParams):
            init = init.denoiser
    else:
        init = init_resdnet(cfg.depth, cfg.seed, cfg.num_filters)
    params, _ = train_joint(images, init, cfg)
    out = args.out or "cascade.rdnc"
    save_model(params, out)
    print(f"wrote {out}")
    return 0


def _eval_pairs(directory: Path) -> list:
    pairs = []
    for truth in sorted(directory.iterdir()):
        stem = truth.name
        if "_truth." not in stem:
            continue
        base = stem.split("_truth.")[0]
        candidates = [p for p in directory.iterdir() if p.name.startswith(base + "_input.")]
        if not candidates:
            raise FileNotFoundError(f"no observation found for {truth.name}")
        pairs.append((base, truth, sorted(candidates)[0]))
    if not pairs:
        raise FileNotFoundError(f"no *_truth.* files in {directory}")
    return pairs


def cmd_eval(args) -> int:
    directory = Path(args.directory)
    pairs = _eval_pairs(directory)
    params = None
    if args.method == "model":
        params = _cast(_load_cascade(args), args.precision)

    def run_one(item):
        base, truth_path, input_path = item
        truth = read_image(truth_path)
        obs = _read_observation(input_path, args.pattern, args.sigma)
        start = time.perf_counter()
        if params is None:
            est = bilinear_demosaick(obs)
        else:
            est, _ = demosaick_forward(obs, params)
        elapsed = time.perf_counter() - start
        _check_finite(est, f"estimate for {base}")
        lin = psnr(truth, est)
        srgb = psnr(linrgb_to_srgb(truth), linrgb_to_srgb(est))
        return (base, lin, srgb, elapsed)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(run_one, pairs))
    else:
        rows = [run_one(item) for item in pairs]
    rows.sort(key=lambda r: r[0])

    def fmt(v):
        return "inf" if np.isinf(v) else f"{v:.4f}"

    print(f"{'image':<24}{'psnr_linrgb':>14}{'psnr_srgb':>12}{'runtime_s':>12}")
    for base, lin, srgb, elapsed in rows:
        print(f"{base:<24}{fmt(lin):>14}{fmt(srgb):>12}{elapsed:>12.4f}")
    mean_lin = float(np.mean([r[1] for r in rows]))
    mean_srgb = float(np.mean([r[2] for r in rows]))
    print(f"{'mean':<24}{fmt(mean_lin):>14}{fmt(mean_srgb):>12}")

    if args.out:
        with open(args.out, "w") as fh:
            fh.write("image,psnr_linrgb,psnr_srgb,runtime_s\n")
            for base, lin, srgb, elapsed in rows:
                fh.write(f"{base},{fmt(lin)},{fmt(srgb)},{elapsed:.6f}\n")
            fh.write(f"mean,{fmt(mean_lin)},{fmt(mean_srgb)},\n")
    return 0


def cmd_gradcheck(args) -> int:
    errs = gc.run_all(seed=args.seed)
    worst = 0.0
    for key in sorted(errs):
        print(f"{key:<40}{errs[key]:.3e}")
        worst = max(worst, errs[key])
    print(f"{'worst':<40}{worst:.3e}")
    if worst >= gc.DEFAULT_TOL:
        print("FAIL: relative error above 1e-4", file=sys.stderr)
        return 3
    print("OK")
    return 0


def cmd_params(args) -> int:
    groups = parameter_breakdown(depth=args.depth, num_filters=args.filters, steps=args.steps)
    for key, count in groups.items():
        print(f"{key:<24}{count:>10}")
    total = groups["denoiser_total"]
    if (args.depth, args.filters, args.steps) == (5, 64, 10):
        rel = abs(total - PAPER_PARAM_TOTAL) / PAPER_PARAM_TOTAL
        print(f"reference total          {PAPER_PARAM_TOTAL:>10}  (deviation {rel:.4%})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (FormatError, ModelFormatError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
