"""Command-line entry point.

Subcommands: train, eval, enhance, and diagnose (swap | scale | snr |
appendix-a). Exit codes: 0 success, 1 runtime failure, 2 usage or
configuration error. Every file the tool produces lands under the
directory given by --out.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import torch

from . import diagnostics
from .data import load_image, load_manifest, save_image
from .errors import FourLLIEError, InvalidConfigError, InvalidInputError
from .losses import loss_s1
from .model import load_checkpoint
from .snr import compute_snr_map
from .trainer import evaluate, load_config_file, train

ABLATIONS = ("wo_f", "wo_s", "wo_snr", "wo_ls1", "wo_lvgg")

_PHI_ENV_VAR = "FOURLLIE_PHI_WEIGHTS"


def _write_json(payload: dict, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _apply_ablations(model_cfg, train_cfg, ablations):
    model_updates, train_updates = {}, {}
    for name in ablations or ():
        if name == "wo_f":
            model_updates["use_frequency_stage"] = False
        elif name == "wo_s":
            model_updates["use_spatial_stage"] = False
        elif name == "wo_snr":
            model_updates["use_snr_fusion"] = False
        elif name == "wo_ls1":
            train_updates["use_ls1"] = False
        elif name == "wo_lvgg":
            train_updates["use_lvgg"] = False
    if model_updates:
        model_cfg = dataclasses.replace(model_cfg, **model_updates)
    if train_updates:
        train_cfg = dataclasses.replace(train_cfg, **train_updates)
    return model_cfg, train_cfg


def cmd_train(args) -> int:
    if not Path(args.config).is_file():
        print(f"error: config file {args.config} does not exist", file=sys.stderr)
        print("usage: fourllie train --config FILE --data ROOT --out DIR", file=sys.stderr)
        return 2
    model_cfg, train_cfg = load_config_file(args.config)
    model_cfg, train_cfg = _apply_ablations(model_cfg, train_cfg, args.ablate)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.deterministic:
        updates["deterministic"] = True
    if not train_cfg.phi_weights and os.environ.get(_PHI_ENV_VAR):
        updates["phi_weights"] = os.environ[_PHI_ENV_VAR]
    if updates:
        train_cfg = dataclasses.replace(train_cfg, **updates)

    manifest = load_manifest(args.data)
    result = train(train_cfg, model_cfg, manifest, out_dir=args.out, resume=args.resume)
    last = result.trace[-1] if result.trace else None
    print(f"trained {train_cfg.total_iters} iterations on {len(manifest)} pairs")
    if last:
        print(f"final losses: s1={last.loss_s1:.6g} s2={last.loss_s2:.6g} total={last.loss_total:.6g}")
    print(f"checkpoint: {result.final_checkpoint}")
    print(f"loss trace: {result.trace_path}")
    return 0


def cmd_eval(args) -> int:
    report = evaluate(args.ckpt, load_manifest(args.data))
    out_csv = Path(args.out)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    json_path = report.write(out_csv)
    print(f"evaluated {len(report.rows)} pairs: mean PSNR {report.mean_psnr_db:.4f} dB, mean SSIM {report.mean_ssim:.6f}")
    print(f"report: {out_csv} / {json_path}")
    return 0


def _iter_input_images(path: Path):
    if path.is_dir():
        files = sorted(
            p for p in path.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
        if not files:
            raise InvalidInputError(f"no images found in {path}")
        yield from files
    elif path.is_file():
        yield path
    else:
        raise InvalidInputError(f"input {path} does not exist")


def cmd_enhance(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = 0
    for src in _iter_input_images(Path(args.input)):
        img = load_image(src)
        outputs = model.enhance(img)
        save_image(outputs.output_s2.clamp(0, 1), out_dir / f"{src.stem}.png")
        if args.save_intermediates:
            save_image(outputs.output_s1.clamp(0, 1), out_dir / f"{src.stem}_s1.png")
            if outputs.snr is not None:
                save_image(outputs.snr, out_dir / f"{src.stem}_snr.png")
            if outputs.map is not None:
                save_image(outputs.map, out_dir / f"{src.stem}_map.png")
            if outputs.map_down is not None:
                save_image(outputs.map_down, out_dir / f"{src.stem}_map_down.png")
        n += 1
    print(f"enhanced {n} image(s) into {out_dir}")
    return 0


def cmd_diagnose_swap(args) -> int:
    low, normal = load_image(args.low), load_image(args.normal)
    amp_l_pha_n, amp_n_pha_l = diagnostics.amplitude_swap(low, normal)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(amp_l_pha_n, out_dir / "amp_low_pha_normal.png")
    save_image(amp_n_pha_l, out_dir / "amp_normal_pha_low.png")
    stats = {
        "mean_luminance": {
            "low": diagnostics.mean_luminance(low),
            "normal": diagnostics.mean_luminance(normal),
            "amp_low_pha_normal": diagnostics.mean_luminance(amp_l_pha_n),
            "amp_normal_pha_low": diagnostics.mean_luminance(amp_n_pha_l),
        },
        "amplitude_mse": {
            "amp_low_pha_normal_vs_low": float(loss_s1(amp_l_pha_n, low)),
            "amp_normal_pha_low_vs_normal": float(loss_s1(amp_n_pha_l, normal)),
        },
    }
    _write_json(stats, out_dir / "swap_stats.json")
    print(f"wrote swap results to {out_dir}")
    return 0


def cmd_diagnose_scale(args) -> int:
    img = load_image(args.input)
    scaled = diagnostics.amplitude_scale(img, args.k)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(scaled, out_dir / f"scaled_k{args.k:g}.png")
    stats = {
        "k": args.k,
        "mean_luminance_before": diagnostics.mean_luminance(img),
        "mean_luminance_after": diagnostics.mean_luminance(scaled),
    }
    _write_json(stats, out_dir / "scale_stats.json")
    print(f"wrote scale results to {out_dir}")
    return 0


def cmd_diagnose_snr(args) -> int:
    img = load_image(args.input)
    s = compute_snr_map(img)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(s, out_dir / "snr_map.png")
    stats = {"mean": float(s.mean()), "min": float(s.min()), "max": float(s.max())}
    _write_json(stats, out_dir / "snr_stats.json")
    print(f"wrote SNR map to {out_dir}")
    return 0


def cmd_diagnose_appendix_a(args) -> int:
    manifest = load_manifest(args.data)
    old_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        errors = diagnostics.compare_appendix_settings(
            manifest, iters=args.iters, nc=args.nc, seed=args.seed, crop=args.crop
        )
    finally:
        torch.set_num_threads(old_threads)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ranking = sorted(errors, key=errors.get)
    _write_json(
        {
            "amplitude_error": {f"setting{k}": v for k, v in errors.items()},
            "ranking_best_first": [f"setting{k}" for k in ranking],
            "iters": args.iters,
            "nc": args.nc,
            "seed": args.seed,
        },
        out_dir / "appendix_a.json",
    )
    for setting, err in errors.items():
        print(f"setting {setting}: amplitude error {err:.6g}")
    print(f"wrote comparison to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fourllie",
        description="Two-stage Fourier-domain low-light image enhancement toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a config file")
    p_train.add_argument("--config", required=True, help="key=value config file")
    p_train.add_argument("--data", required=True, help="dataset root or listing file")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--resume", default=None, help="checkpoint to resume from")
    p_train.add_argument("--ablate", action="append", choices=ABLATIONS, help="repeatable ablation switch")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--deterministic", action="store_true", help="single-threaded, bitwise-reproducible run")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a paired dataset")
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", required=True, help="report CSV path (a .json aggregate is written alongside)")
    p_eval.set_defaults(func=cmd_eval)

    p_enh = sub.add_parser("enhance", help="enhance one image or a directory")
    p_enh.add_argument("--ckpt", required=True)
    p_enh.add_argument("--in", dest="input", required=True)
    p_enh.add_argument("--out", required=True)
    p_enh.add_argument("--save-intermediates", action="store_true")
    p_enh.set_defaults(func=cmd_enhance)

    p_diag = sub.add_parser("diagnose", help="frequency-domain diagnostics")
    diag_sub = p_diag.add_subparsers(dest="diagnostic", required=True)

    p_swap = diag_sub.add_parser("swap", help="swap amplitude spectra of a low/normal pair")
    p_swap.add_argument("--low", required=True)
    p_swap.add_argument("--normal", required=True)
    p_swap.add_argument("--out", required=True)
    p_swap.set_defaults(func=cmd_diagnose_swap)

    p_scale = diag_sub.add_parser("scale", help="scale an image's amplitude spectrum by k")
    p_scale.add_argument("--in", dest="input", required=True)
    p_scale.add_argument("--k", type=float, default=1.8)
    p_scale.add_argument("--out", required=True)
    p_scale.set_defaults(func=cmd_diagnose_scale)

    p_snr = diag_sub.add_parser("snr", help="write the SNR prior map of an image")
    p_snr.add_argument("--in", dest="input", required=True)
    p_snr.add_argument("--out", required=True)
    p_snr.set_defaults(func=cmd_diagnose_snr)

    p_app = diag_sub.add_parser("appendix-a", help="compare the three amplitude-prediction strategies")
    p_app.add_argument("--data", required=True)
    p_app.add_argument("--out", required=True)
    p_app.add_argument("--iters", type=int, default=800)
    p_app.add_argument("--nc", type=int, default=8)
    p_app.add_argument("--crop", type=int, default=64)
    p_app.add_argument("--seed", type=int, default=0)
    p_app.set_defaults(func=cmd_diagnose_appendix_a)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FourLLIEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
