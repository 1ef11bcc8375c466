"""Iteration-based training loop, evaluation, and the config-file schema.

Training samples pairs uniformly with replacement, augments them (shared
crop/rotate/flip), and minimizes the weighted total loss with Adam under a
multi-step learning-rate schedule. All randomness of iteration i derives
from (seed, i), so a run resumed from any checkpoint continues bitwise
identically to the uninterrupted run (single-threaded mode).
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .data import DatasetManifest, augment, load_pair
from .errors import (
    ConfigMismatchError,
    CorruptCheckpointError,
    DatasetError,
    InvalidConfigError,
    TrainingDivergedError,
)
from .losses import LossWeights, default_extractor, load_extractor, loss_s1, loss_s2
from .metrics import EvalReport, EvalRow, psnr, ssim
from .model import (
    FourLLIE,
    ModelConfig,
    build_model,
    config_fingerprint,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "TrainConfig",
    "TrainResult",
    "TraceRow",
    "load_config_file",
    "lr_for_iteration",
    "train",
    "evaluate",
]


@dataclass
class TrainConfig:
    lr_init: float = 4.0e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    milestones: tuple[int, ...] | None = None  # default: 50% and 75% of total_iters
    lr_decay: float = 0.5
    batch_size: int = 4
    crop: int = 384
    total_iters: int = 200_000
    seed: int = 0
    grad_clip: float = 5.0  # global norm; 0 disables
    deterministic: bool = True
    eval_interval: int = 0  # 0 disables periodic evaluation
    checkpoint_interval: int = 0  # 0 keeps only the final checkpoint
    alpha: float = 0.1
    lambda_: float = 0.01
    use_ls1: bool = True
    use_lvgg: bool = True
    phi_weights: str = ""

    def __post_init__(self) -> None:
        if min(self.lr_init, self.lr_decay) <= 0:
            raise InvalidConfigError("lr_init and lr_decay must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidConfigError("Adam decay rates must lie in [0, 1)")
        if min(self.batch_size, self.crop, self.total_iters) < 1:
            raise InvalidConfigError("batch_size, crop and total_iters must be >= 1")
        if self.grad_clip < 0 or self.eval_interval < 0 or self.checkpoint_interval < 0:
            raise InvalidConfigError("grad_clip and intervals must be >= 0")
        if self.milestones is not None:
            ms = tuple(int(m) for m in self.milestones)
            if any(m <= 0 for m in ms) or list(ms) != sorted(set(ms)):
                raise InvalidConfigError(f"milestones must be strictly increasing positives, got {ms}")
            if ms and ms[-1] >= self.total_iters:
                raise InvalidConfigError("milestones must be < total_iters")
            self.milestones = ms
        LossWeights(self.alpha, self.lambda_)  # range validation

    @property
    def resolved_milestones(self) -> tuple[int, ...]:
        if self.milestones is not None:
            return self.milestones
        return (self.total_iters // 2, (3 * self.total_iters) // 4)

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.lambda_)


def lr_for_iteration(cfg: TrainConfig, iteration: int) -> float:
    """Multi-step schedule: decay once for every milestone already passed."""
    drops = sum(1 for m in cfg.resolved_milestones if iteration > m)
    return cfg.lr_init * cfg.lr_decay**drops


# ---------------------------------------------------------------------------
# config file parsing

_BOOL_VALUES = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}

_MODEL_KEYS = {
    "nc": int,
    "n_fp_stage1": int,
    "enc_widths": "int_list",
    "use_frequency_stage": "bool",
    "use_spatial_stage": "bool",
    "use_snr_fusion": "bool",
    "exposure_correction_mode": "bool",
}
_TRAIN_KEYS = {
    "lr_init": float,
    "beta1": float,
    "beta2": float,
    "adam_eps": float,
    "milestones": "int_list",
    "lr_decay": float,
    "batch_size": int,
    "crop": int,
    "total_iters": int,
    "seed": int,
    "grad_clip": float,
    "deterministic": "bool",
    "eval_interval": int,
    "checkpoint_interval": int,
}
_LOSS_KEYS = {
    "alpha": float,
    "lambda": float,
    "use_ls1": "bool",
    "use_lvgg": "bool",
    "phi_weights": str,
}


def _convert(section: str, key: str, raw: str, kind) -> object:
    raw = raw.strip()
    try:
        if kind == "bool":
            if raw.lower() not in _BOOL_VALUES:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_VALUES[raw.lower()]
        if kind == "int_list":
            if not raw:
                return None
            return tuple(int(part.strip()) for part in raw.split(","))
        return kind(raw)
    except ValueError as exc:
        raise InvalidConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def load_config_file(path: str | Path) -> tuple[ModelConfig, TrainConfig]:
    """Parse the key=value config file; unknown sections or keys are errors."""
    path = Path(path)
    if not path.is_file():
        raise InvalidConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(path.read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise InvalidConfigError(f"cannot parse {path}: {exc}") from exc

    schema = {"model": _MODEL_KEYS, "train": _TRAIN_KEYS, "loss": _LOSS_KEYS}
    unknown_sections = set(parser.sections()) - set(schema)
    if unknown_sections:
        raise InvalidConfigError(f"unknown config sections: {sorted(unknown_sections)}")

    values: dict[str, dict[str, object]] = {"model": {}, "train": {}, "loss": {}}
    for section, keys in schema.items():
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in keys:
                raise InvalidConfigError(f"unknown key {key!r} in section [{section}] of {path}")
            converted = _convert(section, key, raw, keys[key])
            if converted is not None or keys[key] == "int_list":
                values[section][key] = converted

    loss_kwargs = dict(values["loss"])
    if "lambda" in loss_kwargs:
        loss_kwargs["lambda_"] = loss_kwargs.pop("lambda")
    model_cfg = ModelConfig(**values["model"])
    train_cfg = TrainConfig(**values["train"], **loss_kwargs)
    return model_cfg, train_cfg


# ---------------------------------------------------------------------------
# training

@dataclass
class TraceRow:
    iteration: int
    loss_s1: float
    loss_s2: float
    loss_total: float
    lr: float

    def as_csv(self) -> str:
        return f"{self.iteration},{self.loss_s1},{self.loss_s2},{self.loss_total},{self.lr}"


@dataclass
class TrainResult:
    final_checkpoint: Path
    trace: list[TraceRow]
    trace_path: Path
    best_eval: EvalReport | None = None


_TRACE_HEADER = "iteration,loss_s1,loss_s2,loss_total,lr"


def _assemble_batch(manifest: DatasetManifest, cfg: TrainConfig, iteration: int):
    """Batch of (low, normal) crops; all randomness derives from (seed, iteration)."""
    rng = np.random.default_rng([cfg.seed, iteration])
    idxs = rng.integers(0, len(manifest.records), size=cfg.batch_size)
    lows, normals, ids = [], [], []
    for idx in idxs:
        pair = augment(load_pair(manifest.records[int(idx)]), cfg.crop, rng)
        lows.append(pair.low)
        normals.append(pair.normal)
        ids.append(pair.id)
    return torch.stack(lows), torch.stack(normals), ids


def _save_train_checkpoint(model, optimizer, iteration, path) -> None:
    extras: dict[str, object] = {}
    for name, p in model.named_parameters():
        state = optimizer.state.get(p, {})
        if not state:
            continue
        extras[f"optim.exp_avg.{name}"] = state["exp_avg"]
        extras[f"optim.exp_avg_sq.{name}"] = state["exp_avg_sq"]
        extras[f"optim.step.{name}"] = state["step"]
    save_checkpoint(model, path, extra_arrays=extras, meta={"iteration": iteration})


def _restore_optimizer(model, optimizer, container) -> None:
    for name, p in model.named_parameters():
        key = f"optim.exp_avg.{name}"
        if key not in container.arrays:
            raise CorruptCheckpointError(f"checkpoint lacks optimizer state for {name!r}")
        state = optimizer.state[p]
        state["exp_avg"] = torch.from_numpy(container.arrays[key].copy())
        state["exp_avg_sq"] = torch.from_numpy(container.arrays[f"optim.exp_avg_sq.{name}"].copy())
        state["step"] = torch.tensor(float(container.arrays[f"optim.step.{name}"]))


def train(
    train_cfg: TrainConfig,
    model_cfg: ModelConfig,
    manifest: DatasetManifest,
    out_dir: str | Path,
    resume: str | Path | None = None,
    eval_manifest: DatasetManifest | None = None,
) -> TrainResult:
    """Run the optimization loop; returns the final checkpoint and loss trace."""
    if manifest.unpaired or not manifest.records:
        raise DatasetError("training needs a non-empty paired manifest")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    old_threads = torch.get_num_threads()
    if train_cfg.deterministic:
        torch.set_num_threads(1)
    try:
        return _train_loop(train_cfg, model_cfg, manifest, out_dir, resume, eval_manifest)
    finally:
        torch.set_num_threads(old_threads)


def _train_loop(train_cfg, model_cfg, manifest, out_dir, resume, eval_manifest) -> TrainResult:
    phi = None
    if train_cfg.use_lvgg:
        phi = load_extractor(train_cfg.phi_weights) if train_cfg.phi_weights else default_extractor()

    model = build_model(model_cfg, seed=train_cfg.seed)
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=train_cfg.lr_init,
        betas=(train_cfg.beta1, train_cfg.beta2),
        eps=train_cfg.adam_eps,
    )
    start_iter = 0
    if resume is not None:
        _, container = load_checkpoint(resume, model)
        _restore_optimizer(model, optimizer, container)
        start_iter = int(container.meta.get("iteration", 0))
        if start_iter >= train_cfg.total_iters:
            raise InvalidConfigError(
                f"checkpoint is at iteration {start_iter}, nothing left of the {train_cfg.total_iters}-iteration run"
            )

    trace: list[TraceRow] = []
    trace_path = out_dir / "loss_trace.csv"
    best_eval: EvalReport | None = None
    model.train()

    with open(trace_path, "w", encoding="utf-8") as trace_file:
        trace_file.write(_TRACE_HEADER + "\n")
        for iteration in range(start_iter + 1, train_cfg.total_iters + 1):
            lr = lr_for_iteration(train_cfg, iteration)
            for group in optimizer.param_groups:
                group["lr"] = lr

            low, normal, pair_ids = _assemble_batch(manifest, train_cfg, iteration)
            outputs = model(low)

            s1 = loss_s1(outputs.output_s1, normal)
            if train_cfg.use_lvgg:
                s2 = loss_s2(outputs.output_s2, normal, phi, train_cfg.alpha)
            else:
                s2 = F.mse_loss(outputs.output_s2, normal)
            s1_term = s1 if train_cfg.use_ls1 else s1.detach()
            total = s2 + train_cfg.lambda_ * s1_term

            if not torch.isfinite(total):
                dump = out_dir / f"diverged_iter{iteration:07d}.json"
                dump.write_text(
                    json.dumps(
                        {
                            "iteration": iteration,
                            "pair_ids": pair_ids,
                            "loss_s1": float(s1),
                            "loss_s2": float(s2),
                            "lr": lr,
                        },
                        indent=2,
                    ),
                    encoding="utf-8",
                )
                raise TrainingDivergedError(
                    f"non-finite loss at iteration {iteration} on pairs {pair_ids}; dump at {dump}"
                )

            optimizer.zero_grad(set_to_none=True)
            total.backward()
            if train_cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), train_cfg.grad_clip)
            optimizer.step()

            row = TraceRow(iteration, float(s1), float(s2), float(total), lr)
            trace.append(row)
            trace_file.write(row.as_csv() + "\n")

            if train_cfg.checkpoint_interval and iteration % train_cfg.checkpoint_interval == 0:
                _save_train_checkpoint(model, optimizer, iteration, out_dir / f"checkpoint_iter{iteration:07d}.ckpt")
            if (
                eval_manifest is not None
                and train_cfg.eval_interval
                and iteration % train_cfg.eval_interval == 0
            ):
                report = evaluate(model, eval_manifest)
                if best_eval is None or report.mean_psnr_db > best_eval.mean_psnr_db:
                    best_eval = report

    final_path = out_dir / "checkpoint_final.ckpt"
    _save_train_checkpoint(model, optimizer, train_cfg.total_iters, final_path)
    return TrainResult(final_checkpoint=final_path, trace=trace, trace_path=trace_path, best_eval=best_eval)


def evaluate(checkpoint: str | Path | FourLLIE, manifest: DatasetManifest) -> EvalReport:
    """Enhance every pair at full resolution and score PSNR/SSIM per image."""
    if isinstance(checkpoint, FourLLIE):
        model = checkpoint
        ckpt_fingerprint = "unsaved"
    else:
        model, _ = load_checkpoint(checkpoint)
        ckpt_fingerprint = hashlib.sha256(Path(checkpoint).read_bytes()).hexdigest()
    if manifest.unpaired:
        raise DatasetError("evaluation needs a paired manifest")
    if not manifest.records:
        raise DatasetError("evaluation manifest is empty")

    rows = []
    for record in sorted(manifest.records, key=lambda r: r.id):
        pair = load_pair(record)
        out = model.enhance(pair.low)
        pred = out.output_s2.clamp(0.0, 1.0)
        rows.append(EvalRow(id=pair.id, psnr_db=psnr(pred, pair.normal), ssim=ssim(pred, pair.normal)))
    return EvalReport(
        rows=rows,
        config_fingerprint=config_fingerprint(model.config),
        checkpoint_fingerprint=ckpt_fingerprint,
    )
