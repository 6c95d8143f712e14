"""Orchestration behind the CLI: corpus on disk, the two training stages,
stability reports and ablation sweeps.

Directory layout under ``config.output_dir``::

    data/manifest.json, data/{train,test}/...   corpus
    autoencoder/                                pretrained codec checkpoint
    stage1/                                     denoiser checkpoint + loss.csv
    stage2/                                     finetuned decoder + discriminator
    report/per_run.csv, report/summary.csv, report/montage_*.pgm
    ablation.csv, ablation/<arm>/...
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .data import SignalPair, make_toy_dataset, upsample_condition
from .diffusion import sample_truncated
from .errors import MissingDependencyError
from .formats import (load_checkpoint, read_pnm, read_tensor, save_checkpoint, write_csv,
                      write_pgm, write_tensor)
from .latent import AutoEncoder, Discriminator, IdentityCodec, pretrain_autoencoder
from .nn import DenoiserNet
from .pipeline import SRPipeline, StabilityReport, evaluate_stability, montage, run_seed, to_patches
from .schedule import NoiseSchedule, TimestepPlan
from .train import LOSS_COLUMNS, train_stage1, train_stage2

log = logging.getLogger(__name__)

STAGE2_COLUMNS = ("step", "l1", "gen", "disc", "mse")
SUMMARY_COLUMNS = ("metric", "mean", "g_std")
ABLATION_COLUMNS = ("arm", "t_max_frac", "t_min_frac", "total_evals", "nutl", "decoder_finetune",
                    "baseline", "default", "psnr_mean", "psnr_gstd", "ssim_mean", "ssim_gstd",
                    "band_energy_mean", "band_energy_gstd", "l_std")


@dataclass
class Layout:
    root: Path
    data: Path
    autoencoder: Path

    @classmethod
    def of(cls, cfg: ExperimentConfig, data: Path | None = None,
           autoencoder: Path | None = None) -> "Layout":
        root = cfg.out
        return cls(root, data or root / "data", autoencoder or root / "autoencoder")

    @property
    def stage1(self) -> Path:
        return self.root / "stage1"

    @property
    def stage2(self) -> Path:
        return self.root / "stage2"

    @property
    def report(self) -> Path:
        return self.root / "report"


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _file_sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- corpus -----------------------------------------------------------------

def generate_data(cfg: ExperimentConfig, layout: Layout | None = None) -> Path:
    """Write train/test corpora plus ``manifest.json``; rerunning is byte-identical."""
    layout = layout or Layout.of(cfg)
    d = cfg.data
    params = d.degradation()
    manifest = {"kind": d.kind, "size": d.size, "factor": d.factor,
                "degradation": params.to_dict(), "config": _digest(dataclasses.asdict(d)),
                "splits": {}}
    for split, n, seed in (("train", d.n_train, d.seed), ("test", d.n_test, d.seed + 1)):
        pairs = make_toy_dataset(d.kind, n, d.size, params, seed)
        folder = layout.data / split
        folder.mkdir(parents=True, exist_ok=True)
        items = []
        if d.kind == "textures2d":
            for i, p in enumerate(pairs):
                hr_f, lr_f = folder / f"hr_{i:04d}.pgm", folder / f"lr_{i:04d}.pgm"
                write_pgm(hr_f, p.hr, 65535)
                write_pgm(lr_f, p.lr, 65535)
                items.append({"hr": hr_f.name, "lr": lr_f.name, "hr_sha256": _file_sha(hr_f),
                              "lr_sha256": _file_sha(lr_f), **p.degradation})
        else:
            write_tensor(folder / "hr.f32", np.stack([p.hr for p in pairs]))
            write_tensor(folder / "lr.f32", np.stack([p.lr for p in pairs]))
            items = [dict(p.degradation) for p in pairs]
            items[0]["hr_sha256"] = _file_sha(folder / "hr.f32")
            items[0]["lr_sha256"] = _file_sha(folder / "lr.f32")
        manifest["splits"][split] = items
    path = layout.data / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_split(cfg: ExperimentConfig, split: str, layout: Layout | None = None) -> list[SignalPair]:
    layout = layout or Layout.of(cfg)
    path = layout.data / "manifest.json"
    if not path.exists():
        generate_data(cfg, layout)
    manifest = json.loads(path.read_text())
    if manifest["config"] != _digest(dataclasses.asdict(cfg.data)):
        raise ConfigError(f"corpus in {layout.data} was generated from a different data config")
    folder = layout.data / split
    items = manifest["splits"][split]
    if manifest["kind"] == "textures2d":
        return [SignalPair(read_pnm(folder / it["hr"]), read_pnm(folder / it["lr"]),
                           manifest["factor"], it) for it in items]
    hr, lr = read_tensor(folder / "hr.f32"), read_tensor(folder / "lr.f32")
    return [SignalPair(h, l, manifest["factor"], it) for h, l, it in zip(hr, lr, items)]


def _patch(cfg: ExperimentConfig) -> int:
    # gaussian points are treated as a single segment
    return cfg.data.size if cfg.data.kind == "gaussians" else cfg.model.patch


def _signal_dim(cfg: ExperimentConfig) -> int:
    p = _patch(cfg)
    return p * p if cfg.data.kind == "textures2d" else p


def _pair_rows(pairs: list[SignalPair], patch: int):
    hr = np.concatenate([to_patches(p.hr, patch) for p in pairs])
    cond = np.concatenate([to_patches(upsample_condition(p.lr, p.scale), patch) for p in pairs])
    return hr, cond


# -- codec and stage 1 -------------------------------------------------------

def ensure_codec(cfg: ExperimentConfig, layout: Layout | None = None):
    """Pretrained autoencoder (cached on disk) or the identity codec."""
    layout = layout or Layout.of(cfg)
    dim = _signal_dim(cfg)
    if cfg.model.codec == "identity":
        return IdentityCodec(dim)
    key = _digest({"data": dataclasses.asdict(cfg.data), "ae": dataclasses.asdict(cfg.autoencoder),
                   "dims": [dim, cfg.model.latent_dim, cfg.model.ae_hidden]})
    manifest = layout.autoencoder / "manifest.json"
    if manifest.exists():
        nets, meta = load_checkpoint(layout.autoencoder)
        if meta.get("key") == key:
            return AutoEncoder(nets["encoder"], nets["decoder"], meta["latent_dim"],
                               np.array(meta["z_shift"]), np.array(meta["z_scale"]))
    a = cfg.autoencoder
    hr, _ = _pair_rows(load_split(cfg, "train", layout), _patch(cfg))
    rng = np.random.default_rng(a.seed)
    ae = AutoEncoder.create(dim, cfg.model.latent_dim, rng, hidden=cfg.model.ae_hidden)
    curve = pretrain_autoencoder(ae, hr, a.steps, a.batch_size, a.lr, a.kl_weight, rng)
    save_checkpoint(layout.autoencoder, {"encoder": ae.encoder, "decoder": ae.decoder},
                    {"key": key, "latent_dim": ae.latent_dim, "z_shift": ae.z_shift.tolist(),
                     "z_scale": ae.z_scale.tolist()})
    write_csv(layout.autoencoder / "loss.csv", ["step", "loss"],
              [(i + 1, v) for i, v in enumerate(curve)])
    return ae


def train_stage_one(cfg: ExperimentConfig, layout: Layout | None = None) -> Path:
    layout = layout or Layout.of(cfg)
    codec = ensure_codec(cfg, layout)
    schedule = cfg.build_schedule()
    plan = cfg.build_plan(schedule)
    hr, cond = _pair_rows(load_split(cfg, "train", layout), _patch(cfg))
    x0, c = codec.encode_latent(hr), codec.encode_latent(cond)
    m = cfg.model
    alpha_bars = np.concatenate([[1.0], schedule.alpha_bars])
    net = DenoiserNet.create(codec.latent_dim, codec.latent_dim, schedule.T,
                             np.random.default_rng(cfg.stage1.seed + 1), hidden=m.hidden,
                             depth=m.depth, time_dim=m.time_dim, output=m.output,
                             alpha_bars=alpha_bars if m.output == "v" else None)
    result = train_stage1(net, x0, c, schedule, plan, cfg.stage1)
    meta = {"schedule": schedule.to_dict(), "plan": plan.to_dict(), "output": m.output,
            "time_dim": m.time_dim, "latent_dim": codec.latent_dim, "codec": m.codec,
            "transition": cfg.transition}
    save_checkpoint(layout.stage1, {"denoiser": net.mlp}, meta)
    write_csv(layout.stage1 / "loss.csv", list(LOSS_COLUMNS), result.curve)
    return layout.stage1


@dataclass
class Stage1Bundle:
    codec: object
    denoiser: DenoiserNet
    schedule: NoiseSchedule
    plan: TimestepPlan
    transition: str


def load_stage_one(cfg: ExperimentConfig, layout: Layout | None = None) -> Stage1Bundle:
    layout = layout or Layout.of(cfg)
    if not (layout.stage1 / "manifest.json").exists():
        raise MissingDependencyError(f"no stage-1 checkpoint in {layout.stage1}; train stage 1 first")
    nets, meta = load_checkpoint(layout.stage1)
    schedule = NoiseSchedule.from_dict(meta["schedule"])
    plan = TimestepPlan.from_dict(meta["plan"])
    codec = ensure_codec(cfg, layout)
    dim = meta["latent_dim"]
    ab = np.concatenate([[1.0], schedule.alpha_bars]) if meta["output"] == "v" else None
    net = DenoiserNet(nets["denoiser"], dim, dim, meta["time_dim"], schedule.T, meta["output"], ab)
    return Stage1Bundle(codec, net, schedule, plan, meta["transition"])


def _stage1_sampler(bundle: Stage1Bundle):
    def sample(cond, rng):
        return sample_truncated(bundle.denoiser, cond, bundle.plan, bundle.schedule, rng,
                                x_shape=(cond.shape[0], bundle.codec.latent_dim),
                                transition=bundle.transition).values
    return sample


def train_stage_two(cfg: ExperimentConfig, layout: Layout | None = None) -> Path:
    layout = layout or Layout.of(cfg)
    bundle = load_stage_one(cfg, layout)
    if not isinstance(bundle.codec, AutoEncoder):
        raise ConfigError("decoder finetuning needs the autoencoder codec")
    ae = bundle.codec
    hr, cond = _pair_rows(load_split(cfg, "train", layout), _patch(cfg))
    c = ae.encode_latent(cond)
    disc = Discriminator.create(ae.signal_dim, np.random.default_rng(cfg.stage2.seed + 1),
                                hidden=cfg.model.disc_hidden)
    result = train_stage2(ae, disc, _stage1_sampler(bundle), {"denoiser": bundle.denoiser.params()},
                          c, hr, cfg.stage2)
    save_checkpoint(layout.stage2, {"decoder": ae.decoder, "discriminator": disc.mlp},
                    {"frozen_checksums": result.checksums})
    write_csv(layout.stage2 / "loss.csv", list(STAGE2_COLUMNS), result.curve)
    return layout.stage2


def build_pipeline(cfg: ExperimentConfig, layout: Layout | None = None,
                   finetuned: bool | None = None) -> SRPipeline:
    """Stage-1 pipeline, with the finetuned decoder swapped in when requested
    (default: when the ablation enables it and a stage-2 checkpoint exists)."""
    layout = layout or Layout.of(cfg)
    bundle = load_stage_one(cfg, layout)
    codec = bundle.codec
    if finetuned is None:
        finetuned = cfg.ablation.decoder_finetune and (layout.stage2 / "manifest.json").exists()
    if finetuned:
        if not (layout.stage2 / "manifest.json").exists():
            raise MissingDependencyError(f"no stage-2 checkpoint in {layout.stage2}")
        nets, _ = load_checkpoint(layout.stage2)
        codec = dataclasses.replace(codec, decoder=nets["decoder"])
    return SRPipeline(codec, bundle.denoiser, bundle.schedule, bundle.plan,
                      cfg.data.factor, _patch(cfg), transition=bundle.transition)


# -- reports -----------------------------------------------------------------

def stability_report(cfg: ExperimentConfig, layout: Layout | None = None,
                     finetuned: bool | None = None, montages: bool = True) -> StabilityReport:
    layout = layout or Layout.of(cfg)
    pipeline = build_pipeline(cfg, layout, finetuned)
    pairs = load_split(cfg, "test", layout)
    report = evaluate_stability(pipeline, pairs, cfg.n_runs, cfg.root_seed, cfg.workers)
    out = layout.report
    out.mkdir(parents=True, exist_ok=True)
    metrics = list(report.matrices)
    rows = [{**r, "seed": run_seed(cfg.root_seed, r["run"], r["image"])} for r in report.per_run]
    write_csv(out / "per_run.csv", ["image", "run", "seed"] + metrics, rows)
    summary = [(k, report.summary[f"{k}_mean"], report.summary[f"{k}_gstd"]) for k in metrics]
    summary.append(("l_std", report.summary["l_std"], None))
    write_csv(out / "summary.csv", list(SUMMARY_COLUMNS), summary)
    if montages and pairs[0].hr.ndim == 2:
        for j, (pair, stack) in enumerate(zip(pairs, report.stacks)):
            runs = np.stack(stack.runs)
            write_pgm(out / f"montage_{j:04d}.pgm", montage(pair.lr, runs, pair.hr, pair.scale))
    return report


def dump_chain(cfg: ExperimentConfig, image: int, run: int, directory,
               layout: Layout | None = None) -> list[Path]:
    """Write every evaluated latent state of one restoration as raw tensors."""
    layout = layout or Layout.of(cfg)
    pipeline = build_pipeline(cfg, layout)
    pair = load_split(cfg, "test", layout)[image]
    cond = pipeline.condition(pair.lr)
    trace: list = []
    rng = np.random.default_rng(run_seed(cfg.root_seed, run, image))
    final = sample_truncated(pipeline.denoiser, cond, pipeline.plan, pipeline.schedule, rng,
                             x_shape=(cond.shape[0], pipeline.codec.latent_dim),
                             transition=pipeline.transition, trace=trace)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, state in enumerate(trace):
        p = directory / f"step_{k:02d}_t{state.t:04d}.f32"
        write_tensor(p, state.values)
        paths.append(p)
    p = directory / f"x0_t{final.source_t:04d}.f32"
    write_tensor(p, final.values)
    return paths + [p]


# -- ablation ----------------------------------------------------------------

SWITCH_ARMS = {
    "V1": {"ablation.nutl": False, "ablation.decoder_finetune": False},
    "V2": {"ablation.nutl": True, "ablation.decoder_finetune": False},
    "CCSR": {"ablation.nutl": True, "ablation.decoder_finetune": True},
}
PLAN_ARMS = {
    "A1": (1 / 2, 1 / 3, 8),
    "A2": (2 / 3, 1 / 2, 8),
    "default": (2 / 3, 1 / 3, 15),
    "A3": (4 / 5, 1 / 3, 21),
    "A4": (2 / 3, 1 / 5, 21),
}
GRIDS = ("switches", "plans", "baseline", "all")


def ablation_arms(cfg: ExperimentConfig, grid: str = "switches") -> dict[str, ExperimentConfig]:
    if grid not in GRIDS:
        raise ConfigError(f"unknown grid {grid!r}; expected one of {GRIDS}")
    arms = {}
    if grid in ("switches", "all"):
        for name, sw in SWITCH_ARMS.items():
            arms[name] = cfg.replace(**sw)
    if grid in ("plans", "all"):
        for name, (hi, lo, s) in PLAN_ARMS.items():
            arms[f"plan-{name}"] = cfg.replace(**{"plan.t_max_frac": hi, "plan.t_min_frac": lo,
                                                  "plan.total_evals": s})
    if grid in ("baseline", "all"):
        arms["baseline"] = cfg.replace(**{"ablation.baseline": True,
                                          "ablation.decoder_finetune": False})
    return arms


def run_arm(cfg: ExperimentConfig, layout: Layout, montages: bool = False) -> StabilityReport:
    train_stage_one(cfg, layout)
    finetune = cfg.ablation.decoder_finetune and not cfg.ablation.baseline
    if finetune:
        train_stage_two(cfg, layout)
    return stability_report(cfg, layout, finetuned=finetune, montages=montages)


def ablate(cfg: ExperimentConfig, grid: str = "switches") -> list[dict]:
    """Train and evaluate every arm under shared data, codec and seeds."""
    base = Layout.of(cfg)
    arms = ablation_arms(cfg, grid)
    rows = []
    for name, arm in arms.items():
        # the arm that reproduces the input config unchanged is the default
        is_default = arm == cfg
        arm = arm.replace(output_dir=str(base.root / "ablation" / name))
        layout = Layout.of(arm, data=base.data, autoencoder=base.autoencoder)
        log.info("ablation arm %s", name)
        s = run_arm(arm, layout).summary
        p = arm.plan
        rows.append({
            "arm": name, "t_max_frac": p.t_max_frac, "t_min_frac": p.t_min_frac,
            "total_evals": p.total_evals, "nutl": int(arm.ablation.nutl),
            "decoder_finetune": int(arm.ablation.decoder_finetune),
            "baseline": int(arm.ablation.baseline),
            "default": int(is_default),
            **{k: s.get(k) for k in ABLATION_COLUMNS[8:]},
        })
    base.root.mkdir(parents=True, exist_ok=True)
    write_csv(base.root / "ablation.csv", list(ABLATION_COLUMNS), rows)
    return rows
