"""Sweep the stage-2 adversarial weight on one trained stage-1 run.

    python3 scripts/stage2_sweep.py --out runs/sweep --weights 0.05 0.1 0.3 1.0

Reports PSNR, band energy and L-STD before finetuning and for each weight.
"""

import argparse
import shutil

from truncsr import experiment
from truncsr.config import ExperimentConfig
from truncsr.experiment import Layout


def fmt(s):
    return f"psnr {s['psnr_mean']:.3f}  band {s['band_energy_mean']:.5f}  l-std {s['l_std']:.5f}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/sweep")
    ap.add_argument("--weights", type=float, nargs="+", default=[0.05, 0.1, 0.15, 0.3, 1.0])
    args = ap.parse_args()
    cfg = ExperimentConfig().replace(output_dir=args.out)
    layout = Layout.of(cfg)
    experiment.train_stage_one(cfg, layout)
    pre = experiment.stability_report(cfg, layout, finetuned=False, montages=False).summary
    print(f"pre-finetune   {fmt(pre)}", flush=True)
    for w in args.weights:
        c = cfg.replace(**{"stage2.adv_weight": w})
        experiment.train_stage_two(c, layout)
        s = experiment.stability_report(c, layout, finetuned=True, montages=False).summary
        print(f"adv {w:<10g} {fmt(s)}", flush=True)
    shutil.rmtree(layout.stage2, ignore_errors=True)


if __name__ == "__main__":
    main()
