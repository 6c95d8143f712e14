"""V1 (jump losses off) vs V2 (on) over several seeds, without decoder finetuning.

    python3 scripts/nutl_ablation.py --seeds 3 [--set stage1.stop_grad=true ...]

Each seed changes the stage-1 training seed and the evaluation root seed;
data and the autoencoder are shared.
"""

import argparse

import numpy as np
import yaml

from truncsr import experiment
from truncsr.config import ExperimentConfig
from truncsr.experiment import Layout


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/nutl")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = ap.parse_args()
    overrides = {k: yaml.safe_load(v) for k, _, v in (s.partition("=") for s in args.set)}
    cfg = ExperimentConfig().replace(output_dir=args.out, **overrides)
    shared = Layout.of(cfg)
    table = {"V1": [], "V2": []}
    for seed in range(args.seeds):
        for name, nutl in (("V1", False), ("V2", True)):
            arm = cfg.replace(**{"ablation.nutl": nutl, "ablation.decoder_finetune": False,
                                 "stage1.seed": seed, "root_seed": seed,
                                 "output_dir": f"{args.out}/{name}_{seed}"})
            s = experiment.run_arm(arm, Layout.of(arm, data=shared.data,
                                                  autoencoder=shared.autoencoder)).summary
            table[name].append((s["psnr_mean"], s["psnr_gstd"], s["l_std"]))
            print(f"seed {seed} {name}: psnr {s['psnr_mean']:.4f}  g-std {s['psnr_gstd']:.4f}"
                  f"  l-std {s['l_std']:.5f}", flush=True)
    for name, rows in table.items():
        m = np.mean(rows, axis=0)
        print(f"mean {name}: psnr {m[0]:.4f}  g-std {m[1]:.4f}  l-std {m[2]:.5f}")


if __name__ == "__main__":
    main()
