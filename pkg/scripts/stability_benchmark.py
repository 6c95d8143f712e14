"""CCSR-mode pipeline vs the uniform full-chain baseline on the toy benchmark.

    python3 scripts/stability_benchmark.py --out runs/bench [--set KEY=VALUE ...]

Prints PSNR, SSIM, band energy, G-STD and L-STD for both arms and the
relative L-STD reduction.
"""

import argparse
import time

import yaml

from truncsr import experiment
from truncsr.config import ExperimentConfig
from truncsr.experiment import Layout


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/bench")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = ap.parse_args()
    overrides = {k: yaml.safe_load(v) for k, _, v in (s.partition("=") for s in args.set)}
    cfg = ExperimentConfig().replace(output_dir=f"{args.out}/ccsr", **overrides)
    base = cfg.replace(**{"ablation.baseline": True, "ablation.decoder_finetune": False,
                          "output_dir": f"{args.out}/baseline"})
    start = time.perf_counter()
    layout = Layout.of(cfg)
    rows = {"ccsr": experiment.run_arm(cfg, layout, montages=True).summary}
    rows["baseline"] = experiment.run_arm(
        base, Layout.of(base, data=layout.data, autoencoder=layout.autoencoder)).summary
    keys = ["psnr_mean", "psnr_gstd", "ssim_mean", "ssim_gstd", "band_energy_mean", "l_std"]
    print("arm       " + "  ".join(f"{k:>16}" for k in keys))
    for name, s in rows.items():
        print(f"{name:<10}" + "  ".join(f"{s[k]:>16.6g}" for k in keys))
    red = 1 - rows["ccsr"]["l_std"] / rows["baseline"]["l_std"]
    print(f"L-STD reduction {red:.1%}  ({time.perf_counter() - start:.0f}s)")


if __name__ == "__main__":
    main()
