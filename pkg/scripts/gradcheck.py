"""Finite-difference check of both stage-1 losses for random small denoisers.

    python3 scripts/gradcheck.py --nets 5
"""

import argparse

import numpy as np

from truncsr.nn import DenoiserNet
from truncsr.schedule import build_linear_schedule, build_nonuniform_plan
from truncsr.train import loss_at_T, loss_standard


def rel_error(params, grads, loss):
    """Worst elementwise relative error and the analytic gradient at that entry."""
    worst, at = 0.0, 0.0
    for p, g in zip(params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            h = 1e-5 * (1 + abs(old))
            p[idx] = old + h
            up = loss()
            p[idx] = old - h
            down = loss()
            p[idx] = old
            fd = (up - down) / (2 * h)
            err = abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-8)
            if err > worst:
                worst, at = err, g[idx]
    return worst, at


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nets", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sched = build_linear_schedule(45)
    plan = build_nonuniform_plan(sched, 2 / 3, 1 / 3, 15)
    ab = np.concatenate([[1.0], sched.alpha_bars])
    rng = np.random.default_rng(args.seed)
    for k in range(args.nets):
        xd, cd = (int(v) for v in rng.integers(2, 17, size=2))
        x0, c = rng.normal(size=(4, xd)), rng.normal(size=(4, cd))
        for head in ("eps", "v"):
            net = DenoiserNet.create(xd, cd, 45, np.random.default_rng(k), hidden=16, time_dim=8,
                                     output=head, alpha_bars=ab if head == "v" else None)
            for name, fn in (
                ("standard", lambda: loss_standard(net, x0, c, 20, sched,
                                                   np.random.default_rng(k))),
                ("at_T", lambda: loss_at_T(net, x0, c, plan, sched, np.random.default_rng(k))),
            ):
                _, tape = fn()
                err, at = rel_error(net.params(), tape.grads, lambda: fn()[0].total)
                print(f"net {k} dims ({xd},{cd}) head {head:<3} {name:<8} "
                      f"max rel err {err:.2e} (|grad| there {abs(at):.1e})")


if __name__ == "__main__":
    main()
