import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from truncsr.nn import DenoiserNet
from truncsr.schedule import build_linear_schedule, build_nonuniform_plan

settings.register_profile("ci", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture
def sched45():
    return build_linear_schedule(45)


@pytest.fixture
def plan45(sched45):
    return build_nonuniform_plan(sched45, 2 / 3, 1 / 3, 15)


def alpha_bars_with_zero(schedule):
    return np.concatenate([[1.0], schedule.alpha_bars])


def small_denoiser(schedule, seed=0, x_dim=4, cond_dim=3, hidden=16, time_dim=8, output="eps"):
    ab = alpha_bars_with_zero(schedule) if output == "v" else None
    return DenoiserNet.create(x_dim, cond_dim, schedule.T, np.random.default_rng(seed),
                              hidden=hidden, time_dim=time_dim, output=output, alpha_bars=ab)


def max_rel_error(params, grads, loss_fn):
    """Central differences with h = 1e-5 (1 + |theta|) over every parameter entry."""
    worst = 0.0
    for p, g in zip(params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            h = 1e-5 * (1.0 + abs(old))
            p[idx] = old + h
            up = loss_fn()
            p[idx] = old - h
            down = loss_fn()
            p[idx] = old
            fd = (up - down) / (2 * h)
            denom = max(abs(fd), abs(g[idx]), 1e-8)
            worst = max(worst, abs(fd - g[idx]) / denom)
    return worst


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line; the terminal summary lists them in order."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number, ok, detail):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        print(line)
        lines[number] = line
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
