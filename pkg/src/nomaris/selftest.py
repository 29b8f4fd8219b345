"""Fast numerical self-checks used by ``nomaris selftest``."""

import math

import numpy as np

from .active import P3Linearization, build_p3, solve_p3, taylor_lb_quadratic
from .conic import ProgramBuilder, solve_conic
from .scenario import ChannelSet, Geometry, SystemConfig


def _lp():
    b = ProgramBuilder()
    x = b.add_vars("x", 1).start
    b.maximize(x, -1.0)
    b.nonneg(b.unit(x), -1.0)
    return abs(solve_conic(b.build()).primal[x] - 1.0) < 1e-7


def _soc():
    b = ProgramBuilder()
    t = b.add_vars("t", 1).start
    b.maximize(t, -1.0)
    b.soc([b.unit(t), b.zeros(), b.zeros()], [0.0, 3.0, 4.0])
    return abs(solve_conic(b.build()).primal[t] - 5.0) < 1e-7


def _exp():
    b = ProgramBuilder()
    t = b.add_vars("t", 1).start
    b.maximize(t, -1.0)
    b.exp_cone([b.zeros(), b.zeros(), b.unit(t)], [1.0, 1.0, 0.0])
    return abs(solve_conic(b.build()).primal[t] - math.e) < 1e-7


def _taylor():
    rng = np.random.default_rng(0)
    for _ in range(200):
        h, wh, w = (rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4)))
        if taylor_lb_quadratic(h, wh, w) > abs(np.vdot(h, w)) ** 2 + 1e-12:
            return False
    return True


def _scalar_toy():
    cfg = SystemConfig(M=1, K=1, L=0, N=0, p_max_dbm=10 * math.log10(4000.0), noise_user_dbm=30.0,
                       geometry=Geometry(users=((1.0, 1.0),), targets=()))
    z = np.zeros
    ch = ChannelSet(np.ones((1, 1), complex), z((1, 0), complex), z((0, 1), complex),
                    z((0, 1), complex), z((0, 0), complex))
    W = np.array([[0.5, 0.0]], dtype=complex)
    u = z((0, 2), complex)
    for _ in range(4):
        res, _ = solve_p3(build_p3(cfg, ch, z(0), u, P3Linearization.at(cfg, ch, z(0), u, W)))
        W = res.W
    return abs(res.eta[0] - math.log(5.0)) < 1e-6


CHECKS = [("LP toy", _lp), ("SOC toy", _soc), ("exponential-cone toy", _exp),
          ("tangent lower bound", _taylor), ("single-user analytic optimum", _scalar_toy)]


def run(report=print):
    ok = True
    for name, fn in CHECKS:
        try:
            passed = bool(fn())
        except Exception as exc:  # report, keep going
            passed = False
            name = f"{name} ({exc})"
        ok &= passed
        report(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
