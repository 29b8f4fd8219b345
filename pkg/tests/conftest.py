import math

import numpy as np
import pytest

from nomaris.scenario import ChannelSet, Geometry, SystemConfig, generate_channels

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def unit_phases(rng, n):
    return np.exp(2j * np.pi * rng.random(n))


def scalar_config(p_watt=4.0, noise_watt=1.0, **kw):
    """One user, no targets, no RIS, scalar channel; powers given in watts."""
    return SystemConfig(M=1, K=1, L=0, N=kw.pop("N", 0), p_max_dbm=10 * math.log10(p_watt * 1e3),
                        noise_user_dbm=10 * math.log10(noise_watt * 1e3),
                        geometry=Geometry(users=((1.0, 1.0),), targets=()), **kw)


def scalar_channels(h=1.0, N=0, h_r=None, G=None):
    z = np.zeros
    return ChannelSet(np.full((1, 1), h, dtype=complex),
                      z((1, N), complex) if h_r is None else np.asarray(h_r, complex).reshape(1, N),
                      z((N, 1), complex) if G is None else np.asarray(G, complex).reshape(N, 1),
                      z((0, 1), complex), z((0, N), complex))


def toy_n1():
    """One antenna, one user, one RIS element, no target; noise 1 W, budget 4 W."""
    cfg = SystemConfig(M=1, K=1, L=0, N=1, p_max_dbm=10 * math.log10(4e3), noise_user_dbm=30.0,
                       geometry=Geometry(users=((1.0, 1.0),), targets=()))
    z = np.zeros
    ch = ChannelSet(np.array([[1.0]], complex), np.array([[0.8 * np.exp(0.3j)]]),
                    np.array([[0.9 * np.exp(-1.1j)]]), z((0, 1), complex), z((0, 1), complex))
    W = np.array([[2.0 * np.exp(0.4j), 0.0]], complex)
    return cfg, ch, W, z((0, 2), complex)


@pytest.fixture(scope="session")
def desk_cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def desk_channels(desk_cfg):
    return generate_channels(desk_cfg, np.random.default_rng(7))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
