"""Closed-form evaluation of a candidate design.

Indexing is 0-based throughout: users ``0..K-1`` are sorted strongest first,
and column ``K`` of ``W`` is the sensing stream. With that layout every SIC
decoding SINR has the single form

    gamma_{k->j} = |H_k^H w_j|^2 / (sum_{i<j, i<K} |H_k^H w_i|^2 + sigma_k^2),  j >= k,

where ``j == k`` is the user's own SINR and ``j == K`` is the sensing stream
(decoded first, against all user streams).
"""

from dataclasses import dataclass, field, replace
import csv

import numpy as np

from .numerics import herm
from .scenario import angle_between, distance, path_gain, steering


@dataclass(frozen=True)
class Design:
    """Beamformers ``W`` (M x (K+1)), RIS phases ``v`` (N,), filters ``u`` (L x M(K+1))."""

    W: np.ndarray
    v: np.ndarray
    u: np.ndarray
    aux: dict = field(default_factory=dict)

    @property
    def K(self):
        return self.W.shape[1] - 1

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        cplx = lambda a: {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}  # noqa: E731
        return {"W": cplx(self.W), "v": cplx(self.v), "u": cplx(self.u),
                "aux": {k: np.asarray(v).tolist() for k, v in self.aux.items()}}

    @classmethod
    def from_dict(cls, d):
        c = lambda e: np.asarray(e["re"]) + 1j * np.asarray(e["im"])  # noqa: E731
        return cls(c(d["W"]), c(d["v"]), c(d["u"]).reshape(len(d["u"]["re"]), -1),
                   {k: np.asarray(v) for k, v in d.get("aux", {}).items()})


@dataclass(frozen=True)
class Scheme:
    """Which constraint families a design is held to.

    ``noma``: SIC decoding (otherwise every other stream is treated as noise).
    ``sensing``: radar constraints and the sensing stream are active; when off,
    the sensing column of ``W`` is held at zero and drops out of the SIC order.
    """

    noma: bool = True
    sensing: bool = True


# --------------------------------------------------------------------------
# communication
# --------------------------------------------------------------------------

def aggregate_user_channel(ch, v, k):
    """Row vector ``h_d[k]^H + h_r[k]^H diag(v) G`` (length M)."""
    return np.conj(ch.h_d[k]) + (np.conj(ch.h_r[k]) * v) @ ch.G


def user_rows(ch, v):
    return np.conj(ch.h_d) + (np.conj(ch.h_r) * v) @ ch.G


def link_powers(ch, W, v):
    """``P[k, j] = |H_k^H w_j|^2`` for every user k and stream j."""
    return np.abs(user_rows(ch, v) @ W) ** 2


def _decode(P, noise, k, j):
    return P[k, j] / (P[k, :min(j, P.shape[1] - 1)].sum() + noise[k])


def sinr_decode(cfg, ch, design, k, j):
    """SINR of stream ``j`` decoded at user ``k`` along the SIC order.

    Raises ``ValueError`` for ``j < k``: a user never decodes a stronger user's stream.
    """
    if not 0 <= k < ch.K:
        raise ValueError(f"user index {k} out of range")
    if j < k or j > ch.K:
        raise ValueError(f"stream {j} is not decoded at user {k}")
    P = link_powers(ch, design.W, design.v)
    return float(_decode(P, cfg.noise_user, k, j))


def sinr_tin(P, noise, k):
    """Own SINR when every other stream (sensing included) is treated as noise."""
    return P[k, k] / (P[k].sum() - P[k, k] + noise[k])


def user_sinrs(cfg, ch, design, noma=True):
    P = link_powers(ch, design.W, design.v)
    noise = cfg.noise_user
    if noma:
        return np.array([_decode(P, noise, k, k) for k in range(ch.K)])
    return np.array([sinr_tin(P, noise, k) for k in range(ch.K)])


def sum_rate(cfg, ch, design, noma=True):
    return float(np.sum(np.log2(1.0 + user_sinrs(cfg, ch, design, noma))))


# --------------------------------------------------------------------------
# sensing
# --------------------------------------------------------------------------

def target_factors(ch, v, l):
    """Column factor and row factor of the composite target matrix.

    ``a_rx = g_d + G^H diag(v) g_r`` and ``a_tx = g_d^H + g_r^H diag(v) G``,
    taken exactly as the echo model is printed (diag(v) in both factors).
    """
    a_rx = ch.g_d[l] + herm(ch.G) @ (v * ch.g_r[l])
    a_tx = np.conj(ch.g_d[l]) + (np.conj(ch.g_r[l]) * v) @ ch.G
    return a_rx, a_tx


def composite_target_matrix(ch, v, l):
    a_rx, a_tx = target_factors(ch, v, l)
    return np.outer(a_rx, a_tx)


def echo_vector(ch, W, v, l):
    """``(I_{K+1} kron G_l) vec(W)`` computed as ``vec(G_l W)``."""
    a_rx, a_tx = target_factors(ch, v, l)
    return np.outer(a_rx, a_tx @ W).reshape(-1, order="F")


def radar_snr_lb(cfg, ch, design, l):
    u = design.u[l]
    num = abs(np.vdot(u, echo_vector(ch, design.W, design.v, l))) ** 2
    return float(cfg.Q * cfg.rcs[l] * num / (cfg.noise_radar[l] * np.vdot(u, u).real))


def radar_snr_from_blocks(cfg, ch, design, l, S):
    """SNR ratio for explicit symbol blocks ``S`` of shape (trials, K+1, Q).

    Returns the per-trial values of ``sigma_l^2 |u^H (S S^H kron G_l) w~|^2 / (Q eps^2 u^H u)``
    whose expectation is the detection SNR.
    """
    S = np.asarray(S)
    if S.ndim == 2:
        S = S[None]
    Gl = composite_target_matrix(ch, design.v, l)
    K1 = design.W.shape[1]
    M = design.W.shape[0]
    u_blocks = design.u[l].reshape(K1, M)          # u_j for stream block j
    # c[j, i] = u_j^H G_l w_i ; value = sum_{j,i} c[j,i] R[j,i] with R = S S^H
    c = np.conj(u_blocks) @ Gl @ design.W
    R = np.einsum("tjq,tiq->tji", S, np.conj(S))
    vals = np.abs(np.einsum("ji,tji->t", c, R)) ** 2
    Q = S.shape[2]
    uu = np.vdot(design.u[l], design.u[l]).real
    return cfg.rcs[l] * vals / (Q * cfg.noise_radar[l] * uu)


def radar_snr_mc(cfg, ch, design, l, trials, rng, Q=None, batch=2000):
    """Monte-Carlo estimate of the detection SNR with CN(0,1) symbols.

    Returns ``(mean, stderr)``.
    """
    if trials < 100:
        raise ValueError("radar_snr_mc needs at least 100 trials")
    Q = cfg.Q if Q is None else Q
    K1 = design.W.shape[1]
    out = []
    done = 0
    while done < trials:
        n = min(batch, trials - done)
        S = (rng.standard_normal((n, K1, Q)) + 1j * rng.standard_normal((n, K1, Q))) / np.sqrt(2.0)
        out.append(radar_snr_from_blocks(cfg, ch, design, l, S))
        done += n
    vals = np.concatenate(out)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))


# --------------------------------------------------------------------------
# constraints
# --------------------------------------------------------------------------

def sic_pairs(K, k, sensing=True):
    """Ordered pairs ``(a, b)`` requiring ``|H_k^H w_a|^2 >= |H_k^H w_b|^2`` at user ``k``."""
    pairs = [(K, K - 1)] if sensing else []
    pairs += [(i + 1, i) for i in range(k, K - 1)]
    pairs += [(k, j) for j in range(k)]
    return pairs


def decode_pairs(K, noma=True):
    """``(decoder, stream)`` pairs whose SINR must reach the stream's threshold."""
    if noma:
        return [(j, k) for k in range(1, K) for j in range(k + 1)]
    return [(k, k) for k in range(K)]


FAMILIES = ("radar_snr", "decode_sinr", "unit_modulus", "power", "filter_norm", "sic_order")


@dataclass(frozen=True)
class FeasibilityReport:
    residuals: dict
    tol: float

    @property
    def violated(self):
        return [f for f, r in self.residuals.items() if r is not None and r < -self.tol]

    @property
    def feasible(self):
        return not self.violated

    def __bool__(self):
        return self.feasible


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else (a - b) / scale


def check_feasible(cfg, ch, design, tol=1e-6, noma=True, sensing=True):
    """Worst signed relative residual per constraint family (negative = violated)."""
    K = ch.K
    W, v = design.W, design.v
    P = link_powers(ch, W, v)
    noise = cfg.noise_user
    thr = cfg.sinr_threshold
    res = dict.fromkeys(FAMILIES)
    sensing = sensing and ch.L > 0   # without targets there is no sensing stream

    if sensing:
        res["radar_snr"] = min(radar_snr_lb(cfg, ch, design, l) / cfg.snr_threshold[l] - 1.0
                               for l in range(ch.L))
        res["filter_norm"] = -max(abs(np.linalg.norm(design.u[l]) - 1.0) for l in range(ch.L))

    worst = np.inf
    for j, k in decode_pairs(K, noma):
        g = _decode(P, noise, j, k) if noma else sinr_tin(P, noise, k)
        worst = min(worst, g / thr[k] - 1.0)
    res["decode_sinr"] = None if worst == np.inf else float(worst)

    res["unit_modulus"] = -float(np.max(np.abs(np.abs(v) - 1.0))) if v.size else 0.0
    res["power"] = 1.0 - float(np.sum(np.abs(W) ** 2)) / cfg.p_max

    if noma:
        worst = np.inf
        for k in range(K):
            for a, b in sic_pairs(K, k, sensing):
                worst = min(worst, _rel(P[k, a], P[k, b]))
        res["sic_order"] = None if worst == np.inf else float(worst)
    return FeasibilityReport(res, tol)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RateReport:
    sinr: np.ndarray
    decode: dict
    rate: np.ndarray
    sum_rate: float
    snr_lb: np.ndarray
    feasibility: FeasibilityReport


def rate_report(cfg, ch, design, noma=True, sensing=True, tol=1e-6):
    P = link_powers(ch, design.W, design.v)
    K = ch.K
    sinr = user_sinrs(cfg, ch, design, noma)
    decode = {}
    if noma:
        for k in range(K):
            for j in range(k, K + 1):
                decode[(k, j)] = float(_decode(P, cfg.noise_user, k, j))
    rate = np.log2(1.0 + sinr)
    snr = np.array([radar_snr_lb(cfg, ch, design, l) for l in range(ch.L)]) if sensing else np.zeros(0)
    return RateReport(sinr, decode, rate, float(rate.sum()), snr,
                      check_feasible(cfg, ch, design, tol, noma, sensing))


RATE_CSV_HEADER = ("entity", "index", "sinr", "rate_bits", "snr_lb", "snr_lb_db")


def write_rate_csv(report, path):
    """One row per user (``entity=user``) and per target (``entity=target``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RATE_CSV_HEADER)
        for k, (g, r) in enumerate(zip(report.sinr, report.rate)):
            w.writerow(["user", k, repr(float(g)), repr(float(r)), "", ""])
        for l, s in enumerate(report.snr_lb):
            w.writerow(["target", l, "", "", repr(float(s)), repr(float(10 * np.log10(s)))])


# --------------------------------------------------------------------------
# beampattern
# --------------------------------------------------------------------------

def probe_channels(cfg, point, N):
    """Deterministic line-of-sight channels from DFBS and RIS to ``point``.

    Path loss uses the user-link exponents; distances below the 1 m reference
    are clamped to 1 m.
    """
    geo, ple, ref = cfg.geometry, cfg.pathloss_exponents, cfg.pathloss_ref_db
    d_bs = max(distance(geo.bs, point), 1.0)
    h_d = np.sqrt(path_gain(d_bs, ple.bs_user, ref)) * steering(cfg.M, angle_between(geo.bs, point))
    if N == 0:
        return h_d, np.zeros(0, dtype=complex)
    d_ris = max(distance(geo.ris, point), 1.0)
    h_r = np.sqrt(path_gain(d_ris, ple.ris_user, ref)) * steering(N, angle_between(geo.ris, point))
    return h_d, h_r


def beampattern_at(cfg, ch, design, point):
    h_d, h_r = probe_channels(cfg, point, ch.N)
    row = np.conj(h_d) + (np.conj(h_r) * design.v) @ ch.G
    return float(np.sum(np.abs(row @ design.W) ** 2))


def beampattern(cfg, ch, design, xs, ys):
    """``BP[iy, ix] = ||(h_d^H(x,y) + h_r^H(x,y) diag(v) G) W||^2`` over a grid."""
    out = np.empty((len(ys), len(xs)))
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            out[iy, ix] = beampattern_at(cfg, ch, design, (x, y))
    return out


def angular_beampattern(W, angles):
    """DFBS transmit pattern ``||a(theta)^H W||^2`` (no path loss, direct only)."""
    M = W.shape[0]
    A = np.stack([steering(M, t) for t in np.atleast_1d(angles)])
    return np.sum(np.abs(np.conj(A) @ W) ** 2, axis=1)
