"""Transmit-beamforming subproblem (one SCA step in W).

Both SCA subproblems share one constraint assembler, :func:`add_link_constraints`.
It takes the received amplitudes ``z[k][j]`` (user k, stream j) as complex-affine
functions of the program variables, already divided by the user's noise
standard deviation, and emits:

* rate epigraphs ``eta_k <= log(numerator)`` (exponential cone) and the
  linearized ``denominator <= e^tau_hat (1 + tau - tau_hat)`` (rotated SOC),
* SIC order constraints ``|z_kb|^2 <= tangent(|z_ka|^2)``,
* decoding-SINR constraints ``r (sum |z_ji|^2 + 1) <= tangent(|z_jk|^2)``.

Quadratics on the "<=" side stay exact (convex); only the quadratics that must
be bounded from below are replaced by their tangent plane, so every point
feasible for the program is feasible for the exact constraints.

Inside the program the beamformers are the power-normalized ``W / sqrt(P_max)``
split into real and imaginary parts, and the rate variables are shifted by
``log(sigma_k^2)``; :func:`solve_p3` undoes both.
"""

from dataclasses import dataclass

import numpy as np

from .conic import ProgramBuilder, Status, abs2_tangent, solve_conic
from .metrics import Scheme, composite_target_matrix, decode_pairs, sic_pairs, user_rows


def taylor_lb_quadratic(h, w_hat, w):
    """``2 Re{w_hat^H h h^H w} - |h^H w_hat|^2``, the tangent minorant of ``|h^H w|^2``.

    ``h`` is the column vector for which the received amplitude is ``h^H w``.
    """
    h = np.asarray(h)
    a_hat = np.vdot(h, w_hat)
    return float(2.0 * np.real(np.conj(a_hat) * np.vdot(h, w)) - abs(a_hat) ** 2)


def soc_interference_vector(h, ws, sigma, delta):
    """Cone point ``(delta + 1, 2 h^H w_{k-1}, ..., 2 h^H w_1, 2 sigma, delta - 1)``.

    It lies in the second-order cone iff ``sum |h^H w_i|^2 + sigma^2 <= delta``
    (for ``delta >= 0``). Complex entries are split into real and imaginary parts.
    """
    amps = [np.vdot(h, w) for w in reversed(list(ws))]
    rest = []
    for a in amps:
        rest += [2.0 * a.real, 2.0 * a.imag]
    rest += [2.0 * sigma, delta - 1.0]
    return np.array([delta + 1.0, *rest])


def soc_interference_holds(h, ws, sigma, delta, tol=0.0):
    r = soc_interference_vector(h, ws, sigma, delta)
    return bool(np.linalg.norm(r[1:]) <= r[0] + tol)


def interferers(K, k, scheme):
    if scheme.noma:
        return list(range(k))
    streams = range(K + 1) if scheme.sensing else range(K)
    return [i for i in streams if i != k]


def add_link_constraints(b, z, x_hat, thresholds, scheme, rate_vars=None, slack=None):
    """Emit the communication constraints for amplitudes ``z[k][j]``.

    ``rate_vars`` maps user k to ``(eta_index, tau_index or None)``; pass None to
    skip the rate epigraphs (feasibility restoration). ``slack`` is the index of
    a variable subtracted from every normalized SIC/SINR constraint.
    Returns the anchors ``tau_hat`` (noise-normalized log-denominators).
    """
    K = len(z)
    zh = [[abs(e(x_hat)) ** 2 for e in row] for row in z]
    tau_hat = {}

    def rhs(k, j, scale):
        row, const = abs2_tangent(z[k][j], x_hat)
        if slack is not None:
            row = row - scale * b.unit(slack)
        return row, const

    if rate_vars is not None:
        for k in range(K):
            eta, tau = rate_vars[k]
            S = interferers(K, k, scheme)
            row, const = b.zeros(), 1.0
            for i in S + [k]:
                r, c = abs2_tangent(z[k][i], x_hat)
                row, const = row + r, const + c
            b.log_le(eta, row, const, shift=np.log(1.0 + sum(zh[k][i] for i in S + [k])), tag=f"rate[{k}]")
            if tau is None:
                continue
            th = float(np.log(1.0 + sum(zh[k][i] for i in S)))
            tau_hat[k] = th
            e = np.exp(th)
            # e^th (1 + tau - th) as an affine row
            b.quad_le([z[k][i] for i in S], 1.0, b.unit(tau, e), e * (1.0 - th), scale=e,
                      tag=f"interf[{k}]")
            b.nonneg(b.unit(tau), 1.0 - th, tag=f"interf_pos[{k}]")

    if scheme.noma:
        for k in range(K):
            for a, c in sic_pairs(K, k, scheme.sensing):
                scale = max(zh[k][a], 1.0)
                row, const = rhs(k, a, scale)
                b.quad_le([z[k][c]], 0.0, row, const, scale=scale, tag=f"sic[{k},{a}>{c}]")

    for j, k in decode_pairs(K, scheme.noma):
        r = float(thresholds[k])
        S = list(range(k)) if scheme.noma else interferers(K, k, scheme)
        scale = max(zh[j][k], r)
        row, const = rhs(j, k, scale)
        b.quad_le([z[j][i].scaled(np.sqrt(r)) for i in S], r, row, const, scale=scale,
                  tag=f"sinr[{j}<-{k}]")
    return tau_hat


@dataclass(frozen=True)
class P3Linearization:
    """Anchor data for one SCA step in W."""

    W_hat: np.ndarray
    H: np.ndarray          # (K, M) rows H_k^H
    A: np.ndarray          # (L, M(K+1)) rows u_l^H (I kron G_l)
    delta2: np.ndarray     # (L,)

    @classmethod
    def at(cls, cfg, ch, v, u, W_hat):
        H = user_rows(ch, v)
        K1 = W_hat.shape[1]
        A = np.zeros((ch.L, ch.M * K1), dtype=complex)
        d2 = np.zeros(ch.L)
        for l in range(ch.L):
            Gl = composite_target_matrix(ch, v, l)
            ub = u[l].reshape(K1, ch.M)
            A[l] = (np.conj(ub) @ Gl).reshape(-1)
            uu = np.vdot(u[l], u[l]).real
            d2[l] = cfg.snr_threshold[l] * cfg.noise_radar[l] * uu / (cfg.Q * cfg.rcs[l])
        return cls(np.asarray(W_hat), H, A, d2)


def _w_layout(b, M, K1):
    sl = b.add_vars("w", 2 * M * K1)
    base = sl.start

    def re(m, j):
        return base + j * M + m

    def im(m, j):
        return base + M * K1 + j * M + m

    return sl, re, im


def build_p3(cfg, ch, v, u, lin, scheme=Scheme(), restoration=False):
    """Assemble the convexified transmit-beamforming subproblem.

    With ``restoration=True`` the rate objective is replaced by the largest
    uniform (normalized) slack of the SIC, SINR and radar constraints, capped at 1.
    """
    M, K, L = ch.M, ch.K, ch.L
    K1 = K + 1
    if lin.W_hat.shape != (M, K1):
        raise ValueError(f"anchor W has shape {lin.W_hat.shape}, expected {(M, K1)}")
    if u.shape[0] != L or (L and u.shape[1] != M * K1):
        raise ValueError("receive filters do not match (L, M(K+1))")
    P = cfg.p_max
    sq = np.sqrt(P)
    sig2 = cfg.noise_user
    sensing = scheme.sensing and L > 0
    scheme = Scheme(scheme.noma, sensing)

    b = ProgramBuilder()
    wsl, re, im = _w_layout(b, M, K1)
    rate_vars = None
    slack = None
    eta_index, tau_index = {}, {}
    if restoration:
        slack = b.add_vars("slack", 1).start
        b.maximize(slack, 1.0)
        b.nonneg(b.unit(slack, -1.0), 1.0, tag="slack_cap")
    else:
        eta = b.add_vars("eta", K).start
        with_tau = [k for k in range(K) if interferers(K, k, scheme)]
        tau0 = b.add_vars("tau", len(with_tau)).start
        tau_of = {k: tau0 + i for i, k in enumerate(with_tau)}
        rate_vars = {k: (eta + k, tau_of.get(k)) for k in range(K)}
        eta_index = {k: eta + k for k in range(K)}
        tau_index = tau_of
        for k in range(K):
            b.maximize(eta + k, 1.0)
            if k in tau_of:
                b.maximize(tau_of[k], -1.0)
            else:
                b.objective_constant += float(np.log(sig2[k]))

    x_hat = b.zeros()
    for j in range(K1):
        for m in range(M):
            x_hat[re(m, j)] = lin.W_hat[m, j].real / sq
            x_hat[im(m, j)] = lin.W_hat[m, j].imag / sq

    def amp(row, j, scale):
        e = b.caffine()
        for m in range(M):
            e.coef[re(m, j)] = scale * row[m]
            e.coef[im(m, j)] = 1j * scale * row[m]
        return e

    z = [[amp(lin.H[k], j, sq / np.sqrt(sig2[k])) for j in range(K1)] for k in range(K)]

    # total power, normalized: ||x|| <= 1
    b.soc([b.zeros()] + [b.unit(i) for i in range(wsl.start, wsl.stop)],
          [1.0] + [0.0] * (wsl.stop - wsl.start), tag="power")
    if not sensing:
        for m in range(M):
            b.fix_zero(re(m, K), tag="no_sensing")
            b.fix_zero(im(m, K), tag="no_sensing")

    tau_hat = add_link_constraints(b, z, x_hat, cfg.sinr_threshold, scheme, rate_vars, slack)

    if sensing:
        for l in range(L):
            e = b.caffine()
            for j in range(K1):
                for m in range(M):
                    c = lin.A[l, j * M + m] * sq
                    e.coef[re(m, j)] = c
                    e.coef[im(m, j)] = 1j * c
            row, const = abs2_tangent(e, x_hat)
            scale = max(abs(e(x_hat)) ** 2, lin.delta2[l])
            row = row / scale
            const = (const - lin.delta2[l]) / scale
            if slack is not None:
                row = row - b.unit(slack)
            b.nonneg(row, const, tag=f"radar[{l}]")

    b.meta.update(kind="p3", M=M, K=K, sqrtP=sq, noise=sig2, tau_hat=tau_hat,
                  rate_offset=b.objective_constant, restoration=restoration,
                  eta_index=eta_index, tau_index=tau_index,
                  x_hat=x_hat, tags=b.tags)
    return b.build()


@dataclass(frozen=True)
class P3Result:
    W: np.ndarray
    eta: dict
    tau: dict
    objective: float
    surrogate_bits: float
    solution: object
    ascent: bool = True

    @property
    def zeta(self):
        return self.eta.get(0)


def _unpack_w(program, x):
    meta = program.meta
    M, K = meta["M"], meta["K"]
    K1 = K + 1
    n = M * K1
    w = x[:2 * n]
    W = (w[:n] + 1j * w[n:]).reshape(M, K1, order="F") * meta["sqrtP"]
    return W


def _rate_vars(program, x):
    """Rate variables in absolute units (shifted back by ``log(sigma_k^2)``)."""
    meta = program.meta
    noise = meta["noise"]
    eta = {k: float(x[i] + np.log(noise[k])) for k, i in meta["eta_index"].items()}
    tau = {k: float(x[i] + np.log(noise[k])) for k, i in meta["tau_index"].items()}
    return eta, tau


def solve_p3(program, previous_objective=None, tol=1e-8, gap_tol=1e-8):
    """Solve a program from :func:`build_p3`.

    Retries once with a 100x looser tolerance on ``NumericalTrouble``. Returns
    None when the program is infeasible or the solver fails.
    """
    sol = solve_conic(program, tol, gap_tol)
    if sol.status is Status.NUMERICAL_TROUBLE:
        sol = solve_conic(program, tol * 100, gap_tol * 100)
    if not sol.ok:
        return None, sol
    x = np.asarray(sol.primal)
    W = _unpack_w(program, x)
    eta, tau = ({}, {}) if program.meta["restoration"] else _rate_vars(program, x)
    surrogate = (sol.objective_value - program.meta["rate_offset"]) / np.log(2.0)
    ascent = previous_objective is None or sol.objective_value >= previous_objective - 1e-6
    return P3Result(W, eta, tau, sol.objective_value, surrogate, sol, ascent), sol
