"""RIS-phase subproblem (one SCA / penalty-CCP step in v).

Every received amplitude is affine in ``v``: ``H_k^H w_j = r_{kj} . [v; 1]`` with
``r_{kj} = [conj(h_r,k) * (G w_j), h_d,k^H w_j]``, so the communication
constraints reuse :func:`nomaris.active.add_link_constraints` unchanged.

The radar echo is quadratic in ``v``. With ``B = G^H diag(g_r)`` and
``C = diag(conj(g_r)) G`` the echo is

    vec(G_l W) = e0 + F v + L (v kron v),
    F = W^T conj(g_d) kron B + W^T C^T kron g_d,    L = W^T C^T kron B.

Both factors of ``G_l`` carry ``diag(v)`` (not its conjugate), so the quadratic
part is holomorphic: ``u^H L (v kron v) = v^T Lt v`` with ``Lt`` the row-major
reshape of ``u^H L``, and ``Re{v^T Lt v} = -vb^T Lb vb`` for ``vb = [Re v; Im v]``
and ``Lb = [[-Re Lt, Im Lt], [Im Lt, Re Lt]]``.
"""

from dataclasses import dataclass

import numpy as np

from .active import add_link_constraints, interferers
from .conic import ProgramBuilder, Status, solve_conic
from .metrics import Scheme
from .numerics import herm, max_eig_hermitian


class AffinizationError(RuntimeError):
    """A constructed sensing affinization failed its numerical identities."""


# --------------------------------------------------------------------------
# effective channels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveChannels:
    """``rows[i, j]`` is the length-(N+1) row with ``rows[i, j] @ [v; 1] = H_i^H w_j``."""

    rows: np.ndarray  # (K, K+1, N+1)

    @property
    def N(self):
        return self.rows.shape[2] - 1

    def amplitudes(self, v):
        vt = np.append(np.asarray(v, dtype=complex), 1.0)
        return self.rows @ vt


def build_effective_channels(ch, W):
    GW = ch.G @ W                                   # (N, K+1)
    ris = np.conj(ch.h_r)[:, None, :] * GW.T[None]  # (K, K+1, N)
    direct = (np.conj(ch.h_d) @ W)[:, :, None]      # (K, K+1, 1)
    return EffectiveChannels(np.concatenate([ris, direct], axis=2))


# --------------------------------------------------------------------------
# sensing affinization
# --------------------------------------------------------------------------

def real_embedding(Lt):
    R, I = Lt.real, Lt.imag
    return np.block([[-R, I], [I, R]])


def stack_real(v):
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag])


def second_order_bound(Lb, lam, v_hat_bar, v_bar):
    """Upper bound on ``vb^T Lb vb`` from ``Lb + Lb^T - lam I <= 0``.

    Equals ``v_hat^T (Lb + Lb^T - lam I) vb - v_hat^T Lb^T v_hat + lam N`` with
    ``N`` half the length of ``vb``; exact at ``vb = v_hat`` and valid for every
    ``vb`` with ``||vb||^2 = ||v_hat||^2 = N``.
    """
    n2 = len(v_bar)
    S = Lb + Lb.T - lam * np.eye(n2)
    return float(v_hat_bar @ S @ v_bar - v_hat_bar @ Lb.T @ v_hat_bar + lam * n2 / 2)


@dataclass(frozen=True)
class SensingAffinization:
    """Linear restriction ``Re{ut^H v} <= delta4`` of one radar constraint around ``v_hat``."""

    F: np.ndarray       # (M(K+1), N)
    L: np.ndarray       # (M(K+1), N^2)
    Lt: np.ndarray      # (N, N)
    Lb: np.ndarray      # (2N, 2N)
    lam: float
    delta3: float
    delta4: float
    ut: np.ndarray      # (N,)
    d: float
    c: np.ndarray       # u^H F
    u: np.ndarray
    v_hat: np.ndarray
    d_complex: complex = 0j   # u^H e0, the v-independent part of the echo projection

    @property
    def N(self):
        return self.Lt.shape[0]

    def echo_projection(self, v):
        """Exact ``u^H vec(G_l W)`` at ``v``."""
        v = np.asarray(v, dtype=complex)
        return complex(self.d_complex + self.c @ v + v @ self.Lt @ v)

    def affine_value(self, v):
        """``Re{ut^H v} - delta4`` (<= 0 when the restriction holds)."""
        return float(np.real(np.vdot(self.ut, v)) - self.delta4)

    def exact_value(self, v):
        """``delta3 - Re{u^H echo(v)}`` (<= 0 when the exact restriction holds)."""
        return float(self.delta3 - self.echo_projection(v).real)

    def contract_errors(self, rng, probes=50):
        """Worst relative errors of the reshape and real-embedding identities."""
        N = self.N
        reshape_err = embed_err = 0.0
        for _ in range(probes):
            v = np.exp(2j * np.pi * rng.random(N))
            lhs = np.vdot(self.u, self.L @ np.kron(v, v))
            rhs = v @ self.Lt @ v
            reshape_err = max(reshape_err, abs(lhs - rhs) / max(abs(lhs), 1e-300))
            vb = stack_real(v)
            a, b2 = np.real(rhs), -vb @ self.Lb @ vb
            embed_err = max(embed_err, abs(a - b2) / max(abs(a), np.abs(self.Lt).sum(), 1e-300))
        return reshape_err, embed_err


def _sensing_parts(ch, W, l):
    gd, gr = ch.g_d[l], ch.g_r[l]
    B = herm(ch.G) * gr[None, :]           # G^H diag(g_r), (M, N)
    C = np.conj(gr)[:, None] * ch.G        # diag(conj g_r) G, (N, M)
    Wt = W.T
    F = np.kron(Wt @ np.conj(gd)[:, None], B) + np.kron(Wt @ C.T, gd[:, None])
    L = np.kron(Wt @ C.T, B)
    e0 = np.kron(Wt @ np.conj(gd)[:, None], gd[:, None]).ravel()
    return F, L, e0


def build_sensing_affinization(cfg, ch, W, u_l, v_hat, l, check=True, tol=1e-10):
    """Affine restriction of target ``l``'s radar constraint around ``v_hat``.

    Raises :class:`AffinizationError` if the reshape or real-embedding identity
    fails on 50 random unit-modulus probes (relative tolerance ``tol``).
    """
    v_hat = np.asarray(v_hat, dtype=complex)
    N = ch.N
    if len(v_hat) != N:
        raise ValueError("v_hat length does not match the RIS size")
    if np.max(np.abs(np.abs(v_hat) - 1.0), initial=0.0) > 1e-6:
        raise ValueError("v_hat must have unit-modulus entries")
    F, L, e0 = _sensing_parts(ch, W, l)
    u = np.asarray(u_l, dtype=complex)
    Lt = (np.conj(u) @ L).reshape(N, N)
    Lb = real_embedding(Lt)
    lam = max(float(max_eig_hermitian(Lb + Lb.T)), 0.0) if N else 0.0
    uu = np.vdot(u, u).real
    delta3 = float(np.sqrt(cfg.snr_threshold[l] * cfg.noise_radar[l] * uu / (cfg.Q * cfg.rcs[l])))
    d_c = complex(np.vdot(u, e0))
    d = d_c.real
    c = np.conj(u) @ F
    vh = stack_real(v_hat)
    p = np.concatenate([-c.real, c.imag]) + (Lb + Lb.T - lam * np.eye(2 * N)) @ vh
    ut = p[:N] + 1j * p[N:]
    delta4 = float(-delta3 + vh @ Lb.T @ vh + d - lam * N)
    aff = SensingAffinization(F, L, Lt, Lb, lam, delta3, delta4, ut, d, c, u, v_hat, d_c)
    if check and N:
        r_err, e_err = aff.contract_errors(np.random.default_rng(0x5EED))
        if r_err > tol or e_err > tol:
            raise AffinizationError(
                f"target {l}: reshape error {r_err:.2e}, embedding error {e_err:.2e}")
    return aff


# --------------------------------------------------------------------------
# P7
# --------------------------------------------------------------------------

def build_p7(cfg, ch, W, u, v_hat, rho, scheme=Scheme()):
    """Convexified RIS-phase subproblem around ``v_hat`` with CCP penalty ``rho``.

    Variables: ``[Re v; Im v]``, rate epigraph variables, and slacks ``b_n >= 0``
    relaxing ``|v_n| = 1`` into ``|v_n|^2 <= 1 + b_n`` and
    ``2 Re{conj(v_hat_n) v_n} - 1 >= 1 - b_n``.

    The radar restriction uses the affinization with ``lam N`` replaced by
    ``lam ||vb||^2 / 2 + lam N / 2`` (convex in ``vb``), which coincides with it on
    the unit circle and stays a valid bound while the slacks are positive.
    """
    N, K, L = ch.N, ch.K, ch.L
    if N == 0:
        raise ValueError("no RIS elements to optimize")
    W = np.asarray(W, dtype=complex)
    if W.shape != (ch.M, K + 1):
        raise ValueError(f"W has shape {W.shape}, expected {(ch.M, K + 1)}")
    v_hat = np.asarray(v_hat, dtype=complex)
    sig2 = cfg.noise_user
    sensing = scheme.sensing and L > 0
    scheme = Scheme(scheme.noma, sensing)

    b = ProgramBuilder()
    vs = b.add_vars("v", 2 * N).start
    eta = b.add_vars("eta", K).start
    with_tau = [k for k in range(K) if interferers(K, k, scheme)]
    tau0 = b.add_vars("tau", len(with_tau)).start
    tau_of = {k: tau0 + i for i, k in enumerate(with_tau)}
    bs = b.add_vars("b", N).start
    for k in range(K):
        b.maximize(eta + k, 1.0)
        if k in tau_of:
            b.maximize(tau_of[k], -1.0)
        else:
            b.objective_constant += float(np.log(sig2[k]))
    offset = b.objective_constant
    for n in range(N):
        b.maximize(bs + n, -rho)

    x_hat = b.zeros()
    x_hat[vs:vs + N] = v_hat.real
    x_hat[vs + N:vs + 2 * N] = v_hat.imag

    eff = build_effective_channels(ch, W)
    z = []
    for k in range(K):
        s = 1.0 / np.sqrt(sig2[k])
        row = []
        for j in range(K + 1):
            r = eff.rows[k, j] * s
            e = b.caffine(r[N])
            e.coef[vs:vs + N] = r[:N]
            e.coef[vs + N:vs + 2 * N] = 1j * r[:N]
            row.append(e)
        z.append(row)

    rate_vars = {k: (eta + k, tau_of.get(k)) for k in range(K)}
    tau_hat = add_link_constraints(b, z, x_hat, cfg.sinr_threshold, scheme, rate_vars)

    for n in range(N):
        e = b.caffine()
        e.coef[vs + n] = 1.0
        e.coef[vs + N + n] = 1j
        b.quad_le([e], 0.0, b.unit(bs + n), 1.0, tag=f"modulus_out[{n}]")
        row = b.zeros()
        row[vs + n] = 2.0 * v_hat[n].real
        row[vs + N + n] = 2.0 * v_hat[n].imag
        row[bs + n] = 1.0
        b.nonneg(row, -2.0, tag=f"modulus_in[{n}]")
        b.nonneg(b.unit(bs + n), 0.0, tag=f"slack[{n}]")

    affs = []
    if sensing:
        for l in range(L):
            aff = build_sensing_affinization(cfg, ch, W, u[l], v_hat, l)
            affs.append(aff)
            # p . vb + lam/2 ||vb||^2 <= delta4 + lam N / 2, scaled by delta3
            scale = max(aff.delta3, abs(aff.echo_projection(v_hat)))
            row = b.zeros()
            row[vs:vs + N] = -aff.ut.real
            row[vs + N:vs + 2 * N] = -aff.ut.imag
            rhs_c = aff.delta4 + aff.lam * N / 2.0
            if aff.lam > 0:
                half = np.sqrt(aff.lam / 2.0)
                exprs = []
                for n in range(N):
                    e = b.caffine()
                    e.coef[vs + n] = half
                    e.coef[vs + N + n] = 1j * half
                    exprs.append(e)
                b.quad_le(exprs, 0.0, row, rhs_c, scale=scale, tag=f"radar[{l}]")
            else:
                b.nonneg(row / scale, rhs_c / scale, tag=f"radar[{l}]")

    b.meta.update(kind="p7", N=N, K=K, noise=sig2, tau_hat=tau_hat, rho=rho,
                  rate_offset=offset, eta_index={k: eta + k for k in range(K)},
                  tau_index=tau_of, slack=slice(bs, bs + N), v=slice(vs, vs + 2 * N),
                  x_hat=x_hat, affinizations=affs)
    return b.build()


@dataclass(frozen=True)
class P7Result:
    v: np.ndarray            # projected to the unit circle
    v_raw: np.ndarray
    eta: dict
    tau: dict
    objective: float
    max_slack: float
    solution: object

    @property
    def modulus_error(self):
        return float(np.max(np.abs(np.abs(self.v) - 1.0), initial=0.0))


def project_unit(v):
    v = np.asarray(v, dtype=complex)
    mag = np.abs(v)
    out = np.ones_like(v)
    nz = mag > 0
    out[nz] = v[nz] / mag[nz]
    return out


def quantize_phases(v, bits):
    """Nearest point of the ``2**bits`` uniform phase grid, entrywise."""
    step = 2 * np.pi / (2 ** bits)
    return np.exp(1j * step * np.round(np.angle(v) / step))


def solve_p7(program, previous_objective=None, tol=1e-8, gap_tol=1e-8):
    """Solve a program from :func:`build_p7` and project ``v`` onto the unit circle.

    Returns ``(result, solution)``; ``result`` is None when the solver failed.
    """
    sol = solve_conic(program, tol, gap_tol)
    if sol.status is Status.NUMERICAL_TROUBLE:
        sol = solve_conic(program, tol * 100, gap_tol * 100)
    if not sol.ok:
        return None, sol
    x = np.asarray(sol.primal)
    meta = program.meta
    N = meta["N"]
    vb = x[meta["v"]]
    v_raw = vb[:N] + 1j * vb[N:]
    noise = meta["noise"]
    eta = {k: float(x[i] + np.log(noise[k])) for k, i in meta["eta_index"].items()}
    tau = {k: float(x[i] + np.log(noise[k])) for k, i in meta["tau_index"].items()}
    slack = x[meta["slack"]]
    return P7Result(project_unit(v_raw), v_raw, eta, tau, sol.objective_value,
                    float(np.max(slack, initial=0.0)), sol), sol


def align_phases(ch, v0, max_iter=200):
    """Local ascent of ``sum_k log ||h_d,k^H + h_r,k^H diag(v) G||^2`` over the phases, from ``v0``.

    Used as an informed starting point for the alternating optimization; the
    result has unit-modulus entries.
    """
    from scipy.optimize import minimize

    v0 = np.asarray(v0, dtype=complex)
    if ch.N == 0:
        return v0
    hd, hr, G = np.conj(ch.h_d), np.conj(ch.h_r), ch.G

    def f(theta):
        v = np.exp(1j * theta)
        rows = hd + (hr * v) @ G                       # (K, M)
        g = np.sum(np.abs(rows) ** 2, axis=1)
        # d||row_k||^2 / d theta_n = -2 Im{v_n hr_kn G_n . conj(row_k)}
        inner = (hr * v) * (np.conj(rows) @ G.T)       # (K, N)
        grad = np.sum(-2.0 * np.imag(inner) / g[:, None], axis=0)
        return -float(np.sum(np.log(g))), -grad

    res = minimize(f, np.angle(v0), jac=True, method="L-BFGS-B", options={"maxiter": max_iter})
    return np.exp(1j * res.x)
