"""Alternating-optimization driver, baselines and seeded experiment sweeps.

RNG derivation: every (seed, cell) draws its channel from
``SeedSequence([seed, 0])`` and its initial RIS phases from
``SeedSequence([seed, 1])``. All baselines of one seed therefore see the same
channel, the same initial phases and the same user order (paired comparison).
"""

from dataclasses import dataclass, field, replace
import csv
import enum
import json
import math
import os
import time

import numpy as np

from .active import P3Linearization, build_p3, solve_p3
from .metrics import (Design, Scheme, angular_beampattern, beampattern, check_feasible,
                      radar_snr_lb, sum_rate, target_factors, user_rows)
from .passive import align_phases, build_p7, quantize_phases, solve_p7
from .receive import update_filters
from .scenario import (InfeasibleScenario, SystemConfig, config_from_dict, generate_channels,
                       order_users, random_phases)

RESTORATION_ROUNDS = 10
INIT_TOL = 1e-6
FINAL_TOL = 1e-5


class RunStatus(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    FAILED_FEASIBILITY = "FailedFeasibility"


class BaselineKind(str, enum.Enum):
    PROPOSED = "Proposed"
    COMM_ONLY = "CommOnly"
    DISCRETE_PHASE = "DiscretePhase"
    RANDOM_PHASE = "RandomPhase"
    WITHOUT_RIS = "WithoutRis"
    WITHOUT_NOMA = "WithoutNoma"


@dataclass(frozen=True)
class Baseline:
    """A baseline and its parameter.

    ``bits`` is the phase resolution of ``DiscretePhase``. ``WithoutNoma`` comes
    in two variants: ``"oma"`` (default; users take turns in equal orthogonal
    slots) and ``"tin"`` (all users share the resource, every other stream is
    treated as noise, no SIC).
    """

    kind: BaselineKind = BaselineKind.PROPOSED
    bits: int = 3
    variant: str = "oma"

    def __post_init__(self):
        object.__setattr__(self, "kind", BaselineKind(self.kind))
        if self.kind is BaselineKind.DISCRETE_PHASE and self.bits < 1:
            raise ValueError("DiscretePhase needs bits >= 1")
        if self.variant not in ("oma", "tin"):
            raise ValueError(f"unknown WithoutNoma variant {self.variant!r}")

    @classmethod
    def parse(cls, text):
        """``Proposed``, ``DiscretePhase:4``, ``WithoutNoma:tin``, ... (case-insensitive)."""
        if isinstance(text, Baseline):
            return text
        name, _, arg = str(text).partition(":")
        lookup = {k.value.lower(): k for k in BaselineKind}
        try:
            kind = lookup[name.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown baseline {text!r}; choose from {[k.value for k in BaselineKind]}")
        arg = arg.strip().lower()
        if kind is BaselineKind.DISCRETE_PHASE:
            return cls(kind, int(arg) if arg else 3)
        if kind is BaselineKind.WITHOUT_NOMA:
            return cls(kind, variant=arg or "oma")
        if arg:
            raise ValueError(f"baseline {name} takes no parameter")
        return cls(kind)

    @property
    def label(self):
        if self.kind is BaselineKind.DISCRETE_PHASE:
            return f"{self.kind.value}:{self.bits}"
        if self.kind is BaselineKind.WITHOUT_NOMA and self.variant == "tin":
            return f"{self.kind.value}:tin"
        return self.kind.value

    @property
    def time_shared(self):
        return self.kind is BaselineKind.WITHOUT_NOMA and self.variant == "oma"

    @property
    def scheme(self):
        tin = self.kind is BaselineKind.WITHOUT_NOMA and self.variant == "tin"
        return Scheme(noma=not tin, sensing=self.kind is not BaselineKind.COMM_ONLY)

    @property
    def optimizes_phases(self):
        return self.kind not in (BaselineKind.RANDOM_PHASE, BaselineKind.WITHOUT_RIS)


ALL_BASELINES = tuple(Baseline(k) for k in BaselineKind)


@dataclass
class IterationRecord:
    surrogate: float
    sum_rate: float
    residuals: dict
    rho: float
    wall_ms: float
    phase_step: str = "skipped"   # accepted / rejected / failed / skipped
    max_slack: float = 0.0


@dataclass
class SolveTrace:
    iterations: list = field(default_factory=list)
    status: RunStatus = RunStatus.MAX_ITERS
    initial_sum_rate: float = float("nan")
    restoration_rounds: int = 0
    message: str = ""

    @property
    def sum_rates(self):
        return [self.initial_sum_rate] + [r.sum_rate for r in self.iterations]

    @property
    def surrogates(self):
        return [r.surrogate for r in self.iterations]

    def __len__(self):
        return len(self.iterations)

    def to_dict(self):
        return {
            "status": self.status.value,
            "initial_sum_rate": self.initial_sum_rate,
            "restoration_rounds": self.restoration_rounds,
            "message": self.message,
            "iterations": [
                {"surrogate": r.surrogate, "sum_rate": r.sum_rate,
                 "residuals": r.residuals, "rho": r.rho, "wall_ms": r.wall_ms,
                 "phase_step": r.phase_step, "max_slack": r.max_slack}
                for r in self.iterations
            ],
        }


# --------------------------------------------------------------------------
# initialization
# --------------------------------------------------------------------------

def order_scenario(cfg, ch, v):
    """Relabel users strongest first under phases ``v``; returns ``(cfg, ch, perm)``."""
    perm = order_users(ch, v)
    return cfg.permute_users(perm), ch.permute_users(perm), perm


def matched_beamformers(cfg, ch, v, sensing=True):
    """Unit-direction matched beams with an equal power split of ``P_max``.

    User columns follow the conjugate aggregated channels; the sensing column
    follows the sum of the targets' conjugate transmit factors.
    """
    M, K = ch.M, ch.K
    W = np.zeros((M, K + 1), dtype=complex)
    rows = user_rows(ch, v)
    for k in range(K):
        W[:, k] = np.conj(rows[k]) / max(np.linalg.norm(rows[k]), 1e-300)
    active = K
    if sensing and ch.L:
        s = sum(np.conj(target_factors(ch, v, l)[1]) / np.linalg.norm(target_factors(ch, v, l)[1])
                for l in range(ch.L))
        W[:, K] = s / max(np.linalg.norm(s), 1e-300)
        active += 1
    return W * np.sqrt(cfg.p_max / active)


def _filters(ch, W, v, scheme, u_prev=None):
    if scheme.sensing and ch.L:
        return update_filters(ch, W, v)
    if u_prev is not None:
        return u_prev
    return np.zeros((ch.L, ch.M * (ch.K + 1)), dtype=complex)


def _feasible(cfg, ch, design, scheme, tol):
    return check_feasible(cfg, ch, design, tol, noma=scheme.noma, sensing=scheme.sensing)


def restore(cfg, ch, design, scheme=Scheme(), rounds=RESTORATION_ROUNDS):
    """Push ``design.W`` towards feasibility by maximizing the common constraint slack.

    Returns ``(design, rounds_used)``; raises :class:`InfeasibleScenario` if the
    design is still infeasible after ``rounds`` solves.
    """
    v = design.v
    for r in range(rounds):
        lin = P3Linearization.at(cfg, ch, v, design.u, design.W)
        res, sol = solve_p3(build_p3(cfg, ch, v, design.u, lin, scheme, restoration=True),
                            tol=cfg.feas_tol, gap_tol=cfg.gap_tol)
        if res is None:
            raise InfeasibleScenario(f"feasibility restoration failed ({sol.status.value})")
        design = design.with_(W=res.W, u=_filters(ch, res.W, v, scheme, design.u))
        if _feasible(cfg, ch, design, scheme, INIT_TOL):
            return design, r + 1
    raise InfeasibleScenario(f"no feasible start after {rounds} restoration rounds")


def initialize(cfg, ch, rng=None, scheme=Scheme(), v0=None):
    """Random phases, matched beams and optimal filters, restored to feasibility if needed.

    Returns ``(design, restoration_rounds)``.
    """
    if v0 is None:
        if rng is None:
            raise ValueError("need either rng or v0")
        v0 = random_phases(ch.N, rng)
    v0 = np.asarray(v0, dtype=complex)
    if not cfg.p_max > 0:
        raise InfeasibleScenario("transmit power budget must be positive")
    W0 = matched_beamformers(cfg, ch, v0, scheme.sensing)
    design = Design(W0, v0, _filters(ch, W0, v0, scheme))
    if _feasible(cfg, ch, design, scheme, INIT_TOL):
        return design, 0
    return restore(cfg, ch, design, scheme)


# --------------------------------------------------------------------------
# AO loop
# --------------------------------------------------------------------------

def ao_solve(cfg, ch, init, scheme=Scheme(), optimize_phases=True, phase_bits=None,
             epsilon=None, max_iters=None, restoration_rounds=0):
    """Alternate the beamforming, filter and phase updates until the P3 surrogate stalls.

    The surrogate is the P3 optimum expressed as a sum rate in bits. The loop
    stops once its relative increase drops below ``epsilon``. A phase update is
    kept only if the projected (and, with ``phase_bits``, quantized) phases give an
    exactly feasible design whose sum rate does not decrease.
    """
    eps = cfg.epsilon_conv if epsilon is None else epsilon
    iters = cfg.max_ao_iters if max_iters is None else max_iters
    pen = cfg.ccp_penalty
    noma = scheme.noma
    tr = SolveTrace(initial_sum_rate=sum_rate(cfg, ch, init, noma),
                    restoration_rounds=restoration_rounds)
    design = init
    rate = tr.initial_sum_rate
    prev = rate
    rho = pen.rho0
    do_phases = optimize_phases and ch.N > 0

    for _ in range(iters):
        t0 = time.perf_counter()
        lin = P3Linearization.at(cfg, ch, design.v, design.u, design.W)
        res, sol = solve_p3(build_p3(cfg, ch, design.v, design.u, lin, scheme),
                            tol=cfg.feas_tol, gap_tol=cfg.gap_tol)
        if res is None:
            tr.status = RunStatus.FAILED_FEASIBILITY
            tr.message = f"beamforming step failed ({sol.status.value})"
            break
        cand = design.with_(W=res.W, u=_filters(ch, res.W, design.v, scheme, design.u))
        new_rate = sum_rate(cfg, ch, cand, noma)
        if not _feasible(cfg, ch, cand, scheme, INIT_TOL):
            tr.status = RunStatus.FAILED_FEASIBILITY
            tr.message = "beamforming step left the feasible set"
            break
        design, rate = cand, new_rate
        surrogate = res.surrogate_bits

        step, slack = "skipped", 0.0
        if do_phases:
            r7, _ = solve_p7(build_p7(cfg, ch, design.W, design.u, design.v, rho, scheme),
                             tol=cfg.feas_tol, gap_tol=cfg.gap_tol)
            step = "failed"
            if r7 is not None:
                slack = r7.max_slack
                v_new = r7.v if phase_bits is None else quantize_phases(r7.v, phase_bits)
                cand = design.with_(v=v_new, u=_filters(ch, design.W, v_new, scheme, design.u))
                cand_rate = sum_rate(cfg, ch, cand, noma)
                if cand_rate >= rate and _feasible(cfg, ch, cand, scheme, INIT_TOL):
                    design, rate, step = cand, cand_rate, "accepted"
                else:
                    step = "rejected"
            rho = min(rho * pen.rho_growth, pen.rho_max)

        resid = _feasible(cfg, ch, design, scheme, FINAL_TOL).residuals
        tr.iterations.append(IterationRecord(surrogate, rate, resid, rho,
                                             1e3 * (time.perf_counter() - t0), step, slack))
        gain = (surrogate - prev) / max(abs(prev), 1e-12)
        prev = surrogate
        if gain < eps:
            tr.status = RunStatus.CONVERGED
            break

    if tr.status is not RunStatus.FAILED_FEASIBILITY and not _feasible(cfg, ch, design, scheme, FINAL_TOL):
        tr.status = RunStatus.FAILED_FEASIBILITY
        tr.message = "final design violates the constraints"
    aux = {"sum_rate": rate}
    return design.with_(aux=aux), tr


# --------------------------------------------------------------------------
# baselines
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeSharedDesign:
    """Orthogonal access: user ``k`` is served alone in slot ``k`` of ``K`` equal slots.

    ``slots[k]`` is a single-user design (its own beams, phases and filters);
    the sum rate is the slot-share-weighted sum of the per-slot rates.
    """

    slots: tuple
    rates: tuple

    @property
    def sum_rate(self):
        return float(np.mean(self.rates))

    def to_dict(self):
        return {"slots": [d.to_dict() for d in self.slots], "rates": list(self.rates)}


def slot_scenario(cfg, ch, k):
    """Single-user scenario holding only user ``k`` (targets and RIS unchanged)."""
    geo = replace(cfg.geometry, users=(cfg.geometry.users[k],))
    c = replace(cfg, K=1, noise_user_dbm=(cfg.noise_user_dbm[k],),
                sinr_threshold_db=(cfg.sinr_threshold_db[k],), geometry=geo)
    return c, replace(ch, h_d=ch.h_d[k:k + 1], h_r=ch.h_r[k:k + 1])


def _better(a, b):
    """Pick the better of two ``(design, trace)`` runs; a failed run never wins."""
    if a is None:
        return b
    if b is None:
        return a
    fa = a[1].status is RunStatus.FAILED_FEASIBILITY
    fb = b[1].status is RunStatus.FAILED_FEASIBILITY
    if fa != fb:
        return b if fa else a
    return b if b[0].aux["sum_rate"] > a[0].aux["sum_rate"] else a


def _multi_start(cfg, ch, v0, scheme, optimize_phases, bits):
    """AO from ``v0`` and, when phases are optimized, also from the gain-aligned phases."""
    starts = [("random", v0)]
    if optimize_phases and ch.N:
        starts.insert(0, ("aligned", align_phases(ch, v0)))
    best, errors = None, []
    for label, v in starts:
        if bits is not None:
            v = quantize_phases(v, bits)
        try:
            init, rounds = initialize(cfg, ch, scheme=scheme, v0=v)
        except InfeasibleScenario as exc:
            errors.append(f"{label}: {exc}")
            continue
        design, trace = ao_solve(cfg, ch, init, scheme, optimize_phases, bits,
                                 restoration_rounds=rounds)
        trace.message = (trace.message + "; " if trace.message else "") + f"{label} start"
        best = _better(best, (design, trace))
    if best is None:
        raise InfeasibleScenario("; ".join(errors))
    return best


def run_baseline(kind, cfg, ch, rng=None, v0=None, warm_start=None):
    """Run one baseline on an already ordered scenario.

    ``v0`` (or a draw from ``rng``) gives the initial phases. Pipelines that
    optimize the phases also start from the gain-aligned phases
    (:func:`nomaris.passive.align_phases` seeded with ``v0``) and keep the better
    run. For ``CommOnly`` a ``warm_start`` design (normally the proposed
    solution) is additionally tried with its sensing stream removed.

    Returns ``(design, trace)``; for the orthogonal ``WithoutNoma`` variant the
    design is a :class:`TimeSharedDesign` and the trace is the worst slot's.
    """
    base = Baseline.parse(kind)
    scheme = base.scheme
    if v0 is None:
        if rng is None:
            raise ValueError("need either rng or v0")
        v0 = random_phases(ch.N, rng)
    v0 = np.asarray(v0, dtype=complex)
    if base.kind is BaselineKind.WITHOUT_RIS:
        ch = ch.without_ris()
        v0 = v0[:0]
    bits = base.bits if base.kind is BaselineKind.DISCRETE_PHASE else None

    if base.time_shared:
        return _run_time_shared(cfg, ch, v0)

    design, trace = _multi_start(cfg, ch, v0, scheme, base.optimizes_phases, bits)

    if base.kind is BaselineKind.COMM_ONLY and warm_start is not None:
        W = np.array(warm_start.W, dtype=complex)
        W[:, -1] = 0.0
        start = Design(W, np.asarray(warm_start.v), design.u)
        if _feasible(cfg, ch, start, scheme, INIT_TOL):
            d2, t2 = ao_solve(cfg, ch, start, scheme, True, None)
            t2.message = "warm start from the proposed design"
            design, trace = _better((design, trace), (d2, t2))
    return design, trace


def _run_time_shared(cfg, ch, v0):
    slots, rates, traces = [], [], []
    for k in range(ch.K):
        c, sub = slot_scenario(cfg, ch, k)
        d, t = _multi_start(c, sub, v0, Scheme(), True, None)
        slots.append(d)
        rates.append(sum_rate(c, sub, d))
        traces.append(t)
    rank = {RunStatus.FAILED_FEASIBILITY: 0, RunStatus.MAX_ITERS: 1, RunStatus.CONVERGED: 2}
    worst = min(traces, key=lambda t: (rank[t.status], -len(t)))
    trace = SolveTrace(worst.iterations, worst.status, worst.initial_sum_rate,
                       worst.restoration_rounds,
                       f"{ch.K} orthogonal slots; trace of the slowest slot")
    return TimeSharedDesign(tuple(slots), tuple(rates)), trace


def evaluate_run(kind, cfg, ch, design):
    """``(sum_rate, min_snr_margin_db, feasibility_ok)`` of a baseline's output."""
    base = Baseline.parse(kind)
    if base.kind is BaselineKind.WITHOUT_RIS:
        ch = ch.without_ris()
    if isinstance(design, TimeSharedDesign):
        margins, ok = [], True
        for k, d in enumerate(design.slots):
            c, sub = slot_scenario(cfg, ch, k)
            margins.append(snr_margin_db(c, sub, d))
            ok = ok and check_feasible(c, sub, d, FINAL_TOL).feasible
        return design.sum_rate, float(min(margins)), ok
    sch = base.scheme
    ok = check_feasible(cfg, ch, design, FINAL_TOL, noma=sch.noma, sensing=sch.sensing).feasible
    return sum_rate(cfg, ch, design, sch.noma), snr_margin_db(cfg, ch, design), ok


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

SUMMARY_HEADER = ("seed", "baseline", "M", "N", "K", "P_th_dbm", "sum_rate",
                  "min_snr_margin_db", "iterations", "status", "wall_ms")


def cell_streams(seed):
    """``(channel_rng, init_rng)`` for one seed."""
    return (np.random.default_rng(np.random.SeedSequence([seed, 0])),
            np.random.default_rng(np.random.SeedSequence([seed, 1])))


def prepare(cfg, seed):
    """Channel draw, initial phases and user ordering for ``seed``."""
    ch_rng, init_rng = cell_streams(seed)
    ch = generate_channels(cfg, ch_rng)
    v0 = random_phases(cfg.N, init_rng)
    cfg, ch, _ = order_scenario(cfg, ch, v0)
    return cfg, ch, v0


@dataclass
class CellResult:
    seed: int
    baseline: str
    cfg: SystemConfig
    design: Design = None
    trace: SolveTrace = None
    sum_rate: float = float("nan")
    min_snr_margin_db: float = float("nan")
    status: str = "Infeasible"
    wall_ms: float = 0.0
    message: str = ""

    def row(self, timing=True):
        c = self.cfg
        return [self.seed, self.baseline, c.M, c.N, c.K, repr(float(c.p_max_dbm)),
                repr(float(self.sum_rate)), repr(float(self.min_snr_margin_db)),
                len(self.trace) if self.trace else 0, self.status,
                f"{self.wall_ms:.1f}" if timing else "0"]


def snr_margin_db(cfg, ch, design):
    """Worst radar SNR margin over targets in dB (optimal filters if the design has none)."""
    if ch.L == 0:
        return float("nan")
    if not np.all(np.linalg.norm(design.u, axis=1) > 0):
        design = design.with_(u=update_filters(ch, design.W, design.v))
    return float(min(10 * np.log10(max(radar_snr_lb(cfg, ch, design, l), 1e-300) / cfg.snr_threshold[l])
                     for l in range(ch.L)))


def run_seed(cfg, seed, baselines=ALL_BASELINES):
    """Run every baseline on one seed; returns a list of :class:`CellResult`."""
    base_cfg = cfg
    cfg, ch, v0 = prepare(cfg, seed)
    order = [Baseline.parse(b) for b in baselines]
    # the proposed run goes first so CommOnly can warm-start from it
    order.sort(key=lambda b: b.kind is not BaselineKind.PROPOSED)
    out, proposed = {}, None
    for b in order:
        t0 = time.perf_counter()
        cell = CellResult(seed, b.label, base_cfg)
        try:
            design, trace = run_baseline(b, cfg, ch, v0=v0, warm_start=proposed)
        except InfeasibleScenario as exc:
            cell.message = str(exc)
        else:
            cell.design, cell.trace = design, trace
            cell.status = trace.status.value
            cell.sum_rate, cell.min_snr_margin_db, _ = evaluate_run(b, cfg, ch, design)
            cell.message = trace.message
            if b.kind is BaselineKind.PROPOSED and trace.status is not RunStatus.FAILED_FEASIBILITY:
                proposed = design
        cell.wall_ms = 1e3 * (time.perf_counter() - t0)
        out[b.label] = cell
    return [out[Baseline.parse(b).label] for b in baselines]


def split_experiment(data):
    """Separate the optional ``experiment`` section from the scenario keys."""
    data = dict(data)
    exp = data.pop("experiment", {}) or {}
    unknown = set(exp) - {"seeds", "baselines", "sweep"}
    if unknown:
        raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
    return config_from_dict(data), exp


def _sweep_configs(cfg, sweep):
    if not sweep:
        return [cfg]
    if len(sweep) != 1:
        raise ValueError("sweep takes exactly one parameter")
    (key, values), = sweep.items()
    return [replace(cfg, **{key: v}) for v in values]


def run_experiment(config, out_dir, seeds=None, baselines=None, sweep=None, timing=True):
    """Run every (scenario, seed, baseline) cell and write ``summary.csv`` plus one trace JSON per cell.

    ``config`` is a path to a JSON file, a dict, or a :class:`SystemConfig`.
    Seeds, baselines and a one-parameter sweep may come from the file's
    ``experiment`` section or from the keyword arguments (which win).
    With ``timing=False`` the ``wall_ms`` column is written as 0 so reruns are
    byte-identical. Returns the list of :class:`CellResult`.
    """
    exp = {}
    if isinstance(config, (str, os.PathLike)):
        with open(config) as fh:
            config = json.load(fh)
    if isinstance(config, dict):
        config, exp = split_experiment(config)
    seeds = list(seeds if seeds is not None else exp.get("seeds", [config.seed]))
    baselines = list(baselines if baselines is not None else exp.get("baselines", ["Proposed"]))
    sweep = sweep if sweep is not None else exp.get("sweep")

    os.makedirs(out_dir, exist_ok=True)
    trace_dir = os.path.join(out_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)
    results = []
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for ci, cfg in enumerate(_sweep_configs(config, sweep)):
            for seed in seeds:
                for cell in run_seed(cfg, seed, baselines):
                    results.append(cell)
                    w.writerow(cell.row(timing))
                    fh.flush()
                    name = f"s{ci}_seed{seed}_{cell.baseline.replace(':', '-')}.json"
                    body = {"seed": seed, "baseline": cell.baseline, "config": cfg.to_dict(),
                            "status": cell.status, "sum_rate": cell.sum_rate,
                            "message": cell.message,
                            "trace": cell.trace.to_dict() if cell.trace else None}
                    if not timing and body["trace"]:
                        for it in body["trace"]["iterations"]:
                            it["wall_ms"] = 0.0
                    with open(os.path.join(trace_dir, name), "w") as tf:
                        json.dump(_jsonable(body), tf, indent=1, sort_keys=True)
    return results


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


# --------------------------------------------------------------------------
# beampattern output
# --------------------------------------------------------------------------

def default_grid(cfg, steps=50):
    """Square grid covering DFBS, RIS, users and targets with a 10 m margin."""
    geo = cfg.geometry
    pts = [geo.bs, geo.ris, *geo.users, *geo.targets]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    half = max(max(xs) - min(xs), max(ys) - min(ys)) / 2 + 10.0
    cx, cy = (max(xs) + min(xs)) / 2, (max(ys) + min(ys)) / 2
    return {"x_min": cx - half, "x_max": cx + half, "y_min": cy - half, "y_max": cy + half,
            "steps": steps}


def emit_beampattern(cfg, ch, design, grid, path=None):
    """Evaluate the beampattern on a grid and optionally write it as CSV.

    ``grid`` is either ``{x_min, x_max, y_min, y_max, steps}`` (rows ``x, y, bp``)
    or ``{theta_min, theta_max, steps}`` in degrees (rows ``theta_deg, bp_db``,
    DFBS transmit pattern only). Returns the rows.
    """
    steps = int(grid.get("steps", 50))
    if "theta_min" in grid:
        th = np.linspace(grid["theta_min"], grid["theta_max"], steps)
        bp = angular_beampattern(design.W, np.radians(th))
        header = ("theta_deg", "bp_db")
        rows = [(float(t), float(10 * np.log10(max(b, 1e-300)))) for t, b in zip(th, bp)]
    else:
        xs = np.linspace(grid["x_min"], grid["x_max"], steps)
        ys = np.linspace(grid["y_min"], grid["y_max"], steps)
        bp = beampattern(cfg, ch, design, xs, ys)
        header = ("x", "y", "bp")
        rows = [(float(x), float(y), float(bp[iy, ix]))
                for iy, y in enumerate(ys) for ix, x in enumerate(xs)]
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(v) for v in r])
    return rows
