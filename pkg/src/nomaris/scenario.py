"""System configuration, geometry and random channel generation.

Units: positions in meters, powers in dBm / dB in the config file. The
linear values used by every computation are exposed as properties
(``p_max`` in watts, ``noise_user`` in watts, ...) and derived once from the
stored dB fields.

Array conventions: DFBS and RIS are uniform linear arrays along the y axis with
half-wavelength spacing, so the angle to another node is measured from the +x
axis and the steering entry for element ``n`` is ``exp(j*pi*n*sin(angle))``.
The received baseband at user ``k`` is ``(h_d[k]^H + h_r[k]^H diag(v) G) x``.
"""

from dataclasses import dataclass, field, fields, replace, asdict
import json
import math

import numpy as np

from .numerics import db_to_linear, dbm_to_watt


class InfeasibleScenario(ValueError):
    """No design satisfies the scenario's constraints (or none could be found)."""


@dataclass(frozen=True)
class PathlossExponents:
    bs_ris: float = 1.1
    ris_target: float = 1.1
    ris_user: float = 1.2
    bs_target: float = 1.2
    bs_user: float = 1.7


@dataclass(frozen=True)
class CcpPenalty:
    rho0: float = 10.0
    rho_growth: float = 3.0
    rho_max: float = 1e5


@dataclass(frozen=True)
class Geometry:
    bs: tuple = (0.0, 0.0)
    ris: tuple = (40.0, 0.0)
    users: tuple = ()
    targets: tuple = ()

    @classmethod
    def default(cls, K, L, bs_ris=40.0, ris_user=8.0, ris_target=4.0):
        """DFBS at the origin, RIS on the x axis, users and targets on circles around the RIS."""
        ris = (bs_ris, 0.0)

        def ring(count, radius, start_deg):
            pts = []
            for i in range(count):
                a = math.radians(start_deg + 360.0 * i / count)
                pts.append((ris[0] + radius * math.cos(a), ris[1] + radius * math.sin(a)))
            return tuple(pts)

        return cls((0.0, 0.0), ris, ring(K, ris_user, 45.0), ring(L, ris_target, 90.0))


def _per_entity(value, count, name):
    if np.ndim(value) == 0:
        return tuple(float(value) for _ in range(count))
    out = tuple(float(v) for v in value)
    if len(out) != count:
        raise ValueError(f"{name} has {len(out)} entries, expected {count}")
    return out


@dataclass(frozen=True)
class SystemConfig:
    M: int = 6
    K: int = 4
    L: int = 2
    N: int = 16
    Q: int = 1024
    noise_user_dbm: tuple = -90.0
    noise_radar_dbm: tuple = -90.0
    rcs_var: tuple = 1.0
    snr_threshold_db: tuple = 10.0
    sinr_threshold_db: tuple = 5.0
    p_max_dbm: float = 40.0
    rician_kappa_db: float = 3.0
    pathloss_exponents: PathlossExponents = field(default_factory=PathlossExponents)
    pathloss_ref_db: float = -30.0
    geometry: Geometry = None
    seed: int = 0
    epsilon_conv: float = 1e-3
    max_ao_iters: int = 20
    ccp_penalty: CcpPenalty = field(default_factory=CcpPenalty)
    discrete_bits: int = 3
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.L < 0 or self.N < 0 or self.Q < 1:
            raise ValueError("need M >= 1, K >= 1, L >= 0, N >= 0, Q >= 1")
        put = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        put("noise_user_dbm", _per_entity(self.noise_user_dbm, self.K, "noise_user_dbm"))
        put("sinr_threshold_db", _per_entity(self.sinr_threshold_db, self.K, "sinr_threshold_db"))
        for name in ("noise_radar_dbm", "rcs_var", "snr_threshold_db"):
            put(name, _per_entity(getattr(self, name), self.L, name))
        if isinstance(self.pathloss_exponents, dict):
            put("pathloss_exponents", PathlossExponents(**self.pathloss_exponents))
        if isinstance(self.ccp_penalty, dict):
            put("ccp_penalty", CcpPenalty(**self.ccp_penalty))
        geo = self.geometry
        if geo is None:
            geo = Geometry.default(self.K, self.L)
        elif isinstance(geo, dict):
            geo = Geometry(
                tuple(geo.get("bs", (0.0, 0.0))),
                tuple(geo.get("ris", (40.0, 0.0))),
                tuple(tuple(p) for p in geo.get("users", ())),
                tuple(tuple(p) for p in geo.get("targets", ())),
            )
        if len(geo.users) != self.K or len(geo.targets) != self.L:
            raise ValueError("geometry must list exactly K users and L targets")
        put("geometry", geo)
        if not math.isfinite(self.p_max_dbm) or self.p_max <= 0.0:
            raise InfeasibleScenario("transmit power budget must be positive")
        if min(self.rcs_var, default=1.0) <= 0:
            raise ValueError("rcs_var must be positive")
        if self.discrete_bits < 1:
            raise ValueError("discrete_bits must be >= 1")

    # linear views ---------------------------------------------------------
    @property
    def p_max(self):
        return float(dbm_to_watt(self.p_max_dbm))

    @property
    def noise_user(self):
        return dbm_to_watt(self.noise_user_dbm).reshape(self.K)

    @property
    def noise_radar(self):
        return dbm_to_watt(self.noise_radar_dbm).reshape(self.L)

    @property
    def rcs(self):
        return np.asarray(self.rcs_var, dtype=float).reshape(self.L)

    @property
    def snr_threshold(self):
        return db_to_linear(self.snr_threshold_db).reshape(self.L)

    @property
    def sinr_threshold(self):
        return db_to_linear(self.sinr_threshold_db).reshape(self.K)

    @property
    def kappa(self):
        return float(db_to_linear(self.rician_kappa_db))

    # derived configs -------------------------------------------------------
    def permute_users(self, perm):
        perm = list(perm)
        geo = replace(self.geometry, users=tuple(self.geometry.users[i] for i in perm))
        return replace(
            self,
            noise_user_dbm=tuple(self.noise_user_dbm[i] for i in perm),
            sinr_threshold_db=tuple(self.sinr_threshold_db[i] for i in perm),
            geometry=geo,
        )

    def to_dict(self):
        d = asdict(self)
        g = d["geometry"]
        d["geometry"] = {k: [list(p) for p in v] if k in ("users", "targets") else list(v)
                         for k, v in g.items()}
        return d


PRESETS = {
    "desk": {},
    "paper": {"N": 60},
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kw = dict(PRESETS[name])
    kw.update(overrides)
    return SystemConfig(**kw)


def config_from_dict(data):
    known = {f.name for f in fields(SystemConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return SystemConfig(**data)


def load_config(path):
    with open(path) as fh:
        data = json.load(fh)
    return config_from_dict(data)


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------

def path_gain(distance_m, exponent, ref_db=-30.0):
    """Power gain ``10^(ref_db/10) * d^-exponent`` of a link of length ``distance_m``."""
    if not distance_m > 0:
        raise ValueError(f"path_gain needs a positive distance, got {distance_m}")
    return 10.0 ** (ref_db / 10.0) * distance_m ** (-exponent)


def steering(dim, angle):
    return np.exp(1j * np.pi * np.arange(dim) * np.sin(angle))


def angle_between(p, q):
    return math.atan2(q[1] - p[1], q[0] - p[0])


def distance(p, q):
    return math.hypot(q[0] - p[0], q[1] - p[1])


def rician_vector(dim, kappa_linear, los, gain, rng):
    """``sqrt(gain) * (sqrt(k/(1+k)) los + sqrt(1/(1+k)) w)`` with ``w ~ CN(0, I)``."""
    los = np.asarray(los, dtype=complex).reshape(dim)
    w = (rng.standard_normal(dim) + 1j * rng.standard_normal(dim)) / np.sqrt(2.0)
    a = np.sqrt(kappa_linear / (1.0 + kappa_linear))
    b = np.sqrt(1.0 / (1.0 + kappa_linear))
    return np.sqrt(gain) * (a * los + b * w)


@dataclass(frozen=True)
class ChannelSet:
    """One channel draw. Row ``k`` of ``h_d`` is the vector h_{d,k}, etc."""

    h_d: np.ndarray  # (K, M)
    h_r: np.ndarray  # (K, N)
    G: np.ndarray    # (N, M)
    g_d: np.ndarray  # (L, M)
    g_r: np.ndarray  # (L, N)

    @property
    def M(self):
        return self.h_d.shape[1]

    @property
    def K(self):
        return self.h_d.shape[0]

    @property
    def N(self):
        return self.G.shape[0]

    @property
    def L(self):
        return self.g_d.shape[0]

    def permute_users(self, perm):
        perm = np.asarray(perm)
        return replace(self, h_d=self.h_d[perm], h_r=self.h_r[perm])

    def without_ris(self):
        return ChannelSet(self.h_d, self.h_r[:, :0], self.G[:0], self.g_d, self.g_r[:, :0])


def generate_channels(cfg, rng):
    """Draw all channels for ``cfg``.

    Each link family is drawn from its own child stream of ``rng`` (in the fixed
    order h_d, h_r, G, g_d, g_r) so the direct links do not change when only
    ``N`` changes. DFBS-RIS, DFBS-user and RIS-user links are Rician with factor
    ``cfg.kappa``; both target links are Rayleigh.
    """
    geo, ple, ref = cfg.geometry, cfg.pathloss_exponents, cfg.pathloss_ref_db
    M, N, kappa = cfg.M, cfg.N, cfg.kappa
    s_hd, s_hr, s_G, s_gd, s_gr = rng.spawn(5)

    h_d = np.zeros((cfg.K, M), dtype=complex)
    h_r = np.zeros((cfg.K, N), dtype=complex)
    for k, pos in enumerate(geo.users):
        h_d[k] = rician_vector(M, kappa, steering(M, angle_between(geo.bs, pos)),
                               path_gain(distance(geo.bs, pos), ple.bs_user, ref), s_hd)
        if N:
            h_r[k] = rician_vector(N, kappa, steering(N, angle_between(geo.ris, pos)),
                                   path_gain(distance(geo.ris, pos), ple.ris_user, ref), s_hr)
    if N:
        los = np.outer(steering(N, angle_between(geo.ris, geo.bs)),
                       np.conj(steering(M, angle_between(geo.bs, geo.ris))))
        g = path_gain(distance(geo.bs, geo.ris), ple.bs_ris, ref)
        G = rician_vector(N * M, kappa, los.reshape(-1), g, s_G).reshape(N, M)
    else:
        G = np.zeros((0, M), dtype=complex)

    g_d = np.zeros((cfg.L, M), dtype=complex)
    g_r = np.zeros((cfg.L, N), dtype=complex)
    for l, pos in enumerate(geo.targets):
        g_d[l] = rician_vector(M, 0.0, np.zeros(M), path_gain(distance(geo.bs, pos), ple.bs_target, ref), s_gd)
        if N:
            g_r[l] = rician_vector(N, 0.0, np.zeros(N),
                                   path_gain(distance(geo.ris, pos), ple.ris_target, ref), s_gr)
    return ChannelSet(h_d, h_r, G, g_d, g_r)


def aggregate_gains(ch, v):
    """``||h_d[k]^H + h_r[k]^H diag(v) G||^2`` for every user."""
    rows = np.conj(ch.h_d) + (np.conj(ch.h_r) * v) @ ch.G
    return np.sum(np.abs(rows) ** 2, axis=1)


def order_users(ch, v):
    """Permutation putting the strongest aggregated channel first (stable on ties)."""
    return np.argsort(-aggregate_gains(ch, v), kind="stable")


def random_phases(n, rng):
    return np.exp(2j * np.pi * rng.random(n))
