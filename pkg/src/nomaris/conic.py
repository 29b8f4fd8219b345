"""Conic programs over zero, nonnegative, second-order and exponential cones.

A program maximizes ``c @ x + c0`` over real ``x`` subject to blocks
``A @ x + b in K``. Cone conventions for the block value ``r = A @ x + b``:

* ``zero``   : r == 0
* ``nonneg`` : r >= 0
* ``soc``    : r[0] >= ||r[1:]||
* ``exp``    : r = (a, b, c) with c >= b * exp(a / b), b > 0 (closure included)

Complex decision variables never reach this module; builders split them into
real and imaginary parts before emitting rows.
"""

from dataclasses import dataclass, field
import enum
import io

import numpy as np
import scipy.sparse as sp

import clarabel

CONE_KINDS = ("zero", "nonneg", "soc", "exp")


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_TROUBLE = "NumericalTrouble"


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConeBlock:
    kind: str
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError("block A and b disagree on the number of rows")
        if self.kind == "exp" and A.shape[0] != 3:
            raise ValueError("exponential-cone blocks have exactly 3 rows")
        if self.kind == "soc" and A.shape[0] < 1:
            raise ValueError("empty second-order cone block")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def dim(self):
        return self.A.shape[0]

    def value(self, x):
        return self.A @ x + self.b

    def violation(self, x):
        """Nonnegative distance-like measure of how far ``x`` is from the cone."""
        r = self.value(x)
        if self.kind == "zero":
            return float(np.max(np.abs(r)))
        if self.kind == "nonneg":
            return float(max(0.0, -np.min(r)))
        if self.kind == "soc":
            return float(max(0.0, np.linalg.norm(r[1:]) - r[0]))
        a, bb, c = r
        if bb <= 0.0:
            # closure: b == 0 requires a <= 0, c >= 0
            return float(max(-bb, 0.0) + max(a, 0.0) + max(-c, 0.0))
        expo = min(a / bb, 700.0)
        return float(max(0.0, bb * np.exp(expo) - c))


@dataclass(frozen=True)
class ConicProgram:
    num_vars: int
    objective: np.ndarray
    blocks: tuple = ()
    objective_constant: float = 0.0
    var_names: tuple = ()
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        if c.shape[0] != self.num_vars:
            raise ValueError("objective length must equal num_vars")
        for blk in self.blocks:
            if blk.A.shape[1] != self.num_vars:
                raise ValueError(
                    f"{blk.kind} block has input dimension {blk.A.shape[1]}, "
                    f"expected {self.num_vars}"
                )
        object.__setattr__(self, "objective", _frozen(c))
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def evaluate(self, x):
        return float(self.objective @ x + self.objective_constant)

    def max_violation(self, x):
        if not self.blocks:
            return 0.0
        return max(blk.violation(x) for blk in self.blocks)

    def count(self, kind):
        return sum(1 for blk in self.blocks if blk.kind == kind)


@dataclass(frozen=True)
class ConicSolution:
    status: Status
    primal: np.ndarray
    objective_value: float
    max_residual: float
    iterations: int = 0
    solve_time: float = 0.0

    @property
    def ok(self):
        return self.status is Status.OPTIMAL


_STATUS_MAP = {
    "Solved": Status.OPTIMAL,
    "AlmostSolved": Status.OPTIMAL,
    "PrimalInfeasible": Status.INFEASIBLE,
    "AlmostPrimalInfeasible": Status.INFEASIBLE,
    "DualInfeasible": Status.UNBOUNDED,
    "AlmostDualInfeasible": Status.UNBOUNDED,
}


def solve_conic(program, tol=1e-8, gap_tol=1e-8, max_iter=200):
    """Solve ``program`` with an interior-point method.

    Returns a :class:`ConicSolution`. ``Optimal`` is reported only when the
    solver converged *and* the primal point satisfies every block within
    ``tol``; a converged point that misses the tolerance is reported as
    ``NumericalTrouble`` so the caller can decide to retry with a looser one.
    """
    n = program.num_vars
    if program.blocks:
        A = np.vstack([-blk.A for blk in program.blocks])
        b = np.concatenate([blk.b for blk in program.blocks])
    else:
        A = np.zeros((0, n))
        b = np.zeros(0)
    cones = []
    for blk in program.blocks:
        if blk.kind == "zero":
            cones.append(clarabel.ZeroConeT(blk.dim))
        elif blk.kind == "nonneg":
            cones.append(clarabel.NonnegativeConeT(blk.dim))
        elif blk.kind == "soc":
            cones.append(clarabel.SecondOrderConeT(blk.dim))
        else:
            cones.append(clarabel.ExponentialConeT())

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = tol * 1e-2
    settings.tol_gap_abs = gap_tol * 1e-2
    settings.tol_gap_rel = gap_tol * 1e-2
    settings.max_iter = max_iter
    solver = clarabel.DefaultSolver(
        sp.csc_matrix((n, n)), -np.asarray(program.objective), sp.csc_matrix(A), b, cones, settings
    )
    res = solver.solve()
    x = np.array(res.x, dtype=float)
    status = _STATUS_MAP.get(str(res.status), Status.NUMERICAL_TROUBLE)
    if status is Status.OPTIMAL and not np.all(np.isfinite(x)):
        status = Status.NUMERICAL_TROUBLE
    resid = program.max_violation(x) if np.all(np.isfinite(x)) else np.inf
    if status is Status.OPTIMAL and resid > tol:
        status = Status.NUMERICAL_TROUBLE
    obj = program.evaluate(x) if np.all(np.isfinite(x)) else np.nan
    x.setflags(write=False)
    return ConicSolution(status, x, obj, resid, int(res.iterations), float(res.solve_time))


# --------------------------------------------------------------------------
# plain-text dump, used for differential testing against external tools
#
#   conic-program 1
#   vars <n>
#   names <name_0> ... (optional)
#   objective <c0> <c_0> ... <c_{n-1}>
#   block <kind> <rows>
#   <b_i> <A_i0> ... <A_i,n-1>        (one line per row)
# --------------------------------------------------------------------------

def dump_program(program):
    out = io.StringIO()
    n = program.num_vars
    out.write("conic-program 1\n")
    out.write(f"vars {n}\n")
    if program.var_names:
        out.write("names " + " ".join(program.var_names) + "\n")
    out.write("objective " + " ".join(repr(float(v)) for v in
                                      (program.objective_constant, *program.objective)) + "\n")
    for blk in program.blocks:
        out.write(f"block {blk.kind} {blk.dim}\n")
        for bi, row in zip(blk.b, blk.A):
            out.write(" ".join(repr(float(v)) for v in (bi, *row)) + "\n")
    return out.getvalue()


def load_program(text):
    lines = iter(text.strip().splitlines())
    header = next(lines).split()
    if header != ["conic-program", "1"]:
        raise ValueError("not a conic-program dump")
    n = int(next(lines).split()[1])
    line = next(lines)
    names = ()
    if line.startswith("names"):
        names = tuple(line.split()[1:])
        line = next(lines)
    vals = [float(v) for v in line.split()[1:]]
    c0, c = vals[0], np.array(vals[1:])
    blocks = []
    for line in lines:
        _, kind, rows = line.split()
        data = np.array([[float(v) for v in next(lines).split()] for _ in range(int(rows))])
        blocks.append(ConeBlock(kind, data[:, 1:].reshape(-1, n), data[:, 0]))
    return ConicProgram(n, c, tuple(blocks), c0, names)


# --------------------------------------------------------------------------
# builder
# --------------------------------------------------------------------------

@dataclass
class CAffine:
    """Complex scalar ``coef @ x + const`` of the real decision vector ``x``."""

    coef: np.ndarray
    const: complex = 0.0

    def __call__(self, x):
        return complex(self.coef @ x + self.const)

    def scaled(self, s):
        return CAffine(self.coef * s, self.const * s)

    def re(self):
        return self.coef.real.copy(), float(np.real(self.const))

    def im(self):
        return self.coef.imag.copy(), float(np.imag(self.const))


def abs2_tangent(expr, x_hat):
    """Affine minorant of ``|expr(x)|**2`` that touches it at ``x_hat``.

    Returns ``(row, const)`` for ``2 Re{z_hat^* z(x)} - |z_hat|^2``.
    """
    z_hat = expr(x_hat)
    row = 2.0 * np.real(np.conj(z_hat) * expr.coef)
    const = 2.0 * float(np.real(np.conj(z_hat) * expr.const)) - abs(z_hat) ** 2
    return row, const


@dataclass
class ProgramBuilder:
    num_vars: int = 0
    names: list = field(default_factory=list)
    groups: dict = field(default_factory=dict)
    _blocks: list = field(default_factory=list)
    _objective: dict = field(default_factory=dict)
    objective_constant: float = 0.0
    meta: dict = field(default_factory=dict)

    def add_vars(self, name, n):
        sl = slice(self.num_vars, self.num_vars + n)
        self.groups[name] = sl
        self.names.extend(f"{name}[{i}]" for i in range(n))
        self.num_vars += n
        return sl

    def zeros(self):
        return np.zeros(self.num_vars)

    def unit(self, index, scale=1.0):
        row = self.zeros()
        row[index] = scale
        return row

    def caffine(self, const=0.0):
        return CAffine(np.zeros(self.num_vars, dtype=complex), complex(const))

    def maximize(self, index, weight):
        self._objective[index] = self._objective.get(index, 0.0) + weight

    def add(self, kind, rows, consts, tag=""):
        rows = [np.asarray(r, dtype=float) for r in rows]
        self._blocks.append((kind, rows, list(consts), tag))

    def nonneg(self, row, const, tag=""):
        self.add("nonneg", [row], [const], tag)

    def fix_zero(self, index, tag=""):
        self.add("zero", [self.unit(index)], [0.0], tag)

    def soc(self, rows, consts, tag=""):
        """``rows[0] @ x + consts[0] >= ||(rows[1:] @ x + consts[1:])||``."""
        self.add("soc", rows, consts, tag)

    def exp_cone(self, rows, consts, tag=""):
        self.add("exp", rows, consts, tag)

    def quad_le(self, exprs, const_sq, rhs_row, rhs_const, scale=1.0, tag=""):
        """``sum |exprs|**2 + const_sq <= rhs`` as a rotated second-order cone.

        Uses ``q'q <= d  <=>  ||(2q, d - 1)|| <= d + 1`` after dividing both sides
        by ``scale`` so the cone entries stay O(1).
        """
        s = 1.0 / scale
        rs = np.sqrt(s)
        top_row = np.asarray(rhs_row) * s
        rows = [top_row]
        consts = [rhs_const * s + 1.0]
        for e in exprs:
            for part in (e.re(), e.im()):
                rows.append(2.0 * rs * part[0])
                consts.append(2.0 * rs * part[1])
        if const_sq > 0:
            rows.append(self.zeros())
            consts.append(2.0 * np.sqrt(const_sq * s))
        rows.append(top_row)
        consts.append(rhs_const * s - 1.0)
        self.soc(rows, consts, tag)

    def log_le(self, t_index, arg_row, arg_const, shift=0.0, tag=""):
        """``x[t_index] <= log(arg)`` as ``(t - shift, 1, arg * e^-shift)`` in K_exp."""
        es = np.exp(-shift)
        self.exp_cone(
            [self.unit(t_index), self.zeros(), np.asarray(arg_row) * es],
            [-shift, 1.0, arg_const * es],
            tag,
        )

    def build(self):
        n = self.num_vars
        c = np.zeros(n)
        for i, w in self._objective.items():
            c[i] += w
        blocks = []
        for kind, rows, consts, _ in self._blocks:
            A = np.vstack([np.pad(r, (0, n - r.shape[0])) for r in rows])
            blocks.append(ConeBlock(kind, A, np.asarray(consts)))
        return ConicProgram(n, c, tuple(blocks), self.objective_constant, tuple(self.names),
                            dict(self.meta))

    @property
    def tags(self):
        return [t for *_, t in self._blocks]
