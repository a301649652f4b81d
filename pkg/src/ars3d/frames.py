"""Triangular local frames: parsing, classification and metric quantities.

A frame is the triple of vector fields

    X1 = (1, 0, 0),   X2 = (0, alpha, beta),   X3 = (0, 0, nu)

on a box in R^3, with alpha, beta, nu given as expression trees. The frame
determinant is det(X1, X2, X3) = alpha * nu; its zero set is the singular
surface of the structure.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import expr
from .errors import FrameParseError, SingularSetError
from .expr import Expr, compiled_array, compiled_scalar
from .roots import bisect_root

KINDS = ("riemannian", "type1", "type2")

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in R^3."""

    xmin: float = -10.0
    xmax: float = 10.0
    ymin: float = -10.0
    ymax: float = 10.0
    zmin: float = -10.0
    zmax: float = 10.0

    def contains(self, x: float, y: float, z: float) -> bool:
        return (self.xmin <= x <= self.xmax
                and self.ymin <= y <= self.ymax
                and self.zmin <= z <= self.zmax)

    def as_tuple(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax, self.zmin, self.zmax)


@dataclass(frozen=True)
class FrameSpec:
    """A local triangular frame with optional declared kind and domain box."""

    alpha: Expr
    beta: Expr
    nu: Expr
    declared_kind: str | None = None
    domain_box: Box = field(default_factory=Box)


class PointKind(enum.Enum):
    RIEMANNIAN = "riemannian"
    TYPE1 = "type1"
    TYPE2 = "type2"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class PointClass:
    """Classification of a point plus the diagnostics it was based on."""

    kind: PointKind
    det_value: float
    bracket_span_rank: int
    tangency_residual: float


# ---------------------------------------------------------------------------
# compiled access to the coefficients and their partials


class FrameFunctions:
    """Compiled scalar/array callables for a frame's coefficients.

    Attributes a, b, n evaluate alpha, beta, nu; ax..nz their nine first
    partials; det and its gradient come from the identity det = alpha * nu.
    """

    def __init__(self, f: FrameSpec):
        self.spec = f
        self.a = compiled_scalar(f.alpha)
        self.b = compiled_scalar(f.beta)
        self.n = compiled_scalar(f.nu)
        self.a_arr = compiled_array(f.alpha)
        self.b_arr = compiled_array(f.beta)
        self.n_arr = compiled_array(f.nu)
        for coeff, name in ((f.alpha, "a"), (f.beta, "b"), (f.nu, "n")):
            for var in ("x", "y", "z"):
                setattr(self, name + var, compiled_scalar(coeff.diff(var)))
        det = expr.mul(f.alpha, f.nu)
        self.det_expr = det
        self.det = compiled_scalar(det)
        self.det_arr = compiled_array(det)
        self.detx = compiled_scalar(det.diff("x"))
        self.dety = compiled_scalar(det.diff("y"))
        self.detz = compiled_scalar(det.diff("z"))

    def frame_matrix(self, x: float, y: float, z: float) -> np.ndarray:
        """Columns X1, X2, X3 at a point."""
        return np.array([
            [1.0, 0.0, 0.0],
            [0.0, self.a(x, y, z), 0.0],
            [0.0, self.b(x, y, z), self.n(x, y, z)],
        ])

    def grad_det(self, x: float, y: float, z: float) -> np.ndarray:
        return np.array([self.detx(x, y, z),
                         self.dety(x, y, z),
                         self.detz(x, y, z)])

    def brackets(self, x: float, y: float, z: float) -> dict[str, np.ndarray]:
        """Lie brackets [X1,X2], [X1,X3], [X2,X3] at a point.

        For the triangular frame they reduce to combinations of the nine
        coefficient partials.
        """
        al = self.a(x, y, z)
        be = self.b(x, y, z)
        nu = self.n(x, y, z)
        b12 = np.array([0.0, self.ax(x, y, z), self.bx(x, y, z)])
        b13 = np.array([0.0, 0.0, self.nx(x, y, z)])
        b23 = np.array([
            0.0,
            -nu * self.az(x, y, z),
            al * self.ny(x, y, z) + be * self.nz(x, y, z) - nu * self.bz(x, y, z),
        ])
        return {"12": b12, "13": b13, "23": b23}


@lru_cache(maxsize=256)
def frame_functions(f: FrameSpec) -> FrameFunctions:
    return FrameFunctions(f)


# ---------------------------------------------------------------------------
# frame constructors and parsing


def euclidean_frame() -> FrameSpec:
    return FrameSpec(expr.Const(1.0), expr.Const(0.0), expr.Const(1.0),
                     declared_kind="riemannian")


def nilpotent_frame(sigma: float) -> FrameSpec:
    """Type-1 nilpotent family: alpha=1, beta=cos(sigma)*x, nu=sin(sigma)*x."""
    if not 0.0 <= sigma <= math.pi / 2:
        raise ValueError("sigma must lie in [0, pi/2]")
    big = Box(-1e6, 1e6, -1e6, 1e6, -1e6, 1e6)
    return FrameSpec(
        expr.Const(1.0),
        expr.mul(expr.Const(math.cos(sigma)), expr.Var("x")),
        expr.mul(expr.Const(math.sin(sigma)), expr.Var("x")),
        declared_kind="type1",
        domain_box=big,
    )


def baouendi_goulaouic_frame() -> FrameSpec:
    """alpha=1, beta=0, nu=x; the classical rank-degenerate example frame."""
    big = Box(-1e6, 1e6, -1e6, 1e6, -1e6, 1e6)
    return FrameSpec(expr.Const(1.0), expr.Const(0.0), expr.Var("x"),
                     declared_kind="type1", domain_box=big)


def parse_frame_spec(text: str) -> FrameSpec:
    """Parse a frame description.

    Grammar: ``alpha=<expr>; beta=<expr>; nu=<expr>;`` with optional
    ``kind=<riemannian|type1|type2>;`` and
    ``box=xmin,xmax,ymin,ymax,zmin,zmax``. Whitespace is insignificant and a
    trailing semicolon is allowed.
    """
    coeffs: dict[str, Expr] = {}
    kind: str | None = None
    box: Box | None = None

    pos = 0
    n = len(text)
    while pos < n:
        end = text.find(";", pos)
        if end == -1:
            end = n
        segment = text[pos:end]
        if segment.strip():
            eq = text.find("=", pos, end)
            if eq == -1:
                line, col = expr._line_col(text, pos)
                raise FrameParseError("expected '<name>=<value>'", line, col)
            key = text[pos:eq].strip()
            if key in ("alpha", "beta", "nu"):
                if key in coeffs:
                    line, col = expr._line_col(text, pos)
                    raise FrameParseError(f"duplicate coefficient {key!r}", line, col)
                coeffs[key] = expr.parse_expression(text, eq + 1, end)
            elif key == "kind":
                kind = text[eq + 1:end].strip()
                if kind not in KINDS:
                    line, col = expr._line_col(text, eq + 1)
                    raise FrameParseError(f"unknown kind {kind!r}", line, col)
            elif key == "box":
                parts = text[eq + 1:end].split(",")
                if len(parts) != 6:
                    line, col = expr._line_col(text, eq + 1)
                    raise FrameParseError("box needs six comma-separated numbers",
                                          line, col)
                try:
                    vals = [float(p) for p in parts]
                except ValueError:
                    line, col = expr._line_col(text, eq + 1)
                    raise FrameParseError("malformed box coordinate", line, col)
                box = Box(*vals)
            else:
                line, col = expr._line_col(text, pos)
                raise FrameParseError(f"unknown field {key!r}", line, col)
        pos = end + 1

    missing = [k for k in ("alpha", "beta", "nu") if k not in coeffs]
    if missing:
        raise FrameParseError(f"missing coefficient(s): {', '.join(missing)}")

    spec = FrameSpec(coeffs["alpha"], coeffs["beta"], coeffs["nu"],
                     declared_kind=kind, domain_box=box or Box())
    # differentiability is part of the contract; building the partials checks it
    for c in (spec.alpha, spec.beta, spec.nu):
        for v in expr.VARIABLES:
            c.diff(v)
    return spec


# ---------------------------------------------------------------------------
# pointwise operations


def _num_rank(mat: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def classify_point(f: FrameSpec, q, tol: float = DEFAULT_TOL) -> PointClass:
    """Classify q as Riemannian, type-1, type-2 or degenerate.

    Riemannian means |det| > tol. On the singular set the span of
    X1, X2, X3 and their three brackets must have full rank and the gradient
    of det must not vanish; otherwise the point is degenerate (the structure
    violates the generic conditions there). A singular point is type-2 when
    span{X1, X2} annihilates grad det to within tol, type-1 otherwise.
    """
    x, y, z = (float(v) for v in q)
    if not f.domain_box.contains(x, y, z):
        raise ValueError(f"point {(x, y, z)} outside the frame's domain box")
    ff = frame_functions(f)
    det = ff.det(x, y, z)
    if abs(det) > tol:
        return PointClass(PointKind.RIEMANNIAN, det, 3, math.nan)

    frame = ff.frame_matrix(x, y, z)
    br = ff.brackets(x, y, z)
    if _num_rank(frame, tol) < 2:
        return PointClass(PointKind.DEGENERATE, det, _num_rank(frame, tol), math.nan)
    six = np.column_stack([frame, br["12"], br["13"], br["23"]])
    span_rank = _num_rank(six, tol)
    if span_rank < 3:
        return PointClass(PointKind.DEGENERATE, det, span_rank, math.nan)

    g = ff.grad_det(x, y, z)
    gnorm = float(np.linalg.norm(g))
    if gnorm <= tol:
        return PointClass(PointKind.DEGENERATE, det, span_rank, math.nan)

    x1 = frame[:, 0]
    x2 = frame[:, 1]
    residual = max(abs(float(g @ x1)), abs(float(g @ x2))) / gnorm
    kind = PointKind.TYPE2 if residual <= tol else PointKind.TYPE1
    return PointClass(kind, det, span_rank, residual)


def metric_tensor(f: FrameSpec, q) -> np.ndarray:
    """Riemannian metric matrix at a non-singular point.

    [[1, 0, 0],
     [0, (beta^2 + nu^2) / (alpha^2 nu^2), -beta / (alpha nu^2)],
     [0, -beta / (alpha nu^2), 1 / nu^2]]
    """
    x, y, z = (float(v) for v in q)
    ff = frame_functions(f)
    al = ff.a(x, y, z)
    be = ff.b(x, y, z)
    nu = ff.n(x, y, z)
    if al * nu == 0.0:
        raise SingularSetError(f"metric undefined at {(x, y, z)}: alpha*nu = 0")
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, (be ** 2 + nu ** 2) / (al ** 2 * nu ** 2), -be / (al * nu ** 2)],
        [0.0, -be / (al * nu ** 2), 1.0 / nu ** 2],
    ])


def volume_density(f: FrameSpec, q) -> float:
    """Density 1/|alpha*nu| of the intrinsic Riemannian volume."""
    x, y, z = (float(v) for v in q)
    ff = frame_functions(f)
    det = ff.det(x, y, z)
    if det == 0.0:
        raise SingularSetError(f"volume undefined at {(x, y, z)}: alpha*nu = 0")
    return 1.0 / abs(det)


def singular_set_sample(f: FrameSpec, grid: tuple[int, int, int],
                        tol: float = DEFAULT_TOL) -> list[tuple[float, float, float]]:
    """Sample the surface det = 0 on a grid over the domain box.

    Evaluates det at the grid nodes and refines every axis-aligned edge with
    a sign change by bisection (60 iterations, stopping at |det| <= 1e-12).
    Points are returned in deterministic scan order; the list may be empty.
    """
    nx, ny, nz = grid
    box = f.domain_box
    xs = np.linspace(box.xmin, box.xmax, nx)
    ys = np.linspace(box.ymin, box.ymax, ny)
    zs = np.linspace(box.zmin, box.zmax, nz)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    ff = frame_functions(f)
    D = ff.det_arr(X, Y, Z)
    if np.isscalar(D) or np.ndim(D) == 0:
        D = np.full_like(X, float(D))
    D = np.broadcast_to(D, X.shape)

    det = ff.det
    out: list[tuple[float, float, float]] = []

    def refine(p0, p1):
        def g(s):
            return det(p0[0] + s * (p1[0] - p0[0]),
                       p0[1] + s * (p1[1] - p0[1]),
                       p0[2] + s * (p1[2] - p0[2]))

        lo, hi = 0.0, 1.0
        glo = g(lo)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if abs(gm) <= 1e-12:
                lo = hi = mid
                break
            if glo * gm < 0.0:
                hi = mid
            else:
                lo, glo = mid, gm
        s = 0.5 * (lo + hi)
        return (p0[0] + s * (p1[0] - p0[0]),
                p0[1] + s * (p1[1] - p0[1]),
                p0[2] + s * (p1[2] - p0[2]))

    for i, j, k in itertools.product(range(nx), range(ny), range(nz)):
        here = D[i, j, k]
        if abs(here) <= tol:
            out.append((float(X[i, j, k]), float(Y[i, j, k]), float(Z[i, j, k])))
            continue
        for di, dj, dk in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
            i2, j2, k2 = i + di, j + dj, k + dk
            if i2 >= nx or j2 >= ny or k2 >= nz:
                continue
            there = D[i2, j2, k2]
            if here * there < 0.0:
                p = refine((X[i, j, k], Y[i, j, k], Z[i, j, k]),
                           (X[i2, j2, k2], Y[i2, j2, k2], Z[i2, j2, k2]))
                if abs(det(*p)) <= tol:
                    out.append(p)
    return out


# ---------------------------------------------------------------------------
# normal-form validation


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    kind: str
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self) -> str:
        lines = [f"normal-form validation ({self.kind})"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(f"  [{status}] {c.name}: {c.value:.3e} (tol {c.tol:.1e})")
        return "\n".join(lines)


def _residual(name, value, tol=1e-8):
    return CheckResult(name, abs(value), tol, abs(value) <= tol)


def _nonzero(name, value, tol=1e-6):
    return CheckResult(name, abs(value), tol, abs(value) > tol)


def locate_graph_z(ff: FrameFunctions, x: float, y: float,
                   z0: float = 0.0) -> float:
    """Solve nu(x, y, z) = 0 for z near z0 by Newton iteration.

    Raises ValueError when the zero set is not a graph over (x, y) there
    (the z-derivative of nu degenerates or the iteration diverges).
    """
    z = z0
    for _ in range(60):
        v = ff.n(x, y, z)
        if abs(v) <= 1e-13:
            return z
        dv = ff.nz(x, y, z)
        if abs(dv) <= 1e-10:
            raise ValueError("zero set of nu is not a z-graph here")
        step = v / dv
        if abs(step) > 1.0:
            raise ValueError("zero set of nu is not a z-graph here")
        z -= step
    raise ValueError("zero set of nu is not a z-graph here")


def validate_normal_form(f: FrameSpec, kind: str | None = None) -> ValidationReport:
    """Numerically check the residuals of the declared local normal form.

    All kinds require alpha(0)=1 and beta(0)=0. Riemannian adds nu(0)=1.
    Type-1 requires alpha-1, beta, nu to vanish on the plane x=0 and the
    x-derivatives of beta and nu to satisfy db^2 + dn^2 = 1 along the z-axis.
    Type-2 requires the zero set of nu to be a graph z = phi(x, y) whose
    value, first derivatives and mixed second derivative vanish at 0, with
    nonzero d(beta)/dx, d(nu)/dz and pure second derivatives of phi.
    """
    kind = kind or f.declared_kind
    if kind not in KINDS:
        raise ValueError(f"declared kind required; got {kind!r}")
    ff = frame_functions(f)
    checks: list[CheckResult] = []

    checks.append(_residual("alpha(0,0,0) - 1", ff.a(0, 0, 0) - 1.0))
    checks.append(_residual("beta(0,0,0)", ff.b(0, 0, 0)))

    if kind == "riemannian":
        checks.append(_residual("nu(0,0,0) - 1", ff.n(0, 0, 0) - 1.0))

    elif kind == "type1":
        box = f.domain_box
        ys = np.linspace(max(box.ymin, -1.0), min(box.ymax, 1.0), 9)
        zs = np.linspace(max(box.zmin, -1.0), min(box.zmax, 1.0), 9)
        ra = rb = rn = 0.0
        for y in ys:
            for z in zs:
                ra = max(ra, abs(ff.a(0.0, y, z) - 1.0))
                rb = max(rb, abs(ff.b(0.0, y, z)))
                rn = max(rn, abs(ff.n(0.0, y, z)))
        checks.append(_residual("alpha - 1 on {x=0}", ra))
        checks.append(_residual("beta on {x=0}", rb))
        checks.append(_residual("nu on {x=0}", rn))
        runit = 0.0
        for z in zs:
            db = ff.bx(0.0, 0.0, z)
            dn = ff.nx(0.0, 0.0, z)
            runit = max(runit, abs(db * db + dn * dn - 1.0))
        checks.append(_residual("dbeta_dx^2 + dnu_dx^2 - 1 on z-axis", runit))

    else:  # type2
        try:
            h = 1e-3

            def phi(x, y):
                return locate_graph_z(ff, x, y)

            p00 = phi(0.0, 0.0)
            checks.append(_residual("phi(0,0)", p00))
            px = (phi(h, 0.0) - phi(-h, 0.0)) / (2 * h)
            py = (phi(0.0, h) - phi(0.0, -h)) / (2 * h)
            checks.append(_residual("dphi_dx(0,0)", px, 1e-6))
            checks.append(_residual("dphi_dy(0,0)", py, 1e-6))
            pxy = (phi(h, h) - phi(h, -h) - phi(-h, h) + phi(-h, -h)) / (4 * h * h)
            checks.append(_residual("d2phi_dxdy(0,0)", pxy, 1e-5))
            pxx = (-phi(2 * h, 0.0) + 16 * phi(h, 0.0) - 30 * p00
                   + 16 * phi(-h, 0.0) - phi(-2 * h, 0.0)) / (12 * h * h)
            pyy = (-phi(0.0, 2 * h) + 16 * phi(0.0, h) - 30 * p00
                   + 16 * phi(0.0, -h) - phi(0.0, -2 * h)) / (12 * h * h)
            checks.append(_nonzero("d2phi_dx2(0,0)", pxx))
            checks.append(_nonzero("d2phi_dy2(0,0)", pyy))
        except ValueError:
            checks.append(CheckResult("nu zero set is a graph z=phi(x,y)",
                                      math.inf, 1e-8, False))
        checks.append(_nonzero("dbeta_dx(0,0,0)", ff.bx(0, 0, 0)))
        checks.append(_nonzero("dnu_dz(0,0,0)", ff.nz(0, 0, 0)))

    return ValidationReport(kind, tuple(checks))
