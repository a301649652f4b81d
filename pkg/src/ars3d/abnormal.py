"""Abnormal extremals: the direction field on the singular surface.

On the surface Z = {det = 0} the abnormal extremals are, up to
reparameterisation, trajectories of X(q) = sum_i u_i(q) X_i(q) with the
controls

    u_i(q) = det(X_1(q), X_2(q), [X_{i-1}, X_{i+1}](q)),

indices cyclic (X_0 = X_3, X_4 = X_1). The lifted covector is proportional
to X_1 ^ X_2 and annihilates the frame along the trajectory. Points where X
vanishes are poles of the field; near a type-2 point the planar
linearisation of the flow is

    d/dt (x, y) = ((2 b y - x b1), (-2 a x))

with b1 = d(beta)/dx at the origin and a, b the quadratic coefficients of
the graph z = phi(x, y) describing Z (phi ~ a x^2 + b y^2 near 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ClassificationError, FieldVanishesError,
                     OffSingularSetError)
from .frames import (DEFAULT_TOL, FrameFunctions, FrameSpec, PointKind,
                     classify_point, frame_functions, locate_graph_z)

_POLE_NORM = 1e-10


@dataclass(frozen=True)
class AbnormalControls:
    u1: float
    u2: float
    u3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u1, self.u2, self.u3])


@dataclass
class AbnormalTrace:
    """Traced abnormal extremal constrained to the singular surface.

    Fields record times, positions, the controls along the way, and the
    worst covector-annihilation residual max_i |<p, X_i>| with
    p = X_1 ^ X_2 normalised.
    """

    times: np.ndarray
    points: np.ndarray
    controls: np.ndarray
    annihilation_max: float
    det_max: float

    def csv_rows(self):
        for t, q, u in zip(self.times, self.points, self.controls):
            yield (t, q[0], q[1], q[2], u[0], u[1], u[2])


TRACE_CSV_HEADER = ("t", "x", "y", "z", "u1", "u2", "u3")


def _controls(ff: FrameFunctions, x: float, y: float, z: float) -> np.ndarray:
    frame = ff.frame_matrix(x, y, z)
    br = ff.brackets(x, y, z)
    x1 = frame[:, 0]
    x2 = frame[:, 1]
    # u_i = det(X1, X2, [X_{i-1}, X_{i+1}]), cyclically: [X3,X2], [X1,X3], [X2,X1]
    u1 = float(np.linalg.det(np.column_stack([x1, x2, -br["23"]])))
    u2 = float(np.linalg.det(np.column_stack([x1, x2, br["13"]])))
    u3 = float(np.linalg.det(np.column_stack([x1, x2, -br["12"]])))
    return np.array([u1, u2, u3])


def _field(ff: FrameFunctions, x: float, y: float, z: float) -> np.ndarray:
    u = _controls(ff, x, y, z)
    frame = ff.frame_matrix(x, y, z)
    return frame @ u


def abnormal_controls(f: FrameSpec, q, tol: float = DEFAULT_TOL) -> AbnormalControls:
    """Controls u_1, u_2, u_3 at a point of the singular surface."""
    x, y, z = (float(v) for v in q)
    ff = frame_functions(f)
    det = ff.det(x, y, z)
    if abs(det) > tol:
        raise OffSingularSetError(
            f"point {(x, y, z)} is off the singular set: det = {det:.3e}")
    u = _controls(ff, x, y, z)
    return AbnormalControls(u[0], u[1], u[2])


def abnormal_field(f: FrameSpec, q, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Direction field X(q) = sum u_i X_i at a singular point.

    A norm below the pole threshold flags q as a singular point of the
    field (a type-2 pole or a degenerate type-1 point).
    """
    x, y, z = (float(v) for v in q)
    ff = frame_functions(f)
    det = ff.det(x, y, z)
    if abs(det) > tol:
        raise OffSingularSetError(
            f"point {(x, y, z)} is off the singular set: det = {det:.3e}")
    return _field(ff, x, y, z)


def _project_to_surface(ff: FrameFunctions, q: np.ndarray,
                        target: float = 1e-12, iters: int = 3) -> np.ndarray:
    # Newton steps along grad det; analytically X is tangent to Z so one
    # step usually suffices, extra iterations only mop up accumulated drift
    for _ in range(iters):
        d = ff.det(q[0], q[1], q[2])
        if abs(d) <= target:
            break
        g = ff.grad_det(q[0], q[1], q[2])
        gg = float(g @ g)
        if gg == 0.0:
            break
        q = q - (d / gg) * g
    return q


def trace_abnormal(f: FrameSpec, q0, T: float, h: float = 1e-3,
                   normalized: bool = False,
                   tol: float = DEFAULT_TOL) -> AbnormalTrace:
    """Integrate the abnormal field from q0 for duration T with RK4.

    Each accepted step is projected back to the singular surface along
    grad det. With ``normalized=True`` the unit field X/|X| is integrated
    instead (same point set, arclength-like parameter). Raises
    FieldVanishesError when |X| drops below the pole threshold, which
    happens on approach to a type-2 point.
    """
    ff = frame_functions(f)
    q = _project_to_surface(ff, np.array([float(v) for v in q0]))
    if abs(ff.det(*q)) > tol:
        raise OffSingularSetError(f"starting point {tuple(q0)} is not on the "
                                  "singular set")

    def rhs(pt):
        v = _field(ff, pt[0], pt[1], pt[2])
        nv = float(np.linalg.norm(v))
        if nv < _POLE_NORM:
            raise FieldVanishesError(
                f"abnormal field vanished at {tuple(pt)} (|X| = {nv:.2e})")
        return v / nv if normalized else v

    n = max(1, int(round(T / h)))
    hh = T / n
    times = np.linspace(0.0, T, n + 1)
    points = np.empty((n + 1, 3))
    controls = np.empty((n + 1, 3))
    points[0] = q
    controls[0] = _controls(ff, *q)
    ann = 0.0
    det_max = abs(ff.det(*q))
    for i in range(1, n + 1):
        k1 = rhs(q)
        k2 = rhs(q + 0.5 * hh * k1)
        k3 = rhs(q + 0.5 * hh * k2)
        k4 = rhs(q + hh * k3)
        q = q + (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        q = _project_to_surface(ff, q)
        points[i] = q
        controls[i] = _controls(ff, *q)
        det_max = max(det_max, abs(ff.det(*q)))
        frame = ff.frame_matrix(*q)
        p = np.cross(frame[:, 0], frame[:, 1])
        pn = float(np.linalg.norm(p))
        if pn > 0.0:
            ann = max(ann, float(np.max(np.abs(p @ frame))) / pn)
    return AbnormalTrace(times, points, controls, ann, det_max)


# ---------------------------------------------------------------------------
# type-2 linearisation


@dataclass(frozen=True)
class Type2Linearization:
    """Planar linearisation of the abnormal flow at a type-2 point.

    matrix = [[-b1, 2b], [-2a, 0]] where a, b are the quadratic
    coefficients of the graph z = phi(x, y) of the singular surface and
    b1 = d(beta)/dx at the origin. ``degenerate_linear_term`` flags b1 = 0,
    which violates the nondegeneracy expected of a generic type-2 point.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    stability: str
    a: float
    b: float
    beta1: float
    degenerate_linear_term: bool


def _classify_2x2(m: np.ndarray) -> str:
    tr = float(np.trace(m))
    det = float(np.linalg.det(m))
    if det < 0.0:
        return "saddle"
    disc = tr * tr - 4.0 * det
    if tr == 0.0:
        return "center"
    side = "stable" if tr < 0.0 else "unstable"
    shape = "node" if disc >= 0.0 else "spiral"
    return f"{side}_{shape}"


def type2_linearization(f: FrameSpec, tol: float = DEFAULT_TOL,
                        h: float = 1e-3) -> Type2Linearization:
    """Linearise the abnormal flow at the origin of a type-2 frame.

    The graph z = phi(x, y) of the singular surface is located numerically
    and a = phi_xx(0)/2, b = phi_yy(0)/2 extracted by five-point second
    differences; eigenvalues classify the flow by trace and determinant.
    """
    pc = classify_point(f, (0.0, 0.0, 0.0), tol)
    if pc.kind is not PointKind.TYPE2:
        raise ClassificationError(
            f"origin classifies as {pc.kind.value}, not type2")
    ff = frame_functions(f)

    def phi(x, y):
        return locate_graph_z(ff, x, y)

    p00 = phi(0.0, 0.0)
    pxx = (-phi(2 * h, 0.0) + 16 * phi(h, 0.0) - 30 * p00
           + 16 * phi(-h, 0.0) - phi(-2 * h, 0.0)) / (12 * h * h)
    pyy = (-phi(0.0, 2 * h) + 16 * phi(0.0, h) - 30 * p00
           + 16 * phi(0.0, -h) - phi(0.0, -2 * h)) / (12 * h * h)
    a = 0.5 * pxx
    b = 0.5 * pyy
    beta1 = ff.bx(0.0, 0.0, 0.0)
    m = np.array([[-beta1, 2.0 * b], [-2.0 * a, 0.0]])
    eig = np.linalg.eigvals(m)
    return Type2Linearization(
        matrix=m,
        eigenvalues=eig,
        stability=_classify_2x2(m),
        a=a,
        b=b,
        beta1=beta1,
        degenerate_linear_term=abs(beta1) <= tol,
    )
