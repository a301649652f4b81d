"""Closed-form theory of the type-1 nilpotent family.

The family is the one-parameter frame X1 = (1,0,0), X2 = (0,1,cos(sigma) x),
X3 = (0,0,sin(sigma) x) with sigma in [0, pi/2]; sigma = 0 is the Heisenberg
structure, sigma = pi/2 the Baouendi-Goulaouic one. Geodesics from the
origin, the Jacobian of the exponential map, conjugate and cut times, the
cut-locus boundary curves and membership, and metric-sphere sampling are all
available in closed form.

Throughout, geodesics are parameterised by the initial covector
(cos(theta), sin(theta), a); negative a is handled through the isometry
(x, y, z) -> (-x, y, -z), which maps (theta, a) to (pi - theta, -a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ScanFailureError
from .geodesics import CovectorInit
from .roots import bisect_root


class _WholeRay:
    """Marker: the whole geodesic lies in the conjugate locus."""

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "WHOLE_RAY"


WHOLE_RAY = _WholeRay()

# below this |a*t| the verbatim formulas lose digits to cancellation (the
# Jacobian carries a 1/a^4 amplification) and the fourth-order series in a*t
# takes over; at 1e-2 both branches agree to ~1e-12
_SMALL_AT = 1e-2

_COS_EPS = 1e-15  # |cos sigma| below this is treated as the sigma = pi/2 case


@dataclass(frozen=True)
class NilpotentParams:
    """Family parameter sigma in [0, pi/2]."""

    sigma: float

    def __post_init__(self):
        if not 0.0 <= self.sigma <= math.pi / 2:
            raise ValueError("sigma must lie in [0, pi/2]")


@dataclass(frozen=True)
class CutLocusDescription:
    """Cut-locus data for one sigma: the half-plane angles and boundary curves."""

    sigma: float
    tau: float
    theta_plus: float
    theta_minus: float

    def curve_plus(self, a: float) -> np.ndarray:
        return cut_locus_curve(NilpotentParams(self.sigma), +1, a)

    def curve_minus(self, a: float) -> np.ndarray:
        return cut_locus_curve(NilpotentParams(self.sigma), -1, a)

    def contains(self, q, tol: float = 1e-8) -> bool:
        return cut_membership(NilpotentParams(self.sigma), q, tol)


# ---------------------------------------------------------------------------
# geodesics and Jacobian


def _gamma(sigma: float, a: float, theta: float, t: float):
    cs = math.cos(sigma)
    c2 = cs * cs
    s2 = 1.0 - c2
    ct = math.cos(theta)
    st = math.sin(theta)
    u = a * t
    if abs(u) < _SMALL_AT:
        u2 = u * u
        u3 = u2 * u
        u4 = u2 * u2
        x = t * (ct * (1.0 - u2 / 6.0 + u4 / 120.0)
                 - cs * st * (u / 2.0 - u3 / 24.0))
        y = t * (st * (1.0 + c2 * (-u2 / 6.0 + u4 / 120.0))
                 + ct * cs * (u / 2.0 - u3 / 24.0))
        s2t = 2.0 * st * ct
        c2t = ct * ct - st * st
        z = (t * t / 8.0) * (
            4.0 * s2t * cs * (0.5 - 7.0 * u2 / 24.0 + 31.0 * u4 / 720.0)
            + c2t * (u * (4.0 / 3.0 + 2.0 * c2 / 3.0)
                     + u3 * (-4.0 / 15.0 - 7.0 * c2 / 30.0))
            + u * (4.0 * s2 / 3.0 + 2.0 * c2 / 3.0)
            + u3 * (-4.0 * s2 / 15.0 - c2 / 30.0))
        return x, y, z
    su = math.sin(u)
    cu = math.cos(u)
    s2u = math.sin(2.0 * u)
    s2t = math.sin(2.0 * theta)
    c2t = math.cos(2.0 * theta)
    # cos(u) - 1 written as -2 sin^2(u/2) to avoid the 1-ulp subtraction
    sh2 = math.sin(0.5 * u) ** 2
    x = (ct * su - 2.0 * sh2 * cs * st) / a
    y = ((su - u) * st * c2 + 2.0 * sh2 * ct * cs + u * st) / a
    z = (8.0 * s2t * cs * cu * sh2
         + c2t * (2.0 * u * s2 - s2u * (1.0 + c2) + 4.0 * su * c2)
         + 2.0 * u * (1.0 + c2) - s2u * s2 - 4.0 * su * c2) / (8.0 * a * a)
    return x, y, z


def geodesic_closed_form(p: NilpotentParams, c: CovectorInit,
                         t: float) -> np.ndarray:
    """Point gamma(a, theta, t) of the arclength geodesic from the origin."""
    return np.array(_gamma(p.sigma, c.a, c.theta, t))


def jacobian_closed_form(p: NilpotentParams, c: CovectorInit,
                         t: float) -> float:
    """Jacobian det(d gamma / d(a, theta, t)) of the exponential map.

    For a != 0 this is (A cos 2theta + B + C sin 2theta) / (2 a^4) with the
    trigonometric coefficients A, B, C of the family; for a*t near 0 a
    fourth-order series applies, reducing at a = 0 to
    -(t^4 / 12) (1 + sin^2 sigma (1 + 2 cos 2theta)).
    """
    sigma, a, theta = p.sigma, c.a, c.theta
    cs = math.cos(sigma)
    c2 = cs * cs
    s2 = 1.0 - c2
    c2t = math.cos(2.0 * theta)
    s2t = math.sin(2.0 * theta)
    u = a * t
    if abs(u) < _SMALL_AT:
        u2 = u * u
        u3 = u2 * u
        u4 = u2 * u2
        return (t ** 4 / 2.0) * (
            s2 * c2t * (-1.0 / 3.0 + u2 / 30.0 - u4 / 840.0)
            + (c2 / 6.0 - 1.0 / 3.0)
            + u2 * ((1.0 + s2) / 60.0 - c2 / 180.0)
            + u4 * (c2 / 10080.0 - (2.0 * s2 + 1.0) / 2520.0)
            + cs * s2 * s2t * (u / 12.0 - u3 / 180.0))
    su = math.sin(u)
    cu = math.cos(u)
    sh2 = math.sin(0.5 * u) ** 2  # (1 - cos u) / 2, cancellation-free
    A = u * s2 * (u * cu - su)
    C = -u * cs * s2 * (u * su - 4.0 * sh2)
    B = (-8.0 * sh2 * c2
         + (u / 2.0) * (2.0 * u * cu * s2
                        + 3.0 * math.cos(2.0 * sigma) * su + su))
    return (A * c2t + B + C * s2t) / (2.0 * a ** 4)


# ---------------------------------------------------------------------------
# characteristic roots and angles


def tau(p: NilpotentParams) -> float:
    """Smallest positive root of sin(t) cos^2(sigma) + t cos(t) sin^2(sigma).

    Lies in [pi/2, pi]; the endpoint cases sigma = 0 (root pi) and
    sigma = pi/2 (root pi/2) are returned analytically.
    """
    sigma = p.sigma
    if sigma == 0.0:
        return math.pi
    if sigma == math.pi / 2:
        return math.pi / 2
    c2 = math.cos(sigma) ** 2
    s2 = math.sin(sigma) ** 2

    def f(t):
        return math.sin(t) * c2 + t * math.cos(t) * s2

    return bisect_root(f, math.pi / 2, math.pi)


@lru_cache(maxsize=1)
def s1() -> float:
    """First positive solution of s = tan(s), in (pi, 3 pi / 2)."""
    return bisect_root(lambda s: s - math.tan(s),
                       math.pi + 0.1, 1.5 * math.pi - 1e-6)


def cut_angles(p: NilpotentParams) -> tuple[float, float]:
    """Half-plane angles (theta_plus, theta_minus), each reduced to [0, pi).

    theta_plus solves cos(sigma) cos(th) sin(tau) + cos(tau) sin(th) = 0,
    realised as atan2(-cos(sigma) sin(tau), cos(tau)) mod pi, and
    theta_minus = -theta_plus mod pi. At sigma = pi/2 the defining equation
    degenerates with the flat ellipse and both angles collapse to 0.
    """
    if abs(math.cos(p.sigma)) < _COS_EPS:
        return 0.0, 0.0
    tv = tau(p)
    th = math.atan2(-math.cos(p.sigma) * math.sin(tv), math.cos(tv)) % math.pi
    if th >= math.pi:  # fold the representative pi back to 0
        th = 0.0
    tm = (-th) % math.pi
    return th, tm


def cut_locus_description(p: NilpotentParams) -> CutLocusDescription:
    tp, tm = cut_angles(p)
    return CutLocusDescription(p.sigma, tau(p), tp, tm)


# ---------------------------------------------------------------------------
# conjugate and cut times


def conjugate_time(p: NilpotentParams, c: CovectorInit,
                   scan_nodes: int = 1000):
    """First conjugate time of the geodesic (a, theta).

    Returns a float, None when the geodesic has no conjugate time, or the
    WHOLE_RAY marker when every point of the geodesic is conjugate
    (sigma = pi/2 with cos(theta) = 0). For cos(sigma) != 0 and a != 0 the
    first zero of the Jacobian is located by a sign scan over
    [2 tau/|a|, 2 pi/|a|] followed by bisection.
    """
    sigma, a, theta = p.sigma, c.a, c.theta
    if abs(math.cos(sigma)) < _COS_EPS:
        if abs(math.cos(theta)) < 1e-12:
            return WHOLE_RAY
        if a == 0.0:
            return None
        return s1() / abs(a)
    if a == 0.0:
        return None
    if a < 0.0:
        # isometry (x,y,z) -> (-x,y,-z) maps (theta, a) to (pi - theta, -a)
        return conjugate_time(p, CovectorInit(math.pi - theta, -a), scan_nodes)

    t_lo = 2.0 * tau(p) / a
    t_hi = 2.0 * math.pi / a

    def jac(t):
        return jacobian_closed_form(p, c, t)

    scale = max(abs(jac(0.5 * (t_lo + t_hi))), abs(jac(t_lo)), 1e-300)
    if abs(jac(t_lo)) <= 1e-12 * max(scale, 1.0):
        return t_lo
    ts = np.linspace(t_lo, t_hi, scan_nodes + 1)
    prev_t = ts[0]
    prev_v = jac(prev_t)
    for t in ts[1:]:
        v = jac(t)
        if v == 0.0:
            return float(t)
        if prev_v * v < 0.0:
            return bisect_root(jac, prev_t, float(t))
        prev_t, prev_v = float(t), v
    raise ScanFailureError(
        f"no Jacobian sign change found on [{t_lo:.6g}, {t_hi:.6g}] "
        f"for sigma={sigma}, a={a}, theta={theta}")


def cut_time(p: NilpotentParams, c: CovectorInit) -> float:
    """Cut time of the geodesic (a, theta); math.inf when it never loses optimality.

    cos(sigma) != 0: 2 tau / |a| for a != 0, infinite for a = 0.
    cos(sigma) == 0: pi / |a| unless a = 0 or cos(theta) = 0, which give
    globally optimal geodesics.
    """
    sigma, a, theta = p.sigma, c.a, c.theta
    if abs(math.cos(sigma)) < _COS_EPS:
        if a == 0.0 or abs(math.cos(theta)) < 1e-12:
            return math.inf
        return math.pi / abs(a)
    if a == 0.0:
        return math.inf
    return 2.0 * tau(p) / abs(a)


# ---------------------------------------------------------------------------
# cut-locus geometry


def cut_locus_curve(p: NilpotentParams, sign: int, a: float) -> np.ndarray:
    """Boundary curve point of the cut locus on the half plane P_sign.

    For s = +-1 and a > 0:
        x = (2/a) tan(s tau) (cos^2 tau + sin^2 tau cos^2 sigma) cos(theta_s)
        y = -(2/a) tan(s tau) (cos^2 tau + sin^2 tau cos^2 sigma) sin(theta_s)
        z = s tau / a^2
            - tan(s tau)/a^2 (cos^2 tau - sin^2 tau)(cos^2 tau + sin^2 tau cos^2 sigma)
    The angles theta_s are only defined modulo pi, which leaves the in-plane
    sign of (x, y) free (both choices are extremities of the same flat
    ellipse); it is fixed here so that the returned point coincides with
    gamma(s a, theta_s, 2 tau / a) for the [0, pi) angle representatives.
    """
    if abs(math.cos(p.sigma)) < _COS_EPS:
        raise ValueError("cut-locus curves require cos(sigma) != 0")
    if a <= 0.0:
        raise ValueError("curve parameter a must be positive")
    s = 1 if sign >= 0 else -1
    tv = tau(p)
    tp, tm = cut_angles(p)
    th = tp if s > 0 else tm
    ct2 = math.cos(tv) ** 2
    st2 = math.sin(tv) ** 2
    E = ct2 + st2 * math.cos(p.sigma) ** 2
    tan_st = s * math.tan(tv)
    x = s * (2.0 / a) * tan_st * E * math.cos(th)
    y = -s * (2.0 / a) * tan_st * E * math.sin(th)
    z = s * tv / a ** 2 - (tan_st / a ** 2) * (ct2 - st2) * E
    return np.array([x, y, z])


def discriminant(p: NilpotentParams, at: float) -> float:
    """B^2 - A^2 - C^2 in factored form, as a function of the product a*t.

    With s = a t / 2:
        64 cos^2(sigma) sin(s) (s cos s - sin s)
           (sin s cos^2 sigma + s cos s sin^2 sigma)
           (s cos s - sin s - s^2 sin s sin^2 sigma)
    Vanishes identically at sigma = pi/2 and at a t = 2 tau.
    """
    c2 = math.cos(p.sigma) ** 2
    s2 = 1.0 - c2
    s = at / 2.0
    sin_s = math.sin(s)
    cos_s = math.cos(s)
    return (64.0 * c2 * sin_s
            * (s * cos_s - sin_s)
            * (sin_s * c2 + s * cos_s * s2)
            * (s * cos_s - sin_s - s * s * sin_s * s2))


def discriminant_expanded(p: NilpotentParams, at: float) -> float:
    """B^2 - A^2 - C^2 assembled directly from the coefficients A, B, C."""
    c2 = math.cos(p.sigma) ** 2
    s2 = 1.0 - c2
    u = at
    su = math.sin(u)
    cu = math.cos(u)
    sh2 = math.sin(0.5 * u) ** 2
    A = u * s2 * (u * cu - su)
    C = -u * math.cos(p.sigma) * s2 * (u * su - 4.0 * sh2)
    B = (-8.0 * sh2 * c2
         + (u / 2.0) * (2.0 * u * cu * s2
                        + 3.0 * math.cos(2.0 * p.sigma) * su + su))
    return B * B - A * A - C * C


def ellipse_separation(p: NilpotentParams, a: float, theta: float) -> float:
    """Radial-expansion determinant D of the time-1 ellipse family.

    D = A' cos(2 theta) + B' + C' sin(2 theta) with
        A' = a (a cos a - sin a) sin^2(sigma) / 2
        B' = (a (a cos a - sin a)
              - cos^2(sigma) ((a^2 - 4) cos a - 3 a sin a + 4)) / 2
        C' = -a cos(sigma) (a cos(a/2) - 2 sin(a/2)) sin(a/2) sin^2(sigma)
    Negative for every a in (0, 2 tau) and every theta: the ellipses are
    nested until the flat one.
    """
    if abs(math.cos(p.sigma)) < _COS_EPS:
        raise ValueError("ellipse separation requires cos(sigma) != 0")
    cs = math.cos(p.sigma)
    s2 = 1.0 - cs * cs
    c2 = cs * cs
    sa = math.sin(a)
    ca = math.cos(a)
    sh = math.sin(a / 2.0)
    chh = math.cos(a / 2.0)
    A = 0.5 * a * (a * ca - sa) * s2
    # (a^2 - 4) cos a + 4 = a^2 cos a + 8 sin^2(a/2), cancellation-free
    B = 0.5 * (a * (a * ca - sa) - c2 * (a * a * ca + 8.0 * sh * sh - 3.0 * a * sa))
    C = -a * cs * (a * chh - 2.0 * sh) * sh * s2
    return A * math.cos(2.0 * theta) + B + C * math.sin(2.0 * theta)


# ---------------------------------------------------------------------------
# spheres and membership


@dataclass(frozen=True)
class SphereSample:
    """Point cloud gamma(a, theta, r) covering the sphere of radius r."""

    sigma: float
    r: float
    tau_value: float
    theta_plus: float
    a: np.ndarray
    theta: np.ndarray
    points: np.ndarray

    def rows(self):
        for a, th, pt in zip(self.a, self.theta, self.points):
            yield (a, th, self.r, pt[0], pt[1], pt[2])


def sphere_sample(p: NilpotentParams, r: float, na: int,
                  ntheta: int) -> SphereSample:
    """Sample the metric sphere of radius r from the origin.

    The sphere is swept by geodesics at time r with |a| <= 2 tau / r
    (|a| <= pi / r when cos sigma = 0); the grid is uniform in a and theta
    and rows are emitted in (a, theta) lexicographic order.
    """
    if r <= 0.0:
        raise ValueError("radius must be positive")
    if abs(math.cos(p.sigma)) < _COS_EPS:
        amax = math.pi / r
    else:
        amax = 2.0 * tau(p) / r
    avals = np.linspace(-amax, amax, na)
    tvals = np.linspace(0.0, 2.0 * math.pi, ntheta, endpoint=False)
    A, TH = np.meshgrid(avals, tvals, indexing="ij")
    A = A.ravel()
    TH = TH.ravel()
    pts = np.empty((A.size, 3))
    for i in range(A.size):
        pts[i] = _gamma(p.sigma, float(A[i]), float(TH[i]), r)
    tp, _ = (0.0, 0.0) if abs(math.cos(p.sigma)) < _COS_EPS else cut_angles(p)
    tv = tau(p)
    return SphereSample(p.sigma, r, tv, tp, A, TH, pts)


def _boundary_z_coefficient(p: NilpotentParams) -> tuple[float, float]:
    """(z_plus(1), in-plane radius of the boundary curve at a = 1)."""
    tv = tau(p)
    ct2 = math.cos(tv) ** 2
    st2 = math.sin(tv) ** 2
    E = ct2 + st2 * math.cos(p.sigma) ** 2
    z1 = tv - math.tan(tv) * (ct2 - st2) * E
    r1 = abs(2.0 * math.tan(tv) * E)
    return z1, r1


def cut_membership(p: NilpotentParams, q, tol: float = 1e-8) -> bool:
    """Whether q belongs to the cut locus of the origin.

    cos(sigma) == 0: the cut locus is the punctured plane {x = 0, z != 0}.
    cos(sigma) != 0: q must lie on the half plane P+ (z > 0) or P- (z < 0)
    through the z-axis at angle theta_plus/theta_minus, and its distance
    from the z-axis must not exceed that of the boundary curve at the same
    height; the height equation z_pm(a) = q_z is solved for a by bisection.
    """
    x, y, z = (float(v) for v in q)
    if abs(math.cos(p.sigma)) < _COS_EPS:
        return abs(x) <= tol and abs(z) > tol

    if abs(z) <= tol:
        return False
    tp, tm = cut_angles(p)
    th = tp if z > 0.0 else tm
    if abs(math.cos(th) * y + math.sin(th) * x) > tol:
        return False

    z1, r1 = _boundary_z_coefficient(p)
    zq = abs(z)

    def height(a):
        return z1 / (a * a) - zq

    a_lo = math.sqrt(z1 / zq) / 16.0
    a_hi = math.sqrt(z1 / zq) * 16.0
    a_star = bisect_root(height, a_lo, a_hi)
    boundary_radius = r1 / a_star
    return math.hypot(x, y) <= boundary_radius + tol
