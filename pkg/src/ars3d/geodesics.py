"""Normal Hamiltonian flow for triangular frames.

The Hamiltonian is H(q, p) = (px^2 + (alpha*py + beta*pz)^2 + (nu*pz)^2) / 2.
Arclength geodesics live on the level set H = 1/2; the flow is integrated by
fixed-step classical RK4 with the q-derivatives of H assembled from the
symbolic partials of the coefficients, so the observed energy drift stays at
scheme order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainBoxError, ShootingFailureError
from .frames import FrameFunctions, FrameSpec, frame_functions


@dataclass(frozen=True)
class PhaseState:
    """Point q = (x, y, z) together with covector p = (px, py, pz)."""

    q: tuple[float, float, float]
    p: tuple[float, float, float]

    def as_array(self) -> np.ndarray:
        return np.array(self.q + self.p)


@dataclass(frozen=True)
class CovectorInit:
    """Initial covector (cos(theta), sin(theta), a) for geodesics from a base point.

    On the singular set in normal-form coordinates (alpha=1, beta=nu=0 at the
    base point) every such covector is automatically arclength-normalised:
    H = 1/2 for all theta and a.
    """

    theta: float
    a: float

    def covector(self) -> tuple[float, float, float]:
        return (math.cos(self.theta), math.sin(self.theta), self.a)


@dataclass
class GeodesicPath:
    """Sampled trajectory of the Hamiltonian flow.

    times[i] and states[i] = (x, y, z, px, py, pz) hold the i-th sample; h is
    the realised step size and hamiltonian_drift records max |H(t) - H(0)|
    over the whole path.
    """

    times: np.ndarray
    states: np.ndarray
    h: float
    hamiltonian_drift: float

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :3]

    @property
    def samples(self) -> list[tuple[float, PhaseState]]:
        return [(float(t), PhaseState(tuple(s[:3]), tuple(s[3:])))
                for t, s in zip(self.times, self.states)]

    def endpoint(self) -> PhaseState:
        s = self.states[-1]
        return PhaseState(tuple(s[:3]), tuple(s[3:]))

    def csv_rows(self):
        for t, s in zip(self.times, self.states):
            yield (t, *s)


CSV_HEADER = ("t", "x", "y", "z", "px", "py", "pz")


def hamiltonian(f: FrameSpec, s: PhaseState) -> float:
    """H(q, p) = (px^2 + (alpha py + beta pz)^2 + (nu pz)^2) / 2."""
    ff = frame_functions(f)
    x, y, z = s.q
    px, py, pz = s.p
    w = ff.a(x, y, z) * py + ff.b(x, y, z) * pz
    m = ff.n(x, y, z) * pz
    return 0.5 * (px * px + w * w + m * m)


def _rhs(ff: FrameFunctions, s):
    x, y, z, px, py, pz = s
    al = ff.a(x, y, z)
    be = ff.b(x, y, z)
    nu = ff.n(x, y, z)
    w = al * py + be * pz
    m = nu * pz
    return (
        px,
        w * al,
        w * be + m * nu,
        -(w * (py * ff.ax(x, y, z) + pz * ff.bx(x, y, z)) + m * pz * ff.nx(x, y, z)),
        -(w * (py * ff.ay(x, y, z) + pz * ff.by(x, y, z)) + m * pz * ff.ny(x, y, z)),
        -(w * (py * ff.az(x, y, z) + pz * ff.bz(x, y, z)) + m * pz * ff.nz(x, y, z)),
    )


def _rk4_step(ff: FrameFunctions, s, h: float):
    k1 = _rhs(ff, s)
    s2 = tuple(si + 0.5 * h * ki for si, ki in zip(s, k1))
    k2 = _rhs(ff, s2)
    s3 = tuple(si + 0.5 * h * ki for si, ki in zip(s, k2))
    k3 = _rhs(ff, s3)
    s4 = tuple(si + h * ki for si, ki in zip(s, k3))
    k4 = _rhs(ff, s4)
    return tuple(si + (h / 6.0) * (a + 2 * b + 2 * c + d)
                 for si, a, b, c, d in zip(s, k1, k2, k3, k4))


def _hamiltonian_series(ff: FrameFunctions, states: np.ndarray) -> np.ndarray:
    x, y, z = states[:, 0], states[:, 1], states[:, 2]
    px, py, pz = states[:, 3], states[:, 4], states[:, 5]
    al = ff.a_arr(x, y, z)
    be = ff.b_arr(x, y, z)
    nu = ff.n_arr(x, y, z)
    w = al * py + be * pz
    m = nu * pz
    return 0.5 * (px * px + w * w + m * m)


def integrate_geodesic(f: FrameSpec, s0: PhaseState, T: float,
                       h: float = 1e-3) -> GeodesicPath:
    """Integrate the Hamiltonian system from s0 for duration T.

    The step is adjusted to the nearest value dividing T evenly. Raises
    DomainBoxError if any sample leaves the frame's domain box.
    """
    if T <= 0.0:
        raise ValueError("duration T must be positive")
    if h <= 0.0:
        raise ValueError("step h must be positive")
    ff = frame_functions(f)
    n = max(1, int(round(T / h)))
    hh = T / n
    box = f.domain_box
    states = np.empty((n + 1, 6))
    s = tuple(s0.q) + tuple(s0.p)
    states[0] = s
    for i in range(1, n + 1):
        s = _rk4_step(ff, s, hh)
        if not box.contains(s[0], s[1], s[2]):
            raise DomainBoxError(
                f"trajectory left the domain box at t = {i * hh:.6g}, "
                f"position {(s[0], s[1], s[2])}")
        states[i] = s
    times = np.linspace(0.0, T, n + 1)
    H = _hamiltonian_series(ff, states)
    drift = float(np.max(np.abs(H - H[0])))
    return GeodesicPath(times, states, hh, drift)


def exponential_map(f: FrameSpec, q0, c: CovectorInit, t: float,
                    h: float = 1e-3) -> np.ndarray:
    """Endpoint of the arclength geodesic with initial covector c at time t.

    Requires H(q0, p0) = 1/2 to within 1e-12; for the nilpotent frames at the
    origin this holds for every (theta, a).
    """
    q0 = tuple(float(v) for v in q0)
    s0 = PhaseState(q0, c.covector())
    H0 = hamiltonian(f, s0)
    if abs(H0 - 0.5) > 1e-12:
        raise ValueError(
            f"covector is not arclength-normalised: H = {H0!r}, expected 1/2")
    if t == 0.0:
        return np.array(q0)
    return np.array(integrate_geodesic(f, s0, t, h).endpoint().q)


# ---------------------------------------------------------------------------
# two-point shooting


@dataclass
class ShootOptions:
    """Multistart and damping configuration for shoot_distance."""

    residual_tol: float = 1e-8
    n_theta_seeds: int = 16
    a_seed_base: tuple = (0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0,
                          2.0, -2.0, 4.0, -4.0)
    seeds: list[tuple[float, float, float]] | None = None
    screen_steps: int = 150
    newton_steps: int = 600
    verify_h: float = 1e-3
    top_k: int = 12
    max_newton_iters: int = 30
    max_halvings: int = 40


@dataclass(frozen=True)
class ShootResult:
    distance: float
    covector: CovectorInit
    residual: float
    p0: tuple[float, float, float]


def _normalised_covector(ff: FrameFunctions, q0, theta: float, a: float):
    """Scale (cos t, sin t, a) onto the arclength level H = 1/2.

    At normal-form base points on the singular set the scale is exactly 1, so
    the seed parameterisation agrees with CovectorInit there.
    """
    x, y, z = q0
    p = (math.cos(theta), math.sin(theta), a)
    w = ff.a(x, y, z) * p[1] + ff.b(x, y, z) * p[2]
    m = ff.n(x, y, z) * p[2]
    H0 = 0.5 * (p[0] * p[0] + w * w + m * m)
    if H0 < 1e-15:
        return None
    s = 1.0 / math.sqrt(2.0 * H0)
    return (s * p[0], s * p[1], s * p[2])


def _shot_endpoint(ff: FrameFunctions, box, q0, theta, a, t, n):
    p0 = _normalised_covector(ff, q0, theta, a)
    if p0 is None:
        return None
    s = tuple(q0) + p0
    hh = t / n
    for _ in range(n):
        s = _rk4_step(ff, s, hh)
        if not box.contains(s[0], s[1], s[2]):
            return None
    return np.array(s[:3])


def shoot_distance(f: FrameSpec, q0, q1,
                   opts: ShootOptions | None = None) -> ShootResult:
    """Upper bound for the distance from q0 to q1 by multistart shooting.

    Damped Newton iteration on (theta, a, t) -> endpoint(theta, a, t) - q1
    over a seed grid; among converged shots the smallest time wins (ties by
    residual, then seed order). Since the initial covector is
    arclength-normalised, the returned time is the length of the connecting
    geodesic; it certifies d(q0, q1) <= distance with the reported residual.
    """
    opts = opts or ShootOptions()
    q0 = tuple(float(v) for v in q0)
    q1t = np.array([float(v) for v in q1])
    gap = float(np.linalg.norm(q1t - np.array(q0)))
    if gap <= 1e-12:
        return ShootResult(0.0, CovectorInit(0.0, 0.0), 0.0,
                           (1.0, 0.0, 0.0))
    ff = frame_functions(f)
    box = f.domain_box

    if opts.seeds is not None:
        seeds = list(opts.seeds)
    else:
        # a-seeds follow the cut-time scaling t_cut ~ 2*tau/|a| with tau ~ pi
        scale = min(2.0 * math.pi / gap, 40.0)
        thetas = [2.0 * math.pi * k / opts.n_theta_seeds
                  for k in range(opts.n_theta_seeds)]
        seeds = [(th, ab * scale, gap)
                 for th in thetas for ab in opts.a_seed_base]

    def residual(v, n):
        end = _shot_endpoint(ff, box, q0, v[0], v[1], max(v[2], 1e-9), n)
        if end is None:
            return None
        return end - q1t

    # cheap screen of all seeds, keep the most promising for Newton polish
    scored = []
    for idx, v in enumerate(seeds):
        r = residual(v, opts.screen_steps)
        if r is not None:
            scored.append((float(np.linalg.norm(r)), idx, v))
    scored.sort(key=lambda s: (s[0], s[1]))
    candidates = scored[:opts.top_k]

    def newton(v, n):
        v = list(v)
        r = residual(v, n)
        if r is None:
            return None, math.inf
        rn = float(np.linalg.norm(r))
        for _ in range(opts.max_newton_iters):
            if rn <= opts.residual_tol:
                break
            J = np.empty((3, 3))
            steps = (1e-6, 1e-6 * max(1.0, abs(v[1])), 1e-6 * max(1.0, v[2]))
            ok = True
            for j in range(3):
                vp = list(v)
                vp[j] += steps[j]
                rp = residual(vp, n)
                if rp is None:
                    ok = False
                    break
                J[:, j] = (rp - r) / steps[j]
            if not ok:
                break
            try:
                delta, *_ = np.linalg.lstsq(J, -r, rcond=None)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            improved = False
            for _ in range(opts.max_halvings):
                vn = [v[0] + lam * delta[0], v[1] + lam * delta[1],
                      max(v[2] + lam * delta[2], 1e-9)]
                rnew = residual(vn, n)
                if rnew is not None and float(np.linalg.norm(rnew)) < rn:
                    v, r, rn = vn, rnew, float(np.linalg.norm(rnew))
                    improved = True
                    break
                lam *= 0.5
            if not improved:
                break
        return v, rn

    best_overall = math.inf
    converged = []
    for rank, (_, idx, seed) in enumerate(candidates):
        v, rn = newton(seed, opts.newton_steps)
        if v is None:
            continue
        best_overall = min(best_overall, rn)
        if rn <= 10.0 * opts.residual_tol:
            # confirm at fine resolution, polishing if needed
            n_fine = max(800, min(int(round(v[2] / opts.verify_h)), 200000))
            v2, rn2 = newton(v, n_fine)
            if v2 is not None and rn2 <= opts.residual_tol:
                converged.append((v2[2], rn2, rank, v2))
            best_overall = min(best_overall, rn2)

    if not converged:
        raise ShootingFailureError(
            f"no shooting seed converged for target {tuple(q1t)}", best_overall)
    converged.sort(key=lambda c: (c[0], c[1], c[2]))
    t_best, res_best, _, v_best = converged[0]
    p0 = _normalised_covector(ff, q0, v_best[0], v_best[1])
    return ShootResult(t_best, CovectorInit(v_best[0], v_best[1]),
                       res_best, p0)
