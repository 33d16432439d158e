"""Planar scattering dynamics.

Hamiltonians of the kinetic-plus-potential type p(x, xi) = |xi|^2/2 + V(x)
on the plane, in two variants:

* a smooth potential given by a sum of Gaussian bumps, cut off smoothly so
  that V vanishes identically outside the ball B(0, R0);
* a hard-disk billiard (V = 0 between disks, specular reflection on each
  disk boundary), where the flow is piecewise free and computed exactly.

The module integrates the flow, measures forward/backward escape times from
a large disk, samples the set of orbits that never escape (the numerical
stand-in for the trapped set at a given energy), and estimates the fractal
dimension of such samples by box counting.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    DomainError,
    EnergyDriftError,
    ParameterError,
    TangencyError,
)

_EPS = np.finfo(float).eps


def _asvec2(v, name):
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (2,):
        raise ParameterError(f"{name} must have exactly 2 components")
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class PhasePoint:
    """A position-momentum pair (x, xi) in planar phase space."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _asvec2(self.x, "x"))
        object.__setattr__(self, "xi", _asvec2(self.xi, "xi"))
        self.x.setflags(write=False)
        self.xi.setflags(write=False)

    def as_array(self):
        return np.concatenate([self.x, self.xi])

    @staticmethod
    def from_array(a):
        a = np.asarray(a, dtype=float).reshape(-1)
        return PhasePoint(a[:2], a[2:4])

    def reversed(self):
        """Same position, opposite momentum."""
        return PhasePoint(self.x, -self.xi)

    def speed(self):
        return float(np.hypot(self.xi[0], self.xi[1]))


def rotate_phase_point(point, angle):
    """Rotate position and momentum rigidly about the origin."""
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return PhasePoint(R @ point.x, R @ point.xi)


# ----------------------------------------------------------------------
# Scattering systems
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianBump:
    """A e^{-|x-c|^2 / (2 w^2)} with center c, amplitude A, width w."""

    center: np.ndarray
    amplitude: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "center", _asvec2(self.center, "bump center"))
        if self.width <= 0:
            raise ParameterError("bump width must be > 0")


def _smoothstep(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    def f(t):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    fu, f1u = f(u), f(1.0 - u)
    return fu / (fu + f1u)


def _smoothstep_deriv(u, du=1e-7):
    return (_smoothstep(u + du) - _smoothstep(u - du)) / (2 * du)


_TAIL_TOL = 1e-14


class SmoothPotential:
    """Sum of Gaussian bumps, smoothly truncated to vanish outside B(0, R0).

    The raw Gaussian tail must already be below 1e-14 on the circle |x| = R0
    (checked at construction by sampling the circle), so the cutoff only
    removes an already negligible tail and the closed-form bump gradients
    remain accurate everywhere the dynamics matters.
    """

    kind = "smooth_potential"

    def __init__(self, bumps, support_radius):
        self.bumps = tuple(bumps)
        self.support_radius = float(support_radius)
        if self.support_radius <= 0:
            raise ParameterError("support radius must be > 0")
        self._cut_on = 0.8 * self.support_radius
        if self.bumps:
            self._centers = np.array([b.center for b in self.bumps])
            self._amps = np.array([b.amplitude for b in self.bumps])
            self._inv_w2 = np.array([1.0 / b.width**2 for b in self.bumps])
        else:
            self._centers = np.zeros((0, 2))
            self._amps = np.zeros(0)
            self._inv_w2 = np.zeros(0)
        self._check_boundary_decay()

    def _check_boundary_decay(self):
        theta = np.linspace(0.0, 2 * np.pi, 257)[:-1]
        ring = self.support_radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        v = np.array([self._raw_potential(p) for p in ring])
        g = np.array([np.linalg.norm(self._raw_grad(p)) for p in ring])
        if v.max(initial=0.0) >= _TAIL_TOL or g.max(initial=0.0) >= _TAIL_TOL:
            raise ParameterError(
                "potential tail exceeds 1e-14 on |x| = R0; increase the support radius"
            )

    def _raw_potential(self, x):
        if not self.bumps:
            return 0.0
        d = x - self._centers
        r2 = np.einsum("ij,ij->i", d, d)
        return float(np.dot(self._amps, np.exp(-0.5 * r2 * self._inv_w2)))

    def _raw_grad(self, x):
        if not self.bumps:
            return np.zeros(2)
        d = x - self._centers
        r2 = np.einsum("ij,ij->i", d, d)
        w = self._amps * np.exp(-0.5 * r2 * self._inv_w2) * self._inv_w2
        return -(w[:, None] * d).sum(axis=0)

    def _cut(self, r):
        if r <= self._cut_on:
            return 1.0, 0.0
        if r >= self.support_radius:
            return 0.0, 0.0
        span = self.support_radius - self._cut_on
        u = (r - self._cut_on) / span
        return float(_smoothstep(1.0 - u)), float(-_smoothstep_deriv(1.0 - u) / span)

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        chi, _ = self._cut(float(np.hypot(x[0], x[1])))
        return chi * self._raw_potential(x) if chi else 0.0

    def grad_potential(self, x):
        x = np.asarray(x, dtype=float)
        r = float(np.hypot(x[0], x[1]))
        chi, dchi = self._cut(r)
        if chi == 0.0:
            return np.zeros(2)
        g = chi * self._raw_grad(x)
        if dchi != 0.0 and r > 0:
            g += dchi * self._raw_potential(x) * (x / r)
        return g


@dataclass(frozen=True)
class Disk:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _asvec2(self.center, "disk center"))
        if self.radius <= 0:
            raise ParameterError("disk radius must be > 0")


def _point_segment_distance(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / (ab @ ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


class DiskBilliard:
    """Hard disks in the plane; free flight plus specular reflection.

    Disks must be pairwise disjoint and satisfy a no-eclipse condition:
    no disk may shadow the straight segments joining any other two.  The
    check used here is sufficient (hence conservative for unequal radii):
    dist(c_k, segment(c_i, c_j)) > r_k + max(r_i, r_j) for every triple.
    """

    kind = "disk_billiard"

    def __init__(self, disks, support_radius=None):
        self.disks = tuple(disks)
        if len(self.disks) < 1:
            raise ParameterError("at least one disk required")
        reach = max(float(np.linalg.norm(d.center)) + d.radius for d in self.disks)
        self.support_radius = float(support_radius) if support_radius else 1.5 * reach
        if self.support_radius < reach:
            raise ParameterError("support radius must contain all disks")
        self._validate_geometry()

    def _validate_geometry(self):
        n = len(self.disks)
        for i in range(n):
            for j in range(i + 1, n):
                di, dj = self.disks[i], self.disks[j]
                gap = np.linalg.norm(di.center - dj.center) - di.radius - dj.radius
                if gap <= 0:
                    raise ParameterError(f"disks {i} and {j} are not disjoint")
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(n):
                    if k in (i, j):
                        continue
                    di, dj, dk = self.disks[i], self.disks[j], self.disks[k]
                    d = _point_segment_distance(dk.center, di.center, dj.center)
                    if d <= dk.radius + max(di.radius, dj.radius):
                        raise ParameterError(
                            f"no-eclipse violated: disk {k} shadows the {i}-{j} segment"
                        )

    def potential(self, x):
        return 0.0

    def grad_potential(self, x):
        return np.zeros(2)

    def containing_disk(self, x, slack=1e-12):
        """Index of a disk whose interior contains x, or None."""
        for idx, d in enumerate(self.disks):
            if np.linalg.norm(np.asarray(x, dtype=float) - d.center) < d.radius - slack:
                return idx
        return None


# ----------------------------------------------------------------------
# Hamiltonian and flow
# ----------------------------------------------------------------------

def evaluate_hamiltonian(system, point):
    """Energy |xi|^2/2 + V(x) of a phase point.

    For a disk billiard V = 0 outside the disks; points strictly inside a
    disk are outside the billiard's phase space and raise DomainError.
    """
    if isinstance(system, DiskBilliard):
        idx = system.containing_disk(point.x)
        if idx is not None:
            raise DomainError(f"point lies inside disk {idx}")
        return 0.5 * float(point.xi @ point.xi)
    return 0.5 * float(point.xi @ point.xi) + float(system.potential(point.x))


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of a flow line at fixed energy.

    For smooth potentials the samples sit at integrator steps and the
    energy drift is bounded by the integration tolerance times elapsed
    time; for billiards the samples are the bounce events (exact between
    bounces) plus the two endpoints.
    """

    times: np.ndarray
    states: np.ndarray
    energy: float
    bounce_indices: tuple = field(default=())

    @property
    def samples(self):
        return [(float(t), PhasePoint.from_array(s))
                for t, s in zip(self.times, self.states)]

    def endpoint(self):
        return PhasePoint.from_array(self.states[-1])

    @property
    def duration(self):
        return float(self.times[-1] - self.times[0])


def _rhs(system):
    def rhs(t, y):
        return np.concatenate([y[2:], -system.grad_potential(y[:2])])
    return rhs


_YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_YOSHIDA_W0 = 1.0 - 2.0 * _YOSHIDA_W1


def _leapfrog(system, y, dt):
    x, xi = y[:2].copy(), y[2:].copy()
    xi -= 0.5 * dt * system.grad_potential(x)
    x += dt * xi
    xi -= 0.5 * dt * system.grad_potential(x)
    return np.concatenate([x, xi])


def _yoshida4_step(system, y, dt):
    y = _leapfrog(system, y, _YOSHIDA_W1 * dt)
    y = _leapfrog(system, y, _YOSHIDA_W0 * dt)
    return _leapfrog(system, y, _YOSHIDA_W1 * dt)


def _integrate_smooth(system, point, duration, tol, method):
    y0 = point.as_array()
    energy = evaluate_hamiltonian(system, point)
    if method == "symplectic":
        dt = float(np.clip(0.3 * tol**0.25, 1e-4, 0.05)) * np.sign(duration)
        n = max(1, int(np.ceil(abs(duration / dt))))
        dt = duration / n
        times = [0.0]
        states = [y0]
        y = y0
        for k in range(n):
            y = _yoshida4_step(system, y, dt)
            times.append((k + 1) * dt)
            states.append(y)
        times, states = np.array(times), np.array(states)
    else:
        inner = max(1e-13, 1e-3 * tol)
        sol = solve_ivp(_rhs(system), (0.0, duration), y0, method="DOP853",
                        rtol=inner, atol=inner, dense_output=False)
        if not sol.success:
            raise EnergyDriftError(f"integrator failed: {sol.message}")
        times, states = sol.t, sol.y.T
    drift = np.abs(0.5 * np.sum(states[:, 2:] ** 2, axis=1)
                   + np.array([system.potential(s[:2]) for s in states]) - energy)
    bound = tol * np.maximum(np.abs(times), 1.0) + 64 * _EPS * (1.0 + abs(energy))
    if np.any(drift > bound):
        k = int(np.argmax(drift - bound))
        raise EnergyDriftError(
            f"energy drift {drift[k]:.3e} at t = {times[k]:.6g} exceeds bound {bound[k]:.3e}"
        )
    return Trajectory(times, states, energy)


# double precision resolves ray-circle contacts only down to a normal
# component of about sqrt(eps); below this floor the reflection is garbage
_TANGENCY_FLOOR = 1e-7


def _next_disk_hit(system, x, u):
    """Earliest positive flight time to any disk along x + t*u, or None.

    Returns (t_hit, disk_index). Departures from a disk surface are not
    re-counted (their root at t = 0 is discarded).
    """
    best = None
    speed2 = u @ u
    for idx, d in enumerate(system.disks):
        rel = x - d.center
        b = rel @ u
        c0 = rel @ rel - d.radius**2
        disc = b * b - speed2 * c0
        if disc <= 0:
            continue
        sq = np.sqrt(disc)
        for t in ((-b - sq) / speed2, (-b + sq) / speed2):
            if t > 1e-9 and (best is None or t < best[0]):
                best = (t, idx)
                break
    return best


def _reflect(system, x, u, disk_index):
    d = system.disks[disk_index]
    n = (x - d.center) / d.radius
    un = u @ n
    if abs(un) < _TANGENCY_FLOOR * np.linalg.norm(u):
        raise TangencyError(f"grazing hit on disk {disk_index}", 0.0)
    return u - 2.0 * un * n


def _integrate_billiard(system, point, duration):
    if system.containing_disk(point.x) is not None:
        raise DomainError("start point lies inside a disk")
    energy = 0.5 * float(point.xi @ point.xi)
    if duration < 0:
        traj = _integrate_billiard(system, point.reversed(), -duration)
        states = traj.states[:, :].copy()
        states[:, 2:] *= -1.0
        return Trajectory(-traj.times, states, energy, traj.bounce_indices)

    times = [0.0]
    states = [point.as_array()]
    bounces = []
    t, x, u = 0.0, point.x.copy(), point.xi.copy()
    guard = 0
    while t < duration:
        guard += 1
        if guard > 1_000_000:
            raise ParameterError("bounce count exceeded 1e6; reduce duration")
        hit = _next_disk_hit(system, x, u)
        if hit is None or t + hit[0] >= duration:
            x = x + (duration - t) * u
            t = duration
            times.append(t)
            states.append(np.concatenate([x, u]))
            break
        dt, idx = hit
        x = x + dt * u
        t += dt
        try:
            u = _reflect(system, x, u, idx)
        except TangencyError:
            raise TangencyError(f"grazing hit on disk {idx}", t) from None
        bounces.append(len(times))
        times.append(t)
        states.append(np.concatenate([x, u]))
    return Trajectory(np.array(times), np.array(states), energy, tuple(bounces))


def integrate_flow(system, point, duration, tol=1e-10, method="adaptive"):
    """Integrate the Hamiltonian flow for a signed duration.

    Smooth potentials use an adaptive 8th-order explicit scheme
    (``method="adaptive"``, the default) with the energy drift monitored
    against tol * max(|t|, 1); a fixed-step 4th-order symplectic
    composition (``method="symplectic"``) is available for long runs.
    Billiards are propagated exactly: ray-circle intersections and
    specular reflections (tangential momentum preserved, normal flipped).
    """
    if not np.isfinite(duration):
        raise ParameterError("duration must be finite")
    if tol <= 0:
        raise ParameterError("tol must be > 0")
    if isinstance(system, DiskBilliard):
        return _integrate_billiard(system, point, duration)
    return _integrate_smooth(system, point, duration, tol, method)


# ----------------------------------------------------------------------
# Escape times and trapped-set sampling
# ----------------------------------------------------------------------

def _escape_forward_billiard(system, point, escape_radius, t_max):
    x, u = point.x.copy(), point.xi.copy()
    if np.hypot(x[0], x[1]) > escape_radius:
        return 0.0
    t = 0.0
    r2 = escape_radius**2
    while t < t_max:
        hit = _next_disk_hit(system, x, u)
        seg = hit[0] if hit is not None else np.inf
        a = u @ u
        b = x @ u
        c0 = x @ x - r2
        disc = b * b - a * c0
        if disc > 0:
            t_out = (-b + np.sqrt(disc)) / a
            if 0 <= t_out < seg:
                return t + t_out if t + t_out <= t_max else None
        if hit is None or t + seg > t_max:
            return None
        x = x + seg * u
        t += seg
        u = _reflect(system, x, u, hit[1])
    return None


def _escape_forward_smooth(system, point, escape_radius, t_max, tol):
    if np.hypot(point.x[0], point.x[1]) > escape_radius:
        return 0.0

    def outside(t, y):
        return y[0] ** 2 + y[1] ** 2 - escape_radius**2

    outside.terminal = True
    outside.direction = 1.0
    inner = max(1e-13, 1e-3 * tol)
    sol = solve_ivp(_rhs(system), (0.0, t_max), point.as_array(), method="DOP853",
                    rtol=inner, atol=inner, events=outside)
    if sol.t_events[0].size:
        return float(sol.t_events[0][0])
    return None


def escape_time(system, point, escape_radius, t_max, tol=1e-10):
    """First times |x(t)| > escape_radius forward and backward, or None.

    Returns a (forward, backward) pair; a point already outside escapes at
    t = 0 in both directions.  escape_radius must exceed the system's
    support radius so that escaped orbits are genuinely free.
    """
    if escape_radius <= system.support_radius:
        raise ParameterError("escape radius must exceed the support radius")
    if t_max <= 0:
        raise ParameterError("t_max must be > 0")
    if isinstance(system, DiskBilliard):
        fwd = _escape_forward_billiard(system, point, escape_radius, t_max)
        bwd = _escape_forward_billiard(system, point.reversed(), escape_radius, t_max)
    else:
        fwd = _escape_forward_smooth(system, point, escape_radius, t_max, tol)
        bwd = _escape_forward_smooth(system, point.reversed(), escape_radius, t_max, tol)
    return fwd, bwd


def _flow_by(system, point, t, tol):
    if t == 0.0:
        return point
    return integrate_flow(system, point, t, tol=tol).endpoint()


def _seed_families(system, E):
    """One-parameter launch families likely to cross the stable/unstable sets.

    Each family rotates the launch direction of a point placed midway
    between a pair of scatterers (disks or bumps); the zero angle points
    along the connecting line, exactly on the two-scatterer bouncing orbit
    when one exists.
    """
    if isinstance(system, DiskBilliard):
        anchors = [(d.center, d.radius) for d in system.disks]
    else:
        anchors = [(b.center, 0.0) for b in system.bumps]
    families = []
    n = len(anchors)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ci, ri = anchors[i]
            cj, rj = anchors[j]
            u = cj - ci
            dist = np.linalg.norm(u)
            u = u / dist
            a = ci + ri * u
            b = cj - rj * u
            mid = 0.5 * (a + b)
            if isinstance(system, DiskBilliard):
                speed = np.sqrt(2.0 * E)
            else:
                v0 = system.potential(mid)
                if v0 >= E:
                    continue
                speed = np.sqrt(2.0 * (E - v0))

            def make(mid=mid, u=u, speed=speed):
                def at(psi):
                    c, s = np.cos(psi), np.sin(psi)
                    direction = np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])
                    return PhasePoint(mid, speed * direction)
                return at

            families.append(make())
    return families


def sample_trapped_set(system, E, budget, t_max, escape_radius,
                       tol=1e-10, psi_max=0.5, grid=41, refine_tol=1e-13,
                       zoom_points=11, per_spike=4):
    """Sample phase points whose orbits stay inside for > t_max both ways.

    Strategy: along each seed family, locate spikes of the total dwell
    time t+ + t- by repeated grid zoom on the launch angle (robust against
    the staircase structure the dwell time has for billiards), then slide
    each refined point along its own orbit through the dwell window, which
    trades forward for backward escape time; the window interior yields up
    to per_spike samples per spike.  Every returned sample is re-verified
    independently against the requested t_max.
    """
    if E <= 0 or budget <= 0:
        raise ParameterError("E and budget must be > 0")
    t_eval = 2.0 * t_max + 2.0
    samples = []

    def dwell(pt):
        try:
            fwd, bwd = escape_time(system, pt, escape_radius, t_eval, tol=tol)
        except TangencyError:
            return 0.0, 0.0
        return (t_eval if fwd is None else fwd), (t_eval if bwd is None else bwd)

    def accept(pt):
        fwd, bwd = escape_time(system, pt, escape_radius, t_max, tol=tol)
        if fwd is None and bwd is None:
            samples.append(pt)
            return True
        return False

    families = _seed_families(system, E)
    if not families:
        return samples
    family_quota = int(np.ceil(budget / len(families)))
    for family in families:
        if len(samples) >= budget:
            break
        taken_before = len(samples)

        def quota_left():
            return (len(samples) < budget
                    and len(samples) - taken_before < family_quota)

        psis = np.linspace(-psi_max, psi_max, grid)
        scores = []
        for psi in psis:
            fwd, bwd = dwell(family(psi))
            scores.append(fwd + bwd)
        scores = np.asarray(scores)
        # local dwell maxima, visited in a fixed geometric order so that
        # symmetric systems are sampled symmetrically
        peaks = [k for k in range(grid)
                 if scores[k] > 0.2 * t_max
                 and scores[k] >= scores[max(0, k - 1)]
                 and scores[k] >= scores[min(grid - 1, k + 1)]]
        peaks.sort(key=lambda k: (abs(psis[k]), psis[k]))
        for k in peaks:
            if not quota_left():
                break
            lo = psis[max(0, k - 1)]
            hi = psis[min(grid - 1, k + 1)]
            best_psi = psis[k]
            best_f, best_b = dwell(family(best_psi))
            for _ in range(80):
                if hi - lo < refine_tol:
                    break
                if best_f + best_b > 2.0 * t_max + 1.5:
                    break
                ps = np.linspace(lo, hi, zoom_points)
                vals = [dwell(family(p)) for p in ps]
                sums = np.array([f + b for (f, b) in vals])
                kk = int(np.argmax(sums))
                if sums[kk] > best_f + best_b:
                    best_psi = ps[kk]
                    best_f, best_b = vals[kk]
                lo = ps[max(0, kk - 1)]
                hi = ps[min(zoom_points - 1, kk + 1)]
            if best_f >= t_max and best_b >= t_max and quota_left():
                accept(family(best_psi))
            if best_f + best_b <= 2.0 * t_max + 1.0:
                continue
            # harvest along the orbit: any slide s in the dwell window
            # leaves more than t_max of dwell on both sides
            s_lo = t_max - best_b
            s_hi = best_f - t_max
            for m in range(per_spike):
                if not quota_left():
                    break
                s = s_lo + (m + 1) / (per_spike + 1) * (s_hi - s_lo)
                try:
                    accept(_flow_by(system, family(best_psi), s, tol))
                except (TangencyError, EnergyDriftError):
                    continue
    return samples[:budget]


# ----------------------------------------------------------------------
# Box-counting dimension
# ----------------------------------------------------------------------

def phase_points_to_array(points):
    return np.array([p.as_array() for p in points], dtype=float)


def box_counting_dimension(points, scales):
    """Least-squares box-counting dimension of a point cloud.

    Counts occupied cubes of side eps for each scale and fits the slope of
    log N(eps) against log(1/eps).  Returns (dimension, rms fit residual).
    Needs at least 100 points and scales spanning at least one decade.
    """
    if len(points) and isinstance(points[0], PhasePoint):
        pts = phase_points_to_array(points)
    else:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
    if pts.shape[0] < 100:
        raise ParameterError("need at least 100 points")
    scales = np.asarray(sorted(scales), dtype=float)
    if scales.size < 2 or scales[0] <= 0:
        raise ParameterError("need at least 2 positive scales")
    if scales[-1] / scales[0] < 10.0 - 1e-12:
        raise ParameterError("scales must span at least one decade")
    counts = []
    for eps in scales:
        keys = np.floor(pts / eps).astype(np.int64)
        counts.append(np.unique(keys, axis=0).shape[0])
    logs_n = np.log(np.asarray(counts, dtype=float))
    logs_inv = np.log(1.0 / scales)
    coeffs = np.polyfit(logs_inv, logs_n, 1)
    fit = np.polyval(coeffs, logs_inv)
    residual = float(np.sqrt(np.mean((fit - logs_n) ** 2)))
    return float(coeffs[0]), residual
