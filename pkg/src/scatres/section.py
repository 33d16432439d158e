"""Poincare sections and first-return maps.

A section is a finite family of transversal charts with Darboux
coordinates (y, eta).  Two chart kinds are provided:

* Birkhoff charts on disk boundaries: y is arclength along the boundary,
  eta the tangential component (sin of the reflection angle) of the unit
  flight direction.  The bounce map in these coordinates is exactly
  symplectic, with the Euclidean chord length as generating function.
* flat charts for smooth potentials: a short transversal line segment
  through a reference point, y the position along the segment, eta the
  momentum component along it, with the parallel momentum eliminated by
  the energy constraint.  The induced symplectic form is exactly
  dy ^ deta, so return maps between flat charts are area preserving in
  chart coordinates.

The first-return map, its return time, and the accumulated action along
each connecting orbit are sampled per ordered chart pair, and each block
is fitted with a tensor-Chebyshev generating function S(y_arr, y_dep)
whose partial derivatives reproduce the sampled momenta.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from scipy.integrate import solve_ivp

from .dynamics import DiskBilliard, PhasePoint
from .errors import (
    ConsistencyError,
    ConstructionError,
    EscapeError,
    ParameterError,
    TwistError,
)


# ----------------------------------------------------------------------
# Chart geometry
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Ellipse:
    """Confinement ellipse {((y-y0)/a)^2 + ((eta-eta0)/b)^2 < 1}."""

    y0: float
    eta0: float
    a: float
    b: float

    def level(self, y, eta):
        return ((y - self.y0) / self.a) ** 2 + ((eta - self.eta0) / self.b) ** 2 - 1.0


@dataclass(frozen=True)
class SectionPoint:
    index: int
    y: float
    eta: float


@dataclass
class BirkhoffChart:
    """Chart on one disk boundary: (arclength, sin of reflection angle)."""

    index: int
    disk_index: int
    center: np.ndarray
    radius: float
    phi_ref: float
    speed: float
    domain: tuple  # (y_min, y_max, eta_min, eta_max)
    ellipse: Ellipse = None
    core_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    kind = "birkhoff"

    def _frames(self, s):
        phi = self.phi_ref + s / self.radius
        n = np.array([np.cos(phi), np.sin(phi)])
        t = np.array([-np.sin(phi), np.cos(phi)])
        return n, t

    def embed(self, y, eta):
        """Outgoing phase point at boundary position y with sin(theta) = eta."""
        if abs(eta) >= 1.0:
            raise ParameterError("eta must satisfy |eta| < 1 on a Birkhoff chart")
        n, t = self._frames(y)
        x = self.center + self.radius * n
        u = eta * t + np.sqrt(1.0 - eta * eta) * n
        return PhasePoint(x, self.speed * u)

    def coords(self, x, direction):
        """Chart coordinates of a boundary point and unit flight direction."""
        rel = np.asarray(x, dtype=float) - self.center
        phi = np.arctan2(rel[1], rel[0])
        dphi = (phi - self.phi_ref + np.pi) % (2.0 * np.pi) - np.pi
        _, t = self._frames(dphi * self.radius)
        d = np.asarray(direction, dtype=float)
        return dphi * self.radius, float(d @ t) / np.linalg.norm(d)

    def contains(self, y, eta, pad=0.0):
        y0, y1, e0, e1 = self.domain
        return (y0 + pad <= y <= y1 - pad) and (e0 + pad <= eta <= e1 - pad)

    def transversality(self):
        """Minimal crossing cosine over the chart (tangency at |eta| = 1)."""
        e0, e1 = self.domain[2], self.domain[3]
        eta_max = max(abs(e0), abs(e1))
        return float(np.sqrt(max(0.0, 1.0 - eta_max**2)))

    def boundary_states(self, n=160):
        ys = np.linspace(self.domain[0], self.domain[1], n)
        es = np.linspace(self.domain[2], self.domain[3], n)
        edges = ([(y, self.domain[2]) for y in ys] + [(y, self.domain[3]) for y in ys]
                 + [(self.domain[0], e) for e in es] + [(self.domain[1], e) for e in es])
        return np.array([self.embed(y, e).as_array() for (y, e) in edges])


@dataclass
class FlatChart:
    """Transversal line segment through x0, oriented along the local flow.

    The embedded surface is {x0 + y * e_dir} with transverse momentum eta
    and parallel momentum sqrt(2(E - V) - eta^2) > 0 along u_dir.
    """

    index: int
    x0: np.ndarray
    u_dir: np.ndarray
    e_dir: np.ndarray
    energy: float
    system: object
    domain: tuple
    ellipse: Ellipse = None
    core_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    kind = "flat"

    def parallel_momentum_sq(self, y, eta):
        x = self.x0 + y * self.e_dir
        return 2.0 * (self.energy - self.system.potential(x)) - eta * eta

    def embed(self, y, eta):
        par2 = self.parallel_momentum_sq(y, eta)
        if par2 <= 0.0:
            raise ParameterError("chart point outside the energy shell")
        x = self.x0 + y * self.e_dir
        xi = eta * self.e_dir + np.sqrt(par2) * self.u_dir
        return PhasePoint(x, xi)

    def coords(self, x, xi):
        y = float((np.asarray(x, dtype=float) - self.x0) @ self.e_dir)
        eta = float(np.asarray(xi, dtype=float) @ self.e_dir)
        return y, eta

    def signed_coord(self, x):
        return float((np.asarray(x, dtype=float) - self.x0) @ self.u_dir)

    def contains(self, y, eta, pad=0.0):
        y0, y1, e0, e1 = self.domain
        return (y0 + pad <= y <= y1 - pad) and (e0 + pad <= eta <= e1 - pad)

    def transversality(self):
        ys = np.linspace(self.domain[0], self.domain[1], 21)
        es = np.array([self.domain[2], 0.0, self.domain[3]])
        worst = np.inf
        for y in ys:
            for eta in es:
                par2 = self.parallel_momentum_sq(y, eta)
                if par2 <= 0:
                    return 0.0
                worst = min(worst, np.sqrt(par2 / (par2 + eta * eta)))
        return float(worst)

    def boundary_states(self, n=160):
        ys = np.linspace(self.domain[0], self.domain[1], n)
        es = np.linspace(self.domain[2], self.domain[3], n)
        edges = ([(y, self.domain[2]) for y in ys] + [(y, self.domain[3]) for y in ys]
                 + [(self.domain[0], e) for e in es] + [(self.domain[1], e) for e in es])
        out = []
        for (y, e) in edges:
            try:
                out.append(self.embed(y, e).as_array())
            except ParameterError:
                continue
        return np.array(out)


# ----------------------------------------------------------------------
# Billiard bounce walk
# ----------------------------------------------------------------------

def _billiard_bounces(system, point, tau_max, escape_radius):
    """Bounce events (t, disk, x, unit incoming, unit outgoing) until escape.

    Iterates the exact ray dynamics from an outgoing phase point; stops at
    tau_max or when the orbit leaves |x| <= escape_radius between bounces.
    """
    from .dynamics import _next_disk_hit, _reflect  # internal exact helpers

    speed = point.speed()
    x = point.x.copy()
    u = point.xi / speed
    t = 0.0
    events = []
    r2 = escape_radius**2
    while t < tau_max:
        hit = _next_disk_hit(system, x, u)
        seg = hit[0] / speed if hit is not None else np.inf
        b = x @ u
        c0 = x @ x - r2
        disc = b * b - c0
        if disc > 0:
            t_out = (-b + np.sqrt(disc)) / speed
            if 0 <= t_out < seg:
                return events, ("escape", t + t_out)
        if hit is None or t + seg > tau_max:
            return events, ("timeout", tau_max)
        x = x + hit[0] * u
        t += seg
        u_in = u.copy()
        u = _reflect(system, x, u, hit[1])
        events.append((t, hit[1], x.copy(), u_in, u.copy()))
    return events, ("timeout", tau_max)


# ----------------------------------------------------------------------
# Section construction
# ----------------------------------------------------------------------

def _footprint(points):
    pts = np.asarray(points, dtype=float)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return lo, hi


def _make_ellipse(lo, hi, margin, floor_y, floor_eta):
    cy, ce = 0.5 * (lo + hi)
    a = max(margin * 0.5 * (hi[0] - lo[0]), floor_y)
    b = max(margin * 0.5 * (hi[1] - lo[1]), floor_eta)
    return Ellipse(float(cy), float(ce), float(a), float(b))


def _build_billiard_sections(system, E, trapped_samples, max_diameter,
                             delta_bdry, tau_max, pad_factor, eta_cap,
                             ellipse_margin, escape_radius, y_halfwidth=None):
    speed = np.sqrt(2.0 * E)
    per_disk = {k: [] for k in range(len(system.disks))}
    for p in trapped_samples:
        for direction in (p, p.reversed()):
            events, _ = _billiard_bounces(system, direction, tau_max, escape_radius)
            for (_, k, x, u_in, _) in events:
                per_disk[k].append((x, u_in))
    charts = []
    for k in sorted(per_disk):
        if not per_disk[k]:
            continue
        disk = system.disks[k]
        angles = np.array([np.arctan2(*(x - disk.center)[::-1]) for (x, _) in per_disk[k]])
        phi_ref = float(np.arctan2(np.mean(np.sin(angles)), np.mean(np.cos(angles))))
        chart = BirkhoffChart(index=len(charts), disk_index=k, center=disk.center,
                              radius=disk.radius, phi_ref=phi_ref, speed=speed,
                              domain=(0, 0, 0, 0))
        coords = np.array([chart.coords(x, u) for (x, u) in per_disk[k]])
        lo, hi = _footprint(coords)
        pad_y = max(pad_factor * 0.5 * (hi[0] - lo[0]), 4 * delta_bdry, 0.1 * disk.radius)
        pad_e = max(pad_factor * 0.5 * (hi[1] - lo[1]), 4 * delta_bdry, 0.05)
        y0, y1 = lo[0] - pad_y, hi[0] + pad_y
        if y_halfwidth is not None:
            mid = 0.5 * (lo[0] + hi[0])
            if y_halfwidth < 0.5 * (hi[0] - lo[0]) + 2 * delta_bdry:
                raise ConstructionError(
                    f"disk {k}: requested y half-width {y_halfwidth} cannot "
                    f"clear the trapped footprint")
            y0, y1 = mid - y_halfwidth, mid + y_halfwidth
        e0 = max(lo[1] - pad_e, -eta_cap)
        e1 = min(hi[1] + pad_e, eta_cap)
        if (y1 - y0) > max_diameter or (e1 - e0) > max_diameter:
            raise ConstructionError(
                f"disk {k}: footprint plus clearance exceeds max_diameter")
        if e0 > lo[1] - 2 * delta_bdry or e1 < hi[1] + 2 * delta_bdry:
            raise ConstructionError(
                f"disk {k}: eta clearance collides with the tangency cap")
        chart.domain = (float(y0), float(y1), float(e0), float(e1))
        chart.ellipse = _make_ellipse(lo, hi, ellipse_margin,
                                      floor_y=0.05 * disk.radius, floor_eta=0.05)
        chart.core_points = coords
        charts.append(chart)
    return charts


def _greedy_flat_charts(system, E, trapped_samples, max_diameter, delta_bdry,
                        eta_cap, ellipse_margin, cluster_radius):
    """Cluster samples by position and flow direction; one chart per cluster."""
    pts = list(trapped_samples)
    clusters = []
    used = [False] * len(pts)
    for i, p in enumerate(pts):
        if used[i]:
            continue
        u = p.xi / p.speed()
        members = [p]
        used[i] = True
        for j in range(i + 1, len(pts)):
            if used[j]:
                continue
            q = pts[j]
            uq = q.xi / q.speed()
            if (np.linalg.norm(q.x - p.x) < cluster_radius and u @ uq > 0.8):
                members.append(q)
                used[j] = True
        clusters.append(members)

    charts = []
    for members in clusters:
        x0 = np.mean([m.x for m in members], axis=0)
        u = np.mean([m.xi / m.speed() for m in members], axis=0)
        u = u / np.linalg.norm(u)
        e = np.array([-u[1], u[0]])
        chart = FlatChart(index=len(charts), x0=x0, u_dir=u, e_dir=e,
                          energy=E, system=system, domain=(0, 0, 0, 0))
        coords = np.array([chart.coords(m.x, m.xi) for m in members])
        lo, hi = _footprint(coords)
        half = min(0.5 * max_diameter, max(2.0 * (hi[0] - lo[0] + 4 * delta_bdry), 0.25))
        ehalf = min(0.5 * max_diameter, max(2.0 * (hi[1] - lo[1] + 4 * delta_bdry), 0.25))
        # keep the eta range inside the energy shell across the y range
        vmax2 = min(2.0 * (E - system.potential(x0 + yy * e))
                    for yy in np.linspace(-half, half, 15))
        if vmax2 <= 0:
            raise ConstructionError("chart anchor too close to the forbidden region")
        ehalf = min(ehalf, eta_cap * np.sqrt(vmax2))
        c = 0.5 * (lo + hi)
        chart.domain = (float(c[0] - half), float(c[0] + half),
                        float(c[1] - ehalf), float(c[1] + ehalf))
        chart.ellipse = _make_ellipse(lo, hi, ellipse_margin,
                                      floor_y=0.1 * half, floor_eta=0.1 * ehalf)
        chart.core_points = coords
        charts.append(chart)
    return charts


def build_sections(system, E, trapped_samples, max_diameter, *,
                   delta_bdry=0.05, tau_max=12.0, pad_factor=1.6,
                   eta_cap=0.92, ellipse_margin=1.6, min_transversality=0.15,
                   escape_radius=None, tol=1e-10, cluster_radius=0.4,
                   ellipse_axes=None, y_halfwidth=None,
                   require_core_cover=True):
    """Build transversal charts covering the flow through the trapped samples.

    Disk billiards get one Birkhoff chart per disk that trapped orbits
    bounce on; smooth potentials get flat charts on greedy position and
    direction clusters of the samples.  All charts are checked for
    transversality, for clearance delta_bdry between the trapped samples
    and the embedded chart boundaries, and for covering: every sample's
    forward orbit must cross some chart within tau_max.
    """
    if not trapped_samples:
        raise ParameterError("need at least one trapped sample")
    if escape_radius is None:
        escape_radius = 1.25 * system.support_radius
    if isinstance(system, DiskBilliard):
        charts = _build_billiard_sections(system, E, trapped_samples, max_diameter,
                                          delta_bdry, tau_max, pad_factor, eta_cap,
                                          ellipse_margin, escape_radius,
                                          y_halfwidth=y_halfwidth)
    else:
        charts = _greedy_flat_charts(system, E, trapped_samples, max_diameter,
                                     delta_bdry, eta_cap, ellipse_margin,
                                     cluster_radius)
    if not charts:
        raise ConstructionError("no chart could be built from the samples")

    if ellipse_axes is not None:
        a, b = float(ellipse_axes[0]), float(ellipse_axes[1])
        for chart in charts:
            chart.ellipse = Ellipse(chart.ellipse.y0, chart.ellipse.eta0, a, b)

    for chart in charts:
        if chart.transversality() < min_transversality:
            raise ConstructionError(
                f"chart {chart.index} fails the transversality threshold")
        ell = chart.ellipse
        y0, y1, e0, e1 = chart.domain
        if not (y0 < ell.y0 - ell.a and ell.y0 + ell.a < y1
                and e0 < ell.eta0 - ell.b and ell.eta0 + ell.b < e1):
            raise ConstructionError(
                f"chart {chart.index}: confinement ellipse not strictly inside")
        if ellipse_axes is not None and require_core_cover:
            levels = [ell.level(y, eta) for (y, eta) in chart.core_points]
            if levels and max(levels) > 1e-9:
                raise ConstructionError(
                    f"chart {chart.index}: trapped core points leak out of "
                    f"the confinement ellipse")

    # boundary clearance against every trapped sample (4d phase distance)
    samples4 = np.array([p.as_array() for p in trapped_samples])
    for chart in charts:
        boundary = chart.boundary_states()
        for k, s in enumerate(samples4):
            d = np.min(np.linalg.norm(boundary - s, axis=1))
            if d <= delta_bdry:
                raise ConstructionError(
                    f"trapped sample {k} within {d:.3g} of chart {chart.index} boundary")

    # covering check: forward orbit of each sample crosses a chart in tau_max
    for k, p in enumerate(trapped_samples):
        try:
            first_crossing(charts, system, p, tau_max=tau_max,
                           escape_radius=escape_radius, tol=tol)
        except EscapeError:
            raise ConstructionError(
                f"forward orbit of trapped sample {k} misses all charts "
                f"within tau_max") from None
    return charts


# ----------------------------------------------------------------------
# First return
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ReturnHit:
    """Arrival data of a first chart crossing.

    hops counts obstacle bounces traversed up to the registering one, so
    hops == 1 marks a direct single-chord branch of a billiard map.
    """

    target: int
    y: float
    eta: float
    tau: float
    action: float
    hops: int = 1


def _first_crossing_billiard(charts, system, point, tau_max, escape_radius):
    events, end = _billiard_bounces(system, point, tau_max, escape_radius)
    speed = point.speed()
    for hops, (t, k, x, u_in, _) in enumerate(events, start=1):
        for chart in charts:
            if chart.kind == "birkhoff" and chart.disk_index == k:
                y, eta = chart.coords(x, u_in)
                if chart.contains(y, eta):
                    return ReturnHit(chart.index, y, eta, t, speed * t, hops)
    raise EscapeError(f"no chart crossing before {end[0]} at t = {end[1]:.6g}")


def _first_crossing_smooth(charts, system, point, tau_max, escape_radius, tol):
    y0 = np.concatenate([point.as_array(), [0.0]])

    def rhs(t, y):
        return np.concatenate([y[2:4], -system.grad_potential(y[:2]),
                               [y[2] ** 2 + y[3] ** 2]])

    events = []
    for chart in charts:
        def g(t, y, chart=chart):
            return (y[0] - chart.x0[0]) * chart.u_dir[0] + (y[1] - chart.x0[1]) * chart.u_dir[1]
        g.terminal = False
        g.direction = 1.0
        events.append(g)

    def escape(t, y):
        return y[0] ** 2 + y[1] ** 2 - escape_radius**2
    escape.terminal = True
    escape.direction = 1.0
    events.append(escape)

    inner = max(1e-13, 1e-3 * tol)
    sol = solve_ivp(rhs, (0.0, tau_max), y0, method="DOP853", rtol=inner,
                    atol=inner, events=events, dense_output=True)
    hits = []
    for ci, chart in enumerate(charts):
        for t in sol.t_events[ci]:
            if t > 1e-9:
                hits.append((float(t), chart))
    for t, chart in sorted(hits, key=lambda h: h[0]):
        state = sol.sol(t)
        y, eta = chart.coords(state[:2], state[2:4])
        if chart.contains(y, eta):
            return ReturnHit(chart.index, float(y), float(eta), t, float(state[4]))
    reason = "escape" if sol.t_events[-1].size else "timeout"
    raise EscapeError(f"no chart crossing before {reason}")


def first_crossing(charts, system, point, *, tau_max=12.0, escape_radius=8.0,
                   tol=1e-10):
    """First transversal chart crossing of the forward orbit of a phase point."""
    if isinstance(system, DiskBilliard):
        return _first_crossing_billiard(charts, system, point, tau_max, escape_radius)
    return _first_crossing_smooth(charts, system, point, tau_max, escape_radius, tol)


def first_return(charts, system, departure, *, tau_max=12.0, escape_radius=8.0,
                 tol=1e-10):
    """First return of a chart point to the section.

    departure is a SectionPoint on charts[departure.index]; the result
    carries the target chart index, arrival coordinates, the return time
    (localized to the integrator's event accuracy), and the accumulated
    action along the connecting orbit (chord length for billiards).
    """
    chart = charts[departure.index]
    if not chart.contains(departure.y, departure.eta):
        raise ParameterError("departure point outside its chart domain")
    state = chart.embed(departure.y, departure.eta)
    return first_crossing(charts, system, state, tau_max=tau_max,
                          escape_radius=escape_radius, tol=tol)


# ----------------------------------------------------------------------
# Blocks and the return-map data set
# ----------------------------------------------------------------------

@dataclass
class BlockSamples:
    """Sampled restriction of the return map to one (target, source) pair."""

    target: int
    source: int
    dep_y: np.ndarray
    dep_eta: np.ndarray
    arr_y: np.ndarray
    arr_eta: np.ndarray
    tau: np.ndarray
    action: np.ndarray
    is_core: np.ndarray

    @property
    def size(self):
        return self.dep_y.size


@dataclass
class ReturnMapData:
    charts: list
    blocks: dict          # (target, source) -> BlockSamples
    fits: dict = field(default_factory=dict)

    def j_plus(self, i):
        return sorted({j for (j, src) in self.blocks if src == i})

    def j_minus(self, i):
        return sorted({src for (j, src) in self.blocks if j == i})


def partition_blocks(charts, system, sample_budget, *, tau_max=12.0,
                     escape_radius=8.0, tol=1e-10, disjoint_floor=1e-9,
                     grid_shape=None, extend_billiard=False):
    """Sample the return map and split it into (target, source) blocks.

    The adjacency is seeded by the charts' trapped core points (each must
    return; a core point with no return is an inconsistency).  Each block
    is then enriched with a grid of departure points over the source chart
    whose first returns land on the block's target.  Only direct branches
    (hops == 1) enter the blocks; a grid orbit that bounces outside every
    chart domain before registering belongs to a different branch of the
    return map and would corrupt the generating-function fit.
    """
    records = {}

    def push(j, i, dep, hit, core):
        rec = records.setdefault((j, i), [])
        rec.append((dep[0], dep[1], hit.y, hit.eta, hit.tau, hit.action, core))

    core_departures = {}
    for chart in charts:
        for (y, eta) in chart.core_points:
            if not chart.contains(y, eta):
                continue
            try:
                hit = first_return(charts, system, SectionPoint(chart.index, y, eta),
                                   tau_max=tau_max, escape_radius=escape_radius, tol=tol)
            except EscapeError:
                raise ConsistencyError(
                    f"trapped core point on chart {chart.index} has no return") from None
            if not (0.0 < hit.tau <= tau_max):
                raise ConsistencyError("return time outside (0, tau_max]")
            if hit.hops != 1:
                raise ConsistencyError(
                    f"trapped core point on chart {chart.index} returned only "
                    f"after {hit.hops} unregistered crossings")
            push(hit.target, chart.index, (y, eta), hit, True)
            core_departures.setdefault((hit.target, chart.index), []).append((y, eta))

    n_grid = grid_shape
    if n_grid is None:
        per_chart = max(16, sample_budget // max(1, len(charts)))
        n_grid = int(np.ceil(np.sqrt(per_chart)))
    for chart in charts:
        y0, y1, e0, e1 = chart.domain
        ys = np.linspace(y0, y1, n_grid + 2)[1:-1]
        es = np.linspace(e0, e1, n_grid + 2)[1:-1]
        for y in ys:
            for eta in es:
                try:
                    hit = first_return(charts, system, SectionPoint(chart.index, y, eta),
                                       tau_max=tau_max, escape_radius=escape_radius,
                                       tol=tol)
                except (EscapeError, ParameterError):
                    continue
                if hit.hops == 1 and 0.0 < hit.tau <= tau_max:
                    push(hit.target, chart.index, (y, eta), hit, False)

    blocks = {}
    for (j, i), rows in sorted(records.items()):
        arr = np.array([r[:6] for r in rows], dtype=float)
        block = BlockSamples(
            target=j, source=i, dep_y=arr[:, 0], dep_eta=arr[:, 1],
            arr_y=arr[:, 2], arr_eta=arr[:, 3], tau=arr[:, 4], action=arr[:, 5],
            is_core=np.array([r[6] for r in rows], dtype=bool))
        if extend_billiard and charts[j].kind == "birkhoff":
            block = merge_blocks(block, billiard_block_extension(charts[j],
                                                                 charts[i]))
        blocks[(j, i)] = block

    # core departure regions of distinct blocks must stay apart
    by_source = {}
    for (j, i), pts in core_departures.items():
        by_source.setdefault(i, []).append((j, np.asarray(pts, dtype=float)))
    for i, groups in by_source.items():
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                pa, pb = groups[a][1], groups[b][1]
                d = np.min(np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2))
                if d <= disjoint_floor:
                    raise ConsistencyError(
                        f"departure sets of blocks ({groups[a][0]},{i}) and "
                        f"({groups[b][0]},{i}) are not disjoint")
    return ReturnMapData(charts=list(charts), blocks=blocks)


def billiard_block_extension(chart_target, chart_source, n=28):
    """Synthetic samples of the extended chord branch over full chart rects.

    The bounce branch between two disks extends analytically to every
    boundary-point pair: the chord length is its generating function and
    the tangential components of the connecting direction are the momenta.
    A grid of such samples lets the Chebyshev fit hold on the whole chart
    product, where the quantization kernel needs it, instead of only on
    the dynamically reachable footprint.
    """
    if chart_target.kind != "birkhoff" or chart_source.kind != "birkhoff":
        raise ParameterError("chord extension exists only for disk charts")
    sd = np.linspace(chart_source.domain[0], chart_source.domain[1], n)
    sa = np.linspace(chart_target.domain[0], chart_target.domain[1], n)
    SD, SA = np.meshgrid(sd, sa)
    SD, SA = SD.ravel(), SA.ravel()
    phi_d = chart_source.phi_ref + SD / chart_source.radius
    phi_a = chart_target.phi_ref + SA / chart_target.radius
    qd = chart_source.center + chart_source.radius * np.stack(
        [np.cos(phi_d), np.sin(phi_d)], axis=-1)
    qa = chart_target.center + chart_target.radius * np.stack(
        [np.cos(phi_a), np.sin(phi_a)], axis=-1)
    chord = np.linalg.norm(qa - qd, axis=1)
    u = (qa - qd) / chord[:, None]
    t_d = np.stack([-np.sin(phi_d), np.cos(phi_d)], axis=-1)
    t_a = np.stack([-np.sin(phi_a), np.cos(phi_a)], axis=-1)
    return BlockSamples(
        target=chart_target.index, source=chart_source.index,
        dep_y=SD, dep_eta=np.einsum("ij,ij->i", u, t_d),
        arr_y=SA, arr_eta=np.einsum("ij,ij->i", u, t_a),
        tau=chord / chart_source.speed, action=chord,
        is_core=np.zeros(SD.size, dtype=bool))


def merge_blocks(a, b):
    return BlockSamples(
        target=a.target, source=a.source,
        dep_y=np.concatenate([a.dep_y, b.dep_y]),
        dep_eta=np.concatenate([a.dep_eta, b.dep_eta]),
        arr_y=np.concatenate([a.arr_y, b.arr_y]),
        arr_eta=np.concatenate([a.arr_eta, b.arr_eta]),
        tau=np.concatenate([a.tau, b.tau]),
        action=np.concatenate([a.action, b.action]),
        is_core=np.concatenate([a.is_core, b.is_core]))


# ----------------------------------------------------------------------
# Tensor-Chebyshev fits
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Chebyshev2D:
    """Tensor Chebyshev polynomial on a rectangle, c[k, l] T_k(u) T_l(v).

    u scales the first argument (arrival position), v the second
    (departure position).
    """

    coeffs: np.ndarray
    rect: tuple  # (y_min, y_max, yp_min, yp_max)

    def _uv(self, y, yp):
        a0, a1, b0, b1 = self.rect
        u = (2.0 * np.asarray(y) - (a0 + a1)) / (a1 - a0)
        v = (2.0 * np.asarray(yp) - (b0 + b1)) / (b1 - b0)
        return np.broadcast_arrays(u, v)

    def value(self, y, yp):
        u, v = self._uv(y, yp)
        return _cheb.chebval2d(u, v, self.coeffs)

    def dy(self, y, yp):
        u, v = self._uv(y, yp)
        a0, a1 = self.rect[0], self.rect[1]
        return _cheb.chebval2d(u, v, _cheb.chebder(self.coeffs, axis=0)) * (2.0 / (a1 - a0))

    def dyp(self, y, yp):
        u, v = self._uv(y, yp)
        b0, b1 = self.rect[2], self.rect[3]
        return _cheb.chebval2d(u, v, _cheb.chebder(self.coeffs, axis=1)) * (2.0 / (b1 - b0))

    def dydyp(self, y, yp):
        u, v = self._uv(y, yp)
        a0, a1, b0, b1 = self.rect
        c = _cheb.chebder(_cheb.chebder(self.coeffs, axis=0), axis=1)
        return _cheb.chebval2d(u, v, c) * (4.0 / ((a1 - a0) * (b1 - b0)))


@dataclass(frozen=True)
class GeneratingFit:
    """Fitted generating function and return time of one block."""

    S: Chebyshev2D
    tau: Chebyshev2D
    residual: float
    tau_residual: float


def _cheb_design(u, v, degree):
    """Value and first-derivative design matrices for the tensor basis."""
    n = u.size
    eye = np.eye(degree + 1)
    Pu = np.stack([_cheb.chebval(u, eye[k]) for k in range(degree + 1)], axis=1)
    Pv = np.stack([_cheb.chebval(v, eye[k]) for k in range(degree + 1)], axis=1)
    Du = np.stack([_cheb.chebval(u, _cheb.chebder(eye[k])) if k else np.zeros(n)
                   for k in range(degree + 1)], axis=1)
    Dv = np.stack([_cheb.chebval(v, _cheb.chebder(eye[k])) if k else np.zeros(n)
                   for k in range(degree + 1)], axis=1)
    val = np.einsum("mk,ml->mkl", Pu, Pv).reshape(n, -1)
    ddu = np.einsum("mk,ml->mkl", Du, Pv).reshape(n, -1)
    ddv = np.einsum("mk,ml->mkl", Pu, Dv).reshape(n, -1)
    return val, ddu, ddv


def fit_generating_function(block, degree, *, twist_floor=1e-3, rect=None):
    """Least-squares tensor-Chebyshev fit of S(y_arr, y_dep) and tau.

    The fit enforces, at every sample, the action value S = action, the
    arrival momentum dS/dy = eta_arr, and the departure momentum
    -dS/dy_dep = eta_dep; the reported residual is the largest violation
    of any of the three groups.  Raises TwistError when the fitted mixed
    derivative d2S/dy dy_dep drops below twist_floor at a sample.
    """
    n = block.size
    n_coeff = (degree + 1) ** 2
    if n < 3 * n_coeff:
        raise ParameterError(
            f"need at least {3 * n_coeff} samples for degree {degree}, got {n}")
    if rect is None:
        pad_a = 0.05 * (block.arr_y.max() - block.arr_y.min() + 1e-12)
        pad_b = 0.05 * (block.dep_y.max() - block.dep_y.min() + 1e-12)
        rect = (block.arr_y.min() - pad_a, block.arr_y.max() + pad_a,
                block.dep_y.min() - pad_b, block.dep_y.max() + pad_b)
    a0, a1, b0, b1 = rect
    u = (2.0 * block.arr_y - (a0 + a1)) / (a1 - a0)
    v = (2.0 * block.dep_y - (b0 + b1)) / (b1 - b0)
    val, ddu, ddv = _cheb_design(u, v, degree)
    ddu = ddu * (2.0 / (a1 - a0))
    ddv = ddv * (2.0 / (b1 - b0))
    A = np.vstack([val, ddu, ddv])
    rhs = np.concatenate([block.action, block.arr_eta, -block.dep_eta])
    coeffs, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    S = Chebyshev2D(coeffs.reshape(degree + 1, degree + 1), rect)
    residual = float(np.max(np.abs(A @ coeffs - rhs)))

    tau_coeffs, *_ = np.linalg.lstsq(val, block.tau, rcond=None)
    tau_fit = Chebyshev2D(tau_coeffs.reshape(degree + 1, degree + 1), rect)
    tau_residual = float(np.max(np.abs(val @ tau_coeffs - block.tau)))

    twist = np.abs(S.dydyp(block.arr_y, block.dep_y))
    if np.min(twist) < twist_floor:
        raise TwistError(
            f"|d2S/dy dy_dep| = {np.min(twist):.3g} below floor {twist_floor}")
    return GeneratingFit(S=S, tau=tau_fit, residual=residual,
                         tau_residual=tau_residual)


def fit_all_blocks(rmd, degree, *, twist_floor=1e-3):
    """Fit every block of a ReturnMapData in place; returns the fits dict."""
    for key in sorted(rmd.blocks):
        rmd.fits[key] = fit_generating_function(rmd.blocks[key], degree,
                                                twist_floor=twist_floor)
    return rmd.fits


def block_jacobian(fit, y_arr, y_dep):
    """Jacobian of (dep -> arr) implied by the generating function.

    Uses the twist relations eta_arr = S_y, eta_dep = -S_yp: columns are
    d(arr_y, arr_eta)/d(dep_y, dep_eta).
    """
    syy = _second(fit.S, y_arr, y_dep, "yy")
    sypyp = _second(fit.S, y_arr, y_dep, "ypyp")
    syyp = fit.S.dydyp(y_arr, y_dep)
    dy_ddep = -sypyp / syyp
    dy_deta = -1.0 / syyp
    deta_ddep = syy * dy_ddep + syyp
    deta_deta = syy * dy_deta
    return np.array([[dy_ddep, dy_deta], [deta_ddep, deta_deta]])


def _second(poly, y, yp, which):
    c = poly.coeffs
    a0, a1, b0, b1 = poly.rect
    u = (2.0 * np.asarray(y) - (a0 + a1)) / (a1 - a0)
    v = (2.0 * np.asarray(yp) - (b0 + b1)) / (b1 - b0)
    if which == "yy":
        cc = _cheb.chebder(c, m=2, axis=0)
        return _cheb.chebval2d(u, v, cc) * (2.0 / (a1 - a0)) ** 2
    cc = _cheb.chebder(c, m=2, axis=1)
    return _cheb.chebval2d(u, v, cc) * (2.0 / (b1 - b0)) ** 2
