"""Weighted transfer operators, topological pressure, Ruelle resonances.

Models are piecewise-expanding Markov maps presented through their inverse
branches: an edge i -> j carries a contraction psi from interval I_j into
I_i, so the weighted transfer operator acts on functions phi per interval,

    (L_f phi)(x) |_{I_j} = sum over edges i -> j of e^{f(psi(x))} phi(psi(x)).

Analytic models are discretized by Chebyshev collocation per interval
(spectrally accurate), sampled return maps by an Ulam matrix on section
cells; the log of the spectral radius is the topological pressure, the
zero of the determinant family z -> det(1 - L_{f - z tau}) locates the
Ruelle-Pollicott resonances of the suspended flow, and periodic-orbit
sums give an independent finite-horizon pressure estimate.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BracketError,
    BudgetError,
    ModelError,
    ParameterError,
)
from .resonances import RectDomain, find_zeros


# ----------------------------------------------------------------------
# Models
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """Inverse branch of an edge source -> target.

    psi maps the target interval into the source interval; dpsi is its
    derivative.  label indexes the branch inside its model.
    """

    source: int
    target: int
    psi: object
    dpsi: object
    label: int = 0


@dataclass
class SymbolicModel:
    intervals: list
    branches: list
    name: str = ""

    def __post_init__(self):
        self.branches = [Branch(b.source, b.target, b.psi, b.dpsi, k)
                         for k, b in enumerate(self.branches)]
        self._check_irreducible()

    @property
    def alphabet_size(self):
        return len(self.intervals)

    def transition_matrix(self):
        J = self.alphabet_size
        A = np.zeros((J, J), dtype=int)
        for b in self.branches:
            A[b.source, b.target] = 1
        return A

    def _check_irreducible(self):
        A = self.transition_matrix() > 0
        J = A.shape[0]
        reach = A.copy()
        for _ in range(J):
            reach = reach | (reach @ A)
        recurrent = [i for i in range(J) if reach[i, i]]
        if not recurrent:
            raise ModelError("model has no recurrent state")
        for i in recurrent:
            for j in recurrent:
                if not (reach[i, j] and reach[j, i]):
                    raise ModelError("recurrent part of the model is reducible")


def _affine(a, b, c, d):
    """Affine map [a, b] -> [c, d] and its derivative."""
    slope = (d - c) / (b - a)

    def psi(x):
        return c + slope * (np.asarray(x, dtype=float) - a)

    def dpsi(x):
        return np.full_like(np.asarray(x, dtype=float), slope)

    return psi, dpsi


def doubling_map():
    """Full binary expanding map x -> 2x mod 1 via its two inverse branches."""
    b0 = Branch(0, 0, *_affine(0.0, 1.0, 0.0, 0.5))
    b1 = Branch(0, 0, *_affine(0.0, 1.0, 0.5, 1.0))
    return SymbolicModel([(0.0, 1.0)], [b0, b1], name="doubling")


def open_ternary_map():
    """x -> 3x mod 1 with the middle branch removed (Cantor repeller)."""
    b0 = Branch(0, 0, *_affine(0.0, 1.0, 0.0, 1.0 / 3.0))
    b2 = Branch(0, 0, *_affine(0.0, 1.0, 2.0 / 3.0, 1.0))
    return SymbolicModel([(0.0, 1.0)], [b0, b2], name="open_ternary")


def golden_mean_shift():
    """Two-state shift forbidding the transition 2 -> 2."""
    b00 = Branch(0, 0, *_affine(0.0, 1.0, 0.0, 0.5))
    b01 = Branch(0, 1, *_affine(2.0, 3.0, 0.5, 1.0))
    b10 = Branch(1, 0, *_affine(0.0, 1.0, 2.0, 2.5))
    return SymbolicModel([(0.0, 1.0), (2.0, 3.0)], [b00, b01, b10],
                         name="golden_mean")


# ----------------------------------------------------------------------
# Weights
# ----------------------------------------------------------------------

def _weight_fn(weight):
    """Normalize a weight descriptor to a callable (branch, x_target) -> values.

    The returned values must equal f at the branch preimage psi(x); the
    built-in "neg_log_expansion" descriptor realizes f = -log |kappa'|
    through log |psi'(x)|.
    """
    if weight is None:
        return lambda branch, x: np.zeros_like(np.asarray(x, dtype=float))
    if isinstance(weight, (int, float)):
        c = float(weight)
        return lambda branch, x: np.full_like(np.asarray(x, dtype=float), c)
    if weight == "neg_log_expansion":
        return lambda branch, x: np.log(np.abs(branch.dpsi(x)))
    if callable(weight):
        return weight
    raise ParameterError(f"unsupported weight descriptor: {weight!r}")


def branch_constants(values):
    """Weight taking a fixed value per branch label (e.g. roof heights)."""
    table = [float(v) for v in values]

    def w(branch, x):
        return np.full_like(np.asarray(x, dtype=float), table[branch.label])

    return w


def add_weights(*weights):
    fns = [_weight_fn(w) for w in weights]

    def w(branch, x):
        return sum(f(branch, x) for f in fns)

    return w


# ----------------------------------------------------------------------
# Discretizations
# ----------------------------------------------------------------------

def _cheb_nodes(a, b, n):
    k = np.arange(n)
    u = np.cos(np.pi * (k + 0.5) / n)[::-1]
    return 0.5 * (a + b) + 0.5 * (b - a) * u


def _barycentric_matrix(nodes, points):
    """Rows: Lagrange cardinal functions on nodes evaluated at points."""
    n = nodes.size
    k = np.arange(n)
    w = (-1.0) ** k * np.sin(np.pi * (k + 0.5) / n)
    diff = points[:, None] - nodes[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15)
    diff = np.where(exact, 1.0, diff)
    terms = w[None, :] / diff
    out = terms / terms.sum(axis=1)[:, None]
    hit = exact.any(axis=1)
    out[hit] = 0.0
    out[hit, np.argmax(exact[hit], axis=1)] = 1.0
    return out


_EXPANSION_FLOOR = 1.0 + 1e-9


@dataclass
class TransferMatrix:
    """Finite section of a weighted transfer operator."""

    matrix: np.ndarray
    kind: str
    resolution: int
    model_name: str
    weight: object = None
    tau: object = None
    z: complex = None
    node_index: list = field(default_factory=list)

    def eigenvalues(self):
        return np.linalg.eigvals(self.matrix)

    def spectral_radius(self):
        return float(np.max(np.abs(self.eigenvalues())))


def _collocation_pieces(model, resolution):
    """Per-edge structure matrices for collocation at a given degree."""
    nodes = [_cheb_nodes(a, b, resolution) for (a, b) in model.intervals]
    offsets = np.cumsum([0] + [resolution] * model.alphabet_size)
    pieces = []
    for branch in model.branches:
        x = nodes[branch.target]
        xp = branch.psi(x)
        expansion = 1.0 / np.max(np.abs(branch.dpsi(x)))
        if expansion < _EXPANSION_FLOOR:
            raise ModelError(
                f"branch {branch.label} is not expanding (|kappa'| = {expansion:.6g})")
        cards = _barycentric_matrix(nodes[branch.source], xp)
        rows = offsets[branch.target] + np.arange(resolution)
        cols = offsets[branch.source] + np.arange(resolution)
        pieces.append((branch, x, rows, cols, cards))
    dim = offsets[-1]
    return pieces, dim


def build_transfer_matrix(model, f, discretization=("collocation", 32),
                          tau=None, z=None):
    """Matrix approximation of L_{f - z tau} (plain L_f when z is None).

    discretization is ("collocation", degree) for analytic interval models
    or ("ulam", cells) for a cell-averaged approximation; the resolution
    must be at least 8.
    """
    kind, resolution = discretization
    if resolution < 8:
        raise ParameterError("discretization resolution must be >= 8")
    wf = _weight_fn(f)
    tf = _weight_fn(tau) if tau is not None else None
    if z is not None and tf is None:
        raise ParameterError("a complex parameter z requires a roof tau")

    if kind == "collocation":
        pieces, dim = _collocation_pieces(model, resolution)
        L = np.zeros((dim, dim), dtype=complex)
        for branch, x, rows, cols, cards in pieces:
            w = wf(branch, x).astype(complex)
            if z is not None:
                w = w - z * tf(branch, x)
            L[np.ix_(rows, cols)] += np.exp(w)[:, None] * cards
        return TransferMatrix(L, kind, resolution, model.name, f, tau, z)

    if kind == "ulam":
        return _build_ulam(model, wf, tf, z, resolution)
    raise ParameterError(f"unknown discretization kind {kind!r}")


def _build_ulam(model, wf, tf, z, cells, sub=16):
    """Cell matrix with columns indexed by target cells.

    Entry [r, c] pushes the preimage mass of target cell c into cell r,
    weighted by e^{f - z tau} at the preimages, so that with f = 0 the
    column sums equal the number of inverse branches exactly.
    """
    J = model.alphabet_size
    dim = J * cells
    L = np.zeros((dim, dim), dtype=complex)
    for branch in model.branches:
        a, b = model.intervals[branch.target]
        sa, sb = model.intervals[branch.source]
        width = (b - a) / cells
        for c in range(cells):
            x = a + (c + (np.arange(sub) + 0.5) / sub) * width
            xp = branch.psi(x)
            w = wf(branch, x).astype(complex)
            if z is not None:
                w = w - z * tf(branch, x)
            r = np.clip(((xp - sa) / (sb - sa) * cells).astype(int), 0, cells - 1)
            col = branch.target * cells + c
            np.add.at(L, (branch.source * cells + r, np.full(sub, col)),
                      np.exp(w) / sub)
    return TransferMatrix(L, "ulam", cells, model.name, None, None, z)


def ulam_return_map_matrix(charts, system, cells=12, sub=2, weight=None,
                           tau_max=12.0, escape_radius=8.0, tol=1e-10):
    """Ulam matrix of the sampled section return map.

    Each chart rectangle is split into cells x cells cells; sub x sub
    departure points per cell are propagated by first_return, and entry
    [arrival cell, departure cell] accumulates e^{weight}/sub^2.  Orbits
    that escape contribute nothing, so the leading eigenvalue carries the
    open map's mass loss.  weight, if given, is called as
    weight(key, dep_y, dep_eta, hit) with key = (target, source).

    Interior Ulam spectra of sampled maps are unreliable; only the leading
    eigenvalue (pressure) should be consumed.
    """
    from .section import SectionPoint, first_return
    from .errors import EscapeError

    J = len(charts)
    dim = J * cells * cells
    M = np.zeros((dim, dim))

    def cell_index(chart, y, eta):
        y0, y1, e0, e1 = chart.domain
        cy = min(cells - 1, max(0, int((y - y0) / (y1 - y0) * cells)))
        ce = min(cells - 1, max(0, int((eta - e0) / (e1 - e0) * cells)))
        return chart.index * cells * cells + cy * cells + ce

    frac = 1.0 / (sub * sub)
    for chart in charts:
        y0, y1, e0, e1 = chart.domain
        for cy in range(cells):
            for ce in range(cells):
                for qy in range(sub):
                    for qe in range(sub):
                        y = y0 + (cy + (qy + 0.5) / sub) * (y1 - y0) / cells
                        eta = e0 + (ce + (qe + 0.5) / sub) * (e1 - e0) / cells
                        try:
                            hit = first_return(charts, system,
                                               SectionPoint(chart.index, y, eta),
                                               tau_max=tau_max,
                                               escape_radius=escape_radius, tol=tol)
                        except (EscapeError, ParameterError):
                            continue
                        if hit.hops != 1:
                            continue
                        w = 0.0
                        if weight is not None:
                            w = float(weight((hit.target, chart.index), y, eta, hit))
                        dep = chart.index * cells * cells + cy * cells + ce
                        arr = cell_index(charts[hit.target], hit.y, hit.eta)
                        M[arr, dep] += np.exp(w) * frac
    return TransferMatrix(M, "ulam", cells, "return_map", weight, None, None)


# ----------------------------------------------------------------------
# Pressure
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PressureResult:
    value: float
    error_estimate: float
    resolution: int

    def __float__(self):
        return self.value


def topological_pressure(model, f, discretization=("collocation", 32)):
    """log of the spectral radius of the transfer matrix.

    The error estimate is the change under doubling the resolution, in
    the spirit of a Richardson check; the value reported comes from the
    finer discretization.
    """
    kind, res = discretization
    coarse = build_transfer_matrix(model, f, (kind, res)).spectral_radius()
    fine = build_transfer_matrix(model, f, (kind, 2 * res)).spectral_radius()
    return PressureResult(value=float(np.log(fine)),
                          error_estimate=float(abs(np.log(fine) - np.log(coarse))),
                          resolution=2 * res)


def _closed_walks(A, T):
    J = A.shape[0]
    walks = []

    def extend(path):
        if len(path) == T:
            if A[path[-1], path[0]]:
                walks.append(tuple(path))
            return
        for j in range(J):
            if A[path[-1], j]:
                extend(path + [j])

    for i in range(J):
        extend([i])
    return walks


def orbit_pressure(model, f, T_max, max_orbits=1 << 20):
    """Finite-horizon pressure from length-T_max periodic orbit sums.

    Enumerates every closed symbol path of length exactly T_max, finds the
    corresponding periodic point of the map by iterating the composed
    contraction, and returns log(sum of e^{Birkhoff sums}) / T_max.  This
    is the independent oracle for topological_pressure.
    """
    A = model.transition_matrix()
    J = model.alphabet_size
    multi = np.zeros((J, J))
    for b in model.branches:
        multi[b.source, b.target] += 1.0
    count = np.trace(np.linalg.matrix_power(multi, T_max))
    if count > max_orbits:
        raise BudgetError(f"about {count:.3g} periodic words exceed the budget")
    wf = _weight_fn(f)
    by_pair = {}
    for b in model.branches:
        by_pair.setdefault((b.source, b.target), []).append(b)
    branch_of = {b.label: b for b in model.branches}

    total = 0.0
    for walk in _closed_walks(A, T_max):
        seqs = [[]]
        for t in range(T_max):
            pair = (walk[t], walk[(t + 1) % T_max])
            seqs = [s + [b.label] for s in seqs for b in by_pair[pair]]
        seqs = np.asarray(seqs, dtype=int)          # (n, T) branch labels
        a0, b0 = model.intervals[walk[0]]
        x1 = np.full(seqs.shape[0], 0.5 * (a0 + b0))

        def compose(xs):
            xs = xs.copy()
            for t in range(T_max - 1, -1, -1):
                for lbl in np.unique(seqs[:, t]):
                    m = seqs[:, t] == lbl
                    xs[m] = branch_of[lbl].psi(xs[m])
            return xs

        for _ in range(120):
            x_new = compose(x1)
            if np.max(np.abs(x_new - x1)) < 1e-15:
                x1 = x_new
                break
            x1 = x_new

        # walk the orbit backward: entering iteration t, cur equals the
        # edge-t target point p_{t+1}, so the weight picks up f(p_t)
        weights = np.zeros(seqs.shape[0])
        cur = x1.copy()
        for t in range(T_max - 1, -1, -1):
            for lbl in np.unique(seqs[:, t]):
                m = seqs[:, t] == lbl
                weights[m] += wf(branch_of[lbl], cur[m])
                cur[m] = branch_of[lbl].psi(cur[m])
        total += float(np.sum(np.exp(weights)))
    return float(np.log(total) / T_max)


def flow_pressure(model, f, tau, resolution=48, s_range=(-30.0, 30.0)):
    """Root s* of P(f - s tau) = 0, the pressure of the suspended flow.

    tau must be a positive roof; P is then strictly decreasing in s, so a
    sign change is bracketed and polished by Brent's method to 1e-12.
    """
    wf = _weight_fn(f)
    tf = _weight_fn(tau)
    for branch in model.branches:
        a, b = model.intervals[branch.target]
        x = np.linspace(a, b, 9)
        if np.min(tf(branch, x)) <= 0:
            raise ParameterError("roof function must be positive")

    def pressure_at(s):
        def w(branch, x):
            return wf(branch, x) - s * tf(branch, x)
        m = build_transfer_matrix(model, w, ("collocation", resolution))
        return float(np.log(m.spectral_radius()))

    lo, hi = 0.0, 1.0
    plo, phi = pressure_at(lo), pressure_at(hi)
    for _ in range(80):
        if plo > 0 and phi < 0:
            break
        if plo <= 0:
            lo, plo = lo - max(1.0, abs(lo)), None
            if lo < s_range[0]:
                raise BracketError("no sign change of the pressure in range")
            plo = pressure_at(lo)
        if phi >= 0:
            hi = hi + max(1.0, abs(hi))
            if hi > s_range[1]:
                raise BracketError("no sign change of the pressure in range")
            phi = pressure_at(hi)
    return float(brentq(pressure_at, lo, hi, xtol=1e-12, rtol=8.9e-16))


# ----------------------------------------------------------------------
# Ruelle-Pollicott resonances
# ----------------------------------------------------------------------

def ruelle_resonances(model, f, tau, domain, resolution=40, coarse_grid=64,
                      zero_tol=None):
    """Zeros of z -> det(1 - L_{f - z tau}) in a rectangle of the z plane.

    Uses the collocation discretization (analyticity gives spectral
    accuracy) and the shared winding-number zero finder; multiplicities
    are winding numbers of the determinant.
    """
    if not isinstance(domain, RectDomain):
        domain = RectDomain(*domain)
    wf = _weight_fn(f)
    tf = _weight_fn(tau)
    resolution = int(resolution)
    pieces, dim = _collocation_pieces(model, resolution)
    base = []
    for branch, x, rows, cols, cards in pieces:
        amp = np.exp(wf(branch, x)).astype(complex)
        base.append((rows, cols, amp[:, None] * cards, tf(branch, x)))

    def builder(z):
        L = np.zeros((dim, dim), dtype=complex)
        for rows, cols, B, tvals in base:
            L[np.ix_(rows, cols)] += np.exp(-z * tvals)[:, None] * B
        return L

    return find_zeros(builder, domain, coarse_grid=coarse_grid,
                      zero_tol=zero_tol, provenance=f"ruelle:{model.name}")
