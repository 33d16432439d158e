"""Finite-rank quantum transfer operators for section return maps.

Each return-map branch with generating function S(y, y') is quantized as
an oscillatory kernel on Gauss-Legendre grids,

    K(y, y') = (2 pi h)^{-1/2} |d2S/dy dy'|^{1/2} e^{i (S + z tau) / h},

and compressed between per-chart spectral projectors whose ranges are
spanned by Hermite functions matched to an elliptic confinement symbol.
The rank of each projector is floor(a b / (2h) + 1/2), the number of
oscillator levels the ellipse with semi-axes (a, b) holds at Planck
constant h; halving h doubles the rank, the one-freedom Weyl scaling.

The block operators assemble into the open quantum map M(z, h) whose
determinant zeros are the resonances; the module also provides the
discrete-Fourier quantization of the three-branch baker map, the standard
exactly solvable open map used for validation and counting studies.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    AliasingError,
    AssemblyError,
    ConstructionError,
    ParameterError,
    ResolutionError,
    TwistError,
)

SQRT_TWO_PI = np.sqrt(2.0 * np.pi)


# ----------------------------------------------------------------------
# Hermite functions and quadrature grids
# ----------------------------------------------------------------------

def hermite_functions(n_levels, x):
    """Orthonormal Hermite functions phi_0..phi_{n-1} at points x.

    Uses the stable normalized recurrence, safe for large level counts.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((n_levels, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_levels > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(1, n_levels - 1):
        out[k + 1] = (np.sqrt(2.0 / (k + 1)) * x * out[k]
                      - np.sqrt(k / (k + 1.0)) * out[k - 1])
    return out


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple

    @property
    def size(self):
        return self.nodes.size


def gauss_legendre_grid(a, b, n):
    x, w = np.polynomial.legendre.leggauss(int(n))
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return QuadratureGrid(mid + half * x, half * w, (float(a), float(b)))


def chart_grid(chart, h, oversampling=4.0, min_nodes=48, p_pad=1.15):
    """Quadrature grid on a chart's y interval, dense enough for e^{i eta y / h}.

    The node count follows the phase-cycle count (momentum extent times
    interval length over 2 pi h) scaled by the oversampling factor.
    """
    y0, y1, e0, e1 = chart.domain
    p_max = p_pad * max(abs(e0), abs(e1))
    cycles = (y1 - y0) * p_max / (2.0 * np.pi * h)
    n = max(int(np.ceil(oversampling * cycles)), int(min_nodes))
    return gauss_legendre_grid(y0, y1, n)


# ----------------------------------------------------------------------
# Spectral projectors
# ----------------------------------------------------------------------

def projector_rank(a, b, h):
    """floor(ab/(2h) + 1/2): oscillator levels below the ellipse threshold.

    The elliptic symbol ((y-y0)/a)^2 + ((eta-eta0)/b)^2 - 1 quantizes to a
    harmonic oscillator with levels (2k+1) h/(ab) - 1, so level k sits in
    the nonpositive spectrum iff 2k+1 <= ab/h, ties counted inclusively.
    """
    return int(np.floor(a * b / (2.0 * h) + 0.5 + 1e-12))


_GRAM_TOL = 1e-12


@dataclass
class SectionProjector:
    """Rank-r spectral projector of one chart's confinement ellipse."""

    chart_index: int
    h: float
    ellipse: object
    rank: int
    basis: np.ndarray        # (n_nodes, rank), orthonormal under the grid
    grid: QuadratureGrid

    def analysis_matrix(self):
        """(rank, n) matrix mapping grid values to Hermite coefficients."""
        return self.basis.conj().T * self.grid.weights[None, :]

    def matrix(self):
        """The projector as an operator on grid values."""
        return self.basis @ self.analysis_matrix()

    def gram_defect(self):
        G = self.analysis_matrix() @ self.basis
        return float(np.max(np.abs(G - np.eye(self.rank))))

    def idempotence_defect(self):
        P = self.matrix()
        return float(np.linalg.norm(P @ P - P, 2))

    def self_adjoint_defect(self):
        """Deviation from self-adjointness in the weighted grid product."""
        P = self.matrix()
        W = np.diag(self.grid.weights)
        Winv = np.diag(1.0 / self.grid.weights)
        return float(np.linalg.norm(Winv @ P.conj().T @ W - P, 2))

    def apply(self, values):
        return self.basis @ (self.analysis_matrix() @ values)


def build_projector(chart, h, grid=None, oversampling=4.0, min_nodes=48):
    """Hermite-basis spectral projector for a chart's confinement ellipse.

    The basis functions are oscillator states scaled to the ellipse
    (length scale sqrt(h a / b), recentered at (y0, eta0) by a momentum
    boost); construction fails if h is too large for a single level or if
    the grid cannot hold the basis orthonormal to 1e-12.
    """
    ell = chart.ellipse
    if ell is None:
        raise ConstructionError("chart carries no confinement ellipse")
    y0d, y1d, e0d, e1d = chart.domain
    if not (y0d < ell.y0 - ell.a and ell.y0 + ell.a < y1d
            and e0d < ell.eta0 - ell.b and ell.eta0 + ell.b < e1d):
        raise ConstructionError("confinement ellipse not inside chart domain")
    r = projector_rank(ell.a, ell.b, h)
    if r < 1:
        raise ResolutionError(
            f"h = {h:.4g} too large: ellipse holds no oscillator level")
    if grid is None:
        grid = chart_grid(chart, h, oversampling=oversampling,
                          min_nodes=max(min_nodes, 4 * r + 40))
    scale = np.sqrt(h * ell.a / ell.b)
    u = (grid.nodes - ell.y0) / scale
    base = hermite_functions(r, u).T / np.sqrt(scale)
    boost = np.exp(1j * ell.eta0 * (grid.nodes - ell.y0) / h)
    proj = SectionProjector(chart_index=chart.index, h=h, ellipse=ell,
                            rank=r, basis=base.astype(complex) * boost[:, None],
                            grid=grid)
    defect = proj.gram_defect()
    if defect > _GRAM_TOL:
        raise ConstructionError(
            f"projector basis loses orthonormality ({defect:.2e}); "
            f"widen the chart or use more quadrature nodes")
    return proj


# ----------------------------------------------------------------------
# Kernel quantization
# ----------------------------------------------------------------------

@dataclass
class KernelBlock:
    """Grid-level oscillatory kernel of one return-map branch."""

    target: int
    source: int
    matrix: np.ndarray       # (n_target, n_source), source weights included
    h: float
    z: complex
    target_grid: QuadratureGrid
    source_grid: QuadratureGrid


def _nyquist_check(S, tau, h, target_grid, source_grid, oversampling, z_mag):
    ya = target_grid.nodes
    yd = source_grid.nodes
    probe_a = np.linspace(ya[0], ya[-1], 33)
    probe_d = np.linspace(yd[0], yd[-1], 33)
    A, D = np.meshgrid(probe_a, probe_d, indexing="ij")
    freq_y = np.max(np.abs(S.dy(A, D)) + z_mag * np.abs(tau.dy(A, D))) / h
    freq_yp = np.max(np.abs(S.dyp(A, D)) + z_mag * np.abs(tau.dyp(A, D))) / h
    need_t = int(np.ceil(oversampling * (ya[-1] - ya[0]) * freq_y / (2 * np.pi)))
    need_s = int(np.ceil(oversampling * (yd[-1] - yd[0]) * freq_yp / (2 * np.pi)))
    if target_grid.size < need_t:
        raise AliasingError("target grid undersampled for the kernel phase",
                            need_t)
    if source_grid.size < need_s:
        raise AliasingError("source grid undersampled for the kernel phase",
                            need_s)


def quantize_block(S, tau, z, h, target_grid, source_grid, *,
                   twist_floor=1e-3, oversampling=2.0, check_nyquist=True):
    """Oscillatory-kernel matrix of one branch at spectral parameter z.

    Builds K[m, n] = w_n (2 pi h)^{-1/2} |S_{y y'}|^{1/2}
    exp(i (S + z tau)(y_m, y'_n) / h) on the given grids; the twist factor
    must stay above twist_floor and the grids must resolve the phase.
    """
    if h <= 0:
        raise ParameterError("h must be > 0")
    if check_nyquist:
        _nyquist_check(S, tau, h, target_grid, source_grid, oversampling,
                       abs(z))
    ya = target_grid.nodes[:, None]
    yd = source_grid.nodes[None, :]
    twist = S.dydyp(ya, yd)
    min_twist = float(np.min(np.abs(twist)))
    if min_twist < twist_floor:
        raise TwistError(
            f"|d2S/dy dy'| = {min_twist:.3g} below floor {twist_floor}")
    phase = (S.value(ya, yd) + z * tau.value(ya, yd)) / h
    K = (np.sqrt(np.abs(twist)) / np.sqrt(2.0 * np.pi * h)
         * np.exp(1j * phase) * source_grid.weights[None, :])
    return KernelBlock(target=-1, source=-1, matrix=K, h=h, z=complex(z),
                       target_grid=target_grid, source_grid=source_grid)


# ----------------------------------------------------------------------
# Assembly
# ----------------------------------------------------------------------

@dataclass
class QuantumBlock:
    """Projector-compressed block in the Hermite bases, r_target x r_source."""

    matrix: np.ndarray
    target: int
    source: int
    h: float


@dataclass
class QuantumTransferOperator:
    """Block operator M(z, h) on the direct sum of the projector ranges."""

    blocks: dict             # (target, source) -> QuantumBlock
    ranks: list
    h: float
    z: complex

    @property
    def dimension(self):
        return int(sum(self.ranks))

    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.ranks)])

    def dense(self):
        off = self.offsets()
        M = np.zeros((self.dimension, self.dimension), dtype=complex)
        for (j, i), blk in self.blocks.items():
            M[off[j]:off[j + 1], off[i]:off[i + 1]] = blk.matrix
        return M

    def norm(self):
        return float(np.linalg.norm(self.dense(), 2))


def assemble_M(kernel_blocks, projectors, z=None):
    """Compress grid kernels between the per-chart Hermite projectors.

    kernel_blocks maps (target, source) to KernelBlock; the result carries
    dense r_target x r_source complex blocks with the sparsity pattern of
    the return-map adjacency.
    """
    if not kernel_blocks:
        raise AssemblyError("no kernel blocks supplied")
    ranks = [p.rank for p in projectors]
    h = projectors[0].h
    out = {}
    zz = z
    for (j, i), kb in sorted(kernel_blocks.items()):
        pj, pi = projectors[j], projectors[i]
        if kb.matrix.shape != (pj.grid.size, pi.grid.size):
            raise AssemblyError(
                f"block ({j},{i}) kernel shape {kb.matrix.shape} does not "
                f"match the projector grids")
        if zz is None:
            zz = kb.z
        out[(j, i)] = QuantumBlock(
            matrix=pj.analysis_matrix() @ kb.matrix @ pi.basis,
            target=j, source=i, h=h)
    return QuantumTransferOperator(blocks=out, ranks=ranks, h=h,
                                   z=complex(zz if zz is not None else 0.0))


class QuantumReturnOperator:
    """The holomorphic family z -> M(z, h) of a fitted return map.

    Precomputes the z-independent kernel amplitude and the return-time
    phase grid per block, so each evaluation is an elementwise complex
    exponential followed by two small projections; entries are entire in
    z by construction.
    """

    def __init__(self, rmd, h, *, oversampling=4.0, min_nodes=48,
                 twist_floor=1e-3, z_max=None, grids=None):
        if not rmd.fits:
            raise ParameterError("return map carries no generating fits")
        charts = rmd.charts
        self.h = float(h)
        self.charts = charts
        if grids is None:
            grids = []
            for c in charts:
                # the Hermite basis needs a few nodes per oscillation at
                # scale ell / sqrt(2r) across the whole interval
                ell = np.sqrt(h * c.ellipse.a / c.ellipse.b)
                r = projector_rank(c.ellipse.a, c.ellipse.b, h)
                span = c.domain[1] - c.domain[0]
                hermite_nodes = int(np.ceil(span / ell * (0.9 * np.sqrt(2 * r) + 3)))
                grids.append(chart_grid(c, h, oversampling=oversampling,
                                        min_nodes=max(min_nodes, hermite_nodes)))
        self.grids = grids
        self.projectors = [build_projector(c, h, grid=g)
                           for c, g in zip(charts, grids)]
        self.ranks = [p.rank for p in self.projectors]
        if z_max is None:
            z_max = 10.0 * h
        self.z_max = float(z_max)
        self._pieces = {}
        for (j, i), fit in sorted(rmd.fits.items()):
            kb = quantize_block(fit.S, fit.tau, 0.0, h, grids[j], grids[i],
                                twist_floor=twist_floor,
                                oversampling=oversampling / 2.0)
            ya = grids[j].nodes[:, None]
            yd = grids[i].nodes[None, :]
            tau_grid = fit.tau.value(ya, yd)
            _nyquist_check(fit.S, fit.tau, h, grids[j], grids[i],
                           oversampling / 2.0, z_max)
            P = self.projectors[j].analysis_matrix()
            H = self.projectors[i].basis
            self._pieces[(j, i)] = (P, kb.matrix, tau_grid, H)
        self._build_series()

    def _build_series(self):
        """Compressed Taylor coefficients of each block in z.

        Splitting the return time into a block mean plus a small spread,
        e^{iz tau/h} = e^{iz taubar/h} sum (iz dtau/h)^n / n!, turns every
        evaluation into a short scalar recursion over precomputed rank-size
        matrices; the order is chosen so the tail is below 1e-14 at z_max.
        """
        self._series = {}
        for key, (P, K0, tau_grid, H) in self._pieces.items():
            tau_bar = float(np.mean(tau_grid))
            dtau = tau_grid - tau_bar
            arg = self.z_max * float(np.max(np.abs(dtau))) / self.h
            order, term = 1, max(arg, 1e-30)
            while term > 1e-14 and order < 60:
                order += 1
                term *= arg / order
            coeffs = []
            power = np.ones_like(dtau)
            for n in range(order + 1):
                coeffs.append(P @ (K0 * power) @ H)
                power = power * dtau
            self._series[key] = (tau_bar, coeffs)

    @property
    def dimension(self):
        return int(sum(self.ranks))

    def _series_block(self, key, z):
        tau_bar, coeffs = self._series[key]
        w = 1j * complex(z) / self.h
        out = np.zeros_like(coeffs[0])
        factor = 1.0
        for n, C in enumerate(coeffs):
            out += factor * C
            factor *= w / (n + 1)
        return np.exp(w * tau_bar) * out

    def operator(self, z, exact=False):
        blocks = {}
        if exact or abs(z) > self.z_max:
            for (j, i), (P, K0, tau_grid, H) in self._pieces.items():
                kernel = K0 * np.exp(1j * complex(z) * tau_grid / self.h)
                blocks[(j, i)] = QuantumBlock(P @ kernel @ H, j, i, self.h)
        else:
            for key in self._series:
                blocks[key] = QuantumBlock(self._series_block(key, z),
                                           key[0], key[1], self.h)
        return QuantumTransferOperator(blocks=blocks, ranks=self.ranks,
                                       h=self.h, z=complex(z))

    def dense(self, z):
        return self.operator(z).dense()

    def phase_rate(self):
        """Bound on |d arg det(I - M)/dz|, for contour sampling densities."""
        tau_max = max(float(np.max(tg)) for (_, _, tg, _) in self._pieces.values())
        return self.dimension * tau_max / self.h

    def block_entry(self, key, z):
        """One compressed block at z, for holomorphy diagnostics."""
        P, K0, tau_grid, H = self._pieces[key]
        return P @ (K0 * np.exp(1j * complex(z) * tau_grid / self.h)) @ H


# ----------------------------------------------------------------------
# Open baker map
# ----------------------------------------------------------------------

def open_baker(N, open_middle=True):
    """Discrete-Fourier quantization of the three-branch baker map.

    Inverse DFT of size N applied to the direct sum of three DFTs of size
    N/3; with open_middle the middle column block is zeroed, turning the
    unitary map into a strict contraction whose eigenvalue counts follow
    the fractal scaling of the middle-third repeller.
    """
    if N % 3 != 0:
        raise ParameterError("baker dimension must be divisible by 3")
    n3 = N // 3
    F_N = np.fft.fft(np.eye(N), axis=0, norm="ortho")
    F_3 = np.fft.fft(np.eye(n3), axis=0, norm="ortho")
    inner = np.zeros((N, N), dtype=complex)
    inner[0:n3, 0:n3] = F_3
    if not open_middle:
        inner[n3:2 * n3, n3:2 * n3] = F_3
    inner[2 * n3:, 2 * n3:] = F_3
    return np.conj(F_N) @ inner


# ----------------------------------------------------------------------
# Coherent states and Husimi peaks
# ----------------------------------------------------------------------

def coherent_state(grid, q, p, h, sigma=1.0):
    """Gaussian wave packet at phase point (q, p), unit L2 norm."""
    y = grid.nodes
    g = ((np.pi * h * sigma**2) ** -0.25
         * np.exp(-((y - q) ** 2) / (2.0 * h * sigma**2) + 1j * p * (y - q) / h))
    return g


def husimi_peak(values, grid, h, q_range, p_range, n_scan=41, sigma=1.0):
    """Phase-space location maximizing |<coherent state, values>|^2."""
    qs = np.linspace(*q_range, n_scan)
    ps = np.linspace(*p_range, n_scan)
    best = (-np.inf, qs[0], ps[0])
    w = grid.weights
    for q in qs:
        for p in ps:
            g = coherent_state(grid, q, p, h, sigma)
            amp = abs(np.sum(np.conj(g) * w * values)) ** 2
            if amp > best[0]:
                best = (amp, q, p)
    return best[1], best[2]
