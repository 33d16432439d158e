"""Determinant zeros in the complex plane, with multiplicities.

The central object is zeta(z) = det(I - M(z)) for a holomorphic family of
finite matrices M(z).  Zeros inside a disk or rectangle are located by the
argument principle: boundary winding numbers computed from adaptively
densified, phase-unwrapped samples drive a recursive subdivision until
each cell holds a single zero cluster, which a log-derivative Newton
iteration then refines; the winding of a small final circle provides the
multiplicity.  Everything works on log |zeta| and arg zeta, so dimensions
large enough to underflow det(I - M) are handled untouched.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryAmbiguityError,
    ConsistencyError,
    ParameterError,
)

TWO_PI = 2.0 * np.pi


# ----------------------------------------------------------------------
# zeta and its logarithm
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ZetaValue:
    """det(I - M) together with its overflow-safe logarithm."""

    value: complex
    log_abs: float
    phase: float

    def __complex__(self):
        return complex(self.value)


def zeta(M_builder, z):
    """Evaluate det(I - M(z)) by pivoted LU via slogdet.

    Returns a ZetaValue carrying both the determinant and its
    log-magnitude, which survives underflow at large matrix dimension.
    """
    M = np.asarray(M_builder(z))
    if not np.all(np.isfinite(M.real)) or not np.all(np.isfinite(M.imag)):
        raise ParameterError("operator has non-finite entries")
    A = np.eye(M.shape[0], dtype=complex) - M
    sign, log_abs = np.linalg.slogdet(A)
    if sign == 0:
        return ZetaValue(0.0 + 0.0j, -np.inf, 0.0)
    with np.errstate(over="ignore", under="ignore"):
        value = sign * np.exp(log_abs)
    return ZetaValue(complex(value), float(log_abs), float(np.angle(sign)))


def _log_zeta_fn(M_builder):
    cache = {}

    def lz(z):
        key = complex(z)
        if key not in cache:
            v = zeta(M_builder, key)
            cache[key] = (v.log_abs, v.phase)
        return cache[key]

    return lz


def _wrap(dphi):
    return (dphi + np.pi) % TWO_PI - np.pi


class _BoundaryZero(Exception):
    pass


def _contour_winding(lz, gamma, n0, floor_log_abs=-np.inf, max_points=60000):
    """Winding number of zeta along the closed contour t -> gamma(t).

    Samples are densified until consecutive phase jumps are below pi/2,
    which pins the unwrapped phase; the result is then re-verified on a
    fully doubled sample set, since a jump criterion alone can be fooled
    by aliasing when the phase sweeps many turns between coarse samples.
    A sample with log|zeta| below floor_log_abs means the contour runs
    through a zero.
    """
    ts = list(np.linspace(0.0, 1.0, n0, endpoint=False))
    vals = {t: lz(gamma(t)) for t in ts}

    def too_low(v):
        return (not np.isfinite(v[0])) or v[0] < floor_log_abs

    def add_points(new_ts):
        for t in new_ts:
            tm = t % 1.0
            if tm in vals:
                continue
            vals[tm] = lz(gamma(tm))
            if too_low(vals[tm]):
                raise _BoundaryZero
            ts.append(tm)
        ts.sort()

    def refine_jumps():
        while True:
            inserts = []
            for a, b in zip(ts, ts[1:] + [ts[0] + 1.0]):
                pa = vals[a % 1.0][1]
                pb = vals[b % 1.0][1]
                if abs(_wrap(pb - pa)) >= 0.5 * np.pi:
                    inserts.append(0.5 * (a + b))
            if not inserts:
                return
            if len(ts) + len(inserts) > max_points:
                raise _BoundaryZero
            add_points(inserts)

    def winding_value():
        total = 0.0
        for a, b in zip(ts, ts[1:] + [ts[0] + 1.0]):
            total += _wrap(vals[b % 1.0][1] - vals[a % 1.0][1])
        return total / TWO_PI

    if any(too_low(v) for v in vals.values()):
        raise _BoundaryZero
    refine_jumps()
    w_prev = winding_value()
    stable = 0
    for _ in range(24):
        mids = [0.5 * (a + b) for a, b in zip(ts, ts[1:] + [ts[0] + 1.0])]
        if len(ts) + len(mids) > max_points:
            raise _BoundaryZero
        add_points(mids)
        refine_jumps()
        w_now = winding_value()
        if np.round(w_now) == np.round(w_prev) and abs(w_now - w_prev) < 0.1:
            stable += 1
            if stable >= 2:
                w_prev = w_now
                break
        else:
            stable = 0
        w_prev = w_now
    wi = int(np.round(w_prev))
    if abs(w_prev - wi) > 0.25:
        raise _BoundaryZero
    return wi, [vals[t][0] for t in ts]


def _rect_contour(rect):
    re0, re1, im0, im1 = rect
    w, h = re1 - re0, im1 - im0
    per = 2.0 * (w + h)

    def gamma(t):
        s = (t % 1.0) * per
        if s < w:
            return complex(re0 + s, im0)
        s -= w
        if s < h:
            return complex(re1, im0 + s)
        s -= h
        if s < w:
            return complex(re1 - s, im1)
        s -= w
        return complex(re0, im1 - s)

    return gamma


def _circle_contour(center, radius):
    def gamma(t):
        return center + radius * np.exp(2j * np.pi * t)

    return gamma


# ----------------------------------------------------------------------
# Domains and resonance sets
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DiskDomain:
    center: complex
    radius: float

    def inflate(self, factor):
        return DiskDomain(self.center, self.radius * factor)

    def contains(self, z, slack=0.0):
        return abs(z - self.center) <= self.radius * (1.0 + slack)

    @property
    def scale(self):
        return self.radius

    def bounding_rect(self):
        c, r = self.center, self.radius
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)

    def contour(self):
        return _circle_contour(self.center, self.radius)


@dataclass(frozen=True)
class RectDomain:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def inflate(self, factor):
        cr = 0.5 * (self.re_min + self.re_max)
        ci = 0.5 * (self.im_min + self.im_max)
        hw = 0.5 * (self.re_max - self.re_min) * factor
        hh = 0.5 * (self.im_max - self.im_min) * factor
        return RectDomain(cr - hw, cr + hw, ci - hh, ci + hh)

    def contains(self, z, slack=0.0):
        hw = (self.re_max - self.re_min) * slack
        hh = (self.im_max - self.im_min) * slack
        return (self.re_min - hw <= z.real <= self.re_max + hw
                and self.im_min - hh <= z.imag <= self.im_max + hh)

    @property
    def scale(self):
        return max(self.re_max - self.re_min, self.im_max - self.im_min)

    def bounding_rect(self):
        return (self.re_min, self.re_max, self.im_min, self.im_max)

    def contour(self):
        return _rect_contour(self.bounding_rect())


@dataclass(frozen=True)
class Zero:
    z: complex
    multiplicity: int
    residual: float


@dataclass
class ResonanceSet:
    """Zeros of a determinant in a domain, with winding multiplicities."""

    zeros: list
    domain: object
    outer_winding: int
    h: float = None
    provenance: str = ""

    @property
    def total_multiplicity(self):
        return sum(z.multiplicity for z in self.zeros)

    def as_array(self):
        return np.array([z.z for z in self.zeros], dtype=complex)


# ----------------------------------------------------------------------
# Zero finding
# ----------------------------------------------------------------------

_JITTERS = (0.5, 0.44, 0.56, 0.38, 0.62, 0.31, 0.69)


def _newton_refine(lz, cell_rect, scale, max_iter=90):
    """Newton on log zeta, confined to the cell whose winding found the zero."""
    re0, re1, im0, im1 = cell_rect
    cell_size = max(re1 - re0, im1 - im0)
    pad = 0.05 * cell_size

    def inside(w):
        return (re0 - pad <= w.real <= re1 + pad
                and im0 - pad <= w.imag <= im1 + pad)

    # start from the smallest boundary-safe |zeta| on an interior grid
    grid = [complex(re0 + (i + 0.5) * (re1 - re0) / 5,
                    im0 + (j + 0.5) * (im1 - im0) / 5)
            for i in range(5) for j in range(5)]
    z = min(grid, key=lambda w: lz(w)[0])

    delta = min(1e-6 * scale, 0.05 * cell_size)
    last_step = np.inf
    for _ in range(max_iter):
        la_p, ph_p = lz(z + delta)
        la_m, ph_m = lz(z - delta)
        la_ip, ph_ip = lz(z + 1j * delta)
        la_im, ph_im = lz(z - 1j * delta)
        dx = ((la_p - la_m) + 1j * _wrap(ph_p - ph_m)) / (2 * delta)
        dy = ((la_ip - la_im) + 1j * _wrap(ph_ip - ph_im)) / (2 * delta)
        dlog = 0.5 * (dx - 1j * dy)  # d(log zeta)/dz from both axes
        if dlog == 0 or not np.isfinite(dlog):
            break
        step = -1.0 / dlog
        if abs(step) > cell_size:
            step *= cell_size / abs(step)
        for _ in range(50):
            if inside(z + step):
                break
            step *= 0.5
        z += step
        last_step = abs(step)
        if last_step < 1e-14 * scale:
            break
        # keep the difference stencil below the remaining distance so the
        # derivative never straddles the zero
        delta = float(np.clip(0.1 * last_step, 1e-12 * scale, 1e-6 * scale))
    return z, last_step


def _split_cell(lz, rect, winding, floor, n_fn):
    """Split a rect into four winding-consistent children.

    Candidate cut offsets are ranked by the worst log|zeta| met along the
    two cut segments, so the subdivision lines run through corridors away
    from the zeros; remaining mismatches fall through to the next offset.
    """
    re0, re1, im0, im1 = rect
    ranked = []
    for jit in _JITTERS:
        mr = re0 + jit * (re1 - re0)
        mi = im0 + jit * (im1 - im0)
        probes = ([complex(mr, im0 + t * (im1 - im0)) for t in np.linspace(0.05, 0.95, 9)]
                  + [complex(re0 + t * (re1 - re0), mi) for t in np.linspace(0.05, 0.95, 9)])
        worst = min(lz(p)[0] for p in probes)
        ranked.append((-worst, jit, mr, mi))
    ranked.sort()
    for _, jit, mr, mi in ranked:
        quads = [(re0, mr, im0, mi), (mr, re1, im0, mi),
                 (re0, mr, mi, im1), (mr, re1, mi, im1)]
        try:
            ws = [_contour_winding(lz, _rect_contour(q), n_fn(q), floor)[0]
                  for q in quads]
        except _BoundaryZero:
            continue
        if sum(ws) != winding:
            continue
        return [(q, w) for q, w in zip(quads, ws) if w != 0]
    raise ConsistencyError(
        "subdivision winding mismatch persisted across cut offsets")


def _subdivide(lz, rect, winding, floor, min_cell, cell_cap, out_cells, n_fn):
    if winding == 0:
        return
    re0, re1, im0, im1 = rect
    size = max(re1 - re0, im1 - im0)
    if winding <= cell_cap or size < min_cell:
        out_cells.append((rect, winding))
        return
    try:
        children = _split_cell(lz, rect, winding, floor, n_fn)
    except ConsistencyError:
        # zeros hug every candidate cut; hand the cluster to the polisher
        out_cells.append((rect, winding))
        return
    for q, w in children:
        _subdivide(lz, q, w, floor, min_cell, cell_cap, out_cells, n_fn)


def _deflate(lz, found):
    """Log-zeta with the already-located zeros divided out."""
    if not found:
        return lz

    def lzd(z):
        la, ph = lz(z)
        for (zk, mk) in found:
            d = z - zk
            if d == 0:
                return (np.inf, 0.0)
            la = la - mk * np.log(abs(d))
            ph = _wrap(ph - mk * np.angle(d))
        return (la, ph)

    return lzd


def _polish_cell(lz, rect, winding, scale, floor, log_tol, min_cell, n_fn,
                 depth=0):
    """Pin down the zeros certified by the cell winding.

    Newton locates one zero (or one numerically coincident cluster); the
    winding of a small surrounding circle fixes its multiplicity; zeros
    still unaccounted for are found by Newton on the deflated logarithm.
    If that bookkeeping cannot close, the cell is split by winding and the
    children are polished recursively.
    """
    re0, re1, im0, im1 = rect
    size = max(re1 - re0, im1 - im0)
    pad = 0.06 * size
    def is_zero(z):
        """Dip certificate: |zeta| at z far below surrounding rings."""
        la0 = lz(z)[0]
        if la0 <= log_tol:
            return True
        for r in (min(1e-6 * scale, 0.5 * size), min(1e-4 * scale, size)):
            ring = min(lz(z + r)[0], lz(z - r)[0], lz(z + 1j * r)[0],
                       lz(z - 1j * r)[0])
            if la0 <= ring - 8.0:
                return True
        return False

    found = []
    remaining = winding
    for _ in range(2 * winding + 2):
        if remaining <= 0:
            break
        z_star, last_step = _newton_refine(_deflate(lz, found), rect, scale)
        if not (re0 - pad <= z_star.real <= re1 + pad
                and im0 - pad <= z_star.imag <= im1 + pad
                and is_zero(z_star)):
            break
        r = 0.3 * min([abs(z_star - zk) for (zk, _) in found]
                      + [size + 1e-9 * scale])
        r = max(r, 1e-9 * scale)
        try:
            m, _ = _contour_winding(lz, _circle_contour(z_star, r), 24, floor)
        except _BoundaryZero:
            break
        if m < 1 or m > remaining:
            break
        found.append((z_star, m))
        remaining -= m
    if remaining == 0:
        return [(z, m, size) for (z, m) in found]
    if depth > 30 or size < min_cell:
        raise ConsistencyError(
            f"could not resolve the {winding} zeros certified in cell {rect}")
    out = []
    for q, w in _split_cell(lz, rect, winding, floor, n_fn):
        out.extend(_polish_cell(lz, q, w, scale, floor, log_tol, min_cell,
                                n_fn, depth + 1))
    return out


def find_zeros(M_builder, domain, coarse_grid=64, zero_tol=None, *,
               cell_cap=2, min_cell_factor=1e-8, h=None, provenance="",
               max_retries=3, phase_scale=None):
    """Locate all zeros of det(I - M(z)) in a disk or rectangle domain.

    Recursive subdivision by boundary winding numbers isolates the zeros,
    Newton refinement (log-derivative central differences) polishes them,
    and the winding of a final small circle fixes each multiplicity.  The
    sum of multiplicities is checked against the outer boundary winding.
    A zero sitting on the domain boundary triggers a 1 percent inflation,
    retried up to max_retries times before raising.
    """
    attempt_domain = domain
    last_exc = None
    for _ in range(max_retries + 1):
        try:
            return _find_zeros_once(M_builder, attempt_domain, coarse_grid,
                                    zero_tol, cell_cap, min_cell_factor,
                                    h, provenance, phase_scale)
        except _BoundaryZero as exc:
            last_exc = exc
            attempt_domain = attempt_domain.inflate(1.01)
    raise BoundaryAmbiguityError(
        "a determinant zero stays on the search boundary after retries"
    ) from last_exc


def _find_zeros_once(M_builder, domain, coarse_grid, zero_tol, cell_cap,
                     min_cell_factor, h, provenance, phase_scale=None):
    lz = _log_zeta_fn(M_builder)
    scale = domain.scale

    def n_fn(rect):
        if phase_scale is None:
            return 16
        per = 2.0 * ((rect[1] - rect[0]) + (rect[3] - rect[2]))
        return int(min(max(16, np.ceil(per * phase_scale / (0.5 * np.pi))),
                       20000))

    n_outer = max(16, coarse_grid)
    if phase_scale is not None:
        n_outer = max(n_outer, n_fn(domain.bounding_rect()))
    outer_w, boundary_logs = _contour_winding(lz, domain.contour(), n_outer)
    median_log = float(np.median(boundary_logs))
    if zero_tol is None:
        log_tol = np.log(1e-9) + median_log
    else:
        log_tol = np.log(zero_tol)
    # boundary-zero sentinel: honest values vary smoothly along the
    # contour, a zero digs far below the low percentile under the
    # adaptive densification
    floor = float(np.percentile(boundary_logs, 2.0)) - 25.0
    if min(boundary_logs) < floor:
        raise _BoundaryZero

    if outer_w == 0:
        return ResonanceSet([], domain, 0, h=h, provenance=provenance)

    rect = domain.bounding_rect()
    if isinstance(domain, DiskDomain):
        # zeros between the disk and its bounding square are legitimate
        # find-and-filter targets, so the box winding may exceed outer_w
        box_w, _ = _contour_winding(lz, _rect_contour(rect),
                                    max(32, n_fn(rect)), floor)
    else:
        box_w = outer_w

    cells = []
    _subdivide(lz, rect, box_w, floor, min_cell_factor * scale, cell_cap,
               cells, n_fn)

    raw = []
    for (cell_rect, w) in cells:
        raw.extend(_polish_cell(lz, cell_rect, w, scale, floor, log_tol,
                                min_cell_factor * scale, n_fn))

    # dedupe across adjacent cells
    merged = []
    for (z_star, w, cell_size) in raw:
        for k, (zk, wk, sk) in enumerate(merged):
            if abs(z_star - zk) < 1e-7 * scale:
                merged[k] = (zk, wk + w, max(sk, cell_size))
                break
        else:
            merged.append((z_star, w, cell_size))

    zeros = []
    for k, (z_star, w, cell_size) in enumerate(merged):
        others = [zz for m, (zz, _, _) in enumerate(merged) if m != k]
        r = 0.45 * min([abs(z_star - zz) for zz in others] + [cell_size + 1e-6 * scale])
        r = max(r, 1e-10 * scale)
        n_circ = 24
        if phase_scale is not None:
            n_circ = int(min(max(24, np.ceil(2 * np.pi * r * phase_scale
                                             / (0.5 * np.pi))), 20000))
        try:
            mult, _ = _contour_winding(lz, _circle_contour(z_star, r), n_circ,
                                       floor)
        except _BoundaryZero:
            mult = w
        la, _ = lz(z_star)
        if la > log_tol:
            # the absolute tolerance loses meaning when |zeta'| swings by
            # orders of magnitude across the domain; fall back to a local
            # dip certificate against a surrounding ring
            rr = 1e-6 * scale
            ring = min(lz(z_star + rr)[0], lz(z_star - rr)[0],
                       lz(z_star + 1j * rr)[0], lz(z_star - 1j * rr)[0])
            if la > ring - 8.0:
                raise ConsistencyError(
                    f"refined zero at {z_star:.6g} has |zeta| above the tolerance")
        zeros.append(Zero(z=z_star, multiplicity=int(mult),
                          residual=float(np.exp(min(la, 700.0)))))

    inside = [z for z in zeros if domain.contains(z.z, slack=1e-9)]
    total = sum(z.multiplicity for z in inside)
    if total != outer_w:
        raise ConsistencyError(
            f"sum of multiplicities {total} differs from boundary winding {outer_w}")
    inside.sort(key=lambda z: (z.z.real, z.z.imag))
    return ResonanceSet(inside, domain, outer_w, h=h, provenance=provenance)


# ----------------------------------------------------------------------
# Counting exponents and gap reports
# ----------------------------------------------------------------------

def resonance_density(items, threshold):
    """Counting-exponent fit: log(count above threshold) against log size.

    items is a sequence of (size, values) pairs, where values are complex
    numbers subject to the modulus criterion |value| > threshold (matrix
    eigenvalues for open-map studies); a ResonanceSet with h set may be
    passed instead of a pair, contributing size 1/h and the eigenvalue
    surrogates e^{iz/h} counted with multiplicity.  Returns
    (exponent, rms residual).
    """
    items = list(items)
    if len(items) < 4:
        raise ParameterError("need at least 4 sizes for a counting fit")
    normalized = []
    for item in items:
        if isinstance(item, ResonanceSet):
            if not item.h:
                raise ParameterError("ResonanceSet without h cannot be sized")
            values = np.concatenate([
                np.full(z.multiplicity, np.exp(1j * z.z / item.h))
                for z in item.zeros]) if item.zeros else np.zeros(0)
            normalized.append((1.0 / item.h, values))
        else:
            normalized.append(item)
    sizes, counts = [], []
    for n, values in normalized:
        c = int(np.sum(np.abs(np.asarray(values)) > threshold))
        if c == 0:
            raise ParameterError(f"no values above threshold at size {n}")
        sizes.append(float(n))
        counts.append(float(c))
    logs_n = np.log(np.asarray(sizes))
    logs_c = np.log(np.asarray(counts))
    coeffs = np.polyfit(logs_n, logs_c, 1)
    fit = np.polyval(coeffs, logs_n)
    return float(coeffs[0]), float(np.sqrt(np.mean((fit - logs_c) ** 2)))


def resonance_set_from_eigenvalues(eigenvalues, h, provenance="eigenvalues"):
    """Interpret matrix eigenvalues as determinant zeros via z = -i h log L.

    The map sends an eigenvalue of modulus < 1 into the lower half plane
    with decay rate |Im z| / h = -log |L|, so spectral-gap bookkeeping of
    open-map spectra and of zeta zeros share one code path.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    keep = np.abs(eigenvalues) > 1e-12
    zs = -1j * h * np.log(eigenvalues[keep])
    zeros = [Zero(z=complex(z), multiplicity=1, residual=0.0) for z in zs]
    radius = float(max(np.abs(zs))) * 1.05 if len(zs) else 1.0
    rs = ResonanceSet(zeros, DiskDomain(0.0 + 0.0j, radius),
                      outer_winding=len(zeros), h=h, provenance=provenance)
    return rs


@dataclass(frozen=True)
class SpectralGapReport:
    """Observed resonance-free strip width against its pressure bound."""

    gap: float
    pressure: float
    bound: float
    excess: float
    n_zeros: int
    h: float

    def lines(self):
        return [
            f"resonance gap min |Im z|/h = {self.gap:.6f}",
            f"classical pressure = {self.pressure:.6f} "
            f"(strip bound -P = {self.bound:.6f})",
            f"gap minus bound = {self.excess:.6f}",
        ]


def spectral_gap_report(resonance_set, pressure):
    """Compare the spectral gap of a ResonanceSet with a pressure bound.

    Descriptive only: the bound -P is known not to be sharp in general,
    so the report carries both numbers and their difference.
    """
    if not resonance_set.zeros:
        raise ParameterError("resonance set is empty")
    h = resonance_set.h if resonance_set.h else 1.0
    gap = min(abs(z.z.imag) / h for z in resonance_set.zeros)
    bound = -float(pressure)
    return SpectralGapReport(gap=float(gap), pressure=float(pressure),
                             bound=bound, excess=float(gap - bound),
                             n_zeros=len(resonance_set.zeros), h=h)
