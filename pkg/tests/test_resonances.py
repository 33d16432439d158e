import numpy as np
import pytest

from scatres.errors import ParameterError
from scatres.resonances import (
    DiskDomain,
    RectDomain,
    find_zeros,
    resonance_density,
    resonance_set_from_eigenvalues,
    spectral_gap_report,
    zeta,
)


def rank_one_builder(z0, dim=6):
    P = np.zeros((dim, dim), dtype=complex)
    P[0, 0] = 1.0
    return lambda z: (z / z0) * P


# ----------------------------------------------------------------------
# zeta
# ----------------------------------------------------------------------

def test_zeta_zero_operator():
    v = zeta(lambda z: np.zeros((7, 7)), 0.3 + 0.1j)
    assert v.value == pytest.approx(1.0, abs=1e-15)
    assert v.log_abs == pytest.approx(0.0, abs=1e-14)


def test_zeta_unit_eigenvalue():
    v = zeta(lambda z: np.diag([1.0, 0.3]), 0.0)
    assert abs(v.value) < 1e-14


def test_zeta_matches_eigenvalue_product(rng):
    A = (rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50)))
    A *= 0.4 / np.sqrt(50)
    v = zeta(lambda z: A, 0.0)
    lam = np.linalg.eigvals(A)
    expected = np.prod(1.0 - lam)
    assert abs(v.value - expected) / abs(expected) < 1e-8


def test_zeta_phase_duality(rng):
    # phase of det(I - M(z)) against the eigenvalue product, 20 random z
    A = (rng.standard_normal((30, 30)) + 1j * rng.standard_normal((30, 30)))
    A *= 0.3 / np.sqrt(30)

    def builder(z):
        return A * np.exp(0.3j * z)

    for _ in range(20):
        z = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        v = zeta(builder, z)
        lam = np.linalg.eigvals(builder(z))
        expected = np.prod(1.0 - lam)
        assert abs(v.value - expected) / abs(expected) < 1e-6


def test_zeta_rejects_nonfinite():
    with pytest.raises(ParameterError):
        zeta(lambda z: np.array([[np.nan]]), 0.0)


# ----------------------------------------------------------------------
# find_zeros
# ----------------------------------------------------------------------

def test_single_zero_rank_one():
    z0 = 0.4 - 0.2j
    rs = find_zeros(rank_one_builder(z0), DiskDomain(0.0 + 0.0j, 1.0))
    assert len(rs.zeros) == 1
    assert rs.zeros[0].multiplicity == 1
    assert abs(rs.zeros[0].z - z0) < 1e-10
    assert rs.outer_winding == 1


def test_double_zero_jordan_block():
    z0 = -0.3 + 0.25j

    def builder(z):
        return np.array([[z / z0, 1.0], [0.0, z / z0]], dtype=complex)

    rs = find_zeros(builder, DiskDomain(0.0 + 0.0j, 1.0))
    assert len(rs.zeros) == 1
    assert rs.zeros[0].multiplicity == 2
    assert abs(rs.zeros[0].z - z0) < 1e-9
    assert rs.outer_winding == 2


def test_several_zeros_rectangle():
    roots = [0.5 + 0.1j, -0.4 - 0.3j, 0.1 - 0.45j]

    def builder(z):
        # companion-style: det(I - M) = prod (1 - z/r) by diagonal design
        return np.diag([z / r for r in roots]).astype(complex)

    rs = find_zeros(builder, RectDomain(-1.0, 1.0, -1.0, 1.0))
    assert rs.total_multiplicity == 3
    found = sorted(rs.as_array(), key=lambda w: (w.real, w.imag))
    for f, e in zip(found, sorted(roots, key=lambda w: (w.real, w.imag))):
        assert abs(f - e) < 1e-10


def test_disk_filters_bounding_box_zeros():
    # one zero inside the disk, one in the box corner outside the disk
    roots = [0.2 + 0.1j, 0.95 + 0.95j]

    def builder(z):
        return np.diag([z / r for r in roots]).astype(complex)

    rs = find_zeros(builder, DiskDomain(0.0 + 0.0j, 1.0))
    assert rs.total_multiplicity == 1
    assert abs(rs.zeros[0].z - roots[0]) < 1e-10


def test_boundary_zero_inflates_domain():
    z0 = 1.0 + 0.0j  # exactly on the unit circle
    rs = find_zeros(rank_one_builder(z0), DiskDomain(0.0 + 0.0j, 1.0))
    assert rs.domain.radius > 1.0
    assert len(rs.zeros) == 1
    assert abs(rs.zeros[0].z - z0) < 1e-9


def test_empty_domain():
    rs = find_zeros(rank_one_builder(5.0 + 0.0j), DiskDomain(0.0 + 0.0j, 1.0))
    assert rs.zeros == []
    assert rs.outer_winding == 0


# ----------------------------------------------------------------------
# density fits and gap report
# ----------------------------------------------------------------------

def test_density_unitary_slope_one(rng):
    items = []
    for n in (40, 80, 160, 320):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        q, _ = np.linalg.qr(a)
        items.append((n, np.linalg.eigvals(q)))
    d, res = resonance_density(items, 0.5)
    assert abs(d - 1.0) < 0.05
    assert res < 0.01


def test_density_needs_four_sizes():
    with pytest.raises(ParameterError):
        resonance_density([(10, np.ones(10)), (20, np.ones(20))], 0.5)


def test_density_refuses_empty_counts():
    items = [(n, np.zeros(n)) for n in (10, 20, 40, 80)]
    with pytest.raises(ParameterError):
        resonance_density(items, 0.5)


def test_gap_report_zero_on_real_axis():
    rs = resonance_set_from_eigenvalues(np.array([1.0, 0.5]), h=0.1)
    rep = spectral_gap_report(rs, pressure=-0.2)
    assert rep.gap == pytest.approx(0.0, abs=1e-12)


def test_gap_report_h_normalization():
    # halving h halves |Im z| for fixed eigenvalues, keeping the rate fixed
    eigs = np.array([0.6 * np.exp(0.3j), 0.25])
    r1 = spectral_gap_report(resonance_set_from_eigenvalues(eigs, h=0.2), -0.1)
    r2 = spectral_gap_report(resonance_set_from_eigenvalues(eigs, h=0.1), -0.1)
    assert r1.gap == pytest.approx(r2.gap, rel=1e-12)
    assert r1.gap == pytest.approx(-np.log(0.6), rel=1e-12)


def test_gap_report_open_baker_vs_pressure():
    # two-branch orbit-sum oracle: both branches contract by 3, so the
    # half-expansion pressure is exactly log(2 / sqrt(3)) > 0
    from scatres.classical import open_ternary_map, orbit_pressure, topological_pressure

    def half_expansion(branch, x):
        return 0.5 * np.log(np.abs(branch.dpsi(x)))

    target = np.log(2.0) - 0.5 * np.log(3.0)
    spectral = topological_pressure(open_ternary_map(), half_expansion)
    orbital = orbit_pressure(open_ternary_map(), half_expansion, 10)
    assert spectral.value == pytest.approx(target, abs=1e-10)
    assert orbital == pytest.approx(target, abs=1e-10)

    from scatres.quantum import open_baker
    eigs = np.linalg.eigvals(open_baker(243, open_middle=True))
    rs = resonance_set_from_eigenvalues(eigs, h=0.01)
    rep = spectral_gap_report(rs, pressure=spectral.value)
    assert rep.gap > 0.0            # open map: strictly decaying spectrum
    assert rep.pressure > 0.0       # the strip bound -P is vacuous here
    assert rep.bound == pytest.approx(-target, abs=1e-10)
    assert rep.excess == pytest.approx(rep.gap - rep.bound, rel=1e-12)
    assert len(rep.lines()) == 3


def test_density_accepts_resonance_sets():
    from scatres.resonances import ResonanceSet, Zero
    items = []
    for n in (20, 40, 80, 160):
        h = 1.0 / n
        zeros = [Zero(z=complex(0.0, h * np.log(0.8)), multiplicity=1,
                      residual=0.0)] * n
        items.append(ResonanceSet(zeros, DiskDomain(0j, 1.0),
                                  outer_winding=n, h=h))
    d, _ = resonance_density(items, 0.5)
    assert d == pytest.approx(1.0, abs=1e-9)
