import math

import numpy as np
import pytest

from scatres.dynamics import (
    Disk,
    DiskBilliard,
    GaussianBump,
    PhasePoint,
    SmoothPotential,
    box_counting_dimension,
    escape_time,
    evaluate_hamiltonian,
    integrate_flow,
    rotate_phase_point,
    sample_trapped_set,
)
from scatres.errors import DomainError, ParameterError
from scatres.reference import three_bump_centers

V_ZERO = SmoothPotential([], support_radius=1.0)


def two_cycle_point(system, i=0, j=1, offset=0.5):
    """Point on the bouncing orbit between disks i and j (offset in [0,1])."""
    di, dj = system.disks[i], system.disks[j]
    u = dj.center - di.center
    u = u / np.linalg.norm(u)
    a = di.center + di.radius * u
    b = dj.center - dj.radius * u
    speed = np.sqrt(2.0 * 0.5)
    return PhasePoint(a + offset * (b - a), speed * u)


# ----------------------------------------------------------------------
# evaluate_hamiltonian
# ----------------------------------------------------------------------

def test_hamiltonian_kinetic_only():
    p = PhasePoint([3.7, -1.2], [1.0, 0.0])
    assert evaluate_hamiltonian(V_ZERO, p) == pytest.approx(0.5, abs=1e-15)


def test_hamiltonian_bump_peak():
    bump = GaussianBump([0.2, -0.4], amplitude=2.5, width=0.31)
    system = SmoothPotential([bump], support_radius=6.0)
    p = PhasePoint([0.2, -0.4], [0.0, 0.0])
    assert evaluate_hamiltonian(system, p) == pytest.approx(2.5, abs=1e-14)


def test_hamiltonian_three_bump_reference(three_bump):
    # independent direct-summation oracle, plain math only
    x = (0.3, 0.1)
    xi = (0.2, -0.4)
    v = sum(1.0 * math.exp(-((x[0] - c[0]) ** 2 + (x[1] - c[1]) ** 2) / (2 * 0.3**2))
            for c in three_bump_centers())
    expected = 0.5 * (xi[0] ** 2 + xi[1] ** 2) + v
    assert expected == pytest.approx(0.12963352942681117, abs=1e-15)
    got = evaluate_hamiltonian(three_bump, PhasePoint(x, xi))
    assert got == pytest.approx(expected, abs=1e-14)


def test_hamiltonian_inside_disk_rejected(three_disk):
    inside = PhasePoint(three_disk.disks[0].center, [1.0, 0.0])
    with pytest.raises(DomainError):
        evaluate_hamiltonian(three_disk, inside)


def test_billiard_geometry_validation():
    with pytest.raises(ParameterError):
        DiskBilliard([Disk([0, 0], 1.0), Disk([1.5, 0], 1.0)])
    # collinear disks eclipse each other
    with pytest.raises(ParameterError):
        DiskBilliard([Disk([-4, 0], 1.0), Disk([0, 0], 1.0), Disk([4, 0], 1.0)])


def test_smooth_tail_validation():
    with pytest.raises(ParameterError):
        SmoothPotential([GaussianBump([0, 0], 1.0, 1.0)], support_radius=2.0)


# ----------------------------------------------------------------------
# integrate_flow
# ----------------------------------------------------------------------

def test_free_motion():
    traj = integrate_flow(V_ZERO, PhasePoint([0, 0], [1, 0]), 2.0, tol=1e-10)
    end = traj.endpoint()
    assert np.allclose(end.x, [2.0, 0.0], atol=1e-12)
    assert np.allclose(end.xi, [1.0, 0.0], atol=1e-13)


def test_reversibility(three_bump, rng):
    tol = 1e-9
    misses = []
    for _ in range(100):
        x = rng.uniform(-1.0, 1.0, 2)
        xi = rng.uniform(-1.0, 1.0, 2)
        start = PhasePoint(x, xi)
        fwd = integrate_flow(three_bump, start, 1.5, tol=tol)
        back = integrate_flow(three_bump, fwd.endpoint(), -1.5, tol=tol)
        misses.append(np.linalg.norm(back.endpoint().as_array() - start.as_array()))
    assert max(misses) < 10 * tol


def test_three_disk_two_bounce_period(three_disk):
    # plane-geometry oracle: period clears the gap twice at unit speed
    d, a, speed = 6.0, 1.0, 1.0
    period = 2.0 * (d - 2.0 * a) / speed
    assert period == 8.0
    start = two_cycle_point(three_disk)
    traj = integrate_flow(three_disk, start, period)
    assert len(traj.bounce_indices) == 2
    assert np.allclose(traj.endpoint().as_array(), start.as_array(), atol=1e-9)


def test_billiard_reflection_law(three_disk, rng):
    for _ in range(20):
        start = PhasePoint([rng.uniform(-1, 1), rng.uniform(-1, 1)],
                           rng.uniform(-1, 1, 2))
        traj = integrate_flow(three_disk, start, 25.0)
        speeds = np.linalg.norm(traj.states[:, 2:], axis=1)
        assert np.allclose(speeds, speeds[0], rtol=0, atol=1e-12)
        for k in traj.bounce_indices:
            x = traj.states[k][:2]
            u_in = traj.states[k - 1][2:]
            u_out = traj.states[k][2:]
            disk = min(three_disk.disks, key=lambda dd: abs(np.linalg.norm(x - dd.center) - dd.radius))
            n = (x - disk.center) / disk.radius
            # angle of incidence equals angle of reflection
            assert abs(u_in @ n + u_out @ n) < 1e-12
            t = np.array([-n[1], n[0]])
            assert abs(u_in @ t - u_out @ t) < 1e-12


def test_energy_drift_bound(three_bump):
    tol = 1e-9
    start = PhasePoint([0.0, 0.2], [0.9, 0.1])
    traj = integrate_flow(three_bump, start, 12.0, tol=tol)
    energies = np.array([evaluate_hamiltonian(three_bump, PhasePoint.from_array(s))
                         for s in traj.states])
    assert np.max(np.abs(energies - traj.energy)) <= tol * 12.0


def test_grazing_hit_raises_tangency_error():
    from scatres.errors import TangencyError
    lone = DiskBilliard([Disk([0.0, 0.0], 1.0)])
    graze = PhasePoint([-5.0, 1.0 - 1e-15], [1.0, 0.0])
    with pytest.raises(TangencyError) as err:
        integrate_flow(lone, graze, 10.0)
    assert err.value.time > 0


def test_symplectic_method_agrees(three_bump):
    start = PhasePoint([0.0, 0.2], [0.9, 0.1])
    a = integrate_flow(three_bump, start, 4.0, tol=1e-10).endpoint()
    b = integrate_flow(three_bump, start, 4.0, tol=1e-10, method="symplectic").endpoint()
    assert np.linalg.norm(a.as_array() - b.as_array()) < 1e-5


# ----------------------------------------------------------------------
# escape_time
# ----------------------------------------------------------------------

def test_escape_already_outside():
    fwd, bwd = escape_time(V_ZERO, PhasePoint([10, 0], [1, 0]), 5.0, 20.0)
    assert fwd == 0.0 and bwd == 0.0


def test_escape_incoming_free_particle():
    fwd, bwd = escape_time(V_ZERO, PhasePoint([10, 0], [-1, 0]), 5.0, 40.0)
    assert fwd is not None
    assert bwd == 0.0


def test_two_cycle_never_escapes(three_disk):
    # roundoff seeded on the axis grows by ~9x per bounce, so double
    # precision keeps the exact 2-cycle trapped only up to t ~ 70
    fwd, bwd = escape_time(three_disk, two_cycle_point(three_disk), 8.0, 60.0)
    assert fwd is None and bwd is None


def test_escape_radius_must_clear_support(three_disk):
    with pytest.raises(ParameterError):
        escape_time(three_disk, two_cycle_point(three_disk), 2.0, 10.0)


# ----------------------------------------------------------------------
# sample_trapped_set
# ----------------------------------------------------------------------

def test_trapped_set_empty_for_free_motion():
    assert sample_trapped_set(V_ZERO, E=0.5, budget=5, t_max=5.0,
                              escape_radius=4.0) == []


def test_trapped_samples_near_two_cycles(three_disk, disk_trapped):
    assert len(disk_trapped) > 0
    speed = np.sqrt(2.0 * 0.5)
    for (i, j) in [(0, 1), (1, 2), (0, 2)]:
        di, dj = three_disk.disks[i], three_disk.disks[j]
        u = dj.center - di.center
        u = u / np.linalg.norm(u)
        a = di.center + di.radius * u
        b = dj.center - dj.radius * u

        def dist_to_cycle(p):
            seg = b - a
            t = np.clip((p.x - a) @ seg / (seg @ seg), 0.0, 1.0)
            dx = np.linalg.norm(p.x - (a + t * seg))
            dxi = min(np.linalg.norm(p.xi - speed * u), np.linalg.norm(p.xi + speed * u))
            return np.hypot(dx, dxi)

        assert min(dist_to_cycle(p) for p in disk_trapped) < 1e-8


def test_trapped_samples_revalidate(three_disk, disk_trapped):
    for p in disk_trapped[:10]:
        fwd, bwd = escape_time(three_disk, p, 8.0, 25.0)
        assert fwd is None and bwd is None


def test_trapped_set_rotation_symmetry(three_bump):
    samples = sample_trapped_set(three_bump, E=0.5, budget=6, t_max=6.0,
                                 escape_radius=7.0, tol=1e-8, grid=13,
                                 refine_tol=1e-9)
    assert len(samples) >= 3
    arrays = np.array([p.as_array() for p in samples])
    for angle in (2 * np.pi / 3, -2 * np.pi / 3):
        rotated = np.array([rotate_phase_point(p, angle).as_array() for p in samples])
        for r in rotated:
            assert np.min(np.linalg.norm(arrays - r, axis=1)) < 1e-4


# ----------------------------------------------------------------------
# box_counting_dimension
# ----------------------------------------------------------------------

def test_dimension_single_point():
    pts = np.zeros((200, 2)) + 0.371
    d, _ = box_counting_dimension(pts, [0.001, 0.003, 0.01, 0.03])
    assert abs(d) <= 0.01


def test_dimension_uniform_segment(rng):
    pts = rng.uniform(0.0, 1.0, size=(10_000, 1))
    scales = [0.004, 0.01, 0.02, 0.04, 0.08]
    d, _ = box_counting_dimension(pts, scales)
    assert abs(d - 1.0) <= 0.1


def test_dimension_cantor_endpoints():
    # left endpoints of the 2^12 level-12 middle-thirds intervals, scaled
    # by 3^12 so that boxes at scale 3^(12-k) count exactly 2^k cells
    level = 12
    pts = np.zeros(1, dtype=np.int64)
    for k in range(level):
        pts = np.concatenate([3 * pts, 3 * pts + 2])
    pts = pts.astype(float)[:, None] * 3.0 ** (-0)  # integers, exact in float
    scales = [3.0 ** (level - k) for k in range(2, 8)]
    # covering-count oracle: exactly 2^k boxes of side 3^(level-k) are hit
    for k in range(2, 8):
        eps = 3.0 ** (level - k)
        assert np.unique(np.floor(pts / eps)).size == 2**k
    d, res = box_counting_dimension(pts, scales)
    assert abs(d - math.log(2) / math.log(3)) <= 0.05
    assert res < 1e-10


def test_dimension_parameter_errors():
    pts = np.zeros((200, 2))
    with pytest.raises(ParameterError):
        box_counting_dimension(pts, [0.01, 0.02])  # less than a decade
    with pytest.raises(ParameterError):
        box_counting_dimension(pts[:50], [0.01, 0.2])
