import numpy as np
import pytest

from scatres.errors import (
    AliasingError,
    ParameterError,
    ResolutionError,
    TwistError,
)
from scatres.quantum import (
    assemble_M,
    build_projector,
    coherent_state,
    gauss_legendre_grid,
    husimi_peak,
    open_baker,
    projector_rank,
    quantize_block,
)
from scatres.section import Chebyshev2D, Ellipse


from quantum_oracles import (
    ALPHA,
    BETA,
    GAMMA,
    H_TEST,
    L_TEST,
    T_MAP,
    FakeChart,
    constant_fit,
    metaplectic_oracle,
    quadratic_fit,
)


@pytest.fixture(scope="module")
def quad_setup():
    chart = FakeChart(0, (-L_TEST, L_TEST, -4.0, 4.0), Ellipse(0, 0, 1.2, 1.2))
    grid = gauss_legendre_grid(-L_TEST, L_TEST, 280)
    S = quadratic_fit(ALPHA, BETA, GAMMA, L_TEST)
    tau = constant_fit(1.0, L_TEST)
    proj = build_projector(chart, H_TEST, grid=grid)
    return chart, grid, S, tau, proj


# ----------------------------------------------------------------------
# projectors
# ----------------------------------------------------------------------

def test_rank_formula_half_integer_tie():
    # a = b with ab/(2h) = 10.5 sits exactly on a level: counted inclusively
    assert projector_rank(1.0, 1.0, 1.0 / 21.0) == 11


def test_rank_formula_examples():
    assert projector_rank(1.0, 1.0, 0.05) == 10
    assert projector_rank(0.42, 0.80, 1.0 / 64.0) == 11


def test_rank_weyl_scaling():
    # one transversal freedom: halving h doubles the rank within one unit
    for ab_over_2h in (20.0, 27.5, 40.0, 63.0):
        h = 1.0 / (2.0 * ab_over_2h)
        r1 = projector_rank(1.0, 1.0, h)
        r2 = projector_rank(1.0, 1.0, h / 2.0)
        assert abs(r2 / r1 - 2.0) <= 1.0 / r1 + 1e-12
        assert abs(r2 - 2 * r1) <= 1


def test_projector_algebra(quad_setup):
    _, _, _, _, proj = quad_setup
    assert proj.idempotence_defect() <= 1e-12
    assert proj.self_adjoint_defect() <= 1e-12


def test_projector_fixes_its_range(quad_setup):
    _, _, _, _, proj = quad_setup
    for k in (0, proj.rank // 2, proj.rank - 1):
        v = proj.basis[:, k]
        assert np.max(np.abs(proj.apply(v) - v)) <= 1e-12


def test_projector_rank_must_be_positive():
    chart = FakeChart(0, (-2.0, 2.0, -2.0, 2.0), Ellipse(0, 0, 0.5, 0.5))
    with pytest.raises(ResolutionError):
        build_projector(chart, h=1.0)


def test_pipeline_projectors(q_operator):
    for proj in q_operator.projectors:
        assert proj.rank == 11
        assert proj.idempotence_defect() <= 1e-12
        assert proj.self_adjoint_defect() <= 1e-12


# ----------------------------------------------------------------------
# kernel quantization
# ----------------------------------------------------------------------

def test_constant_tau_phase_factorization(quad_setup, rng):
    _, grid, S, tau, _ = quad_setup
    tau0 = 1.0
    base = quantize_block(S, constant_fit(0.0, L_TEST), 0.0, H_TEST, grid, grid)
    for _ in range(20):
        z = complex(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3))
        kb = quantize_block(S, tau, z, H_TEST, grid, grid)
        factor = np.exp(1j * z * tau0 / H_TEST)
        diff = np.max(np.abs(kb.matrix - factor * base.matrix))
        assert diff <= 1e-13 * np.max(np.abs(kb.matrix))


def test_metaplectic_matrix_elements(quad_setup):
    _, grid, S, tau, proj = quad_setup
    kb = quantize_block(S, tau, 0.0, H_TEST, grid, grid)
    states = [(0.0, 0.0), (0.15, 0.1), (-0.1, 0.15), (0.2, -0.05),
              (-0.18, -0.12), (0.05, 0.22)]
    P = proj.analysis_matrix()
    for (qv, pv) in states:
        gv = coherent_state(grid, qv, pv, H_TEST)
        cv = P @ gv
        img = proj.basis @ (P @ (kb.matrix @ (proj.basis @ cv)))
        # compare <g_w, Pi K Pi g_v> with the exact operator element
        for (qw, pw) in states:
            gw = coherent_state(grid, qw, pw, H_TEST)
            got = np.sum(np.conj(gw) * grid.weights * img)
            want = metaplectic_oracle(qw, pw, qv, pv)
            assert abs(got - want) <= 1e-6


def test_metaplectic_singular_values(quad_setup):
    _, grid, S, tau, proj = quad_setup
    kb = quantize_block(S, tau, 0.0, H_TEST, grid, grid)
    block = proj.analysis_matrix() @ kb.matrix @ proj.basis
    sv = np.linalg.svd(block, compute_uv=False)
    # the map stretches by 2 + sqrt(3), so only states whose image stays
    # inside the confinement ball keep unit singular values
    interior = sv[: max(2, proj.rank // 4)]
    assert np.max(np.abs(interior - 1.0)) <= 4.0 * H_TEST


def test_egorov_coherent_transport(quad_setup):
    _, grid, S, tau, _ = quad_setup
    kb = quantize_block(S, tau, 0.0, H_TEST, grid, grid)
    for (qv, pv) in [(0.1, 0.05), (-0.08, 0.12), (0.0, -0.15)]:
        image = kb.matrix @ coherent_state(grid, qv, pv, H_TEST)
        q_cl, p_cl = T_MAP @ np.array([qv, pv])
        q_pk, p_pk = husimi_peak(image, grid, H_TEST,
                                 (q_cl - 0.5, q_cl + 0.5),
                                 (p_cl - 0.5, p_cl + 0.5), n_scan=41)
        dist = np.hypot(q_pk - q_cl, p_pk - p_cl)
        assert dist <= 2.5 * np.sqrt(H_TEST)


def test_nyquist_guard_names_required_nodes(quad_setup):
    _, _, S, tau, _ = quad_setup
    tiny = gauss_legendre_grid(-L_TEST, L_TEST, 12)
    with pytest.raises(AliasingError) as err:
        quantize_block(S, tau, 0.0, H_TEST, tiny, tiny)
    assert err.value.required_nodes > 12


def test_twist_floor_guard():
    flat = Chebyshev2D(np.zeros((2, 2)), (-1, 1, -1, 1))
    grid = gauss_legendre_grid(-1, 1, 32)
    with pytest.raises(TwistError):
        quantize_block(flat, constant_fit(1.0, 1.0), 0.0, 0.1, grid, grid,
                       check_nyquist=False)


# ----------------------------------------------------------------------
# assembly and the section-built operator
# ----------------------------------------------------------------------

def test_three_disk_block_sparsity(q_operator):
    M = q_operator.operator(0.0)
    assert sorted(M.blocks) == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
    dense = M.dense()
    off = M.offsets()
    for i in range(3):
        diag = dense[off[i]:off[i + 1], off[i]:off[i + 1]]
        assert np.max(np.abs(diag)) == 0.0
    assert M.dimension == sum(q_operator.ranks)


def test_single_chart_assembly(quad_setup):
    _, grid, S, tau, proj = quad_setup
    kb = quantize_block(S, tau, 0.0, H_TEST, grid, grid)
    M = assemble_M({(0, 0): kb}, [proj])
    assert M.dimension == proj.rank
    assert M.dense().shape == (proj.rank, proj.rank)


def test_series_matches_exact_kernels(q_operator, rng):
    for _ in range(5):
        z = complex(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05))
        fast = q_operator.dense(z)
        slow = q_operator.operator(z, exact=True).dense()
        assert np.max(np.abs(fast - slow)) <= 1e-12 * max(1.0, float(np.max(np.abs(slow))))


def test_operator_entries_are_holomorphic(quad_setup, rng):
    # Cauchy-Riemann residual of compressed entries at step 1e-5 h
    _, grid, S, tau, proj = quad_setup
    P = proj.analysis_matrix()

    def entry(z):
        kb = quantize_block(S, tau, z, H_TEST, grid, grid,
                            check_nyquist=False)
        block = P @ kb.matrix @ proj.basis
        return block[1, 2]

    delta = 1e-5 * H_TEST
    for _ in range(5):
        z = complex(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1))
        dx = (entry(z + delta) - entry(z - delta)) / (2 * delta)
        dy = (entry(z + 1j * delta) - entry(z - 1j * delta)) / (2 * delta)
        # dy = i dx for an entire entry, so the combination cancels
        assert abs(dx + 1j * dy) <= 1e-8


def test_norm_growth_trend(q_operator):
    M0 = q_operator.operator(0.0)
    norm = M0.norm()
    c_trend = (norm - 1.0) / q_operator.h
    print(f"\n||M(0, h)|| = {norm:.6f}, (norm - 1)/h = {c_trend:.3f}")
    assert np.isfinite(norm)
    assert norm < 2.0


# ----------------------------------------------------------------------
# open baker map
# ----------------------------------------------------------------------

def test_closed_baker_unitary():
    B = open_baker(243, open_middle=False)
    assert np.max(np.abs(B @ B.conj().T - np.eye(243))) <= 1e-12


def test_open_baker_contracts():
    B = open_baker(243, open_middle=True)
    lam = np.linalg.eigvals(B)
    assert np.max(np.abs(lam)) < 1.0 + 1e-12
    assert np.max(np.abs(lam)) < 1.0


def test_open_baker_minimal_rank():
    B = open_baker(3, open_middle=True)
    assert np.linalg.matrix_rank(B) == 2


def test_baker_dimension_guard():
    with pytest.raises(ParameterError):
        open_baker(64)
