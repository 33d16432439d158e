import numpy as np
import pytest

from scatres.reference import three_bump_system, three_disk_system


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)


@pytest.fixture(scope="session")
def three_disk():
    return three_disk_system()


@pytest.fixture(scope="session")
def three_bump():
    return three_bump_system()


@pytest.fixture(scope="session")
def disk_trapped(three_disk):
    from scatres.dynamics import sample_trapped_set
    return sample_trapped_set(three_disk, E=0.5, budget=60, t_max=25.0,
                              escape_radius=8.0)


@pytest.fixture(scope="session")
def disk_sections(three_disk, disk_trapped):
    from scatres.section import build_sections
    return build_sections(three_disk, 0.5, disk_trapped, max_diameter=3.2,
                          delta_bdry=0.05, tau_max=12.0, escape_radius=8.0,
                          pad_factor=0.35, ellipse_margin=1.1)


@pytest.fixture(scope="session")
def disk_return_map(three_disk, disk_sections):
    from scatres.section import fit_all_blocks, partition_blocks
    rmd = partition_blocks(disk_sections, three_disk, sample_budget=35000,
                           tau_max=12.0, escape_radius=8.0)
    fit_all_blocks(rmd, degree=14)
    return rmd


@pytest.fixture(scope="session")
def quantum_return_map(three_disk, disk_trapped):
    """Wide-chart build sized for kernel quantization at h = 1/64."""
    from scatres.section import build_sections, fit_all_blocks, partition_blocks
    charts = build_sections(three_disk, 0.5, disk_trapped, max_diameter=3.2,
                            delta_bdry=0.05, tau_max=12.0, escape_radius=8.0,
                            pad_factor=1.0, y_halfwidth=0.74,
                            ellipse_axes=(0.42, 0.80), require_core_cover=False)
    rmd = partition_blocks(charts, three_disk, sample_budget=45000,
                           tau_max=12.0, escape_radius=8.0, extend_billiard=True)
    fit_all_blocks(rmd, degree=16)
    return rmd


@pytest.fixture(scope="session")
def q_operator(quantum_return_map):
    from scatres.quantum import QuantumReturnOperator
    return QuantumReturnOperator(quantum_return_map, h=1.0 / 64.0)
