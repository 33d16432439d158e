"""scatres: chaotic scattering reduced to Poincare maps and determinants.

The toolkit takes a planar scattering system (smooth bump potential or a
hard-disk billiard), samples its trapped set at a chosen energy, reduces
the flow to a first-return map on transversal section charts, and then
works on two parallel tracks:

* classical: discretized weighted transfer operators, topological
  pressure of maps and suspended flows, and Ruelle-Pollicott resonances
  as zeros of det(1 - L);
* quantum: a finite-rank transfer operator M(z, h) built from kernel
  quantizations of the return map compressed by per-chart spectral
  projectors, whose determinant zeros are the quantum resonances.

Exactly solvable models (doubling map, golden-mean shift, open ternary
map, quantized baker maps) serve as validation oracles throughout.
"""

from .classical import (
    branch_constants,
    build_transfer_matrix,
    doubling_map,
    flow_pressure,
    golden_mean_shift,
    open_ternary_map,
    orbit_pressure,
    ruelle_resonances,
    topological_pressure,
    ulam_return_map_matrix,
)
from .dynamics import (
    Disk,
    DiskBilliard,
    GaussianBump,
    PhasePoint,
    SmoothPotential,
    Trajectory,
    box_counting_dimension,
    escape_time,
    evaluate_hamiltonian,
    integrate_flow,
    rotate_phase_point,
    sample_trapped_set,
)
from .quantum import (
    QuantumReturnOperator,
    assemble_M,
    build_projector,
    chart_grid,
    coherent_state,
    husimi_peak,
    open_baker,
    projector_rank,
    quantize_block,
)
from .resonances import (
    DiskDomain,
    RectDomain,
    ResonanceSet,
    find_zeros,
    resonance_density,
    resonance_set_from_eigenvalues,
    spectral_gap_report,
    zeta,
)
from .section import (
    SectionPoint,
    build_sections,
    first_return,
    fit_all_blocks,
    fit_generating_function,
    partition_blocks,
)

__version__ = "0.1.0"
