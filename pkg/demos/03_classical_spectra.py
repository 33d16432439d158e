"""Transfer operators, topological pressure, Ruelle-Pollicott resonances.

Exactly solvable interval maps make every number checkable by hand: the
full binary shift has pressure log 2, the golden-mean shift log of the
golden ratio, and the normalized doubling operator has the eigenvalue
ladder 2^-k, so the determinant zeros sit at -k log 2.
"""

import math

import numpy as np

from scatres import (
    branch_constants,
    doubling_map,
    flow_pressure,
    golden_mean_shift,
    open_ternary_map,
    orbit_pressure,
    ruelle_resonances,
    topological_pressure,
)
from scatres.resonances import RectDomain

print("topological pressure, collocation vs periodic-orbit sums")
for model, label, exact in [
        (doubling_map(), "full 2-shift", math.log(2)),
        (golden_mean_shift(), "golden-mean shift", math.log((1 + 5**0.5) / 2))]:
    p = topological_pressure(model, None)
    orb = orbit_pressure(model, None, 12)
    print(f"  {label:18s} P = {p.value:.12f}  (exact {exact:.12f}, "
          f"orbit-sum {orb:.12f})")

print("\nopen ternary map with the half-expansion weight")
half = lambda br, x: 0.5 * np.log(np.abs(br.dpsi(x)))
p_open = topological_pressure(open_ternary_map(), half)
print(f"  P = {p_open.value:.12f}  (exact log 2 - log(3)/2 = "
      f"{math.log(2) - 0.5 * math.log(3):.12f})")

print("\nsuspension roots of the doubling map")
print(f"  constant roof 2:      s* = {flow_pressure(doubling_map(), None, 2.0):.12f}"
      f"  (exact {0.5 * math.log(2):.12f})")
s_branch = flow_pressure(doubling_map(), None, branch_constants([1.0, 2.0]))
print(f"  branch roofs (1, 2):  s* = {s_branch:.12f}"
      f"  (exact log golden ratio)")

print("\nRuelle-Pollicott ladder of the normalized doubling operator")
rs = ruelle_resonances(doubling_map(), "neg_log_expansion", 1.0,
                       RectDomain(-2.2, 0.3, -1.0, 1.0), resolution=40)
for z in sorted(rs.zeros, key=lambda q: -q.z.real):
    k = round(-z.z.real / math.log(2))
    print(f"  z = {z.z.real:+.12f} {z.z.imag:+.2e}i   (-{k} log 2, "
          f"multiplicity {z.multiplicity})")
