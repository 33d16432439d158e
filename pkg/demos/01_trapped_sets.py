"""Trapped orbits of the three-disk billiard.

Samples phase points whose orbits never leave the scattering region in
either time direction, checks them against the exactly known two-disk
bouncing orbits, and estimates the box-counting dimension of the sampled
set.  Everything here is exact ray tracing, so the script runs in seconds.
"""

import numpy as np

from scatres import box_counting_dimension, escape_time, sample_trapped_set
from scatres.reference import three_disk_system

system = three_disk_system()
E, t_max, radius = 0.5, 25.0, 8.0

print("three-disk billiard: centers 6 apart, unit radii, energy", E)
samples = sample_trapped_set(system, E=E, budget=240, t_max=t_max,
                             escape_radius=radius, grid=81, per_spike=10)
print(f"sampled {len(samples)} points with dwell > {t_max} both ways")

# re-verify a few samples independently
for p in samples[:3]:
    fwd, bwd = escape_time(system, p, radius, t_max)
    print(f"  x = ({p.x[0]:+.4f}, {p.x[1]:+.4f})  "
          f"escape forward/backward: {fwd} / {bwd}")

# distance to the three 2-cycles (the bouncing orbits between disk pairs)
speed = np.sqrt(2 * E)
print("\nnearest sample to each two-disk bouncing orbit:")
for (i, j) in [(0, 1), (1, 2), (0, 2)]:
    di, dj = system.disks[i], system.disks[j]
    u = (dj.center - di.center) / np.linalg.norm(dj.center - di.center)
    a = di.center + di.radius * u
    b = dj.center - dj.radius * u

    def dist(p):
        seg = b - a
        t = np.clip((p.x - a) @ seg / (seg @ seg), 0, 1)
        dx = np.linalg.norm(p.x - (a + t * seg))
        dxi = min(np.linalg.norm(p.xi - speed * u),
                  np.linalg.norm(p.xi + speed * u))
        return np.hypot(dx, dxi)

    print(f"  disks {i}-{j}: {min(dist(p) for p in samples):.2e}")

scales = [0.03, 0.06, 0.12, 0.25, 0.5]
d, res = box_counting_dimension(samples, scales)
print(f"\nbox-counting dimension of the sample cloud: {d:.3f} "
      f"(rms fit residual {res:.3f})")
print("(a small sample only probes the coarse scales of the repeller)")
