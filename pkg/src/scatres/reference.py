"""Bundled reference systems used by tests, demos, and the sample configs.

The smooth system is a rotation-symmetric arrangement of three identical
Gaussian bumps whose pairwise midpoints sit well below the bump tops, so
intermediate energies bounce between the hills; the billiard is the
standard equilateral three-disk arrangement with center distance 6 and
unit radii, which satisfies the no-eclipse condition comfortably.
"""

import numpy as np

from .dynamics import Disk, DiskBilliard, GaussianBump, SmoothPotential

THREE_BUMP_AMPLITUDE = 1.0
THREE_BUMP_WIDTH = 0.3
THREE_BUMP_RADIUS = 1.0
THREE_BUMP_SUPPORT = 6.0
THREE_BUMP_ENERGY = 0.5

THREE_DISK_SEPARATION = 6.0
THREE_DISK_RADIUS = 1.0
THREE_DISK_ENERGY = 0.5


def three_bump_centers():
    s = np.sqrt(3.0) / 2.0
    return [np.array([0.0, 1.0]), np.array([-s, -0.5]), np.array([s, -0.5])]


def three_bump_system():
    bumps = [GaussianBump(c, THREE_BUMP_AMPLITUDE, THREE_BUMP_WIDTH)
             for c in three_bump_centers()]
    return SmoothPotential(bumps, THREE_BUMP_SUPPORT)


def three_disk_centers(separation=THREE_DISK_SEPARATION):
    circumradius = separation / np.sqrt(3.0)
    s = np.sqrt(3.0) / 2.0
    return [circumradius * np.array([0.0, 1.0]),
            circumradius * np.array([-s, -0.5]),
            circumradius * np.array([s, -0.5])]


def three_disk_system(separation=THREE_DISK_SEPARATION, radius=THREE_DISK_RADIUS):
    centers = three_disk_centers(separation)
    return DiskBilliard([Disk(c, radius) for c in centers])
