"""Shared oracles for the quadratic-phase (metaplectic) test setup.

The linear symplectic map (y', eta') -> (2y' + eta', 3y' + 2eta') has the
generating function S(y, y') = y^2 - y y' + y'^2; its kernel quantization
can be paired with Gaussian wave packets in closed form, giving an exact,
grid-free oracle for compressed matrix elements.
"""

import numpy as np

from scatres.section import Chebyshev2D

ALPHA, BETA, GAMMA = 2.0, -1.0, 2.0
T_MAP = np.array([[2.0, 1.0], [3.0, 2.0]])
H_TEST = 0.05
L_TEST = 2.0


def quadratic_fit(alpha=ALPHA, beta=BETA, gamma=GAMMA, L=L_TEST):
    """Exact tensor-Chebyshev coefficients of (a y^2 + 2b y y' + c y'^2)/2."""
    c = np.zeros((3, 3))
    c[0, 0] = 0.5 * alpha * L**2 / 2 + 0.5 * gamma * L**2 / 2
    c[2, 0] = 0.5 * alpha * L**2 / 2
    c[0, 2] = 0.5 * gamma * L**2 / 2
    c[1, 1] = beta * L**2
    return Chebyshev2D(c, (-L, L, -L, L))


def constant_fit(value, L=L_TEST):
    return Chebyshev2D(np.array([[float(value)]]), (-L, L, -L, L))


def metaplectic_oracle(qw, pw, qv, pv, h=H_TEST, sigma=1.0,
                       alpha=ALPHA, beta=BETA, gamma=GAMMA):
    """Closed-form coherent-state matrix element of the quadratic kernel.

    Both Gaussian integrals of <g_w | K | g_v> are evaluated analytically,
    so the value is exact up to roundoff and independent of any grid.
    """
    A_in = 1.0 / (h * sigma**2) - 1j * gamma / h
    B0 = qv / (h * sigma**2) + 1j * pv / h
    C_in = -qv**2 / (2 * h * sigma**2) - 1j * pv * qv / h
    A_out = 1.0 / (h * sigma**2) - 1j * alpha / h + (beta / h) ** 2 / A_in
    B_out = qw / (h * sigma**2) - 1j * pw / h + 1j * B0 * beta / (h * A_in)
    C_out = (-qw**2 / (2 * h * sigma**2) + 1j * pw * qw / h
             + B0**2 / (2 * A_in) + C_in)
    pref = ((2 * np.pi * h) ** -0.5 * abs(beta) ** 0.5
            * (np.pi * h * sigma**2) ** -0.5
            * np.sqrt(2 * np.pi / A_in) * np.sqrt(2 * np.pi / A_out))
    return pref * np.exp(B_out**2 / (2 * A_out) + C_out)


class FakeChart:
    """Minimal chart stand-in: domain rectangle plus confinement ellipse."""

    def __init__(self, index, domain, ellipse):
        self.index = index
        self.domain = domain
        self.ellipse = ellipse
