import math

import pytest

from voltaic import gauss_legendre, integrate, piecewise_constant

# the three-technology demo kernel used across the suite:
# efficiency 1 on [0, t/4), 0.9 on [t/4, 3t/4), 0.85 on [3t/4, t]
DEMO_VALUES = (1.0, 0.9, 0.85)
DEMO_FRACTIONS = (0.25, 0.75)

# sum of value * band-width fraction: integral of the demo kernel over [0, t] is RATE_SUM * t
RATE_SUM = 0.25 * 1.0 + 0.5 * 0.9 + 0.25 * 0.85  # 0.9125
# forward-generated rhs coefficient for x(s) = s under the demo kernel
LINEAR_F_COEF = (1.0 / 32 + 0.9 * 8 / 32 + 0.85 * 7 / 32)  # 0.4421875


@pytest.fixture
def demo_kernel():
    return piecewise_constant(list(DEMO_VALUES), list(DEMO_FRACTIONS))


@pytest.fixture
def unit_kernel():
    return piecewise_constant([1.0], [])


def forward_rhs(kernel, x, order: int = 16):
    """Forward-generate f(t) = sum_p int K_p(t,s) x(s) ds by band quadrature."""
    rule = gauss_legendre(order)

    def f(t: float) -> float:
        t = float(t)
        if t == 0.0:
            return 0.0
        total = 0.0
        for piece in kernel.pieces:
            lo, hi = piece.lower.rule(t), piece.upper.rule(t)
            total += integrate(lambda s: piece.rate(t, s) * x(s), lo, hi, rule)
        return total

    return f


def assert_close(a, b, tol, label=""):
    err = abs(a - b)
    assert err <= tol, f"{label} |{a!r} - {b!r}| = {err:.3e} > {tol:.1e}"
