"""Real cubic polynomials: discriminant and closed-form roots."""
from __future__ import annotations

import cmath
import math

__all__ = ["cubic_discriminant", "cubic_roots"]

_OMEGA = complex(-0.5, math.sqrt(3.0) / 2.0)


def cubic_discriminant(a: float, b: float, c: float, d: float) -> float:
    """Discriminant of a x^3 + b x^2 + c x + d.

    Positive: three distinct real roots. Zero: a repeated root.
    Negative: one real root and a complex-conjugate pair.
    """
    if a == 0:
        raise ValueError("leading coefficient is zero; not a cubic")
    return (b * b * c * c - 4.0 * a * c ** 3 - 4.0 * b ** 3 * d
            - 27.0 * a * a * d * d + 18.0 * a * b * c * d)


def _polish(coeffs, z: complex, iters: int = 3) -> complex:
    a, b, c, d = coeffs
    for _ in range(iters):
        f = ((a * z + b) * z + c) * z + d
        df = (3.0 * a * z + 2.0 * b) * z + c
        if df == 0:
            break
        step = f / df
        z_new = z - step
        f_new = ((a * z_new + b) * z_new + c) * z_new + d
        if abs(f_new) >= abs(f):
            break
        z = z_new
    return z


def cubic_roots(a: float, b: float, c: float, d: float) -> list[complex]:
    """All three roots via Cardano's formula, Newton-polished.

    Roots are returned as complex numbers sorted by (real, imag). When the
    discriminant is non-negative the imaginary parts are dropped.
    """
    if a == 0:
        raise ValueError("leading coefficient is zero; not a cubic")
    bn, cn, dn = b / a, c / a, d / a
    shift = bn / 3.0
    p = cn - bn * bn / 3.0
    q = 2.0 * bn ** 3 / 27.0 - bn * cn / 3.0 + dn
    root_disc = cmath.sqrt(q * q / 4.0 + p ** 3 / 27.0)
    u3 = -q / 2.0 + root_disc
    alt = -q / 2.0 - root_disc
    if abs(alt) > abs(u3):
        u3 = alt
    if u3 == 0:
        ts = [0j, 0j, 0j]
    else:
        u = u3 ** (1.0 / 3.0)
        ts = []
        for k in range(3):
            uk = u * _OMEGA ** k
            ts.append(uk - p / (3.0 * uk))
    roots = [_polish((1.0, bn, cn, dn), t - shift) for t in ts]
    if cubic_discriminant(1.0, bn, cn, dn) >= 0:
        roots = [complex(z.real, 0.0) for z in roots]
    return sorted(roots, key=lambda z: (z.real, z.imag))
