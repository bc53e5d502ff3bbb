"""Regime boundaries of the chain triad in the (delta_mu, kappa) plane.

kappa1 comes from the zero-discriminant condition of the reduced cubic
for the asymmetry ``s`` near the high-discord state; kappa2 and kappa3 are
closed forms built on asymptotic roots. The fourth boundary needs
simulation and lives in :mod:`opinion_triad.regimes`.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .cubic import cubic_discriminant
from .model import DerivConvention, ModelParams, coupling, kernel_deriv

__all__ = [
    "BoundaryKind",
    "BoundaryCurve",
    "NormalForm",
    "SingularExpansionError",
    "NoRootError",
    "cubic_discriminant",
    "theta_shd",
    "normal_form",
    "kappa1",
    "kappa1_condition",
    "kappa2",
    "kappa2_root",
    "kappa2_residuals",
    "kappa3",
    "kappa3_root",
    "kappa3_residuals",
    "boundary_curves",
]

log = logging.getLogger(__name__)

THETA_SINGULAR = 1e-8


class SingularExpansionError(ArithmeticError):
    """A reduction or expansion is evaluated where its scale factor vanishes."""


class NoRootError(ValueError):
    """No sign change of a boundary condition inside the probed bracket."""

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(message)
        self.bracket = bracket


class BoundaryKind(str, enum.Enum):
    K1 = "kappa1"
    K2 = "kappa2"
    K3 = "kappa3"
    K4 = "kappa4"


@dataclass(frozen=True)
class BoundaryCurve:
    kind: BoundaryKind
    points: tuple[tuple[float, float], ...]
    params: dict

    def __post_init__(self):
        dmu = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(dmu, dmu[1:])):
            raise ValueError("boundary points must be strictly increasing in delta_mu")
        if not all(math.isfinite(k) for _, k in self.points):
            raise ValueError("boundary values must be finite")

    @property
    def dmu(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def kappa(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])


@dataclass(frozen=True)
class NormalForm:
    """ds/dtau = A + R s - s^3 with tau = tau_scale * t."""

    A: float
    R: float
    tau_scale: float
    r_used: float
    convention: DerivConvention

    def rhs(self, s):
        return self.A + self.R * s - s ** 3

    def discriminant(self) -> float:
        # -s^3 + 0 s^2 + R s + A
        return cubic_discriminant(-1.0, 0.0, self.R, self.A)


def _leader_strength(p: ModelParams) -> float:
    if not p.is_antisymmetric_leader():
        raise ValueError(f"boundary analysis needs leader pattern (C, 0, -C); got {p.leaders}")
    return p.c1


def theta_shd(delta_mu: float, p: ModelParams, conv=DerivConvention.COMPOSITE) -> float:
    """First-order correction to the discord of the high-discord state.

    The discord at rest is approximately ``delta_mu + theta``.
    """
    c = _leader_strength(p)
    half = delta_mu / 2.0
    ke = p.kappa + p.nu
    den = 1.0 + ke * kernel_deriv(half, 1, conv, p.lam)
    if abs(den) <= THETA_SINGULAR:
        raise SingularExpansionError(
            f"discord expansion singular at delta_mu={delta_mu:g}, kappa={p.kappa:g}")
    return -(2.0 * c * p.x0 + 2.0 * ke * coupling(half, p.lam)) / den


def normal_form(r: float, p: ModelParams, conv=DerivConvention.COMPOSITE) -> NormalForm:
    """Rescale the cubic Taylor form of ds/dt at discord ``r``."""
    conv = DerivConvention.parse(conv)
    c = _leader_strength(p)
    k3 = 3.0 * p.kappa - p.nu
    scale = k3 * kernel_deriv(r / 2.0, 3, conv, p.lam) / 24.0
    if scale == 0.0 or abs(scale) < 1e-14:
        raise SingularExpansionError(
            f"cubic coefficient vanishes (3*kappa - nu = {k3:g}, r = {r:g})")
    a = c * r / scale
    rr = -(1.0 + k3 * kernel_deriv(r / 2.0, 1, conv, p.lam)) / scale
    return NormalForm(A=a, R=rr, tau_scale=scale, r_used=r, convention=conv)


def kappa1_condition(
    kappa: float,
    delta_mu: float,
    p: ModelParams,
    conv=DerivConvention.COMPOSITE,
) -> float:
    """Zero-discriminant condition, LHS - RHS, with theta evaluated at ``kappa``.

    -32 (1 + k3 H1)^3 - 9 C^2 (dmu + theta)^2 k3 H3, where k3 = 3 kappa - nu,
    H1 = h'(dmu/2) + h''(dmu/2) theta/2 and H3 = h'''(dmu/2) + h''''(dmu/2) theta/2.
    """
    conv = DerivConvention.parse(conv)
    q = replace(p, kappa=kappa) if kappa >= 0 else replace(p, kappa=0.0)
    c = _leader_strength(p)
    theta = theta_shd(delta_mu, q, conv)
    half = delta_mu / 2.0
    d = [None] + [kernel_deriv(half, n, conv, p.lam) for n in (1, 2, 3, 4)]
    h1 = d[1] + d[2] * theta / 2.0
    h3 = d[3] + d[4] * theta / 2.0
    k3 = 3.0 * kappa - p.nu
    return -32.0 * (1.0 + k3 * h1) ** 3 - 9.0 * c * c * (delta_mu + theta) ** 2 * k3 * h3


def _bisect_secant(f, lo: float, hi: float, f_lo: float, f_hi: float) -> tuple[float, float]:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid, 0.0
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo <= 1e-13 * max(1.0, abs(mid)):
            break
    best, f_best = (lo, f_lo) if abs(f_lo) <= abs(f_hi) else (hi, f_hi)
    # secant polish, kept inside the bracket
    x0, f0, x1, f1 = lo, f_lo, hi, f_hi
    for _ in range(8):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not lo <= x2 <= hi:
            break
        f2 = f(x2)
        if abs(f2) < abs(f_best):
            best, f_best = x2, f2
        if f2 == 0.0:
            break
        x0, f0, x1, f1 = x1, f1, x2, f2
    return best, f_best


def kappa1(
    delta_mu: float,
    p: ModelParams,
    conv=DerivConvention.COMPOSITE,
    bracket: tuple[float, float] = (0.05, 50.0),
    n_probe: int = 200,
) -> float:
    """Smallest kappa solving :func:`kappa1_condition` (upper edge of high discord).

    Sign changes across a pole of the discord expansion are skipped.
    """
    conv = DerivConvention.parse(conv)
    grid = np.geomspace(bracket[0], bracket[1], n_probe)
    half = delta_mu / 2.0
    d1 = kernel_deriv(half, 1, conv, p.lam)

    def f(k):
        return kappa1_condition(k, delta_mu, p, conv)

    def theta_den(k):
        return 1.0 + (k + p.nu) * d1

    prev = None
    for k in grid:
        try:
            val = f(k)
        except SingularExpansionError:
            prev = None
            continue
        if prev is not None:
            k_prev, v_prev = prev
            if (v_prev > 0) != (val > 0) and (theta_den(k_prev) > 0) == (theta_den(k) > 0):
                root, res = _bisect_secant(f, k_prev, k, v_prev, val)
                if abs(res) >= 1e-10:
                    log.warning("kappa1 residual %.3g at delta_mu=%g", res, delta_mu)
                return root
            if val == 0.0:
                return float(k)
        prev = (float(k), val)
    raise NoRootError(
        f"no kappa1 root for delta_mu={delta_mu:g} in [{bracket[0]:g}, {bracket[1]:g}]",
        bracket=(float(bracket[0]), float(bracket[1])),
    )


def _check_dmu(delta_mu: float) -> None:
    if not (math.isfinite(delta_mu) and delta_mu > 0):
        raise ValueError(f"delta_mu must be positive, got {delta_mu!r}")


def kappa2_root(delta_mu: float, c: float) -> float:
    """Asymptotic saddle-node root s~ = 3/2 + 12 / ((8 + 11C) dmu)."""
    _check_dmu(delta_mu)
    a = (8.0 + 11.0 * c) * delta_mu
    if a == 0.0:
        raise ZeroDivisionError("(8 + 11C) * delta_mu vanishes")
    return 1.5 + 12.0 / a


def kappa2(delta_mu: float, c: float, x0: float) -> float:
    """Saddle-node boundary between majority rule and high discord."""
    _check_dmu(delta_mu)
    a = (8.0 + 11.0 * c) * delta_mu
    if a == 0.0 or a + 8.0 == 0.0:
        raise ZeroDivisionError("kappa2 closed form is singular for these parameters")
    s = 1.5 + 12.0 / a
    bracket = delta_mu + 11.0 * c / 8.0 * delta_mu - 16.0 / a - 2.0 * c * x0 - 2.0
    return a / (6.0 * (a + 8.0)) * bracket * math.exp(2.0 / 9.0 * s * s)


def kappa2_residuals(
    s: float, kappa: float, delta_mu: float, c: float, x0: float,
) -> tuple[float, float, float]:
    """Residuals of the reduced saddle-node system at (s~, kappa).

    Returns (value equation, slope equation, cubic in s~). The value
    equation uses the 11C/8 drift coefficient that the closed form for
    kappa2 is built on.
    """
    g = math.exp(-2.0 / 9.0 * s * s)
    drift = (1.0 + 11.0 * c / 8.0) * delta_mu
    value = 4.0 / 3.0 * s - drift + 2.0 * c * x0 + 4.0 * kappa * s * g
    slope = 4.0 / 3.0 + 4.0 * kappa * (1.0 - 4.0 / 9.0 * s * s) * g
    cubic = (s ** 3 - 0.75 * (delta_mu + 11.0 * c / 8.0 * delta_mu - 2.0 * c * x0) * s * s
             + (27.0 / 16.0 + 297.0 * c / 128.0) * delta_mu - 54.0 * c / 16.0 * x0)
    return value, slope, cubic


def kappa3_root(delta_mu: float) -> float:
    """Asymptotic pitchfork discord r = 2 + 4 / (3 dmu)."""
    _check_dmu(delta_mu)
    return 2.0 + 4.0 / (3.0 * delta_mu)


def kappa3(delta_mu: float, c: float, x0: float, nu: float = 0.0) -> float:
    """Lower boundary of the low-discord state."""
    _check_dmu(delta_mu)
    r = 2.0 + 4.0 / (3.0 * delta_mu)
    poly = 3.0 * delta_mu ** 2 - 6.0 * (1.0 + c * x0) * delta_mu - 4.0
    return (-4.0 * nu - 6.0 * nu * delta_mu + poly * math.exp(r * r / 8.0)) / (
        2.0 * (2.0 + 3.0 * delta_mu))


def kappa3_residuals(
    r: float, kappa: float, delta_mu: float, c: float, x0: float, nu: float = 0.0,
) -> tuple[float, float, float]:
    """Residuals (discord balance, linear-coefficient zero, cubic in r)."""
    g = math.exp(-r * r / 8.0)
    balance = r + 2.0 * c * x0 - delta_mu + (kappa + nu) * r * g
    linear = 1.0 + 0.5 * (3.0 * kappa - nu) * (1.0 - r * r / 4.0) * g
    cubic = (r ** 3 - delta_mu * r * r + 2.0 * c * x0 * r * r - 4.0 / 3.0 * r
             - 8.0 * c * x0 + 4.0 * delta_mu)
    return balance, linear, cubic


def boundary_curves(
    dmu_range: tuple[float, float, int],
    p: ModelParams,
    conv=DerivConvention.COMPOSITE,
) -> list[BoundaryCurve]:
    """Sample kappa1, kappa2 and kappa3 on an evenly spaced delta_mu grid.

    Grid points where a boundary is undefined are dropped and logged.
    """
    lo, hi, n = dmu_range
    n = int(n)
    if not lo < hi or n < 2:
        raise ValueError(f"invalid delta_mu range {dmu_range!r}")
    conv = DerivConvention.parse(conv)
    c = _leader_strength(p)
    meta = {"c": c, "x0": p.x0, "nu": p.nu, "lam": p.lam, "convention": conv.value}
    evaluators = {
        BoundaryKind.K1: lambda d: kappa1(d, p, conv),
        BoundaryKind.K2: lambda d: kappa2(d, c, p.x0),
        BoundaryKind.K3: lambda d: kappa3(d, c, p.x0, p.nu),
    }
    curves = []
    for kind, fn in evaluators.items():
        pts = []
        for d in np.linspace(lo, hi, n):
            d = float(d)
            try:
                k = fn(d)
            except (ArithmeticError, ValueError) as exc:
                log.info("%s undefined at delta_mu=%g: %s", kind.value, d, exc)
                continue
            if math.isfinite(k):
                pts.append((d, float(k)))
        curves.append(BoundaryCurve(kind, tuple(pts), dict(meta)))
    if not any(cv.points for cv in curves):
        raise ValueError(f"no boundary could be evaluated on {dmu_range!r}")
    return curves
