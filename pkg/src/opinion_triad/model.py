"""Opinion dynamics of a chain triad under a constant-opinion leader.

Parameter and state types, the Gaussian-damped coupling kernel and its
derivatives, right-hand sides in original and (r, s, xbar) coordinates,
and the analytic Jacobian of the chain system.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "DerivConvention",
    "ModelParams",
    "OpinionState",
    "RsxState",
    "Topology",
    "coupling",
    "coupling_deriv",
    "composite_deriv",
    "fj_step",
    "rhs_general",
    "rhs_chain3",
    "to_rsx",
    "from_rsx",
    "rsx_rhs",
    "jacobian_chain3",
]


class DerivConvention(str, enum.Enum):
    """How derivatives of the kernel at half the bias gap are evaluated.

    ``TRUE_DERIVATIVE`` uses h^(n)(u) at u = d/2. ``COMPOSITE`` uses the
    derivative of the composite map d -> h(d/2), which carries an extra
    factor (1/2)^n.
    """

    TRUE_DERIVATIVE = "true-derivative"
    COMPOSITE = "composite"

    @classmethod
    def parse(cls, value: "str | DerivConvention") -> "DerivConvention":
        if isinstance(value, cls):
            return value
        aliases = {"true": cls.TRUE_DERIVATIVE}
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite input: {v!r}")


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the chain triad.

    End nodes couple to the centre with strength ``kappa + nu``; the centre
    couples to each end with ``kappa - nu``. Leader forces are
    ``c_i * (x0 - x_i)``.
    """

    kappa: float
    nu: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    x0: float = 0.0
    mu1: float = -2.5
    mu2: float = 0.0
    mu3: float = 2.5
    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma3: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        for name in (
            "kappa", "nu", "c1", "c2", "c3", "x0", "mu1", "mu2", "mu3",
            "gamma1", "gamma2", "gamma3", "lam",
        ):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite real, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if min(self.gamma1, self.gamma2, self.gamma3) <= 0:
            raise ValueError("self-bias strengths gamma1..gamma3 must be > 0")

    @classmethod
    def canonical(
        cls,
        delta_mu: float,
        kappa: float,
        c: float = 0.0,
        x0: float = 0.0,
        nu: float = 0.0,
        **kwargs,
    ) -> "ModelParams":
        """Symmetric biases (-dmu/2, 0, dmu/2) and leader pattern (C, 0, -C)."""
        return cls(
            kappa=kappa, nu=nu, c1=c, c2=0.0, c3=-c, x0=x0,
            mu1=-delta_mu / 2, mu2=0.0, mu3=delta_mu / 2, **kwargs,
        )

    def delta_mu(self) -> float:
        return self.mu3 - self.mu1

    def with_delta_mu(self, delta_mu: float) -> "ModelParams":
        """Same parameters with biases reset to the symmetric layout."""
        return replace(self, mu1=-delta_mu / 2, mu2=0.0, mu3=delta_mu / 2)

    def with_kappa(self, kappa: float) -> "ModelParams":
        return replace(self, kappa=kappa)

    @property
    def leaders(self) -> tuple[float, float, float]:
        return (self.c1, self.c2, self.c3)

    @property
    def biases(self) -> tuple[float, float, float]:
        return (self.mu1, self.mu2, self.mu3)

    @property
    def gammas(self) -> tuple[float, float, float]:
        return (self.gamma1, self.gamma2, self.gamma3)

    def has_leader(self) -> bool:
        return any(c != 0.0 for c in self.leaders)

    def is_antisymmetric_leader(self) -> bool:
        """True for the (C, 0, -C) leader pattern (C may be zero)."""
        return self.c2 == 0.0 and self.c3 == -self.c1

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa, "nu": self.nu,
            "c1": self.c1, "c2": self.c2, "c3": self.c3, "x0": self.x0,
            "mu1": self.mu1, "mu2": self.mu2, "mu3": self.mu3,
            "gamma1": self.gamma1, "gamma2": self.gamma2, "gamma3": self.gamma3,
            "lam": self.lam,
        }


@dataclass(frozen=True)
class OpinionState:
    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise ValueError("opinion state must be a finite 1-D vector")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class RsxState:
    """Discord ``r``, asymmetry ``s`` and mean opinion ``xbar`` of a triad."""

    r: float
    s: float
    xbar: float
    t: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.s, self.xbar)


@dataclass(frozen=True)
class Topology:
    """Directed coupling weights; ``coupling_weights[i, j]`` is the pull of j on i."""

    adjacency: np.ndarray
    coupling_weights: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        w = a.copy() if self.coupling_weights is None else np.array(
            self.coupling_weights, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or w.shape != a.shape:
            raise ValueError("adjacency and coupling weights must be matching N x N")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        if not np.all(np.isin(a, (0.0, 1.0))):
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(w < 0) or np.any(w[a == 0] != 0):
            raise ValueError("coupling weights must be >= 0 and vanish off the adjacency")
        a.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "coupling_weights", w)

    @property
    def size(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def chain3(cls, kappa: float, nu: float = 0.0) -> "Topology":
        a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        w = np.array([
            [0.0, kappa + nu, 0.0],
            [kappa - nu, 0.0, kappa - nu],
            [0.0, kappa + nu, 0.0],
        ])
        return cls(a, w)


def coupling(d: float, lam: float = 1.0) -> float:
    """Influence kernel h(d) = d exp(-d^2 / (2 lam^2))."""
    _check_finite(d, lam)
    if lam <= 0:
        raise ValueError("lam must be > 0")
    return d * math.exp(-0.5 * (d / lam) ** 2)


# Polynomial factors P_n(z) with h^(n)(d) = lam^(1-n) P_n(d/lam) exp(-z^2/2).
_DERIV_POLYS = {
    1: lambda z: 1.0 - z * z,
    2: lambda z: z ** 3 - 3.0 * z,
    3: lambda z: -z ** 4 + 6.0 * z * z - 3.0,
    4: lambda z: z ** 5 - 10.0 * z ** 3 + 15.0 * z,
}


def coupling_deriv(d: float, lam: float = 1.0, order: int = 1) -> float:
    """Order-th derivative of the kernel with respect to its argument."""
    if order not in _DERIV_POLYS:
        raise ValueError(f"unsupported derivative order {order!r}; expected 1..4")
    _check_finite(d, lam)
    if lam <= 0:
        raise ValueError("lam must be > 0")
    z = d / lam
    return lam ** (1 - order) * _DERIV_POLYS[order](z) * math.exp(-0.5 * z * z)


def composite_deriv(delta_mu: float, order: int) -> float:
    """Closed forms for d^n/d(dmu)^n of h(dmu/2) at lam = 1.

    Only orders 1, 3 and 4 have printed closed forms; each equals
    (1/2)^n * h^(n)(dmu/2).
    """
    _check_finite(delta_mu)
    g = math.exp(-delta_mu ** 2 / 8.0)
    if order == 1:
        return 0.5 * (1.0 - delta_mu ** 2 / 4.0) * g
    if order == 3:
        return (-6.0 + 3.0 * delta_mu ** 2 - delta_mu ** 4 / 8.0) * g / 16.0
    if order == 4:
        return (30.0 * delta_mu - 5.0 * delta_mu ** 3 + delta_mu ** 5 / 8.0) * g / 64.0
    raise ValueError(f"no composite closed form for order {order!r}; use 1, 3 or 4")


def kernel_deriv(u: float, order: int, conv: DerivConvention, lam: float = 1.0) -> float:
    """Derivative of the kernel at ``u`` (a half-gap) under a convention.

    COMPOSITE scales the true derivative by (1/2)^order, which for
    orders 1, 3, 4 and lam = 1 reproduces :func:`composite_deriv` at 2u.
    """
    value = coupling_deriv(u, lam, order)
    if DerivConvention.parse(conv) is DerivConvention.COMPOSITE:
        return value * 0.5 ** order
    return value


def fj_step(x, x_init, sensitivities, weights) -> np.ndarray:
    """One Friedkin-Johnsen update: a_i * (W x)_i + (1 - a_i) * x_i(0)."""
    x = np.asarray(x, dtype=float)
    x_init = np.asarray(x_init, dtype=float)
    a = np.asarray(sensitivities, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = x.shape[0]
    if x.ndim != 1 or x_init.shape != (n,) or a.shape != (n,) or w.shape != (n, n):
        raise ValueError("dimension mismatch between state, anchors, sensitivities and weights")
    if np.any((a < 0) | (a > 1)):
        raise ValueError("sensitivities must lie in [0, 1]")
    return a * (w @ x) + (1.0 - a) * x_init


def _as_agent_vector(value, n: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,))
    if arr.shape != (n,):
        raise ValueError(f"{name} must have length {n}")
    return arr


def rhs_general(
    x,
    gamma,
    mu,
    c,
    lam,
    topology: Topology,
    x0: float,
) -> np.ndarray:
    """dx_i/dt = -gamma_i (x_i - mu_i) + sum_j k_ij h(x_j - x_i) + c_i (x0 - x_i).

    Per-agent arguments may be scalars (broadcast) or length-N vectors;
    ``lam[i]`` sets the kernel width that agent i applies.
    """
    x = np.asarray(x, dtype=float)
    n = topology.size
    if x.shape != (n,):
        raise ValueError(f"state has shape {x.shape}, topology expects ({n},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite state")
    gamma = _as_agent_vector(gamma, n, "gamma")
    mu = _as_agent_vector(mu, n, "mu")
    c = _as_agent_vector(c, n, "c")
    lam = _as_agent_vector(lam, n, "lam")
    if np.any(lam <= 0):
        raise ValueError("lam must be > 0")
    diff = x[np.newaxis, :] - x[:, np.newaxis]
    kern = diff * np.exp(-0.5 * (diff / lam[:, np.newaxis]) ** 2)
    social = np.sum(topology.coupling_weights * kern, axis=1)
    return -gamma * (x - mu) + social + c * (x0 - x)


def rhs_chain3(x, p: ModelParams) -> np.ndarray:
    """Right-hand side of the chain triad with leader forces."""
    x1, x2, x3 = (float(v) for v in x)
    if not (math.isfinite(x1) and math.isfinite(x2) and math.isfinite(x3)):
        raise ValueError("non-finite state")
    inv = 0.5 / (p.lam * p.lam)
    d21 = x2 - x1
    d32 = x3 - x2
    h21 = d21 * math.exp(-inv * d21 * d21)
    h32 = d32 * math.exp(-inv * d32 * d32)
    ke = p.kappa + p.nu
    kc = p.kappa - p.nu
    return np.array([
        -p.gamma1 * (x1 - p.mu1) + ke * h21 + p.c1 * (p.x0 - x1),
        -p.gamma2 * (x2 - p.mu2) + kc * (h32 - h21) + p.c2 * (p.x0 - x2),
        -p.gamma3 * (x3 - p.mu3) - ke * h32 + p.c3 * (p.x0 - x3),
    ])


def to_rsx(x, t: float = 0.0) -> RsxState:
    x1, x2, x3 = (float(v) for v in x)
    return RsxState(r=x3 - x1, s=x3 - 2.0 * x2 + x1, xbar=(x1 + x2 + x3) / 3.0, t=t)


def from_rsx(r: float, s: float, xbar: float) -> np.ndarray:
    x2 = xbar - s / 3.0
    mid = xbar + s / 6.0
    return np.array([mid - r / 2.0, x2, mid + r / 2.0])


def rsx_rhs(state: RsxState, p: ModelParams) -> tuple[float, float, float]:
    """Time derivatives of (r, s, xbar) for the (C, 0, -C) leader pattern."""
    if not p.is_antisymmetric_leader():
        raise ValueError(
            f"rsx_rhs needs leader pattern (C, 0, -C); got {p.leaders}")
    if p.gammas != (1.0, 1.0, 1.0):
        raise ValueError("rsx_rhs assumes unit self-bias strengths")
    r, s, xbar = state.r, state.s, state.xbar
    _check_finite(r, s, xbar)
    c = p.c1
    hp = coupling((r + s) / 2.0, p.lam)
    hm = coupling((r - s) / 2.0, p.lam)
    dr = (-r + 2.0 * c * xbar + c * s / 3.0 - 2.0 * c * p.x0 + p.mu3 - p.mu1
          - (p.kappa + p.nu) * (hp + hm))
    ds = (-s + c * r + p.mu3 - 2.0 * p.mu2 + p.mu1
          - (3.0 * p.kappa - p.nu) * (hp - hm))
    dxbar = (-xbar + c * r / 3.0 + (p.mu1 + p.mu2 + p.mu3) / 3.0
             - 2.0 * p.nu / 3.0 * (hp - hm))
    return (dr, ds, dxbar)


def jacobian_chain3(x, p: ModelParams) -> np.ndarray:
    x1, x2, x3 = (float(v) for v in x)
    g21 = coupling_deriv(x2 - x1, p.lam, 1)
    g32 = coupling_deriv(x3 - x2, p.lam, 1)
    ke = p.kappa + p.nu
    kc = p.kappa - p.nu
    # h' is even, so h'(x1 - x2) = h'(x2 - x1).
    return np.array([
        [-p.gamma1 - ke * g21 - p.c1, ke * g21, 0.0],
        [kc * g21, -p.gamma2 - kc * (g21 + g32) - p.c2, kc * g32],
        [0.0, ke * g32, -p.gamma3 - ke * g32 - p.c3],
    ])


def as_triad(x: Sequence[float]) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite state")
    return arr
