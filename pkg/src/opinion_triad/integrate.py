"""Time integration, equilibrium refinement and linear stability."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cubic import cubic_roots
from .model import ModelParams, OpinionState, as_triad, jacobian_chain3, rhs_chain3

__all__ = [
    "Method",
    "SolverConfig",
    "Trajectory",
    "Equilibrium",
    "IntegrationError",
    "StepSizeUnderflowError",
    "BlowUpError",
    "integrate",
    "solve_autonomous",
    "find_equilibrium",
    "newton_refine",
    "eigenvalues_3x3",
    "char_poly_3x3",
]

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6


class IntegrationError(RuntimeError):
    """Integration could not proceed."""


class StepSizeUnderflowError(IntegrationError):
    """Adaptive step size fell below the representable resolution of t."""


class BlowUpError(IntegrationError):
    """State became non-finite or exceeded the blow-up guard."""


class Method(str, enum.Enum):
    RK4_FIXED = "rk4"
    RK45_ADAPTIVE = "rk45"


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.RK45_ADAPTIVE
    dt: float = 0.01
    t_max: float = 500.0
    eq_tol: float = 1e-9
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    sample_stride: int = 1
    settle_tol: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for name in ("dt", "t_max", "eq_tol", "abs_tol", "rel_tol", "settle_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite real, got {v!r}")
        if self.dt >= self.t_max:
            raise ValueError("dt must be smaller than t_max")
        if int(self.sample_stride) < 1:
            raise ValueError("sample_stride must be >= 1")

    def as_dict(self) -> dict:
        return {
            "method": self.method.value, "dt": self.dt, "t_max": self.t_max,
            "eq_tol": self.eq_tol, "abs_tol": self.abs_tol, "rel_tol": self.rel_tol,
            "sample_stride": self.sample_stride, "settle_tol": self.settle_tol,
        }


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution; ``x[k]`` is the state at time ``t[k]``."""

    t: np.ndarray
    x: np.ndarray
    params: ModelParams | None
    converged: bool
    final_residual: float
    steps: int = 0
    stop_reason: str = "t_max"

    @property
    def samples(self) -> list[OpinionState]:
        return [OpinionState(xk, float(tk)) for tk, xk in zip(self.t, self.x)]

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def rsx(self) -> np.ndarray:
        """Columns r, s, xbar for every sample (triad only)."""
        x1, x2, x3 = self.x[:, 0], self.x[:, 1], self.x[:, 2]
        return np.column_stack((x3 - x1, x3 - 2.0 * x2 + x1, (x1 + x2 + x3) / 3.0))


@dataclass(frozen=True)
class Equilibrium:
    x_star: np.ndarray
    residual: float
    eigenvalues: tuple[complex, complex, complex]
    stable: bool
    converged: bool = True
    refined: bool = False
    diagnostic: str = ""
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {
            "x_star": [float(v) for v in self.x_star],
            "residual": float(self.residual),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "stable": bool(self.stable),
            "converged": bool(self.converged),
            "refined": bool(self.refined),
            "diagnostic": self.diagnostic,
        }


# Dormand-Prince 5(4) tableau.
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6]
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _check_state(y: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(y)):
        raise BlowUpError(f"non-finite state at t={t:.6g}")
    if np.max(np.abs(y)) > BLOWUP_LIMIT:
        raise BlowUpError(f"|x| exceeded {BLOWUP_LIMIT:g} at t={t:.6g}")


@dataclass
class _Run:
    t: list
    y: list
    converged: bool = False
    residual: float = math.inf
    steps: int = 0
    stop_reason: str = "t_max"


def _safe_eval(fun, y: np.ndarray, t: float) -> np.ndarray:
    try:
        out = fun(y)
    except (ValueError, OverflowError) as exc:
        raise BlowUpError(f"right-hand side failed at t={t:.6g}: {exc}") from exc
    return np.asarray(out, dtype=float)


def solve_autonomous(
    fun: Callable[[np.ndarray], np.ndarray],
    y0,
    cfg: SolverConfig,
    settle: Callable[[np.ndarray], bool] | None = None,
) -> _Run:
    """Integrate y' = fun(y) from t = 0 until rest or ``cfg.t_max``.

    The run stops as soon as the sup-norm of fun(y) drops below
    ``cfg.eq_tol``. If ``settle`` is given it is consulted whenever the
    residual is below ``cfg.settle_tol``; returning True stops the run with
    ``stop_reason="settled"``.
    """
    y = np.array(y0, dtype=float)
    _check_state(y, 0.0)
    stride = int(cfg.sample_stride)
    run = _Run(t=[0.0], y=[y.copy()])
    t = 0.0
    f = _safe_eval(fun, y, t)
    run.residual = float(np.max(np.abs(f)))
    if run.residual < cfg.eq_tol:
        run.converged, run.stop_reason = True, "equilibrium"
        return run
    next_settle_check = 0

    def accept(t_new, y_new, f_new, final):
        nonlocal next_settle_check
        run.steps += 1
        _check_state(y_new, t_new)
        run.residual = float(np.max(np.abs(f_new)))
        stop = None
        if run.residual < cfg.eq_tol:
            run.converged = True
            stop = "equilibrium"
        elif (settle is not None and run.residual < cfg.settle_tol
              and run.steps >= next_settle_check):
            if settle(y_new):
                stop = "settled"
            else:
                # Lingering near a saddle: do not retry on every step.
                next_settle_check = run.steps + 20
        if stop or final or run.steps % stride == 0:
            run.t.append(t_new)
            run.y.append(y_new.copy())
        if stop:
            run.stop_reason = stop
        return stop is not None

    if cfg.method is Method.RK4_FIXED:
        n_steps = int(math.ceil(cfg.t_max / cfg.dt - 1e-9))
        for n in range(1, n_steps + 1):
            h = min(cfg.dt, cfg.t_max - t)
            k2 = _safe_eval(fun, y + 0.5 * h * f, t)
            k3 = _safe_eval(fun, y + 0.5 * h * k2, t)
            k4 = _safe_eval(fun, y + h * k3, t)
            y = y + (h / 6.0) * (f + 2.0 * k2 + 2.0 * k3 + k4)
            t = n * cfg.dt if n < n_steps else cfg.t_max
            _check_state(y, t)
            f = _safe_eval(fun, y, t)
            if accept(t, y, f, n == n_steps):
                break
        return run

    h = cfg.dt
    k = [f] + [None] * 6
    min_step = 64.0 * np.finfo(float).eps
    while t < cfg.t_max:
        h = min(h, cfg.t_max - t)
        if h <= min_step * max(1.0, abs(t)):
            raise StepSizeUnderflowError(f"step size {h:.3g} underflowed at t={t:.6g}")
        err = 0.0
        try:
            for i in range(1, 7):
                acc = y.copy()
                for j, a in enumerate(_A[i]):
                    if a:
                        acc += (h * a) * k[j]
                k[i] = fun(acc)
        except (ValueError, OverflowError):
            err = math.inf
        y_new = acc  # the last stage is evaluated at the 5th-order solution (FSAL)
        if err == 0.0:
            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(k[6]))):
                err = math.inf
            else:
                e = h * (_E[0] * k[0] + _E[2] * k[2] + _E[3] * k[3]
                         + _E[4] * k[4] + _E[5] * k[5] + _E[6] * k[6])
                scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                err = float(np.max(np.abs(e) / scale))
        if err <= 1.0:
            t_new = t + h
            final = t_new >= cfg.t_max
            if accept(t_new, y_new, k[6], final):
                break
            t, y = t_new, y_new
            k[0] = k[6]
            factor = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
        else:
            factor = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
        h *= factor
    return run


def integrate(p: ModelParams, x_init, cfg: SolverConfig | None = None,
              settle: Callable[[np.ndarray], bool] | None = None) -> Trajectory:
    """Integrate the chain triad from ``x_init`` at t = 0."""
    cfg = cfg or SolverConfig()
    x_init = as_triad(x_init)
    run = solve_autonomous(lambda y: rhs_chain3(y, p), x_init, cfg, settle)
    return Trajectory(t=np.array(run.t), x=np.array(run.y), params=p,
                      converged=run.converged, final_residual=run.residual,
                      steps=run.steps, stop_reason=run.stop_reason)


def char_poly_3x3(j: np.ndarray) -> tuple[float, float, float, float]:
    """Coefficients of det(lambda I - J) = lambda^3 + b lambda^2 + c lambda + d."""
    tr = j[0, 0] + j[1, 1] + j[2, 2]
    minors = (j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
              + j[0, 0] * j[2, 2] - j[0, 2] * j[2, 0]
              + j[1, 1] * j[2, 2] - j[1, 2] * j[2, 1])
    return (1.0, -tr, minors, -float(np.linalg.det(j)))


def eigenvalues_3x3(j: np.ndarray) -> tuple[complex, complex, complex]:
    return tuple(cubic_roots(*char_poly_3x3(np.asarray(j, dtype=float))))


def newton_refine(
    p: ModelParams,
    x,
    tol: float = 1e-12,
    max_iter: int = 50,
    max_halvings: int = 8,
) -> tuple[np.ndarray, float]:
    """Damped Newton on the triad right-hand side.

    Raises ``np.linalg.LinAlgError`` on a singular Jacobian.
    """
    x = np.array(x, dtype=float)
    f = rhs_chain3(x, p)
    res = float(np.max(np.abs(f)))
    for _ in range(max_iter):
        if res < tol:
            break
        step = np.linalg.solve(jacobian_chain3(x, p), -f)
        lam = 1.0
        for _ in range(max_halvings + 1):
            x_try = x + lam * step
            f_try = rhs_chain3(x_try, p)
            res_try = float(np.max(np.abs(f_try)))
            if res_try < res:
                break
            lam *= 0.5
        else:
            break
        x, f, res = x_try, f_try, res_try
    return x, res


def _stability(x: np.ndarray, p: ModelParams):
    eig = eigenvalues_3x3(jacobian_chain3(x, p))
    return eig, all(z.real < 0 for z in eig)


def find_equilibrium(
    p: ModelParams,
    x_init,
    cfg: SolverConfig | None = None,
    max_shift: float = 1e-3,
) -> Equilibrium:
    """Integrate toward rest, polish with damped Newton, assess stability.

    Integration hands over to Newton once the residual is below
    ``cfg.settle_tol`` and Newton lands on a *stable* equilibrium within
    ``max_shift`` of the trajectory; saddles passed on the way are skipped.
    A run that never settles yields ``converged=False`` with the endpoint
    and a diagnostic instead of raising.
    """
    cfg = cfg or SolverConfig()
    found: dict = {}

    def settle(y: np.ndarray) -> bool:
        try:
            x_star, res = newton_refine(p, y)
        except np.linalg.LinAlgError:
            return False
        if res >= cfg.eq_tol or np.max(np.abs(x_star - y)) > max_shift:
            return False
        eig, stable = _stability(x_star, p)
        if not stable:
            return False
        found.update(x_star=x_star, res=res, eig=eig)
        return True

    traj = integrate(p, x_init, cfg, settle=settle)
    x_end = traj.final
    if found:
        return Equilibrium(found["x_star"], found["res"], found["eig"], True,
                           converged=True, refined=True, trajectory=traj)
    if not traj.converged:
        eig, stable = _stability(x_end, p)
        msg = (f"no equilibrium within t_max={cfg.t_max:g}; "
               f"residual {traj.final_residual:.3g} >= eq_tol {cfg.eq_tol:g}")
        return Equilibrium(x_end.copy(), traj.final_residual, eig, stable,
                           converged=False, diagnostic=msg, trajectory=traj)
    diagnostic = ""
    refined = False
    try:
        x_star, res = newton_refine(p, x_end)
        if res <= traj.final_residual and np.max(np.abs(x_star - x_end)) < max_shift:
            refined = True
        else:
            x_star, res = x_end.copy(), traj.final_residual
            diagnostic = "newton did not improve the integrator endpoint"
    except np.linalg.LinAlgError:
        x_star, res = x_end.copy(), traj.final_residual
        diagnostic = "singular jacobian during newton; kept integrator endpoint"
        log.debug("singular jacobian at %s", x_end)
    eig, stable = _stability(x_star, p)
    return Equilibrium(x_star, res, eig, stable, converged=True, refined=refined,
                       diagnostic=diagnostic, trajectory=traj)
