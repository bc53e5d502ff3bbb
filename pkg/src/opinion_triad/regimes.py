"""Regime labels, the simulated kappa4 threshold and stability diagrams."""
from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .integrate import Equilibrium, SolverConfig, find_equilibrium
from .model import ModelParams, as_triad, to_rsx

__all__ = [
    "Regime",
    "RegimeLabel",
    "Thresholds",
    "IcPolicy",
    "GridSpec",
    "DiagramGrid",
    "Scenario",
    "NoMajorityRuleError",
    "UnresolvedError",
    "classify",
    "initial_condition",
    "kappa4_bracket",
    "kappa4_search",
    "stability_diagram",
    "bistability_probe",
    "scenario_presets",
    "get_preset",
]

log = logging.getLogger(__name__)


class Regime(str, enum.Enum):
    SHD = "SHD"
    MR = "MR"
    SLD = "SLD"
    UNRESOLVED = "UNRESOLVED"


class NoMajorityRuleError(ValueError):
    """Majority rule never appeared in a kappa scan."""


class UnresolvedError(RuntimeError):
    """An equilibrium needed for a decision did not converge."""


@dataclass(frozen=True)
class Thresholds:
    """Regime cut-offs as fractions of the bias gap delta_mu."""

    sigma_frac: float = 0.3
    r_frac: float = 0.6

    def __post_init__(self):
        for name in ("sigma_frac", "r_frac"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive fraction, got {v!r}")

    def as_dict(self) -> dict:
        return {"sigma_frac": self.sigma_frac, "r_frac": self.r_frac}


@dataclass(frozen=True)
class RegimeLabel:
    kind: Regime
    majority_pair: tuple[int, int] | None = None
    r_star: float = math.nan
    s_star: float = math.nan

    def __post_init__(self):
        if (self.kind is Regime.MR) != (self.majority_pair is not None):
            raise ValueError("majority_pair must be set exactly for MR labels")

    def __str__(self) -> str:
        if self.kind is Regime.MR:
            return f"MR({self.majority_pair[0]},{self.majority_pair[1]})"
        return self.kind.value

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "label": str(self),
            "majority_pair": list(self.majority_pair) if self.majority_pair else None,
            "r_star": self.r_star,
            "s_star": self.s_star,
        }


def classify(
    eq: Equilibrium,
    delta_mu: float,
    thresholds: Thresholds = Thresholds(),
) -> RegimeLabel:
    """Label an equilibrium by its asymmetry and discord relative to delta_mu.

    Large |s| means the centre sits with one end node (majority rule);
    s > 0 puts it next to node 1. Otherwise a discord that keeps most of
    delta_mu is high discord, and anything tighter is low discord.
    """
    if delta_mu <= 0:
        raise ValueError("delta_mu must be positive")
    rsx = to_rsx(eq.x_star)
    if not eq.converged:
        return RegimeLabel(Regime.UNRESOLVED, r_star=rsx.r, s_star=rsx.s)
    if abs(rsx.s) >= thresholds.sigma_frac * delta_mu:
        pair = (1, 2) if rsx.s > 0 else (2, 3)
        return RegimeLabel(Regime.MR, pair, rsx.r, rsx.s)
    if rsx.r >= thresholds.r_frac * delta_mu:
        return RegimeLabel(Regime.SHD, None, rsx.r, rsx.s)
    return RegimeLabel(Regime.SLD, None, rsx.r, rsx.s)


class IcPolicy(str, enum.Enum):
    BIAS_START = "bias-start"
    PERTURBED_CENTER = "perturbed-center"


CENTER_PERTURBATION = 1e-6


def initial_condition(p: ModelParams, policy: IcPolicy | None = None) -> np.ndarray:
    """Start at the natural biases; nudge the centre toward node 3 if asked.

    Without a policy, leaderless runs get the nudge (the symmetric state is
    otherwise invariant) and runs with a leader start at the biases.
    """
    if policy is None:
        policy = IcPolicy.BIAS_START if p.has_leader() else IcPolicy.PERTURBED_CENTER
    x = np.array(p.biases, dtype=float)
    if IcPolicy(policy) is IcPolicy.PERTURBED_CENTER:
        x[1] += CENTER_PERTURBATION
    return x


def _label_at(p: ModelParams, kappa: float, cfg: SolverConfig, policy, thresholds):
    q = p.with_kappa(kappa)
    eq = find_equilibrium(q, initial_condition(q, policy), cfg)
    return classify(eq, q.delta_mu(), thresholds), eq


@dataclass(frozen=True)
class Kappa4Bracket:
    lo: float
    hi: float
    probes: tuple[tuple[float, str], ...] = field(default=(), repr=False)

    @property
    def kappa4(self) -> float:
        return 0.5 * (self.lo + self.hi)


def kappa4_bracket(
    delta_mu: float,
    p: ModelParams,
    cfg: SolverConfig | None = None,
    tol: float = 0.005,
    ic_policy: IcPolicy | None = None,
    thresholds: Thresholds = Thresholds(),
    kappa_start: float = 1.0,
    kappa_cap: float = 4096.0,
) -> Kappa4Bracket:
    """Bracket the largest kappa with a majority-rule outcome.

    Doubling scan from ``kappa_start`` until a majority-rule probe is
    followed by a non-MR one, then bisection down to width ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    cfg = cfg or SolverConfig()
    q = p.with_delta_mu(delta_mu)
    probes: list[tuple[float, str]] = []

    def probe(kappa: float) -> bool:
        label, eq = _label_at(q, kappa, cfg, ic_policy, thresholds)
        probes.append((kappa, str(label)))
        if label.kind is Regime.UNRESOLVED:
            raise UnresolvedError(
                f"unresolved equilibrium at delta_mu={delta_mu:g}, kappa={kappa:g}: "
                f"{eq.diagnostic}")
        return label.kind is Regime.MR

    last_mr = None
    kappa = kappa_start
    lo = hi = None
    while kappa <= kappa_cap:
        if probe(kappa):
            last_mr = kappa
        elif last_mr is not None:
            lo, hi = last_mr, kappa
            break
        kappa *= 2.0
    if lo is None:
        if last_mr is None:
            raise NoMajorityRuleError(
                f"no majority rule for delta_mu={delta_mu:g} at kappa in "
                f"[{kappa_start:g}, {kappa_cap:g}] (probes: {probes})")
        raise NoMajorityRuleError(
            f"majority rule persists up to kappa_cap={kappa_cap:g} at delta_mu={delta_mu:g}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return Kappa4Bracket(lo, hi, tuple(probes))


def kappa4_search(
    delta_mu: float,
    p: ModelParams,
    cfg: SolverConfig | None = None,
    tol: float = 0.005,
    **kwargs,
) -> float:
    """Simulated threshold above which majority rule no longer occurs."""
    return kappa4_bracket(delta_mu, p, cfg, tol, **kwargs).kappa4


@dataclass(frozen=True)
class GridSpec:
    dmu_axis: tuple[float, ...]
    kappa_axis: tuple[float, ...]

    def __post_init__(self):
        for name in ("dmu_axis", "kappa_axis"):
            axis = tuple(float(v) for v in getattr(self, name))
            if not axis or any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError(f"{name} must be non-empty and strictly increasing")
            object.__setattr__(self, name, axis)

    @classmethod
    def from_ranges(cls, dmu: tuple[float, float, int], kappa: tuple[float, float, int]):
        def axis(lo, hi, n):
            return tuple(np.linspace(lo, hi, int(n))) if int(n) > 1 else (float(lo),)
        return cls(axis(*dmu), axis(*kappa))


@dataclass(frozen=True)
class DiagramGrid:
    dmu_axis: tuple[float, ...]
    kappa_axis: tuple[float, ...]
    labels: tuple[tuple[RegimeLabel, ...], ...]  # labels[i][j] at (dmu_i, kappa_j)
    ic_policy: IcPolicy | None
    thresholds: Thresholds = Thresholds()

    def label_strings(self) -> list[list[str]]:
        return [[str(lb) for lb in row] for row in self.labels]


def _diagram_cell(args) -> RegimeLabel:
    p, dmu, kappa, cfg, policy, thresholds = args
    q = p.with_delta_mu(dmu).with_kappa(kappa)
    eq = find_equilibrium(q, initial_condition(q, policy), cfg)
    return classify(eq, dmu, thresholds)


def stability_diagram(
    grid: GridSpec,
    p: ModelParams,
    cfg: SolverConfig | None = None,
    ic_policy: IcPolicy | None = None,
    thresholds: Thresholds = Thresholds(),
    workers: int = 1,
) -> DiagramGrid:
    """Classify the equilibrium reached at every (delta_mu, kappa) cell.

    Cells are independent; with ``workers > 1`` they run in a process pool
    and are merged back in index order, so the grid does not depend on
    scheduling.
    """
    cfg = cfg or SolverConfig()
    tasks = [(p, d, k, cfg, ic_policy, thresholds)
             for d in grid.dmu_axis for k in grid.kappa_axis]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_diagram_cell, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        flat = [_diagram_cell(t) for t in tasks]
    nk = len(grid.kappa_axis)
    rows = tuple(tuple(flat[i * nk:(i + 1) * nk]) for i in range(len(grid.dmu_axis)))
    n_bad = sum(lb.kind is Regime.UNRESOLVED for lb in flat)
    if n_bad:
        log.warning("%d of %d diagram cells unresolved", n_bad, len(flat))
    return DiagramGrid(grid.dmu_axis, grid.kappa_axis, rows, ic_policy, thresholds)


def bistability_probe(
    delta_mu: float,
    kappa: float,
    p: ModelParams,
    ic_set: Sequence[Sequence[float]],
    cfg: SolverConfig | None = None,
    thresholds: Thresholds = Thresholds(),
    radius: float = 1e-4,
) -> list[tuple[Equilibrium, RegimeLabel]]:
    """Distinct converged equilibria reached from several initial conditions.

    Equilibria closer than ``radius`` (sup-norm) count as one; the first
    occurrence in ``ic_set`` order is kept.
    """
    if not ic_set:
        raise ValueError("ic_set must not be empty")
    cfg = cfg or SolverConfig()
    q = p.with_delta_mu(delta_mu).with_kappa(kappa)
    found: list[tuple[Equilibrium, RegimeLabel]] = []
    n_resolved = 0
    for ic in ic_set:
        eq = find_equilibrium(q, as_triad(ic), cfg)
        if not eq.converged:
            log.info("bistability probe from %s unresolved: %s", list(ic), eq.diagnostic)
            continue
        n_resolved += 1
        if any(np.max(np.abs(eq.x_star - e.x_star)) <= radius for e, _ in found):
            continue
        found.append((eq, classify(eq, delta_mu, thresholds)))
    if n_resolved == 0:
        raise UnresolvedError("no initial condition reached an equilibrium")
    return found


@dataclass(frozen=True)
class Scenario:
    name: str
    params: ModelParams
    x_init: tuple[float, float, float]
    cfg: SolverConfig
    description: str

    @property
    def delta_mu(self) -> float:
        return self.params.delta_mu()


def _triad(delta_mu: float, kappa: float, leaders=(0.0, 0.0, 0.0), x0: float = 0.0) -> ModelParams:
    c1, c2, c3 = leaders
    return ModelParams(kappa=kappa, c1=c1, c2=c2, c3=c3, x0=x0,
                       mu1=-delta_mu / 2, mu2=0.0, mu3=delta_mu / 2)


def scenario_presets() -> list[Scenario]:
    """Parameter bundles for the published figure panels (fig1a ... fig5b)."""
    cfg = SolverConfig()
    dmu = 5.0
    bias = (-2.5, 0.0, 2.5)
    nudged = (-2.5, CENTER_PERTURBATION, 2.5)
    out = []
    for tag, k in zip("abc", (1.0, 1.5, 3.0)):
        out.append(Scenario(f"fig1{tag}", _triad(dmu, k), nudged, cfg,
                            f"leaderless chain, kappa={k:g}, centre nudged by 1e-6"))
    for tag, k in zip("abc", (0.5, 1.5, 14.0)):
        out.append(Scenario(f"fig2{tag}", _triad(dmu, k, (0.05, 0.0, -0.05), 4.0), bias, cfg,
                            f"leader pulls node 1, repels node 3; C=0.05, x0=4, kappa={k:g}"))
    for tag, k in zip("abc", (1.0, 1.5, 4.0)):
        out.append(Scenario(f"fig4{tag}", _triad(dmu, k, (0.2, 0.2, 0.2), 8.0), bias, cfg,
                            f"leader pulls all nodes; C=0.2, x0=8, kappa={k:g}"))
    out.append(Scenario("fig5a", _triad(dmu, 14.0, (4.0, 0.0, 4.0), 4.0), bias, cfg,
                        "strong pull on both end nodes; C1=C3=4, x0=4, kappa=14"))
    out.append(Scenario("fig5b", _triad(dmu, 1.5, (0.19, 0.0, -0.19), 4.0), bias, cfg,
                        "C1=-C3=0.19, x0=4, kappa=1.5; majority rule then low discord"))
    return out


def get_preset(name: str) -> Scenario:
    presets = {s.name: s for s in scenario_presets()}
    try:
        return presets[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(presets))}") from None
