"""One test per acceptance criterion; the summary prints a PASS/FAIL line for each."""
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from opinion_triad.bifurcation import (
    cubic_discriminant,
    kappa1,
    kappa1_condition,
    kappa2,
    kappa2_root,
    kappa3,
    kappa3_root,
)
from opinion_triad.integrate import SolverConfig, find_equilibrium, integrate
from opinion_triad.model import (
    DerivConvention,
    ModelParams,
    from_rsx,
    jacobian_chain3,
    rhs_chain3,
    rsx_rhs,
    to_rsx,
)
from opinion_triad.regimes import (
    GridSpec,
    Regime,
    classify,
    get_preset,
    kappa4_search,
    stability_diagram,
)

import oracles

KAPPA4_REFERENCE = [7.19, 9.08, 11.51, 14.63, 18.65, 23.84, 30.58, 39.33, 50.76, 65.72]
DMU_ROWS = [round(5.0 + 0.1 * i, 1) for i in range(10)]


def _labels(names):
    out = {}
    for name in names:
        sc = get_preset(name)
        eq = find_equilibrium(sc.params, sc.x_init, sc.cfg)
        assert eq.converged, f"{name}: {eq.diagnostic}"
        out[name] = (classify(eq, sc.delta_mu), eq)
    return out


def _kappa4_row(dmu):
    return kappa4_search(dmu, ModelParams.canonical(dmu, 1.0, c=0.05, x0=4.0), tol=0.005)


def test_c1_kappa4_reference_values():
    with ProcessPoolExecutor(max_workers=4) as pool:
        values = list(pool.map(_kappa4_row, DMU_ROWS))
    for dmu, got, ref in zip(DMU_ROWS, values, KAPPA4_REFERENCE):
        print(f"dmu={dmu:.1f} kappa4={got:.4f} reference={ref:.2f} rel={(got - ref) / ref:+.4f}")
    for got, ref in zip(values, KAPPA4_REFERENCE):
        assert abs(got - ref) <= 0.05 * ref
    assert all(b > a for a, b in zip(values, values[1:]))


def test_c2_leaderless_regimes():
    got = _labels(["fig1a", "fig1b", "fig1c"])
    assert get_preset("fig1a").x_init[1] == 1e-6
    assert [got[n][0].kind for n in ("fig1a", "fig1b", "fig1c")] == [Regime.SHD, Regime.MR, Regime.SLD]


def test_c3_antisymmetric_leader_regimes():
    got = _labels(["fig2a", "fig2b", "fig2c"])
    assert [got[n][0].kind for n in ("fig2a", "fig2b", "fig2c")] == [Regime.SHD, Regime.MR, Regime.SLD]
    assert got["fig2b"][0].majority_pair == (1, 2)


def test_c4_uniform_leader_regimes():
    got = _labels(["fig4a", "fig4b", "fig4c"])
    assert [got[n][0].kind for n in ("fig4a", "fig4b", "fig4c")] == [Regime.SHD, Regime.MR, Regime.SLD]
    for name in ("fig4a", "fig4b", "fig4c"):
        assert got[name][1].x_star.mean() > 0


def test_c5_transient_majority():
    sc = get_preset("fig5b")
    assert sc.params.leaders == (0.19, 0.0, -0.19) and sc.params.kappa == 1.5
    traj = integrate(sc.params, sc.x_init, sc.cfg)
    peak = np.max(np.abs(traj.rsx()[:, 1]))
    label = classify(find_equilibrium(sc.params, sc.x_init, sc.cfg), sc.delta_mu)
    print(f"max |s| = {peak:.4f}, final label {label}")
    assert peak >= 1.5
    assert label.kind is Regime.SLD


def test_c6_structural_identities():
    rng = np.random.default_rng(2024)
    # (a) round trip
    xs = rng.uniform(-10, 10, size=(10_000, 3))
    worst = max(np.max(np.abs(from_rsx(*to_rsx(x).as_tuple()) - x)) for x in xs)
    assert worst <= 1e-14
    # (b) push-forward
    worst = 0.0
    for _ in range(1000):
        x = rng.uniform(-6, 6, 3)
        p = ModelParams.canonical(rng.uniform(0.5, 8), rng.uniform(0, 10), c=rng.uniform(-1, 1),
                                  x0=rng.uniform(-8, 8), nu=rng.uniform(-0.5, 0.5))
        f = rhs_chain3(x, p)
        pushed = np.array([f[2] - f[0], f[2] - 2 * f[1] + f[0], f.mean()])
        worst = max(worst, np.max(np.abs(np.array(rsx_rhs(to_rsx(x), p)) - pushed)))
    assert worst <= 1e-10
    # (c) Jacobian
    for _ in range(100):
        x = rng.uniform(-4, 4, 3)
        p = ModelParams(kappa=rng.uniform(0, 5), nu=rng.uniform(-1, 1), c1=rng.uniform(-1, 1),
                        c2=rng.uniform(-1, 1), c3=rng.uniform(-1, 1), x0=rng.uniform(-5, 5))
        fd = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1e-5
            fd[:, k] = (rhs_chain3(x + e, p) - rhs_chain3(x - e, p)) / 2e-5
        j = jacobian_chain3(x, p)
        assert np.max(np.abs(j - fd)) / max(1.0, np.max(np.abs(j))) <= 1e-6
    # (d) symmetric leaderless trajectories
    for nu, a, method in ((0.0, 2.5, "rk45"), (0.4, 1.0, "rk45"), (-0.3, 4.0, "rk4")):
        p = ModelParams.canonical(5.0, 1.7, nu=nu)
        traj = integrate(p, (-a, 0.0, a), SolverConfig(method=method, t_max=100.0))
        assert np.max(np.abs(traj.x[:, 1])) <= 1e-9
        assert np.max(np.abs(traj.x[:, 0] + traj.x[:, 2])) <= 1e-9


def test_c7_discriminant_oracle():
    rng = np.random.default_rng(99)
    checked = 0
    while checked < 1000:
        a, b, c, d = rng.uniform(-10, 10, 4)
        disc = cubic_discriminant(a, b, c, d)
        if abs(disc) < 1e-9:
            continue
        assert oracles.count_real_roots(a, b, c, d) == (3 if disc > 0 else 1)
        checked += 1


def test_c8_boundary_self_consistency():
    # (a) kappa1 satisfies its own equation on [4, 7]
    for conv in DerivConvention:
        for dmu in np.linspace(4, 7, 31):
            p = ModelParams.canonical(dmu, 1.0, c=0.05, x0=4.0)
            k = kappa1(dmu, p, conv)
            assert abs(kappa1_condition(k, dmu, p, conv)) < 1e-10
    # (b) leaderless reductions
    for dmu in np.linspace(2.5, 12, 39):
        assert kappa2(dmu, 0.0, 4.0) == pytest.approx(oracles.kappa2_leaderless(dmu), rel=1e-12, abs=1e-12)
        assert kappa3(dmu, 0.0, 4.0, 0.0) == pytest.approx(oracles.kappa3_leaderless(dmu), rel=1e-12, abs=1e-12)
    # (c) residual decay of the asymptotic roots
    k2_res, k3_res = [], []
    for dmu in (6.0, 8.0, 10.0, 12.0):
        s = kappa2_root(dmu, 0.05)
        k2_res.append(oracles.kappa2_system(s, kappa2(dmu, 0.05, 4.0), dmu, 0.05, 4.0))
        r = kappa3_root(dmu)
        k3_res.append(oracles.kappa3_system(r, kappa3(dmu, 0.05, 4.0), dmu, 0.05, 4.0))
    for rows in (k2_res, k3_res):
        print("residuals:", [tuple(f"{v:.3g}" for v in row) for row in rows])
        norms = [max(abs(v) for v in row) for row in rows]
        assert all(b < a for a, b in zip(norms, norms[1:]))
        for col in (1, 2):
            series = [abs(row[col]) for row in rows]
            assert all(b < a for a, b in zip(series, series[1:]))


def test_c9_determinism(run_cli, tmp_path):
    p = ModelParams.canonical(5.0, 1.0, c=0.05, x0=4.0)
    spec = GridSpec((4.5, 5.5, 6.5), (0.5, 1.5, 4.0, 12.0))
    first = stability_diagram(spec, p)
    assert stability_diagram(spec, p) == first
    assert stability_diagram(spec, p, workers=3) == first

    def snapshot(d):
        return {f.name: f.read_bytes() for f in sorted(d.iterdir())} if d.exists() else {}

    commands = {
        "simulate": ("simulate", "--preset", "fig2b", "--plot"),
        "simulate-json": ("simulate", "--preset", "fig5b", "--format", "json"),
        "boundaries": ("boundaries", "--dmu", "4:7:13", "--c", "0.05", "--x0", "4"),
        "diagram": ("diagram", "--dmu", "4.5:6.5:3", "--kappa", "0.5:12:4", "--c", "0.05", "--x0", "4"),
        "kappa4": ("kappa4", "--dmu-list", "5,5.1", "--c", "0.05", "--x0", "4"),
        "classify": ("classify", "--preset", "fig2b"),
    }
    parallel = {"diagram", "kappa4"}
    for name, args in commands.items():
        outs = []
        variants = [(), ()] + ([("--workers", "3")] if name in parallel else [])
        for i, extra in enumerate(variants):
            d = tmp_path / name / str(i)
            code, stdout, _ = run_cli(*args, *extra, "--outdir", d)
            assert code == 0
            outs.append((snapshot(d), stdout.replace(str(d), "<dir>")))
        assert all(o == outs[0] for o in outs[1:]), name
