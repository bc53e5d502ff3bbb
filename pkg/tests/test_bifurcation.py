import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from opinion_triad.bifurcation import (
    BoundaryCurve,
    BoundaryKind,
    NoRootError,
    SingularExpansionError,
    boundary_curves,
    cubic_discriminant,
    kappa1,
    kappa1_condition,
    kappa2,
    kappa2_residuals,
    kappa2_root,
    kappa3,
    kappa3_residuals,
    kappa3_root,
    normal_form,
    theta_shd,
)
from opinion_triad.model import DerivConvention, ModelParams, composite_deriv, coupling

import oracles

FIG = dict(c=0.05, x0=4.0)
CONVS = list(DerivConvention)


def fig_params(dmu=5.0, kappa=1.0, **kw):
    return ModelParams.canonical(dmu, kappa, **{**FIG, **kw})


# --- cubic discriminant -------------------------------------------------------

@pytest.mark.parametrize("coeffs, expected", [
    ((1, 0, -1, 0), 4.0),
    ((1, 0, 0, 0), 0.0),
    ((1, 0, 1, 0), -4.0),
])
def test_discriminant_examples(coeffs, expected):
    assert cubic_discriminant(*coeffs) == expected


def test_discriminant_rejects_non_cubic():
    with pytest.raises(ValueError):
        cubic_discriminant(0, 1, 2, 3)


def test_discriminant_against_root_counter():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 1000:
        a, b, c, d = rng.uniform(-10, 10, 4)
        disc = cubic_discriminant(a, b, c, d)
        if abs(disc) < 1e-9:
            continue
        assert oracles.count_real_roots(a, b, c, d) == (3 if disc > 0 else 1)
        checked += 1


# --- theta and the normal form -------------------------------------------------------

def test_theta_without_interaction_or_leader():
    assert theta_shd(5.0, ModelParams.canonical(5.0, 0.0)) == 0.0


def test_theta_leaderless_example():
    p = ModelParams.canonical(5.0, 1.0)
    expected = -2 * coupling(2.5) / (1 + composite_deriv(5.0, 1))
    assert theta_shd(5.0, p, DerivConvention.COMPOSITE) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("conv", CONVS)
def test_theta_negative_with_upward_leader(conv):
    for dmu in np.linspace(4, 8, 41):
        assert theta_shd(dmu, fig_params(dmu, 1.0), conv) < 0


def test_theta_singular():
    # pick kappa so that 1 + kappa h'(dmu/2) = 0 exactly
    dmu = 5.0
    kappa = -1.0 / composite_deriv(dmu, 1)
    with pytest.raises(SingularExpansionError):
        theta_shd(dmu, fig_params(dmu, kappa), DerivConvention.COMPOSITE)


def test_theta_rejects_other_leader_patterns():
    with pytest.raises(ValueError):
        theta_shd(5.0, ModelParams(kappa=1.0, c1=0.1, c2=0.1, c3=0.1))


@pytest.mark.parametrize("conv", CONVS)
@settings(max_examples=200)
@given(st.floats(1.0, 8.0), st.floats(0.1, 10), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(-3, 3))
def test_normal_form_round_trip(conv, r, kappa, nu, c, s):
    p = ModelParams.canonical(5.0, kappa + abs(nu), c=c, x0=1.0, nu=nu)
    composite = conv is DerivConvention.COMPOSITE
    k3 = 3 * p.kappa - p.nu
    d3 = oracles.hderiv(r / 2, 3, composite)
    if abs(k3 * d3) < 1e-6:
        return
    nf = normal_form(r, p, conv)
    taylor = c * r - (1 + k3 * oracles.hderiv(r / 2, 1, composite)) * s - k3 * d3 * s ** 3 / 24
    assert nf.tau_scale * nf.rhs(s) == pytest.approx(taylor, rel=1e-9, abs=1e-9)


def test_normal_form_leaderless_is_pitchfork():
    p = ModelParams.canonical(5.0, 1.0)
    nf = normal_form(5.0, p, DerivConvention.TRUE_DERIVATIVE)
    assert nf.A == 0.0
    assert nf.R > 0
    roots = np.sort(np.roots([-1.0, 0.0, nf.R, nf.A]).real)
    np.testing.assert_allclose(roots, [-math.sqrt(nf.R), 0.0, math.sqrt(nf.R)], atol=1e-12)
    assert nf.discriminant() > 0


def test_normal_form_vanishing_scale():
    with pytest.raises(SingularExpansionError):
        normal_form(5.0, ModelParams.canonical(5.0, 1.0, nu=3.0), DerivConvention.COMPOSITE)


# --- kappa1 -------------------------------------------------------------------------

@pytest.mark.parametrize("conv", CONVS)
def test_kappa1_residual_small(conv):
    for dmu in np.linspace(4, 7, 31):
        p = fig_params(dmu)
        k = kappa1(dmu, p, conv)
        assert abs(kappa1_condition(k, dmu, p, conv)) < 1e-10


@pytest.mark.parametrize("conv", CONVS)
def test_kappa1_matches_sign_scan(conv):
    k = kappa1(5.0, fig_params(), conv)
    cell = oracles.kappa1_sign_scan(5.0, 0.05, 4.0, composite=conv is DerivConvention.COMPOSITE)
    assert cell is not None
    assert cell[0] - 1e-9 <= k <= cell[1] + 1e-9


@pytest.mark.parametrize("conv", CONVS)
@pytest.mark.parametrize("dmu", [4.5, 5.0, 6.0])
def test_kappa1_leaderless_limit(conv, dmu):
    # with C = 0 the theta shift from the coupling term is still present
    expected = oracles.kappa1_leaderless(dmu, composite=conv is DerivConvention.COMPOSITE)
    got = kappa1(dmu, ModelParams.canonical(dmu, 1.0, c=1e-8, x0=4.0), conv)
    assert got == pytest.approx(expected, abs=1e-3)


@pytest.mark.xfail(strict=True, reason="theta does not vanish at C = 0; see the decision ledger")
def test_kappa1_leaderless_limit_without_theta():
    dmu = 5.0
    naive = -1.0 / (3.0 * composite_deriv(dmu, 1))
    got = kappa1(dmu, ModelParams.canonical(dmu, 1.0, c=1e-8, x0=4.0), DerivConvention.COMPOSITE)
    assert got == pytest.approx(naive, abs=1e-3)


def test_kappa1_no_root():
    with pytest.raises(NoRootError) as info:
        kappa1(5.0, fig_params(), bracket=(0.05, 0.1), n_probe=5)
    assert info.value.bracket == (0.05, 0.1)


def test_kappa1_conventions_differ():
    p = fig_params()
    a = kappa1(5.0, p, DerivConvention.COMPOSITE)
    b = kappa1(5.0, p, DerivConvention.TRUE_DERIVATIVE)
    assert a > 0 and b > 0 and a != b


# --- kappa2 and kappa3 ------------------------------------------------------------

@pytest.mark.parametrize("dmu", np.linspace(2.5, 12, 20))
def test_kappa2_leaderless_identity(dmu):
    assert kappa2(dmu, 0.0, 4.0) == pytest.approx(oracles.kappa2_leaderless(dmu), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("dmu", np.linspace(2.5, 12, 20))
def test_kappa3_leaderless_identity(dmu):
    assert kappa3(dmu, 0.0, 4.0, 0.0) == pytest.approx(oracles.kappa3_leaderless(dmu), rel=1e-12, abs=1e-12)


def test_kappa2_symbolic_path():
    dmu, c, x0 = sp.symbols("dmu c x0", positive=True)
    a = (8 + 11 * c) * dmu
    s = sp.Rational(3, 2) + 12 / a
    expr = (a / (6 * (a + 8)) * (dmu + sp.Rational(11, 8) * c * dmu - 16 / a - 2 * c * x0 - 2)
            * sp.exp(sp.Rational(2, 9) * s ** 2))
    simplified = sp.simplify(expr)
    value = float(simplified.subs({dmu: 5, c: sp.Rational(1, 20), x0: 4}).evalf(30))
    assert kappa2(5.0, 0.05, 4.0) == pytest.approx(value, rel=1e-13)


def test_kappa2_closed_form_equals_value_equation():
    for dmu in (5.0, 6.0, 9.0):
        s = kappa2_root(dmu, 0.05)
        direct = (dmu + 11 * 0.05 / 8 * dmu - 4 * s / 3 - 2 * 0.05 * 4) / (4 * s) * math.exp(2 * s * s / 9)
        assert kappa2(dmu, 0.05, 4.0) == pytest.approx(direct, rel=1e-12)


def test_kappa3_closed_form_equals_balance():
    for dmu, nu in ((5.0, 0.0), (8.0, 0.3)):
        r = kappa3_root(dmu)
        direct = -(r + 2 * 0.05 * 4 - dmu) / r * math.exp(r * r / 8) - nu
        assert kappa3(dmu, 0.05, 4.0, nu) == pytest.approx(direct, rel=1e-12)


def test_boundary_input_validation():
    for fn in (lambda: kappa2(0.0, 0.05, 4.0), lambda: kappa3(-1.0, 0.05, 4.0),
               lambda: kappa2(float("nan"), 0.05, 4.0)):
        with pytest.raises(ValueError):
            fn()


def _monotone_decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


def test_kappa2_residuals_decay():
    dmus = (6.0, 8.0, 10.0, 12.0)
    rows = []
    for dmu in dmus:
        s, k = kappa2_root(dmu, 0.05), kappa2(dmu, 0.05, 4.0)
        ref = oracles.kappa2_system(s, k, dmu, 0.05, 4.0)
        np.testing.assert_allclose(kappa2_residuals(s, k, dmu, 0.05, 4.0), ref, rtol=1e-12, atol=1e-12)
        rows.append(ref)
    assert _monotone_decreasing([max(abs(v) for v in row) for row in rows])
    assert _monotone_decreasing([abs(row[1]) for row in rows])
    assert _monotone_decreasing([abs(row[2]) for row in rows])


def test_kappa3_residuals_decay():
    rows = []
    for dmu in (6.0, 8.0, 10.0, 12.0):
        r, k = kappa3_root(dmu), kappa3(dmu, 0.05, 4.0)
        ref = oracles.kappa3_system(r, k, dmu, 0.05, 4.0)
        np.testing.assert_allclose(kappa3_residuals(r, k, dmu, 0.05, 4.0), ref, rtol=1e-12, atol=1e-12)
        rows.append(ref)
    assert _monotone_decreasing([max(abs(v) for v in row) for row in rows])
    assert _monotone_decreasing([abs(row[1]) for row in rows])
    assert _monotone_decreasing([abs(row[2]) for row in rows])


def test_kappa3_system_at_large_gap():
    r, k = kappa3_root(10.0), kappa3(10.0, 0.05, 4.0)
    balance, linear, _ = oracles.kappa3_system(r, k, 10.0, 0.05, 4.0)
    assert abs(balance) < 1e-12
    # the linear coefficient is only asymptotically zero
    assert abs(linear) < 0.3


def test_printed_value_coefficient_does_not_decay():
    # the 11C/3 drift coefficient is inconsistent with the kappa2 closed form
    res = []
    for dmu in (6.0, 8.0, 10.0, 12.0):
        s, k = kappa2_root(dmu, 0.05), kappa2(dmu, 0.05, 4.0)
        g = math.exp(-2 * s * s / 9)
        res.append(abs(4 * s / 3 - (1 + 11 * 0.05 / 3) * dmu + 2 * 0.05 * 4 + 4 * k * s * g))
    assert not _monotone_decreasing(res)


# --- curves ----------------------------------------------------------------------

@pytest.mark.parametrize("conv", CONVS)
def test_boundary_curves_shape(conv):
    curves = boundary_curves((3.5, 7.0, 50), fig_params(), conv)
    assert [c.kind for c in curves] == [BoundaryKind.K1, BoundaryKind.K2, BoundaryKind.K3]
    for cv in curves:
        assert len(cv.points) >= 40
        assert np.all(np.diff(cv.dmu) > 0)
        assert np.all(np.isfinite(cv.kappa))
        assert cv.params["convention"] == conv.value


def test_boundary_curves_leaderless_match_special_cases():
    curves = {c.kind: c for c in boundary_curves((3.5, 7.0, 15), ModelParams.canonical(5.0, 1.0))}
    for d, k in curves[BoundaryKind.K2].points:
        assert k == pytest.approx(oracles.kappa2_leaderless(d), rel=1e-12)
    for d, k in curves[BoundaryKind.K3].points:
        assert k == pytest.approx(oracles.kappa3_leaderless(d), rel=1e-12)


@pytest.mark.parametrize("kind", [BoundaryKind.K2, BoundaryKind.K3])
def test_boundary_continuity(kind):
    curve = {c.kind: c for c in boundary_curves((3.5, 7.0, 50), fig_params())}[kind]
    jumps = np.abs(np.diff(curve.kappa))
    for i in range(1, len(jumps) - 1):
        assert jumps[i] <= 10 * max(jumps[i - 1], jumps[i + 1])


def test_boundary_curve_validation():
    with pytest.raises(ValueError):
        BoundaryCurve(BoundaryKind.K2, ((5.0, 1.0), (4.0, 2.0)), {})
    with pytest.raises(ValueError):
        BoundaryCurve(BoundaryKind.K2, ((4.0, float("inf")),), {})


def test_boundary_curves_bad_range():
    with pytest.raises(ValueError):
        boundary_curves((7.0, 3.5, 10), fig_params())
    with pytest.raises(ValueError):
        boundary_curves((3.5, 7.0, 1), fig_params())
