import math

import numpy as np
import pytest

from roacert.poly import linear_part
from roacert.vehicle import (
    MagicFormulaParams,
    ScenarioError,
    VEHICLE_STATE_SCALE,
    VehicleScenario,
    fit_cubic,
    fit_tires,
    full_vector_field,
    load_scenario,
    magic_formula,
    mf_peak,
    polynomial_vector_field,
    slip_angles,
    slip_limit,
)

OV_FRONT = MagicFormulaParams(B=14.50, C=1.89, D=9778.0, E=0.29)
OV_REAR = MagicFormulaParams(B=13.50, C=1.45, D=9234.0, E=0.31)
UN_FRONT = MagicFormulaParams(B=9.86, C=1.87, D=9778.0, E=0.28)
UN_REAR = MagicFormulaParams(B=18.75, C=1.53, D=9234.0, E=0.30)
ALL_AXLES = [OV_FRONT, OV_REAR, UN_FRONT, UN_REAR]


def make_scenario(name="un") -> VehicleScenario:
    front, rear, k, kd = {
        "un": (UN_FRONT, UN_REAR, 0.010, 0.008),
        "ov": (OV_FRONT, OV_REAR, 0.025, 0.004),
    }[name]
    return VehicleScenario(
        m=1400.0, J=2100.0, a1=1.2, a2=1.4, u=25.0, tau=0.2, T_prev=0.5,
        k=k, kd=kd, front=front, rear=rear,
    )


def test_magic_formula_zero():
    assert magic_formula(0.0, OV_FRONT) == 0.0


def test_magic_formula_small_angle_slope():
    # slope at the origin is B*C*D
    h = 1e-8
    slope = magic_formula(h, OV_FRONT) / h
    assert slope == pytest.approx(14.50 * 1.89 * 9778.0, rel=1e-5)
    assert slope == pytest.approx(2.6796e5, rel=1e-3)


def test_magic_formula_odd():
    rng = np.random.default_rng(0)
    alphas = rng.uniform(-1.0, 1.0, 100)
    for p in ALL_AXLES:
        assert np.allclose(magic_formula(-alphas, p), -magic_formula(alphas, p))


def test_slip_limit_below_peak():
    for p in ALL_AXLES:
        a_peak, _ = mf_peak(p)
        assert 0.0 < slip_limit(p) < a_peak


def test_slip_limit_bisection_oracle():
    # independent bisection on the OV front axle
    p = OV_FRONT
    a_peak, f_peak = mf_peak(p)
    lo, hi = 1e-9, a_peak
    for _ in range(60):  # far below 1e-8 rad
        mid = 0.5 * (lo + hi)
        if magic_formula(mid, p) < 0.95 * f_peak:
            lo = mid
        else:
            hi = mid
    alpha = slip_limit(p, 0.95)
    assert alpha == pytest.approx(0.5 * (lo + hi), abs=1e-8)
    assert magic_formula(alpha, p) / f_peak == pytest.approx(0.95, abs=1e-6)


@pytest.mark.parametrize("params", ALL_AXLES)
def test_slip_limit_ratio_all_axles(params):
    _, f_peak = mf_peak(params)
    alpha = slip_limit(params, 0.95)
    assert magic_formula(alpha, params) / f_peak == pytest.approx(0.95, abs=1e-6)


def test_slip_limit_invariant_to_force_scale():
    p2 = MagicFormulaParams(OV_FRONT.B, OV_FRONT.C, 2 * OV_FRONT.D, OV_FRONT.E)
    assert slip_limit(p2) == pytest.approx(slip_limit(OV_FRONT), abs=1e-10)


def test_fit_cubic_recovers_exact_cubic(monkeypatch):
    # feed an exactly-cubic "axle characteristic" through the fitting path
    import roacert.vehicle as veh

    c, d = 2.0e5, -3.0e7
    monkeypatch.setattr(
        veh, "magic_formula", lambda a, p: c * np.asarray(a) + d * np.asarray(a) ** 3
    )
    fit = fit_cubic(OV_FRONT, 0.06)
    assert fit.c1 == pytest.approx(c, rel=1e-9)
    assert fit.c3 == pytest.approx(d, rel=1e-9)


@pytest.mark.parametrize("params", ALL_AXLES)
def test_fit_cubic_residual_and_signs(params):
    alpha_max = slip_limit(params)
    fit = fit_cubic(params, alpha_max)
    _, f_peak = mf_peak(params)
    a = np.linspace(-alpha_max, alpha_max, 2001)
    resid = np.max(np.abs(fit.force(a) - magic_formula(a, params)))
    assert resid <= 0.05 * f_peak
    assert fit.c1 > 0 and fit.c3 < 0


def test_slip_angles_zero_state():
    s = make_scenario()
    assert slip_angles(np.zeros(7), s) == (0.0, 0.0)


def test_slip_angles_lateral_speed_only():
    s = make_scenario()
    state = np.zeros(7)
    state[0] = 1.0  # v
    af, ar = slip_angles(state, s)
    assert af == pytest.approx(-1.0 / 25.0)
    assert ar == pytest.approx(-1.0 / 25.0)


def test_slip_angles_pure_yaw():
    s = make_scenario()
    state = np.zeros(7)
    state[1] = 1.0  # r
    af, ar = slip_angles(state, s)
    assert af == pytest.approx(-1.2 / 25.0)
    assert ar == pytest.approx(1.4 / 25.0)


def test_full_field_origin_equilibrium():
    f = full_vector_field(make_scenario())
    assert np.allclose(f(np.zeros(7)), 0.0)


def test_full_field_odd():
    f = full_vector_field(make_scenario())
    rng = np.random.default_rng(1)
    for _ in range(25):
        x = rng.uniform(-0.5, 0.5, 7)
        assert np.allclose(f(-x), -f(x), atol=1e-12)


def test_poly_field_degree_three_and_odd():
    s = make_scenario()
    fpoly = polynomial_vector_field(s, fit_tires(s))
    assert fpoly.degree == 3
    assert fpoly.is_odd()
    assert np.allclose(fpoly(np.zeros(7)), 0.0)


@pytest.mark.parametrize("name", ["un", "ov"])
def test_linearization_stable_at_90kmh(name):
    s = make_scenario(name)
    for field in (polynomial_vector_field(s, fit_tires(s)),):
        A = linear_part(field)
        assert np.max(np.linalg.eigvals(A).real) < 0.0
    # the full field's Jacobian, via finite differences
    f = full_vector_field(s)
    h = 1e-7
    A = np.zeros((7, 7))
    for j in range(7):
        e = np.zeros(7)
        e[j] = h
        A[:, j] = (f(e) - f(-e)) / (2 * h)
    assert np.max(np.linalg.eigvals(A).real) < 0.0


def test_poly_field_linear_part_matches_own_jacobian():
    s = make_scenario()
    fpoly = polynomial_vector_field(s, fit_tires(s))
    A = linear_part(fpoly)
    h = 1e-6
    for j in range(7):
        e = np.zeros(7)
        e[j] = h
        col = (fpoly(e) - fpoly(-e)) / (2 * h)
        assert np.allclose(A[:, j], col, rtol=1e-6, atol=1e-9)


def test_poly_full_agreement_in_validity_region():
    # within 80% of the slip limits, |psi| <= 30 deg, |de| <= 5 deg the cubic
    # model stays within 2% scaled relative error of the full dynamics
    s = make_scenario()
    fits = fit_tires(s)
    fpoly = polynomial_vector_field(s, fits)
    ffull = full_vector_field(s)
    rng = np.random.default_rng(2)
    kept = 0
    while kept < 200:
        x = np.zeros(7)
        x[0] = rng.uniform(-3, 3)          # v
        x[1] = rng.uniform(-0.8, 0.8)      # r
        x[2] = rng.uniform(-3, 3)          # yG
        x[3] = rng.uniform(-np.pi / 6, np.pi / 6)  # psi
        x[4] = rng.uniform(-np.deg2rad(5), np.deg2rad(5))  # de
        x[5] = rng.uniform(-0.3, 0.3)
        x[6] = rng.uniform(-3, 3)
        af, ar = slip_angles(x, s)
        if abs(af) > 0.8 * fits[0].alpha_max or abs(ar) > 0.8 * fits[1].alpha_max:
            continue
        kept += 1
        scaled = lambda y: y / VEHICLE_STATE_SCALE
        err = np.linalg.norm(scaled(fpoly(x) - ffull(x)))
        ref = np.linalg.norm(scaled(ffull(x)))
        assert err <= 0.02 * ref


def test_steady_state_matches_pd_law():
    # freezing e and edot, the steering chain settles at de = -k e - kd edot
    s = make_scenario()
    e, edot = 0.7, -0.3
    target = -s.k * e - s.kd * edot
    c = 6.0 / s.tau**3
    # stationary point of the (de, de1, de2) chain with frozen inputs
    # de1 = 0, de2 = 0, and c*(-de - k e - kd edot) = 0
    de = -(s.k * e + s.kd * edot)
    assert de == pytest.approx(target)
    assert c * (-de - s.tau * 0 - 0.5 * s.tau**2 * 0 - s.k * e - s.kd * edot) == pytest.approx(0.0)


def test_scenario_files_load(tmp_path):
    import pathlib

    root = pathlib.Path(__file__).resolve().parents[1]
    s = load_scenario(str(root / "configs" / "un.cfg"))
    assert isinstance(s, VehicleScenario)
    assert s.u == pytest.approx(25.0)
    assert s.L_prev == pytest.approx(12.5)
    vdp = load_scenario(str(root / "configs" / "vdp.cfg"))
    assert vdp.mu == 1.0


def test_scenario_missing_key_named(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("model = vehicle\nBf = 10\n")
    with pytest.raises(ScenarioError) as exc:
        load_scenario(str(p))
    assert "Cf" in str(exc.value)


def test_scenario_unknown_key_rejected(tmp_path):
    import pathlib

    root = pathlib.Path(__file__).resolve().parents[1]
    text = (root / "configs" / "un.cfg").read_text() + "\nbogus = 1\n"
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ScenarioError) as exc:
        load_scenario(str(p))
    assert "bogus" in str(exc.value)
