"""Vehicle-with-driver models: full nonlinear and degree-3 polynomial forms.

Seven states: lateral speed v, yaw rate r, lateral displacement yG, yaw angle
psi, steering angle de, steering rate de1, steering angular acceleration de2.
A single-track chassis at fixed longitudinal speed u is closed in a loop with
a delayed preview-tracking PD steering law; the delay enters through a
third-order chain on the steering states. Axle forces follow the Magic
Formula; the polynomial variant replaces them with odd cubic range fits and
the trigonometric terms with low-order series (cos de -> 1,
sin psi -> psi - psi^3/6, cos psi -> 1 - psi^2/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .poly import Polynomial, PolyVectorField, VarSet
from .systems import VdpScenario

VEHICLE_STATES = ("v", "r", "yG", "psi", "de", "de1", "de2")
VEHICLE_VARSET = VarSet(VEHICLE_STATES)

# characteristic state magnitudes used for scaled norms (documented defaults)
VEHICLE_STATE_SCALE = np.array([5.0, 1.0, 5.0, 1.0, 0.1, 1.0, 10.0])

SCENARIO_KEYS = (
    "Bf", "Cf", "Df", "Ef", "Br", "Cr", "Dr", "Er",
    "k", "kd", "u_kmh", "tau", "T_prev", "m", "J", "a1", "a2",
)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class MagicFormulaParams:
    B: float
    C: float
    D: float  # peak force scale, N
    E: float

    def __post_init__(self):
        if self.B <= 0 or self.D <= 0:
            raise ScenarioError("magic formula requires B > 0 and D > 0")


def magic_formula(alpha, params: MagicFormulaParams):
    """Lateral axle force at slip angle alpha (odd in alpha). Accepts arrays."""
    B, C, D, E = params.B, params.C, params.D, params.E
    Ba = B * np.asarray(alpha, dtype=float) if np.ndim(alpha) else B * alpha
    inner = Ba - E * (Ba - np.arctan(Ba))
    return D * np.sin(C * np.arctan(inner))


def mf_peak(params: MagicFormulaParams) -> tuple[float, float]:
    """(alpha_peak, peak force) of the Magic Formula for alpha > 0."""
    # bracket the peak with a coarse scan, then refine
    grid = np.linspace(1e-4, 1.5, 400)
    vals = magic_formula(grid, params)
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(
        lambda a: -magic_formula(a, params), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x), float(-res.fun)


def slip_limit(params: MagicFormulaParams, fraction: float = 0.95) -> float:
    """Smallest alpha > 0 where the force reaches `fraction` of its peak.

    The force is strictly increasing up to the peak, so the root is bracketed
    in (0, alpha_peak).
    """
    if not 0.0 < fraction < 1.0:
        raise ScenarioError("fraction must lie in (0, 1)")
    a_peak, f_peak = mf_peak(params)
    target = fraction * f_peak
    f = lambda a: magic_formula(a, params) - target
    if f(1e-12) > 0:
        raise ScenarioError("could not bracket the slip limit")
    return float(brentq(f, 1e-12, a_peak, xtol=1e-12, rtol=1e-14))


@dataclass(frozen=True)
class TireFit:
    """Odd cubic range fit c1*alpha + c3*alpha^3, valid on |alpha| <= alpha_max."""

    c1: float
    c3: float
    alpha_max: float

    def force(self, alpha):
        return self.c1 * alpha + self.c3 * alpha**3


def fit_cubic(params: MagicFormulaParams, alpha_max: float, n_samples: int = 1001) -> TireFit:
    """Unweighted least-squares odd cubic over [-alpha_max, alpha_max]."""
    if alpha_max <= 0:
        raise ScenarioError("alpha_max must be positive")
    a = np.linspace(-alpha_max, alpha_max, n_samples)
    target = magic_formula(a, params)
    basis = np.stack([a, a**3], axis=1)
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
    return TireFit(c1=float(coef[0]), c3=float(coef[1]), alpha_max=float(alpha_max))


@dataclass(frozen=True)
class VehicleScenario:
    m: float      # kg
    J: float      # kg m^2
    a1: float     # m, CoG to front axle
    a2: float     # m, CoG to rear axle
    u: float      # m/s
    tau: float    # s, steering delay
    T_prev: float  # s, preview time
    k: float      # 1/m
    kd: float     # s/m
    front: MagicFormulaParams
    rear: MagicFormulaParams
    y_ref: float = 0.0  # straight reference path

    def __post_init__(self):
        if self.u <= 0 or self.tau <= 0 or self.a1 <= 0 or self.a2 <= 0:
            raise ScenarioError("u, tau, a1, a2 must be positive")

    @property
    def L_prev(self) -> float:
        # lookahead distance of the preview point (u * T_prev, in meters)
        return self.u * self.T_prev

    @property
    def varset(self) -> VarSet:
        return VEHICLE_VARSET

    @classmethod
    def from_mapping(cls, data: dict) -> "VehicleScenario":
        missing = [k for k in SCENARIO_KEYS if k not in data]
        if missing:
            raise ScenarioError(f"scenario is missing keys: {', '.join(missing)}")
        unknown = [k for k in data if k not in SCENARIO_KEYS and k != "model"]
        if unknown:
            raise ScenarioError(f"scenario has unknown keys: {', '.join(unknown)}")
        g = lambda k: float(data[k])
        return cls(
            m=g("m"), J=g("J"), a1=g("a1"), a2=g("a2"),
            u=g("u_kmh") / 3.6, tau=g("tau"), T_prev=g("T_prev"),
            k=g("k"), kd=g("kd"),
            front=MagicFormulaParams(g("Bf"), g("Cf"), g("Df"), g("Ef")),
            rear=MagicFormulaParams(g("Br"), g("Cr"), g("Dr"), g("Er")),
        )

    def to_dict(self) -> dict:
        return {
            "model": "vehicle",
            "Bf": self.front.B, "Cf": self.front.C, "Df": self.front.D, "Ef": self.front.E,
            "Br": self.rear.B, "Cr": self.rear.C, "Dr": self.rear.D, "Er": self.rear.E,
            "k": self.k, "kd": self.kd, "u_kmh": self.u * 3.6, "tau": self.tau,
            "T_prev": self.T_prev, "m": self.m, "J": self.J, "a1": self.a1, "a2": self.a2,
        }


def slip_angles(state, scenario: VehicleScenario) -> tuple[float, float]:
    """(alpha_f, alpha_r): linear in the states for fixed longitudinal speed."""
    v, r = state[0], state[1]
    de = state[4]
    af = de - (v + scenario.a1 * r) / scenario.u
    ar = -(v - scenario.a2 * r) / scenario.u
    return af, ar


def slip_angle_polys(scenario: VehicleScenario) -> tuple[Polynomial, Polynomial]:
    vs = VEHICLE_VARSET
    v = Polynomial.variable(vs, "v")
    r = Polynomial.variable(vs, "r")
    de = Polynomial.variable(vs, "de")
    af = de - (v + scenario.a1 * r) / scenario.u
    ar = -(v - scenario.a2 * r) / scenario.u
    return af, ar


class FullVehicleField:
    """Exact seven-state dynamics with Magic Formula forces and exact trig."""

    def __init__(self, scenario: VehicleScenario):
        self.scenario = scenario
        self.varset = VEHICLE_VARSET

    def __call__(self, state) -> np.ndarray:
        s = self.scenario
        v, r, yG, psi, de, de1, de2 = state
        af, ar = slip_angles(state, s)
        Ff = magic_formula(af, s.front)
        Fr = magic_formula(ar, s.rear)
        cos_de = math.cos(de)
        sin_psi, cos_psi = math.sin(psi), math.cos(psi)
        e = yG - s.y_ref + s.L_prev * sin_psi
        edot = s.u * sin_psi + v * cos_psi + s.L_prev * r * cos_psi
        c = 6.0 / s.tau**3
        return np.array([
            (-s.m * s.u * r + Ff * cos_de + Fr) / s.m,
            (s.a1 * Ff * cos_de - s.a2 * Fr) / s.J,
            s.u * sin_psi + v * cos_psi,
            r,
            de1,
            de2,
            c * (-de - s.tau * de1 - 0.5 * s.tau**2 * de2 - s.k * e - s.kd * edot),
        ])

    def kernel_params(self) -> np.ndarray:
        s = self.scenario
        return np.array([
            s.m, s.J, s.a1, s.a2, s.u, s.tau, s.L_prev, s.k, s.kd,
            s.front.B, s.front.C, s.front.D, s.front.E,
            s.rear.B, s.rear.C, s.rear.D, s.rear.E,
        ])


def fit_tires(scenario: VehicleScenario, fraction: float = 0.95) -> tuple[TireFit, TireFit]:
    """Slip limits at `fraction` of each axle's peak force, then cubic fits."""
    front = fit_cubic(scenario.front, slip_limit(scenario.front, fraction))
    rear = fit_cubic(scenario.rear, slip_limit(scenario.rear, fraction))
    return front, rear


def full_vector_field(scenario: VehicleScenario) -> FullVehicleField:
    return FullVehicleField(scenario)


def polynomial_vector_field(
    scenario: VehicleScenario, tire_fits: tuple[TireFit, TireFit]
) -> PolyVectorField:
    """Degree-3 odd polynomial approximation of the full field."""
    s = scenario
    fit_f, fit_r = tire_fits
    vs = VEHICLE_VARSET
    v, r, yG, psi, de, de1, de2 = (Polynomial.variable(vs, n) for n in VEHICLE_STATES)

    af, ar = slip_angle_polys(s)
    Ff = fit_f.c1 * af + fit_f.c3 * af**3
    Fr = fit_r.c1 * ar + fit_r.c3 * ar**3

    sin_psi = psi - psi**3 / 6.0
    cos_psi_times = lambda p: p - 0.5 * p * psi * psi  # p*(1 - psi^2/2)

    e = yG + s.L_prev * sin_psi  # y_ref = 0
    edot = s.u * sin_psi + cos_psi_times(v) + s.L_prev * cos_psi_times(r)
    c = 6.0 / s.tau**3

    return PolyVectorField(vs, (
        -s.u * r + (Ff + Fr) / s.m,
        (s.a1 * Ff - s.a2 * Fr) / s.J,
        s.u * sin_psi + cos_psi_times(v),
        r,
        de1,
        de2,
        c * (-de - s.tau * de1 - 0.5 * s.tau**2 * de2 - s.k * e - s.kd * edot),
    ))


# -- scenario files -------------------------------------------------------------


def read_key_values(path: str) -> dict[str, str]:
    """Plain `key = value` file with '#' comments."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ScenarioError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in out:
                raise ScenarioError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value
    return out


def load_scenario(path: str) -> VehicleScenario | VdpScenario:
    data = read_key_values(path)
    model = data.pop("model", "vehicle")
    if model == "vehicle":
        return VehicleScenario.from_mapping(data)
    if model == "vdp":
        try:
            return VdpScenario.from_mapping(data)
        except KeyError as exc:
            raise ScenarioError(f"scenario is missing keys: {exc.args[0]}") from None
    raise ScenarioError(f"unknown model {model!r} (expected 'vehicle' or 'vdp')")
