"""Benchmark dynamics: the two-state time-reversed Van der Pol oscillator.

xdot = -y, ydot = x + mu*(x^2 - 1)*y. The origin is asymptotically stable and
an unstable limit cycle bounds its region of attraction, which makes the
system the standard two-state stress test for level-set certificates.
"""

from __future__ import annotations

from dataclasses import dataclass

from .poly import Polynomial, PolyVectorField, VarSet

VDP_VARSET = VarSet(["x", "y"])


@dataclass(frozen=True)
class VdpScenario:
    mu: float = 1.0

    @classmethod
    def from_mapping(cls, data: dict) -> "VdpScenario":
        if "mu" not in data:
            raise KeyError("mu")
        return cls(mu=float(data["mu"]))

    def to_dict(self) -> dict:
        return {"model": "vdp", "mu": self.mu}


def vdp_field(mu: float = 1.0) -> PolyVectorField:
    x = Polynomial.variable(VDP_VARSET, "x")
    y = Polynomial.variable(VDP_VARSET, "y")
    return PolyVectorField(VDP_VARSET, (-y, x + mu * (x * x - 1.0) * y))
