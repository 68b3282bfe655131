"""Pneumatic channel dynamics and the pressure-strain law.

Channel pressures live in psi: the latency constants (deflation cap
T_p, supply p_s) are psi quantities and the update rules must see them
in that unit. Conversion to Pa happens only inside the strain law.

Per 60 Hz control tick, with target a and pressure p:

    dp = (a - p) / p_s
    inflating (a > p):  p <- min(p + p_s * dp^2 * k_i, a)
    deflating (a < p):  p <- max(0, p - min(p * k_d, T_p))

so an inflation step from 0 toward 8 psi with k_i = 0.23 gives exactly
1.84 psi, and deflation from 8 psi drops 0.68 psi/tick until
p < T_p/k_d = 2.9565 psi, then decays geometrically with ratio 0.77.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PSI_TO_PA = 6894.76

DEFAULT_K_INFLATE = 0.23
DEFAULT_K_DEFLATE = 0.23
DEFAULT_DEFLATE_CAP_PSI = 0.68
DEFAULT_SUPPLY_PSI = 8.0
DEFAULT_TICK_HZ = 60.0


@dataclass
class StrainLaw:
    """Linear overpressure-strain relation of the chamber material."""

    youngs_modulus_pa: float

    def strain_pa(self, p_pa: float) -> float:
        return 1.0 + p_pa / self.youngs_modulus_pa

    def strain(self, p_psi: float) -> float:
        """Axial stretch factor for a gauge pressure given in psi."""
        return self.strain_pa(p_psi * PSI_TO_PA)


@dataclass
class PneumaticChannel:
    """One chamber's valve line: pressure state plus latency constants."""

    pressure: float = 0.0
    k_inflate: float = DEFAULT_K_INFLATE
    k_deflate: float = DEFAULT_K_DEFLATE
    deflate_cap: float = DEFAULT_DEFLATE_CAP_PSI
    supply: float = DEFAULT_SUPPLY_PSI

    def tick(self, target: float) -> float:
        self.pressure = update_pressure(self.pressure, target, self.k_inflate,
                                        self.k_deflate, self.deflate_cap, self.supply)
        return self.pressure


def update_pressure(p: float, target: float, k_i: float = DEFAULT_K_INFLATE,
                    k_d: float = DEFAULT_K_DEFLATE,
                    cap: float = DEFAULT_DEFLATE_CAP_PSI,
                    p_s: float = DEFAULT_SUPPLY_PSI) -> float:
    """One 60 Hz tick of the valve latency model (psi in, psi out)."""
    if target > p:
        dp = (target - p) / p_s
        return min(p + p_s * dp * dp * k_i, target)
    if target < p:
        return max(0.0, p - min(p * k_d, cap))
    return p


def route_antagonistic(command: float) -> tuple[float, float]:
    """Signed link command (psi) to (left, right) chamber targets.

    Positive commands pressurize the right chamber, negative the left;
    the opposite side always targets zero (vent).
    """
    if command > 0.0:
        return 0.0, command
    if command < 0.0:
        return -command, 0.0
    return 0.0, 0.0


@dataclass
class ChannelBank:
    """All chamber channels of a snake: index 2i = left, 2i+1 = right."""

    pressures: np.ndarray
    k_inflate: float = DEFAULT_K_INFLATE
    k_deflate: float = DEFAULT_K_DEFLATE
    deflate_cap: float = DEFAULT_DEFLATE_CAP_PSI
    supply: float = DEFAULT_SUPPLY_PSI

    @classmethod
    def create(cls, n_links: int, **kw) -> "ChannelBank":
        return cls(np.zeros(2 * n_links), **kw)

    def tick(self, commands: np.ndarray, latency: bool = True) -> np.ndarray:
        """Advance one control tick given per-link signed commands."""
        for i, a in enumerate(commands):
            left, right = route_antagonistic(float(a))
            if latency:
                self.pressures[2 * i] = update_pressure(
                    self.pressures[2 * i], left, self.k_inflate,
                    self.k_deflate, self.deflate_cap, self.supply)
                self.pressures[2 * i + 1] = update_pressure(
                    self.pressures[2 * i + 1], right, self.k_inflate,
                    self.k_deflate, self.deflate_cap, self.supply)
            else:
                self.pressures[2 * i] = left
                self.pressures[2 * i + 1] = right
        return self.pressures
