"""Physical device description and derived per-particle velocity coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ConfigurationError(ValueError):
    """Raised for physically meaningless or inconsistent parameters."""


@dataclass(frozen=True)
class ParticleSpec:
    """One suspended particle: radius in micrometres plus acoustic contrast.

    Setting ``explicit_coefficient`` (1/s) bypasses the physical formula,
    which is convenient for dimensionless studies where only coefficient
    ratios matter; time is then measured in units of the coefficient.
    """

    radius_um: float
    contrast_factor: float = 1.0
    explicit_coefficient: float | None = None

    def __post_init__(self):
        if self.explicit_coefficient is not None:
            return
        if self.radius_um <= 0:
            raise ConfigurationError(f"particle radius must be positive, got {self.radius_um}")
        if self.contrast_factor == 0:
            raise ConfigurationError("contrast factor must be nonzero")


@dataclass(frozen=True)
class DeviceConfig:
    """Rigidly walled 1-D channel, its fluid, and the particles inside it."""

    channel_height_um: float = 800.0
    viscosity_pa_s: float = 1.0e-3
    acoustic_energy_j_m3: float = 1.0
    particles: tuple[ParticleSpec, ...] = (ParticleSpec(1.0), ParticleSpec(2.0))
    mode_count: int = 5

    def __post_init__(self):
        object.__setattr__(self, "particles", tuple(self.particles))
        if self.channel_height_um <= 0:
            raise ConfigurationError(f"channel height must be positive, got {self.channel_height_um}")
        if self.viscosity_pa_s <= 0:
            raise ConfigurationError(f"viscosity must be positive, got {self.viscosity_pa_s}")
        if self.acoustic_energy_j_m3 <= 0:
            raise ConfigurationError(f"acoustic energy density must be positive, got {self.acoustic_energy_j_m3}")
        if self.mode_count < 1:
            raise ConfigurationError(f"mode count must be at least 1, got {self.mode_count}")
        if not self.particles:
            raise ConfigurationError("at least one particle is required")

    @property
    def n(self) -> int:
        return len(self.particles)


def coefficients(cfg: DeviceConfig) -> np.ndarray:
    """Per-particle velocity coefficients A_i (1/s) in channel-scaled coordinates.

    A_i = pi a_i^2 Phi_i E / (2 H^2 eta): the drag-balance prefactor carries
    one factor 1/H, and mapping positions to the unit interval contributes
    the second. Explicit coefficients pass through verbatim.
    """
    h_m = cfg.channel_height_um * 1e-6
    out = np.empty(cfg.n)
    for i, p in enumerate(cfg.particles):
        if p.explicit_coefficient is not None:
            out[i] = p.explicit_coefficient
            continue
        a_m = p.radius_um * 1e-6
        out[i] = (
            math.pi * a_m**2 * p.contrast_factor * cfg.acoustic_energy_j_m3
            / (2.0 * h_m**2 * cfg.viscosity_pa_s)
        )
    return out
