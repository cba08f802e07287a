"""Physical constants shared by the orbital and link models."""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    """WGS-84 / CODATA values. The models assume these exactly; do not tune."""

    G_times_ME: float = 3.986004418e14  # gravitational parameter [m^3/s^2]
    earth_radius_m: float = 6.371e6
    light_speed: float = 2.998e8  # [m/s]


CONSTANTS = PhysicalConstants()

# Sidereal rotation rate of the Earth, only used when ground-station rotation
# is enabled (off by default: single-plane model in a rotation-free frame).
EARTH_ROTATION_RATE = 7.2921159e-5  # [rad/s]
