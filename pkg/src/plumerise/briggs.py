"""Briggs plume-rise parameterization.

Classical momentum-plus-buoyancy rise as a function of downwind distance,
used as the model-side comparison for the camera measurements. Source
strength enters through two flux parameters built from the stack exit
conditions and the effluent-to-air density ratio.

The buoyancy flux is implemented with the exit velocity to the FIRST power,
which is the dimensionally consistent form (every addend under the cube
root then carries m^3). The squared-velocity variant remains available
behind the ``velocity_squared`` switch for comparison.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

GRAVITY_MPS2 = 9.81
DEFAULT_ENTRAINMENT = 0.6


class NegativeBuoyancy(ValueError):
    """The rise formula is invalid for a denser-than-air effluent."""


@dataclass(frozen=True)
class StackSpec:
    """Physical stack parameters (site roster row)."""

    id: str
    lat_deg: float
    lon_deg: float
    height_m: float
    diameter_m: float
    exit_velocity_mps: float
    exit_temp_K: float

    def __post_init__(self):
        if self.diameter_m <= 0:
            raise ValueError("stack diameter must be positive")
        if self.exit_velocity_mps < 0:
            raise ValueError("exit velocity must be nonnegative")
        if self.exit_temp_K <= 0:
            raise ValueError("exit temperature must be positive")

    @property
    def radius_m(self) -> float:
        return self.diameter_m / 2.0


@dataclass(frozen=True)
class AmbientConditions:
    """Ambient air state around the stack."""

    air_temp_K: float
    mean_wind_mps: float
    density_ratio: float | None = None  # effluent density / air density
    gravity_mps2: float = GRAVITY_MPS2
    entrainment: float = DEFAULT_ENTRAINMENT

    def __post_init__(self):
        if self.air_temp_K <= 0:
            raise ValueError("air temperature must be positive")
        if self.mean_wind_mps <= 0:
            raise ValueError("mean wind speed must be positive")
        if not 0.0 < self.entrainment <= 1.0:
            raise ValueError("entrainment must lie in (0, 1]")
        if self.density_ratio is not None and not 0.0 < self.density_ratio < 2.0:
            raise ValueError("density ratio must lie in (0, 2)")


def density_ratio(stack: StackSpec, amb: AmbientConditions) -> float:
    """Effluent-to-air density ratio.

    Uses the explicitly supplied ratio when present, otherwise the inverse
    temperature ratio (ideal gas at equal pressure).
    """
    if amb.density_ratio is not None:
        return amb.density_ratio
    return amb.air_temp_K / stack.exit_temp_K


def momentum_flux(stack: StackSpec, amb: AmbientConditions) -> float:
    """Momentum flux parameter, m^4/s^2."""
    ratio = density_ratio(stack, amb)
    return ratio * stack.radius_m**2 * stack.exit_velocity_mps**2


def buoyancy_flux(
    stack: StackSpec, amb: AmbientConditions, velocity_squared: bool = False
) -> float:
    """Buoyancy flux parameter, m^4/s^3.

    ``velocity_squared=True`` selects the dimensionally inconsistent
    squared-velocity variant; the default linear form is the standard one.
    """
    ratio = density_ratio(stack, amb)
    w = stack.exit_velocity_mps
    vel = w**2 if velocity_squared else w
    return (1.0 - ratio) * amb.gravity_mps2 * stack.radius_m**2 * vel


def rise_at_distance(
    f_m: float,
    f_b: float,
    u_bar: float,
    x: float,
    entrainment: float = DEFAULT_ENTRAINMENT,
) -> float:
    """Plume rise (m) at downwind distance x from the stack.

    delta_z = (3 F_m x / (beta^2 u^2) + 3 F_b x^2 / (2 beta^2 u^3))^(1/3)

    Raises:
        NegativeBuoyancy: for f_b < 0; the cube-root growth law does not
            describe a sinking plume, so the caller must handle it.
    """
    if x < 0:
        raise ValueError("downwind distance must be nonnegative")
    if u_bar <= 0:
        raise ValueError("wind speed must be positive")
    if f_b < 0:
        raise NegativeBuoyancy(f"buoyancy flux {f_b} is negative")
    beta2 = entrainment**2
    term_m = 3.0 * f_m * x / (beta2 * u_bar**2)
    term_b = 3.0 * f_b * x**2 / (2.0 * beta2 * u_bar**3)
    return (term_m + term_b) ** (1.0 / 3.0)


@dataclass(frozen=True)
class IterativeRise:
    """Result of the wind-profile fixed-point iteration."""

    delta_z_m: float
    u_mps: float
    iterations: int
    converged: bool


def rise_iterative(
    stack: StackSpec,
    amb: AmbientConditions,
    wind_profile: Callable[[float], float],
    x: float,
    tol: float = 0.01,
    max_iter: int = 50,
) -> IterativeRise:
    """Plume rise with the wind evaluated at the local plume height.

    Fixed-point iteration: start with the wind at the stack top, compute the
    rise, then re-evaluate the wind halfway between the stack top and the
    plume top until successive rises agree within ``tol``. A constant
    profile converges on the first iteration. Non-convergence is reported
    through the flag, not raised; the last iterate is still returned.
    """
    f_m = momentum_flux(stack, amb)
    f_b = buoyancy_flux(stack, amb)
    u = wind_profile(stack.height_m)
    if u <= 0:
        raise ValueError("wind profile must be positive at the stack top")
    delta_z = rise_at_distance(f_m, f_b, u, x, amb.entrainment)
    for iteration in range(1, max_iter + 1):
        u_next = wind_profile(stack.height_m + delta_z / 2.0)
        if u_next <= 0:
            raise ValueError("wind profile must be positive over the plume depth")
        delta_next = rise_at_distance(f_m, f_b, u_next, x, amb.entrainment)
        if abs(delta_next - delta_z) < tol:
            # Return the confirmed iterate, so a constant profile reproduces
            # rise_at_distance exactly.
            return IterativeRise(delta_z_m=delta_z, u_mps=u, iterations=iteration, converged=True)
        delta_z, u = delta_next, u_next
    return IterativeRise(delta_z_m=delta_z, u_mps=u, iterations=max_iter, converged=False)


ROSTER_COLUMNS = ("id", "lat", "lon", "h_s", "d_s", "w_s", "T_s")


def load_stack_roster(text: str) -> dict[str, StackSpec]:
    """Parse a comma-separated stack roster with a header row.

    Columns: id, lat, lon, h_s, d_s, w_s, T_s.
    """
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != ROSTER_COLUMNS:
        raise ValueError(
            f"stack roster header must be {','.join(ROSTER_COLUMNS)}, "
            f"got {reader.fieldnames}"
        )
    stacks: dict[str, StackSpec] = {}
    for row in reader:
        spec = StackSpec(
            id=row["id"].strip(),
            lat_deg=float(row["lat"]),
            lon_deg=float(row["lon"]),
            height_m=float(row["h_s"]),
            diameter_m=float(row["d_s"]),
            exit_velocity_mps=float(row["w_s"]),
            exit_temp_K=float(row["T_s"]),
        )
        if spec.id in stacks:
            raise ValueError(f"duplicate stack id {spec.id!r}")
        stacks[spec.id] = spec
    return stacks
