"""Sensitivity of future loop designs and the giant-ring optimizer.

A design is a loop geometry plus source rate, fiber loss, and
integration time.  Photon pairs surviving the loop at rate R give a
shot-limited phase resolution delta_phi = 1 / sqrt(2 R T); dividing by
the scale factor and the rotation projection turns it into a rotation
rate resolution.
"""

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .sagnac import (CONSTANTS, InterferometerGeometry, PhysicalConstants,
                     scale_factor, transmission)


class InfeasibleDesignError(ValueError):
    """No design inside the search bounds reaches the requested target."""


PROJECTIONS = ("cos_frame_angle", "sin_latitude")


@dataclass(frozen=True)
class DesignSpec:
    """One gyroscope design point.

    measured_delta_phi substitutes an achieved phase resolution for the
    shot-noise projection, for designs that were actually run.
    """

    name: str
    geometry: InterferometerGeometry
    alpha_db_per_km: float
    pair_rate_in: float
    integration_time: float
    photons_per_probe: int = 2
    projection: str = "cos_frame_angle"
    measured_delta_phi: float = None
    constants: PhysicalConstants = CONSTANTS

    def __post_init__(self):
        if self.alpha_db_per_km < 0.0:
            raise ValueError("loss coefficient must be >= 0")
        if self.pair_rate_in <= 0.0 or self.integration_time <= 0.0:
            raise ValueError("rate and integration time must be positive")
        if self.photons_per_probe < 1:
            raise ValueError("need at least one photon per probe")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"unknown projection {self.projection!r}")
        if self.measured_delta_phi is not None and self.measured_delta_phi <= 0.0:
            raise ValueError("measured phase resolution must be positive")

    @property
    def projection_factor(self):
        if self.projection == "cos_frame_angle":
            return math.cos(self.geometry.frame_angle)
        return math.sin(self.geometry.latitude)


def pair_rate_out(spec):
    """Probe rate after the loop: all photons of a probe must survive."""
    return spec.pair_rate_in * transmission(
        spec.alpha_db_per_km, spec.geometry.fiber_length, spec.photons_per_probe)


def phase_resolution(spec):
    """Shot-limited delta_phi = 1 / sqrt(2 R_out T), or the measured value."""
    if spec.measured_delta_phi is not None:
        return spec.measured_delta_phi
    return 1.0 / math.sqrt(2.0 * pair_rate_out(spec) * spec.integration_time)


@dataclass(frozen=True)
class SensitivityReport:
    """Resolved sensitivity chain of one design."""

    name: str
    shape: str
    fiber_length: float
    perimeter: float
    turns: int
    effective_area: float
    scale_factor: float
    survival: float
    pair_rate_out: float
    delta_phi: float
    projection: str
    projection_factor: float
    delta_phi_projected: float
    delta_omega: float
    snr_gr: float
    measured: bool

    def to_dict(self):
        return {
            "name": self.name, "shape": self.shape,
            "fiber_length_m": self.fiber_length, "perimeter_m": self.perimeter,
            "turns": self.turns, "effective_area_m2": self.effective_area,
            "scale_factor_s": self.scale_factor, "survival": self.survival,
            "pair_rate_out_hz": self.pair_rate_out, "delta_phi_rad": self.delta_phi,
            "projection": self.projection,
            "projection_factor": self.projection_factor,
            "delta_phi_projected_rad": self.delta_phi_projected,
            "delta_omega_rad_s": self.delta_omega, "snr_gr": self.snr_gr,
            "measured": self.measured,
        }


def rotation_resolution(spec):
    """Full chain: survival, output rate, phase and rotation resolution.

    delta_omega = delta_phi / (S * projection_factor); the projected
    delta_phi / projection_factor is also reported, matching the
    convention of quoting tilted designs at their effective axis.
    """
    p = spec.projection_factor
    if p <= 0.0:
        raise ValueError("projection factor is zero; rotation not observable")
    g = spec.geometry
    s = scale_factor(g, spec.constants)
    eta_all = transmission(spec.alpha_db_per_km, g.fiber_length, spec.photons_per_probe)
    r_out = spec.pair_rate_in * eta_all
    d_phi = phase_resolution(spec)
    d_omega = d_phi / (s * p)
    return SensitivityReport(
        name=spec.name, shape=g.shape, fiber_length=g.fiber_length,
        perimeter=g.perimeter, turns=g.turns, effective_area=g.effective_area,
        scale_factor=s, survival=eta_all, pair_rate_out=r_out, delta_phi=d_phi,
        projection=spec.projection, projection_factor=p,
        delta_phi_projected=d_phi / p, delta_omega=d_omega,
        snr_gr=spec.constants.omega_gr / d_omega,
        measured=spec.measured_delta_phi is not None)


@dataclass(frozen=True)
class GfringOptimum:
    """Smallest square ring reaching the target relativistic SNR."""

    fiber_length: float
    turns: int
    target_snr: float
    loss_optimal_length: float
    report: SensitivityReport

    def to_dict(self):
        return {"fiber_length_m": self.fiber_length, "turns": self.turns,
                "target_snr": self.target_snr,
                "loss_optimal_length_m": self.loss_optimal_length,
                "report": self.report.to_dict()}


def _gfring_spec(fiber_length, turns, latitude, alpha_db_per_km, pair_rate_in,
                 integration_time, wavelength, constants):
    geom = InterferometerGeometry.square(fiber_length, turns, latitude=latitude,
                                         wavelength=wavelength)
    return DesignSpec(name="GFRING", geometry=geom,
                      alpha_db_per_km=alpha_db_per_km, pair_rate_in=pair_rate_in,
                      integration_time=integration_time, photons_per_probe=2,
                      projection="sin_latitude", constants=constants)


def optimize_gfring(latitude, alpha_db_per_km=0.16, pair_rate_in=1e10,
                    integration_time=5.56e6, target_snr=3.0, wavelength=1550e-9,
                    nt_max=64, l_min=100.0, constants=CONSTANTS):
    """Minimal fiber length (and its turn count) reaching target_snr on omega_gr.

    delta_omega grows with both turn count and loss, and scales as
    n_t 10^(alpha L / 10) / L^2: the loss term wins beyond the turnover
    L* = 20000 / (alpha ln 10) meters.  The search takes the largest
    turn count feasible at L*, then bisects the shortest length still
    meeting the target.  A surface-parallel ring projects sin(latitude).
    """
    if math.sin(latitude) <= 0.0:
        raise ValueError("latitude must project a positive rotation component")
    if alpha_db_per_km <= 0.0:
        raise ValueError("optimizer needs a positive loss coefficient")
    if nt_max < 1 or l_min <= 0.0:
        raise ValueError("search bounds must be positive")

    def d_omega(turns, length):
        spec = _gfring_spec(length, turns, latitude, alpha_db_per_km,
                            pair_rate_in, integration_time, wavelength, constants)
        return rotation_resolution(spec).delta_omega

    l_star = 20000.0 / (alpha_db_per_km * math.log(10.0))

    def build(turns, length):
        spec = _gfring_spec(length, turns, latitude, alpha_db_per_km,
                            pair_rate_in, integration_time, wavelength, constants)
        return GfringOptimum(fiber_length=length, turns=turns,
                             target_snr=target_snr, loss_optimal_length=l_star,
                             report=rotation_resolution(spec))

    if target_snr <= 0.0:
        # any design passes; report the configured search bounds
        return build(nt_max, l_min)

    limit = constants.omega_gr / target_snr
    base = d_omega(1, l_star)
    if base > limit:
        raise InfeasibleDesignError(
            f"single turn at the loss-optimal length {l_star:.0f} m reaches "
            f"delta_omega {base:.3e}, above the required {limit:.3e}")
    turns = min(int(math.floor(limit / base + 1e-9)), nt_max)

    def excess(length):
        return d_omega(turns, length) - limit

    if excess(l_min) <= 0.0:
        return build(turns, l_min)
    length = brentq(excess, l_min, l_star, xtol=1e-3, rtol=1e-13)
    return build(turns, float(length))


@dataclass(frozen=True)
class LandscapeRow:
    """One design placed on the area-resolution landscape."""

    name: str
    effective_area: float
    delta_omega: float
    label: str
    log10_area: float
    log10_delta_omega: float

    def to_dict(self):
        return {"name": self.name, "effective_area_m2": self.effective_area,
                "delta_omega_rad_s": self.delta_omega, "label": self.label,
                "log10_area": self.log10_area,
                "log10_delta_omega": self.log10_delta_omega}


def regime_label(delta_omega, constants=CONSTANTS):
    """Which rotation signals the resolution can see."""
    if delta_omega >= constants.omega_earth:
        return "above_omega_e"
    if delta_omega >= constants.omega_gr:
        return "below_omega_e"
    return "below_omega_gr"


def landscape(specs):
    """Area-versus-resolution rows for a set of designs."""
    rows = []
    for spec in specs:
        report = rotation_resolution(spec)
        rows.append(LandscapeRow(
            name=spec.name, effective_area=report.effective_area,
            delta_omega=report.delta_omega,
            label=regime_label(report.delta_omega, spec.constants),
            log10_area=math.log10(report.effective_area),
            log10_delta_omega=math.log10(report.delta_omega)))
    return rows


def design_from_dict(d):
    """DesignSpec from its JSON form."""
    try:
        name = d["name"]
        shape = d["shape"]
        fiber_length = float(d["fiber_length_m"])
        kwargs = {
            "frame_angle": math.radians(float(d.get("frame_angle_deg", 0.0))),
            "latitude": math.radians(float(d.get("latitude_deg", 0.0))),
            "wavelength": float(d.get("wavelength_m", 1550e-9)),
        }
        if d.get("effective_area_m2") is not None:
            kwargs["effective_area"] = float(d["effective_area_m2"])
        if shape == "square":
            geom = InterferometerGeometry.square(fiber_length, int(d["turns"]), **kwargs)
        elif shape == "circular":
            geom = InterferometerGeometry.circular(fiber_length,
                                                   float(d["perimeter_m"]), **kwargs)
        else:
            raise ValueError(f"unknown loop shape {shape!r}")
        measured = d.get("measured_delta_phi_rad")
        return DesignSpec(
            name=name, geometry=geom,
            alpha_db_per_km=float(d["alpha_db_per_km"]),
            pair_rate_in=float(d["pair_rate_in_hz"]),
            integration_time=float(d["integration_time_s"]),
            photons_per_probe=int(d.get("photons_per_probe", 2)),
            projection=d.get("projection", "cos_frame_angle"),
            measured_delta_phi=None if measured is None else float(measured))
    except KeyError as exc:
        raise ValueError(f"design spec missing field {exc}") from exc


def design_to_dict(spec):
    g = spec.geometry
    return {
        "name": spec.name, "shape": g.shape, "fiber_length_m": g.fiber_length,
        "perimeter_m": g.perimeter, "turns": g.turns,
        "effective_area_m2": g.effective_area,
        "frame_angle_deg": math.degrees(g.frame_angle),
        "latitude_deg": math.degrees(g.latitude),
        "wavelength_m": g.wavelength,
        "alpha_db_per_km": spec.alpha_db_per_km,
        "pair_rate_in_hz": spec.pair_rate_in,
        "integration_time_s": spec.integration_time,
        "photons_per_probe": spec.photons_per_probe,
        "projection": spec.projection,
        "measured_delta_phi_rad": spec.measured_delta_phi,
    }
