"""Synthesis of raw experiment data: switched count records and polarimeter traces.

A run alternates the loop switch at fixed frequency while the bias phase
steps through a list of set points.  Counts are integrated separately in
the on and off halves of each switch cycle, excluding a transition band.
All phase noise on the bias motor is common to the two switch states of
a set point, which is what the on/off difference is designed to reject.
"""

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .probe import ProbeKind
from .sagnac import (CONSTANTS, SwitchState, sagnac_phase, switch_transmission)


@dataclass(frozen=True)
class SwitchSchedule:
    """Loop switch drive: square wave with a transition band to discard."""

    frequency: float = 0.1        # Hz
    duty: float = 0.5             # on fraction of each cycle
    transition_halfwidth: float = 0.010  # s discarded each side of an edge

    def __post_init__(self):
        if self.frequency <= 0.0:
            raise ValueError("switch frequency must be positive")
        if not 0.0 < self.duty < 1.0:
            raise ValueError("duty must be in (0, 1)")
        if self.transition_halfwidth < 0.0:
            raise ValueError("transition halfwidth must be >= 0")
        period = 1.0 / self.frequency
        if 2.0 * self.transition_halfwidth >= min(self.duty, 1.0 - self.duty) * period:
            raise ValueError("transition band swallows a whole switch half-cycle")

    def usable_fraction(self, switch):
        """Fraction of wall time integrated in the given switch state."""
        frac = self.duty if switch is SwitchState.ON else 1.0 - self.duty
        return frac - 2.0 * self.frequency * self.transition_halfwidth


@dataclass(frozen=True)
class RateConfig:
    """Detected rates of the source and detection chain."""

    pair_rate_detected: float = 4000.0    # Hz, coincidences at full transmission
    heralded_single_rate: float = 20000.0  # Hz, both ports summed
    cw_sample_rate: float = 20.0          # Hz, polarimeter
    coincidence_window: float = 3.75e-9   # s

    def __post_init__(self):
        if min(self.pair_rate_detected, self.heralded_single_rate,
               self.cw_sample_rate, self.coincidence_window) <= 0.0:
            raise ValueError("rates and windows must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    """Noise switches; zero disables a term."""

    dark_rate: float = 300.0        # Hz per detector
    motor_sigma: float = 2.4e-3     # rad, bias set-point repeatability
    drift_rate: float = 0.0         # rad/s, slow phase drift
    walk_sigma: float = 0.0         # rad per record, random-walk step
    polarimeter_sigma: float = 2e-4  # rad on each polarimeter sample
    leakage_fraction: float = 0.1   # power fraction of the loop signal leaking into psi

    def __post_init__(self):
        if self.dark_rate < 0.0 or self.motor_sigma < 0.0 or self.walk_sigma < 0.0 \
                or self.polarimeter_sigma < 0.0:
            raise ValueError("noise magnitudes must be >= 0")
        if not 0.0 <= self.leakage_fraction <= 1.0:
            raise ValueError("leakage fraction must be in [0, 1]")


@dataclass(frozen=True)
class CountRecord:
    """Counts integrated at one bias set point in one switch state."""

    theta: float        # rad, frame angle of the loop during this record
    phi0: float         # rad, bias set point
    switch: SwitchState
    duration: float     # s of wall time allotted to this state
    n_h: int
    n_v: int
    n_hv: int

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValueError("record duration must be positive")
        if min(self.n_h, self.n_v, self.n_hv) < 0:
            raise ValueError("counts must be >= 0")


@dataclass(frozen=True, eq=False)
class PolarimeterTrace:
    """Uniformly sampled polarization ellipse readout with the switch drive."""

    t: np.ndarray
    psi: np.ndarray
    chi: np.ndarray
    drive: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.psi) == len(self.chi) == len(self.drive) == n):
            raise ValueError("trace columns differ in length")
        if n >= 2 and not np.all(np.diff(self.t) > 0.0):
            raise ValueError("sample times must increase")


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _draw_counts(rng, lam, sample_poisson):
    if sample_poisson:
        return int(rng.poisson(lam))
    return int(round(lam))


def simulate_counts(kind, geom, phi0_list, true_omega, seed, duration_s=1800.0,
                    schedule=None, rates=None, noise=None, visibility=None,
                    distinguishability=0.0, base_phase=0.0, channel_asymmetry=0.0,
                    sample_poisson=True, constants=CONSTANTS):
    """Count records for one angle: every bias set point in both switch states.

    The fringe argument is k * phi0 + base_phase - k * phi_s with k the
    probe's phase enhancement, so the fitted phase drops by k * phi_s
    when the loop is switched in and the on/off difference is positive.
    Bias noise (set-point jitter, drift, walk) is drawn once per set
    point and shared by the two switch states.
    """
    if not isinstance(kind, ProbeKind):
        raise TypeError("kind must be a ProbeKind")
    if kind.name == "classical":
        raise ValueError("classical probe is continuous; use simulate_polarimeter")
    if kind.name == "noon" and kind.photons != 2:
        raise ValueError("only two-photon pairs are simulated")
    if duration_s <= 0.0:
        raise ValueError("duration must be positive")
    if len(phi0_list) == 0:
        raise ValueError("need at least one bias set point")
    schedule = schedule or SwitchSchedule()
    rates = rates or RateConfig()
    noise = noise or NoiseConfig()
    if visibility is None:
        visibility = 1.0 - distinguishability if kind.name == "noon" else 1.0
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must be in [0, 1]")

    children = _seed_sequence(seed).spawn(len(phi0_list))
    records = []
    walk = 0.0
    for k, phi0 in enumerate(phi0_list):
        motor_ss, count_ss = children[k].spawn(2)
        motor_rng = np.random.default_rng(motor_ss)
        count_rng = np.random.default_rng(count_ss)
        jitter = motor_rng.normal(0.0, noise.motor_sigma) if noise.motor_sigma > 0.0 else 0.0
        if noise.walk_sigma > 0.0:
            walk += motor_rng.normal(0.0, noise.walk_sigma)
        drift = noise.drift_rate * (k + 0.5) * duration_s
        phi = phi0 + jitter + walk + drift

        for switch in (SwitchState.ON, SwitchState.OFF):
            t_use = duration_s * schedule.usable_fraction(switch)
            phs = sagnac_phase(geom, true_omega, switch, constants)
            trans = switch_transmission(switch)
            arg = kind.enhancement * (phi - phs) + base_phase
            if kind.name == "noon":
                r_pair = trans * rates.pair_rate_detected \
                    * 0.5 * (1.0 + visibility * math.cos(arg))
                r_h = trans * 0.5 * rates.heralded_single_rate + noise.dark_rate
                r_v = r_h
                r_acc = r_h * r_v * rates.coincidence_window
                n_h = _draw_counts(count_rng, r_h * t_use, sample_poisson)
                n_v = _draw_counts(count_rng, r_v * t_use, sample_poisson)
                n_hv = _draw_counts(count_rng, (r_pair + r_acc) * t_use, sample_poisson)
            else:
                # heralded ports: darks only survive the herald coincidence window
                r_bg = 0.5 * rates.heralded_single_rate * noise.dark_rate \
                    * rates.coincidence_window
                a_h = rates.heralded_single_rate * (1.0 + channel_asymmetry)
                a_v = rates.heralded_single_rate * (1.0 - channel_asymmetry)
                r_h = trans * 0.5 * a_h * (1.0 + visibility * math.cos(arg)) + r_bg
                r_v = trans * 0.5 * a_v * (1.0 - visibility * math.cos(arg)) + r_bg
                r_acc = r_h * r_v * rates.coincidence_window
                n_h = _draw_counts(count_rng, r_h * t_use, sample_poisson)
                n_v = _draw_counts(count_rng, r_v * t_use, sample_poisson)
                n_hv = _draw_counts(count_rng, r_acc * t_use, sample_poisson)
            records.append(CountRecord(geom.frame_angle, phi0, switch,
                                       duration_s, n_h, n_v, n_hv))
    return records


def simulate_polarimeter(geom, true_omega, total_time, seed, schedule=None,
                         rates=None, noise=None, constants=CONSTANTS):
    """Polarimeter trace of a classical probe under the switch drive.

    The loop phase phi_s appears as ellipticity chi = phi_s/2, with a
    leakage_fraction of the signal power diverted into the orientation
    psi.  Switch edges ramp linearly over +-transition_halfwidth.
    """
    schedule = schedule or SwitchSchedule()
    rates = rates or RateConfig()
    noise = noise or NoiseConfig()
    period = 1.0 / schedule.frequency
    if total_time < 10.0 * period:
        raise ValueError("trace must cover at least ten switch periods")

    n = int(round(total_time * rates.cw_sample_rate))
    t = (np.arange(n) + 0.5) / rates.cw_sample_rate
    pos = np.mod(t, period)
    drive = (pos < schedule.duty * period).astype(float)

    hw = schedule.transition_halfwidth
    envelope = drive.copy()
    if hw > 0.0:
        # signed offsets from the rising edge (cycle start) and falling edge
        s_rise = np.where(pos <= 0.5 * period, pos, pos - period)
        s_fall = pos - schedule.duty * period
        in_rise = np.abs(s_rise) < hw
        in_fall = np.abs(s_fall) < hw
        envelope[in_rise] = (s_rise[in_rise] + hw) / (2.0 * hw)
        envelope[in_fall] = (hw - s_fall[in_fall]) / (2.0 * hw)

    phs = sagnac_phase(geom, true_omega, SwitchState.ON, constants)
    rng = np.random.default_rng(_seed_sequence(seed))
    chi = 0.5 * phs * math.sqrt(1.0 - noise.leakage_fraction) * envelope \
        + 0.5 * noise.drift_rate * t \
        + rng.normal(0.0, noise.polarimeter_sigma, n)
    psi = 0.5 * phs * math.sqrt(noise.leakage_fraction) * envelope \
        + rng.normal(0.0, noise.polarimeter_sigma, n)
    return PolarimeterTrace(t, psi, chi, drive)


def angle_sweep(kind, geom, theta_list, phi0_list, true_omega, seed,
                base_phase=0.0, **kwargs):
    """Records over a list of frame angles; one seed substream per angle.

    base_phase may be a scalar or a sequence aligned with theta_list.
    """
    if len(theta_list) == 0:
        raise ValueError("need at least one angle")
    try:
        phases = [float(b) for b in base_phase]
        if len(phases) != len(theta_list):
            raise ValueError("base_phase sequence must match theta_list")
    except TypeError:
        phases = [float(base_phase)] * len(theta_list)

    children = _seed_sequence(seed).spawn(len(theta_list))
    records = []
    for theta, bp, child in zip(theta_list, phases, children):
        geom_t = replace(geom, frame_angle=theta)
        records.extend(simulate_counts(kind, geom_t, phi0_list, true_omega,
                                       child, base_phase=bp, **kwargs))
    return records


COUNTS_CSV_COLUMNS = ("theta_deg", "phi0_rad", "switch", "duration_s",
                      "n_h", "n_v", "n_hv")
TRACE_CSV_COLUMNS = ("t_s", "psi_rad", "chi_rad", "drive")


def write_counts_csv(records, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(COUNTS_CSV_COLUMNS)
        for r in records:
            writer.writerow([f"{math.degrees(r.theta):.10g}", f"{r.phi0:.12g}",
                             r.switch.value, f"{r.duration:.10g}",
                             r.n_h, r.n_v, r.n_hv])


def read_counts_csv(path):
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != COUNTS_CSV_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(COUNTS_CSV_COLUMNS)}")
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(COUNTS_CSV_COLUMNS):
                raise ValueError(f"{path}: row {i} has {len(row)} fields")
            try:
                records.append(CountRecord(
                    theta=math.radians(float(row[0])), phi0=float(row[1]),
                    switch=SwitchState(row[2]), duration=float(row[3]),
                    n_h=int(row[4]), n_v=int(row[5]), n_hv=int(row[6])))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}: row {i}: {exc}") from exc
    return records


def write_trace_csv(trace, path):
    data = np.column_stack([trace.t, trace.psi, trace.chi, trace.drive])
    np.savetxt(path, data, delimiter=",", header=",".join(TRACE_CSV_COLUMNS),
               comments="", fmt="%.10g")


def read_trace_csv(path):
    with open(path) as f:
        header = f.readline().strip()
    if tuple(h.strip() for h in header.split(",")) != TRACE_CSV_COLUMNS:
        raise ValueError(f"{path}: expected header {','.join(TRACE_CSV_COLUMNS)}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 4:
        raise ValueError(f"{path}: expected 4 columns")
    return PolarimeterTrace(data[:, 0], data[:, 1], data[:, 2], data[:, 3])
