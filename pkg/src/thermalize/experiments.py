"""End-to-end pipelines behind the figure-data commands.

Each function returns plain tables (column names plus rows) together with the
diagnostic flags the CLI turns into exit codes; nothing here touches the
filesystem.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import pure_to_density
from .dynamics import (
    LindbladRates,
    analytic_trajectory,
    eigenstate_trajectories,
    mixed_thermal_trajectory,
    rates_from_calibration,
)
from .fitting import RelaxationFit, TemperatureEstimate, estimate_equilibrium_temperature, fit_relaxation
from .hwemu import (
    DEFAULT_SHOTS,
    ExperimentRecord,
    Schedule,
    emulate_experiment,
    prep_state,
    reconstruct_trajectory,
)
from .metrics import DistanceKind, distance, kl_from_displacement
from .spectral import (
    QmePrediction,
    critical_dephasing,
    decompose,
    equidistant_temperature,
    population_rk4,
    predict_qme,
    qubit_rate_matrix,
)
from .thermal import DeviceParams, gibbs_populations

ORDER_MARGIN = 1e-12


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


def temperature_grid(t_min: float, t_max: float, steps: int) -> np.ndarray:
    if steps < 1 or t_min <= 0 or t_max < t_min:
        raise ValueError(f"invalid temperature grid ({t_min}, {t_max}, {steps})")
    return np.linspace(t_min, t_max, steps)


# --- mixing probabilities ----------------------------------------------------------


def mixing_probabilities(device: DeviceParams, temperatures) -> Table:
    temps = np.asarray(temperatures, dtype=float)
    if temps.size == 0:
        raise ValueError("temperature grid is empty")
    table = Table(["T_mk", "p0", "p1"])
    for temp in temps:
        p0, p1 = gibbs_populations(device.levels, temp)
        table.rows.append((temp, p0, p1))
    return table


# --- distance versus temperature --------------------------------------------------


@dataclass
class MonotonicityReport:
    table: Table
    violations: list[tuple]  # (t_us, T_low, T_high, drop)

    @property
    def ok(self) -> bool:
        return not self.violations


def thermal_distance_surface(
    rates: LindbladRates,
    gap: float,
    teq: float,
    temperatures,
    times,
    metric,
) -> np.ndarray:
    """Distances ``D[i_t, i_T]`` of mixed thermal trajectories from equilibrium."""
    kind = DistanceKind.parse(metric)
    temps = np.asarray(temperatures, dtype=float)
    eigen = eigenstate_trajectories(rates, times)
    rho_eq = rates.equilibrium_state
    levels = np.array([0.0, gap])
    out = np.empty((len(eigen[0]), temps.size))
    for j, temp in enumerate(temps):
        traj = mixed_thermal_trajectory(eigen, gibbs_populations(levels, temp))
        for i, rho in enumerate(traj.states):
            out[i, j] = distance(rho, rho_eq, kind, levels, teq)
    return out


def distance_vs_temperature(
    device: DeviceParams,
    temperatures,
    times,
    metric="trace",
    frame: str = "rotating",
    margin: float = ORDER_MARGIN,
) -> MonotonicityReport:
    """Distance to equilibrium on a (time, temperature) grid, checked for monotonicity in T."""
    rates = rates_from_calibration(device, frame=frame)
    temps = np.asarray(temperatures, dtype=float)
    times = np.asarray(times, dtype=float)
    surface = thermal_distance_surface(rates, device.gap_mk, device.teq_mk, temps, times, metric)
    table = Table(["t_us", "T_mk", "distance"])
    violations = []
    for i, t in enumerate(times):
        for j, temp in enumerate(temps):
            table.rows.append((t, temp, surface[i, j]))
        drops = surface[i, :-1] - surface[i, 1:]
        for j in np.nonzero(drops > margin)[0]:
            violations.append((t, temps[j], temps[j + 1], drops[j]))
    return MonotonicityReport(table, violations)


# --- hot versus cold ----------------------------------------------------------------


@dataclass
class CrossingResult:
    table: Table
    first_crossing_us: float | None
    prediction: QmePrediction | None = None


def _first_crossing(times, d_cold, d_hot, rel=1e-9):
    # relative test so crossings deep in the tail are still seen
    d_cold, d_hot = np.asarray(d_cold), np.asarray(d_hot)
    idx = np.nonzero((d_cold > 0) & (d_cold - d_hot > rel * np.maximum(d_cold, d_hot)))[0]
    return float(times[idx[0]]) if idx.size else None


def hot_vs_cold(
    device: DeviceParams,
    t_cold: float,
    t_hot: float,
    times,
    metric="trace",
    frame: str = "rotating",
) -> CrossingResult:
    """Relaxation of two Gibbs states of the qubit, built by eigenstate mixing."""
    rates = rates_from_calibration(device, frame=frame)
    times = np.asarray(times, dtype=float)
    surface = thermal_distance_surface(rates, device.gap_mk, device.teq_mk, [t_cold, t_hot], times, metric)
    table = Table(["t_us", "d_cold", "d_hot"])
    for t, (dc, dh) in zip(times, surface):
        table.rows.append((t, dc, dh))
    prediction = None
    if t_cold < t_hot:
        prediction = predict_qme(qubit_rate_matrix(rates), device.levels, t_cold, t_hot, device.teq_mk)
    return CrossingResult(table, _first_crossing(times, surface[:, 0], surface[:, 1]), prediction)


def hot_vs_cold_rate_matrix(r, levels, t_eq: float, t_cold: float, t_hot: float, times, dt: float | None = None) -> CrossingResult:
    """Entropic distances of two Gibbs states under a classical generator, by RK4."""
    r = np.asarray(r, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if times is None:
        # long enough for the slowest mode to decay by e^-40
        slow = -decompose(r, gibbs_populations(levels, t_eq)).eigenvalues[1]
        times = np.linspace(0.0, 40.0 / slow, 401)
    times = np.asarray(times, dtype=float)
    if dt is None:
        dt = 0.05 / float(np.max(np.abs(np.diag(r))))
    p_eq = gibbs_populations(levels, t_eq)
    table = Table(["t_us", "d_cold", "d_hot"])
    curves = []
    for temp in (t_cold, t_hot):
        p0 = gibbs_populations(levels, temp)
        traj = population_rk4(r, p0 - p_eq, times, dt)  # displacement obeys the same ODE
        curves.append(np.array([kl_from_displacement(p_eq, d) for d in traj]))
    for t, dc, dh in zip(times, *curves):
        table.rows.append((t, dc, dh))
    prediction = predict_qme(r, levels, t_cold, t_hot, t_eq) if t_cold < t_hot else None
    return CrossingResult(table, _first_crossing(times, curves[0], curves[1]), prediction)


# --- equidistant quenches -------------------------------------------------------------


@dataclass
class EquidistantResult:
    prep: str
    metric: str
    t_equidistant_mk: float
    times: np.ndarray
    d_pure: np.ndarray
    d_thermal: np.ndarray
    d_pure_measured: np.ndarray | None = None
    d_thermal_measured: np.ndarray | None = None

    def ordering_violations(self, margin: float = ORDER_MARGIN) -> np.ndarray:
        """Times ``t > 0`` where the pure state is not strictly closer to equilibrium."""
        late = self.times > 0
        bad = late & ~(self.d_pure < self.d_thermal - margin)
        return self.times[bad]


def equidistant_quench(
    device: DeviceParams,
    prep: str,
    metric,
    times,
    frame: str = "rotating",
    gamma_z: float | None = None,
    shots: int | None = None,
    seed: int | None = None,
) -> EquidistantResult:
    """Pure state against the thermal state at equal initial distance from equilibrium.

    With ``shots`` and ``seed`` the same comparison is also run through shot
    sampling: the pure state via full tomography, the thermal state via
    Z-basis counts of the |0> and |1> runs mixed with Boltzmann weights.
    """
    kind = DistanceKind.parse(metric)
    rates = rates_from_calibration(device, frame=frame)
    if gamma_z is not None:
        rates = rates.with_gamma_z(gamma_z)
    times = np.asarray(times, dtype=float)
    levels = device.levels
    rho_eq = rates.equilibrium_state
    rho_pure = pure_to_density(prep_state(prep))
    t_star = equidistant_temperature(rho_pure, kind, levels, device.teq_mk)
    pure_traj = analytic_trajectory(rho_pure, rates, times)
    thermal_traj = mixed_thermal_trajectory(eigenstate_trajectories(rates, times), gibbs_populations(levels, t_star))
    d_pure = np.array([distance(s, rho_eq, kind) for s in pure_traj.states])
    d_thermal = np.array([distance(s, rho_eq, kind) for s in thermal_traj.states])
    result = EquidistantResult(prep, kind.value, t_star, times, d_pure, d_thermal)
    if shots is not None:
        if seed is None:
            raise ValueError("emulated runs need a seed")
        schedule = _schedule_for(times)
        rec_pure = _emulate_with_rates(device, prep, schedule, shots, seed, True, frame, gamma_z)
        recs_eig = [
            _emulate_with_rates(device, lbl, schedule, shots, seed + 1 + n, False, frame, gamma_z)
            for n, lbl in enumerate(("0", "1"))
        ]
        measured_pure = reconstruct_trajectory(rec_pure)
        measured_thermal = mixed_thermal_trajectory(
            [reconstruct_trajectory(r) for r in recs_eig], gibbs_populations(levels, t_star)
        )
        result.d_pure_measured = np.array([distance(s, rho_eq, kind) for s in measured_pure.states])
        result.d_thermal_measured = np.array([distance(s, rho_eq, kind) for s in measured_thermal.states])
    return result


def _schedule_for(times: np.ndarray) -> Schedule:
    spacing = times[1] - times[0] if times.size > 1 else 0.0
    if times[0] != 0 or (times.size > 1 and not np.allclose(np.diff(times), spacing)):
        raise ValueError("emulation needs an evenly spaced grid starting at t = 0")
    return Schedule(times.size, float(spacing))


def _emulate_with_rates(device, prep, schedule, shots, seed, tomography, frame, gamma_z) -> ExperimentRecord:
    if gamma_z is None:
        return emulate_experiment(device, prep, schedule, shots, seed, tomography=tomography, frame=frame)
    # T2 equivalent to the overridden dephasing rate
    t2 = 1.0 / (0.5 / device.t1_us + 4.0 * gamma_z)
    return emulate_experiment(device.replace(t2_us=t2), prep, schedule, shots, seed, tomography=tomography, frame=frame)


def dephasing_ratio(device: DeviceParams) -> float:
    rates = rates_from_calibration(device)
    return rates.gamma_z / critical_dephasing(rates)


# --- fitting the bath temperature ------------------------------------------------------


@dataclass
class FitOutcome:
    prep: str
    fit: RelaxationFit
    temperature: TemperatureEstimate | None
    times: np.ndarray
    p00: np.ndarray


def fit_record(record: ExperimentRecord, fixed_rate: bool = False) -> FitOutcome:
    """Reconstruct ground populations from counts and fit the relaxation curve.

    ``fixed_rate`` pins the decay rate to ``1/T1`` from the record's
    calibration so that only the amplitude and the equilibrium level float.
    """
    traj = reconstruct_trajectory(record)
    p00 = traj.populations[:, 0]
    rate = 1.0 / record.device.t1_us if fixed_rate else None
    fit = fit_relaxation(traj.times, p00, fixed_rate=rate)
    try:
        temp = estimate_equilibrium_temperature(fit, record.device.gap_mk)
    except ValueError:
        temp = None
    return FitOutcome(record.prep, fit, temp, traj.times, p00)


def emulate_and_fit(
    device: DeviceParams,
    prep: str,
    schedule: Schedule,
    seed: int,
    shots: int = DEFAULT_SHOTS,
    tomography: bool = False,
    frame: str = "rotating",
) -> FitOutcome:
    record = emulate_experiment(device, prep, schedule, shots, seed, tomography=tomography, frame=frame)
    return fit_record(record)

