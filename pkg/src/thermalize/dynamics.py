"""Qubit relaxation under the Markovian master equation.

Two independent propagators are provided: the closed-form solution
(:func:`propagate_analytic`) and classical RK4 on the full Lindblad generator
(:func:`propagate_numeric`). Thermal-state dynamics are assembled from
eigenstate runs by :func:`mixed_thermal_trajectory`.

Conventions
-----------
``|0>`` is the ground state and ``H = -(ħω/2) σz``. Populations relax at
``Γ1 = γ (1 + e^{-gap/T_eq})``; coherences decay at ``Γ1/2 + 4 γ_z`` and rotate
as ``ρ01 ∝ e^{+iωt}``. The dephasing dissipator is therefore written as
``2 γ_z (σz ρ σz − ρ)`` so that both propagators and the critical rate
``γ_z,c = Γ1/8`` describe the same channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Z,
    as_matrix,
    basis_state,
    check_density_matrix,
    pure_to_density,
    rk4_step_matrix,
)
from .errors import GridMismatch, StepTooLarge, UnphysicalCalibration, WeightMismatch
from .thermal import DeviceParams, boltzmann_factor, gibbs_populations

PROVENANCES = ("analytic", "integrated", "mixed", "tomographic")

# Largest allowed dt * (Γ1 + 8 γ_z + ω) for the RK4 integrator.
RK4_STABILITY_LIMIT = 0.1


@dataclass(frozen=True)
class LindbladRates:
    """Rates in 1/µs (``omega_rad_per_us`` in rad/µs) for the qubit master equation."""

    gamma: float
    gamma_z: float
    boltzmann_factor: float
    omega_rad_per_us: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if not self.gamma_z >= 0:
            raise ValueError(f"gamma_z must be non-negative, got {self.gamma_z!r}")
        if not 0 <= self.boltzmann_factor < 1:
            raise ValueError(f"boltzmann_factor must lie in [0, 1), got {self.boltzmann_factor!r}")

    @property
    def gamma1(self) -> float:
        """Population relaxation rate, equal to 1/T1."""
        return self.gamma * (1.0 + self.boltzmann_factor)

    @property
    def coherence_rate(self) -> float:
        """Decay rate of |ρ01|, equal to 1/T2."""
        return 0.5 * self.gamma1 + 4.0 * self.gamma_z

    @property
    def equilibrium_populations(self) -> np.ndarray:
        b = self.boltzmann_factor
        return np.array([1.0, b]) / (1.0 + b)

    @property
    def equilibrium_state(self) -> np.ndarray:
        return np.diag(self.equilibrium_populations).astype(complex)

    def rotating(self) -> "LindbladRates":
        """Same channel seen from the frame co-rotating with the qubit."""
        return replace(self, omega_rad_per_us=0.0)

    def with_gamma_z(self, gamma_z: float) -> "LindbladRates":
        return replace(self, gamma_z=gamma_z)


def rates_from_calibration(params: DeviceParams, frame: str = "lab") -> LindbladRates:
    """Derive master-equation rates from T1, T2 and the bath temperature.

    ``1/T1 = γ (1 + e^{-gap/T_eq})`` and ``1/T2 = 1/(2 T1) + 4 γ_z``.
    ``frame="rotating"`` drops the coherent ``e^{iωt}`` rotation.
    """
    if params.t2_us > 2 * params.t1_us:
        raise UnphysicalCalibration(
            f"T2 = {params.t2_us} µs exceeds 2*T1 = {2 * params.t1_us} µs (negative dephasing)"
        )
    if frame not in ("lab", "rotating"):
        raise ValueError(f"frame must be 'lab' or 'rotating', got {frame!r}")
    b = boltzmann_factor(params.gap_mk, params.teq_mk)
    gamma = (1.0 / params.t1_us) / (1.0 + b)
    gamma_z = max((1.0 / params.t2_us - 0.5 / params.t1_us) / 4.0, 0.0)
    omega = 2 * math.pi * params.omega_ghz * 1e3 if frame == "lab" else 0.0
    return LindbladRates(gamma=gamma, gamma_z=gamma_z, boltzmann_factor=b, omega_rad_per_us=omega)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered snapshots ``states[k]`` at ``times[k]`` (µs)."""

    times: np.ndarray
    states: np.ndarray
    provenance: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=complex)
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if times.ndim != 1 or states.ndim != 3 or states.shape[0] != times.size:
            raise ValueError(f"times {times.shape} and states {states.shape} disagree")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly ascending")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.times.size

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.states, axis1=1, axis2=2))

    def validate(self, psd_tol: float = 1e-10) -> "Trajectory":
        for rho in self.states:
            check_density_matrix(rho, psd_tol=psd_tol)
        return self


def lindblad_rhs(rho: np.ndarray, rates: LindbladRates) -> np.ndarray:
    """Right-hand side of the qubit master equation for one 2x2 matrix."""
    h = -0.5 * rates.omega_rad_per_us * SIGMA_Z  # H / ħ
    out = -1j * (h @ rho - rho @ h)
    for op, rate in ((SIGMA_MINUS, rates.gamma), (SIGMA_PLUS, rates.gamma * rates.boltzmann_factor)):
        op_dag = op.conj().T
        n = op_dag @ op
        out = out + rate * (op @ rho @ op_dag - 0.5 * (n @ rho + rho @ n))
    out = out + 2.0 * rates.gamma_z * (SIGMA_Z @ rho @ SIGMA_Z - rho)
    return out


def lindblad_generator(rates: LindbladRates) -> np.ndarray:
    """4x4 superoperator ``L`` with ``d vec(ρ)/dt = L vec(ρ)`` (row-major vec)."""
    gen = np.zeros((4, 4), dtype=complex)
    for k in range(4):
        e = np.zeros(4, dtype=complex)
        e[k] = 1.0
        gen[:, k] = lindblad_rhs(e.reshape(2, 2), rates).ravel()
    return gen


def _analytic_states(rho0: np.ndarray, rates: LindbladRates, times: np.ndarray) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    pop_decay = np.exp(-rates.gamma1 * t)
    coh = np.exp(-rates.coherence_rate * t + 1j * rates.omega_rad_per_us * t)
    p0_eq, p1_eq = rates.equilibrium_populations
    out = np.empty(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = (rho0[0, 0].real - p0_eq) * pop_decay + p0_eq
    out[..., 1, 1] = (rho0[1, 1].real - p1_eq) * pop_decay + p1_eq
    out[..., 0, 1] = rho0[0, 1] * coh
    out[..., 1, 0] = rho0[1, 0] * np.conj(coh)
    return out


def propagate_analytic(rho0, rates: LindbladRates, t: float) -> np.ndarray:
    """Closed-form state at time ``t`` (µs) starting from a 2x2 ``rho0``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    rho0 = as_matrix(rho0)
    if t == 0:
        return rho0.copy()
    return _analytic_states(rho0, rates, np.asarray(t))


def analytic_trajectory(rho0, rates: LindbladRates, times) -> Trajectory:
    rho0 = as_matrix(rho0)
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    states = _analytic_states(rho0, rates, times)
    states[times == 0] = rho0
    return Trajectory(times, states, "analytic")


def default_dt(rates: LindbladRates, t2_us: float | None = None) -> float:
    """``min(0.01 µs, T2/1000)``, shrunk further if the stability guard demands it."""
    t2 = t2_us if t2_us is not None else 1.0 / rates.coherence_rate
    dt = min(0.01, t2 / 1000.0)
    scale = _stiffness(rates)
    if dt * scale > RK4_STABILITY_LIMIT:
        dt = 0.5 * RK4_STABILITY_LIMIT / scale
    return dt


def _stiffness(rates: LindbladRates) -> float:
    return rates.gamma1 + 8.0 * rates.gamma_z + abs(rates.omega_rad_per_us)


def integrate_numeric(initial_states, rates: LindbladRates, times, dt: float) -> np.ndarray:
    """RK4-integrate a batch of 2x2 states, sampling at every entry of ``times``.

    ``initial_states`` has shape ``(k, 2, 2)``; the result has shape
    ``(len(times), k, 2, 2)``. Between samples the step is shrunk so each
    sample lands on a step boundary. Hermiticity is restored after every step.
    """
    rhos = np.asarray(initial_states, dtype=complex)
    if rhos.ndim == 2:
        rhos = rhos[None]
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt * _stiffness(rates) > RK4_STABILITY_LIMIT:
        raise StepTooLarge(
            f"dt*(Γ1 + 8γz + ω) = {dt * _stiffness(rates):.3g} > {RK4_STABILITY_LIMIT}"
        )

    gen = lindblad_generator(rates)
    k = rhos.shape[0]
    vec = rhos.reshape(k, 4).T.copy()
    out = np.empty((times.size, k, 2, 2), dtype=complex)
    step_cache: dict[float, np.ndarray] = {}
    t_now = 0.0
    for i, t_target in enumerate(times):
        span = t_target - t_now
        n_steps = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
        if n_steps:
            h = span / n_steps
            prop = step_cache.get(h)
            if prop is None:
                prop = step_cache.setdefault(h, rk4_step_matrix(gen, h))
            for _ in range(n_steps):
                vec = prop @ vec
                m = vec.reshape(2, 2, k)
                vec = (0.5 * (m + m.conj().transpose(1, 0, 2))).reshape(4, k)
        t_now = t_target
        out[i] = vec.T.reshape(k, 2, 2)
    return out


def propagate_numeric(rho0, rates: LindbladRates, t: float, dt: float | None = None) -> np.ndarray:
    """RK4 solution of the full master equation at time ``t`` (µs)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    rho0 = as_matrix(rho0)
    if t == 0:
        return rho0.copy()
    dt = default_dt(rates) if dt is None else dt
    if dt > t:
        dt = t
    return integrate_numeric(rho0[None], rates, [t], dt)[0, 0]


def numeric_trajectory(rho0, rates: LindbladRates, times, dt: float | None = None) -> Trajectory:
    rho0 = as_matrix(rho0)
    dt = default_dt(rates) if dt is None else dt
    states = integrate_numeric(rho0[None], rates, times, dt)[:, 0]
    return Trajectory(times, states, "integrated")


def mixed_thermal_trajectory(eigen_trajectories: Sequence[Trajectory], weights) -> Trajectory:
    """Boltzmann-weighted sum of eigenstate trajectories sharing one time grid."""
    trajs = list(eigen_trajectories)
    w = np.asarray(weights, dtype=float)
    if not trajs:
        raise WeightMismatch("no trajectories to mix")
    if w.ndim != 1 or w.size != len(trajs):
        raise WeightMismatch(f"{w.size} weights for {len(trajs)} trajectories")
    times = trajs[0].times
    for tr in trajs[1:]:
        if tr.times.shape != times.shape or not np.array_equal(tr.times, times):
            raise GridMismatch("eigenstate trajectories use different time grids")
    states = np.tensordot(w, np.stack([tr.states for tr in trajs]), axes=1)
    return Trajectory(times, states, "mixed")


def jittered_rates(rates: LindbladRates, jitter: float, rng: np.random.Generator) -> LindbladRates:
    """Multiply γ and γ_z by independent factors ``1 + jitter * N(0, 1)`` (floored at 1e-3)."""
    f_gamma, f_z = np.maximum(1.0 + jitter * rng.standard_normal(2), 1e-3)
    return replace(rates, gamma=rates.gamma * f_gamma, gamma_z=rates.gamma_z * f_z)


def eigenstate_trajectories(
    rates: LindbladRates,
    times,
    jitter: float = 0.0,
    seed: int | None = None,
) -> list[Trajectory]:
    """Analytic runs from |0> and |1>; ``jitter`` perturbs each run's rates independently."""
    rng = np.random.default_rng(seed)
    trajs = []
    for n in range(2):
        run_rates = jittered_rates(rates, jitter, rng) if jitter else rates
        trajs.append(analytic_trajectory(pure_to_density(basis_state(n)), run_rates, times))
    return trajs


def thermal_trajectory(rates: LindbladRates, gap: float, temperature: float, times, **kwargs) -> Trajectory:
    """Trajectory of the Gibbs state at ``temperature`` built by eigenstate mixing."""
    weights = gibbs_populations([0.0, gap], temperature)
    return mixed_thermal_trajectory(eigenstate_trajectories(rates, times, **kwargs), weights)
