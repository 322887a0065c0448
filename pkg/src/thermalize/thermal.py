"""Gibbs states, Boltzmann populations and unit conversions.

Energies are kept in temperature units (E / k_B in mK) so that Boltzmann
factors are plain ratios ``E_mk / T_mk``; physical constants only enter
through :func:`gap_mk`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .core import hermitian_eigendecomposition
from .errors import InfiniteTemperature, UnphysicalCalibration, ZeroTemperature

#: h / k_B expressed in mK per GHz (linear frequency).
MK_PER_GHZ = constants.h / constants.k * 1e9 * 1e3

#: Above this a two-level population ratio is treated as infinite temperature.
MAX_FINITE_TEMPERATURE_MK = 1e12


@dataclass(frozen=True)
class DeviceParams:
    """Single-qubit calibration: frequency (GHz), T1 and T2 (µs), bath temperature (mK)."""

    omega_ghz: float
    t1_us: float
    t2_us: float
    teq_mk: float

    def __post_init__(self):
        for name in ("omega_ghz", "t1_us", "t2_us", "teq_mk"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.t2_us > 2 * self.t1_us:
            raise UnphysicalCalibration(f"T2 = {self.t2_us:g} µs exceeds 2*T1 = {2 * self.t1_us:g} µs (negative dephasing)")

    @property
    def gap_mk(self) -> float:
        return gap_mk(self.omega_ghz)

    @property
    def levels(self) -> np.ndarray:
        return qubit_levels(self.omega_ghz)

    def replace(self, **changes) -> "DeviceParams":
        fields = dict(omega_ghz=self.omega_ghz, t1_us=self.t1_us, t2_us=self.t2_us, teq_mk=self.teq_mk)
        fields.update(changes)
        return DeviceParams(**fields)

    def to_dict(self) -> dict:
        return dict(omega_ghz=self.omega_ghz, t1_us=self.t1_us, t2_us=self.t2_us, teq_mk=self.teq_mk)


# Calibration snapshots of the two devices, with the bath temperatures fitted there.
BELEM = DeviceParams(omega_ghz=5.09, t1_us=113.1, t2_us=60.3, teq_mk=67.0)
MANILA = DeviceParams(omega_ghz=4.9, t1_us=178.9, t2_us=90.6, teq_mk=58.0)
DEVICES = {"belem": BELEM, "manila": MANILA}


def gap_mk(omega_ghz: float) -> float:
    """Level splitting ``h f / k_B`` in mK for a transition frequency in GHz."""
    if not omega_ghz > 0:
        raise ValueError(f"omega_ghz must be positive, got {omega_ghz!r}")
    return omega_ghz * MK_PER_GHZ


def qubit_levels(omega_ghz: float) -> np.ndarray:
    """Energies (mK) of |0> (ground) and |1>, referenced to the ground state."""
    return np.array([0.0, gap_mk(omega_ghz)])


def gibbs_populations(levels, temperature: float) -> np.ndarray:
    """Boltzmann probabilities ``p_n ∝ exp(-E_n / T)``, overflow-safe.

    ``temperature`` may be ``math.inf``, which gives the uniform distribution.
    """
    e = np.asarray(levels, dtype=float)
    if e.ndim != 1 or e.size < 2 or not np.all(np.isfinite(e)):
        raise ValueError("levels must be a finite vector with at least two entries")
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature!r}")
    if math.isinf(temperature):
        return np.full(e.size, 1.0 / e.size)
    x = -(e - e.min()) / temperature
    w = np.exp(x - x.max())
    return w / w.sum()


def boltzmann_factor(gap: float, temperature: float) -> float:
    """``exp(-gap / T)``, the up/down rate ratio of a two-level system."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature!r}")
    return math.exp(-gap / temperature)


def temperature_from_populations(p, gap: float) -> float:
    """Invert two-level Boltzmann populations: ``T = gap / ln(p0 / p1)``."""
    p0, p1 = (float(x) for x in np.asarray(p, dtype=float).ravel())
    if p1 <= 0:
        raise ZeroTemperature(f"excited population {p1!r} implies zero temperature")
    if p0 <= p1:
        raise InfiniteTemperature(f"populations {p0!r}, {p1!r} are not ground-dominated")
    temperature = gap / math.log(p0 / p1)
    if temperature > MAX_FINITE_TEMPERATURE_MK:
        raise InfiniteTemperature(f"temperature {temperature:.3e} mK is effectively infinite")
    return temperature


def gibbs_state(hamiltonian, temperature: float, energy_unit: float = 1.0) -> np.ndarray:
    """``exp(-H / T) / Z`` with ``H`` in units where one matrix unit is ``energy_unit`` mK."""
    evals, evecs = hermitian_eigendecomposition(hamiltonian)
    p = gibbs_populations(evals * energy_unit, temperature)
    return (evecs * p) @ evecs.conj().T


def thermal_qubit(gap: float, temperature: float) -> np.ndarray:
    """Diagonal two-level Gibbs state in the computational basis."""
    return np.diag(gibbs_populations([0.0, gap], temperature)).astype(complex)
