"""Shot-level emulation of single-qubit relaxation experiments.

Counts are drawn by inverse-CDF binomial sampling from uniforms produced by
numpy's PCG64 generator. Every (snapshot, basis) pair gets its own stream,
seeded with ``SeedSequence([seed, snapshot_index, basis_index])``, so results
are bit-reproducible and independent of evaluation order.

``shots = 0`` selects exact-frequency mode: the ``counts`` map then holds the
Born-rule probabilities themselves.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import jsonschema
import numpy as np
from scipy.stats import binom

from .core import SIGMA_X, SIGMA_Y, SIGMA_Z, as_matrix, pure_to_density
from .dynamics import Trajectory, analytic_trajectory, rates_from_calibration
from .errors import EmptyExperiment, MissingBasis, SchemaError, WrongBasis
from .thermal import DeviceParams

BASES = ("X", "Y", "Z")
PAULI = {"X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}

PREPS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "psi1": np.array([2, 1], dtype=complex) / math.sqrt(5),
    "psi2": np.array([3, 1], dtype=complex) / math.sqrt(10),
    "plus": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "minus": np.array([1, -1], dtype=complex) / math.sqrt(2),
}


def prep_state(label: str) -> np.ndarray:
    try:
        return PREPS[label].copy()
    except KeyError:
        raise ValueError(f"unknown preparation {label!r}; known: {sorted(PREPS)}") from None


@dataclass(frozen=True)
class CountsRecord:
    t_us: float
    basis: str
    counts: dict
    shots: int

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}, got {self.basis!r}")
        if set(self.counts) - {"0", "1"}:
            raise ValueError(f"unexpected outcome labels {sorted(set(self.counts) - {'0', '1'})}")
        counts = {"0": self.counts.get("0", 0), "1": self.counts.get("1", 0)}
        if any(c < 0 for c in counts.values()):
            raise ValueError("counts must be non-negative")
        if self.shots < 0:
            raise ValueError("shots must be non-negative")
        total = counts["0"] + counts["1"]
        if self.shots == 0:
            if abs(total - 1.0) > 1e-12:
                raise ValueError("exact-frequency record must hold probabilities summing to 1")
        elif total != self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots}")
        object.__setattr__(self, "counts", counts)

    def frequency(self, outcome: str = "0") -> float:
        if self.shots == 0:
            return float(self.counts[outcome])
        return self.counts[outcome] / self.shots

    @property
    def expectation(self) -> float:
        """Estimate of the Pauli expectation value, ``P(0) − P(1)``."""
        return self.frequency("0") - self.frequency("1")

    def to_dict(self) -> dict:
        return {"t_us": self.t_us, "basis": self.basis, "shots": self.shots, "counts": dict(self.counts)}


@dataclass(frozen=True)
class ExperimentRecord:
    device: DeviceParams
    prep: str
    snapshots: tuple
    seed: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        times = [s.t_us for s in snaps]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("snapshots must be in ascending time order")
        for t, group in self.grouped().items():
            bases = sorted(r.basis for r in group)
            if bases not in (["Z"], ["X", "Y", "Z"]):
                raise ValueError(f"snapshot at t = {t} µs has bases {bases}; need Z or X, Y, Z")

    def grouped(self) -> dict[float, list[CountsRecord]]:
        out: dict[float, list[CountsRecord]] = {}
        for rec in self.snapshots:
            out.setdefault(rec.t_us, []).append(rec)
        return out

    @property
    def times(self) -> np.ndarray:
        return np.array(sorted(self.grouped()))

    def to_dict(self) -> dict:
        return {
            "device": self.device.to_dict(),
            "prep": self.prep,
            "seed": self.seed,
            "snapshots": [s.to_dict() for s in self.snapshots],
        }


def born_probability(rho, basis: str) -> float:
    """Probability of outcome "0" when measuring ``basis`` on a qubit state."""
    r = np.real(np.trace(as_matrix(rho) @ PAULI[basis]))
    return float(np.clip(0.5 * (1.0 + r), 0.0, 1.0))


def _binomial_inverse(u: float, n: int, p: float) -> int:
    if p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    return int(binom.ppf(u, n, p))


def sample_counts(
    rho,
    basis: str,
    shots: int,
    seed,
    t_us: float = 0.0,
    readout_error: float = 0.0,
) -> CountsRecord:
    """Measure ``rho`` in a Pauli basis ``shots`` times.

    ``seed`` is anything :class:`numpy.random.SeedSequence` accepts. A
    symmetric readout flip with probability ``readout_error`` is applied to
    the outcome distribution before sampling.
    """
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}, got {basis!r}")
    if shots < 0:
        raise ValueError("shots must be >= 0 (0 selects exact frequencies)")
    p0 = born_probability(rho, basis)
    p0 = p0 * (1 - readout_error) + (1 - p0) * readout_error
    if shots == 0:
        return CountsRecord(t_us, basis, {"0": p0, "1": 1.0 - p0}, 0)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    n0 = _binomial_inverse(rng.random(), shots, p0)
    return CountsRecord(t_us, basis, {"0": n0, "1": shots - n0}, shots)


def populations_from_counts(record: CountsRecord) -> np.ndarray:
    if record.basis != "Z":
        raise WrongBasis(f"populations need a Z-basis record, got {record.basis}")
    return np.array([record.frequency("0"), record.frequency("1")])


def bloch_to_density(r) -> np.ndarray:
    rx, ry, rz = r
    return 0.5 * (np.eye(2) + rx * SIGMA_X + ry * SIGMA_Y + rz * SIGMA_Z)


def density_to_bloch(rho) -> np.ndarray:
    rho = as_matrix(rho)
    return np.array([np.real(np.trace(rho @ PAULI[b])) for b in BASES])


def tomographic_reconstruction(records: Iterable[CountsRecord] | Mapping[str, CountsRecord]) -> np.ndarray:
    """Linear-inversion qubit tomography with radial repair.

    Bloch components are the X, Y, Z expectation estimates; a vector longer
    than 1 is rescaled onto the sphere, giving the nearest pure state along
    the same direction.
    """
    by_basis = dict(records) if isinstance(records, Mapping) else {r.basis: r for r in records}
    missing = [b for b in BASES if b not in by_basis]
    if missing:
        raise MissingBasis(f"missing bases {missing}")
    r = np.array([by_basis[b].expectation for b in BASES])
    norm = np.linalg.norm(r)
    if norm > 1.0:
        r = r / norm
    return bloch_to_density(r)


@dataclass(frozen=True)
class Schedule:
    n_snapshots: int
    spacing_us: float

    def __post_init__(self):
        if self.n_snapshots < 1 or self.spacing_us < 0 or (self.n_snapshots > 1 and self.spacing_us == 0):
            raise ValueError(f"invalid schedule {self}")

    @property
    def times(self) -> np.ndarray:
        return self.spacing_us * np.arange(self.n_snapshots)


BELEM_SCHEDULE = Schedule(33, 8.0)
MANILA_SCHEDULE = Schedule(100, 32.0)
DEFAULT_SHOTS = 8192


def emulate_experiment(
    device: DeviceParams,
    prep,
    schedule: Schedule,
    shots: int = DEFAULT_SHOTS,
    seed: int = 0,
    tomography: bool = False,
    frame: str = "rotating",
    readout_error: float = 0.0,
) -> ExperimentRecord:
    """Prepare ``prep``, let it relax under the device's channel and sample every snapshot.

    ``prep`` is a label from :data:`PREPS` or a normalized state vector.
    """
    if isinstance(prep, str):
        label, psi = prep, prep_state(prep)
    else:
        label, psi = "custom", np.asarray(prep, dtype=complex)
    rates = rates_from_calibration(device, frame=frame)
    traj = analytic_trajectory(pure_to_density(psi), rates, schedule.times)
    bases = BASES if tomography else ("Z",)
    snaps = []
    for i, (t, rho) in enumerate(zip(traj.times, traj.states)):
        for b in bases:
            snaps.append(
                sample_counts(rho, b, shots, [seed, i, BASES.index(b)], t_us=float(t), readout_error=readout_error)
            )
    return ExperimentRecord(device, label, tuple(snaps), seed)


def reconstruct_trajectory(record: ExperimentRecord) -> Trajectory:
    """Per-snapshot states: full tomography where X, Y, Z exist, diagonal otherwise."""
    groups = record.grouped()
    if not groups:
        raise EmptyExperiment("record has no snapshots")
    times = sorted(groups)
    states = []
    for t in times:
        group = groups[t]
        if len(group) == 3:
            states.append(tomographic_reconstruction(group))
        else:
            p = populations_from_counts(group[0])
            states.append(np.diag(p).astype(complex))
    return Trajectory(np.array(times), np.array(states), "tomographic")


# --- JSON wire format -------------------------------------------------------------

_NUMBER = {"type": "number"}
RECORD_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["device", "prep", "seed", "snapshots"],
    "properties": {
        "device": {
            "type": "object",
            "additionalProperties": False,
            "required": ["omega_ghz", "t1_us", "t2_us", "teq_mk"],
            "properties": {
                "omega_ghz": {"type": "number", "exclusiveMinimum": 0},
                "t1_us": {"type": "number", "exclusiveMinimum": 0},
                "t2_us": {"type": "number", "exclusiveMinimum": 0},
                "teq_mk": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "prep": {"type": "string"},
        "seed": {"type": "integer"},
        "snapshots": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["t_us", "basis", "shots", "counts"],
                "properties": {
                    "t_us": {"type": "number", "minimum": 0},
                    "basis": {"enum": list(BASES)},
                    "shots": {"type": "integer", "minimum": 0},
                    "counts": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {"0": {"type": "number", "minimum": 0}, "1": {"type": "number", "minimum": 0}},
                    },
                },
            },
        },
    },
}


def _json_path(error: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in error.absolute_path)


def validate_against(schema: dict, payload, what: str = "document") -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{_json_path(e)}: {e.message}" for e in errors]
        raise SchemaError(f"invalid {what}:\n  " + "\n  ".join(lines))


def load_json_text(text: str, what: str = "document"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed {what}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def record_from_dict(payload: dict) -> ExperimentRecord:
    validate_against(RECORD_SCHEMA, payload, "experiment record")
    try:
        snaps = []
        for i, s in enumerate(payload["snapshots"]):
            counts = dict(s["counts"])
            if s["shots"] > 0:
                if any(float(v) != int(v) for v in counts.values()):
                    raise ValueError(f"$.snapshots[{i}].counts: counts must be integers when shots > 0")
                counts = {k: int(v) for k, v in counts.items()}
            try:
                snaps.append(CountsRecord(float(s["t_us"]), s["basis"], counts, int(s["shots"])))
            except ValueError as exc:
                raise ValueError(f"$.snapshots[{i}]: {exc}") from None
        return ExperimentRecord(DeviceParams(**payload["device"]), payload["prep"], tuple(snaps), payload["seed"])
    except ValueError as exc:
        raise SchemaError(f"invalid experiment record: {exc}") from exc


def record_to_json(record: ExperimentRecord) -> str:
    return json.dumps(record.to_dict(), indent=1)


def record_from_json(text: str) -> ExperimentRecord:
    return record_from_dict(load_json_text(text, "experiment record"))


def mixed_populations(records: Sequence[CountsRecord], weights) -> np.ndarray:
    """Weighted mixture of per-eigenstate Z-basis populations."""
    w = np.asarray(weights, dtype=float)
    return np.tensordot(w, np.array([populations_from_counts(r) for r in records]), axes=1)
