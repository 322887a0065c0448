import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermalize.core import basis_state, pure_to_density
from thermalize.dynamics import analytic_trajectory, rates_from_calibration
from thermalize.errors import EmptyExperiment, MissingBasis, SchemaError, WrongBasis
from thermalize.hwemu import (
    BELEM_SCHEDULE,
    MANILA_SCHEDULE,
    CountsRecord,
    ExperimentRecord,
    Schedule,
    bloch_to_density,
    density_to_bloch,
    emulate_experiment,
    mixed_populations,
    populations_from_counts,
    prep_state,
    reconstruct_trajectory,
    record_from_dict,
    record_from_json,
    record_to_json,
    sample_counts,
    tomographic_reconstruction,
)
from thermalize.metrics import trace_distance
from thermalize.thermal import BELEM, MANILA, gibbs_populations

from conftest import random_density

PSI1 = pure_to_density(prep_state("psi1"))


def _exact(rho, t=0.0):
    return [sample_counts(rho, b, 0, None, t_us=t) for b in "XYZ"]


def test_deterministic_outcome():
    for shots in (1, 17, 8192):
        rec = sample_counts(pure_to_density(basis_state(0)), "Z", shots, 3)
        assert rec.counts == {"0": shots, "1": 0}


def test_born_rule_large_sample():
    rec = sample_counts(PSI1, "Z", 10**6, 11)
    sigma = np.sqrt(0.8 * 0.2 / 10**6)
    assert abs(rec.frequency("0") - 0.8) < 4 * sigma


def test_seeded_counts_are_golden():
    rec = sample_counts(np.eye(2) / 2, "X", 8192, 42)
    assert rec.counts == {"0": 4130, "1": 4062}
    assert sample_counts(np.eye(2) / 2, "X", 8192, 42) == rec
    assert sample_counts(np.eye(2) / 2, "X", 8192, 43) != rec


def test_readout_error_flips_outcomes():
    rec = sample_counts(pure_to_density(basis_state(0)), "Z", 0, None, readout_error=0.1)
    assert rec.frequency("0") == pytest.approx(0.9)


def test_tomography_examples():
    assert np.allclose(tomographic_reconstruction(_exact(pure_to_density(basis_state(0)))), np.diag([1, 0]))
    rho = tomographic_reconstruction(_exact(PSI1))
    assert np.allclose(density_to_bloch(rho), [0.8, 0, 0.6], atol=1e-15)
    assert np.allclose(rho, [[0.8, 0.4], [0.4, 0.2]], atol=1e-15)
    # Bloch vector (1, 0, 0.2) has length 1.02: repaired onto the sphere along r
    long_x = [
        CountsRecord(0.0, "X", {"0": 1.0, "1": 0.0}, 0),
        CountsRecord(0.0, "Y", {"0": 0.5, "1": 0.5}, 0),
        CountsRecord(0.0, "Z", {"0": 0.6, "1": 0.4}, 0),
    ]
    r = np.array([1.0, 0.0, 0.2])
    repaired = tomographic_reconstruction(long_x)
    assert np.linalg.norm(density_to_bloch(repaired)) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(density_to_bloch(repaired), r / np.linalg.norm(r), atol=1e-12)
    assert np.linalg.eigvalsh(repaired).max() == pytest.approx(1.0, abs=1e-12)


def test_tomography_needs_all_bases():
    with pytest.raises(MissingBasis):
        tomographic_reconstruction(_exact(PSI1)[:2])


def test_populations_from_counts_examples():
    assert np.allclose(populations_from_counts(CountsRecord(0, "Z", {"0": 8192, "1": 0}, 8192)), [1, 0])
    assert np.allclose(populations_from_counts(CountsRecord(0, "Z", {"0": 4096, "1": 4096}, 8192)), [0.5, 0.5])
    p = populations_from_counts(CountsRecord(0, "Z", {"0": 7987, "1": 205}, 8192))
    assert np.allclose(p, [0.97498, 0.02502], atol=1e-5)
    with pytest.raises(WrongBasis):
        populations_from_counts(CountsRecord(0, "X", {"0": 1, "1": 0}, 1))


def test_counts_record_validation():
    with pytest.raises(ValueError):
        CountsRecord(0, "Z", {"0": 3, "1": 3}, 7)
    with pytest.raises(ValueError):
        CountsRecord(0, "W", {"0": 1, "1": 0}, 1)


def test_emulate_shapes():
    belem = emulate_experiment(BELEM, "psi1", BELEM_SCHEDULE, 8192, 1, tomography=True)
    assert len(belem.snapshots) == 33 * 3 and len(belem.times) == 33
    assert belem.times[-1] == pytest.approx(256.0)
    manila = emulate_experiment(MANILA, "0", MANILA_SCHEDULE, 8192, 1)
    assert len(manila.snapshots) == 100 and {s.basis for s in manila.snapshots} == {"Z"}
    single = emulate_experiment(MANILA, "0", Schedule(1, 0.0), 8192, 5)
    assert len(single.snapshots) == 1 and single.snapshots[0].frequency("0") == 1.0


def test_emulation_is_reproducible():
    a = emulate_experiment(BELEM, "psi2", Schedule(5, 8.0), 8192, 9, tomography=True)
    b = emulate_experiment(BELEM, "psi2", Schedule(5, 8.0), 8192, 9, tomography=True)
    assert a == b
    c = emulate_experiment(BELEM, "psi2", Schedule(5, 8.0), 8192, 10, tomography=True)
    assert a != c


def test_reconstruct_trajectory():
    rates = rates_from_calibration(BELEM, frame="rotating")
    z_only = emulate_experiment(BELEM, "psi1", Schedule(4, 10.0), 8192, 2)
    traj = reconstruct_trajectory(z_only)
    assert traj.provenance == "tomographic"
    assert np.all(traj.states[:, 0, 1] == 0)
    exact = emulate_experiment(BELEM, "psi1", Schedule(6, 20.0), 0, 0, tomography=True)
    truth = analytic_trajectory(PSI1, rates, exact.times).states
    assert np.max(np.abs(reconstruct_trajectory(exact).states - truth)) <= 1e-12
    with pytest.raises(EmptyExperiment):
        reconstruct_trajectory(ExperimentRecord(BELEM, "0", (), 0))


@given(st.integers(0, 2**32 - 1))
def test_exact_mode_round_trip(seed):
    rho = random_density(np.random.default_rng(seed), rank=int(seed % 2) + 1)
    assert np.max(np.abs(tomographic_reconstruction(_exact(rho)) - rho)) <= 1e-12


def test_bloch_round_trip():
    r = np.array([0.1, -0.4, 0.3])
    assert np.allclose(density_to_bloch(bloch_to_density(r)), r)


def test_mixing_commutes_with_measurement():
    rates = rates_from_calibration(MANILA, frame="rotating")
    w = gibbs_populations(MANILA.levels, 90.0)
    for t in (0.0, 100.0, 1000.0):
        eig = [analytic_trajectory(pure_to_density(basis_state(n)), rates, [t]).states[0] for n in (0, 1)]
        recs = [sample_counts(rho, "Z", 0, None, t_us=t) for rho in eig]
        mixture = w[0] * eig[0] + w[1] * eig[1]
        assert np.allclose(mixed_populations(recs, w), np.diag(mixture).real, atol=1e-15)


def test_json_round_trip():
    rec = emulate_experiment(BELEM, "psi1", Schedule(3, 8.0), 8192, 4, tomography=True)
    assert record_from_json(record_to_json(rec)) == rec
    exact = emulate_experiment(BELEM, "psi1", Schedule(3, 8.0), 0, 4, tomography=True)
    assert record_from_json(record_to_json(exact)) == exact


def _payload():
    return json.loads(record_to_json(emulate_experiment(MANILA, "0", Schedule(4, 32.0), 100, 1)))


def test_json_rejects_unknown_fields():
    payload = _payload()
    payload["operator"] = "x"
    with pytest.raises(SchemaError, match="operator"):
        record_from_dict(payload)
    payload = _payload()
    payload["snapshots"][2]["phase"] = 0
    with pytest.raises(SchemaError, match=r"\$\.snapshots\[2\]"):
        record_from_dict(payload)


def test_json_reports_field_paths():
    payload = _payload()
    payload["snapshots"][3]["counts"]["0"] = -1
    with pytest.raises(SchemaError, match=r"\$\.snapshots\[3\]\.counts\.0"):
        record_from_dict(payload)
    payload = _payload()
    payload["snapshots"][1]["counts"] = {"0": 1, "1": 1}
    with pytest.raises(SchemaError, match=r"\$\.snapshots\[1\]"):
        record_from_dict(payload)
    payload = _payload()
    del payload["device"]["t1_us"]
    with pytest.raises(SchemaError, match="t1_us"):
        record_from_dict(payload)


def test_json_reports_line_and_column():
    with pytest.raises(SchemaError, match="line 2, column"):
        record_from_json('{"device": {},\n "prep": ,}')


def test_tomography_accuracy_small_sample():
    rng = np.random.default_rng(8)
    errs = []
    for k in range(50):
        rho = random_density(rng)
        recs = [sample_counts(rho, b, 8192, [1234, k, i]) for i, b in enumerate("XYZ")]
        errs.append(trace_distance(tomographic_reconstruction(recs), rho))
    assert np.mean(errs) < 0.02
