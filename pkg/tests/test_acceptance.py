"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import time

import numpy as np

from thermalize.core import basis_state, pure_to_density
from thermalize.dynamics import (
    analytic_trajectory,
    eigenstate_trajectories,
    integrate_numeric,
    mixed_thermal_trajectory,
    rates_from_calibration,
)
from thermalize.errors import DegenerateLambda2
from thermalize.experiments import (
    dephasing_ratio,
    distance_vs_temperature,
    emulate_and_fit,
    equidistant_quench,
    hot_vs_cold,
    temperature_grid,
)
from thermalize.hwemu import (
    BELEM_SCHEDULE,
    MANILA_SCHEDULE,
    Schedule,
    bloch_to_density,
    prep_state,
    sample_counts,
    tomographic_reconstruction,
)
from thermalize.metrics import classical_kl, entropic_distance, entropic_distance_direct, relative_entropy, trace_distance
from thermalize.spectral import (
    critical_dephasing,
    entropic_crossing,
    find_qme_instance,
    predict_qme,
    random_three_level_instance,
)
from thermalize.thermal import BELEM, MANILA, gibbs_populations, thermal_qubit

RESULTS = {}


def report(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def test_criterion_1_protocol_identity():
    start = time.perf_counter()
    rates = rates_from_calibration(MANILA, frame="rotating")
    times = MANILA_SCHEDULE.times
    temps = np.random.default_rng(2024).uniform(10.0, 1000.0, 20)
    eigen = eigenstate_trajectories(rates, times)
    worst = 0.0
    for temp in temps:
        mixed = mixed_thermal_trajectory(eigen, gibbs_populations(MANILA.levels, temp))
        direct = analytic_trajectory(thermal_qubit(MANILA.gap_mk, temp), rates, times)
        worst = max(worst, float(np.max(np.abs(mixed.states - direct.states))))
    elapsed = time.perf_counter() - start
    report(1, "protocol identity", worst <= 1e-12 and elapsed < 1.0, f"max dev {worst:.2e} (<= 1e-12), {elapsed:.2f} s (< 1 s)")


def test_criterion_2_analytic_vs_rk4():
    start = time.perf_counter()
    rates = rates_from_calibration(BELEM, frame="rotating")
    initial = [
        pure_to_density(basis_state(0)),
        pure_to_density(basis_state(1)),
        pure_to_density(prep_state("psi1")),
        pure_to_density(prep_state("psi2")),
        thermal_qubit(BELEM.gap_mk, 200.0),
    ]
    times = np.linspace(0.0, 565.0, 227)
    numeric = integrate_numeric(np.stack(initial), rates, times, dt=0.01)
    worst = 0.0
    for k, rho0 in enumerate(initial):
        exact = analytic_trajectory(rho0, rates, times).states
        worst = max(worst, float(np.max(np.abs(numeric[:, k] - exact))))
    elapsed = time.perf_counter() - start
    report(2, "analytic vs RK4", worst <= 1e-6 and elapsed < 10.0, f"max dev {worst:.2e} (<= 1e-6), {elapsed:.2f} s (< 10 s)")


def test_criterion_3_equilibrium_temperature():
    start = time.perf_counter()
    details, ok = [], True
    for device, schedule in ((MANILA, MANILA_SCHEDULE), (BELEM, BELEM_SCHEDULE)):
        hits = 0
        for seed in range(100):
            out = emulate_and_fit(device, "0", schedule, seed, shots=8192, tomography=True)
            hits += out.temperature is not None and abs(out.temperature.value - device.teq_mk) <= 3.0
        ok &= hits >= 90
        details.append(f"{device.teq_mk:g} mK: {hits}/100 within 3 mK")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60.0
    report(3, "T_eq recovery", ok, f"{'; '.join(details)} (>= 90), {elapsed:.1f} s (< 60 s)")


def test_criterion_4_no_qme_on_qubit():
    start = time.perf_counter()
    temps = temperature_grid(60.0, 300.0, 49)
    times = MANILA_SCHEDULE.times
    counts = {}
    for metric in ("trace", "entropic"):
        counts[metric] = len(distance_vs_temperature(MANILA, temps, times, metric, margin=1e-12).violations)
    crossing = hot_vs_cold(MANILA, 80.0, 90.0, Schedule(101, 32.0).times, "trace")
    crossing_e = hot_vs_cold(MANILA, 80.0, 90.0, Schedule(101, 32.0).times, "entropic")
    elapsed = time.perf_counter() - start
    ok = (
        counts["trace"] == 0
        and counts["entropic"] == 0
        and crossing.first_crossing_us is None
        and crossing_e.first_crossing_us is None
        and elapsed < 5.0
    )
    detail = (
        f"violations trace={counts['trace']} entropic={counts['entropic']}, "
        f"hot/cold crossing {'none' if crossing.first_crossing_us is None else crossing.first_crossing_us}, {elapsed:.2f} s (< 5 s)"
    )
    report(4, "no QME on the qubit", ok, detail)


def test_criterion_5_equidistant_ordering():
    start = time.perf_counter()
    ratio = dephasing_ratio(BELEM)
    times = BELEM_SCHEDULE.times
    gz_c = critical_dephasing(rates_from_calibration(BELEM))
    ordered, flipped = [], []
    for prep in ("psi1", "psi2"):
        for metric in ("trace", "kl"):
            res = equidistant_quench(BELEM, prep, metric, times)
            ordered.append(res.ordering_violations().size == 0)
            low = equidistant_quench(BELEM, prep, metric, times, gamma_z=gz_c / 2)
            flipped.append(bool(low.d_pure[-1] > low.d_thermal[-1]))
    elapsed = time.perf_counter() - start
    ok = abs(ratio - 2.75) <= 0.01 and all(ordered) and all(flipped) and elapsed < 5.0
    detail = (
        f"gz/gz_c = {ratio:.4f} (2.75 +- 0.01), ordering {sum(ordered)}/4, "
        f"late-time flip at gz_c/2 {sum(flipped)}/4, {elapsed:.2f} s (< 5 s)"
    )
    report(5, "equidistant ordering", ok, detail)


def test_criterion_6_synthetic_qme():
    start = time.perf_counter()
    inst, pred = find_qme_instance(1)
    witness = entropic_crossing(inst.rate_matrix, inst.levels, inst.t_cold, inst.t_hot, inst.t_eq)
    rng = np.random.default_rng(20240601)
    checked = disagreements = positives = skipped = 0
    while checked < 200:
        cand = random_three_level_instance(rng)
        try:
            p = predict_qme(cand.rate_matrix, cand.levels, cand.t_cold, cand.t_hot, cand.t_eq)
        except DegenerateLambda2:
            skipped += 1
            continue
        sim = entropic_crossing(cand.rate_matrix, cand.levels, cand.t_cold, cand.t_hot, cand.t_eq)
        disagreements += sim.crossed != p.predicts_qme
        positives += p.predicts_qme
        checked += 1
    elapsed = time.perf_counter() - start
    ok = pred.predicts_qme and witness.crossed and disagreements == 0 and elapsed < 30.0
    detail = (
        f"witness crossing at t = {witness.first_crossing_time:.4g}, "
        f"{disagreements} disagreements on {checked} instances ({positives} QME, {skipped} degenerate skipped), "
        f"{elapsed:.1f} s (< 30 s)"
    )
    report(6, "synthetic QME", ok, detail)


def test_criterion_7_metric_identity():
    rng = np.random.default_rng(7)
    worst_kl = worst_direct = worst_quantum = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(n))
        levels = np.sort(rng.uniform(0.0, 500.0, n))
        teq = float(rng.uniform(10.0, 300.0))
        q = gibbs_populations(levels, teq)
        d = entropic_distance(p, levels, teq)
        worst_kl = max(worst_kl, abs(d - classical_kl(p, q)))
        worst_direct = max(worst_direct, abs(entropic_distance_direct(p, levels, teq) - classical_kl(p, q)))
        worst_quantum = max(worst_quantum, abs(relative_entropy(np.diag(p), np.diag(q)) - d))
    ok = max(worst_kl, worst_direct, worst_quantum) <= 1e-10
    detail = f"entropic vs KL {worst_kl:.1e}, literal sum vs KL {worst_direct:.1e}, quantum vs entropic {worst_quantum:.1e} (<= 1e-10)"
    report(7, "metric identity", ok, detail)


def test_criterion_8_tomography():
    rng = np.random.default_rng(8)
    errs, exact_worst = [], 0.0
    for k in range(1000):
        r = rng.standard_normal(3)
        r *= rng.uniform() ** (1 / 3) / np.linalg.norm(r)  # uniform in the Bloch ball
        rho = bloch_to_density(r)
        recs = [sample_counts(rho, b, 8192, [808, k, i]) for i, b in enumerate("XYZ")]
        errs.append(trace_distance(tomographic_reconstruction(recs), rho))
        exact = tomographic_reconstruction([sample_counts(rho, b, 0, None) for b in "XYZ"])
        exact_worst = max(exact_worst, float(np.max(np.abs(exact - rho))))
    mean, p99 = float(np.mean(errs)), float(np.percentile(errs, 99))
    ok = mean <= 0.02 and p99 <= 0.05 and exact_worst <= 1e-12
    report(8, "tomography statistics", ok, f"mean {mean:.4f} (<= 0.02), p99 {p99:.4f} (<= 0.05), exact round trip {exact_worst:.1e} (<= 1e-12)")
