"""Spectral analysis of classical population dynamics.

Covers the Mpemba criterion on detailed-balance rate matrices, the critical
dephasing rate of the qubit channel and the equidistant-temperature search.

A rate matrix ``R`` acts on column probability vectors, ``dp/dt = R p``;
``R[i, j]`` (i != j) is the rate of flow into ``i`` from ``j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_matrix, rk4_step_matrix
from .dynamics import LindbladRates
from .errors import DegenerateLambda2, DimMismatch, NoDetailedBalance, Unreachable
from .metrics import DistanceKind, distance, kl_from_displacement
from .thermal import gibbs_populations

COLUMN_SUM_TOL = 1e-12
DETAILED_BALANCE_TOL = 1e-9
DEGENERACY_TOL = 1e-9
STATIONARY_TOL = 1e-10


def check_rate_matrix(r) -> np.ndarray:
    m = np.asarray(r, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise ValueError(f"rate matrix must be square with n >= 2, got {m.shape}")
    off = m[~np.eye(m.shape[0], dtype=bool)]
    if np.any(off < 0):
        raise ValueError("off-diagonal rates must be non-negative")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m.sum(axis=0))) > COLUMN_SUM_TOL * scale:
        raise ValueError("columns of a rate matrix must sum to zero")
    return m


def rate_matrix_from_offdiagonal(k) -> np.ndarray:
    """Fill the diagonal so that every column sums to zero."""
    m = np.array(k, dtype=float)
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, -m.sum(axis=0))
    return m


def qubit_rate_matrix(rates: LindbladRates) -> np.ndarray:
    """Population generator of the qubit channel: decay ``γ``, excitation ``γ e^{-gap/T}``."""
    down = rates.gamma
    up = rates.gamma * rates.boltzmann_factor
    return np.array([[-up, down], [up, -down]])


def stationary_distribution(r) -> np.ndarray:
    m = check_rate_matrix(r)
    _, _, vh = np.linalg.svd(m)
    v = np.real(vh[-1])
    v = v / v.sum()
    if np.any(v < -STATIONARY_TOL):
        raise NoDetailedBalance("stationary vector has negative entries (reducible generator?)")
    return np.clip(v, 0.0, None) / np.clip(v, 0.0, None).sum()


def detailed_balance_residual(r, p_eq) -> float:
    m = np.asarray(r, dtype=float)
    flux = m * np.asarray(p_eq)[None, :]
    return float(np.max(np.abs(flux - flux.T)))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Modes of a detailed-balance generator, slowest first.

    ``right[:, i]`` and ``left[i]`` are biorthonormal: ``left @ right = I``.
    ``eigenvalues[0]`` is the stationary mode (0).
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    p_eq: np.ndarray
    degenerate_lambda2: bool

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def propagate(self, p0, t) -> np.ndarray:
        """``p(t) = p_eq + Σ_i a_i e^{λ_i t} v_i``; ``t`` may be an array."""
        a = overlap_coefficients(p0, self)
        t = np.asarray(t, dtype=float)
        decay = np.exp(np.multiply.outer(t, self.eigenvalues)) * a
        return self.p_eq + decay @ self.right.T


def decompose(r, p_eq=None) -> SpectralDecomposition:
    """Diagonalize ``R`` through the symmetric form ``D^{-1/2} R D^{1/2}``, ``D = diag(p_eq)``."""
    m = check_rate_matrix(r)
    p = stationary_distribution(m) if p_eq is None else np.asarray(p_eq, dtype=float)
    if p.shape != (m.shape[0],):
        raise DimMismatch(f"stationary vector of length {p.size} for a {m.shape[0]}-state matrix")
    if np.any(p <= 0):
        raise NoDetailedBalance("stationary vector must be strictly positive")
    scale = max(1.0, float(np.max(np.abs(m))))
    if detailed_balance_residual(m, p) > DETAILED_BALANCE_TOL * scale:
        raise NoDetailedBalance(
            f"detailed-balance residual {detailed_balance_residual(m, p):.3e} exceeds tolerance"
        )
    sq = np.sqrt(p)
    sym = m * sq[None, :] / sq[:, None]
    sym = 0.5 * (sym + sym.T)
    evals, w = np.linalg.eigh(sym)
    order = np.argsort(evals)[::-1]
    evals, w = evals[order], w[:, order]
    # deterministic signs: largest-magnitude component positive
    idx = np.argmax(np.abs(w), axis=0)
    w = w * np.sign(w[idx, np.arange(w.shape[1])])
    if abs(evals[0]) > STATIONARY_TOL * scale:
        raise NoDetailedBalance(f"leading eigenvalue {evals[0]:.3e} is not zero")
    evals[0] = 0.0
    right = sq[:, None] * w
    left = (w / sq[:, None]).T
    # stationary mode normalized so that v_1 = p_eq and u_1 = (1, ..., 1)
    right[:, 0] = p
    left[0] = 1.0
    degenerate = evals.size >= 3 and abs(evals[1] - evals[2]) < DEGENERACY_TOL
    return SpectralDecomposition(evals, right, left, p, degenerate)


def overlap_coefficients(p0, sd: SpectralDecomposition) -> np.ndarray:
    """Mode amplitudes ``a_i = u_i · (p0 − p_eq)``; ``a[0]`` vanishes for normalized input."""
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != sd.p_eq.shape:
        raise DimMismatch(f"vector of length {p0.size} for a {sd.dim}-state decomposition")
    return sd.left @ (p0 - sd.p_eq)


@dataclass(frozen=True)
class QmePrediction:
    lambda2: float
    lambda3: float
    a2_cold: float
    a2_hot: float
    predicts_qme: bool
    reason: str


def predict_qme(r, levels, t_cold: float, t_hot: float, t_eq: float) -> QmePrediction:
    """Mpemba criterion ``λ2 > λ3`` and ``|a2(T_cold)| > |a2(T_hot)|`` for Gibbs initial states.

    Two-state systems have a single relaxation mode and never qualify
    (reason ``"NoThirdMode"``).
    """
    if not 0 < t_eq < t_cold < t_hot:
        raise ValueError("need 0 < t_eq < t_cold < t_hot")
    m = check_rate_matrix(r)
    e = np.asarray(levels, dtype=float)
    if e.size != m.shape[0]:
        raise DimMismatch(f"{e.size} levels for a {m.shape[0]}-state matrix")
    p_eq = gibbs_populations(e, t_eq)
    sd = decompose(m, p_eq)
    a_cold = overlap_coefficients(gibbs_populations(e, t_cold), sd)[1]
    a_hot = overlap_coefficients(gibbs_populations(e, t_hot), sd)[1]
    lam2 = float(sd.eigenvalues[1])
    if sd.dim == 2:
        return QmePrediction(lam2, math.nan, float(a_cold), float(a_hot), False, "NoThirdMode")
    if sd.degenerate_lambda2:
        raise DegenerateLambda2(f"|λ2 − λ3| = {abs(lam2 - sd.eigenvalues[2]):.3e}")
    lam3 = float(sd.eigenvalues[2])
    qme = lam2 > lam3 and abs(a_cold) > abs(a_hot)
    reason = "QME" if qme else "NormalOrdering"
    return QmePrediction(lam2, lam3, float(a_cold), float(a_hot), qme, reason)


def critical_dephasing(rates: LindbladRates) -> float:
    """Dephasing rate above which coherent states outrun equidistant thermal ones."""
    return rates.gamma * (1.0 + rates.boltzmann_factor) / 8.0


# --- independent RK4 oracle for population dynamics -------------------------


def population_rk4(r, p0, times, dt: float) -> np.ndarray:
    """RK4-integrate ``dp/dt = R p`` and sample at ``times`` (steps fit each interval)."""
    m = check_rate_matrix(r)
    p = np.asarray(p0, dtype=float)
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size, p.size))
    t_now = 0.0
    for i, t in enumerate(times):
        span = t - t_now
        n = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
        if n:
            p = np.linalg.matrix_power(rk4_step_matrix(m, span / n), n) @ p
        out[i] = p
        t_now = t
    return out


@dataclass(frozen=True)
class CrossingReport:
    crossed: bool
    first_crossing_time: float | None
    late_ratio: float  # D_cold / D_hot at the last sample


def entropic_crossing(
    r,
    levels,
    t_cold: float,
    t_hot: float,
    t_eq: float,
    samples_per_octave: int = 16,
    max_octaves: int = 48,
) -> CrossingReport:
    """Detect a crossing of the entropic distances of two Gibbs states by direct RK4.

    The displacements ``p − p_eq`` are evolved with ``d δ/dt = R δ`` (exact,
    since ``R p_eq = 0``), on a log-spaced grid that extends by octaves until
    the ratio of the two distances stops changing. Both displacements are
    rescaled by a common factor as they decay, so arbitrarily late times are
    resolved without underflow.
    """
    m = check_rate_matrix(r)
    e = np.asarray(levels, dtype=float)
    p_eq = gibbs_populations(e, t_eq)
    deltas = np.stack([gibbs_populations(e, t_cold) - p_eq, gibbs_populations(e, t_hot) - p_eq], axis=1)
    dt = 0.05 / float(np.max(np.abs(np.diag(m))))
    # RK4 step restricted to zero-sum displacements: P p_eq = p_eq and 1ᵀP = 1ᵀ,
    # so removing p_eq 1ᵀ leaves only the decaying modes and no rounding floor
    step = rk4_step_matrix(m, dt) - np.outer(p_eq, np.ones_like(p_eq))

    def advance(vecs: np.ndarray, n_steps: int) -> tuple[np.ndarray, float]:
        prop = np.linalg.matrix_power(step, n_steps)
        peak = float(np.max(np.abs(prop)))
        if n_steps > 1 and not peak > 1e-200:
            half = n_steps // 2
            vecs, log_a = advance(vecs, half)
            vecs, log_b = advance(vecs, n_steps - half)
            return vecs, log_a + log_b
        vecs = prop @ vecs
        s = float(np.max(np.abs(vecs)))
        if s == 0:
            return vecs, -math.inf
        return vecs / s, math.log(s)

    def dist(scaled: np.ndarray, log_scale: float) -> np.ndarray:
        if log_scale > math.log(1e-100):
            unscaled = scaled * math.exp(log_scale)
            return np.array([kl_from_displacement(p_eq, unscaled[:, j]) for j in range(2)])
        # quadratic regime: KL = ½ Σ δ²/p_eq up to O(δ³); common factor dropped
        return 0.5 * np.sum(scaled**2 / p_eq[:, None], axis=0)

    log_scale = 0.0
    n_prev = 0
    first = None
    ratio_prev = None
    stable = 0
    ratio = math.nan
    steps = sorted({int(round(2 ** (k / samples_per_octave))) for k in range(samples_per_octave * max_octaves)})
    for n in steps:
        deltas, log_step = advance(deltas, n - n_prev)
        n_prev = n
        if not math.isfinite(log_step):
            break
        log_scale += log_step
        d_cold, d_hot = dist(deltas, log_scale)
        ratio = d_cold / d_hot if d_hot > 0 else math.inf
        if first is None and d_cold > d_hot:
            first = n * dt
        if ratio_prev is not None and abs(ratio - ratio_prev) <= 1e-9 * abs(ratio_prev):
            stable += 1
            if stable >= samples_per_octave:
                break
        else:
            stable = 0
        ratio_prev = ratio
    return CrossingReport(first is not None, first, float(ratio))


# --- equidistant quenches -------------------------------------------------------


def equidistant_temperature(
    pure,
    metric,
    levels,
    t_eq: float,
    tol: float = 1e-10,
    t_max: float = 1e9,
    max_iter: int = 200,
) -> float:
    """Temperature whose Gibbs state sits at the same distance from equilibrium as ``pure``.

    Bisection (geometric midpoints) on ``T -> D(ρ_th(T), ρ_eq)`` over
    ``[t_eq (1 + 1e-9), t_max]``. Raises Unreachable when even the hottest
    state in the bracket is closer to equilibrium than ``pure``.
    """
    kind = DistanceKind.parse(metric)
    if kind is DistanceKind.ENTROPIC:
        raise ValueError("equidistant search supports trace distance and relative entropy only")
    e = np.asarray(levels, dtype=float)
    rho = as_matrix(pure)
    if rho.shape[0] != e.size:
        raise DimMismatch(f"{rho.shape[0]}-dim state for {e.size} levels")
    rho_eq = np.diag(gibbs_populations(e, t_eq)).astype(complex)
    target = distance(rho, rho_eq, kind)

    def f(temperature: float) -> float:
        return distance(np.diag(gibbs_populations(e, temperature)).astype(complex), rho_eq, kind) - target

    lo, hi = t_eq * (1 + 1e-9), t_max
    if f(hi) < 0:
        raise Unreachable(f"target distance {target:.6g} exceeds what thermal states reach below {t_max:g} mK")
    if f(lo) > 0:
        return lo
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        val = f(mid)
        if abs(val) < tol:
            return mid
        if val < 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-15:
            break
    return math.sqrt(lo * hi)


# --- synthetic three-level instances --------------------------------------------------


@dataclass(frozen=True)
class ThreeLevelInstance:
    rate_matrix: np.ndarray
    levels: np.ndarray
    t_eq: float
    t_cold: float
    t_hot: float


def random_detailed_balance_matrix(levels, t_eq: float, rng: np.random.Generator, rate_range=(0.01, 1.0)) -> np.ndarray:
    """Arrhenius-style generator ``R_ij = k_ij exp(-(E_i − E_j)/(2 T_eq))`` with symmetric ``k``."""
    e = np.asarray(levels, dtype=float)
    n = e.size
    lo, hi = rate_range
    k = np.exp(rng.uniform(math.log(lo), math.log(hi), size=(n, n)))
    k = np.triu(k, 1)
    k = k + k.T
    off = k * np.exp(-(e[:, None] - e[None, :]) / (2 * t_eq))
    return rate_matrix_from_offdiagonal(off)


def random_three_level_instance(rng: np.random.Generator) -> ThreeLevelInstance:
    t_eq = float(rng.uniform(20.0, 100.0))
    levels = np.concatenate([[0.0], np.sort(rng.uniform(0.2, 4.0, size=2)) * t_eq])
    t_cold = t_eq * float(rng.uniform(1.1, 3.0))
    t_hot = t_cold * float(rng.uniform(1.1, 3.0))
    r = random_detailed_balance_matrix(levels, t_eq, rng)
    return ThreeLevelInstance(r, levels, t_eq, t_cold, t_hot)


def find_qme_instance(seed: int, max_tries: int = 10_000) -> tuple[ThreeLevelInstance, QmePrediction]:
    """Seeded random search for a three-level generator that the criterion flags as Mpemba."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        inst = random_three_level_instance(rng)
        try:
            pred = predict_qme(inst.rate_matrix, inst.levels, inst.t_cold, inst.t_hot, inst.t_eq)
        except DegenerateLambda2:
            continue
        if pred.predicts_qme:
            return inst, pred
    raise RuntimeError(f"no Mpemba instance in {max_tries} draws")
