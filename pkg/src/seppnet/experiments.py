"""Simulation-study drivers: error sweeps, phase transitions, model comparison.

Each sweep cell generates a fresh ground truth, simulates counts, fits,
and records the squared Frobenius error (unnormalized, the "MSE" of the
protocol).  Trials are stream-split per (cell, trial) so any thread
count reproduces the same numbers.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from seppnet.model import (
    BasisSet,
    Bounds,
    CountMatrix,
    InfluenceModel,
    ParameterError,
    Saturation,
    bounds_for,
    feature_matrix,
)
from seppnet.simulate import DesignSpec, clip_rate, make_design, simulate
from seppnet.solver import FitConfig, RegularizerSpec, fit
from seppnet.theory import kappa_heatmap

MSE_THRESHOLD = 1.0


@dataclass
class SweepResult:
    """Per-trial records plus the axis names used to group them."""

    records: List[dict]
    cell_keys: Sequence[str]

    def cells(self):
        seen = {}
        for rec in self.records:
            key = tuple(rec[k] for k in self.cell_keys)
            seen.setdefault(key, []).append(rec)
        return seen

    def cell_stats(self, threshold=MSE_THRESHOLD):
        stats = []
        for key, recs in self.cells().items():
            mses = np.array([r["mse"] for r in recs if r["mse"] is not None])
            row = dict(zip(self.cell_keys, key))
            row.update(
                trials=len(recs),
                failed=sum(1 for r in recs if r["mse"] is None),
                median_mse=float(np.median(mses)) if mses.size else math.nan,
                std_mse=float(np.std(mses)) if mses.size else math.nan,
                frac_above=float(np.mean(mses > threshold)) if mses.size else math.nan,
                frac_below=float(np.mean(mses <= threshold)) if mses.size else math.nan,
                mean_clip_rate=float(np.mean([r["clip_rate"] for r in recs])),
            )
            stats.append(row)
        return stats


def _map_trials(fn, args_list, threads=1):
    if threads <= 1:
        return [fn(a) for a in args_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, args_list))


def _design_seed(master_seed, cell, trial):
    # distinct 63-bit seed per (cell, trial); designs and simulation each
    # derive their own sub-streams from it
    return (master_seed * 1_000_003 + cell * 1_009 + trial) % (2**63 - 1)


def _resolve_lambda(lam_rule, reg_kind, M, T):
    if callable(lam_rule):
        return lam_rule(M, T)
    if lam_rule == "auto":
        if reg_kind == "nuclear":
            return 0.1 * math.sqrt(M / T)
        return 0.1 / math.sqrt(T)
    return float(lam_rule)


def run_cell_trial(
    design_spec,
    T,
    reg,
    *,
    seed,
    alpha=0.25,
    u=6.0,
    nu=0.0,
    cfg=None,
    burn_in=0,
):
    """Generate truth, simulate, fit; returns (mse, clip_rate, converged)."""
    A_true = make_design(design_spec)
    basis = BasisSet.geometric(alpha)
    sat = Saturation.clip(u)
    M = design_spec.M
    nu_vec = np.full(M, float(nu))
    bounds = bounds_for(A_true, nu_vec)
    model = InfluenceModel(nu_vec, A_true, basis, sat, bounds)
    X = simulate(model, T, seed=seed + 1, burn_in=burn_in)
    cr = clip_rate(X, u)
    cfg = cfg or FitConfig(max_iters=2000, rel_tol=1e-7)
    result = fit(X, basis, sat, reg, bounds, cfg, nu=nu_vec)
    mse = float(np.sum((result.model.A - A_true) ** 2))
    return mse, cr, result.converged


def sweep_mse(
    design_kind,
    param_grid,
    T_grid,
    trials,
    lam_rule="auto",
    *,
    M=20,
    alpha=0.25,
    u=6.0,
    seed=0,
    reg_kind=None,
    a_max=0.3,
    cfg=None,
    threads=1,
):
    """Median squared error over a (structure parameter, T) grid.

    design_kind "sparse" sweeps s with l1 penalties; "lowrank" sweeps the
    rank with nuclear penalties.  Fit failures are recorded, not fatal.
    """
    if not param_grid or not T_grid or trials < 1:
        raise ParameterError("grids must be nonempty and trials >= 1")
    if reg_kind is None:
        reg_kind = "nuclear" if design_kind == "lowrank" else "l1"
    param_name = {"sparse": "s", "lowrank": "r", "hub": "s_G"}.get(design_kind, "s")
    # Seed by (structure parameter, trial) only, so the same truth and the
    # same count stream prefix are reused across the T grid.  Paired trials
    # make the T comparisons within each parameter level far less noisy.
    jobs = []
    for pi, param in enumerate(param_grid):
        for T in T_grid:
            for trial in range(trials):
                jobs.append((pi, param, T, trial))

    def one(job):
        pi, param, T, trial = job
        spec_kw = {"kind": design_kind, "M": M, "seed": _design_seed(seed, pi, trial)}
        if design_kind == "sparse":
            spec_kw["s"] = int(param)
        elif design_kind == "lowrank":
            spec_kw["r"] = int(param)
            spec_kw["a_max"] = a_max
        elif design_kind == "hub":
            spec_kw["s_G"] = int(param)
        elif design_kind == "block":
            spec_kw["a_max"] = float(param)
        spec = DesignSpec(**spec_kw)
        lam = _resolve_lambda(lam_rule, reg_kind, M, T)
        reg = RegularizerSpec(reg_kind, lam)
        rec = {param_name: param, "T": T, "trial": trial, "lambda": lam}
        try:
            mse, cr, conv = run_cell_trial(
                spec, T, reg, seed=spec.seed, alpha=alpha, u=u, cfg=cfg
            )
            rec.update(mse=mse, clip_rate=cr, converged=conv)
        except (ArithmeticError, AssertionError) as e:
            rec.update(mse=None, clip_rate=math.nan, converged=False, error=str(e))
        return rec

    records = _map_trials(one, jobs, threads)
    return SweepResult(records, (param_name, "T"))


def phase_transition(
    design_kinds,
    a_max_grid,
    u_values,
    trials,
    *,
    M=50,
    T=400,
    alpha=0.0,
    threshold=MSE_THRESHOLD,
    seed=0,
    cfg=None,
    threads=1,
    contour_level=0.01,
):
    """Fraction of accurate trials across (design, a_max, u) cells.

    Block designs are fit with the l1 penalty, low-rank designs with the
    nuclear penalty, both at the protocol penalty weights.  The kappa
    contour for the same grid is attached for overlay.
    """
    if threshold <= 0:
        raise ParameterError("threshold must be positive")
    jobs = []
    cells = [
        (kind, float(a), float(u))
        for kind in design_kinds
        for u in u_values
        for a in a_max_grid
    ]
    for ci, cell in enumerate(cells):
        for trial in range(trials):
            jobs.append((ci, cell, trial))

    def one(job):
        ci, (kind, a_max, u), trial = job
        dseed = _design_seed(seed, ci, trial)
        if kind == "block":
            spec = DesignSpec(kind="block", M=M, seed=dseed, a_max=a_max)
            reg = RegularizerSpec("l1", 0.1 / math.sqrt(T))
        elif kind == "lowrank":
            spec = DesignSpec(kind="lowrank", M=M, seed=dseed, r=2, a_max=a_max, two_rows=True)
            reg = RegularizerSpec("nuclear", 0.1 * math.sqrt(M / T))
        else:
            raise ParameterError(f"phase transition supports block/lowrank, not {kind!r}")
        rec = {"design": kind, "a_max": a_max, "u": u, "trial": trial}
        try:
            mse, cr, conv = run_cell_trial(
                spec, T, reg, seed=dseed, alpha=alpha, u=u, cfg=cfg
            )
            rec.update(mse=mse, clip_rate=cr, converged=conv)
        except (ArithmeticError, AssertionError) as e:
            rec.update(mse=None, clip_rate=math.nan, converged=False, error=str(e))
        return rec

    records = _map_trials(one, jobs, threads)
    result = SweepResult(records, ("design", "a_max", "u"))
    _, contour = kappa_heatmap(
        np.asarray(sorted(set(float(a) for a in a_max_grid))),
        np.asarray(sorted(set(float(u) for u in u_values))),
        alpha=alpha,
        contour_level=contour_level,
    )
    result.kappa_contour = contour
    return result


# ---------------------------------------------------------------------------
# Model comparison
# ---------------------------------------------------------------------------


def evaluate_loglik(model, X_test, carry_history=None):
    """Full Poisson log-likelihood of held-out counts under the model.

    History is reset at the test boundary (g starts at zero) unless a
    training CountMatrix is passed as carry_history.
    """
    counts = X_test.counts if isinstance(X_test, CountMatrix) else np.asarray(X_test)
    if counts.shape[1] != model.M:
        raise ParameterError("node count mismatch")
    if carry_history is not None:
        hist = (
            carry_history.counts
            if isinstance(carry_history, CountMatrix)
            else np.asarray(carry_history)
        )
        joint = np.vstack([hist, counts])
        G = feature_matrix(joint, model.basis, model.saturation)[hist.shape[0] :]
    else:
        G = feature_matrix(counts, model.basis, model.saturation)
    eta = model.nu[None, :] + G @ model.A.T
    lam = np.exp(np.clip(eta, -700, 700))
    lam = np.maximum(lam, 1e-300)
    return float(np.sum(counts * np.log(lam) - lam - gammaln(counts + 1)))


def baseline_constant(X_train, basis=None, sat=None):
    """Constant-rate model: A = 0, per-node rate at the training mean."""
    counts = X_train.counts if isinstance(X_train, CountMatrix) else np.asarray(X_train)
    basis = basis or BasisSet.geometric(0.0)
    sat = sat or Saturation.clip(6)
    nu = np.log(np.maximum(counts.mean(axis=0), 1e-6))
    M = counts.shape[1]
    A = np.zeros((M, M * basis.K))
    return InfluenceModel(nu, A, basis, sat, bounds_for(A, nu))


def spectral_cluster(A, k, seed=0, degree_floor=1e-8):
    """Cluster nodes from the positive influence structure.

    The positive parts of the K node blocks are aggregated into one M x M
    adjacency, symmetrized, and clustered via the normalized Laplacian's
    k smallest eigenvectors with seeded k-means.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = A.shape[0]
    if k < 2 or k > M:
        raise ParameterError("need 2 <= k <= M")
    if A.shape[1] % M != 0:
        raise ParameterError("A must be M x MK")
    K = A.shape[1] // M
    P = np.zeros((M, M))
    for kk in range(K):
        P += np.clip(A[:, kk * M : (kk + 1) * M], 0.0, None)
    W = 0.5 * (P + P.T)
    np.fill_diagonal(W, 0.0)
    deg = np.maximum(W.sum(axis=1), degree_floor)
    d_inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(M) - d_inv_sqrt[:, None] * W * d_inv_sqrt[None, :]
    vals, vecs = np.linalg.eigh(lap)
    emb = vecs[:, :k]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.maximum(norms, 1e-12)
    from sklearn.cluster import KMeans

    km = KMeans(n_clusters=k, n_init=10, random_state=int(seed))
    return km.fit_predict(emb)


def train_test_comparison(
    A_true,
    *,
    alpha=0.0,
    u=6.0,
    nu=0.0,
    T_train=1000,
    T_test=1000,
    lam=None,
    seed=0,
    cfg=None,
):
    """Test log-likelihoods of the full, diagonal, and constant models.

    All three models are scored on the second half of one long series
    with the training history carried across the split, so dynamic
    models are not penalized for a cold start.  The offsets are fitted.
    """
    from seppnet.solver import fit_diagonal

    M = A_true.shape[0]
    basis = BasisSet.geometric(alpha)
    sat = Saturation.clip(u)
    nu_vec = np.full(M, float(nu))
    truth_bounds = bounds_for(A_true, nu_vec)
    truth = InfluenceModel(nu_vec, A_true, basis, sat, truth_bounds)
    X = simulate(truth, T_train + T_test, seed=seed)
    X_train = CountMatrix(X.counts[:T_train])
    X_test = CountMatrix(X.counts[T_train:])
    lam = 0.1 / math.sqrt(T_train) if lam is None else lam
    cfg = cfg or FitConfig(max_iters=2000, rel_tol=1e-8, fit_nu=True)
    wide = Bounds(
        a_max=max(1.0, truth_bounds.a_max),
        a_min=max(1.0, truth_bounds.a_min),
        nu_min=-10.0,
        nu_max=10.0,
    )
    full = fit(X_train, basis, sat, RegularizerSpec("l1", lam), wide, cfg)
    diag = fit_diagonal(X_train, basis, sat, wide, cfg)
    const = baseline_constant(X_train, basis, sat)
    return {
        "full": evaluate_loglik(full.model, X_test, carry_history=X_train),
        "diagonal": evaluate_loglik(diag.model, X_test, carry_history=X_train),
        "constant": evaluate_loglik(const, X_test, carry_history=X_train),
    }
