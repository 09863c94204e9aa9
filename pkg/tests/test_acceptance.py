"""End-to-end acceptance checks.

Each test prints a single summary line of the form

    ACCEPTANCE <n> (<name>): PASS|FAIL

regardless of pytest capture, then asserts the result.  The numbered
checks cover gradient correctness, prox optimality, the closed-form
variance constant, the clipped-variance comparison, error scaling of the
sparse and low-rank sweeps, the accuracy phase transition and its
variance-constant overlay, the binning likelihood identity, the
train/test model comparison, and byte-level determinism of the CLI.
"""

import filecmp
import json
import math
import os

import numpy as np
import pytest

from seppnet.cli import main as cli_main
from seppnet.experiments import (
    phase_transition,
    sweep_mse,
    train_test_comparison,
)
from seppnet.hawkes import EventLog, likelihood_gap, per_model_gap
from seppnet.model import (
    BasisSet,
    InfluenceModel,
    Saturation,
    bounds_for,
    feature_matrix,
    nll,
)
from seppnet.rng import stream
from seppnet.simulate import DesignSpec, make_design
from seppnet.solver import RegularizerSpec, penalty_value, prox
from seppnet.theory import kappa, kappa_grid_value, poisson_cdf


@pytest.fixture
def report(capsys):
    def _report(num, name, ok, detail=""):
        with capsys.disabled():
            status = "PASS" if ok else "FAIL"
            print(f"ACCEPTANCE {num} ({name}): {status}")
        assert ok, f"acceptance check {num} failed {detail}"

    return _report


def random_model(rng, M, K, alpha_pool=(0.0, 0.25, 0.5)):
    if K == 1:
        basis = BasisSet.geometric(float(rng.choice(alpha_pool)))
    else:
        basis = BasisSet.lags(K)
    A = rng.uniform(-0.3, 0.3, size=(M, K * M))
    nu = rng.uniform(-0.5, 0.5, size=M)
    return InfluenceModel(nu, A, basis, Saturation.clip(6), bounds_for(A, nu))


# ---------------------------------------------------------------------------
# 1. gradient correctness
# ---------------------------------------------------------------------------


def test_gradient_matches_finite_differences(report):
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(20):
        M = int(rng.integers(2, 6))
        K = int(rng.integers(1, 3))
        T = int(rng.integers(20, 101))
        model = random_model(rng, M, K)
        X = rng.integers(0, 6, size=(T, M))
        G = feature_matrix(X, model.basis, model.saturation)
        _, gA, gnu = nll(model, X, G=G)
        h = 1e-6

        def value_at(A, nu):
            m = InfluenceModel(nu, A, model.basis, model.saturation,
                               bounds_for(A, nu))
            return nll(m, X, G=G)[0]

        scale = max(1.0, float(np.abs(gA).max()), float(np.abs(gnu).max()))
        for _ in range(6):
            i = int(rng.integers(M))
            j = int(rng.integers(K * M))
            Ap = model.A.copy(); Ap[i, j] += h
            Am = model.A.copy(); Am[i, j] -= h
            num = (value_at(Ap, model.nu) - value_at(Am, model.nu)) / (2 * h)
            worst = max(worst, abs(num - gA[i, j]) / scale)
        i = int(rng.integers(M))
        nup = model.nu.copy(); nup[i] += h
        num = (value_at(model.A, nup) - value_at(model.A, model.nu - (nup - model.nu))) / (2 * h)
        worst = max(worst, abs(num - gnu[i]) / scale)
    report(1, "likelihood gradient matches finite differences",
           worst <= 1e-5, f"worst relative error {worst:.3g}")


# ---------------------------------------------------------------------------
# 2. prox optimality against search
# ---------------------------------------------------------------------------


def test_prox_beats_perturbation_and_grid_search(report):
    rng = np.random.default_rng(202)
    kinds = ("l1", "group_column", "nuclear")
    worst_gap = -np.inf
    for i in range(50):
        kind = kinds[i % 3]
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 4))
        Z = rng.normal(0, 1, size=(n, m))
        step = float(rng.uniform(0.1, 2.0))
        reg = RegularizerSpec(kind, float(rng.uniform(0.05, 1.0)))
        P = prox(reg, Z, step)

        def obj(X):
            return 0.5 * float(np.sum((X - Z) ** 2)) + step * penalty_value(reg, X)

        best = obj(P)
        candidates = [Z, np.zeros_like(Z), 0.5 * (P + Z)]
        for scale in (1e-4, 1e-3, 1e-2, 0.1, 0.5):
            noise = rng.normal(0, scale, size=(120,) + Z.shape)
            candidates.extend(P[None] + noise)
            candidates.extend(Z[None] + noise[:40])
        for c in (0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1):
            candidates.append(c * P)
        gap = best - min(obj(np.atleast_2d(c)) for c in candidates)
        worst_gap = max(worst_gap, gap)
    report(2, "prox outputs minimize their objectives",
           worst_gap <= 1e-8, f"worst objective excess {worst_gap:.3g}")


# ---------------------------------------------------------------------------
# 3. closed-form variance constant vs Monte Carlo
# ---------------------------------------------------------------------------


def test_variance_constant_matches_monte_carlo(report):
    rng = np.random.default_rng(303)
    n = 10**6
    ok = True
    detail = ""
    for i in range(20):
        r_max = float(rng.uniform(0.2, 20.0))
        u = int(rng.integers(1, 11))
        draws = stream(4000 + i, 0).poisson(r_max, size=n)
        ind = (draws >= u).astype(float)
        mc = float(ind.var())
        F = poisson_cdf(u - 1, r_max)
        se = math.sqrt((1 - 2 * F) ** 2 * F * (1 - F) / n
                       + 2 * (F * (1 - F)) ** 2 / n**2 + 1e-18)
        if abs(mc - kappa(r_max, u)) > 3 * se:
            ok = False
            detail = f"(r_max={r_max:.3f}, u={u}: |{mc:.6f}-{kappa(r_max,u):.6f}| > 3*{se:.2g})"
            break
    report(3, "threshold-indicator variance formula", ok, detail)


# ---------------------------------------------------------------------------
# 4. clipped-count variance dominates the exceedance indicator
# ---------------------------------------------------------------------------


def test_indicator_variance_below_clipped_count_variance(report):
    rng = np.random.default_rng(404)
    n = 10**6
    ok = True
    detail = ""
    for i in range(20):
        lam = float(rng.uniform(0.2, 15.0))
        u = int(rng.integers(1, 11))
        draws = stream(5000 + i, 0).poisson(lam, size=n)
        clipped = np.minimum(draws, u).astype(float)
        y = (clipped > min(math.floor(lam), u)).astype(float)
        var_y = float(y.var())
        var_clip = float(clipped.var())
        # moment-based standard errors of both sample variances
        def var_se(x):
            c = x - x.mean()
            m4 = float(np.mean(c**4))
            s2 = float(np.mean(c**2))
            return math.sqrt(max(m4 - s2**2, 0.0) / n + 1e-18)

        se = math.hypot(var_se(y), var_se(clipped))
        if var_y > var_clip + 3 * se:
            ok = False
            detail = f"(lam={lam:.3f}, u={u}: {var_y:.5f} > {var_clip:.5f} + 3*{se:.2g})"
            break
    report(4, "exceedance indicator has smaller variance than clipped count", ok, detail)


# ---------------------------------------------------------------------------
# 5. sparse error scaling
# ---------------------------------------------------------------------------


def test_sparse_error_scales_with_sparsity_and_inverse_length(report):
    s_grid, T_grid = [5, 10, 20], [250, 500, 1000]
    res = sweep_mse("sparse", s_grid, T_grid, trials=20, M=20, alpha=0.25,
                    u=6.0, seed=42, threads=8)
    med = {(r["s"], r["T"]): r["median_mse"] for r in res.cell_stats()}
    mono_T = all(med[(s, T_grid[i])] > med[(s, T_grid[i + 1])]
                 for s in s_grid for i in range(len(T_grid) - 1))
    mono_s = all(med[(s_grid[i], T)] < med[(s_grid[i + 1], T)]
                 for T in T_grid for i in range(len(s_grid) - 1))
    fits_ok = True
    for s in s_grid:
        x = np.array([1.0 / T for T in T_grid])
        y = np.array([med[(s, T)] for T in T_grid])
        slope, icpt = np.polyfit(x, y, 1)
        resid = y - (slope * x + icpt)
        r2 = 1.0 - float(np.sum(resid**2) / np.sum((y - y.mean()) ** 2))
        fits_ok = fits_ok and slope > 0 and r2 >= 0.8
    report(5, "squared error scales with sparsity and inverse length",
           mono_T and mono_s and fits_ok,
           f"(mono_T={mono_T}, mono_s={mono_s}, linear_fit={fits_ok}, medians={med})")


# ---------------------------------------------------------------------------
# 6. low-rank error scaling
# ---------------------------------------------------------------------------


def test_lowrank_error_scales_with_rank_and_inverse_length(report):
    r_grid, T_grid = [1, 2, 4], [250, 500, 1000]
    res = sweep_mse("lowrank", r_grid, T_grid, trials=20, M=20, alpha=0.25,
                    u=6.0, seed=42, threads=8)
    med = {(r["r"], r["T"]): r["median_mse"] for r in res.cell_stats()}
    mono_T = all(med[(r, T_grid[i])] >= med[(r, T_grid[i + 1])]
                 for r in r_grid for i in range(len(T_grid) - 1))
    mono_r = all(med[(r_grid[i], T)] <= med[(r_grid[i + 1], T)]
                 for T in T_grid for i in range(len(r_grid) - 1))
    report(6, "squared error scales with rank and inverse length",
           mono_T and mono_r, f"(mono_T={mono_T}, mono_r={mono_r}, medians={med})")


# ---------------------------------------------------------------------------
# 7. accuracy phase transition in signal strength
# ---------------------------------------------------------------------------


def test_phase_transition_in_row_sum(report):
    a_grid = [round(0.05 * i, 2) for i in range(1, 13)]
    res = phase_transition(["block", "lowrank"], a_grid, [6.0], trials=20,
                           M=50, T=400, alpha=0.0, seed=42, threads=8)
    stats = res.cell_stats()

    def frac_above(design, a):
        return next(r["frac_above"] for r in stats
                    if r["design"] == design and r["a_max"] == a)

    def midpoint(design):
        rows = sorted((r for r in stats if r["design"] == design),
                      key=lambda r: r["a_max"])
        for r in rows:
            if r["frac_above"] >= 0.5:
                return r["a_max"]
        return float("inf")

    low = frac_above("block", 0.25)
    high = frac_above("block", 0.5)
    ok = (low <= 0.2 and high >= 0.8 and midpoint("lowrank") >= midpoint("block"))
    report(7, "accuracy phase transition in row-sum strength", ok,
           f"(frac_above@0.25={low}, @0.50={high}, "
           f"midpoints block={midpoint('block')}, lowrank={midpoint('lowrank')})")


# ---------------------------------------------------------------------------
# 8. variance-constant contour predicts the accurate region
# ---------------------------------------------------------------------------


def test_variance_constant_contour_predicts_accuracy(report):
    a_grid = [round(0.1 * i, 1) for i in range(1, 7)]
    res = phase_transition(["block"], a_grid, [3.0, 6.0, 12.0], trials=10,
                           M=50, T=1600, alpha=0.0, seed=42, threads=8)
    violations = []
    for row in res.cell_stats():
        k = kappa_grid_value(row["a_max"], row["u"])
        if k >= 0.05 and row["frac_below"] < 0.8:
            violations.append((row["u"], row["a_max"], round(k, 3),
                               row["frac_below"]))
    report(8, "large variance constant implies accurate recovery",
           not violations, f"violating cells {violations}")


# ---------------------------------------------------------------------------
# 9. binning likelihood identity
# ---------------------------------------------------------------------------


def test_binning_offsets_cancel_in_likelihood_differences(report):
    rng = np.random.default_rng(909)
    worst_pair = 0.0
    worst_gap = 0.0
    for _ in range(20):
        M = int(rng.integers(2, 6))
        n = int(rng.integers(20, 120))
        horizon = float(rng.uniform(10.0, 40.0))
        times = np.sort(rng.uniform(0.0, horizon, size=n))
        nodes = rng.integers(0, M, size=n)
        log = EventLog(events=tuple(zip(times.tolist(), nodes.tolist())),
                       M=M, horizon=horizon)
        a = random_model(rng, M, 1)
        b = random_model(rng, M, 1)
        delta = float(rng.choice([0.25, 0.5, 1.0, 2.0]))
        worst_pair = max(worst_pair, abs(likelihood_gap(log, a, b, delta)))
        worst_gap = max(worst_gap,
                        abs(per_model_gap(log, a, delta) - n * math.log(delta)))
    report(9, "bin-width offsets cancel in likelihood comparisons",
           worst_pair <= 1e-9 and worst_gap <= 1e-9,
           f"(pair gap {worst_pair:.3g}, count identity gap {worst_gap:.3g})")


# ---------------------------------------------------------------------------
# 10. train/test ordering of nested models
# ---------------------------------------------------------------------------


def test_full_model_beats_diagonal_beats_constant_on_held_out_data(report):
    wins = 0
    for seed in range(20):
        A = make_design(DesignSpec(kind="block", M=20, seed=1000 + seed,
                                   a_max=0.3))
        r = train_test_comparison(A, seed=seed)
        wins += r["full"] > r["diagonal"] > r["constant"]
    report(10, "held-out likelihood orders full, diagonal, constant models",
           wins >= 18, f"({wins}/20 seeds ordered correctly)")


# ---------------------------------------------------------------------------
# 11. CLI determinism across thread counts
# ---------------------------------------------------------------------------


def test_cli_outputs_identical_across_thread_counts(report, tmp_path):
    def run_all(root, threads):
        root.mkdir()
        t = str(threads)
        model = root / "model.json"
        counts = root / "counts.csv"
        assert cli_main(["design", "--kind", "block", "--M", "20",
                         "--seed", "3", "--threads", t,
                         "--out", str(model)]) == 0
        assert cli_main(["simulate", "--model", str(model), "--T", "80",
                         "--seed", "4", "--threads", t,
                         "--out", str(counts)]) == 0
        assert cli_main(["fit", "--counts", str(counts), "--lambda", "0.01",
                         "--fit-nu", "--seed", "5", "--threads", t,
                         "--out", str(root / "fit.json")]) == 0
        assert cli_main(["eval", "--model", str(root / "fit.json"),
                         "--counts", str(counts), "--threads", t,
                         "--out", str(root / "eval.json")]) == 0
        assert cli_main(["theory", "--model", str(model), "--T", "400",
                         "--s", "30", "--threads", t,
                         "--out", str(root / "theory.json")]) == 0
        assert cli_main(["heatmap", "--amax", "0:0.4:0.1", "--u", "3,6",
                         "--contour", "0.01", "--threads", t,
                         "--out", str(root / "heat.csv")]) == 0
        assert cli_main(["sweep", "--design", "sparse", "--s", "3",
                         "--T", "150", "--trials", "2", "--M", "8",
                         "--seed", "6", "--threads", t,
                         "--out", str(root / "sweep.csv")]) == 0
        assert cli_main(["phase", "--design", "block", "--amax", "0.1,0.3",
                         "--u", "6", "--trials", "2", "--M", "10",
                         "--T", "100", "--seed", "7", "--threads", t,
                         "--out", str(root / "phase.csv")]) == 0
        events = root / "events.csv"
        events.write_text("time,node\n0.5,0\n1.25,1\n2.0,0\n")
        assert cli_main(["discretize", "--events", str(events), "--delta",
                         "0.5", "--M", "2", "--horizon", "3",
                         "--threads", t, "--out", str(root / "binned.csv")]) == 0
        assert cli_main(["cluster", "--model", str(model), "--k", "2",
                         "--seed", "8", "--threads", t,
                         "--out", str(root / "labels.csv")]) == 0

    run_all(tmp_path / "one", 1)
    run_all(tmp_path / "eight", 8)
    # manifests record wall-clock time and the thread count, so only the
    # data outputs are compared
    names = sorted(p.name for p in (tmp_path / "one").iterdir()
                   if not p.name.endswith(".manifest.json"))
    mismatched = []
    for name in names:
        if not filecmp.cmp(tmp_path / "one" / name, tmp_path / "eight" / name,
                           shallow=False):
            mismatched.append(name)
    report(11, "identical outputs at thread counts 1 and 8",
           len(names) >= 12 and not mismatched,
           f"(compared {names}, mismatched {mismatched})")
