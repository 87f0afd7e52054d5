"""Acceptance criteria 1-10, one PASS/FAIL/SKIP line per criterion.

Under pytest the lines appear in the "acceptance criteria" terminal section.
Run ``python3 tests/test_acceptance.py`` to print them directly.
"""
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robust_policy.core import CoordinateRulePolicy, RobustnessConfig  # noqa: E402
from robust_policy.evaluation import brute_force_regret, lp_worst_case_oracle  # noqa: E402
from robust_policy.experiments import (  # noqa: E402
    load_config,
    load_reference,
    read_cells,
    run_experiment,
    summarize,
)
from robust_policy.oracle import (  # noqa: E402
    EmpiricalConditionalModel,
    gain_policy,
    maxmin_policy,
    nonrobust_policy,
    regret_policy,
    thresholds,
)
from robust_policy.risk import (  # noqa: E402
    GaussianMixture,
    empirical_cvar,
    robust_mean,
    zeta_of_gamma,
)
from robust_policy.ru import RuModel, ru_loss_from_values  # noqa: E402
from robust_policy.synthetic import ToyModel  # noqa: E402
from robust_policy.values import Gain, MaxMin  # noqa: E402

from _support import gradient_error, random_model, random_x  # noqa: E402
from conftest import ACCEPTANCE_LINES  # noqa: E402

VOTING_ENV = "ROBUST_POLICY_VOTING_CSV"
TITLES = {
    1: "gamma=1 degeneracy",
    2: "threshold ordering",
    3: "CVaR identities",
    4: "LP oracle equivalence",
    5: "RU variational identity",
    6: "gradient check",
    7: "toy max-min table",
    8: "gain over always-treat inertia",
    9: "voting semi-synthetic",
    10: "regret optimality on 7 cells",
}


def report(n, status, detail):
    line = f"criterion {n:>2} {status:<4} {TITLES[n]}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def criterion(n, check):
    ok, detail = check()
    report(n, "PASS" if ok else "FAIL", detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_1():
    rng = np.random.default_rng(1)
    cfg = RobustnessConfig(1.0)
    mismatches = 0
    for _ in range(50):
        model = random_model(rng)
        X = random_x(rng, 10_000)
        ref = nonrobust_policy(model).decide(X)
        policies = [
            maxmin_policy(model, cfg),
            gain_policy(model, cfg, "always_control"),
            gain_policy(model, cfg, "always_treat"),
            gain_policy(model, cfg, CoordinateRulePolicy(0, float(rng.uniform(-3, 3)))),
            regret_policy(model, cfg, "midpoint"),
            regret_policy(model, cfg, "g"),
        ]
        mismatches += sum(int(np.sum(p.decide(X) != ref)) for p in policies)
    return mismatches == 0, f"{mismatches} disagreements over 50 models x 1e4 x x 6 policies"


def check_2():
    rng = np.random.default_rng(2)
    worst = -np.inf
    for _ in range(1000):
        model = random_model(rng)
        ts = thresholds(model, random_x(rng, 1), RobustnessConfig(float(rng.uniform(1, 20))))
        worst = max(worst, float(ts.h_minus[0] - ts.h_gamma[0]), float(ts.h_gamma[0] - ts.h_plus[0]))
    return worst <= 1e-9, f"largest violation {worst:.3e} over 1000 draws (slack 1e-9)"


def random_mixture(rng):
    k = int(rng.integers(1, 4))
    return GaussianMixture(list(zip(rng.dirichlet(np.ones(k)), rng.normal(0, 3, k), rng.uniform(0.1, 3, k))))


def check_3():
    rng = np.random.default_rng(3)
    analytic, empirical = 0.0, 0.0
    for _ in range(200):
        zeta = float(rng.uniform(0.02, 0.98))
        gm = random_mixture(rng)
        c = float(rng.uniform(0.1, 10))
        decomp = (1 - zeta) * gm.cvar(zeta) - zeta * gm.negate().cvar(1 - zeta)
        scaled = GaussianMixture([(w, c * m, c * s) for w, m, s in gm.components])
        analytic = max(analytic, abs(decomp - gm.mean()), abs(scaled.cvar(zeta) - c * gm.cvar(zeta)))

        n = int(rng.integers(2, 60))
        k = int(rng.integers(1, n))
        zeta_e = 1 - k / n
        v = rng.normal(0, 5, n)
        decomp_e = (1 - zeta_e) * empirical_cvar(v, zeta_e) - zeta_e * empirical_cvar(-v, 1 - zeta_e)
        scale = np.abs(v).max()
        empirical = max(empirical, abs(decomp_e - v.mean()) / scale,
                        abs(empirical_cvar(c * v, zeta_e) - c * empirical_cvar(v, zeta_e)) / (c * scale))
    ok = analytic < 1e-8 and empirical < 1e-12
    return ok, f"analytic max error {analytic:.2e} (< 1e-8), empirical relative {empirical:.2e} (< 1e-12)"


def check_4():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 13))
        k = int(rng.integers((n + 1) // 2, n))  # (1 - zeta) n = k, gamma = k / (n - k) >= 1
        gamma = k / (n - k)
        v = rng.normal(0, 3, n)
        worst = max(worst, abs(lp_worst_case_oracle(v, gamma) - robust_mean(v, gamma)))
    return worst < 1e-12, f"max |LP - robust_mean| = {worst:.2e} over 200 instances (< 1e-12)"


def check_5():
    rng = np.random.default_rng(5)
    worst = 0.0
    for gamma in (1.5, 2.0, 4.0):
        zeta = zeta_of_gamma(gamma)
        for _ in range(5):
            v = rng.normal(rng.normal(0, 2), rng.uniform(0.2, 3), 1000)
            grid = np.arange((-v).min() - 0.5, (-v).max() + 0.5, 1e-3)
            losses = np.array([ru_loss_from_values(v, a, gamma).mean() for a in grid])
            target = (-v).mean() / gamma + (1 - 1 / gamma) * empirical_cvar(-v, 1 - zeta)
            worst = max(worst, abs(losses.min() - target))
    return worst < 2e-3, f"max gap {worst:.2e} over 15 problems, gamma in (1.5, 2, 4) (< 2e-3)"


def check_6():
    rng = np.random.default_rng(6)
    worst, kinked, names = 0.0, 0, []
    for kind in (MaxMin(), Gain("always_control"), Gain("always_treat")):
        for gamma in (1.0, 2.0):
            X = rng.uniform(-3, 3, (16, 1))
            y, w = rng.normal(0, 2, 16), rng.integers(0, 2, 16)
            model = RuModel(1).init(int(rng.integers(1000)))
            err, n_kinked = gradient_error(model, X, y, w, kind, gamma, 0.5)
            worst, kinked = max(worst, err), kinked + n_kinked
            names.append(f"{kind.name}/{gamma:g}:{err:.1e}")
    total = 6 * model.n_params
    ok = worst < 1e-4 and kinked < 0.001 * total
    return ok, (f"relative error {worst:.2e} over 6 batches of {model.n_params} parameters "
                f"({', '.join(names)}); {kinked} of {total} perturbations crossed a kink")


_RUNS = {}


def synthetic_run(key, **overrides):
    if key not in _RUNS:
        out = Path(tempfile.mkdtemp(prefix=f"acceptance-{key}-"))
        cfg = load_config(experiment="toy", seeds=(0, 1, 2, 3, 4, 5), **overrides)
        t0 = time.perf_counter()
        failures = run_experiment(cfg, out)
        per_cell = (time.perf_counter() - t0) / (len(cfg.gammas) * len(cfg.seeds))
        assert not failures, failures
        rows = read_cells(out, cfg.tag)
        _RUNS[key] = (summarize(rows), per_cell, rows)
    return _RUNS[key]


def check_7():
    summary, per_cell, _ = synthetic_run("maxmin", objective="maxmin", gammas=(1.0, 2.0),
                                         p_targets=(0.1, 0.2, 0.7, 0.9))
    ref = load_reference()["toy-maxmin"]
    cols = ref["columns"]
    ref_cells = {(r["method"], float(r["gamma"]), cols[j]): c[0]
                 for r in ref["rows"] for j, c in enumerate(r["cells"])}
    tol = {"ru": 0.05, "true": 0.03}
    bad, worst = [], {"ru": 0.0, "true": 0.0}
    for (policy, gamma, p), rep, k in summary:
        if policy not in tol:
            continue
        diff = rep.value - ref_cells[(policy, gamma, p)]
        worst[policy] = max(worst[policy], abs(diff))
        if abs(diff) > tol[policy] or k != 6:
            bad.append(f"{policy} g={gamma:g} p={p:g}: {rep.value:.3f} vs {ref_cells[(policy, gamma, p)]:.3f}")
    ok = not bad and per_cell < 300
    detail = (f"max |diff| ru {worst['ru']:.3f} (<= 0.05), true {worst['true']:.3f} (<= 0.03); "
              f"{per_cell:.0f} s per cell")
    if bad:
        detail += "; outside tolerance: " + "; ".join(bad)
    return ok, detail


def check_8():
    _, _, rows = synthetic_run("gain-treat", objective="gain", baseline="always_treat",
                               gammas=(2.0, 3.0, 4.0))
    fractions = [float(r["treated_fraction"]) for r in rows if r["policy"] == "ru"]
    lowest = min(fractions)
    return lowest >= 0.99, f"lowest treated fraction {lowest:.4f} over {len(fractions)} (gamma, seed, p) cells"


def check_9():
    path = os.environ.get(VOTING_ENV)
    if not path or not Path(path).is_file():
        return None, f"voting CSV not available; set {VOTING_ENV} to run"
    out = Path(tempfile.mkdtemp(prefix="acceptance-voting-"))
    seeds = (0, 1, 2, 3, 4, 5)
    runs = [("maxmin", None, (1.0, 1.2)), ("gain", "always_control", (1.5,))]
    got = {}
    for objective, baseline, gammas in runs:
        cfg = load_config(experiment="voting", objective=objective, baseline=baseline,
                          gammas=gammas, seeds=seeds, data=path)
        failures = run_experiment(cfg, out)
        if failures:
            return False, f"failed cells: {failures}"
        for (policy, gamma, _), rep, _ in summarize(read_cells(out, cfg.tag)):
            got[(objective, gamma)] = rep
    nr, mm, gc = got[("maxmin", 1.0)], got[("maxmin", 1.2)], got[("gain", 1.5)]
    checks = [
        abs(nr.treated_fraction - 0.66) <= 0.03, abs(nr.value - 0.311) <= 0.01,
        mm.treated_fraction == 1.0,
        gc.treated_fraction == 0.0, abs(gc.value - 0.265) <= 0.005,
    ]
    detail = (f"non-robust {nr.value:.4f}/{nr.treated_fraction:.3f}, max-min 1.2 treated "
              f"{mm.treated_fraction:.3f}, gain-control 1.5 {gc.value:.4f}/{gc.treated_fraction:.3f}")
    return all(checks), detail


def seven_cell_instance():
    model = ToyModel(0.2)
    xs = np.linspace(-3, 3, 7)[:, None]
    levels = (np.arange(9) + 0.5) / 9
    cells = []
    for w in (0, 1):
        cells.append([np.array([model.quantile(x[None, :], w, q)[0] for q in levels]) for x in xs])
    return EmpiricalConditionalModel(cells[0], cells[1])


def check_10():
    cfg = RobustnessConfig(2.0)  # (1 - zeta) * 9 = 6 is integral
    model = seven_cell_instance()
    policies, regrets = brute_force_regret(model, cfg)
    closed = regret_policy(model, cfg).decide(np.arange(7)[:, None])
    idx = int(np.flatnonzero((policies == closed).all(axis=1))[0])
    ok = regrets[idx] == regrets.min()
    return ok, (f"closed form {closed.tolist()} regret {regrets[idx]:.6f}, "
                f"brute-force minimum {regrets.min():.6f} over {len(policies)} policies")


# ---------------------------------------------------------------------------
# Tests
# ---------------------------------------------------------------------------

def test_criterion_01_gamma_one_degeneracy():
    criterion(1, check_1)


def test_criterion_02_threshold_ordering():
    criterion(2, check_2)


def test_criterion_03_cvar_identities():
    criterion(3, check_3)


def test_criterion_04_lp_oracle_equivalence():
    criterion(4, check_4)


def test_criterion_05_ru_variational_identity():
    criterion(5, check_5)


def test_criterion_06_gradient_check():
    criterion(6, check_6)


def test_criterion_07_toy_maxmin_table():
    criterion(7, check_7)


def test_criterion_08_gain_over_always_treat():
    criterion(8, check_8)


def test_criterion_09_voting():
    ok, detail = check_9()
    if ok is None:
        report(9, "SKIP", detail)
        pytest.skip(detail)
    report(9, "PASS" if ok else "FAIL", detail)
    assert ok, detail


def test_criterion_10_regret_optimality():
    criterion(10, check_10)


def main():
    failed = 0
    for n in range(1, 11):
        ok, detail = globals()[f"check_{n}"]()
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        failed += status == "FAIL"
        report(n, status, detail)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
