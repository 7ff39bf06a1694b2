"""Acceptance gate: criteria 1-8, one PASS/FAIL line each.

Criteria 1-3 fit 20 synthetic replicates for two scenarios with nu profiled,
which takes 25-50 minutes per scenario on one core.  Criteria 1-2 also print
a diagnostic refit with nu held at its generating value; it does not decide
the verdict.  Criteria 4-6 rerun the corresponding
unit checks in a subprocess so that their wall time is measured on its own.
Criterion 7 needs the real gauge data and is skipped without it.
"""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from precipgen.cli import main
from precipgen.evaluation import qq_pairs
from precipgen.inference import FitOptions
from precipgen.synthetic import run_recovery_study

TESTS = Path(__file__).parent

# reported mean and sd of the skew-t estimates over 50 replicates
REFERENCE = {
    (20.0, 0.0): {"phi": (0.234, 0.048), "b0": (0.496, 0.007), "b1": (0.483, 0.059), "alpha": (0.017, 0.273)},
    (3.0, 5.0): {"phi": (0.252, 0.037), "b0": (0.509, 0.020), "b1": (0.481, 0.069), "alpha": (2.646, 44.487)},
}
REFERENCE_RATIO = {(20.0, 0.0): 1.014, (3.0, 5.0): 1.082}
RATIO_TOL = 0.05

# real-data reference intervals and the bootstrap wet-after-wet target
REAL_CI = {"phi": (0.143, 0.149), "rho": (1.211, 1.610), "b0": (0.451, 0.463), "b1": (0.250, 0.271),
           "alpha": (0.022, 0.053)}
REAL_NU = 4.0
REAL_WET_WET = (0.976, 0.0045)


@pytest.fixture
def verdict(capsys):
    def say(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}", flush=True)
        return ok

    return say


def _study(nu, alpha, options=None):
    return run_recovery_study(nu, alpha, n_rep=20, seed=2024, K=50, phi=0.25, options=options)


@pytest.fixture(scope="session")
def studies():
    """The library's fitting procedure: nu profiled over the default grid."""
    return {key: _study(*key) for key in REFERENCE}


@pytest.fixture(scope="session")
def studies_known_nu():
    """Diagnostic only: the same datasets fitted with nu held at its generating value."""
    return {key: _study(*key, options=FitOptions(nu_grid=(key[0],))) for key in REFERENCE}


def _recovery(studies):
    ok, parts = True, []
    for key, ref in REFERENCE.items():
        est = studies[key].estimates("skewt")
        for name, (mu, sd) in ref.items():
            m, s = float(np.mean(est[name])), float(np.std(est[name], ddof=1))
            good = abs(m - mu) <= 3 * sd
            ok &= good
            parts.append(f"{key} {name}={m:.3f} (sd {s:.3f}) ref {mu}+-3*{sd}{'' if good else ' OUT'}")
        parts.append(f"{key} {studies[key].seconds / 60:.0f} min")
    return ok, "; ".join(parts)


def _ordering(studies):
    ratios, parts, ok = {}, [], True
    for key in REFERENCE:
        ms, mg = studies[key].mrmse("skewt"), studies[key].mrmse("gaussian")
        ratios[key] = mg / ms
        within = abs(ratios[key] - REFERENCE_RATIO[key]) <= RATIO_TOL
        ok &= ms <= mg and within
        parts.append(f"{key} skew-t {ms:.2f}% gaussian {mg:.2f}% ratio {ratios[key]:.3f} "
                     f"(ref {REFERENCE_RATIO[key]})")
    ok &= ratios[(3.0, 5.0)] > ratios[(20.0, 0.0)]
    return ok, "; ".join(parts)


def test_criterion_1_parameter_recovery(studies, studies_known_nu, verdict):
    ok, detail = _recovery(studies)
    diag_ok, diag = _recovery(studies_known_nu)
    verdict(1, ok, f"nu profiled: {detail}\n    diagnostic, nu known ({'within' if diag_ok else 'outside'}): {diag}")
    assert ok


def test_criterion_2_mrmse_ordering(studies, studies_known_nu, verdict):
    ok, detail = _ordering(studies)
    diag_ok, diag = _ordering(studies_known_nu)
    verdict(2, ok, f"nu profiled: {detail}\n    diagnostic, nu known ({'holds' if diag_ok else 'fails'}): {diag}")
    assert ok


def test_criterion_3_upper_tail_qq(studies, verdict):
    st = studies[(3.0, 5.0)]
    obs = st.datasets[0].panel
    top = slice(-5, None)
    skew = qq_pairs(obs, st.skewt_ensemble)["all"]
    gauss = qq_pairs(obs, st.gaussian_ensemble)["all"]
    escape = int(gauss.outside_upper(top).sum())
    inside = int(np.sum((skew.observed[top] >= skew.lower[top]) & (skew.observed[top] <= skew.upper[top])))
    ok = escape >= 3 and inside >= 4
    assert verdict(3, ok, f"top-5 grid points: above Gaussian band {escape}/5, inside skew-t band {inside}/5")


def _pytest(*nodes):
    t0 = time.perf_counter()
    p = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *nodes],
                       cwd=TESTS.parent, capture_output=True, text=True)
    tail = p.stdout.strip().splitlines()[-1] if p.stdout.strip() else p.stderr.strip()[-200:]
    return p.returncode == 0, time.perf_counter() - t0, tail


def test_criterion_4_distribution_suite(verdict):
    ok, secs, tail = _pytest(str(TESTS / "test_distributions.py"))
    assert verdict(4, ok and secs < 300, f"{tail}; {secs:.0f} s (limit 300 s)")


def test_criterion_5_likelihood_oracle(verdict):
    f = str(TESTS / "test_inference.py")
    ok, secs, tail = _pytest(f + "::test_loglik_matches_brute_force_on_100_panels",
                             f + "::test_fd_gradient_matches_independent_stencil")
    assert verdict(5, ok, f"brute-force (100 panels, 1e-9) and gradient (10 points, 1e-4): {tail}")


def test_criterion_6_probability_identities(verdict):
    f = str(TESTS / "test_evaluation.py")
    ok, secs, tail = _pytest(f + "::test_dry_probability_vs_one_step_monte_carlo",
                             f + "::test_transition_rows_sum_to_one_exactly")
    assert verdict(6, ok, f"one-step Monte Carlo, joint dryness, exact row sums: {tail}")


REAL_DATA = os.environ.get("PRECIPGEN_REAL_DATA")
REAL_NETWORK = os.environ.get("PRECIPGEN_REAL_NETWORK")


def test_criterion_7_real_data(verdict, capsys):
    if not (REAL_DATA and REAL_NETWORK):
        msg = "real gauge data not supplied (set PRECIPGEN_REAL_DATA and PRECIPGEN_REAL_NETWORK)"
        with capsys.disabled():
            print(f"\nCRITERION 7: NOT RUN | {msg}", flush=True)
        pytest.skip(msg)
    from precipgen.data import align_network, load_network, load_panel
    from precipgen.evaluation import evaluate
    from precipgen.generator import parametric_bootstrap
    from precipgen.inference import FitOptions, fit
    from precipgen.occurrence import estimate_cutoffs, fit_occurrence

    u_r = float(os.environ.get("PRECIPGEN_REAL_U_R", "1.2"))
    panel = load_panel(REAL_DATA)
    net = align_network(panel, load_network(REAL_NETWORK))
    cut = estimate_cutoffs(panel, fit_occurrence(panel, 2), u_r)
    res = fit(panel, net, cut, FitOptions(seed=0))
    th = res.theta_hat
    parts, ok = [], th.nu == REAL_NU
    parts.append(f"nu={th.nu:g} (want {REAL_NU:g})")
    for name, (lo, hi) in REAL_CI.items():
        v = getattr(th, name)
        ok &= lo < v < hi
        parts.append(f"{name}={v:.4f} in ({lo}, {hi})")
    ens = parametric_bootstrap(res, net, cut, panel.T, 50, 1)
    ww = evaluate(panel, ens).summary()["transitions_ensemble_mean"]["wet|wet"]
    ok &= ww is not None and abs(ww - REAL_WET_WET[0]) <= REAL_WET_WET[1]
    parts.append(f"bootstrap wet|wet={ww}")
    assert verdict(7, ok, "; ".join(parts))


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _pipeline(root):
    syn, fit, sim = root / "synth", root / "fit", root / "sim"
    for argv in (
        ["synth", "--nu", "3", "--alpha", "5", "--seed", "11", "--T", "1500", "--out", syn],
        ["fit", "--data", syn / "panel.csv", "--network", syn / "network.csv", "--u-r", "1.2", "--seed", "12",
         "--out", fit],
        ["simulate", "--fit", fit / "fit.json", "--network", syn / "network.csv", "--cutoffs",
         fit / "cutoffs.csv", "--u-r", "1.2", "--seed", "13", "-K", "5", "--out", sim],
        ["simulate", "--mode", "conditional", "--data", syn / "panel.csv", "--fit", fit / "fit.json",
         "--network", syn / "network.csv", "--cutoffs", fit / "cutoffs.csv", "--u-r", "1.2", "--seed", "14",
         "-K", "5", "--out", root / "cond"],
    ):
        if main([str(a) for a in argv]) != 0:
            raise AssertionError(f"command failed: {argv[0]}")
    return _tree(root)


def test_criterion_8_determinism(tmp_path, verdict, capsys):
    a = _pipeline(tmp_path / "run1")
    b = _pipeline(tmp_path / "run2")
    capsys.readouterr()
    differ = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    fit_doc = json.loads(a["fit/fit.json"])
    ok = not differ and len(a) > 10 and "occurrence.json" in " ".join(a)
    assert verdict(8, ok, f"{len(a)} files compared across two runs, {len(differ)} differ {differ[:3]}; "
                          f"fit loglik {fit_doc['loglik']:.3f}")
