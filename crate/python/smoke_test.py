#!/usr/bin/env python3
"""Smoke test for the heaplab_py extension module.

Build the module first:

    cargo build -p heaplab-py --release

then run:

    python3 python/smoke_test.py
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile


def load_module():
    root = pathlib.Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / "release" / "libheaplab_py.so",
        root / "target" / "debug" / "libheaplab_py.so",
        root / "target" / "release" / "libheaplab_py.dylib",
        root / "target" / "debug" / "libheaplab_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p heaplab-py --release")
    tmp = pathlib.Path(tempfile.mkdtemp(prefix="heaplab-py-"))
    target = tmp / ("heaplab_py" + (".so" if built.suffix == ".so" else ".so"))
    shutil.copyfile(built, target)
    spec = importlib.util.spec_from_file_location("heaplab_py", target)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def approx(a, b, tol):
    return abs(a - b) <= tol


def main():
    hp = load_module()
    checks = 0

    # Reporting pmf normalizes and shows heaping spikes.
    pmf = hp.reporting_pmf(7, 0.5, 2.0, [5], None)
    assert approx(sum(pmf), 1.0, 1e-6), "pmf must sum to 1"
    assert pmf[5] > pmf[4] and pmf[5] > pmf[6], "expected a spike at 5"
    assert pmf[10] > pmf[9] and pmf[10] > pmf[11], "expected a spike at 10"
    checks += 3

    # Regime weights telescope to 1.
    v = hp.regime_weights([0.5, -10.0, -20.0, -40.0], 14)
    assert approx(sum(v), 1.0, 1e-12)
    assert approx(v[0], 0.9526, 1e-4)
    checks += 2

    # Dispersion moments match the closed forms.
    mean, var = hp.dispersion_moments(33, 1.0, 1.0)
    assert (mean, var) == (34.0, 68.0)
    mean, var = hp.dispersion_moments(7, 0.5, 1.0)
    assert (mean, var) == (7.5, 7.75)
    checks += 2

    # Engine transition row for a pure-birth process is Poisson.
    birth = [1.0] * 60
    death = [0.0] * 60
    row = hp.transition_row(birth, death, 0, 1.0, False)
    assert approx(row[0], math.exp(-1.0), 1e-8)
    assert approx(row[3], math.exp(-1.0) / 6.0, 1e-8)
    oracle = hp.transition_row(birth, death, 0, 1.0, True)
    assert max(abs(a - b) for a, b in zip(row, oracle)) < 1e-6
    checks += 3

    # Heaping rate tables match the hand computation at k = 33, m = 5.
    birth, death = hp.heaping_rates(33, 1.0, 2.5, [5], None, 40)
    assert approx(birth[33], 41.5, 1e-12) and approx(death[33], 38.0, 1e-12)
    checks += 1

    # Mixture log-likelihood prefers the compatible Poisson mean.
    near, under = hp.mixture_loglik(10, 10.0, 0.5, 1.0, [5], None)
    far, _ = hp.mixture_loglik(10, 100.0, 0.5, 1.0, [5], None)
    assert not under and near > far
    checks += 1

    # Simulate a small panel and fit the dispersion-only variant.
    panel = hp.simulate_panel(n_subjects=10, seed=3)
    assert len(panel) == 50
    truth = panel.truth()
    assert '"alpha":2.0' in truth.replace(" ", "")
    fit = hp.fit_panel(panel, "dispersion-only", iterations=600, burn_in=200, thin=2, seed=1)
    a_mean, a_lo, a_hi = fit["params"]["alpha[intercept]"]
    assert a_lo < a_mean < a_hi
    assert 0.5 < a_mean < 4.0, f"alpha estimate {a_mean} implausible"
    checks += 3

    # WH08 rounding is deterministic given the seed.
    y1 = hp.wh08_report(22, [0.5, -5.0, -10.0, -20.0], [5, 10, 50], 7)
    y2 = hp.wh08_report(22, [0.5, -5.0, -10.0, -20.0], [5, 10, 50], 7)
    assert y1 == y2
    checks += 1

    print(f"smoke test passed ({checks} checks)")


if __name__ == "__main__":
    main()
