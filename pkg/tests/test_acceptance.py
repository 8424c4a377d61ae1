"""Acceptance criteria 1-10.

Each test prints one ``criterion N: PASS|FAIL ...`` line (shown even under
pytest's output capture) and then asserts the same condition.  Run the file
directly with ``python tests/test_acceptance.py`` to get the ten lines
without pytest.
"""

import math
import os
import statistics
import sys
import time

import numpy as np

from faskit.channel import (
    PortGeometry,
    average_variance,
    build_block_model,
    build_corr_1d_jakes,
    build_corr_grid,
    build_corr_tas,
    dominant_eigenvalues,
    identity_model,
    sample_eigen,
    sample_mimo,
)
from faskit.estimation import (
    PathEstimate,
    PilotScene,
    SensingDictionary,
    l3scr_estimate,
    nmse,
    observed_channel,
    omp_estimate,
    reconstruct_channel,
)
from faskit.experiments import run_experiment, spec_from_mapping
from faskit.fama import (
    CumaConfig,
    QpskScenario,
    cuma_aggregate,
    cuma_detect,
    cuma_select_sets,
    gdof,
    massive_mimo_rate,
    qpsk_network_rate,
    sfama_outage_curve,
)
from faskit.numerics import RandomStream
from faskit.output import csv_text, plot_svg
from faskit.selection import (
    LinkBudget,
    best_port_gain,
    calibrate_xi,
    dmt_fas,
    dmt_tas,
    dual_gain,
    effective_diversity,
    link_metrics,
    siso_gain,
    waterfill,
)

_capture = None


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    if _capture is not None:
        with _capture.disabled():
            print(line)
    else:
        print(line)
    return ok


def separated(a, b, k=3.0):
    """``a`` above ``b`` by more than ``k`` combined standard errors."""
    return a.value - b.value > k * math.hypot(a.std_error, b.std_error)


def _fixture_capsys(capsys):
    global _capture
    _capture = capsys


try:
    import pytest

    @pytest.fixture(autouse=True)
    def _show(capsys):
        _fixture_capsys(capsys)
        yield
except ImportError:  # direct execution without pytest
    pass


# ----------------------------------------------------------------------------


def test_criterion_1_average_variance():
    t0 = time.perf_counter()
    curves = {W: [average_variance(m, k) for k in range(1, 101)]
              for W, m in ((0.5, build_corr_1d_jakes(100, 0.5)), (2.0, build_corr_1d_jakes(100, 2.0)))}
    a, b = curves[0.5][2], curves[2.0][5]
    mono = all(all(y >= x for x, y in zip(c, c[1:])) for c in curves.values())
    full = all(abs(c[-1] - 1.0) <= 1e-9 for c in curves.values())
    elapsed = time.perf_counter() - t0
    ok = a >= 0.95 and b >= 0.95 and mono and full and elapsed < 5
    assert report(1, ok, f"W=0.5,n_hat=3 -> {a:.4f}; W=2,n_hat=6 -> {b:.4f}; "
                         f"monotone={mono}; end=1: {full}; {elapsed:.2f}s")


TABLE = {1.0: 23, 1.5: 34, 2.0: 48, 2.5: 60, 3.0: 73}


def test_criterion_2_table_anchors():
    t0 = time.perf_counter()
    cal = calibrate_xi(0.5, 100, 13)
    got = {W: effective_diversity(W, 100, cal.xi) for W in TABLE}
    elapsed = time.perf_counter() - t0
    ok = all(abs(got[W] - want) <= 2 for W, want in TABLE.items()) and elapsed < 30
    assert report(2, ok, f"xi={cal.xi:.3g}; counts {[got[W] for W in TABLE]} vs "
                         f"{list(TABLE.values())}; {elapsed:.2f}s")


def test_criterion_3_block_spectrum():
    J = build_corr_1d_jakes(100, 4.0)
    blocks = build_block_model(J, mu2=0.97)
    lam = dominant_eigenvalues(J)
    approx = blocks.spectrum()[:lam.size]
    rel = np.abs(approx - lam) / lam
    bad = [int(i) for i in np.flatnonzero(rel > 0.10)]
    ok = not bad and blocks.total_ports == 100
    assert report(3, ok, f"{lam.size} dominant eigenvalues, sum L_b={blocks.total_ports}, "
                         f"max rel err {rel.max():.3f}, over 10% at indices {bad}")


SIR_DB = [0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0]


def test_criterion_4_fama_model_fidelity():
    t0 = time.perf_counter()
    thr = [10 ** (d / 10) for d in SIR_DB]
    out = {m: [e.value for e in sfama_outage_curve(7.0, 150, thr, 100_000, 4, n_users=3, model=m)]
           for m in ("jakes", "block", "constant")}
    elapsed = time.perf_counter() - t0
    pts = [i for i, p in enumerate(out["jakes"]) if p >= 1e-3]
    block_ok = all(out["jakes"][i] / 3 <= out["block"][i] <= 3 * out["jakes"][i] for i in pts)
    const_low = any(out["constant"][i] * 3 < out["jakes"][i] for i in pts)
    ok = bool(pts) and block_ok and const_low and elapsed < 600
    fmt = lambda v: "[" + ", ".join(f"{x:.2e}" for x in v) + "]"
    assert report(4, ok, f"jakes {fmt(out['jakes'])} block {fmt(out['block'])} "
                         f"constant {fmt(out['constant'])}; {elapsed:.1f}s")


def direct_fas(a, b, n_min):
    ratios = [(a - e) * (b - e) / (n_min - e) for e in range(n_min)]
    knee = ratios.index(min(ratios))
    return [(r, (a - r) * (b - r)) for r in range(knee + 1)] + [(n_min, 0)]


def test_criterion_5_dmt():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(50):
        n_tx, n_rx = (int(v) for v in rng.integers(1, 9, 2))
        want = [(r, (n_tx - r) * (n_rx - r)) for r in range(min(n_tx, n_rx) + 1)]
        mismatches += list(dmt_tas(n_tx, n_rx).points) != want
        n_min = int(rng.integers(1, 7))
        a, b = (n_min + int(v) for v in rng.integers(0, 25, 2))
        mismatches += list(dmt_fas(a, b, n_min).points) != direct_fas(a, b, n_min)
    d0 = dmt_fas(13, 13, 4).d(0)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and d0 == 169 and elapsed < 1
    assert report(5, ok, f"{mismatches} mismatches over 100 curves; d(0)={d0}; {elapsed:.3f}s")


def test_criterion_6_siso_orderings():
    model = build_corr_grid(PortGeometry.planar(10, 10, 2.0, 2.0))
    one = identity_model(1)
    budget = LinkBudget(10.0 ** 4, 15.0, 100_000, seed=6)
    samplers = {
        "siso": ((lambda s, n: sample_eigen(one, s, size=n).values), siso_gain),
        "tx": ((lambda s, n: sample_eigen(model, s, size=n).values), best_port_gain),
        "dual": ((lambda s, n: sample_mimo(model, model, s, size=n).values), dual_gain),
    }
    m = {k: link_metrics(smp, sel, budget) for k, (smp, sel) in samplers.items()}
    out = {k: v.outage for k, v in m.items()}
    rate = {k: v.rate for k, v in m.items()}
    ok = (out["dual"].value <= out["tx"].value <= out["siso"].value
          and separated(out["siso"], out["dual"])
          and separated(rate["dual"], rate["tx"]) and separated(rate["tx"], rate["siso"]))
    assert report(6, ok, "outage " + ", ".join(f"{k}={v.value:.4g}" for k, v in out.items())
                  + "; rate " + ", ".join(f"{k}={v.value:.3f}" for k, v in rate.items()))


SCENE = PilotScene(M=64, N=100, N_O=10, tau=0.6, W=29.7)
AOA = np.array([math.pi / 2, math.pi / 3, 2 * math.pi / 3])
AOD = np.array([math.pi / 3, 2 * math.pi / 3, math.pi / 2])
GAINS = np.array([1.0 + 0.5j, -0.7 + 0.2j, 0.3 - 0.9j])


def _median_time(fn, reps=5):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def test_criterion_7_estimation_and_sir():
    tx, rx = SensingDictionary(192, SCENE.N_O, SCENE.tau), SensingDictionary(192, SCENE.M, SCENE.Delta)
    worst = 0.0
    t_l3 = t_omp = 0.0
    for L in (1, 2, 3):
        truth = PathEstimate(GAINS[:L], AOA[:L], AOD[:L])
        H_obs = observed_channel(truth, SCENE)
        full = reconstruct_channel(truth, SCENE.M, SCENE.N, SCENE.W)
        est = l3scr_estimate(H_obs, SCENE, tx)
        omp = omp_estimate(H_obs, tx, rx).paths
        for p in (est, omp):
            worst = max(worst, nmse(reconstruct_channel(p, SCENE.M, SCENE.N, SCENE.W), full))
        t_l3 += _median_time(lambda: l3scr_estimate(H_obs, SCENE, tx))
        t_omp += _median_time(lambda: omp_estimate(H_obs, tx, rx))
    sir_ok = True
    sir = []
    for gamma in (0.5, 1.0, 3.0):
        e = sfama_outage_curve(1.0, 1, [gamma], 100_000, 7)[0]
        want = gamma / (1 + gamma)
        sir.append(f"{e.value:.4f}/{want:.4f}")
        sir_ok &= abs(e.value - want) <= 3 * math.sqrt(want * (1 - want) / e.trials)
    ok = worst < 1e-6 and sir_ok and t_omp > t_l3
    assert report(7, ok, f"max NMSE {worst:.2e}; SIR outage {', '.join(sir)}; "
                         f"time OMP {t_omp * 1e3:.1f} ms > L3SCR {t_l3 * 1e3:.1f} ms")


QPSK_GEOM = PortGeometry.planar(15, 15, 13.0, 13.0)


def test_criterion_8_multiple_access():
    t0 = time.perf_counter()
    # (a) fast vs slow FAMA with 20 users
    sc20 = QpskScenario(20, QPSK_GEOM, rice_factor=7.0, n_paths=2, snr_db=0.0)
    slow = qpsk_network_rate(sc20, "sfama", 200, 81)
    fast = qpsk_network_rate(sc20, "ffama", 200, 81)
    a = fast.sum_rate - slow.sum_rate > 3 * math.hypot(fast.sum_rate_se, slow.sum_rate_se)

    # (b) CUMA with four vs two RF chains, ten users, 16 x 16 ports
    geom = PortGeometry.planar(16, 16, 5.0, 5.0)
    cuma = {n: qpsk_network_rate(QpskScenario(10, geom, 7.0, 2, 20.0, 100,
                                              CumaConfig(rho=0.6, n_max=16, n_rf=n)),
                                 "cuma", 300, 82) for n in (2, 4)}
    b = (cuma[4].sum_rate - cuma[2].sum_rate > 3 * math.hypot(cuma[4].sum_rate_se, cuma[2].sum_rate_se)
         and cuma[2].sum_rate > 0)

    # (c) slow FAMA saturation
    users = (2, 3, 4, 6, 8, 12)
    curve = [qpsk_network_rate(QpskScenario(u, QPSK_GEOM, 7.0, 2, 0.0), "sfama", 400, 83)
             for u in users]
    vals = [r.sum_rate for r in curve]
    peak = int(np.argmax(vals))
    gap = lambda i, j: vals[i] - vals[j] > 3 * math.hypot(curve[i].sum_rate_se, curve[j].sum_rate_se)
    c = 0 < peak < len(users) - 1 and gap(peak, 0) and gap(peak, len(users) - 1)
    elapsed = time.perf_counter() - t0
    ok = a and b and c and elapsed < 1200
    assert report(8, ok, f"(a) ffama {fast.sum_rate:.2f} vs sfama {slow.sum_rate:.2f} [{a}]; "
                         f"(b) cuma n_rf=4 {cuma[4].sum_rate:.2f} vs 2 {cuma[2].sum_rate:.2f} [{b}]; "
                         f"(c) sfama U={list(users)} -> {[round(v, 3) for v in vals]}, "
                         f"peak U={users[peak]} [{c}]; {elapsed:.0f}s")


def test_criterion_9_precoding():
    bs = PortGeometry.planar(8, 8, 3.5, 3.5)
    ratio = {}
    for K in (7.0, 0.5):
        mrt = massive_mimo_rate(bs, 8, K, 2, 50.0, 10_000, 9, "mrt").sum_rate.value
        los = massive_mimo_rate(bs, 8, K, 2, 50.0, 10_000, 9, "los").sum_rate.value
        ratio[K] = (mrt, los, los / mrt)
    high = abs(ratio[7.0][2] - 1) <= 0.10
    low = ratio[0.5][2] < 0.75
    ok = high and low
    assert report(9, ok, "; ".join(f"K={K}: MRT {m:.2f}, LoS {l:.2f}, LoS/MRT {r:.3f}"
                                   for K, (m, l, r) in ratio.items())
                  + f" [K=7 within 10%: {high}; K=0.5 worse by >25%: {low}]")


def _builders_ok(rng):
    for _ in range(20):
        n, W = int(rng.integers(2, 40)), float(rng.uniform(0.1, 8))
        n1, n2 = (int(v) for v in rng.integers(2, 7, 2))
        mats = [build_corr_1d_jakes(n, W).J,
                build_corr_grid(PortGeometry.planar(n1, n2, W, W / 2)).J,
                build_corr_tas(PortGeometry.planar(n1, n2, W, W), (0.5, 0.5)).J]
        for J in mats:
            if not (np.allclose(np.diag(J), 1.0, atol=1e-12) and np.allclose(J, J.conj().T)):
                return False
            if np.linalg.eigvalsh(J).min() < -1e-9 * J.shape[0]:
                return False
    return True


def _samplers_ok():
    jakes = build_corr_1d_jakes(8, 1.0)
    h = sample_eigen(jakes, RandomStream(10), size=200_000).values
    emp = h.T @ h.conj() / h.shape[0]
    if np.abs(emp - jakes.J).max() > 0.015:
        return False
    tx, rx = build_corr_1d_jakes(3, 0.7), build_corr_1d_jakes(4, 1.3)
    H = sample_mimo(tx, rx, RandomStream(11), size=200_000).values
    v = H.reshape(H.shape[0], -1)          # row-major: rx index outer
    emp = v.T @ v.conj() / v.shape[0]
    return np.abs(emp - np.kron(rx.J, tx.J.conj())).max() <= 0.015


def _waterfill_ok(rng):
    for _ in range(200):
        g = rng.exponential(size=int(rng.integers(1, 10))) + 1e-6
        P = float(rng.uniform(0.01, 50))
        a = waterfill(g, P)
        slack = a.powers * (1 / g + a.powers - a.water_level)
        if abs(a.powers.sum() - P) > 1e-9 * P or np.abs(slack).max() > 1e-9 * max(1, a.water_level ** 2):
            return False
        if np.any(1 / g[a.powers == 0] < a.water_level - 1e-9):
            return False
    return True


def _cuma_ok(rng):
    for trial in range(200):
        h = rng.standard_normal(48) + 1j * rng.standard_normal(48)
        s = complex(rng.standard_normal(), rng.standard_normal())
        cfg = CumaConfig(rho=float(rng.uniform()), n_max=int(rng.integers(1, 20)),
                         n_rf=int(rng.choice([2, 4, 6])))
        sets = cuma_select_sets(h, cfg, RandomStream(12, trial))
        agg = np.array([cuma_aggregate(s * h, st) for st in sets])
        if abs(cuma_detect(agg, h, sets) - s) >= 1e-10:
            return False
    return True


def _gdof_ok(rng):
    for _ in range(1000):
        G = np.abs(rng.standard_normal((2, 2, 10)) + 1j * rng.standard_normal((2, 2, 10))) ** 2
        G[0, 1] *= rng.uniform(0, 2)
        G[1, 0] *= rng.uniform(0, 2)
        for s in ("TIN", "ORTHO", "FAMA"):
            g = gdof(G, float(10 ** rng.uniform(0, 4)), 1.0, s).gdof
            if not 0.0 <= g <= 1.0 + 1e-9:
                return False
    return True


def _csv_ok():
    spec = spec_from_mapping({
        "kind": "fama-outage", "seed": 5, "trials": 4000,
        "params": {"N": 30, "W": 2.0, "users": 3},
        "sweep": {"name": "gamma_th_db", "values": [0.0, 5.0, 10.0]},
    })
    outputs = []
    for threads in ("1", "4", "1"):
        os.environ["FAS_KIT_THREADS"] = threads
        table = run_experiment(spec)
        outputs.append((csv_text(table), plot_svg(table, "log-y")[0]))
    os.environ.pop("FAS_KIT_THREADS", None)
    return outputs[0] == outputs[1] == outputs[2]


def test_criterion_10_property_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    checks = {
        "builders": _builders_ok(rng),
        "samplers": _samplers_ok(),
        "waterfill": _waterfill_ok(rng),
        "cuma": _cuma_ok(rng),
        "gdof": _gdof_ok(rng),
        "csv": _csv_ok(),
    }
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 180
    assert report(10, ok, ", ".join(f"{k}={v}" for k, v in checks.items()) + f"; {elapsed:.1f}s")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(((k, v) for k, v in globals().items() if k.startswith("test_criterion_")),
                           key=lambda kv: int(kv[0].split("_")[2])):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
