"""Acceptance criteria 1-10.

Each test prints one ``criterion N PASS|FAIL`` line (also collected into the
pytest terminal summary). Run standalone with ``python tests/test_acceptance.py``.
"""

import json
import os
import subprocess
import sys
import tempfile
import time
import warnings
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import ortho_group

from iddmd.design import (
    Constraint,
    DesignProblem,
    energy_dissipation,
    parameter_value,
    resonant_frequencies,
    signal_power,
    solve_design,
    target_frequency,
)
from iddmd.fit import FitConfig, build_regression, fit_model, load_model, save_model
from iddmd.modal import classify_modes, modal_decomposition
from iddmd.observables import ObservableConfig
from iddmd.oracles import (
    BuildingParams,
    BurgersConfig,
    building_dataset,
    building_frequencies,
    burgers_dataset,
    inject_noise,
    simulate_burgers,
    simulate_cubic_damped,
    simulate_random_parametric_linear,
)
from iddmd.predict import reconstruct_trajectory, relative_error
from iddmd.snapshots import (
    SnapshotRecord,
    SnapshotSet,
    load_snapshot_set,
    read_matrix,
    save_snapshot_set,
    write_matrix,
)
from iddmd.uq import BagConfig, bagged_ensemble, ensemble_statistics

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = {}

warnings.simplefilter("ignore", RuntimeWarning)

BURGERS_V = [0.014, 0.022, 0.030, 0.038, 0.046]
CUBIC_DT = 1 / 32
ENERGY_WINDOW_S = 12.0


def check(n, title, ok, detail, seconds):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail} [{seconds:.1f} s]"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


def _match_rel_error(a, b):
    """Max eigenvalue mismatch after optimal pairing, relative to the spectral radius of ``b``."""
    cost = np.abs(a[:, None] - b[None, :])
    i, j = linear_sum_assignment(cost)
    return float(cost[i, j].max() / max(np.abs(b).max(), 1e-300))


# -- 1 -----------------------------------------------------------------------------------


def test_c01_reduced_vs_full_operator():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, ranks_ok = 0.0, True
    for case in range(50):
        m = int(rng.integers(1, 13))
        P = int(rng.integers(0, 4))
        _, s = simulate_random_parametric_linear(m, P, 0.9, seed=1000 + case)
        model = fit_model(s)
        ranks_ok &= model.ranks == (m, (P + 1) * m)
        reg, alpha = build_regression(s, FitConfig())
        theta = reg.z @ np.linalg.pinv(reg.xi)
        for rec in s.records:
            e = alpha.alpha * rec.params
            full = theta[:, :m] + sum(e[i] * theta[:, (i + 1) * m : (i + 2) * m] for i in range(P))
            worst = max(worst, _match_rel_error(np.linalg.eigvals(model.operator(rec.params)), np.linalg.eigvals(full)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and ranks_ok
    check(1, "reduced vs full operator spectra (50 fixtures)", ok, f"max rel eig error {worst:.2e} (tol 1e-8), exact ranks {ranks_ok}", dt)


# -- 2 -----------------------------------------------------------------------------------


def _linear_records(ops, params, x0s, n):
    recs = []
    for e, x0 in zip(params, x0s):
        a = ops[0] + e * ops[1]
        x = np.empty((len(x0), n))
        x[:, 0] = x0
        for k in range(1, n):
            x[:, k] = a @ x[:, k - 1]
        recs.append(SnapshotRecord([e], x))
    return recs


def test_c02_held_out_parameter():
    t0 = time.perf_counter()
    # scalar: x_k = (0.9 + 0.05 eps) x_{k-1}
    s1 = SnapshotSet(_linear_records([np.array([[0.9]]), np.array([[0.05]])], [0.0, 1.0], [np.ones(1)] * 2, 20), 1.0)
    m1 = fit_model(s1, FitConfig(alpha=[1.0]))
    err_scalar = abs(np.linalg.eigvals(m1.operator([0.5]))[0] - 0.925) / 0.925
    # m = 5
    rng = np.random.default_rng(7)
    a0 = 0.8 * ortho_group.rvs(5, random_state=rng)
    a1 = 0.1 * rng.standard_normal((5, 5))
    train = [0.0, 0.5, 1.0]
    s5 = SnapshotSet(_linear_records([a0, a1], train, [rng.standard_normal(5) for _ in train], 30), 1.0)
    m5 = fit_model(s5)
    err5 = max(
        _match_rel_error(np.linalg.eigvals(m5.operator([e])), np.linalg.eigvals(a0 + e * a1)) for e in (0.25, 0.75)
    )
    dt = time.perf_counter() - t0
    ok = err_scalar <= 1e-6 and err5 <= 1e-6
    check(2, "held-out parameter recovery", ok, f"scalar rel error {err_scalar:.1e}, m=5 rel error {err5:.1e} (tol 1e-6)", dt)


# -- 3, 4, 5 ---------------------------------------------------------------------------------


@lru_cache(maxsize=None)
def burgers_model():
    t0 = time.perf_counter()
    train = burgers_dataset(BURGERS_V, horizon=1.0, dt=0.01, n_points=101, seed=0)
    model = fit_model(train, FitConfig(rank_z=40, rank_xi=40))
    return train, model, time.perf_counter() - t0


def test_c03_burgers_interpolation():
    t0 = time.perf_counter()
    _, model, build = burgers_model()
    truth = simulate_burgers(BurgersConfig(0.02, horizon=1.0, seed=0))
    pred = reconstruct_trajectory(model, [0.02], truth[:, 0], truth.shape[1])
    eta, _ = relative_error(pred, truth)
    dt = time.perf_counter() - t0 + build
    ok = eta.max() <= 0.05 and dt < 10
    check(3, "Burgers interpolation v=0.02", ok, f"max relative error {eta.max():.4f} (tol 0.05), alpha {model.alpha.alpha[0]:.3g}", dt)


def test_c04_burgers_extrapolation():
    t0 = time.perf_counter()
    _, model, build = burgers_model()
    truth = simulate_burgers(BurgersConfig(0.01, horizon=3.0, seed=0))
    pred = reconstruct_trajectory(model, [0.01], truth[:, 0], truth.shape[1])
    eta, _ = relative_error(pred, truth)
    dt = time.perf_counter() - t0 + build
    check(4, "Burgers extrapolation v=0.01, t in [0,3]", eta.max() <= 0.30, f"max relative error {eta.max():.4f} (tol 0.30)", dt)


_TIMING_SCRIPT = """
import sys, time, json
from iddmd.fit import FitConfig, fit_model
from iddmd.snapshots import load_snapshot_set
s = load_snapshot_set(sys.argv[1])
cfg = FitConfig(rank_z=40, rank_xi=40, alpha=[float(sys.argv[2])])
fit_model(s, cfg)
times = []
for _ in range(5):
    t0 = time.perf_counter()
    fit_model(s, cfg)
    times.append(time.perf_counter() - t0)
print(json.dumps(times))
"""


def test_c05_fit_speed():
    t0 = time.perf_counter()
    train, _, _ = burgers_model()
    env = dict(os.environ, OMP_NUM_THREADS="1", OPENBLAS_NUM_THREADS="1", MKL_NUM_THREADS="1")
    with tempfile.TemporaryDirectory() as d:
        save_snapshot_set(train, Path(d) / "burgers.json")
        worst = 0.0
        for alpha in (1.0, 1 / max(BURGERS_V)):
            out = subprocess.run(
                [sys.executable, "-c", _TIMING_SCRIPT, str(Path(d) / "burgers.json"), repr(alpha)],
                env=env, capture_output=True, text=True, check=True,
            )
            worst = max(worst, max(json.loads(out.stdout)))
    dt = time.perf_counter() - t0
    check(5, "Burgers fit speed (single thread)", worst <= 1.0, f"slowest of 5 fits {worst * 1e3:.1f} ms (limit 1000 ms)", dt)


# -- 6, 8 ------------------------------------------------------------------------------------


@lru_cache(maxsize=None)
def cubic_model():
    t0 = time.perf_counter()
    recs = [SnapshotRecord([c], simulate_cubic_damped(c, 200.0, CUBIC_DT)) for c in (1.0, 10.0, 20.0)]
    s = SnapshotSet(recs, CUBIC_DT, ("c3",))
    obs = ObservableConfig(1, delay_depth=1, max_degree=8, include_constant=True)
    model = fit_model(s, FitConfig(rank_z=35, rank_xi=35, alpha=[0.1], observables=obs))
    return model, time.perf_counter() - t0


def _band_peak(y, dt, w0, bw=1.0):
    w = 2 * np.pi * np.fft.rfftfreq(y.size, dt)
    spec = np.abs(np.fft.rfft(y * np.hanning(y.size)))
    return spec[(w > w0 - bw) & (w < w0 + bw)].max()


def test_c06_cubic_interpretability():
    t0 = time.perf_counter()
    model, build = cubic_model()
    cl = classify_modes(model, [[c] for c in range(1, 21)], tol_rel=0.02)
    dom = cl.dominant_frequencies()
    targets = np.array([10.0, 20.0, 30.0])
    near = [np.min(np.abs(w - targets) / targets) for w in dom]
    covered = all(np.any(np.abs(dom - t) <= 0.02 * t) for t in targets)
    tracks_ok = covered and max(near, default=1.0) <= 0.02
    truth = simulate_cubic_damped(15.0, 200.0, CUBIC_DT)
    pred = reconstruct_trajectory(model, [15.0], truth[:, :2], truth.shape[1] - 1).states[0]
    ratio = _band_peak(pred, CUBIC_DT, 20.0) / _band_peak(pred, CUBIC_DT, 10.0)
    dt = time.perf_counter() - t0 + build
    ok = tracks_ok and ratio < 0.01 and dt < 30
    detail = (
        f"dominant tracks at {np.round(dom, 2).tolist()} rad/s (all within 2% of 10/20/30: {tracks_ok}); "
        f"20/10 rad/s peak ratio at c3=15 {ratio:.2e} (limit 1e-2)"
    )
    check(6, "cubic-damped mode interpretability", ok, detail, dt)


def _window_steps():
    return int(round(ENERGY_WINDOW_S / CUBIC_DT)) + 1


def test_c08_energy_dissipation_design():
    t0 = time.perf_counter()
    model, build = cubic_model()
    k = _window_steps()
    ic = simulate_cubic_damped(0.0, CUBIC_DT, CUBIC_DT)  # y(0), y(dt); c3-independent to round-off
    eta_e = energy_dissipation([0.0], (0, k))
    prob = DesignProblem([(1.0, 20.0)], parameter_value([1.0]), 0.1, [Constraint(eta_e, ">=", 0.3)])
    res = solve_design(model, prob, ic)
    c_model = float(res.eps_opt[0])
    # same design evaluated with the reference integrator
    e_lin = np.sum(simulate_cubic_damped(0.0, ENERGY_WINDOW_S, CUBIC_DT) ** 2)
    grid = np.round(np.arange(1.0, 20.0 + 1e-9, 0.1), 10)
    eta_true = np.array([(e_lin - np.sum(simulate_cubic_damped(c, ENERGY_WINDOW_S, CUBIC_DT) ** 2)) / e_lin for c in grid])
    c_true = float(grid[np.argmax(eta_true >= 0.3)])
    e6 = float(np.sum(simulate_cubic_damped(6.0, ENERGY_WINDOW_S, CUBIC_DT) ** 2))
    dt = time.perf_counter() - t0 + build
    lo, hi = 12.6 * 0.85, 12.6 * 1.15
    ok = lo <= c_model <= hi and lo <= c_true <= hi and dt < 60
    detail = (
        f"model threshold c3={c_model:.1f}, integrator threshold c3={c_true:.1f} (band [{lo:.2f}, {hi:.2f}]); "
        f"window {ENERGY_WINDOW_S:g} s, E_d(c3=6)={e6:.4f}"
    )
    check(8, "energy-dissipation design eta_E > 30%", ok, detail, dt)


# -- 7 ---------------------------------------------------------------------------------------


def test_c07_pole_placement():
    t0 = time.perf_counter()
    s = building_dataset("k_s", [1e9, 2e9, 3e9, 3.5e9], 8000.0, 1 / 80, scheme="rk4")
    cfg = FitConfig(rank_z=16, rank_xi=16, alpha=[1e-9], observables=ObservableConfig(4, delay_depth=1, max_degree=1))
    model = fit_model(s, cfg)
    res = solve_design(model, DesignProblem([(1e9, 3.5e9)], target_frequency(10.0), grid=1e6))
    k_s = float(res.eps_opt[0])
    est = resonant_frequencies(modal_decomposition(model, [k_s]))
    oracle = building_frequencies(BuildingParams().with_bottom_stiffness(k_s))
    err = float(np.max(np.abs(est[:4] / oracle - 1))) if est.size >= 4 else np.inf
    dt = time.perf_counter() - t0
    ok = 2.7e9 <= k_s <= 2.95e9 and est.size == 4 and err <= 0.01 and dt < 60
    detail = (
        f"k_s={k_s:.4e} N/m (band [2.7e9, 2.95e9]); freqs {np.round(est, 3).tolist()} vs oracle "
        f"{np.round(oracle, 3).tolist()}, max error {100 * err:.3f}% (tol 1%)"
    )
    check(7, "pole placement, 4-DoF building", ok, detail, dt)


# -- 9 ---------------------------------------------------------------------------------------


def _noise_fixture():
    """Exact-rank 8-dim data: two damped rotations with eps-linear radii on a random 4-dim subspace."""
    dt = 0.05
    q = ortho_group.rvs(8, random_state=1)[:, :4]

    def rot(t):
        return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])

    rng = np.random.default_rng(0)
    recs = []
    for e in (0.0, 0.5, 1.0):
        a = np.zeros((4, 4))
        a[:2, :2] = (0.999 - 0.002 * e) * rot(2.0 * dt)
        a[2:, 2:] = (0.998 - 0.003 * e) * rot(5.0 * dt)
        z = np.empty((4, 600))
        z[:, 0] = rng.standard_normal(4)
        for k in range(1, 600):
            z[:, k] = a @ z[:, k - 1]
        recs.append(SnapshotRecord([e], q @ z))
    return SnapshotSet(recs, dt, ("eps",))


def test_c09_noise_robustness():
    t0 = time.perf_counter()
    s = _noise_fixture()
    cfg = FitConfig(rank_z=4, rank_xi=8, alpha=[1.0])
    eps = [0.25]
    clean = resonant_frequencies(modal_decomposition(fit_model(s, cfg), eps))
    amp = max(np.abs(r.states).max() for r in s.records)
    noisy = inject_noise(s, 0.15 * amp, seed=3)
    shifted = resonant_frequencies(modal_decomposition(fit_model(noisy, cfg), eps))
    shift = float(np.max(np.abs(shifted / clean - 1))) if shifted.size == clean.size else np.inf
    ens = bagged_ensemble(noisy, cfg, BagConfig(30, 0.5, 7))
    st = ensemble_statistics(ens, lambda m: resonant_frequencies(modal_decomposition(m, eps))[:2])
    inside = bool(np.all((st.p05 <= clean) & (clean <= st.p95)))
    dt = time.perf_counter() - t0
    ok = clean.size == 2 and shift < 0.05 and inside and dt < 60
    bands = ", ".join(f"[{a:.3f}, {b:.3f}]" for a, b in zip(st.p05, st.p95))
    detail = f"noiseless {np.round(clean, 4).tolist()}, max shift {100 * shift:.2f}% (limit 5%), 5-95% bands {bands} contain them: {inside}"
    check(9, "noise robustness (15% noise)", ok, detail, dt)


# -- 10 --------------------------------------------------------------------------------------


def _inv_clamped_boundedness():
    rng = np.random.default_rng(10)
    for seed in range(5):
        # data from a slightly unstable oscillator, fitted model clamped
        r = 1.0 + 0.01 * rng.random()
        t = rng.uniform(0.1, 1.0)
        a = r * np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        recs = _linear_records([a, 0.01 * a], [0.0, 1.0], [rng.standard_normal(2)] * 2, 40)
        model = fit_model(SnapshotSet(recs, 0.1), FitConfig(alpha=[1.0]))
        x1 = recs[0].states[:, 0]
        traj = reconstruct_trajectory(model, [0.5], x1, 100_000)
        if not np.linalg.norm(traj.states[:, -1]) <= 10 * np.linalg.norm(x1):
            return False
    return True


def _inv_conjugate_symmetry():
    for seed in range(10):
        _, s = simulate_random_parametric_linear(8, 2, 0.95, seed=seed)
        model = fit_model(s)
        for rec in s.records:
            dec = modal_decomposition(model, rec.params)
            rho = np.abs(dec.lam).max()
            if _match_rel_error(np.conj(dec.lam), dec.lam) > 1e-8:
                return False
            for j in range(len(dec)):
                k = int(np.argmin(np.abs(dec.lam - np.conj(dec.lam[j]))))
                pj, pk = np.conj(dec.phi[:, j]), dec.phi[:, k]
                c = np.vdot(pj, pk) / np.vdot(pj, pj)
                if np.linalg.norm(pk - c * pj) > 1e-8 * max(np.linalg.norm(pk), rho * 1e-300):
                    return False
    return True


def _inv_bagging_identity():
    _, s = simulate_random_parametric_linear(6, 1, 0.9, seed=3, n_steps=50)
    cfg = FitConfig(rank_z=5, rank_xi=10)
    full = fit_model(s, cfg)
    return all(
        m.reduced_ops.tobytes() == full.reduced_ops.tobytes() and m.u.tobytes() == full.u.tobytes()
        for m in bagged_ensemble(s, cfg, BagConfig(4, 1.0, 99))
    )


def _inv_scaling_invariance():
    _, s = simulate_random_parametric_linear(6, 2, 0.9, seed=5)
    m1 = fit_model(s, FitConfig(alpha=[1.0, 1.0]))
    m2 = fit_model(s, FitConfig(alpha=[0.05, 20.0]))
    for eps in ([0.1, -0.3], s.records[1].params):
        if _match_rel_error(modal_decomposition(m1, eps).lam, modal_decomposition(m2, eps).lam) > 1e-6:
            return False
    # argmin invariance: loss rescaling and alpha choice leave eps_opt unchanged
    ic = s.records[0].states[:, 0]
    grid = np.array([[a, b] for a in np.linspace(-1, 1, 5) for b in np.linspace(-1, 1, 5)])
    opts = set()
    for model in (m1, m2):
        for scale in (1.0, 1e3):
            spec = signal_power(None, (0, 20))
            res = solve_design(model, DesignProblem([(-1, 1), (-1, 1)], spec, grid[::-1]), ic)
            res2 = solve_design(
                model,
                DesignProblem([(-1, 1), (-1, 1)], _scaled(spec, scale), grid),
                ic,
            )
            opts.add(tuple(res.eps_opt.tolist()))
            opts.add(tuple(res2.eps_opt.tolist()))
    return len(opts) == 1


def _scaled(spec, factor):
    from iddmd.design import custom

    def fn(traj):
        x = traj.states[:, 0:20]
        return factor * float(np.sqrt(np.sum(x**2)) / 20)

    return custom(fn, needs="trajectory", horizon=20)


def _inv_format_roundtrips():
    rng = np.random.default_rng(11)
    with tempfile.TemporaryDirectory() as d:
        d = Path(d)
        for shape in ((1, 1), (3, 7), (17, 2)):
            a = rng.standard_normal(shape) * 10.0 ** rng.integers(-300, 300, size=shape)
            write_matrix(d / "a.bin", a)
            write_matrix(d / "a.csv", a)
            if read_matrix(d / "a.bin").tobytes() != a.tobytes() or not np.array_equal(read_matrix(d / "a.csv"), a):
                return False
        s = SnapshotSet([SnapshotRecord([0.1, 2.0], rng.standard_normal((4, 9))) for _ in range(3)], 0.25, ("a", "b"))
        save_snapshot_set(s, d / "s.json")
        back = load_snapshot_set(d / "s.json")
        if any(r0.states.tobytes() != r1.states.tobytes() for r0, r1 in zip(s.records, back.records)):
            return False
        obs = ObservableConfig(4, 1, 2, True)
        model = fit_model(s, FitConfig(rank_z=6, rank_xi=12, observables=obs))
        h1 = save_model(model, d / "m.idmd")
        h2 = save_model(load_model(d / "m.idmd"), d / "m2.idmd")
        return h1 == h2 and (d / "m.idmd").read_bytes() == (d / "m2.idmd").read_bytes()


def _inv_design_problem_shape():
    # integer two-parameter grid with a power objective and an inequality constraint
    _, s = simulate_random_parametric_linear(4, 2, 0.9, seed=8, eps_box=(0.0, 3.0))
    model = fit_model(s)
    ic = s.records[0].states[:, 0]
    power = signal_power([True, True, False, False], (0, 30))
    cons = [Constraint(target_frequency(0.0, order=1), ">=", 0.0)]
    res = solve_design(model, DesignProblem([(0, 3), (0, 3)], power, [4, 4], cons), ic)
    integer = all(float(v).is_integer() for v in res.eps_opt)
    best = min(r["loss"] for r in res.table if r["feasible"])
    return integer and res.loss_opt == best and len(res.table) == 16


def test_c10_invariant_suite():
    t0 = time.perf_counter()
    results = {
        "clamped boundedness": _inv_clamped_boundedness(),
        "conjugate symmetry": _inv_conjugate_symmetry(),
        "bagging fraction-1 identity": _inv_bagging_identity(),
        "scaling argmin/spectrum invariance": _inv_scaling_invariance(),
        "format round-trips": _inv_format_roundtrips(),
        "design-problem shape": _inv_design_problem_shape(),
    }
    dt = time.perf_counter() - t0
    detail = ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in results.items())
    check(10, "invariant suite", all(results.values()), detail, dt)


if __name__ == "__main__":
    tests = [
        test_c01_reduced_vs_full_operator,
        test_c02_held_out_parameter,
        test_c03_burgers_interpolation,
        test_c04_burgers_extrapolation,
        test_c05_fit_speed,
        test_c06_cubic_interpretability,
        test_c07_pole_placement,
        test_c08_energy_dissipation_design,
        test_c09_noise_robustness,
        test_c10_invariant_suite,
    ]
    failed = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
