"""End-to-end acceptance checks.

Each test exercises one advertised guarantee at its stated tolerance and
prints a single verdict line (visible on failure, or with -s). Budgets
are wall-clock ceilings for the whole check on modest hardware.
"""

import time

import numpy as np

from relaypd import engine, harness, metrics, objective, privacy, topology


def _verdict(num, label, ok, detail, elapsed, budget):
    line = "criterion %d (%s): %s  %s  [%.2fs < %ds]" % (
        num, label, "PASS" if ok else "FAIL", detail, elapsed, budget,
    )
    print(line)
    assert ok, line
    assert elapsed < budget, line


def _lasso_instance(n, q, m, noise, sparsity, seed, nu=0.1):
    reg = objective.Regularizer(kind="l1", nu=nu)
    p, _ = harness.gen_synthetic(n, q, m, noise, sparsity, seed, regularizer=reg)
    return p


def test_criterion_1_relay_mask_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst = 0.0
    kinds = ("none", "l1", "elastic-net")
    for trial in range(200):
        n = int(rng.integers(1, 6))
        q = int(rng.integers(1, 5))
        m = q + 3
        losses = []
        for _ in range(n):
            B = rng.standard_normal((m, q))
            if trial % 4 == 0:
                labels = (rng.random(m) < 0.5).astype(float)
                losses.append(objective.logistic_loss(B, labels))
            else:
                losses.append(objective.least_squares_loss(B, rng.standard_normal(m)))
        kind = kinds[trial % 3]
        if kind == "elastic-net":
            reg = objective.Regularizer(kind=kind, nu1=0.05, nu2=0.1)
        else:
            reg = objective.Regularizer(kind=kind, nu=0.1)
        p = objective.problem_instance(losses, regularizer=reg)
        s = objective.stepsizes_from_fraction(p, float(rng.uniform(0.3, 0.99)))
        active = int(rng.integers(0, n))
        for noisy in (False, True):
            st = engine.init_state(p, s, start=active)
            st.lam = rng.standard_normal((n, q))
            st.y = rng.standard_normal((n, q))
            st.x = rng.standard_normal(q)
            st.u = st.lam.sum(axis=0)
            emb = rng.standard_normal(q) if noisy else np.zeros(q)
            st.u_tilde = st.u - emb
            fresh = rng.standard_normal(q) if noisy else None
            a = engine.relay_step(st, noise=fresh)
            full = engine.centralized_step(st, noise=emb if noisy else None)
            b = engine.apply_mask(st, full, engine.MaskSpec(n=n, active=active))
            for name in ("lam", "x", "y", "u"):
                diff = float(np.max(np.abs(getattr(a, name) - getattr(b, name))))
                worst = max(worst, diff)
    elapsed = time.perf_counter() - t0
    _verdict(
        1, "relay equals masked full update", worst <= 1e-12,
        "max block diff %.2e over 200 instances" % worst, elapsed, 5,
    )


def test_criterion_2_aggregate_invariant():
    t0 = time.perf_counter()
    p = _lasso_instance(8, 10, 15, 0.01, 0.3, seed=77)
    s = objective.stepsizes_from_fraction(p, 0.9)
    g = topology.generate_topology("ring", 8)
    T = topology.transition_matrix(g)
    sched = privacy.NoiseSchedule(sigma1_sq=0.5, attenuation=1.5)
    st = engine.init_state(p, s, seed_relay=7, seed_noise=8)
    counts = np.zeros(8, dtype=int)
    worst_u = worst_ut = 0.0
    for _ in range(10**4):
        active = st.current
        counts[active] += 1
        var = privacy.noise_variance(sched, int(counts[active]))
        eps = privacy.sample_noise(var, 10, st.rng_noise)
        st = engine.relay_step(st, noise=eps, transition=T)
        worst_u = max(worst_u, float(np.max(np.abs(st.u - st.lam.sum(axis=0)))))
        worst_ut = max(worst_ut, float(np.max(np.abs(st.u_tilde - (st.u - eps)))))
    elapsed = time.perf_counter() - t0
    ok = worst_u <= 1e-12 and worst_ut <= 1e-12
    _verdict(
        2, "published aggregate tracks the multipliers", ok,
        "max |u - sum lam| %.2e, max mask residual %.2e over 1e4 steps"
        % (worst_u, worst_ut), elapsed, 5,
    )


def test_criterion_3_monotone_distance():
    t0 = time.perf_counter()
    p = _lasso_instance(6, 10, 15, 0.01, 0.25, seed=55)
    s = objective.stepsizes_from_fraction(p, 0.9)
    ref = metrics.reference_solution(p)
    records = engine.run_centralized(p, s, 5000, reference=ref)
    dists = np.array([r.s_dist for r in records])
    rises = dists[1:] - dists[:-1]
    violations = int(np.sum(rises > 1e-10))
    elapsed = time.perf_counter() - t0
    _verdict(
        3, "weighted distance to the saddle never rises", violations == 0,
        "%d violations over 5000 steps, final dist %.2e"
        % (violations, dists[-1]), elapsed, 10,
    )


def test_criterion_4_linear_convergence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    q, m, n = 20, 30, 8
    support = rng.choice(q, size=5, replace=False)
    x_nat = np.zeros(q)
    x_nat[support] = rng.standard_normal(5)
    losses = []
    for _ in range(n):
        B = rng.standard_normal((m, q)) / np.sqrt(m)
        losses.append(objective.least_squares_loss(B, B @ x_nat))
    reg = objective.Regularizer(kind="l1", nu=0.1)
    p = objective.problem_instance(losses, regularizer=reg, reg_weight=float(n))
    s = objective.stepsizes_from_fraction(p, 0.9)
    g = topology.generate_topology("complete", n)
    ref = metrics.reference_solution(p)
    traj = engine.run(p, s, g, None, 50000, seed_relay=0, seed_noise=0, reference=ref)
    errs = [r.rel_err for r in traj.records[1:]]
    hit = next((k + 1 for k, e in enumerate(errs) if e <= 1e-8), None)
    consensus = traj.records[-1].consensus
    slope, r2 = metrics.fit_linear_rate(errs, tail_fraction=0.9)
    elapsed = time.perf_counter() - t0
    ok = (
        hit is not None
        and errs[-1] <= 1e-8
        and consensus <= 1e-8
        and slope < 0.0
        and r2 >= 0.9
    )
    _verdict(
        4, "linear convergence to the reference", ok,
        "rel err %.1e (first <=1e-8 at k=%s), consensus %.1e, slope %.2e, R2 %.3f"
        % (errs[-1], hit, consensus, slope, r2), elapsed, 30,
    )


def test_criterion_5_activation_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5005)
    worst = 0.0
    built = 0
    while built < 20:
        n = int(rng.integers(2, 13))
        kind = ("erdos-renyi", "ring", "path", "complete")[built % 4]
        g = topology.generate_topology(
            kind, n, p=0.6 if kind == "erdos-renyi" else None, rng=rng
        )
        built += 1
        # independent route: the stationary activation law solves
        # (D^-1 L^2 D^-1 + 11^T) g = 1
        A = np.zeros((n, n))
        for i, j in g.edges:
            A[i, j] = A[j, i] = 1.0
        d = A.sum(axis=1)
        Dinv = np.diag(1.0 / d)
        lap = np.diag(d) - A
        M = Dinv @ lap @ lap @ Dinv + np.ones((n, n))
        g_solve = np.linalg.solve(M, np.ones(n))
        g_lib = topology.activation_probabilities(g)
        worst = max(worst, float(np.max(np.abs(g_solve - g_lib))))
        worst = max(worst, float(np.max(np.abs(g_lib - d / d.sum()))))
    comp = topology.generate_topology("complete", 8)
    T = topology.transition_matrix(comp)
    g_prob = topology.activation_probabilities(comp)
    devs = []
    for seed in range(5):
        walk_rng = np.random.default_rng(seed)
        counts = np.zeros(8)
        cur = 0
        for _ in range(10**5):
            counts[cur] += 1
            cur = topology.sample_next(T, cur, walk_rng)
        devs.append(float(np.max(np.abs(counts / 10**5 - g_prob))))
    med = float(np.median(devs))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and med <= 0.02
    _verdict(
        5, "activation frequencies follow degrees", ok,
        "max solver diff %.1e over 20 graphs, median walk dev %.4f" % (worst, med),
        elapsed, 20,
    )


def test_criterion_6_accountant_closed_form():
    t0 = time.perf_counter()
    alpha, beta, lipschitz, delta = 0.2, 1.0 / 18.0, 3.0, 1e-4
    worst = 0.0
    for att in (1.1, 1.5, 2.0, 3.0):
        sched = privacy.NoiseSchedule(sigma1_sq=0.7, attenuation=att)
        delta_s = privacy.sensitivity(alpha, beta, lipschitz)
        for xi in range(1, 65):
            led = privacy.PrivacyLedger(
                alpha=alpha, beta=beta, lipschitz=lipschitz, delta=delta,
                schedule=sched, tau=np.array([xi]),
            )
            closed = privacy.total_zcdp(led)
            term = sum(
                delta_s**2 / (2.0 * privacy.noise_variance(sched, t))
                for t in range(1, xi + 1)
            )
            worst = max(worst, abs(closed - term) / term)
    sched = privacy.NoiseSchedule(sigma1_sq=0.7, attenuation=1.5)
    led1 = privacy.PrivacyLedger(
        alpha=alpha, beta=beta, lipschitz=lipschitz, delta=delta,
        schedule=sched, tau=np.array([1]),
    )
    rho1 = privacy.rho_first(alpha, beta, lipschitz, 0.7)
    want1 = rho1 + 2.0 * np.sqrt(rho1 * np.log(1.0 / delta))
    single_ok = abs(privacy.total_budget(led1)[0] - want1) <= 1e-12 * want1
    cal_worst = 0.0
    for target in (0.5, 3.7, 20.0):
        sig = privacy.calibrate_sigma(target, delta, alpha, beta, lipschitz, 1.3, 40)
        got = privacy.epsilon_for_xi(
            alpha, beta, lipschitz,
            privacy.NoiseSchedule(sigma1_sq=sig, attenuation=1.3), delta, 40,
        )
        cal_worst = max(cal_worst, abs(got - target) / target)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and single_ok and cal_worst <= 1e-6
    _verdict(
        6, "budget accountant closed form", ok,
        "geometric-sum rel err %.1e, calibration rel err %.1e" % (worst, cal_worst),
        elapsed, 1,
    )


def test_criterion_7_stepsize_validation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7007)
    min_good = np.inf
    max_bad = -np.inf
    for trial in range(50):
        n = int(rng.integers(1, 7))
        q = int(rng.integers(1, 4))
        m = q + 3
        losses = []
        for _ in range(n):
            B = rng.standard_normal((m, q))
            if trial % 3 == 0:
                labels = (rng.random(m) < 0.5).astype(float)
                losses.append(objective.logistic_loss(B, labels))
            else:
                losses.append(objective.least_squares_loss(B, rng.standard_normal(m)))
        p = objective.problem_instance(losses)
        s = objective.stepsizes_from_fraction(p, 0.99)
        good = objective.validate_stepsizes(s, p, mode="matrix")
        assert good.ok and good.min_eigenvalue > 0.0
        min_good = min(min_good, good.min_eigenvalue)
        bad = objective.StepsizeSet(alphas=50.0 * np.asarray(s.alphas), beta=s.beta)
        report = objective.validate_stepsizes(bad, p, mode="matrix")
        assert not report.ok and report.min_eigenvalue < 0.0
        assert "eigenvalue" in report.message
        max_bad = max(max_bad, report.min_eigenvalue)
    elapsed = time.perf_counter() - t0
    _verdict(
        7, "stepsize test separates valid from violated", True,
        "50 instances: worst valid eig %.2e, best violated eig %.2e"
        % (min_good, max_bad), elapsed, 5,
    )


def test_criterion_8_budget_sweep_trend():
    t0 = time.perf_counter()
    cfg = harness.RunConfig(
        topology=harness.TopologyConfig(kind="ring", n=8),
        problem=harness.ProblemConfig(
            source="synthetic", q=10, m=15, noise=0.01, sparsity=0.3,
            loss="least-squares",
            regularizer=harness.RegularizerConfig(kind="l1", nu=0.1),
        ),
        stepsizes=harness.StepsizeConfig(mode="fraction", fraction=0.9),
        run=harness.RunSection(
            iterations=10**4, start_agent=1, output=None,
            tail_fraction=0.5, backend=None,
        ),
        privacy=harness.PrivacyConfig(
            enabled=True, delta=1e-3, attenuation=1.05, target_epsilon=1.0,
        ),
        seeds=harness.Seeds(relay=0, noise=0, data=0),
    )
    out = harness.run_sweep(cfg, [1.0, 5.0, 10.0], 10)
    med = {m["epsilon"]: m["median_final_rel_err"] for m in out["medians"]}
    elapsed = time.perf_counter() - t0
    ok = (
        med[1.0] >= med[5.0] >= med[10.0]
        and med[None] <= med[1.0]
        and med[None] <= med[5.0]
        and med[None] <= med[10.0]
    )
    _verdict(
        8, "error falls as the budget grows", ok,
        "medians: noiseless %.2e, eps1 %.2e, eps5 %.2e, eps10 %.2e"
        % (med[None], med[1.0], med[5.0], med[10.0]), elapsed, 120,
    )


def test_criterion_9_accounting_and_determinism(tmp_path):
    t0 = time.perf_counter()
    p = _lasso_instance(5, 6, 9, 0.05, 0.4, seed=33)
    s = objective.stepsizes_from_fraction(p, 0.9)
    g = topology.generate_topology("complete", 5)
    K = 777
    traj = engine.run(p, s, g, None, K, seed_relay=4, seed_noise=5)
    comm_ok = traj.comm == K and int(traj.final_state.tau.sum()) == K
    text = "\n".join([
        "[topology]", 'kind = "ring"', "n = 4", "",
        "[problem]", "q = 5", "m = 8", "",
        "[problem.regularizer]", 'kind = "l1"', "nu = 0.1", "",
        "[run]", "iterations = 400", "",
        "[privacy]", "enabled = true", "delta = 1e-3",
        "attenuation = 1.5", "sigma1_sq = 0.4",
    ])
    cfg_path = tmp_path / "det.toml"
    cfg_path.write_text(text + "\n")
    cfg = harness.load_config(str(cfg_path))
    pair = []
    for tag in ("a", "b"):
        bundle = harness.run_experiment(cfg)
        pair.append(harness.emit_results(bundle, str(tmp_path / tag)))
    (j1, l1), (j2, l2) = pair
    bytes_ok = (
        open(j1, "rb").read() == open(j2, "rb").read()
        and open(l1, "rb").read() == open(l2, "rb").read()
    )
    elapsed = time.perf_counter() - t0
    _verdict(
        9, "exact accounting and repeatable bundles", comm_ok and bytes_ok,
        "comm %d == K, tau sum %d, byte-identical outputs: %s"
        % (traj.comm, int(traj.final_state.tau.sum()), bytes_ok), elapsed, 5,
    )
