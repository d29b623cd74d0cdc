"""Release acceptance checks.

Each test exercises one shipping criterion end to end against an
independent in-test oracle (closed forms recomputed from scratch, Monte
Carlo sampling, numerical quadrature, or exhaustive enumeration) and
prints a single "criterion NN <name>: PASS|FAIL" line so a captured log
reads as a verdict table. Tolerances are part of the criteria and are
asserted exactly as stated.
"""

import math
import random
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm
from sympy import isprime

import noise_sweep
from nflfed import (
    AttackSpec,
    BeliefDistribution,
    ClosedForm,
    ConditionalBelief,
    CosineGradientMatch,
    FLScenario,
    Flat,
    GaussianGradientMatch,
    Hfl,
    Identity,
    LabelPrior,
    LinearRegression,
    LinearRegressionModel,
    ModelInfo,
    NormScoring,
    Paillier,
    Randomization,
    SecretSharing,
    SignBased,
    SoftmaxLinear,
    SoftmaxLinearModel,
    SyntheticData,
    TotalVariationPrior,
    UniformBox,
    Vfl,
    bayesian_map_attack,
    gaussian_tv_sandwich,
    js_discrete,
    label_recovery_rate,
    measure_utility_loss,
    paillier_decrypt,
    paillier_encrypt,
    paillier_keygen,
    replicate_scenarios,
    run_scenario,
    tv_distance,
    vfl_cut_rows,
)
from nflfed.bounds import (
    DiscreteScenario,
    protector_optimize,
    scenario_evaluator,
    tradeoff_report,
)
from nflfed.cli import main as cli_main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

# 256-bit primes, frozen so the keypair (and the runtime budget) is stable
P256_A = 94947156393908130630169408345859302034117410389774509614386477034531417895803
P256_B = 93533437070355317220321598378928340451571289643846938467150175570686185225903


def _verdict(num: int, name: str, ok: bool, detail: str = "") -> None:
    print(f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'}"
          + (f"  ({detail})" if detail else ""))
    assert ok, f"criterion {num:02d} {name} failed: {detail}"


# ---------------------------------------------------------------------------
# 1. Paillier round-trip and additive homomorphism
# ---------------------------------------------------------------------------


def test_criterion_01_paillier_roundtrip_and_homomorphic_add():
    start = time.perf_counter()
    assert P256_A.bit_length() == 256 and P256_B.bit_length() == 256
    assert isprime(P256_A) and isprime(P256_B)
    kp = paillier_keygen(P256_A, P256_B)
    n, n2 = kp.n, kp.n_squared
    rng = random.Random(202401)
    ok = True
    for _ in range(1000):
        h = rng.randrange(n)
        c = paillier_encrypt(kp, h, rng.randrange(2**63))
        ok = ok and paillier_decrypt(kp, c) == h
    for _ in range(1000):
        a, b = rng.randrange(n), rng.randrange(n)
        ca = paillier_encrypt(kp, a, rng.randrange(2**63))
        cb = paillier_encrypt(kp, b, rng.randrange(2**63))
        ok = ok and paillier_decrypt(kp, ca * cb % n2) == (a + b) % n
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30.0
    _verdict(1, "paillier-roundtrip-homomorphic-add", ok, f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. nested uniform-box TV closed form vs Monte Carlo
# ---------------------------------------------------------------------------


def test_criterion_02_nested_box_tv_matches_monte_carlo():
    rng = np.random.default_rng(202402)
    samples = 1_000_000
    ok = True
    worst_z = 0.0
    for _ in range(20):
        m = int(rng.integers(1, 5))
        n = int(rng.integers(2, 40))
        side = float(n * n)
        # keep 2*delta/n^2 inside [0.4, 0.95] so the sampling oracle has
        # nonzero variance in every dimension count
        ratio = float(rng.uniform(0.4, 0.95))
        delta = 0.5 * ratio * side
        lows = [float(v) for v in rng.uniform(0.0, side - 2.0 * delta, size=m)]
        inner_iv = tuple((lo, lo + 2.0 * delta) for lo in lows)
        closed = tv_distance(
            UniformBox(inner_iv),
            UniformBox(tuple((0.0, side) for _ in range(m))),
            ClosedForm(),
        )
        p_true = (2.0 * delta / side) ** m
        ok = ok and math.isclose(closed, 1.0 - p_true, rel_tol=0.0, abs_tol=1e-12)
        draws = rng.uniform(0.0, side, size=(samples, m))
        inside = np.ones(samples, dtype=bool)
        for j, (lo, hi) in enumerate(inner_iv):
            inside &= (draws[:, j] >= lo) & (draws[:, j] <= hi)
        mc = 1.0 - float(inside.mean())
        se = math.sqrt(p_true * (1.0 - p_true) / samples)
        worst_z = max(worst_z, abs(closed - mc) / se)
        ok = ok and abs(closed - mc) <= 4.0 * se
    _verdict(2, "nested-box-tv-closed-form", ok, f"worst z={worst_z:.2f}")


# ---------------------------------------------------------------------------
# 3. Gaussian TV sandwich vs numerical integration
# ---------------------------------------------------------------------------


def test_criterion_03_gaussian_tv_sandwich_encloses_integrated_tv():
    rng = np.random.default_rng(202403)
    ok = True
    for _ in range(50):
        s1 = float(np.exp(rng.uniform(np.log(0.05), np.log(20.0))))
        s_eps = s1 * float(np.exp(rng.uniform(np.log(0.03), np.log(30.0))))
        v1, v2 = s1 * s1, s1 * s1 + s_eps * s_eps
        # the densities cross at +-xc; splitting there keeps quadrature
        # away from the |.| kinks
        xc = math.sqrt(math.log(v2 / v1) * v1 * v2 / (v2 - v1))
        s2 = math.sqrt(v2)

        def dens_gap(x, a=s1, b=s2):
            return abs(norm.pdf(x, 0.0, a) - norm.pdf(x, 0.0, b))

        span = 12.0 * s2
        total, _ = quad(
            dens_gap, -span, span, points=[-xc, xc],
            limit=500, epsabs=1e-13, epsrel=1e-10,
        )
        tv_num = 0.5 * total
        anchor = 2.0 * (norm.cdf(xc / s1) - norm.cdf(xc / s2))
        ok = ok and abs(tv_num - anchor) <= 1e-6
        lo, hi = gaussian_tv_sandwich((s1,), s_eps)
        x_ratio = min(1.0, (s_eps * s_eps) / (s1 * s1))
        ok = ok and math.isclose(lo, x_ratio / 100.0, rel_tol=1e-12)
        ok = ok and math.isclose(hi, min(1.0, 1.5 * x_ratio), rel_tol=1e-12)
        ok = ok and lo <= tv_num + 1e-9 and tv_num <= hi + 1e-9
    _verdict(3, "gaussian-tv-sandwich", ok)


# ---------------------------------------------------------------------------
# 4 and 5. enumerated random scenario family
# ---------------------------------------------------------------------------


def _random_client_scenario(rng) -> DiscreteScenario:
    nd = int(rng.integers(1, 6))
    nw = int(rng.integers(1, 6))
    data_atoms = tuple(range(nd))
    # distinct released atoms on a 0.1 lattice
    picks = rng.choice(np.arange(-30, 31), size=nw, replace=False)
    w_atoms = tuple(sorted(float(v) * 0.1 for v in picks))
    rows = {
        d: BeliefDistribution(
            w_atoms, tuple(float(v) for v in rng.dirichlet(np.ones(nw)))
        )
        for d in data_atoms
    }
    prior = BeliefDistribution(
        data_atoms, tuple(float(v) for v in rng.dirichlet(np.ones(nd)))
    )
    kind = int(rng.integers(0, 4))
    if kind == 0:
        channel = None
    elif kind == 1:
        channel = Identity()
    elif kind == 2:
        channel = Randomization(float(np.exp(rng.uniform(np.log(0.2), np.log(3.0)))))
    else:
        channel = ConditionalBelief(
            {
                w: BeliefDistribution(
                    w_atoms, tuple(float(v) for v in rng.dirichlet(np.ones(nw)))
                )
                for w in w_atoms
            }
        )
    true_data = int(rng.integers(0, nd)) if rng.random() < 0.7 else None
    return DiscreteScenario(prior, ConditionalBelief(rows), channel, true_data=true_data)


def test_criterion_04_privacy_floor_holds_on_random_scenarios():
    rng = np.random.default_rng(202404)
    ok = True
    worst = math.inf
    for _ in range(100):
        k = int(rng.integers(1, 4))
        mets = [_random_client_scenario(rng).metrics() for _ in range(k)]
        eps_p = math.fsum(m.epsilon_p for m in mets) / k
        c1 = math.fsum(m.c1_term for m in mets) / k
        xi = max(m.xi for m in mets)
        c2 = 0.5 * (math.exp(2.0 * xi) - 1.0)
        floor = c1 - (c2 / k) * math.fsum(m.tv for m in mets)
        margin = eps_p - floor
        worst = min(worst, margin)
        ok = ok and margin >= -1e-9
    _verdict(4, "privacy-floor-enumeration", ok, f"worst margin={worst:.3e}")


def test_criterion_05_posterior_js_bounded_by_quadratic_tv():
    rng = np.random.default_rng(202405)
    ok = True
    worst = math.inf
    for _ in range(100):
        for _ in range(int(rng.integers(1, 4))):
            m = _random_client_scenario(rng).metrics()
            cap = 0.25 * (math.exp(2.0 * m.xi) - 1.0) ** 2 * m.tv**2
            slack = cap + 1e-9 - js_discrete(m.f_a, m.f_o)
            worst = min(worst, slack)
            ok = ok and slack >= 0.0
    _verdict(5, "posterior-js-quadratic-cap", ok, f"worst slack={worst:.3e}")


# ---------------------------------------------------------------------------
# 6. fixed randomization sweep with verified assumptions
# ---------------------------------------------------------------------------


def test_criterion_06_noise_sweep_nfl_floor_and_identity_equality():
    ok = True
    margins = []
    for sigma in noise_sweep.SWEEP_SIGMAS:
        rep = tradeoff_report(
            [noise_sweep.scenario(sigma)], noise_sweep.utility, noise_sweep.cost
        )
        full = {c.name: c for c in rep.checks}["full_nfl"]
        margins.append(full.margin)
        ok = ok and full.status == "checked" and full.margin >= -1e-6
        if sigma > 0:
            c = rep.constants
            ok = ok and None not in (c.delta, c.xi_cap, c.gamma_cap, c.c_d, c.c_x)
        else:
            ok = ok and abs(full.margin) <= 1e-9
    lo, hi = min(margins), max(margins)
    _verdict(6, "randomization-sweep-nfl-floor", ok, f"margins in [{lo:.2e}, {hi:.2e}]")


# ---------------------------------------------------------------------------
# 7. zero-utility-loss aggregation mechanisms
# ---------------------------------------------------------------------------


def test_criterion_07_secret_sharing_and_paillier_utility_loss():
    start = time.perf_counter()
    k = 4
    base = FLScenario(
        topology=Hfl(k),
        model=LinearRegression(3),
        data=SyntheticData("regression", num_samples=64, dim=3, noise=0.1),
        mechanism=Identity(),
        rounds=3,
        lr=0.1,
        master_seed=202407,
        holdout=128,
    )
    plain = [run_scenario(s) for s in replicate_scenarios(base, 20)]
    shared = [
        run_scenario(replace(t.scenario, mechanism=SecretSharing(4))) for t in plain
    ]
    encrypted = [
        run_scenario(replace(t.scenario, mechanism=Paillier(P256_A, P256_B)))
        for t in plain
    ]
    gap_ss = measure_utility_loss(shared, plain)
    gap_pl = measure_utility_loss(encrypted, plain)
    elapsed = time.perf_counter() - start
    ok = gap_ss.value == 0.0
    ok = ok and abs(gap_pl.value) <= k * 2.0**-16
    ok = ok and elapsed < 60.0
    _verdict(
        7,
        "zero-utility-loss-mechanisms",
        ok,
        f"ss={gap_ss.value!r} paillier={gap_pl.value:.2e} {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 8. label inference on vertical cut gradients
# ---------------------------------------------------------------------------


def test_criterion_08_label_inference_clean_vs_noisy():
    clean = FLScenario(
        topology=Vfl(2),
        model=SoftmaxLinear(4, 10),
        data=SyntheticData("classification", num_samples=1000, dim=4, num_classes=10),
        mechanism=Identity(),
        rounds=2,
        lr=0.2,
        master_seed=202408,
        holdout=100,
    )
    rate_clean = label_recovery_rate(run_scenario(clean))
    # every cut-gradient coordinate is a softmax probability or a
    # probability minus one, so |v| < 1 and additive noise at sigma = 4
    # flips each coordinate's sign with probability >= Phi(-1/4) > 0.4
    flip_floor = norm.cdf(-1.0 / 4.0)
    noisy_trace = run_scenario(replace(clean, mechanism=Randomization(4.0)))
    flips = total = 0
    for r in range(clean.rounds):
        before = np.asarray(vfl_cut_rows(noisy_trace, r, use_protected=False))
        after = np.asarray(vfl_cut_rows(noisy_trace, r, use_protected=True))
        flips += int(((before < 0) != (after < 0)).sum())
        total += before.size
    rate_noisy = label_recovery_rate(noisy_trace)
    ok = flip_floor >= 0.4
    ok = ok and flips / total >= 0.39
    ok = ok and rate_clean == 1.0
    ok = ok and rate_noisy < 0.30 + 0.05
    _verdict(
        8,
        "label-inference-clean-vs-noisy",
        ok,
        f"clean={rate_clean} noisy={rate_noisy:.3f} flip={flips / total:.3f}",
    )


# ---------------------------------------------------------------------------
# 9. MAP attack equals brute-force enumeration
# ---------------------------------------------------------------------------


def _candidate(d) -> tuple:
    return d if isinstance(d, tuple) else (d,)


def _oracle_gradient(model, d) -> np.ndarray:
    d = _candidate(d)
    if isinstance(model, LinearRegressionModel):
        x = np.asarray(d[:-1], dtype=float)
        return 2.0 * (float(np.dot(model.theta, x)) - float(d[-1])) * x
    w = np.asarray(model.weights, dtype=float)
    x = np.asarray(d[:-1], dtype=float)
    z = w @ x
    p = np.exp(z - z.max())
    p /= p.sum()
    p[int(d[-1])] -= 1.0
    return np.outer(p, x).ravel()


def _oracle_score(spec: AttackSpec, w: np.ndarray, d) -> float:
    lik = spec.likelihood
    if isinstance(lik, GaussianGradientMatch):
        diff = w - _oracle_gradient(lik.model, d)
        score = -float(diff @ diff) / (2.0 * lik.sigma**2)
    elif isinstance(lik, CosineGradientMatch):
        g = _oracle_gradient(lik.model, d)
        score = float(w @ g) / (float(np.linalg.norm(w)) * float(np.linalg.norm(g)))
    elif isinstance(lik, NormScoring):
        lo, hi = lik.bins[int(_candidate(d)[-1])]
        score = 0.0 if lo <= float(np.linalg.norm(w)) <= hi else -math.inf
    else:
        score = 0.0 if w[int(_candidate(d)[-1])] < 0.0 else -math.inf
    prior = spec.prior
    if isinstance(prior, LabelPrior):
        f = prior.frequencies[int(_candidate(d)[-1])]
        score += math.log(f) if f > 0.0 else -math.inf
    elif isinstance(prior, TotalVariationPrior):
        t = _candidate(d)
        score -= prior.weight * math.fsum(
            abs(t[i + 1] - t[i]) for i in range(len(t) - 1)
        )
    return score


def _oracle_map(spec: AttackSpec, w: np.ndarray):
    best_idx, best = None, None
    for idx, d in enumerate(spec.candidate_grid):
        s = _oracle_score(spec, w, d)
        if best is None or s > best:
            best_idx, best = idx, s
    return spec.candidate_grid[best_idx]


def _fixed_attack_scenarios(rng) -> list[tuple[AttackSpec, ModelInfo]]:
    scens = []
    reg = LinearRegressionModel((0.8, -0.5, 0.3))
    reg_grid = []
    for _ in range(30):
        c = tuple(round(float(v), 3) for v in rng.uniform(-2.0, 2.0, size=4))
        if c not in reg_grid:
            reg_grid.append(c)
    reg_grid = tuple(reg_grid)
    w_reg = ModelInfo(
        tuple(_oracle_gradient(reg, reg_grid[7]) + rng.normal(0.0, 0.05, size=3))
    )
    scens.append((AttackSpec(GaussianGradientMatch(reg, 0.7), reg_grid), w_reg))
    scens.append(
        (AttackSpec(GaussianGradientMatch(reg, 2.5), reg_grid, TotalVariationPrior(0.4)), w_reg)
    )
    cos_grid = tuple(
        c for c in reg_grid if np.linalg.norm(_oracle_gradient(reg, c)) > 1e-9
    )
    scens.append((AttackSpec(CosineGradientMatch(reg), cos_grid), w_reg))

    soft = SoftmaxLinearModel(((0.6, -0.2), (-0.4, 0.9), (0.1, 0.3)))
    soft_grid = []
    for _ in range(24):
        c = (
            round(float(rng.uniform(-2.0, 2.0)), 3),
            round(float(rng.uniform(-2.0, 2.0)), 3),
            int(rng.integers(0, 3)),
        )
        if c not in soft_grid:
            soft_grid.append(c)
    soft_grid = tuple(soft_grid)
    w_soft = ModelInfo(
        tuple(_oracle_gradient(soft, soft_grid[3]) + rng.normal(0.0, 0.1, size=6))
    )
    scens.append((AttackSpec(GaussianGradientMatch(soft, 1.0), soft_grid), w_soft))
    scens.append(
        (
            AttackSpec(
                GaussianGradientMatch(soft, 1.0), soft_grid, LabelPrior((0.2, 0.5, 0.3))
            ),
            w_soft,
        )
    )
    scens.append((AttackSpec(CosineGradientMatch(soft), soft_grid), w_soft))

    # two negative coordinates tie at likelihood 0; the lowest grid index
    # must win, in both grid orders
    w_sign = ModelInfo((-0.5, 0.2, -0.9, 0.1))
    scens.append((AttackSpec(SignBased(), (0, 1, 2, 3)), w_sign))
    scens.append((AttackSpec(SignBased(), (2, 0, 3, 1)), w_sign))
    scens.append(
        (AttackSpec(SignBased(), (0, 1, 2, 3), LabelPrior((0.1, 0.2, 0.6, 0.1))), w_sign)
    )

    # disjoint norm bins; ||w_norm|| ~ 0.67 lands in the middle one
    bins = ((0.0, 0.5), (0.55, 1.2), (1.3, 50.0))
    w_norm = ModelInfo((0.6, 0.3))
    scens.append((AttackSpec(NormScoring(bins), (0, 1, 2)), w_norm))
    scens.append(
        (AttackSpec(NormScoring(bins), (0, 1, 2), LabelPrior((0.25, 0.7, 0.05))), w_norm)
    )
    return scens


def _random_attack_scenario(rng) -> tuple[AttackSpec, ModelInfo]:
    kind = int(rng.integers(0, 4))
    if kind in (0, 1):
        feats = int(rng.integers(1, 4))
        if rng.random() < 0.5:
            model = LinearRegressionModel(
                tuple(float(v) for v in rng.normal(0.0, 1.0, size=feats))
            )
            width, dim, label_grid = feats + 1, feats, False
        else:
            classes = int(rng.integers(2, 5))
            model = SoftmaxLinearModel(
                tuple(
                    tuple(float(v) for v in rng.normal(0.0, 1.0, size=feats))
                    for _ in range(classes)
                )
            )
            width, dim, label_grid = feats + 1, feats * classes, True
        grid = []
        for _ in range(int(rng.integers(4, 25))):
            c = tuple(round(float(v), 3) for v in rng.uniform(-2.0, 2.0, size=width))
            if label_grid:
                c = c[:-1] + (int(rng.integers(0, len(model.weights))),)
            if c not in grid:
                grid.append(c)
        w = np.asarray(
            _oracle_gradient(model, grid[int(rng.integers(0, len(grid)))])
            + rng.normal(0.0, 0.2, size=dim)
        )
        if kind == 1:
            grid = [c for c in grid if np.linalg.norm(_oracle_gradient(model, c)) > 1e-9]
            if not grid or np.linalg.norm(w) == 0.0:
                return _random_attack_scenario(rng)
            lik = CosineGradientMatch(model)
        else:
            lik = GaussianGradientMatch(model, float(rng.uniform(0.3, 3.0)))
        if label_grid and rng.random() < 0.4:
            prior = LabelPrior(
                tuple(float(v) for v in rng.dirichlet(np.ones(len(model.weights))))
            )
        elif rng.random() < 0.4:
            prior = TotalVariationPrior(float(rng.uniform(0.0, 1.0)))
        else:
            prior = Flat()
        return AttackSpec(lik, tuple(grid), prior), ModelInfo(tuple(w))
    classes = int(rng.integers(2, 7))
    w = rng.normal(0.0, 1.0, size=classes)
    if kind == 3:
        w[int(rng.integers(0, classes))] = -abs(w[0]) - 0.1
        lik = SignBased()
    else:
        # bins must be pairwise disjoint and one of them must contain
        # ||w||, otherwise every candidate scores -inf
        target = float(np.linalg.norm(w))
        j = int(rng.integers(0, classes))
        bins: list[tuple[float, float]] = [(0.0, 0.0)] * classes
        lo = target - float(rng.uniform(0.05, 0.4)) * target
        hi = target + float(rng.uniform(0.05, 0.4)) * target
        bins[j] = (lo, hi)
        cur = lo
        for i in range(j - 1, -1, -1):
            hi_i = cur - float(rng.uniform(0.05, 0.5)) * target
            lo_i = hi_i - float(rng.uniform(0.1, 0.8)) * target
            bins[i] = (lo_i, hi_i)
            cur = lo_i
        cur = hi
        for i in range(j + 1, classes):
            lo_i = cur + float(rng.uniform(0.05, 0.5)) * target
            hi_i = lo_i + float(rng.uniform(0.1, 0.8)) * target
            bins[i] = (lo_i, hi_i)
            cur = hi_i
        lik = NormScoring(tuple(bins))
    prior = (
        LabelPrior(tuple(float(v) for v in rng.dirichlet(np.ones(classes))))
        if rng.random() < 0.5
        else Flat()
    )
    return AttackSpec(lik, tuple(range(classes)), prior), ModelInfo(tuple(w))


def test_criterion_09_map_attack_matches_brute_force():
    rng = np.random.default_rng(202409)
    scens = _fixed_attack_scenarios(rng)
    scens.extend(_random_attack_scenario(rng) for _ in range(12))
    ok = True
    for spec, observed in scens:
        w = np.asarray(observed.values, dtype=float)
        expected = _candidate(_oracle_map(spec, w))
        got = bayesian_map_attack(spec, observed).map_estimate
        ok = ok and got == expected
    _verdict(9, "map-attack-brute-force-equivalence", ok, f"{len(scens)} scenarios")


# ---------------------------------------------------------------------------
# 10. constrained mechanism optimization vs exhaustive search
# ---------------------------------------------------------------------------


def test_criterion_10_optimizer_matches_exhaustive_search():
    grid = noise_sweep.mechanism_grid()
    assert len(grid) == 20
    evaluate = scenario_evaluator(
        noise_sweep.scenario(), noise_sweep.utility, noise_sweep.cost
    )
    best_idx, best_obj = None, None
    for i, cfg in enumerate(grid):
        e_p, e_u, e_e = evaluate(cfg)
        if e_p <= 0.3:
            obj = 1.0 * e_u + 1.0 * e_e
            if best_obj is None or obj < best_obj:
                best_idx, best_obj = i, obj
    res = protector_optimize(grid, evaluate, 1.0, 1.0, 0.3)
    ok = res.best_index == best_idx
    ok = ok and res.best == grid[best_idx]
    ok = ok and res.objective == best_obj
    _verdict(
        10,
        "optimizer-exhaustive-equivalence",
        ok,
        f"best={res.best!r} objective={res.objective:.6f}",
    )


# ---------------------------------------------------------------------------
# 11. simulate determinism
# ---------------------------------------------------------------------------


def test_criterion_11_simulate_is_byte_deterministic(tmp_path):
    scenario = str(SCENARIOS / "hfl_small.json")
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli_main(["simulate", "--scenario", scenario, "--out", str(first)]) == 0
    assert cli_main(["simulate", "--scenario", scenario, "--out", str(second)]) == 0
    ok = all(
        (first / name).read_bytes() == (second / name).read_bytes()
        for name in ("trace.json", "trace.csv")
    )
    _verdict(11, "simulate-byte-determinism", ok)
