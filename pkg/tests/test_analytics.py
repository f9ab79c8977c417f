from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from catqec.analytics import (
    StepFidelities,
    acceptance_probability,
    bayes_records,
    break_even_ratio,
    brute_force_steps,
    equal_lambda_schedule,
    flip_probabilities,
    gain,
    gaussian_angle_retention,
    kerr_decode_fidelity,
    loss_budget,
    optimize_cadence,
    postselect,
    solve_r,
    step_fidelities,
    step_lambdas,
    total_fidelity,
    tracking_fidelity,
)
from catqec.errors import NoRootError
from catqec.fock import required_dim
from catqec.params import SystemParams

KAPPA = 1 / 250


def brute_force_records(p1, p_g, p_e):
    # oracle: enumerate hidden flip patterns and records (4^S terms)
    S = len(p1)
    out = {}
    for bits in itertools.product((0, 1), repeat=S):
        total = match = 0.0
        for hidden in itertools.product((0, 1), repeat=S):
            w = 1.0
            mismatch = 0
            for k in range(S):
                w *= p1[k] if hidden[k] else 1 - p1[k]
                mismatch ^= hidden[k]
                if mismatch == 0:
                    w *= p_g if bits[k] == 0 else 1 - p_g
                else:
                    w *= p_e if bits[k] == 1 else 1 - p_e
                # reading e flips the expectation
                mismatch ^= bits[k]
            total += w
            if hidden == bits:
                match += w
        out[bits] = (total, match / total)
    return out


def test_solve_r_root_and_small_error_limit():
    errors = []
    for f0 in (0.9, 0.95, 0.99, 0.999, 0.9999):
        r = solve_r(f0)
        assert math.log(f0) + math.log1p(1 / r) - 1 / (1 + r) == pytest.approx(0.0, abs=1e-12)
        errors.append(abs(1 / (2 * r * r) - (1 - f0)) / (1 - f0))
    # leading-order asymptote; the next term is of order 1/r^3
    assert all(a > b for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 0.02


def test_solve_r_rejects_degenerate_fidelity():
    for f0 in (0.0, 1.0, 1.2):
        with pytest.raises(NoRootError):
            solve_r(f0)


def test_optimal_lambda_per_step():
    # S log(f0 + f1 n/S) is stationary in S where log(f0 + f1 lam) = f1 lam / (f0 + f1 lam)
    f = StepFidelities(0.97, 0.95)
    r = solve_r(f.f0)
    lam = f.f0 / (r * f.f1)
    g = f.f0 + f.f1 * lam
    assert math.log(g) - f.f1 * lam / g == pytest.approx(0.0, abs=1e-12)
    n = 3.0
    h = lambda S: S * math.log(f.f0 + f.f1 * n / S)
    S = n / lam
    assert h(S) > h(S * 0.99) and h(S) > h(S * 1.01)


def test_brute_force_matches_closed_form_step_count():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = SystemParams(T1=rng.uniform(15, 60), T2=rng.uniform(10, 40),
                         M_gg=rng.uniform(0.95, 1.0), M_ee=rng.uniform(0.9, 1.0))
        T, nbar0 = rng.uniform(30, 300), rng.uniform(1.0, 4.0)
        sol = optimize_cadence(T, nbar0, p, include_codec=False)
        assert sol.S == brute_force_steps(T, nbar0, p, s_max=200)


def test_equal_lambda_schedule():
    T, nbar0, S = 110.0, 2.0, 5
    t_k = equal_lambda_schedule(T, nbar0, KAPPA, S)
    assert sum(t_k) == pytest.approx(T, rel=1e-12)
    lam = step_lambdas(nbar0, KAPPA, t_k)
    assert np.allclose(lam, lam[0], rtol=1e-12)
    assert all(a < b for a, b in zip(t_k, t_k[1:]))
    with pytest.raises(ValueError):
        equal_lambda_schedule(T, nbar0, KAPPA, 0)


def test_equal_lambda_schedule_is_local_maximum():
    rng = np.random.default_rng(4)
    f = step_fidelities(SystemParams())
    T, nbar0, S = 110.0, 2.0, 5
    t_k = np.array(equal_lambda_schedule(T, nbar0, KAPPA, S))
    best = tracking_fidelity(f, step_lambdas(nbar0, KAPPA, t_k))
    for _ in range(200):
        trial = t_k * (1 + rng.uniform(-0.01, 0.01, S))
        trial *= T / trial.sum()
        assert tracking_fidelity(f, step_lambdas(nbar0, KAPPA, trial)) <= best + 1e-15


def test_gain_and_break_even():
    base = StepFidelities(0.97, 0.95)
    assert gain(StepFidelities(0.97, 0.96)) > gain(base)
    assert gain(StepFidelities(0.98, 0.95)) > gain(base)
    assert gain(StepFidelities(1.0, 0.5)) == pytest.approx(2.0)
    assert gain(StepFidelities(0.97, 0.0)) == pytest.approx(1.0)
    assert break_even_ratio(3.0, 2.0) == pytest.approx(1.0)


def test_step_fidelities_validation():
    with pytest.raises(ValueError):
        StepFidelities(0.9, 0.95)
    with pytest.raises(ValueError):
        step_fidelities(SystemParams(), dephasing="T3")
    assert step_fidelities(SystemParams(), "Tphi").f0 >= step_fidelities(SystemParams(), "T2").f0


def test_gaussian_retention_closed_form():
    sigma = math.radians(24)
    for s in (0.0, 0.05, 0.3, 1.0):
        # 64-node quadrature; accuracy degrades slowly once the spread exceeds sigma
        assert gaussian_angle_retention(s, sigma) == pytest.approx(1 / math.sqrt(1 + s * s / sigma ** 2),
                                                                   rel=1e-7)
    vec = gaussian_angle_retention(np.array([0.0, 0.3]), sigma)
    assert vec.shape == (2,)


def test_kerr_decode_fidelity_limits():
    t_k, lam = (20.0, 20.0), (0.1, 0.1)
    assert kerr_decode_fidelity(0.0, t_k, lam) == pytest.approx(1.0)
    assert kerr_decode_fidelity(0.03, (), ()) == 1.0
    assert kerr_decode_fidelity(0.03, t_k, lam) < 1.0
    assert kerr_decode_fidelity(0.03, (40.0,), (0.2,)) < kerr_decode_fidelity(0.03, t_k, lam)


def test_kerr_aware_step_period():
    p = SystemParams()
    for T in (55.0, 110.0, 200.0):
        for nbar0 in (2.0, 3.0):
            sol = optimize_cadence(T, nbar0, p, kerr_aware=True)
            assert 15.0 <= sol.t_w <= 25.0


def test_total_fidelity_validation_and_zero_time():
    p = SystemParams()
    with pytest.raises(ValueError):
        total_fidelity(100.0, 2.0, 2, (40.0,), p)
    with pytest.raises(ValueError):
        total_fidelity(100.0, 2.0, 2, (40.0, 40.0), p)
    sol = optimize_cadence(0.0, 2.0, p)
    assert sol.S == 0 and sol.predicted_F == pytest.approx(1.0)
    assert 0 < optimize_cadence(110.0, 3.0, p).predicted_F < 1


def test_codec_dimension_grows_with_amplitude():
    assert required_dim(2.0) == 20
    assert required_dim(4.0) > required_dim(3.0) > 20


@pytest.mark.parametrize("flip_model", ["poisson", "parity"])
@pytest.mark.parametrize("S", [1, 2, 3, 4])
def test_bayes_matches_enumeration(S, flip_model):
    p_g, p_e = 0.983, 0.971
    table = bayes_records(3.0, 13.8, S, p_g, p_e, flip_model=flip_model, n_th=0.02)
    p1 = flip_probabilities(3.0, 13.8, S, 250.0, flip_model, 0.02)
    ref = brute_force_records(p1, p_g, p_e)
    for r in table.records:
        prob, conf = ref[r.bits]
        assert r.probability == pytest.approx(prob, abs=1e-14)
        assert r.confidence == pytest.approx(conf, abs=1e-12)


def test_bayes_probabilities_sum_to_one():
    for S in range(1, 11):
        table = bayes_records(2.0, 10.0, S, 0.98, 0.96)
        assert sum(r.probability for r in table.records) == pytest.approx(1.0, abs=1e-12)
        assert len(table.records) == 2 ** S
    with pytest.raises(ValueError):
        bayes_records(2.0, 10.0, 0, 0.98, 0.96)
    with pytest.raises(ValueError):
        bayes_records(2.0, 10.0, 2, 1.2, 0.96)


def test_confirmed_jump_outranks_unconfirmed():
    table = bayes_records(3.0, 13.8, 4, 0.983, 0.971).by_label()
    assert table["1010"].confidence > table["0001"].confidence
    assert table["0000"].confidence > table["1010"].confidence


def test_first_step_posteriors():
    first = bayes_records(3.0, 13.8, 1, 0.983, 0.971).first_step
    assert first["p_g"] + first["p_e"] == pytest.approx(1.0)
    assert 0.5 < first["error_given_e"] < 1 and first["no_error_given_g"] > 0.99


def test_flip_models():
    p = flip_probabilities(2.0, 10.0, 3, 250.0, "poisson")
    assert p[0] == pytest.approx(1 - math.exp(-2 * (1 - math.exp(-0.04))))
    assert np.all(np.diff(p) < 0)
    q = flip_probabilities(2.0, 10.0, 3, 250.0, "parity")
    assert np.all(q < p) and np.all(q < 0.5)
    with pytest.raises(ValueError):
        flip_probabilities(2.0, 10.0, 3, 250.0, "binomial")


def test_postselect_examples():
    kept, frac = postselect([(0, 0), (1, 0), (0, 1), (1, 1)])
    assert kept == [(0, 0), (1, 0)] and frac == 0.5
    assert postselect([]) == ([], 0.0)
    table = bayes_records(2.0, 10.0, 3, 0.98, 0.96)
    manual = sum(r.probability for r in table.records if not r.bits or r.bits[-1] == 0
                 and "11" not in r.label)
    assert acceptance_probability(table) == pytest.approx(manual)


def test_loss_budget_strategy_and_gains():
    p = SystemParams()
    fast = loss_budget(p, 1.0)
    slow = loss_budget(p, 21.0)
    assert fast.strategy == "fast" and slow.strategy == "optimal"
    assert set(fast.gains) == set(slow.gains)
    assert all(g > 0 for g in slow.gains.values())
    assert fast.gains["double_jump"] > slow.gains["double_jump"]
    assert len(slow.to_rows()) == len(slow.gains)
    with pytest.raises(ValueError):
        loss_budget(p, 0.0)
    with pytest.raises(ValueError):
        loss_budget(p, 1.0, strategy="slow")
