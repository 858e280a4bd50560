import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from tcclock.liouville import ness
from tcclock.spin import ClockParams, build_operators
from tcclock.thermo import (
    FidelityUnderflow,
    ThermoLedger,
    _mean_se,
    capped_tick_entropies,
    delta_S_psi,
    fidelity,
    first_tick_entropy,
    ft_estimator,
    heat_work,
    segment_heat_work,
    tick_entropy,
    tick_ledger,
    tur_kur_report,
    uncertainty_entropy,
    write_ledger,
)
from tcclock.ticks import ACTIVITY, EMISSIONS, HEAT, CountingEnsemble, accumulate, extract_ticks, merit
from tcclock.trajectory import EMISSION, expected_rates, run_trajectory, trajectory_rng


@pytest.fixture(scope="module")
def warm():
    """S=5 clock at high temperature, where ticks are cheap and fluctuations large."""
    ops = build_operators(ClockParams(spin2=10, lam=2.0, beta=0.1))
    pi = ness(ops)
    recs = [run_trajectory(ops, pi, 1e4, rng=trajectory_rng(11, i)) for i in range(120)]
    return ops, pi, recs


@pytest.fixture(scope="module")
def cold():
    ops = build_operators(ClockParams(spin2=10, lam=2.0, beta=2.0))
    pi = ness(ops)
    recs = [run_trajectory(ops, pi, 2e4, rng=trajectory_rng(12, i)) for i in range(60)]
    return ops, pi, recs


def unit(v):
    v = np.asarray(v, complex)
    return v / np.linalg.norm(v)


# -- Delta S_psi -----------------------------------------------------------------------


def test_delta_s_psi_zero_for_equal_states(cold):
    ops, pi, _ = cold
    psi = unit(np.arange(1, ops.dim + 1) + 0.5j)
    assert delta_S_psi(psi, psi, pi) == 0.0


def test_delta_s_psi_between_eigenstates(cold):
    _, pi, _ = cold
    i, j = 2, 7
    vi, vj = pi.vectors[:, i], pi.vectors[:, j]
    want = math.log(pi.populations[i]) - math.log(pi.populations[j])
    assert delta_S_psi(vi, vj, pi) == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_delta_s_psi_dense_contraction(cold):
    ops, pi, _ = cold
    rng = np.random.default_rng(3)
    a = unit(rng.normal(size=ops.dim) + 1j * rng.normal(size=ops.dim))
    b = unit(rng.normal(size=ops.dim) + 1j * rng.normal(size=ops.dim))
    f = lambda v: (v.conj() @ pi.rho @ v).real
    assert delta_S_psi(a, b, pi) == pytest.approx(math.log(f(a)) - math.log(f(b)), rel=1e-12)
    assert delta_S_psi(a, b, pi.rho) == delta_S_psi(a, b, pi)


def test_fidelity_underflow_raises():
    ops = build_operators(ClockParams(spin2=1, lam=0.0, beta=math.inf))
    pi = ness(ops)
    ground, excited = np.array([1, 0], complex), np.array([0, 1], complex)
    assert fidelity(ground, pi) == pytest.approx(1.0)
    with pytest.raises(FidelityUnderflow):
        delta_S_psi(ground, excited, pi)


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_uncertainty_weights_reproduce_fidelity(xs):
    ops = build_operators(ClockParams(spin2=2, lam=1.5, beta=1.0))
    pi = ness(ops)
    psi = np.array(xs[:3]) + 1j * np.array(xs[3:])
    if np.linalg.norm(psi) < 1e-3:
        return
    psi = unit(psi)
    p = np.abs(pi.vectors.conj().T @ psi) ** 2
    # exp(-S_unc) averaged over the projection outcome is exactly one
    assert np.sum(p * pi.populations) / fidelity(psi, pi) == pytest.approx(1.0, rel=1e-10)


# -- ledger --------------------------------------------------------------------------------


def test_degenerate_tick_has_zero_entropy():
    one = np.ones(1)
    led = ThermoLedger(np.zeros(1), np.zeros(1), 0.3 * one, 0.3 * one, one, one, beta=2.0, duration=one)
    assert led.S_tick[0] == 0.0 and led.Q[0] == 0.0 and led.W[0] == 0.0


def test_ledger_matches_snapshot_states(cold):
    ops, pi, _ = cold
    p = ops.params
    rec = run_trajectory(ops, pi, 2e4, markers=lambda t, k, n: True, rng=trajectory_rng(5, 0))
    states = [psi for _, psi in rec.snapshots]
    assert len(states) == len(rec)
    ticks = extract_ticks(accumulate(rec, EMISSIONS), 40)
    led = tick_ledger(rec, ticks, p.beta)
    assert len(led) == len(ticks) - 1 > 3
    for n, (a, b) in enumerate(zip(ticks.event_index[:-1], ticks.event_index[1:])):
        kinds = rec.kinds[a + 1 : b + 1]
        q = np.sum(kinds == EMISSION) - np.sum(kinds != EMISSION)
        want = delta_S_psi(states[a], states[b], pi) + p.beta * q
        assert led.S_tick[n] == pytest.approx(want, rel=1e-10, abs=1e-10)
        _, dE, W = segment_heat_work(np.sum(kinds == EMISSION), np.sum(kinds != EMISSION), states[a], states[b],
                                     ops.energy_diag())
        assert led.dE[n] == pytest.approx(dE, abs=1e-9)
        assert led.W[n] == pytest.approx(W, abs=1e-9)


def test_first_law_bookkeeping(cold):
    ops, pi, recs = cold
    for rec in recs[:10]:
        Q, dE, W = heat_work(rec, extract_ticks(accumulate(rec, ACTIVITY), 50), ops.params.beta)
        np.testing.assert_allclose(W - Q - dE, 0.0, atol=1e-12)


def test_beta_infinite_rejected(cold):
    _, _, recs = cold
    ticks = extract_ticks(accumulate(recs[0], EMISSIONS), 10)
    with pytest.raises(ValueError):
        tick_ledger(recs[0], ticks, math.inf)
    with pytest.raises(ValueError):
        capped_tick_entropies(recs[0], EMISSIONS, 10, math.inf)


def test_mean_tick_entropy_nonnegative(cold):
    ops, _, recs = cold
    S, dS = _mean_se([tick_entropy(r, extract_ticks(accumulate(r, EMISSIONS), 30), ops.params.beta) for r in recs])
    assert S >= -2 * dS
    assert S > 0


def test_stationary_energy_and_heat_rate(cold):
    ops, pi, recs = cold
    p = ops.params
    leds = []
    for r in recs:
        ticks = extract_ticks(accumulate(r, EMISSIONS), 30)
        led = tick_ledger(r, ticks, p.beta)
        leds.append(led)
        if len(led):
            # energy changes telescope between the first and last tick
            i, j = ticks.event_index[0], ticks.event_index[-1]
            assert led.dE.sum() == pytest.approx(r.energies[j] - r.energies[i], abs=1e-9)
    dE, _ = _mean_se([l.dE for l in leds])
    Qm, _ = _mean_se([l.Q for l in leds])
    assert abs(dE) <= 0.01 * Qm
    # trajectories start in the steady state, so net emissions per unit time are unbiased
    per_traj = np.array([(r.n_emissions - r.n_absorptions) / r.horizon for r in recs])
    g = [rate * np.trace(L.conj().T @ L @ pi.rho).real for rate, L in oracles.jump_ops(p.S, p.lam, p.gamma0, p.beta)]
    se = per_traj.std(ddof=1) / math.sqrt(len(per_traj))
    assert abs(per_traj.mean() - (g[0] - g[1])) <= 4 * se


def test_write_ledger(tmp_path, cold):
    ops, _, recs = cold
    led = tick_ledger(recs[0], extract_ticks(accumulate(recs[0], EMISSIONS), 30), ops.params.beta)
    path = write_ledger(tmp_path / "ledger.csv", led)
    lines = path.read_text().splitlines()
    assert lines[0] == "T,Q,K_tick,dS_psi,S_tick"
    assert len(lines) == len(led) + 1


# -- fluctuation theorems --------------------------------------------------------------


def test_ft_estimator_exact_on_zeros():
    est = ft_estimator(np.zeros(50))
    assert est.mean == 1.0 and est.stderr == 0.0 and est.deviation == 0.0
    grouped = ft_estimator(None, groups=[np.zeros(3), np.zeros(5)])
    assert grouped.mean == 1.0 and grouped.n == 8
    np.testing.assert_array_equal(grouped.trace, [1.0, 1.0])


def test_ft_estimator_grouped_trace_and_thinning():
    groups = [np.array([0.0, np.log(2.0)]), np.array([np.log(4.0)])]
    est = ft_estimator(None, groups=groups)
    np.testing.assert_allclose(est.trace, [0.75, (1.5 + 0.25) / 3])
    thin = ft_estimator(np.linspace(-1, 1, 1000), trace_points=20)
    assert len(thin.trace) <= 20
    assert thin.trace[-1] == pytest.approx(np.mean(np.exp(-np.linspace(-1, 1, 1000))))


@pytest.mark.parametrize("obs", [EMISSIONS, ACTIVITY], ids=lambda o: o.name)
def test_capped_tick_fluctuation_theorem(warm, obs):
    ops, _, recs = warm
    groups = [capped_tick_entropies(r, obs, 3, ops.params.beta) for r in recs]
    est = ft_estimator(None, groups=groups)
    assert est.n > 1000
    assert est.deviation <= 3 * est.stderr, (est.mean, est.stderr)


def test_first_tick_fluctuation_theorem(warm):
    ops, _, recs = warm
    est = ft_estimator([first_tick_entropy(r, EMISSIONS, 3, ops.params.beta) for r in recs])
    assert est.deviation <= 3 * est.stderr, (est.mean, est.stderr)


def test_heat_ticks_converge_slower(warm):
    ops, _, recs = warm
    em = ft_estimator(None, groups=[capped_tick_entropies(r, EMISSIONS, 3, ops.params.beta) for r in recs])
    ht = ft_estimator(None, groups=[capped_tick_entropies(r, HEAT, 3, ops.params.beta) for r in recs])
    assert ht.deviation > em.deviation


def test_uncertainty_entropy_fluctuation_theorem():
    ops = build_operators(ClockParams(spin2=10, lam=2.0, beta=0.5))
    pi = ness(ops)
    samples = []
    for i in range(2000):
        rng = trajectory_rng(31, i)
        rec = run_trajectory(ops, pi, 300.0, rng=rng)
        samples.append(uncertainty_entropy(rec.final_state, pi, rng))
    est = ft_estimator(samples)
    assert est.deviation <= 0.05


def test_uncertainty_entropy_zero_on_eigenstate(cold):
    _, pi, _ = cold
    rng = np.random.default_rng(0)
    for i in (0, 4, 9):
        assert uncertainty_entropy(pi.vectors[:, i], pi, rng) == pytest.approx(0.0, abs=1e-9)


# -- uncertainty relations --------------------------------------------------------------


def test_kinetic_bound_holds(cold):
    ops, pi, recs = cold
    ens = CountingEnsemble(recs, EMISSIONS)
    M = 40
    m = merit(None, groups=ens.waits(M))
    leds = [tick_ledger(r, t, ops.params.beta) for r, t in zip(recs, ens.ticks(M))]
    rep = tur_kur_report(m, leds)
    assert not rep.kur_violated
    r_minus, r_plus = expected_rates(ops, pi)
    for led in leds:
        np.testing.assert_array_equal(led.dN_minus, M)
        assert np.all(led.K >= M)
    assert rep.K_tick == pytest.approx(M * (1 + r_plus / r_minus), rel=0.03)
    d = rep.to_json()
    assert d["tur_bound"] == pytest.approx(rep.S_tick / 2)
