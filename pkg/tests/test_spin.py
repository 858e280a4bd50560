import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from tcclock.spin import ClockParams, build_operators, ladder_coefficients, mean_occupation, thermal_rates


def test_spin_half_lowering_ladder():
    ops = build_operators(ClockParams(spin2=1, lam=0.0))
    np.testing.assert_array_equal(ops.l_minus, np.array([[0, 1], [0, 0]], complex))


def test_spin_one_ladder_entries():
    ops = build_operators(ClockParams(spin2=2, lam=0.0))
    assert ops.s_minus[0, 1] == pytest.approx(math.sqrt(2), abs=1e-15)
    assert ops.s_minus[1, 2] == pytest.approx(math.sqrt(2), abs=1e-15)
    assert np.count_nonzero(ops.s_minus) == 2


def test_displacement_on_identity():
    ops = build_operators(ClockParams(spin2=100, lam=2.0))
    np.testing.assert_array_equal(ops.l_minus - ops.s_minus, 100j * np.eye(101))
    assert ops.alpha == 100.0


def test_zero_temperature_rates():
    assert thermal_rates(ClockParams(spin2=2, lam=1.0, beta=math.inf)) == (0.0, 1e-3)


def test_occupation_at_beta_two():
    # frozen from (e^2 - 1)^-1
    assert mean_occupation(2.0) == pytest.approx(0.15651764274966565, rel=1e-14)
    gp, gm = thermal_rates(ClockParams(spin2=2, lam=1.0, beta=2.0))
    assert gm / gp == pytest.approx(math.e**2, rel=1e-12)


@given(st.floats(0.01, 30.0))
def test_detailed_balance(beta):
    gp, gm = thermal_rates(ClockParams(spin2=3, lam=1.0, beta=beta))
    assert abs(gm / gp - math.exp(beta)) <= 1e-12 * math.exp(beta)


@given(st.integers(1, 200), st.floats(0, 5))
def test_adjoint_and_commutator(spin2, lam):
    ops = build_operators(ClockParams(spin2=spin2, lam=lam))
    assert np.max(np.abs(ops.l_plus - ops.l_minus.conj().T)) == 0.0
    comm = ops.s_plus @ ops.s_minus - ops.s_minus @ ops.s_plus
    assert np.max(np.abs(comm - 2 * ops.s_z)) <= 1e-12 * max(1.0, spin2)


@given(st.integers(1, 60))
def test_ladder_matches_oracle(spin2):
    jp, _, _ = oracles.spin_matrices(spin2 / 2)
    np.testing.assert_allclose(ladder_coefficients(spin2), np.diag(jp, -1).real, rtol=1e-13, atol=1e-13)


@given(st.integers(1, 40), st.floats(0, 4), st.sampled_from([0.1, 2.0, math.inf]))
def test_generator_is_no_jump_part(spin2, lam, beta):
    p = ClockParams(spin2=spin2, lam=lam, beta=beta)
    ops = build_operators(p)
    expected = sum(-0.5 * g * L.conj().T @ L for g, L in oracles.jump_ops(p.S, lam, p.gamma0, beta))
    np.testing.assert_allclose(ops.effective_generator(), expected, atol=1e-12 * (1 + np.abs(expected).max()))


@pytest.mark.parametrize("bad", [dict(spin2=0, lam=1), dict(spin2=2, lam=-1), dict(spin2=2, lam=1, gamma0=0),
                                 dict(spin2=2, lam=1, beta=0), dict(spin2=1.5, lam=1)])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        ClockParams(**bad)


def test_params_roundtrip():
    p = ClockParams(spin2=7, lam=1.3, gamma0=2e-3, beta=math.inf)
    assert ClockParams.from_dict(p.to_dict()) == p
    assert p.S == 3.5 and p.dim == 8 and p.zero_temperature


def test_operator_arrays_read_only():
    ops = build_operators(ClockParams(spin2=4, lam=1.0))
    with pytest.raises(ValueError):
        ops.l_minus[0, 0] = 1.0
