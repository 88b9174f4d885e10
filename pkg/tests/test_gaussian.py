import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from tripod_mzi import gaussian as gs
from tripod_mzi.gaussian import (
    IN1,
    IN2,
    OUT1,
    SPIN1,
    SPIN2,
    SPIN_MINUS,
    SPIN_PLUS,
    VACUUM_VAR,
    GaussianState,
    QuadratureSpec,
)

variances = st.floats(min_value=1e-3, max_value=10.0)


def product_state(specs):
    labels = [gs.loss(k) for k in range(len(specs))]
    state = gs.vacuum_register(labels)
    for lab, spec in zip(labels, specs):
        state = gs.set_mode(state, lab, spec)
    return state


def test_vacuum_register():
    state = gs.vacuum_register([IN1, SPIN1])
    assert state.is_physical()
    assert np.allclose(state.symplectic_eigenvalues(), VACUUM_VAR)
    assert state.is_vacuum_mode(IN1)
    assert gs.photon_number(state, IN1) == 0.0
    assert gs.duan(state, IN1, SPIN1).value == pytest.approx(1.0)


def test_state_is_immutable():
    state = gs.vacuum_register([IN1])
    with pytest.raises(ValueError):
        state.cov[0, 0] = 3.0


def test_labels():
    assert str(gs.loss(3)) == "Loss(3)"
    assert gs.parse_label("Loss(3)") == gs.loss(3)
    assert gs.parse_label("SpinPlus") == SPIN_PLUS
    assert SPIN1.is_spin and not OUT1.is_spin and OUT1.is_output
    with pytest.raises(ValueError):
        GaussianState((IN1, IN1), np.zeros(4), np.eye(4))
    with pytest.raises(KeyError):
        gs.vacuum_register([IN1]).index(IN2)


def test_quadrature_spec():
    sq = QuadratureSpec.squeezed(0.01, "y", mean=2.0)
    assert (sq.var_x, sq.var_y, sq.mean_y) == (6.25, 0.01, 2.0)
    assert QuadratureSpec().is_vacuum
    with pytest.raises(ValueError):
        QuadratureSpec(var_x=0.1, var_y=0.1)
    with pytest.raises(ValueError):
        QuadratureSpec(var_x=-1.0)
    with pytest.raises(ValueError):
        QuadratureSpec.squeezed(0.1, "z")


@given(r=st.floats(min_value=0.0, max_value=3.0))
def test_duan_two_mode_squeezed_vacuum(r):
    v, big = math.exp(-2 * r) / 4, math.exp(2 * r) / 4
    state = gs.vacuum_register([IN1, IN2])
    state = gs.set_mode(state, IN1, QuadratureSpec(var_x=v, var_y=big))
    state = gs.set_mode(state, IN2, QuadratureSpec(var_x=big, var_y=v))
    state = gs.rotate_pm_basis(state, IN1, IN2)
    res = gs.duan(state, IN1, IN2)
    assert res.value == pytest.approx(math.exp(-2 * r), rel=1e-9, abs=1e-12)
    assert np.allclose(state.symplectic_eigenvalues(), 0.25, atol=1e-9 * big)


def test_duan_sign_choice():
    state = gs.vacuum_register([IN1, IN2])
    state = gs.set_mode(state, IN1, QuadratureSpec(var_x=0.01, var_y=6.25))
    state = gs.set_mode(state, IN2, QuadratureSpec(var_x=6.25, var_y=0.01))
    plus = gs.duan(gs.rotate_pm_basis(state, IN1, IN2), IN1, IN2)
    swapped = gs.duan(gs.rotate_pm_basis(state, IN2, IN1), IN1, IN2)
    assert plus.value == pytest.approx(swapped.value)
    assert {plus.sign_choice, swapped.sign_choice} == {"+x,-y", "-x,+y"}
    assert plus.to_dict()["pair"] == ["In1", "In2"]
    with pytest.raises(ValueError):
        gs.duan(state, IN1, IN1)


@given(
    seed=st.integers(min_value=0, max_value=2**31),
    vx=st.lists(variances, min_size=3, max_size=3),
    squeeze=st.lists(st.booleans(), min_size=3, max_size=3),
)
@settings(max_examples=50, deadline=None)
def test_passive_maps_preserve_symplectic_spectrum(seed, vx, squeeze):
    specs = [QuadratureSpec.squeezed(v / 16 if s else v, "x", 1.0) if v / 16 > 0 else QuadratureSpec() for v, s in zip(vx, squeeze)]
    state = product_state(specs)
    expected = np.sort([math.sqrt(s.var_x * s.var_y) for s in specs])
    o = ortho_group.rvs(3, random_state=seed)
    out = gs.apply_passive(state, state.labels, o)
    assert np.allclose(out.symplectic_eigenvalues(), expected, rtol=1e-9)
    total_in = sum(gs.photon_number(state, lab) for lab in state.labels)
    total_out = sum(gs.photon_number(out, lab) for lab in out.labels)
    assert total_out == pytest.approx(total_in, rel=1e-10, abs=1e-10)
    assert out.is_physical()


def test_apply_passive_validation():
    state = gs.vacuum_register([IN1, IN2])
    with pytest.raises(ValueError):
        gs.apply_passive(state, [IN1, IN2], [[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        gs.apply_passive(state, [IN1], np.eye(2))
    with pytest.raises(ValueError):
        gs.apply_passive(state, [IN1, IN1], np.eye(2))


def test_unphysical_state_detected():
    cov = np.diag([0.1, 0.1])
    state = GaussianState((IN1,), np.zeros(2), cov)
    assert not state.is_physical()
    assert state.symplectic_eigenvalues()[0] == pytest.approx(0.1)
    indefinite = GaussianState((IN1,), np.zeros(2), np.diag([-0.1, 1.0]))
    assert not indefinite.is_physical()


@given(lam=st.floats(min_value=0.0, max_value=1.0), var=variances, mean=st.floats(-5, 5))
def test_memory_half_cycle(lam, var, mean):
    state = gs.vacuum_register([IN1, SPIN_PLUS, SPIN_MINUS])
    state = gs.set_mode(state, IN1, QuadratureSpec.squeezed(var / 16, "x", mean))
    out = gs.memory_half_cycle(state, IN1, SPIN_PLUS, lam, gs.loss(0))
    r = lam**0.25
    m, c = out.moments(SPIN_PLUS)
    assert m[0] == pytest.approx(-r * mean, abs=1e-12)
    assert c[0, 0] == pytest.approx(r * r * var / 16 + (1 - r * r) * VACUUM_VAR, rel=1e-12)
    assert out.is_vacuum_mode(IN1)
    assert out.is_vacuum_mode(SPIN_MINUS)
    # photon number scales by sqrt(lambda)
    n_in = gs.photon_number(state, IN1)
    assert gs.photon_number(out, SPIN_PLUS) == pytest.approx(math.sqrt(lam) * n_in, rel=1e-10, abs=1e-12)


def test_memory_half_cycle_validation():
    state = gs.vacuum_register([IN1, SPIN1, SPIN2])
    state = gs.set_mode(state, SPIN1, QuadratureSpec(mean_x=1.0))
    with pytest.raises(ValueError, match="not in vacuum"):
        gs.memory_half_cycle(state, IN1, SPIN1, 0.5, gs.loss(0))
    gs.memory_half_cycle(state, IN1, SPIN1, 0.5, gs.loss(0), allow_occupied=True)
    with pytest.raises(ValueError):
        gs.memory_half_cycle(state, IN1, SPIN2, 1.5, gs.loss(0))
    with pytest.raises(ValueError):
        gs.memory_half_cycle(state, IN1, SPIN2, float("nan"), gs.loss(0))
    with pytest.raises(ValueError):
        gs.memory_half_cycle(state, IN1, IN1, 0.5, gs.loss(0))


def test_rotate_pm_basis_is_involution():
    state = gs.vacuum_register([SPIN_PLUS, SPIN_MINUS])
    state = gs.set_mode(state, SPIN_PLUS, QuadratureSpec.squeezed(0.02, "x", 1.5))
    once = gs.rotate_pm_basis(state, SPIN_PLUS, SPIN_MINUS, as_labels=(SPIN1, SPIN2))
    assert once.labels == (SPIN1, SPIN2)
    back = gs.rotate_pm_basis(once, SPIN1, SPIN2, as_labels=(SPIN_PLUS, SPIN_MINUS))
    assert np.allclose(back.cov, state.cov, atol=1e-15)
    assert np.allclose(back.mean, state.mean, atol=1e-15)
    with pytest.raises(ValueError):
        gs.rotate_pm_basis(state, SPIN_PLUS, SPIN_PLUS)


def test_add_modes_and_stats():
    state = gs.set_mode(gs.vacuum_register([IN1]), IN1, QuadratureSpec(1.0, 2.0, 0.5, 0.25))
    bigger = gs.add_modes(state, [OUT1])
    assert bigger.is_vacuum_mode(OUT1)
    stats = gs.mode_stats(bigger, IN1)
    assert stats == {
        "mean_x": 1.0,
        "mean_y": 2.0,
        "var_x": 0.5,
        "var_y": 0.25,
        "no_var_x": 0.25,
        "no_var_y": 0.0,
        "photon_number": 5.25,
    }
    assert np.array_equal(gs.cross_covariance(bigger, IN1, OUT1), np.zeros((2, 2)))
    snap = bigger.to_dict()
    assert snap["labels"] == ["In1", "Out1"]
    assert bigger.relabel({OUT1: gs.loss(0)}).labels == (IN1, gs.loss(0))


def test_factor_tracks_covariance_through_passive_maps():
    state = gs.vacuum_register([IN1, IN2])
    state = gs.set_mode(state, IN1, QuadratureSpec.squeezed(0.01, "x", mean=1.0))
    state = gs.rotate_pm_basis(state, IN1, IN2)
    state = gs.add_modes(state, [OUT1])
    state = gs.memory_half_cycle(state, IN1, OUT1, 0.6, gs.loss(0))
    rebuilt = (state.factor * state.source_var) @ state.factor.T
    np.testing.assert_allclose(rebuilt, state.cov, atol=1e-14)


def test_duan_survives_near_ideal_squeezing():
    # anti-squeezed variances of 6e10 would swamp a covariance-only Duan sum
    state = gs.vacuum_register([IN1, IN2])
    state = gs.set_mode(state, IN1, QuadratureSpec.squeezed(1e-12, "x"))
    state = gs.set_mode(state, IN2, QuadratureSpec.squeezed(1e-12, "y"))
    state = gs.rotate_pm_basis(state, IN1, IN2)
    assert gs.duan(state, IN1, IN2).value == pytest.approx(4e-12, rel=1e-9, abs=0)


def test_states_without_factor_still_work():
    cov = np.diag([0.5, 0.5, 0.25, 0.25])
    state = gs.GaussianState((IN1, IN2), np.zeros(4), cov)
    mixed = gs.rotate_pm_basis(state, IN1, IN2)
    assert mixed.factor is None
    assert gs.duan(mixed, IN1, IN2).value == pytest.approx(1.5)
