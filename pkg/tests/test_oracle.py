import math

import numpy as np
import pytest
from scipy import integrate

from tripod_mzi.oracle import (
    PdeGrid,
    StepSizeError,
    compare_with_kernel,
    excitation_balance,
    integrate_read,
    integrate_write,
    relative_l2,
)
from tripod_mzi.protocol import DrivingConfig

PLUS = DrivingConfig.SYMMETRIC_PLUS


def envelope(t):
    return np.exp(-((t - 2.5) ** 2)) * (1 + 0.3 * t)


def test_grid_properties():
    g = PdeGrid(10, 20, 5.0, 4.0)
    assert g.dt == 0.5 and g.dz == 0.2
    assert len(g.t) == 11 and len(g.z) == 21
    assert g.refined(0.5) == PdeGrid(5, 10, 5.0, 4.0)
    with pytest.raises(ValueError):
        PdeGrid(1, 10, 1.0, 1.0)
    with pytest.raises(ValueError):
        PdeGrid(10, 10, -1.0, 1.0)


def test_entrance_closed_form():
    # at z = 0: b_plus(T) = -(1/sqrt2) int_0^T a_in(T - t) sin t dt
    grid = PdeGrid(400, 8, 5.5, 1.0)
    f = integrate_write(grid, envelope(grid.t), PLUS)
    ref, _ = integrate.quad(lambda t: envelope(5.5 - t) * math.sin(t), 0, 5.5, epsabs=1e-13)
    assert f.b_plus[-1, 0] == pytest.approx(-ref / math.sqrt(2), rel=2e-4)


def test_zero_input_stays_zero():
    grid = PdeGrid(32, 32, 5.5, 10.0)
    f = integrate_write(grid, np.zeros(33), PLUS)
    assert not np.any(f.a) and not np.any(f.b1) and not np.any(f.c)
    assert not np.any(integrate_read(grid, np.zeros(33), PLUS))


def test_linearity():
    grid = PdeGrid(64, 48, 5.5, 10.0)
    u, v = envelope(grid.t), np.sin(grid.t)
    lhs = integrate_write(grid, 2.0 * u - 0.5 * v, PLUS).b1
    rhs = 2.0 * integrate_write(grid, u, PLUS).b1 - 0.5 * integrate_write(grid, v, PLUS).b1
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_b_minus_stays_zero_under_symmetric_plus():
    grid = PdeGrid(64, 64, 5.5, 10.0)
    f = integrate_write(grid, envelope(grid.t), PLUS)
    assert np.max(np.abs(f.b_minus)) < 1e-14


@pytest.mark.parametrize("cfg", list(DrivingConfig))
def test_single_wave_addressed(cfg):
    grid = PdeGrid(64, 64, 5.5, 10.0)
    f = integrate_write(grid, envelope(grid.t), cfg)
    w1, w2 = cfg.rabi
    # the orthogonal combination w2 b1 - w1 b2 is never excited
    assert np.max(np.abs(w2 * f.b1 - w1 * f.b2)) < 1e-14


def test_excitation_balance():
    grid = PdeGrid(256, 256, 5.5, 10.0)
    f = integrate_write(grid, envelope(grid.t), PLUS)
    bal = excitation_balance(f)
    assert bal["flux_in"] - bal["flux_out"] == pytest.approx(bal["stored"], rel=1e-2)


def test_input_shape_checks():
    grid = PdeGrid(16, 16, 5.5, 10.0)
    with pytest.raises(ValueError):
        integrate_write(grid, np.zeros(5), PLUS)
    with pytest.raises(ValueError):
        integrate_read(grid, np.zeros(5), PLUS)


def test_relative_l2():
    x = np.linspace(0, 1, 11)
    assert relative_l2(x, x) == 0.0
    assert relative_l2(2 * x, x) == pytest.approx(1.0)
    assert relative_l2(x, np.zeros(11)) > 0


def test_compare_with_kernel(default_basis):
    grid = PdeGrid(256, 256, 5.5, 10.0)
    report = compare_with_kernel(grid, default_basis)
    errors = {c.case: c.rel_l2_error for c in report.cases}
    assert set(errors) == {"write", "read", "full_cycle"}
    assert max(errors.values()) < 1e-3
    for case in report.cases:
        assert case.order > 1.9
        # halving the steps costs at least a factor 3
        assert report.coarse_errors[case.case] >= 3 * case.rel_l2_error
    d = report.to_dict()
    assert d["mode"] == 1 and len(d["cases"]) == 3


def test_compare_second_mode_and_wave1(default_basis):
    grid = PdeGrid(128, 128, 5.5, 10.0)
    report = compare_with_kernel(grid, default_basis, mode=1, cfg=DrivingConfig.OMEGA1_ONLY, refine=False)
    assert all(c.rel_l2_error < 5e-3 and c.order is None for c in report.cases)


def test_forward_retrieval_differs(default_basis):
    grid = PdeGrid(128, 128, 5.5, 10.0)
    report = compare_with_kernel(grid, default_basis, backward=False, refine=False)
    errors = {c.case: c.rel_l2_error for c in report.cases}
    assert errors["write"] < 1e-3
    assert errors["full_cycle"] > 0.1


def test_compare_rejects_mismatch(default_basis):
    with pytest.raises(ValueError):
        compare_with_kernel(PdeGrid(32, 32, 5.0, 10.0), default_basis)
    with pytest.raises(IndexError):
        compare_with_kernel(PdeGrid(32, 32, 5.5, 10.0), default_basis, mode=99)


def test_growth_guard(monkeypatch):
    import tripod_mzi.oracle as orc

    monkeypatch.setattr(orc, "_GROWTH_LIMIT", 1e-3)
    grid = PdeGrid(16, 16, 5.5, 10.0)
    with pytest.raises(StepSizeError):
        integrate_write(grid, envelope(grid.t), PLUS)
