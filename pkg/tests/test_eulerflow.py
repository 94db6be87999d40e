"""Unit tests for the flow map, residual instruments, and the classifier."""

import numpy as np
import pytest

from stripflow import eulerflow as ef, fixtures as fx, nonlinearity as nl


SPEC = nl.ProblemSpec(mode="ramp")


def _cell_flow(ny: int) -> ef.FlowField:
    nx = int(round(2 * fx.CELL_L * ny))  # hx = hy = 1/ny
    u = fx.cell_field(fx.CELL_L, nx, ny)
    return ef.to_flow(u, SPEC, potential=fx.cell_potential)


def test_cell_velocity_second_order():
    for ny in (32, 64):
        fl = _cell_flow(ny)
        v1e, v2e = fx.cell_velocity_exact(fl.x1, fl.x2)
        err = max(float(np.max(np.abs(fl.v1 - v1e))), float(np.max(np.abs(fl.v2 - v2e))))
        assert err <= 6.0 / ny**2  # leading constant is pi^3/6 ~ 5.2


def test_cell_flow_incompressible_and_tangent():
    fl = _cell_flow(48)
    assert ef.divergence(fl) <= 1e-11
    assert ef.slip(fl) == 0.0


def test_cell_flow_residual_orders():
    """Momentum and transport residuals drop at >= 2nd order on the fixture."""
    res = {}
    for ny in (32, 64, 128):
        fl = _cell_flow(ny)
        res[ny] = (ef.euler_residual(fl), ef.vorticity_transport(fl))
    for k in (0, 1):
        p1 = np.log2(res[32][k] / res[64][k])
        p2 = np.log2(res[64][k] / res[128][k])
        assert min(p1, p2) >= 1.9, f"observed orders {p1:.2f}, {p2:.2f}"


def test_cell_flow_classified_full_circle():
    assert ef.angle_classify(_cell_flow(48)) is ef.AngleClass.FULL_CIRCLE


def test_shear_flow_zero_curvature_and_class():
    u = fx.shear_field(4.0, 64, 64, profile=lambda t: t * t)
    fl = ef.to_flow(u, SPEC, potential=lambda s: np.zeros_like(np.asarray(s, dtype=float)))
    assert ef.divergence(fl) <= 1e-12
    assert ef.slip(fl) == 0.0
    assert ef.total_curvature(fl) <= 1e-10
    assert abs(ef.curvature_formula(fl)) <= 1e-10
    assert ef.balancing_defect(fl) <= 1e-10
    assert ef.angle_classify(fl) is ef.AngleClass.SHEAR


def _synthetic_flow(v1, v2, L=4.0):
    P = np.zeros_like(v1)
    limits = (v1[-1, -1], v1[0, -1], v1[-1, 0], v1[0, 0])
    return ef.FlowField(v1, v2, P, L, limits)


def test_angle_classify_semicircle():
    # directions spread over the closed upper half-circle only
    th = np.linspace(0.0, np.pi, 65)
    v1 = np.tile(np.cos(th)[:, None], (1, 33))
    v2 = np.tile(np.sin(th)[:, None], (1, 33))
    assert ef.angle_classify(_synthetic_flow(v1, v2)) is ef.AngleClass.SEMICIRCLE


def test_top_sign_change_abscissa_linear_crossing():
    x1 = np.linspace(-4.0, 4.0, 129)
    top = x1 - 0.7  # unique zero at 0.7
    v1 = np.tile(top[:, None], (1, 17))
    v2 = np.zeros_like(v1)
    fl = _synthetic_flow(v1, v2)
    assert abs(ef.top_sign_change_abscissa(fl) - 0.7) <= 1e-12


def test_top_sign_change_abscissa_rejects_multiple():
    x1 = np.linspace(-4.0, 4.0, 129)
    top = np.sin(2.0 * x1)
    v1 = np.tile(top[:, None], (1, 17))
    fl = _synthetic_flow(v1, np.zeros_like(v1))
    with pytest.raises(ValueError):
        ef.top_sign_change_abscissa(fl)


def test_verify_flow_bundles_report():
    fl = _cell_flow(32)
    rep = ef.verify_flow(fl, SPEC)
    assert rep.divergence <= 1e-11
    assert rep.slip == 0.0
    assert rep.angle_class is ef.AngleClass.FULL_CIRCLE
    assert rep.euler_residual >= 0.0


def test_flow_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        ef.FlowField(np.zeros((4, 4)), np.zeros((4, 5)), np.zeros((4, 4)), 1.0, (0, 0, 0, 0))
