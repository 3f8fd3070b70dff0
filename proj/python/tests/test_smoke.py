import math

import numpy as np
import pytest

import mellin_radon as mr

LINEAR = "(ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (axis 2))"


def expo(grid):
    y0 = np.array(grid.axis(0))
    y1 = np.array(grid.axis(1))
    x0, x1 = np.meshgrid(np.exp(y0), np.exp(y1), indexing="ij")
    return mr.GridFunction(grid, np.exp(-x0 - x1))


def test_cost_expression():
    q = mr.CostExpr.parse(LINEAR)
    assert q.dimension == 2
    assert q([2.0, 4.0]) == pytest.approx(3.0)
    assert str(mr.CostExpr.parse(str(q))) == str(q)
    assert q.validate()["ok"]


def test_errors_carry_kind():
    with pytest.raises(mr.MellinRadonError) as info:
        mr.CostExpr.parse("(ces :alpha 1.5 :C 1 :a (0.5 0.5) (axis 1) (axis 2))")
    assert info.value.kind == "parse"
    assert "(0, 1]" in str(info.value)
    with pytest.raises(ValueError):
        mr.CostExpr.parse("(ces :alpha 1 :C 1 :a (0.5 0.5) (axis 1) (axis 1))")


def test_gamma_and_closed_form():
    assert mr.gamma(5.0) == pytest.approx(24.0)
    q = mr.CostExpr.parse(LINEAR)
    assert mr.mellin_expcost_closed(q, [1.0, 1.0]) == pytest.approx(4.0)


def test_radon_forward_analytic():
    grid = mr.LogGrid.uniform(2, -12.0, 12.0, 256)
    f = expo(grid)
    q = mr.CostExpr.parse(LINEAR)
    for scheme in (mr.RadonScheme.level_curve, mr.RadonScheme.ray_chart):
        value = mr.radon_forward(f, q, [1.0, 1.0], scheme)
        assert value == pytest.approx(4.0 * math.exp(-2.0), rel=1e-3)


def test_roundtrip():
    grid = mr.LogGrid.uniform(2, -10.0, 10.0, 256)
    f = mr.GridFunction.family(grid, "gamma-product")
    assert f.values.shape == (256, 256)
    q = mr.CostExpr.parse(LINEAR)
    batch = mr.forward_batch(f, q, grid.reflected(), mr.KernelSpec.exponential())
    est, report = mr.invert("radon", batch["radon"], q, c=[1.0, 1.0], truth=f)
    assert est.values.shape == (256, 256)
    assert report["interior_l2_error"] <= 0.02
    zero = mr.GridFunction(batch["radon"].grid, np.zeros((256, 256)))
    est0, _ = mr.invert("profit", zero, q)
    assert not est0.values.any()


def test_diagnostics():
    q = mr.CostExpr.parse(LINEAR)
    rep = mr.injectivity_report("radon", q, None, [1.0, 1.0], "inf")
    assert rep["verdict"] == "injective-certified"
    scan = mr.kernel_zero_scan(mr.KernelSpec.two_exponential(), 1.0)
    assert scan["classification"] == "isolated-zeros"


def test_tolerances_and_demo():
    tol = mr.tolerances()
    assert tol["quick_runtime"]["value"] == 30
    assert "[cost]" in mr.demo_scene_text()
