import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confgeom.calculus import (Axis, Calculus, ParamGrid, StencilConfig, covariant_derivative,
                               curvature, hessian, integrate, laplace_beltrami, levi_civita,
                               metric_inverse)
from confgeom.errors import GridTooSmall, MaskedIntegrationDomain, StencilOrderError
from confgeom.jets import stack

TWO_PI = 2 * math.pi


def fd(grid, order=6):
    return Calculus(grid, "fd", stencil=StencilConfig(order=order))


def square(n, periodic=False, lo=0.0, hi=1.0):
    return ParamGrid((Axis(lo, hi, n, periodic), Axis(lo, hi, n, periodic)))


def diag_metric(a, b):
    zero = a * 0.0
    return stack([stack([a, zero]), stack([zero, b])])


def test_partial_constant_is_zero():
    calc = fd(square(20))
    f = calc.samples(np.full(calc.grid.shape, 3.5))
    assert np.max(np.abs(calc.partial(f, 0).value)) <= 1e-12


@pytest.mark.parametrize("order", [2, 4, 6])
def test_partial_linear_exact(order):
    calc = fd(square(21), order)
    s, _ = calc.coordinates()
    assert np.max(np.abs(calc.partial(s, 0).value - 1.0)) <= 1e-11


def test_partial_periodic_sin_convergence_order4():
    errs = []
    for n in (32, 64, 128):
        grid = ParamGrid((Axis(0.0, TWO_PI, n, True), Axis(0.0, 1.0, 16)))
        calc = fd(grid, 4)
        s, _ = calc.coordinates()
        errs.append(np.max(np.abs(calc.partial(s.sin(), 0).value - np.cos(s.value))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.7


def test_jets_derivatives_exact():
    calc = Calculus(square(9), "jets", 4)
    s, t = calc.coordinates()
    f = (s * t).exp()
    d = calc.partial(calc.partial(f, 0), 1)
    ref = np.exp(s.value * t.value) * (1 + s.value * t.value)
    assert np.max(np.abs(d.value - ref)) <= 1e-13


def test_jet_order_exhaustion():
    calc = Calculus(square(5), "jets", 1)
    s, _ = calc.coordinates()
    with pytest.raises(StencilOrderError):
        calc.partial(calc.partial(s * s, 0), 0)


def test_grid_too_small_for_stencil():
    with pytest.raises(GridTooSmall):
        fd(square(8), 6)


def test_levi_civita_constant_metric():
    calc = Calculus(square(6), "jets", 2)
    g = calc.constant(np.array([[2.0, 0.3], [0.3, 1.0]]))
    assert np.max(np.abs(levi_civita(g, calc).gamma.value)) == 0.0


@pytest.mark.parametrize("backend", ["jets", "fd"])
def test_levi_civita_polar(backend):
    grid = ParamGrid((Axis(1.0, 2.0, 41), Axis(0.0, TWO_PI, 40, True)))
    calc = Calculus(grid, "jets", 3) if backend == "jets" else fd(grid)
    r, _ = calc.coordinates()
    G = levi_civita(diag_metric(r * 0.0 + 1.0, r * r), calc).gamma.value
    rv = r.value
    tol = 1e-13 if backend == "jets" else 1e-7
    band = (slice(3, -3), slice(None))
    assert np.max(np.abs(G[..., 0, 1, 1] + rv)[band]) <= tol
    assert np.max(np.abs(G[..., 1, 0, 1] - 1 / rv)[band]) <= tol
    assert np.max(np.abs(G[..., 1, 1, 0] - 1 / rv)[band]) <= tol
    assert np.max(np.abs(G[..., 0, 0, 0])[band]) <= tol


def test_christoffel_symmetry():
    calc = Calculus(square(7), "jets", 3)
    s, t = calc.coordinates()
    g = stack([stack([1.0 + s * s, s * t]), stack([s * t, 2.0 + t.sin()])])
    G = levi_civita(g, calc).gamma.value
    assert np.array_equal(G, np.swapaxes(G, -1, -2))


def test_curvature_flat():
    calc = Calculus(square(8), "jets", 4)
    g = calc.constant(np.eye(2))
    cv = curvature(g, levi_civita(g, calc), calc)
    assert np.max(np.abs(cv.riemann.value)) <= 1e-8


@pytest.mark.parametrize("backend", ["jets", "fd"])
def test_curvature_round_sphere_patch(backend):
    grid = ParamGrid((Axis(-1.0, 1.0, 41), Axis(0.0, TWO_PI, 40, True)))
    calc = Calculus(grid, "jets", 4) if backend == "jets" else fd(grid)
    s, _ = calc.coordinates()
    g = diag_metric(s * 0.0 + 1.0, s.cos() * s.cos())
    kappa = curvature(g, levi_civita(g, calc), calc).kappa
    band = calc.interior(calc.default_band())
    tol = 1e-12 if backend == "jets" else 1e-5
    assert np.max(np.abs(kappa.value - 1.0)[band]) <= tol


def test_covariant_derivative_of_metric_vanishes():
    calc = Calculus(square(7, lo=0.2, hi=1.0), "jets", 3)
    s, t = calc.coordinates()
    g = stack([stack([1.0 + s * s, s * t]), stack([s * t, 2.0 + t.sin()])])
    dg = covariant_derivative(g, ["co", "co"], levi_civita(g, calc), calc)
    assert np.max(np.abs(dg.value)) <= 1e-13


def test_scalar_covariant_derivative_is_gradient():
    calc = Calculus(square(6), "jets", 3)
    s, t = calc.coordinates()
    f = s * t * t
    g = calc.constant(np.eye(2), 3)
    d = covariant_derivative(f, [], levi_civita(g, calc), calc)
    assert np.allclose(d.value, calc.gradient(f).value, atol=0)


def test_hessian_symmetric():
    calc = Calculus(square(7, lo=0.2, hi=1.0), "jets", 4)
    s, t = calc.coordinates()
    g = stack([stack([1.0 + s * s, s * t]), stack([s * t, 2.0 + t.sin()])])
    H = hessian((s * t).exp(), levi_civita(g, calc), calc).value
    assert np.max(np.abs(H - np.swapaxes(H, -1, -2))) <= 1e-13


def test_laplace_linear_flat():
    calc = fd(square(21))
    s, t = calc.coordinates()
    g = calc.constant(np.eye(2))
    lap = laplace_beltrami(s * 2.0 - t, metric_inverse(g), levi_civita(g, calc), calc)
    assert np.max(np.abs(lap.value)) <= 1e-9


def test_laplace_sin_periodic():
    calc = fd(square(64, True, 0.0, TWO_PI))
    s, t = calc.coordinates()
    g = calc.constant(np.eye(2))
    f = s.sin()
    lap = laplace_beltrami(f, metric_inverse(g), levi_civita(g, calc), calc)
    assert np.max(np.abs(lap.value + f.value)) <= 1e-6


def test_integrate_unit_square():
    calc = fd(square(17))
    g = calc.constant(np.eye(2))
    assert abs(integrate(calc.samples(np.ones(calc.grid.shape)), g, calc) - 1.0) <= 1e-10


def test_integrate_masked_domain_raises():
    calc = fd(square(17))
    mask = np.ones(calc.grid.shape, bool)
    mask[3, 3] = False
    one = calc.samples(np.ones(calc.grid.shape), mask)
    with pytest.raises(MaskedIntegrationDomain):
        integrate(one, calc.constant(np.eye(2)), calc)


def test_integrate_clifford_area_periodic():
    calc = fd(square(32, True, 0.0, TWO_PI))
    g = calc.constant(0.5 * np.eye(2))
    area = integrate(calc.samples(np.ones(calc.grid.shape)), g, calc)
    assert abs(area - 2 * math.pi ** 2) <= 1e-10


def test_integrate_trapezoid_refinement_order():
    vals = []
    for n in (17, 33, 65):
        calc = fd(square(n))
        s, t = calc.coordinates()
        dens = calc.samples(np.exp(s.value) * np.cos(t.value))
        vals.append(integrate(dens, calc.constant(np.eye(2)), calc))
    exact = (math.e - 1) * math.sin(1.0)
    errs = [abs(v - exact) for v in vals]
    assert math.log2(errs[0] / errs[1]) >= 1.9
    assert math.log2(errs[1] / errs[2]) >= 1.9


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_jets_product_rule(a, b, c):
    calc = Calculus(square(4), "jets", 2)
    s, t = calc.coordinates()
    f = s * a + t * b + c
    h = f * f
    lhs = calc.partial(h, 0).value
    rhs = 2 * f.value * a
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(rhs)))
