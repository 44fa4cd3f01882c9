from types import SimpleNamespace

import numpy as np
import pytest

from confgeom.calculus import Axis, Calculus, ParamGrid
from confgeom.catalog import catalog
from confgeom.conformal import canonical_frame_from_lift, invariants_frame
from confgeom.indefinite import random_pseudo_orthogonal
from confgeom.isotropy import Thresholds, Verdict, classify, fit_lambda, isotropy, isotropy_from
from confgeom.spaceforms import apply_conformal, lift


def run(name, n=24, **overrides):
    imm = catalog(name, count=n)
    return isotropy(imm, Calculus(imm.grid, "jets", 6), **overrides)


def test_fit_lambda_on_synthetic_tensors():
    calc = Calculus(ParamGrid((Axis(0, 1, 5), Axis(0, 1, 5))), "jets", 1)
    g = np.array([[2.0, 0.4], [0.4, 1.5]])
    ct = SimpleNamespace(g=calc.constant(g), g_inv=calc.constant(np.linalg.inv(g)),
                         A=calc.constant(0.7 * g))
    assert np.max(np.abs(fit_lambda(ct).value + 0.7)) <= 1e-15


@pytest.mark.parametrize("c2,band,verdict", [
    (-0.25, 1e-8, Verdict.SPHERE_CASE), (0.3, 1e-8, Verdict.HYPERBOLIC_CASE),
    (1e-9, 1e-8, Verdict.FLAT_CASE), (-1e-9, 1e-8, Verdict.FLAT_CASE), (0.0, 0.0, Verdict.FLAT_CASE)])
def test_classify(c2, band, verdict):
    assert classify(c2, band) is verdict


def test_clifford_is_sphere_case():
    rep = run("clifford_torus")
    assert rep.verdict is Verdict.SPHERE_CASE
    assert abs(rep.lambda_mean + 0.125) <= 1e-12
    assert rep.dev_A <= 1e-12 and rep.dev_C <= 1e-12 and rep.c_variation <= 1e-12
    assert abs(rep.c_norm2 - 2 * rep.lambda_mean) <= 1e-12
    assert rep.y_dot_c <= 1e-12 and not rep.band_limited and not rep.diagnostics


def test_enneper_fails_on_C():
    rep = run("enneper")
    assert rep.verdict is Verdict.NOT_ISOTROPIC
    assert rep.dev_C > rep.thresholds.dev_C
    assert any(d.startswith("dev_C") for d in rep.diagnostics)


def test_catenoid_not_isotropic_with_constant_lambda():
    """lambda = -tr_g A / m is constant on minimal surfaces in R^3; A is not pure trace."""
    rep = run("catenoid")
    assert rep.verdict is Verdict.NOT_ISOTROPIC
    assert rep.lambda_stddev <= 1e-12
    assert abs(rep.dev_A - 0.25) <= 1e-10
    assert rep.dev_C > rep.thresholds.dev_C


@pytest.mark.parametrize("name", ["torus_product", "lorentz_cylinder"])
def test_flat_tori_not_isotropic(name):
    rep = run(name)
    assert rep.verdict is Verdict.NOT_ISOTROPIC
    assert rep.dev_A > rep.thresholds.dev_A and rep.dev_C <= 1e-12


@pytest.mark.parametrize("name", ["round_sphere", "plane"])
def test_umbilic_gives_warning_and_no_verdict(name):
    rep = run(name, 12)
    assert rep.verdict is None
    assert rep.warnings and rep.warnings[0].startswith("non-regular")


def test_y_dot_c_is_one():
    for name in ("catenoid", "graph", "spacelike_catenoid"):
        assert run(name, 16).y_dot_c <= 1e-10


def test_threshold_overrides():
    rep = run("clifford_torus", 16, dev_A=1e-20)
    assert rep.thresholds.dev_A == 1e-20
    assert rep.verdict is Verdict.NOT_ISOTROPIC


def test_default_thresholds_scale_with_stencil():
    imm = catalog("clifford_torus", count=32)
    jets = Thresholds.default(Calculus(imm.grid, "jets", 6), 0.5)
    assert jets.dev_A == 1e-4
    fd = Thresholds.default(Calculus(imm.grid, "fd"), 2.0)
    h = imm.grid.axes[0].spacing
    assert abs(fd.dev_C - 20.0 * h ** 4) <= 1e-15


def test_verdict_is_mobius_invariant():
    imm = catalog("clifford_torus", count=20)
    calc = Calculus(imm.grid, "jets", 6)
    y = lift(imm, calc)
    base = None
    for seed in range(4):
        yT = apply_conformal(random_pseudo_orthogonal(y.signature, seed), y)
        _, frame = canonical_frame_from_lift(yT, calc)
        rep = isotropy_from(invariants_frame(frame, calc), frame, calc)
        assert rep.verdict is Verdict.SPHERE_CASE
        assert abs(rep.lambda_mean + 0.125) <= 1e-8
        if base is None:
            base = rep.c_norm2
        assert abs(rep.c_norm2 - base) <= 1e-8
