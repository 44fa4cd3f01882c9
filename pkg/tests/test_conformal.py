import math
import warnings

import numpy as np
import pytest

from confgeom.calculus import Calculus, StencilConfig
from confgeom.catalog import catalog
from confgeom.conformal import (canonical_frame_from_lift, compare_tensors, conformal_data,
                                conformal_factor, identity_suite, integrability_suite,
                                invariants_frame, lift_invariant)
from confgeom.errors import NonRegular
from confgeom.isometric import isometric_data, scalar_curvature_checked
from confgeom.jets import einsum, pair
from confgeom.spaceforms import lift

REGULAR = ["catenoid", "helicoid", "enneper", "graph", "clifford_torus", "torus_product",
           "lorentz_cylinder", "spacelike_catenoid"]


def data(name, n=20, order=6):
    imm = catalog(name, count=n)
    calc = Calculus(imm.grid, "jets", order)
    return calc, conformal_data(isometric_data(imm, calc), calc)


def fd_data(name, n, order):
    imm = catalog(name, count=n)
    calc = Calculus(imm.grid, "fd", stencil=StencilConfig(order=order))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return calc, conformal_data(isometric_data(imm, calc), calc)


def central(calc, fraction=0.6):
    """Nodes within ``fraction`` of the half-width of every non-periodic axis."""
    reg = np.ones(calc.grid.shape, bool)
    for ax, X in zip(calc.grid.axes, calc.grid.mesh()):
        if not ax.periodic:
            c, r = 0.5 * (ax.lo + ax.hi), 0.5 * (ax.hi - ax.lo)
            reg &= np.abs(X - c) <= fraction * r
    return reg


@pytest.mark.parametrize("name", ["round_sphere", "plane"])
def test_umbilic_surfaces_are_non_regular(name):
    imm = catalog(name, count=12)
    calc = Calculus(imm.grid, "jets", 6)
    with pytest.raises(NonRegular):
        conformal_factor(isometric_data(imm, calc))


def test_catenoid_factor_positive():
    imm = catalog("catenoid", count=16)
    calc = Calculus(imm.grid, "jets", 4)
    cf = conformal_factor(isometric_data(imm, calc))
    assert np.all(cf.f.value > 0)
    assert cf.sign == 1 and cf.fraction_regular == 1.0


def test_spacelike_catenoid_negative_sign():
    _, d = data("spacelike_catenoid", 12)
    assert d.factor.sign == -1
    assert np.all(d.factor.sigma == -1)


@pytest.mark.parametrize("name", REGULAR)
def test_lift_invariant_equals_factor(name):
    """<Delta y, Delta y> - m^2 kappa computed from the lift alone matches f."""
    imm = catalog(name, count=16)
    calc = Calculus(imm.grid, "jets", 6)
    iso = isometric_data(imm, calc)
    cf = conformal_factor(iso)
    f_lift, _ = lift_invariant(lift(imm, calc), calc)
    scale = max(np.max(np.abs(cf.f.value)), 1.0)
    assert np.max(np.abs(f_lift.value - cf.f.value)) <= 1e-10 * scale


@pytest.mark.parametrize("name", REGULAR)
def test_conformal_metric_is_scaled_induced_metric(name):
    calc, d = data(name, 16)
    I = d.iso.tangent.I.value
    e2t = np.exp(2 * d.factor.tau.value)
    g = d.frame.g.value
    assert np.max(np.abs(g - e2t[..., None, None] * I)) <= 1e-10 * np.max(np.abs(g))
    dY = calc.gradient(d.frame.Y)
    gY = einsum("ai,aj->ij", dY * d.frame.diag[:, None], dY).value
    assert np.max(np.abs(gY - g)) <= 1e-10 * np.max(np.abs(g))


@pytest.mark.parametrize("name", REGULAR)
def test_frame_relations(name):
    calc, d = data(name, 16)
    res = identity_suite(d.tensors, d.frame, calc)
    frame = {k: v for k, v in res.items() if k.startswith("frame_")}
    assert len(frame) == 9
    assert max(frame.values()) <= 1e-8


@pytest.mark.parametrize("name", REGULAR)
def test_identity_suite_jets(name):
    calc, d = data(name, 20)
    res = identity_suite(d.tensors, d.frame, calc)
    for key in ("trace_A", "ricci", "trace_free_B", "norm_B", "div_B"):
        assert res[key] <= 1e-8, key
    assert res["lapY_norm"] <= 1e-8
    assert res["sigma_regions"] == 1.0


@pytest.mark.parametrize("name", REGULAR)
def test_integrability_suite_jets(name):
    calc, d = data(name, 20)
    res = integrability_suite(d.tensors, calc)
    assert set(res) == {"codazzi_A", "codazzi_B", "curl_C", "normal_curvature", "gauss"}
    assert max(res.values()) <= 1e-8


@pytest.mark.parametrize("name", REGULAR)
def test_dual_path_agreement_jets(name):
    calc, d = data(name, 20)
    diff = compare_tensors(d.extrinsic, d.tensors, d.tensors.valid)
    assert max(diff["A"], diff["B"], diff["C"]) <= 1e-6


def test_dual_path_agreement_fd_converges():
    diffs = []
    for n in (32, 64):
        calc, d = fd_data("catenoid", n, 4)
        diff = compare_tensors(d.extrinsic, d.tensors, central(calc) & d.tensors.valid)
        diffs.append(max(diff["A"], diff["B"], diff["C"]))
    assert diffs[1] <= 1e-4
    assert math.log2(diffs[0] / diffs[1]) >= 2.0


def test_minimal_surface_C_closed_form():
    """For H = 0: C_i = -e^(-tau) h_ij I^jk tau_k."""
    calc, d = data("enneper", 16)
    tau = d.factor.tau
    dtau = calc.gradient(tau)
    h = d.iso.second.h
    Iinv = d.iso.tangent.I_inv
    ref = einsum("aij,jk,k->ai", h, Iinv, dtau) * (-tau).exp()
    ref = (ref * -1.0).value
    C = d.extrinsic.C.value
    assert np.max(np.abs(C - ref)) <= 1e-10 * max(np.max(np.abs(ref)), 1.0)


def test_trace_free_and_norm_of_B():
    calc, d = data("helicoid", 16)
    ct = d.tensors
    s = ct.xi_signs
    tr = einsum("ij,aij->a", ct.g_inv, ct.B).value
    Bs = ct.B * s[:, None, None]
    nrm = einsum("ij,kl,aik,ajl->", ct.g_inv, ct.g_inv, Bs, ct.B).value
    assert np.max(np.abs(tr)) <= 1e-12
    assert np.max(np.abs(nrm - 0.5)) <= 1e-12


def test_omega_read_off():
    """<d_j Y_i, Y> = -g_ij."""
    calc, d = data("catenoid", 12)
    dYi = calc.gradient(d.frame.Yi)
    lhs = pair(dYi.transpose(0, 2, 1), d.frame.Y, d.frame.diag).value
    assert np.max(np.abs(lhs + d.frame.g.value)) <= 1e-12


def test_phi_read_off():
    """d xi_a = -phi_a Y + ...: pairing with N gives -C (signs applied), with Y gives 0."""
    calc, d = data("enneper", 12)
    dxi = calc.gradient(d.frame.xi).transpose(0, 2, 1)      # [a, i, x]
    withN = pair(dxi, d.frame.N, d.frame.diag).value
    withY = pair(dxi, d.frame.Y, d.frame.diag).value
    C = d.tensors.C.value * d.tensors.xi_signs[:, None]
    assert np.max(np.abs(C)) > 0.1
    assert np.max(np.abs(withN + C)) <= 1e-12
    assert np.max(np.abs(withY)) <= 1e-12


def test_lift_only_path_matches_immersion_path():
    imm = catalog("torus_product", count=16)
    calc = Calculus(imm.grid, "jets", 6)
    d = conformal_data(isometric_data(imm, calc), calc)
    _, frame = canonical_frame_from_lift(lift(imm, calc), calc)
    ct = invariants_frame(frame, calc)
    diff = compare_tensors(ct, d.tensors, d.tensors.valid)
    assert max(diff.values()) <= 1e-10


def test_conformal_scalar_curvature_of_minimal_surface_is_constant():
    """For minimal surfaces in R^3 the metric -K I has constant curvature."""
    _, d = data("catenoid", 16)
    kappa = d.tensors.kappa_conf.value
    assert np.max(kappa) - np.min(kappa) <= 1e-12


def test_fd_identity_suite_converges():
    res = []
    for n in (32, 64):
        calc, d = fd_data("catenoid", n, 4)
        ids = identity_suite(d.tensors, d.frame, calc, central(calc) & d.tensors.valid)
        res.append(ids)
    for key in ("trace_A", "ricci", "norm_B", "div_B", "lapY_norm"):
        assert math.log2(res[0][key] / res[1][key]) >= 3.0, key


def test_isometric_gauss_on_lorentzian():
    imm = catalog("lorentz_cylinder", count=16)
    calc = Calculus(imm.grid, "jets", 4)
    iso = isometric_data(imm, calc)
    assert scalar_curvature_checked(iso.tangent, iso.second, imm.spaceform)[2] <= 1e-12
