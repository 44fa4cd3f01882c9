import math

import numpy as np
import pytest

from confgeom.calculus import Calculus, StencilConfig
from confgeom.catalog import catalog, catalog_names
from confgeom.isometric import (isometric_data, laplacian_position, mean_curvature_vector,
                                scalar_curvature_checked)
from confgeom.jets import einsum


def jets_iso(name, n=24, order=6, **params):
    imm = catalog(name, params or None, count=n)
    calc = Calculus(imm.grid, "jets", order)
    return imm, calc, isometric_data(imm, calc)


def fd_iso(name, n, order=6):
    imm = catalog(name, count=n)
    calc = Calculus(imm.grid, "fd", stencil=StencilConfig(order=order))
    return imm, calc, isometric_data(imm, calc)


def test_plane_tangent_frame():
    imm, calc, iso = jets_iso("plane", 8)
    assert np.max(np.abs(iso.tangent.I.value - np.eye(2))) == 0.0
    assert np.max(np.abs(iso.tangent.conn.gamma.value)) == 0.0
    assert np.max(np.abs(iso.second.h.value)) == 0.0


def test_clifford_induced_metric():
    _, _, iso = jets_iso("clifford_torus", 12)
    assert np.max(np.abs(iso.tangent.I.value - 0.5 * np.eye(2))) <= 1e-15


def test_lorentz_cylinder_metric_signature():
    _, _, iso = jets_iso("lorentz_cylinder", 12)
    w = np.linalg.eigvalsh(iso.tangent.I.value)
    assert np.all(w[..., 0] < 0) and np.all(w[..., 1] > 0)


@pytest.mark.parametrize("name,sign", [("catenoid", 1.0), ("spacelike_catenoid", -1.0),
                                       ("clifford_torus", 1.0), ("lorentz_cylinder", 1.0)])
def test_normal_signs(name, sign):
    _, _, iso = jets_iso(name, 12)
    nf = iso.normal
    assert nf.rank == 1 and nf.signs[0] == sign
    e = nf.e.value
    q = np.sum(e * e * iso.tangent.diag, axis=-1)
    assert np.max(np.abs(q - sign)) <= 1e-12


def test_clifford_normal_tangent_to_sphere():
    _, _, iso = jets_iso("clifford_torus", 12)
    e = iso.normal.e.value[..., 0, :]
    u = iso.tangent.u.value
    assert np.max(np.abs(np.sum(e * u, -1))) <= 1e-9


def test_round_sphere_umbilic():
    for r in (1.0, 2.5):
        _, _, iso = jets_iso("round_sphere", 16, radius=r)
        sf = iso.second
        h = np.abs(sf.h.value[..., 0, :, :])
        I = iso.tangent.I.value
        assert np.max(np.abs(h - I / r)) <= 1e-12
        assert np.max(np.abs(np.abs(sf.H.value[..., 0]) - 1.0 / r)) <= 1e-12


@pytest.mark.parametrize("name", ["clifford_torus", "catenoid", "helicoid", "enneper"])
def test_minimal_surfaces_have_zero_mean_curvature(name):
    _, _, iso = jets_iso(name, 16)
    assert np.max(np.abs(iso.second.H.value)) <= 1e-9


def test_clifford_second_fundamental_norm():
    _, _, iso = jets_iso("clifford_torus", 16)
    assert np.max(np.abs(iso.second.norm2_II.value - 2.0)) <= 1e-12


@pytest.mark.parametrize("name", catalog_names())
def test_laplacian_of_position(name):
    """Delta u = m H, minus m eps u for curved ambients."""
    imm, calc, iso = jets_iso(name, 16)
    lap = laplacian_position(iso.tangent).value
    mH = 2 * mean_curvature_vector(iso.normal, iso.second).value
    mH = mH - 2 * imm.spaceform.epsilon * iso.tangent.u.value
    assert np.max(np.abs(lap - mH)) <= 1e-9 * max(1.0, np.max(np.abs(mH)))


@pytest.mark.parametrize("name", catalog_names())
def test_gauss_equation_jets(name):
    imm, calc, iso = jets_iso(name, 24)
    _, _, res = scalar_curvature_checked(iso.tangent, iso.second, imm.spaceform)
    assert res <= 1e-5


def test_plane_and_clifford_curvature_values():
    imm, _, iso = jets_iso("plane", 8)
    k, kg, _ = scalar_curvature_checked(iso.tangent, iso.second, imm.spaceform)
    assert np.max(np.abs(k.value)) == 0.0 and np.max(np.abs(kg.value)) == 0.0
    imm, _, iso = jets_iso("clifford_torus", 12)
    k, kg, _ = scalar_curvature_checked(iso.tangent, iso.second, imm.spaceform)
    assert np.max(np.abs(k.value)) <= 1e-13 and np.max(np.abs(kg.value)) <= 1e-13


def test_catenoid_negative_curvature():
    imm, _, iso = jets_iso("catenoid", 16)
    k, _, _ = scalar_curvature_checked(iso.tangent, iso.second, imm.spaceform)
    K = -0.5 * iso.second.norm2_II.value
    assert np.all(k.value < 0)
    assert np.max(np.abs(k.value - K)) <= 1e-12


def test_gauss_residual_converges_with_stencils():
    res = []
    for n in (32, 64):
        imm, calc, iso = fd_iso("catenoid", n)
        res.append(scalar_curvature_checked(iso.tangent, iso.second, imm.spaceform)[2])
    assert res[1] < res[0]
    assert math.log2(res[0] / res[1]) >= 3.0


def test_hypersurface_normal_connection_vanishes():
    _, calc, iso = jets_iso("catenoid", 12)
    assert np.max(np.abs(iso.normal.theta.value)) <= 1e-15
    dH = calc.gradient(iso.second.H).value
    assert np.max(np.abs(iso.H_cov.value - dH)) <= 1e-15


def test_clifford_mean_curvature_derivative_vanishes():
    _, _, iso = jets_iso("clifford_torus", 12)
    assert np.max(np.abs(iso.H_cov.value)) <= 1e-12


def test_normal_frame_compatibility_torus_product():
    """<d e_a, e_b> + <e_a, d e_b> = 0 for the orthonormal normal frame."""
    _, calc, iso = jets_iso("torus_product", 16)
    e = iso.normal.e
    de = calc.gradient(e)                                    # de[a, x, j]
    diag = iso.tangent.diag
    M = einsum("axj,bx->abj", de * diag[:, None], e).value
    assert np.max(np.abs(M + np.swapaxes(M, -2, -3))) <= 1e-12


def test_second_fundamental_symmetric():
    _, _, iso = jets_iso("graph", 16)
    h = iso.second.h.value
    assert np.max(np.abs(h - np.swapaxes(h, -1, -2))) <= 1e-14


def test_fd_and_jets_second_fundamental_agree():
    imm, calc_fd, iso_fd = fd_iso("helicoid", 48)
    calc = Calculus(imm.grid, "jets", 3)
    iso = isometric_data(imm, calc)
    band = calc_fd.interior(calc_fd.default_band())
    diff = np.abs(iso_fd.second.norm2_II.value - iso.second.norm2_II.value)[band]
    assert np.max(diff) <= 1e-5
