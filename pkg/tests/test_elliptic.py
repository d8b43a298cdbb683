import numpy as np
import pytest

from mslab.elliptic import VerticalGrid, default_vertical, elliptic_velocity, stretch_for_spacing
from mslab.graph import LipschitzError
from mslab.linear import gaussian_bump
from mslab.spectral import SpectralField, make_grid


def _flat_mode(n, j=3):
    g = make_grid(1, 2 * np.pi, n)
    x = g.coordinates[0]
    return g, SpectralField.zeros(g), SpectralField(g, values=np.cos(j * x))


def test_flat_interface_single_mode():
    g, h, b = _flat_mode(128)
    two, vel, D = elliptic_velocity(h, boundary=b)
    x = g.coordinates[0]
    assert D == pytest.approx(g.length * 3, rel=1e-2)
    assert np.max(np.abs(vel.V.values - 6 * np.cos(3 * x))) <= 6e-2 * 6
    assert vel.source == "elliptic"
    assert two.residual <= 1e-10


def test_dirichlet_energy_second_order():
    errs = []
    for n in (64, 128, 256):
        g, h, b = _flat_mode(n)
        errs.append(abs(elliptic_velocity(h, boundary=b)[2] - 3 * g.length))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8), orders


def test_zero_data_gives_zero_velocity():
    g = make_grid(1, 4.0, 32)
    _, vel, D = elliptic_velocity(SpectralField.zeros(g))
    assert np.max(np.abs(vel.V.values)) == 0.0
    assert D == 0.0


def test_velocity_is_odd_in_h():
    g = make_grid(1, 2 * np.pi, 64)
    h = gaussian_bump(g, 0.1, 0.6)
    v1 = elliptic_velocity(h)[1].V.values
    v2 = elliptic_velocity(-h)[1].V.values
    assert np.max(np.abs(v1 + v2)) <= 1e-10 * np.max(np.abs(v1))


def test_curved_interface_conserves_volume_approximately():
    g = make_grid(1, 2 * np.pi, 128)
    _, vel, _ = elliptic_velocity(gaussian_bump(g, 0.2, 0.6))
    assert abs(vel.mean) <= 1e-2 * np.max(np.abs(vel.V.values))


def test_short_strip_rejected():
    g = make_grid(1, 2.0, 32)
    with pytest.raises(ValueError, match="2L"):
        default_vertical(g, height_factor=1.5)
    with pytest.raises(ValueError, match="2L"):
        elliptic_velocity(SpectralField.zeros(g), vertical=VerticalGrid(3.0, 16, 0.0))


def test_two_dimensional_rejected():
    g = make_grid(2, 2.0, 16)
    with pytest.raises(ValueError):
        elliptic_velocity(SpectralField.zeros(g))


def test_steep_graph_rejected():
    g = make_grid(1, 2 * np.pi, 32)
    with pytest.raises(LipschitzError):
        elliptic_velocity(SpectralField(g, values=1.2 * np.sin(g.coordinates[0])))


def test_vertical_stretching():
    vg = VerticalGrid(10.0, 32, stretch_for_spacing(10.0, 32, 0.05))
    z = vg.z()
    assert z[0] == 0.0 and z[-1] == pytest.approx(10.0)
    assert vg.first_spacing == pytest.approx(0.05, rel=0.1)
    assert np.all(np.diff(z) > 0)
    assert stretch_for_spacing(1.0, 4, 1.0) == 0.0
