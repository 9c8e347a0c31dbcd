"""Analytical resonator model: impedance chain, transfer matrices, STL.

Oracles
-------
* The slit impedance chain is recomputed in-test from scipy Bessel
  functions (independent of the in-package piecewise evaluation).
* As f -> 0 the chain must converge to the exact lumped limit: series
  mass from the incompressible flow energy (numeric quadrature) and
  compliance from uniform compression of the slit + cavity volume.
* A four-pole unit with its slit shunt at the segment midpoint has
  exactly the same |T| as the bare shunt (the lossless duct phase
  cancels), so the single-unit composition must reproduce unit_stl to
  roundoff.
* The 870 Hz anchor: resonance 870.00146 Hz corrected, 929.38428 Hz for
  the bare chain; frozen from a 1 Hz scan plus bisection.
"""

import numpy as np
import pytest
from scipy import special
from scipy.integrate import quad

from vardesign import acoustics
from vardesign.acoustics import (AirMedium, FrequencyGrid, StlCurve, VarGeometry,
                                 acoustic_z0, duct_matrix, end_correction_length,
                                 multi_cavity_stl, read_stl_csv, resonance_frequency,
                                 shunt_matrix, slit_impedance, unit_matrix, unit_stl,
                                 write_stl_csv)
from vardesign.raster import sample_geometries

MED = AirMedium()


# -- geometry and grid containers ---------------------------------------------


def test_geometry_validation():
    with pytest.raises(ValueError):
        VarGeometry(R=10.0, l_a=8.0, l_b=4.0, R_n=9.0, R_c=30.0)  # R_n <= R
    with pytest.raises(ValueError):
        VarGeometry(R=10.0, l_a=8.0, l_b=4.0, R_n=30.0, R_c=20.0)  # R_c <= R_n
    with pytest.raises(ValueError):
        VarGeometry(R=10.0, l_a=4.0, l_b=6.0, R_n=20.0, R_c=30.0)  # l_b > l_a
    with pytest.raises(ValueError):
        VarGeometry(R=-1.0, l_a=8.0, l_b=4.0, R_n=20.0, R_c=30.0)


def test_design_bounds(anchor_geometry):
    good = VarGeometry(R=10.0, l_a=8.0, l_b=4.0, R_n=20.0, R_c=30.0)
    assert good.in_design_bounds()
    # the anchor validation unit is deliberately outside the table
    assert not anchor_geometry.in_design_bounds()


def test_default_grid():
    grid = FrequencyGrid.default()
    assert len(grid) == 50
    assert grid.freqs[0] == 1.0
    assert grid.freqs[-1] == 1961.0
    assert np.all(np.diff(grid.freqs) == 40.0)


def test_fine_grid():
    grid = FrequencyGrid.fine()
    assert grid.freqs[0] == 1.0 and grid.freqs[-1] == 1961.0
    assert len(grid) == 1961


def test_grid_validation():
    with pytest.raises(ValueError):
        FrequencyGrid(np.array([]))
    with pytest.raises(ValueError):
        FrequencyGrid(np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        FrequencyGrid(np.array([10.0, 10.0]))


def test_curve_peak_tie_goes_low():
    grid = FrequencyGrid(np.array([100.0, 200.0, 300.0]))
    curve = StlCurve(grid, np.array([5.0, 5.0, 1.0]))
    assert curve.peak_frequency() == 100.0


def test_curve_shape_mismatch():
    with pytest.raises(ValueError):
        StlCurve(FrequencyGrid.default(), np.zeros(10))


def test_medium_validation():
    with pytest.raises(ValueError):
        AirMedium(speed=-1.0)
    assert MED.impedance == pytest.approx(1.2 * 343.0)


def test_stl_csv_round_trip(tmp_path, anchor_geometry):
    curve = unit_stl(anchor_geometry, FrequencyGrid.default())
    path = tmp_path / "curve.csv"
    write_stl_csv(curve, path)
    back = read_stl_csv(path)
    assert back.grid.freqs == pytest.approx(curve.grid.freqs, rel=1e-8)
    assert back.values == pytest.approx(curve.values, rel=1e-8)
    assert path.read_text().splitlines()[0] == "freq_hz,stl_db"


# -- impedance chain ----------------------------------------------------------


def _chain_scipy(geom, freqs, med=MED, end_correction=False):
    """The radial J/Y chain recomputed with scipy Bessel functions."""
    k = 2.0 * np.pi * np.asarray(freqs, np.float64) / med.speed
    x_r, x_n, x_c = (k * geom.R * 1e-3, k * geom.R_n * 1e-3, k * geom.R_c * 1e-3)
    rc = med.impedance
    alpha_a = special.j1(x_c) / special.y1(x_c)
    z_a = 1j * rc * (special.j0(x_n) - alpha_a * special.y0(x_n)) / (
        special.j1(x_n) - alpha_a * special.y1(x_n))
    ratio = geom.l_a / geom.l_b
    alpha_b = (1j * rc * ratio * special.j0(x_n) - z_a * special.j1(x_n)) / (
        1j * rc * ratio * special.y0(x_n) - z_a * special.y1(x_n))
    z = 1j * rc * (special.j0(x_r) - alpha_b * special.y0(x_r)) / (
        special.j1(x_r) - alpha_b * special.y1(x_r))
    if end_correction:
        z = z + 1j * 2.0 * np.pi * np.asarray(freqs) * med.density * \
            end_correction_length(geom) * 1e-3
    return z


def test_chain_against_scipy(anchor_geometry):
    freqs = FrequencyGrid.default().freqs
    for geom in [anchor_geometry] + sample_geometries(5, seed=2):
        for corrected in (False, True):
            got = slit_impedance(geom, freqs, end_correction=corrected)
            want = _chain_scipy(geom, freqs, end_correction=corrected)
            assert np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-9)) < 1e-5


def test_chain_frozen_values(anchor_geometry):
    bare = slit_impedance(anchor_geometry, [500.0, 870.0, 1500.0], end_correction=False)
    assert bare.imag == pytest.approx([-115.1838735, -11.70507018, 92.42211753], rel=1e-6)
    assert bare.real == pytest.approx([0.0, 0.0, 0.0], abs=1e-9)
    corr = slit_impedance(anchor_geometry, [500.0, 870.0, 1500.0], end_correction=True)
    assert corr.imag == pytest.approx([-108.4569695, -0.0002572124, 112.6028295], rel=1e-6)


def test_chain_lossless_is_reactive(anchor_geometry):
    z = slit_impedance(anchor_geometry, FrequencyGrid.default().freqs)
    assert np.abs(z.real).max() < 1e-9


def test_chain_rejects_bad_frequencies(anchor_geometry):
    with pytest.raises(ValueError):
        slit_impedance(anchor_geometry, [0.0, 100.0])
    with pytest.raises(ValueError):
        slit_impedance(anchor_geometry, [-5.0])


def _lumped_limit(geom, med=MED):
    """Exact f->0 series mass and stiffness at the duct wall, SI specific.

    Mass: kinetic energy of the incompressible flow that feeds uniform
    compression of all air beyond each radius.  Stiffness: rho c^2 A_slit
    over the total (slit + cavity) volume.
    """
    r0, rn, rc = geom.R * 1e-3, geom.R_n * 1e-3, geom.R_c * 1e-3
    lb, la = geom.l_b * 1e-3, geom.l_a * 1e-3
    v_cav = np.pi * (rc**2 - rn**2) * la
    v_total = np.pi * (rn**2 - r0**2) * lb + v_cav

    def v_beyond(r):
        if r < rn:
            return np.pi * (rn**2 - r**2) * lb + v_cav
        return np.pi * (rc**2 - r**2) * la

    def integrand(r):
        width = lb if r < rn else la
        return v_beyond(r) ** 2 / (2.0 * np.pi * r * width)

    energy = quad(integrand, r0, rn, limit=200)[0] + quad(integrand, rn, rc, limit=200)[0]
    a_slit = 2.0 * np.pi * r0 * lb
    mass = med.density * (energy / v_total**2) * a_slit
    stiffness = med.density * med.speed**2 * a_slit / v_total
    return mass, stiffness


def test_low_frequency_lumped_limit(anchor_geometry):
    # fit Im z = omega M - K / omega at 1 and 2 Hz, compare to the limit
    for geom in [anchor_geometry] + sample_geometries(8, seed=1):
        w = 2.0 * np.pi * np.array([1.0, 2.0])
        im = np.imag(slit_impedance(geom, [1.0, 2.0], end_correction=False))
        design = np.array([[w[0], -1.0 / w[0]], [w[1], -1.0 / w[1]]])
        m_hat, k_hat = np.linalg.solve(design, im)
        mass, stiffness = _lumped_limit(geom)
        assert m_hat == pytest.approx(mass, rel=1e-5)
        assert k_hat == pytest.approx(stiffness, rel=1e-5)


def test_end_correction_formula(anchor_geometry):
    g = anchor_geometry

    def log_csc(ratio):
        return np.log(1.0 / np.sin(0.5 * np.pi * ratio))

    want = 0.5836 * (g.l_b / np.pi) * (log_csc(g.l_b / g.l_a) + log_csc(g.l_b / 20.0))
    assert end_correction_length(g) == pytest.approx(want, rel=1e-12)
    assert end_correction_length(g) == pytest.approx(1.78436670643102, rel=1e-10)
    # vanishes as the slit fills its openings
    wide = VarGeometry(R=10.0, l_a=18.0, l_b=17.999, R_n=20.0, R_c=30.0)
    assert 0.0 < end_correction_length(wide) < 0.06


def test_resonance_anchor(anchor_geometry):
    assert resonance_frequency(anchor_geometry) == pytest.approx(870.00146, abs=0.01)
    assert resonance_frequency(anchor_geometry, end_correction=False) == \
        pytest.approx(929.38428, abs=0.01)


def test_resonance_window_errors(anchor_geometry):
    with pytest.raises(ValueError):
        resonance_frequency(anchor_geometry, lo=1.0, hi=100.0)


def test_bare_resonance_independent_of_absolute_widths(anchor_geometry):
    # the bare chain depends on the radii and l_a/l_b only
    g = anchor_geometry
    scaled = VarGeometry(R=g.R, l_a=2.0 * g.l_a, l_b=2.0 * g.l_b, R_n=g.R_n, R_c=g.R_c)
    f_base = resonance_frequency(g, end_correction=False)
    f_scaled = resonance_frequency(scaled, end_correction=False)
    assert f_scaled == pytest.approx(f_base, abs=0.01)


# -- transmission loss --------------------------------------------------------


def test_unit_stl_matches_direct_formula(anchor_geometry):
    grid = FrequencyGrid.default()
    curve = unit_stl(anchor_geometry, grid)
    z = _chain_scipy(anchor_geometry, grid.freqs, end_correction=True)
    delta = (anchor_geometry.l_b / anchor_geometry.R) * MED.impedance
    want = -20.0 * np.log10(np.abs(z / (delta + z)))
    assert curve.values == pytest.approx(np.maximum(want, 0.0), abs=1e-4)


def test_unit_stl_peak_at_resonance(anchor_geometry):
    grid = FrequencyGrid.fine()
    curve = unit_stl(anchor_geometry, grid)
    assert curve.peak_frequency() == 870.0
    assert curve.peak_value() > 60.0
    assert curve.values.min() >= 0.0


def test_stl_cap_flags():
    stl, capped = acoustics._stl_from_transmission(np.array([1e-12, 0.5, 1.0]))
    assert stl[0] == acoustics.STL_CAP_DB and capped[0]
    assert stl[1] == pytest.approx(-20.0 * np.log10(0.5))
    assert stl[2] == 0.0 and not capped[1] and not capped[2]


# -- four-pole composition ----------------------------------------------------


def test_matrix_determinants(anchor_geometry):
    freqs = FrequencyGrid.default().freqs
    for m in (duct_matrix(20.0, 14.5, freqs), unit_matrix(anchor_geometry, freqs)):
        det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
        assert det == pytest.approx(np.ones_like(det), abs=1e-9)


def test_shunt_matrix_form():
    z = np.array([1.0 + 2.0j])
    m = shunt_matrix(z)
    assert m[0, 0, 0] == 1.0 and m[0, 1, 1] == 1.0 and m[0, 0, 1] == 0.0
    assert m[0, 1, 0] == pytest.approx(1.0 / (1.0 + 2.0j))


def test_acoustic_z0():
    want = MED.impedance / (np.pi * 0.0145**2)
    assert acoustic_z0(14.5) == pytest.approx(want, rel=1e-12)


def test_single_unit_composition_identity(anchor_geometry):
    # the duct phase cancels in |T|: composition == bare shunt exactly
    grid = FrequencyGrid.default()
    for geom in [anchor_geometry] + sample_geometries(5, seed=3):
        solo = unit_stl(geom, grid)
        composed = multi_cavity_stl([geom], grid)
        assert np.abs(composed.values - solo.values).max() < 1e-6


def test_duplicate_units_reinforce(anchor_geometry):
    grid = FrequencyGrid.default()
    solo = unit_stl(anchor_geometry, grid)
    double = multi_cavity_stl([anchor_geometry, anchor_geometry], grid)
    peak_bin = int(np.argmax(solo.values))
    assert int(np.argmax(double.values)) == peak_bin
    assert double.values[peak_bin] >= solo.values[peak_bin]


def test_multi_cavity_validation(anchor_geometry):
    with pytest.raises(ValueError):
        multi_cavity_stl([], FrequencyGrid.default())
    other = VarGeometry(R=10.0, l_a=8.0, l_b=4.0, R_n=20.0, R_c=30.0)
    with pytest.raises(ValueError, match=r"indices \[1\]"):
        multi_cavity_stl([anchor_geometry, other], FrequencyGrid.default())
