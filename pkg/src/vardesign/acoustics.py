"""Analytical acoustics of ventilated annular-cavity resonators.

A resonator unit is a circular duct of radius R wrapped by an annular
Helmholtz cavity: a narrow radial slit (the neck) of axial width l_b
spans R..R_n, opening into an annular cavity of axial width l_a that
spans R_n..R_c.  Radial wave propagation inside the slit and cavity is
described with J/Y Bessel fields; the duct sees the assembly as a shunt
impedance at r = R.

Sign conventions follow the exp(+j omega t) time convention: a
compliance-dominated shunt has negative imaginary specific impedance at
low frequency.

All geometry lengths are millimetres; conversions to SI happen at the
wavenumber boundary.  Frequencies are Hz, impedances Pa s/m (specific)
or Pa s/m^3 (acoustic, marked where used).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bessel import j0, j1, y0, y1

SPEED_OF_SOUND = 343.0  # m/s
AIR_DENSITY = 1.2  # kg/m^3

UNIT_LENGTH_MM = 20.0  # axial length l_c of one resonator unit's duct section

STL_CAP_DB = 200.0
_T_FLOOR = 1e-10  # |T| below this is reported as the cap
_DENOM_FLOOR = 1e-300

# Series inertance coefficient for the two slit junctions; calibrated once
# against the 870 Hz validation anchor (R=14.5, R_n=34.5, R_c=54.5 mm,
# l_a/l_b=4) and held fixed.  See end_correction_length.
END_CORRECTION_COEFF = 0.5836

# Table of allowed design ranges, mm.  R_c and R_n upper/lower limits are
# functions of the other lengths; see TableBounds.
L_A_RANGE = (4.0, 18.0)
L_B_MIN = 2.0
R_RANGE = (5.0, 20.0)
R_C_MAX = 48.5


@dataclass(frozen=True)
class AirMedium:
    """Propagation medium (air at room conditions by default)."""

    speed: float = SPEED_OF_SOUND
    density: float = AIR_DENSITY

    def __post_init__(self):
        if self.speed <= 0 or self.density <= 0:
            raise ValueError("medium speed and density must be positive")

    @property
    def impedance(self) -> float:
        """Characteristic specific impedance rho*c."""
        return self.density * self.speed


@dataclass(frozen=True)
class VarGeometry:
    """One resonator unit: duct radius plus annular cavity lengths, mm.

    Attributes
    ----------
    R : duct radius.
    l_a : axial width of the annular cavity.
    l_b : axial width of the neck slit.
    R_n : outer radius of the neck slit (inner radius of the cavity).
    R_c : outer radius of the cavity.

    Radii must be strictly ordered R < R_n < R_c and all widths
    positive; l_b may not exceed l_a.  Construction enforces only this
    physical ordering so that detected or out-of-catalogue validation
    geometries remain representable; in_design_bounds() checks the
    tighter design table.
    """

    R: float
    l_a: float
    l_b: float
    R_n: float
    R_c: float

    def __post_init__(self):
        if min(self.R, self.l_a, self.l_b) <= 0:
            raise ValueError(f"geometry lengths must be positive: {self}")
        if not (self.R < self.R_n < self.R_c):
            raise ValueError(f"radii must satisfy R < R_n < R_c: {self}")
        if self.l_b > self.l_a:
            raise ValueError(f"neck width l_b may not exceed cavity width l_a: {self}")

    def in_design_bounds(self) -> bool:
        """True when the unit lies inside the sampling design table."""
        lo_a, hi_a = L_A_RANGE
        lo_r, hi_r = R_RANGE
        return (
            lo_a <= self.l_a <= hi_a
            and L_B_MIN <= self.l_b <= self.l_a - 1.0
            and lo_r <= self.R <= hi_r
            and (self.R + 6.0) / 2.0 <= self.R_c <= R_C_MAX
            and 7.0 <= self.R_n <= (self.R_c - self.R + 38.0) / 2.0
            and self.R + 1.0 <= self.R_n <= self.R_c - 1.0
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.R, self.l_a, self.l_b, self.R_n, self.R_c])


PARAM_NAMES = ("R", "l_a", "l_b", "R_n", "R_c")


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing evaluation frequencies, Hz."""

    freqs: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=np.float64)
        if f.ndim != 1 or f.size == 0:
            raise ValueError("frequency grid must be a non-empty 1-D array")
        if f[0] <= 0 or np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be positive and strictly increasing")
        object.__setattr__(self, "freqs", f)

    def __len__(self) -> int:
        return self.freqs.size

    @classmethod
    def default(cls) -> "FrequencyGrid":
        """The 50-point response grid: 1 Hz to 1961 Hz in 40 Hz steps."""
        return cls(1.0 + 40.0 * np.arange(50))

    @classmethod
    def fine(cls, lo: float = 1.0, hi: float = 1961.0, step: float = 1.0) -> "FrequencyGrid":
        return cls(np.arange(lo, hi + 0.5 * step, step))


@dataclass
class StlCurve:
    """Sound transmission loss sampled on a frequency grid, dB."""

    grid: FrequencyGrid
    values: np.ndarray
    capped: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.freqs.shape:
            raise ValueError("values must match the grid length")
        self.values = v
        if self.capped is None:
            self.capped = np.zeros(v.shape, dtype=bool)

    def peak_frequency(self) -> float:
        """Frequency of the largest STL value; ties go to the lowest bin."""
        return float(self.grid.freqs[int(np.argmax(self.values))])

    def peak_value(self) -> float:
        return float(self.values.max())


def write_stl_csv(curve: StlCurve, path) -> None:
    """Write a curve as CSV with header freq_hz,stl_db at 9 significant digits."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("freq_hz,stl_db\n")
        for f, v in zip(curve.grid.freqs, curve.values):
            fh.write(f"{f:.9g},{v:.9g}\n")


def read_stl_csv(path) -> StlCurve:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[1] != 2:
        raise ValueError(f"expected two CSV columns freq_hz,stl_db in {path}")
    return StlCurve(FrequencyGrid(rows[:, 0]), rows[:, 1])


def _check_denominator(name: str, value: np.ndarray) -> None:
    if np.any(np.abs(value) < _DENOM_FLOOR):
        raise ValueError(f"singular frequency: vanishing denominator in {name}")


def end_correction_length(geom: VarGeometry) -> float:
    """Effective extra neck length from the two slit junctions, mm.

    The 1-D radial model treats the slit as ending abruptly at r = R and
    r = R_n, but the real field bulges past both openings and the moving
    air there adds inertance.  Each junction contributes the classic
    slit-aperture logarithm (l_b/pi) * ln csc(pi l_b / (2 w)), where w
    is the width of the space the slit opens into: the cavity width l_a
    on one side and the duct segment length on the other.  The term
    vanishes as the slit grows to fill its opening.  The single shared
    coefficient is calibrated on the 870 Hz validation geometry and
    verified against the in-package field solver across the design
    table.
    """
    def log_csc(ratio: float) -> float:
        return float(np.log(1.0 / np.sin(0.5 * np.pi * ratio)))

    junctions = log_csc(geom.l_b / geom.l_a) + log_csc(geom.l_b / UNIT_LENGTH_MM)
    return END_CORRECTION_COEFF * (geom.l_b / np.pi) * junctions


def slit_impedance(geom: VarGeometry, freqs, medium: AirMedium = AirMedium(),
                   end_correction: bool = True) -> np.ndarray:
    """Specific impedance of the annular resonator seen at the duct wall r = R.

    The cavity (R_n..R_c) carries a radial standing wave with a rigid
    outer wall, giving a J/Y mixture with ratio alpha_A.  Pressure and
    volume flux continue across the cavity/neck interface at R_n, where
    the axial widths set the area ratio l_a/l_b.  The resulting neck
    mixture alpha_B yields the impedance at the duct wall.  By default a
    series junction inertance (see end_correction_length) accounts for
    the evanescent mass loading that the pure radial chain omits; pass
    end_correction=False for the bare chain, whose resonance depends on
    the radii and the width ratio only.

    Returns a complex array over freqs; purely imaginary for this
    lossless interior model.
    """
    f = np.asarray(freqs, dtype=np.float64)
    if np.any(f <= 0):
        raise ValueError("frequencies must be positive")
    rho_c = medium.impedance
    k = 2.0 * np.pi * f / medium.speed
    x_r = k * (geom.R * 1e-3)
    x_n = k * (geom.R_n * 1e-3)
    x_c = k * (geom.R_c * 1e-3)

    y1_c = y1(x_c)
    _check_denominator("outer-wall mixture", y1_c)
    alpha_a = j1(x_c) / y1_c

    den_a = j1(x_n) - alpha_a * y1(x_n)
    _check_denominator("cavity impedance at R_n", den_a)
    z_a = 1j * rho_c * (j0(x_n) - alpha_a * y0(x_n)) / den_a

    area_ratio = geom.l_a / geom.l_b  # cavity to neck interface areas
    den_b = 1j * rho_c * area_ratio * y0(x_n) - z_a * y1(x_n)
    _check_denominator("neck mixture", den_b)
    alpha_b = (1j * rho_c * area_ratio * j0(x_n) - z_a * j1(x_n)) / den_b

    den = j1(x_r) - alpha_b * y1(x_r)
    _check_denominator("duct-wall impedance", den)
    z = 1j * rho_c * (j0(x_r) - alpha_b * y0(x_r)) / den
    if end_correction:
        omega = 2.0 * np.pi * f
        z = z + 1j * omega * medium.density * end_correction_length(geom) * 1e-3
    return z


def _stl_from_transmission(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mag = np.abs(t)
    capped = mag < _T_FLOOR
    safe = np.where(capped, 1.0, mag)
    stl = -20.0 * np.log10(safe)
    stl = np.where(capped, STL_CAP_DB, stl)
    # |T| <= 1 for passive shunts; clamp float roundoff just below 0 dB.
    return np.maximum(stl, 0.0), capped


def unit_stl(geom: VarGeometry, grid: FrequencyGrid, medium: AirMedium = AirMedium()) -> StlCurve:
    """Plane-wave transmission loss of a single resonator unit.

    The slit opening acts as a shunt on the duct: with the opening to
    duct cross-section ratio sigma = 2 l_b / R, the transmission is
    T = z_B / (delta + z_B), delta = sigma rho c / 2.  STL is capped at
    200 dB and the affected bins flagged.
    """
    z_b = slit_impedance(geom, grid.freqs, medium)
    delta = (geom.l_b / geom.R) * medium.impedance
    t = z_b / (delta + z_b)
    stl, capped = _stl_from_transmission(t)
    return StlCurve(grid, stl, capped)


def resonance_frequency(
    geom: VarGeometry,
    medium: AirMedium = AirMedium(),
    lo: float = 1.0,
    hi: float = 1961.0,
    tol: float = 1e-3,
    end_correction: bool = True,
) -> float:
    """First upward zero crossing of the shunt reactance in [lo, hi].

    Located by a 1 Hz scan plus bisection; raises ValueError when no
    resonance lies in the window.
    """
    f = np.arange(lo, hi + 1.0)
    im = np.imag(slit_impedance(geom, f, medium, end_correction))
    sign_change = np.nonzero((im[:-1] < 0) & (im[1:] >= 0))[0]
    if sign_change.size == 0:
        raise ValueError(f"no resonance of {geom} inside [{lo}, {hi}] Hz")
    a, b = f[sign_change[0]], f[sign_change[0] + 1]
    while b - a > tol:
        m = 0.5 * (a + b)
        if np.imag(slit_impedance(geom, m, medium, end_correction))[()] < 0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


# Four-pole (transfer matrix) composition.  Matrices act on (p, U) with
# volume velocity U, stacked per frequency as shape (nf, 2, 2).


def duct_matrix(length_mm: float, radius_mm: float, freqs, medium: AirMedium = AirMedium()) -> np.ndarray:
    """Four-pole of a rigid circular duct segment."""
    f = np.asarray(freqs, dtype=np.float64)
    k = 2.0 * np.pi * f / medium.speed
    kl = k * (length_mm * 1e-3)
    z0 = acoustic_z0(radius_mm, medium)
    m = np.empty((f.size, 2, 2), dtype=np.complex128)
    m[:, 0, 0] = np.cos(kl)
    m[:, 0, 1] = 1j * z0 * np.sin(kl)
    m[:, 1, 0] = 1j * np.sin(kl) / z0
    m[:, 1, 1] = np.cos(kl)
    return m


def shunt_matrix(z_branch: np.ndarray) -> np.ndarray:
    """Four-pole of a shunt branch with acoustic impedance z_branch."""
    z = np.asarray(z_branch, dtype=np.complex128)
    m = np.zeros((z.size, 2, 2), dtype=np.complex128)
    m[:, 0, 0] = 1.0
    m[:, 1, 1] = 1.0
    m[:, 1, 0] = 1.0 / z
    return m


def acoustic_z0(radius_mm: float, medium: AirMedium = AirMedium()) -> float:
    """Characteristic acoustic impedance rho c / S of a duct, SI units."""
    area = np.pi * (radius_mm * 1e-3) ** 2
    return medium.impedance / area


def branch_impedance(geom: VarGeometry, freqs, medium: AirMedium = AirMedium()) -> np.ndarray:
    """Acoustic impedance of one unit's slit branch: z_B over the slit area."""
    area = 2.0 * np.pi * (geom.R * 1e-3) * (geom.l_b * 1e-3)
    return slit_impedance(geom, freqs, medium) / area


def unit_matrix(geom: VarGeometry, freqs, medium: AirMedium = AirMedium()) -> np.ndarray:
    """Four-pole of one unit: half duct, shunt slit, half duct."""
    half = duct_matrix(0.5 * UNIT_LENGTH_MM, geom.R, freqs, medium)
    return half @ shunt_matrix(branch_impedance(geom, freqs, medium)) @ half


def fourpole_stl(matrix: np.ndarray, radius_mm: float, grid: FrequencyGrid,
                 medium: AirMedium = AirMedium()) -> StlCurve:
    """Transmission loss of an anechoically terminated four-pole chain."""
    z0 = acoustic_z0(radius_mm, medium)
    a = matrix[:, 0, 0]
    b = matrix[:, 0, 1]
    c = matrix[:, 1, 0]
    d = matrix[:, 1, 1]
    t = 2.0 / (a + b / z0 + c * z0 + d)
    stl, capped = _stl_from_transmission(t)
    return StlCurve(grid, stl, capped)


def multi_cavity_stl(units: list[VarGeometry], grid: FrequencyGrid,
                     medium: AirMedium = AirMedium()) -> StlCurve:
    """Transmission loss of several units in series along one duct.

    All units must share the duct radius; offenders are reported by
    index.  Each unit occupies UNIT_LENGTH_MM of duct with its slit at
    the segment midpoint.
    """
    if not units:
        raise ValueError("multi_cavity_stl requires at least one unit")
    radius = units[0].R
    bad = [i for i, u in enumerate(units) if abs(u.R - radius) > 1e-9]
    if bad:
        raise ValueError(f"units at indices {bad} do not match duct radius {radius} mm")
    total = None
    for u in units:
        m = unit_matrix(u, grid.freqs, medium)
        total = m if total is None else total @ m
    return fourpole_stl(total, radius, grid, medium)
