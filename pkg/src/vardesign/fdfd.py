"""Frequency-domain finite-difference solver on raster cross-sections.

Solves the axisymmetric (m = 0) Helmholtz equation

    (1/r) d/dr (r dp/dr) + d2p/dz2 + k^2 p = 0

with a finite-volume discretization on the raster grid: cell (i, j)
spans [i, i+1] x [j, j+1] pixels with centre radius r_i = (i + 1/2) h,
h the pixel pitch.  Radial fluxes are weighted by the face radius, so
the symmetry axis needs no special casing (the inner face of row 0 has
zero radius and vanishes).  Solid pixels and the frame boundary are
sound-hard (natural Neumann).

A unit-amplitude plane wave drives the inlet face of the channel:
dp/dz + j k p = 2 j k P_i there, and dp/dz - j k p = 0 absorbs at the
outlet face; both are first-order port conditions.  Transmission loss
compares the incident power to the power of the area-averaged outlet
pressure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu

from .acoustics import AirMedium, FrequencyGrid, StlCurve, _stl_from_transmission
from .raster import CrossSection, PITCH_MM

INCIDENT_PRESSURE_PA = 1.0
RESIDUAL_TOL = 1e-8
POWER_SLACK = 1e-3  # w_out may exceed w_in by at most this relative amount


@dataclass
class PortPowers:
    """Power bookkeeping of one solve: incident and transmitted, watts."""

    freq_hz: float
    w_in: float
    w_out: float
    outlet_pressure: complex

    def __post_init__(self):
        if self.w_in <= 0:
            raise ValueError("incident power must be positive")
        if self.w_out > self.w_in * (1.0 + POWER_SLACK):
            raise ValueError(
                f"transmitted power {self.w_out} exceeds incident {self.w_in} "
                f"beyond discretization slack at {self.freq_hz} Hz"
            )


@dataclass
class HelmholtzSystem:
    """Assembled sparse system for one image at one frequency."""

    matrix: csc_matrix
    rhs: np.ndarray
    cells: np.ndarray  # (n, 2) array of (row, col) per unknown
    k: float  # rad/m
    pitch_m: float
    inlet_col: int
    outlet_col: int
    inlet_cells: np.ndarray  # unknown indices forming the inlet aperture
    outlet_cells: np.ndarray

    @property
    def size(self) -> int:
        return self.rhs.size


def _axis_run(column_air: np.ndarray, name: str) -> np.ndarray:
    """Rows of the contiguous air run starting at the symmetry axis."""
    if not column_air[0]:
        raise ValueError(f"{name} column air does not reach the symmetry axis")
    length = column_air.size if column_air.all() else int(np.argmin(column_air))
    return np.arange(length)


class _Stencil:
    """Frequency-independent structure of one image's discretization."""

    def __init__(self, img: np.ndarray, pitch_m: float):
        air = img.astype(bool)
        if not air.any():
            raise ValueError("image contains no air")
        cols_with_air = np.nonzero(air.any(axis=0))[0]
        self.inlet_col = int(cols_with_air[0])
        self.outlet_col = int(cols_with_air[-1])
        if self.inlet_col == self.outlet_col:
            raise ValueError("image has no axial extent of air")

        labels, _ = ndimage.label(air, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
        inlet_labels = set(np.unique(labels[:, self.inlet_col])) - {0}
        outlet_labels = set(np.unique(labels[:, self.outlet_col])) - {0}
        connected = inlet_labels & outlet_labels
        if not connected:
            raise ValueError("no air path connects the inlet column to the outlet column")
        # Solve only on port-connected air; isolated pockets carry no field.
        domain = np.isin(labels, sorted(connected))

        rows_idx, cols_idx = np.nonzero(domain)
        self.cells = np.column_stack([rows_idx, cols_idx])
        n = self.cells.shape[0]
        index = -np.ones(img.shape, dtype=np.int64)
        index[rows_idx, cols_idx] = np.arange(n)

        self.pitch_m = pitch_m
        r_center = rows_idx + 0.5  # in units of the pitch

        entries_i: list[np.ndarray] = []
        entries_j: list[np.ndarray] = []
        entries_v: list[np.ndarray] = []
        diag = np.zeros(n)

        def couple(mask, nbr_rows, nbr_cols, weights):
            nbr = index[nbr_rows[mask], nbr_cols[mask]]
            ok = nbr >= 0
            src = np.arange(n)[mask][ok]
            w = weights[mask][ok]
            entries_i.append(src)
            entries_j.append(nbr[ok])
            entries_v.append(w)
            diag[src] -= w

        up = rows_idx + 1 < img.shape[0]
        couple(up, rows_idx + 1, cols_idx, (rows_idx + 1).astype(float))
        down = rows_idx - 1 >= 0
        couple(down, rows_idx - 1, cols_idx, rows_idx.astype(float))
        right = cols_idx + 1 < img.shape[1]
        couple(right, rows_idx, cols_idx + 1, r_center)
        left = cols_idx - 1 >= 0
        couple(left, rows_idx, cols_idx - 1, r_center)

        self.off_i = np.concatenate(entries_i)
        self.off_j = np.concatenate(entries_j)
        self.off_v = np.concatenate(entries_v)
        self.base_diag = diag
        self.r_center = r_center
        # The ports are the waveguide apertures: the contiguous air run
        # touching the symmetry axis in each boundary column.  Other air
        # reaching those columns (a cavity as wide as the unit cell) sits
        # against the rigid frame and keeps the hard-wall condition.
        self.inlet_cells = index[_axis_run(domain[:, self.inlet_col], "inlet"),
                                 self.inlet_col]
        self.outlet_cells = index[_axis_run(domain[:, self.outlet_col], "outlet"),
                                  self.outlet_col]

    def system(self, freq_hz: float, medium: AirMedium) -> HelmholtzSystem:
        k = 2.0 * np.pi * freq_hz / medium.speed
        h = self.pitch_m
        n = self.base_diag.size
        diag = self.base_diag.astype(np.complex128)
        diag += (k * h) ** 2 * self.r_center
        rhs = np.zeros(n, dtype=np.complex128)
        # Port faces replace the solid-wall Neumann condition.
        jkh = 1j * k * h
        diag[self.inlet_cells] += jkh * self.r_center[self.inlet_cells]
        rhs[self.inlet_cells] = (
            2.0 * jkh * INCIDENT_PRESSURE_PA * self.r_center[self.inlet_cells]
        )
        diag[self.outlet_cells] += jkh * self.r_center[self.outlet_cells]
        mat = csc_matrix(
            (
                np.concatenate([self.off_v.astype(np.complex128), diag]),
                (
                    np.concatenate([self.off_i, np.arange(n)]),
                    np.concatenate([self.off_j, np.arange(n)]),
                ),
            ),
            shape=(n, n),
        )
        return HelmholtzSystem(
            matrix=mat,
            rhs=rhs,
            cells=self.cells,
            k=k,
            pitch_m=h,
            inlet_col=self.inlet_col,
            outlet_col=self.outlet_col,
            inlet_cells=self.inlet_cells,
            outlet_cells=self.outlet_cells,
        )


def _as_image(section) -> np.ndarray:
    if isinstance(section, CrossSection):
        return section.pixels
    arr = np.asarray(section)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D binary image")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("image pixels must be binary")
    return arr.astype(np.uint8)


def assemble(section, freq_hz: float, medium: AirMedium = AirMedium(),
             pitch_mm: float = PITCH_MM) -> HelmholtzSystem:
    """Build the sparse Helmholtz system for one image at one frequency."""
    if freq_hz <= 0:
        raise ValueError("frequency must be positive")
    img = _as_image(section)
    return _Stencil(img, pitch_mm * 1e-3).system(freq_hz, medium)


def _solve_system(system: HelmholtzSystem) -> np.ndarray:
    lu = splu(system.matrix)
    p = lu.solve(system.rhs)
    scale = np.linalg.norm(system.rhs)
    # Near resonance the system is ill-conditioned enough that one pass of
    # factored refinement is occasionally needed to hold the residual bound.
    for _ in range(3):
        residual = system.rhs - system.matrix @ p
        if scale == 0 or np.linalg.norm(residual) / scale <= RESIDUAL_TOL:
            return p
        p = p + lu.solve(residual)
    raise ArithmeticError(
        f"sparse solve residual {np.linalg.norm(system.rhs - system.matrix @ p) / scale:.2e} "
        f"above {RESIDUAL_TOL}"
    )


def _port_powers(p: np.ndarray, system: HelmholtzSystem,
                 medium: AirMedium) -> PortPowers:
    weights = system.cells[system.outlet_cells, 0] + 0.5  # ~ 2 pi r dr
    p_out = complex(np.sum(p[system.outlet_cells] * weights) / np.sum(weights))
    radius_m = system.inlet_cells.size * system.pitch_m
    area = np.pi * radius_m**2
    w_in = INCIDENT_PRESSURE_PA**2 * area / (2.0 * medium.impedance)
    w_out = abs(p_out) ** 2 * area / (2.0 * medium.impedance)
    return PortPowers(freq_hz=system.k * medium.speed / (2.0 * np.pi),
                      w_in=w_in, w_out=w_out, outlet_pressure=p_out)


def solve_ports(section, freq_hz: float, medium: AirMedium = AirMedium(),
                pitch_mm: float = PITCH_MM) -> tuple[PortPowers, np.ndarray, HelmholtzSystem]:
    """Solve one frequency and report port powers plus the field vector."""
    system = assemble(section, freq_hz, medium, pitch_mm)
    p = _solve_system(system)
    return _port_powers(p, system, medium), p, system


def stl_curve(section, grid: FrequencyGrid, medium: AirMedium = AirMedium(),
              pitch_mm: float = PITCH_MM) -> tuple[StlCurve, list[PortPowers]]:
    """Transmission loss of an image over a frequency grid.

    Matrix structure is assembled once and re-spectralized per bin; each
    bin is solved by direct sparse factorization.
    """
    img = _as_image(section)
    stencil = _Stencil(img, pitch_mm * 1e-3)
    powers: list[PortPowers] = []
    trans = np.empty(len(grid), dtype=np.complex128)
    for n, f in enumerate(grid.freqs):
        system = stencil.system(float(f), medium)
        p = _solve_system(system)
        entry = _port_powers(p, system, medium)
        powers.append(entry)
        trans[n] = entry.outlet_pressure / INCIDENT_PRESSURE_PA
    stl, capped = _stl_from_transmission(trans)
    return StlCurve(grid, stl, capped), powers


def dump_fields(path_prefix, section, freq_hz: float, medium: AirMedium = AirMedium(),
                pitch_mm: float = PITCH_MM) -> None:
    """Write the complex field as little-endian complex64 plus a cell map CSV.

    <prefix>.c64 holds the air-cell field values in unknown order;
    <prefix>_cells.csv maps each value index to its (row, col) pixel.
    """
    _, p, system = solve_ports(section, freq_hz, medium, pitch_mm)
    p.astype("<c8").tofile(f"{path_prefix}.c64")
    with open(f"{path_prefix}_cells.csv", "w", encoding="ascii", newline="\n") as fh:
        fh.write("index,row,col\n")
        for n, (i, j) in enumerate(system.cells):
            fh.write(f"{n},{i},{j}\n")
