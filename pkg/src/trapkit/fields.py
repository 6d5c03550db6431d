"""Evaluable electric field models for the trap.

Two variants are provided:

* :class:`IdealQuadrupoleField`, an analytic radial RF quadrupole with
  geometric factor kappa and a hard wall at the electrode radius, plus
  static twist/endcap quadrupoles.
* :class:`GridFieldMap`, a rectilinear grid of RF field amplitudes and
  static potential (for externally computed field data), interpolated
  at linear or cubic order.

Both expose the same interface: the amplitude vector of the oscillating
field ``rf_field``, the static field ``static_field``, a domain test
``contains``, and the time averaged pseudopotential machinery used by
the trap model.  Positions are arrays of shape ``(..., ndim)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .constants import IonSpecies


class OutOfDomainError(ValueError):
    """A position falls outside the field model's domain."""


class FieldMapFormatError(ValueError):
    """A field map file violates the expected layout."""


def _as_points(r, ndim):
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != ndim:
        raise ValueError(f"expected positions with last axis {ndim}, got shape {r.shape}")
    return r


class IdealQuadrupoleField:
    """Analytic quadrupole field in the radial (y, z) plane.

    The RF field amplitude is ``kappa * v_rf * r / d**2`` at radius r,
    directed along (y, -z).  Static terms model the twist quadrupole
    (same geometric factor as the RF) and the radial anti-curvature
    that accompanies endcap confinement (Laplace), converted from the
    axial calibration constant using the supplied ion.  An optional
    uniform stray field can be added to study displaced equilibria and
    excess micromotion.  The domain is a hard-wall disk of radius
    ``wall_radius`` (the ion-electrode distance by default).
    """

    ndim = 2

    def __init__(self, trap, ion: IonSpecies, wall_radius: float | None = None,
                 stray_field=(0.0, 0.0)):
        self.trap = trap
        self.ion = ion
        self.wall_radius = float(trap.d if wall_radius is None else wall_radius)
        if self.wall_radius <= 0:
            raise ValueError("wall_radius must be positive")
        self.stray_field = np.asarray(stray_field, dtype=float)
        if self.stray_field.shape != (2,):
            raise ValueError("stray_field must be a 2-vector (Ey, Ez)")
        # V/m per meter of displacement
        self._rf_gradient = trap.kappa * trap.v_rf / trap.d**2
        self._twist_gradient = trap.kappa * trap.v_twist / trap.d**2
        # endcap anti-curvature: phi'' = -(m/e) * omega_ax^2 / 2 per radial axis
        w_ax_sq = trap.axial_curvature_per_volt * trap.v_endcap
        self._anticurv = 0.5 * w_ax_sq * ion.mass / ion.charge

    @property
    def omega_rf(self) -> float:
        return self.trap.omega_rf

    def contains(self, r):
        r = _as_points(r, self.ndim)
        return np.linalg.norm(r, axis=-1) < self.wall_radius

    def rf_field(self, r):
        """Amplitude vector of the oscillating field, V/m."""
        r = _as_points(r, self.ndim)
        out = np.empty_like(r)
        out[..., 0] = self._rf_gradient * r[..., 0]
        out[..., 1] = -self._rf_gradient * r[..., 1]
        return out

    def rf_field_squared(self, r):
        r = _as_points(r, self.ndim)
        return self._rf_gradient**2 * np.sum(r * r, axis=-1)

    def static_potential(self, r):
        r = _as_points(r, self.ndim)
        y, z = r[..., 0], r[..., 1]
        return (0.5 * self._twist_gradient * (y**2 - z**2)
                + self._anticurv * (y**2 + z**2)
                - self.stray_field[0] * y - self.stray_field[1] * z)

    def static_field(self, r):
        r = _as_points(r, self.ndim)
        out = np.empty_like(r)
        out[..., 0] = -self._twist_gradient * r[..., 0] - 2.0 * self._anticurv * r[..., 0]
        out[..., 1] = +self._twist_gradient * r[..., 1] - 2.0 * self._anticurv * r[..., 1]
        return out + self.stray_field

    def rf_squared_gradient(self, r):
        """Gradient of |E_rf|^2, used by the pseudopotential force."""
        r = _as_points(r, self.ndim)
        return 2.0 * self._rf_gradient**2 * r


class GridFieldMap:
    """Rectilinear field map: RF amplitude vector and static potential.

    ``axes`` is a tuple of strictly increasing 1D coordinate arrays in
    meters, ``rf_amplitude`` has shape ``grid_shape + (ndim,)`` in V/m,
    ``static_potential`` has shape ``grid_shape`` in volts.  ``order``
    selects linear (1) or cubic Hermite (3, PCHIP) interpolation; both
    reproduce node values exactly.  The drive frequency must be
    supplied because the map itself stores only field amplitudes.
    """

    def __init__(self, axes, rf_amplitude, static_potential, omega_rf: float, order: int = 1):
        self.axes = tuple(np.asarray(ax, dtype=float) for ax in axes)
        self.ndim = len(self.axes)
        for ax in self.axes:
            if ax.ndim != 1 or len(ax) < 2 or np.any(np.diff(ax) <= 0):
                raise FieldMapFormatError("grid axes must be strictly increasing 1D arrays")
        shape = tuple(len(ax) for ax in self.axes)
        self.rf_amplitude = np.asarray(rf_amplitude, dtype=float)
        self.static_potential_grid = np.asarray(static_potential, dtype=float)
        if self.rf_amplitude.shape != shape + (self.ndim,):
            raise FieldMapFormatError(
                f"rf_amplitude shape {self.rf_amplitude.shape} != {shape + (self.ndim,)}")
        if self.static_potential_grid.shape != shape:
            raise FieldMapFormatError(
                f"static_potential shape {self.static_potential_grid.shape} != {shape}")
        if omega_rf <= 0 or not np.isfinite(omega_rf):
            raise ValueError("omega_rf must be positive and finite")
        self.omega_rf = float(omega_rf)
        if order not in (1, 3):
            raise ValueError("interpolation order must be 1 (linear) or 3 (cubic)")
        if order == 3 and any(len(ax) < 4 for ax in self.axes):
            raise ValueError("cubic interpolation needs at least 4 nodes per axis")
        self.order = order
        method = "linear" if order == 1 else "pchip"

        def interp(values):
            return RegularGridInterpolator(self.axes, values, method=method,
                                           bounds_error=True)

        self._rf_interp = [interp(self.rf_amplitude[..., k]) for k in range(self.ndim)]
        self._phi_interp = interp(self.static_potential_grid)
        # static field from -grad(phi), precomputed on the grid
        grads = np.gradient(self.static_potential_grid, *self.axes, edge_order=2)
        if self.ndim == 1:
            grads = [grads]
        self._efield_interp = [interp(-g) for g in grads]
        self._spacing = min(float(np.min(np.diff(ax))) for ax in self.axes)

    def contains(self, r):
        r = _as_points(r, self.ndim)
        ok = np.ones(r.shape[:-1], dtype=bool)
        for k, ax in enumerate(self.axes):
            ok &= (r[..., k] >= ax[0]) & (r[..., k] <= ax[-1])
        return ok

    def _eval(self, interps, r):
        r = _as_points(r, self.ndim)
        flat = r.reshape(-1, self.ndim)
        if not np.all(self.contains(flat)):
            raise OutOfDomainError("position outside the field map domain")
        cols = [itp(flat) for itp in interps]
        out = np.stack(cols, axis=-1)
        return out.reshape(r.shape[:-1] + (len(interps),))

    def rf_field(self, r):
        return self._eval(self._rf_interp, r)

    def rf_field_squared(self, r):
        e = self.rf_field(r)
        return np.sum(e * e, axis=-1)

    def static_potential(self, r):
        return self._eval([self._phi_interp], r)[..., 0]

    def static_field(self, r):
        return self._eval(self._efield_interp, r)

    def rf_squared_gradient(self, r):
        """Central-difference gradient of |E_rf|^2 on the interpolant."""
        r = _as_points(r, self.ndim)
        h = self._spacing / 16.0
        out = np.empty_like(r)
        for k in range(self.ndim):
            rp = r.copy()
            rm = r.copy()
            rp[..., k] += h
            rm[..., k] -= h
            # fall back to one-sided steps at the domain edge
            lo, hi = self.axes[k][0], self.axes[k][-1]
            rp[..., k] = np.minimum(rp[..., k], hi)
            rm[..., k] = np.maximum(rm[..., k], lo)
            out[..., k] = (self.rf_field_squared(rp) - self.rf_field_squared(rm)) \
                / (rp[..., k] - rm[..., k])
        return out


# --- field map file format -------------------------------------------------
#
# Delimited text, one node per row, row-major over the (monotone) axes.
# The header row names every column with a unit suffix, e.g. for a 2D map
#
#   y_m  z_m  erf_y_V_per_m  erf_z_V_per_m  phi_V
#
# Axis columns end in ``_m``, RF amplitude columns are ``erf_<axis>_V_per_m``
# and the static potential column is ``phi_V``.

_AXIS_SUFFIX = "_m"
_RF_PREFIX = "erf_"
_RF_SUFFIX = "_V_per_m"
_PHI_COLUMN = "phi_V"


def save_field_map(path, field_map: GridFieldMap):
    """Write a grid field map in the delimited text convention."""
    axes = field_map.axes
    names = [f"{n}{_AXIS_SUFFIX}" for n in _axis_names(len(axes))]
    names += [f"{_RF_PREFIX}{n}{_RF_SUFFIX}" for n in _axis_names(len(axes))]
    names += [_PHI_COLUMN]
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.reshape(-1) for m in mesh]
    cols += [field_map.rf_amplitude[..., k].reshape(-1) for k in range(len(axes))]
    cols += [field_map.static_potential_grid.reshape(-1)]
    data = np.column_stack(cols)
    np.savetxt(path, data, fmt="%.12g", delimiter="\t", header="\t".join(names),
               comments="")


def _axis_names(ndim):
    return {1: ["x"], 2: ["y", "z"], 3: ["x", "y", "z"]}[ndim]


def load_field_map(path, omega_rf: float, order: int = 1) -> GridFieldMap:
    """Load a delimited-text field map, validating layout and completeness."""
    with open(path) as fh:
        header = fh.readline().split()
    if not header:
        raise FieldMapFormatError("empty field map file")
    axis_cols = [i for i, n in enumerate(header) if n.endswith(_AXIS_SUFFIX)
                 and not n.startswith(_RF_PREFIX)]
    rf_cols = [i for i, n in enumerate(header)
               if n.startswith(_RF_PREFIX) and n.endswith(_RF_SUFFIX)]
    try:
        phi_col = header.index(_PHI_COLUMN)
    except ValueError:
        raise FieldMapFormatError(f"missing column {_PHI_COLUMN!r}") from None
    ndim = len(axis_cols)
    if ndim not in (1, 2, 3) or len(rf_cols) != ndim:
        raise FieldMapFormatError(
            f"expected matching axis and RF columns, got {len(axis_cols)} axes "
            f"and {len(rf_cols)} RF components")
    data = np.loadtxt(path, skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise FieldMapFormatError("row width does not match the header")
    axes = []
    for c in axis_cols:
        vals = np.unique(data[:, c])
        if len(vals) < 2:
            raise FieldMapFormatError("each axis needs at least two distinct nodes")
        axes.append(vals)
    shape = tuple(len(ax) for ax in axes)
    if data.shape[0] != int(np.prod(shape)):
        raise FieldMapFormatError(
            f"incomplete grid: {data.shape[0]} rows for shape {shape}")
    mesh = np.meshgrid(*axes, indexing="ij")
    for k, c in enumerate(axis_cols):
        if not np.array_equal(data[:, c], mesh[k].reshape(-1)):
            raise FieldMapFormatError(
                "rows are not in row-major order over monotone axes")
    rf = np.stack([data[:, c].reshape(shape) for c in rf_cols], axis=-1)
    phi = data[:, phi_col].reshape(shape)
    return GridFieldMap(axes, rf, phi, omega_rf=omega_rf, order=order)


def grid_map_from_field(field, axes, omega_rf=None, order: int = 1) -> GridFieldMap:
    """Sample any field model onto a rectilinear grid."""
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    rf = field.rf_field(mesh)
    phi = field.static_potential(mesh)
    return GridFieldMap(axes, rf, phi,
                        omega_rf=field.omega_rf if omega_rf is None else omega_rf,
                        order=order)
