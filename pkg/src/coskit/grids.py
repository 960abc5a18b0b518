"""Discrete charts: flat 3-torus and twisted mapping-torus grids.

Conventions used across the package:

* Coordinate order is ``(t, x, y)``; axis 0 of every field array is the
  fiber coordinate ``t``, axes 1 and 2 are the torus coordinates.
* Fields are sampled on the half-open fundamental domain: ``t_k = k/M``
  for ``k = 0..M-1`` and ``x_i = i/N``, ``y_j = j/N``.
* A mapping torus identifies ``(p, t+1) ~ (L p, t)``, so a scalar field
  on the quotient satisfies ``f(x, 1) = f(L x, 0)``.  All seam logic is
  centralized in :func:`shift` / :func:`partial_derivative`; stencils
  that reach past the seam fetch values at the monodromy-permuted torus
  point and transform tensor slots with the gluing Jacobian
  ``A = diag(1, L)`` (one factor per slot, see :func:`seam_transport`).
* Tensor slot signatures are strings over ``{'u', 'd'}``: one character
  per tensor slot in storage order, ``'u'`` contravariant, ``'d'``
  covariant.  A metric is ``'dd'``, a vector field ``'u'``, the tensor
  ``phi^i_j`` is ``'ud'`` with the upper slot first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IDENTITY_2X2 = np.eye(2, dtype=np.int64)

# 4th-order centered first derivative: f'_k ~ sum_s c_s f_{k+s} / h
_CENTERED_OFFSETS = (-2, -1, 1, 2)
_CENTERED_COEFFS = (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0)

# 4th-order one-sided rows for open (non-periodic) axes, as
# (row index from boundary, offsets, coefficients*12).
_ONESIDED_ROWS = (
    (0, (0, 1, 2, 3, 4), (-25.0, 48.0, -36.0, 16.0, -3.0)),
    (1, (-1, 0, 1, 2, 3), (-3.0, -10.0, 18.0, -6.0, 1.0)),
)


class GridError(ValueError):
    """Invalid grid specification or illegal grid operation."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the flat 3-torus, a mapping torus, or a t-box.

    Parameters
    ----------
    n_torus : points per torus direction (spacing 1/N, periodic).
    n_fiber : points along t.
    monodromy : 2x2 integer matrix applied at the t = 1 seam; the
        identity gives the flat 3-torus.  Must have determinant +1 so
        the quotient carries an orientation (and a cosymplectic
        structure).
    open_t : if True the t-axis is a non-periodic interval
        ``[t_min, t_min + t_extent]`` sampled at M points including both
        endpoints; derivatives use one-sided 4th-order stencils at the
        boundary.  Used for local (non-compact) charts such as the Sol
        model box.  ``monodromy`` must be the identity in that case.
    """

    n_torus: int
    n_fiber: int
    monodromy: np.ndarray = field(default_factory=lambda: IDENTITY_2X2.copy())
    open_t: bool = False
    t_min: float = 0.0
    t_extent: float = 1.0

    def __post_init__(self):
        if self.n_torus < 5 or self.n_fiber < 5:
            raise GridError("need at least 5 points per axis for the 4th-order stencil")
        mono = np.asarray(self.monodromy, dtype=np.int64)
        if mono.shape != (2, 2):
            raise GridError(f"monodromy must be 2x2, got shape {mono.shape}")
        det = int(round(np.linalg.det(mono.astype(float))))
        if det != 1:
            raise GridError(f"monodromy must have determinant 1, got {det}")
        if self.open_t and not np.array_equal(mono, IDENTITY_2X2):
            raise GridError("open-t box charts cannot carry a nontrivial monodromy")
        if not self.open_t and (self.t_min != 0.0 or self.t_extent != 1.0):
            raise GridError("periodic/twisted t-axis must be the unit interval [0, 1)")
        object.__setattr__(self, "monodromy", mono)

    # -- geometry -----------------------------------------------------

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_fiber, self.n_torus, self.n_torus)

    @property
    def is_flat(self) -> bool:
        return np.array_equal(self.monodromy, IDENTITY_2X2)

    @property
    def spacing(self) -> tuple[float, float, float]:
        if self.open_t:
            ht = self.t_extent / (self.n_fiber - 1)
        else:
            ht = 1.0 / self.n_fiber
        return (ht, 1.0 / self.n_torus, 1.0 / self.n_torus)

    @property
    def t(self) -> np.ndarray:
        """Fiber coordinate of each t-slab, shape (M, 1, 1) for broadcasting."""
        ht = self.spacing[0]
        return (self.t_min + ht * np.arange(self.n_fiber)).reshape(-1, 1, 1)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (t, x, y) coordinate arrays."""
        n, m = self.n_torus, self.n_fiber
        ht = self.spacing[0]
        t = (self.t_min + ht * np.arange(m)).reshape(m, 1, 1)
        x = (np.arange(n) / n).reshape(1, n, 1)
        y = (np.arange(n) / n).reshape(1, 1, n)
        return t, x, y

    @property
    def gluing_jacobian(self) -> np.ndarray:
        """3x3 differential A = diag(1, L) of the gluing (p, t+1) -> (Lp, t)."""
        a = np.eye(3)
        a[1:, 1:] = self.monodromy
        return a

    def _torus_permutation(self, mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays realizing (i, j) -> mat @ (i, j) mod N on the torus grid."""
        n = self.n_torus
        i = np.arange(n).reshape(n, 1)
        j = np.arange(n).reshape(1, n)
        pi = (mat[0, 0] * i + mat[0, 1] * j) % n
        pj = (mat[1, 0] * i + mat[1, 1] * j) % n
        return pi, pj

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.n_torus * factor, self.n_fiber * factor, self.monodromy.copy(),
                    self.open_t, self.t_min, self.t_extent)


def grid_from_config(cfg: dict) -> Grid:
    """Build a grid from config keys n_torus, n_fiber, monodromy (row-major)."""
    known = {"n_torus", "n_fiber", "monodromy"}
    unknown = set(cfg) - known
    if unknown:
        raise GridError(f"unknown grid config keys: {sorted(unknown)}")
    mono = cfg.get("monodromy", [1, 0, 0, 1])
    if len(mono) != 4:
        raise GridError("monodromy must be 4 integers, row-major")
    return Grid(int(cfg["n_torus"]), int(cfg["n_fiber"]),
                np.asarray(mono, dtype=np.int64).reshape(2, 2))


# -- seam transport ----------------------------------------------------

def _apply_slot(data: np.ndarray, mat: np.ndarray, slot: int) -> np.ndarray:
    """Contract a 3x3 matrix into tensor slot `slot` (0-based, after grid axes)."""
    axis = 3 + slot
    moved = np.moveaxis(data, axis, -1)
    return np.moveaxis(moved @ mat.T, -1, axis)


def seam_transport(components: np.ndarray, index_sig: str, grid: Grid,
                   inverse: bool = False) -> np.ndarray:
    """Transform tensor components across the t = 1 seam.

    Applies the gluing differential ``A = diag(1, L)`` once per
    contravariant slot and its inverse-transpose once per covariant slot
    (the contraction-preserving pushforward).  A scalar passes through
    unchanged; on the eigenvector ``w_+`` of L this is multiplication by
    ``lambda``, on the dual covector it is multiplication by
    ``1/lambda``.  With ``inverse=True`` the round trip is the identity.
    """
    a = grid.gluing_jacobian
    if inverse:
        a = np.linalg.inv(a)
    a_inv_t = np.linalg.inv(a).T
    out = np.asarray(components, dtype=float)
    for slot, kind in enumerate(index_sig):
        out = _apply_slot(out, a if kind == "u" else a_inv_t, slot)
    return out


# -- shifted views with twisted wrap ------------------------------------

def shift(data: np.ndarray, index_sig: str, grid: Grid, axis: int, s: int) -> np.ndarray:
    """Values of a seam-compatible field at grid points offset by s along axis.

    Result[k] = field at index k + s, wrapping periodically on torus
    axes and through the monodromy on the fiber axis.  A field on the
    quotient satisfies v(x, t+1) = A^{-1} v(Lx, t) per contravariant
    slot (A^T per covariant slot), so the wrapped slab is fetched at the
    permuted torus point and transformed accordingly.
    """
    if axis in (1, 2):
        return np.roll(data, -s, axis=axis)
    if axis != 0:
        raise GridError(f"axis out of range: {axis}")
    if grid.open_t:
        raise GridError("open t-axis has no wrap; use partial_derivative")
    m = grid.n_fiber
    out = np.roll(data, -s, axis=0)
    if s == 0 or grid.is_flat:
        return out
    a = grid.gluing_jacobian
    if s > 0:
        # rows M-s..M-1 need values from t in [1, 1+s/M)
        pi, pj = grid._torus_permutation(grid.monodromy)
        slab = data[:s][:, pi, pj]
        mat_u, mat_d = np.linalg.inv(a), a.T
        lo = m - s
        sl = slice(lo, m)
    else:
        # rows 0..|s|-1 need values from t in [-|s|/M, 0)
        lmat = np.array([[grid.monodromy[1, 1], -grid.monodromy[0, 1]],
                         [-grid.monodromy[1, 0], grid.monodromy[0, 0]]], dtype=np.int64)
        pi, pj = grid._torus_permutation(lmat)
        slab = data[s:][:, pi, pj]
        mat_u, mat_d = a, np.linalg.inv(a).T
        sl = slice(0, -s)
    for slot, kind in enumerate(index_sig):
        slab = _apply_slot(slab, mat_u if kind == "u" else mat_d, slot)
    out[sl] = slab
    return out


def partial_derivative(data: np.ndarray, index_sig: str, grid: Grid, axis: int) -> np.ndarray:
    """Componentwise 4th-order partial derivative along a coordinate axis.

    The stencil wraps through the monodromy at the t-seam and plain
    periodicity on the torus axes; open t-axes use one-sided 4th-order
    rows at the boundary.  The raw component derivative is returned; it
    is only seam-compatible as part of covariant combinations (exterior
    derivative, Lie derivative, Christoffel symbols, ...), which is how
    the rest of the package consumes it.
    """
    if axis not in (0, 1, 2):
        raise GridError(f"axis out of range: {axis}")
    h = grid.spacing[axis]
    if axis == 0 and grid.open_t:
        return _open_axis_derivative(data, h)
    # paired differences: exact zero on constants (shifts are value bijections)
    d1 = shift(data, index_sig, grid, axis, 1) - shift(data, index_sig, grid, axis, -1)
    d2 = shift(data, index_sig, grid, axis, 2) - shift(data, index_sig, grid, axis, -2)
    return (8.0 * d1 - d2) / (12.0 * h)


def _open_axis_derivative(data: np.ndarray, h: float) -> np.ndarray:
    m = data.shape[0]
    out = np.zeros_like(data, dtype=float)
    for off, c in zip(_CENTERED_OFFSETS, _CENTERED_COEFFS):
        out[2:m - 2] += c * data[2 + off: m - 2 + off]
    for row, offs, coeffs in _ONESIDED_ROWS:
        for off, c in zip(offs, coeffs):
            out[row] += (c / 12.0) * data[row + off]
            out[m - 1 - row] += (-c / 12.0) * data[m - 1 - row - off]
    return out / h


# -- quadrature ---------------------------------------------------------

def integrate(values: np.ndarray, density: np.ndarray, grid: Grid) -> float:
    """Integral of a scalar against a top form given by its (t,x,y)-density.

    The manifold is oriented by the supplied form, so the result equals
    the plain sum of ``values * |density|`` times the coordinate cell
    volume.  On smooth periodic data this trapezoid-type rule is
    spectrally accurate.  Raises if the density vanishes or changes sign
    anywhere.
    """
    dens = np.broadcast_to(np.asarray(density, dtype=float), grid.shape)
    vals = np.broadcast_to(np.asarray(values, dtype=float), grid.shape)
    if np.any(dens == 0.0):
        raise GridError("volume density vanishes at a grid point")
    if dens.max() > 0 > dens.min():
        raise GridError("volume density changes sign")
    ht, hx, hy = grid.spacing
    weighted = vals * np.abs(dens)
    if grid.open_t:
        wt = np.ones(grid.n_fiber)
        wt[0] = wt[-1] = 0.5
        return float(np.sum(weighted * wt.reshape(-1, 1, 1)) * ht * hx * hy)
    return float(np.sum(weighted) * ht * hx * hy)


def grid_sum(values: np.ndarray, grid: Grid) -> float:
    """Plain cell-weighted sum; the discrete divergence-theorem primitive."""
    ht, hx, hy = grid.spacing
    return float(np.sum(values) * ht * hx * hy)
