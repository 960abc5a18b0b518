"""Cosymplectic and R-invariant almost cosymplectic structures.

A structure is a pair (alpha, beta) of a 1-form and a 2-form with
alpha ^ beta nowhere zero, together with its Reeb field R (alpha(R) = 1,
beta(R, .) = 0).  A compatible metric g carries the derived (1,1)
tensor phi with

    phi^2 = -1 + alpha (x) R,   beta = g(., phi .),   alpha = g(R, .),

where phi is recovered from the metric as phi = g^{-1} beta, i.e.
phi^k_j = g^{kl} beta_{lj} (beta's first slot is the contracted one).
Certification evaluates all defining and derived identities and returns
their sup-norm residuals; nothing downstream trusts a metric that did
not pass through the certifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensors
from .grids import Grid, integrate
from .tensors import Connection, TensorField, christoffel, exterior_derivative, \
    hodge_star, inverse_metric, lie_derivative

FLAVORS = ("cosymplectic", "contact", "general_r_invariant")


class StructureError(ValueError):
    pass


@dataclass
class Structure:
    """Almost cosymplectic structure (alpha, beta) with Reeb field on a chart."""

    grid: Grid
    alpha: TensorField
    beta: TensorField
    reeb: TensorField
    flavor: str = "cosymplectic"

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise StructureError(f"unknown flavor {self.flavor!r}")

    @property
    def volume_density(self) -> np.ndarray:
        """(alpha ^ beta)(d_t, d_x, d_y); its sign fixes the orientation."""
        a, b = self.alpha.data, self.beta.data
        return (a[..., 0] * b[..., 1, 2] + a[..., 1] * b[..., 2, 0]
                + a[..., 2] * b[..., 0, 1])

    @property
    def orientation(self) -> float:
        dens = self.volume_density
        if dens.max() > 0 > dens.min() or np.any(dens == 0):
            raise StructureError("alpha ^ beta is not a volume form on this chart")
        return 1.0 if dens.flat[0] > 0 else -1.0

    def integrate(self, scalar: np.ndarray) -> float:
        return integrate(scalar, self.volume_density, self.grid)

    def residuals(self) -> dict[str, float]:
        """Sup-norm residuals of the structure's defining identities."""
        out = {
            "alpha_of_reeb": float(np.max(np.abs(
                np.einsum("...i,...i->...", self.alpha.data, self.reeb.data) - 1.0))),
            "reeb_in_kernel_of_beta": float(np.max(np.abs(
                np.einsum("...ij,...i->...j", self.beta.data, self.reeb.data)))),
        }
        if self.flavor == "cosymplectic":
            out["d_alpha"] = _sup(exterior_derivative(self.alpha).data)
            out["d_beta"] = _sup(exterior_derivative(self.beta).data)
        elif self.flavor == "contact":
            out["beta_minus_d_alpha"] = _sup(
                self.beta.data - exterior_derivative(self.alpha).data)
        else:
            out["lie_reeb_alpha"] = _sup(lie_derivative(self.alpha, self.reeb).data)
            out["lie_reeb_beta"] = _sup(lie_derivative(self.beta, self.reeb).data)
        return out


def _sup(a: np.ndarray) -> float:
    return float(np.max(np.abs(a)))


def reeb_field(alpha: TensorField, beta: TensorField) -> TensorField:
    """Solve alpha(R) = 1, beta(R, .) = 0 pointwise.

    In dimension 3 the kernel of the antisymmetric beta is spanned by
    ker^k = (1/2) eps^{kij} beta_{ij}; normalizing by alpha(ker) (which
    equals the alpha ^ beta density, nonzero by assumption) gives R.
    """
    b = beta.data
    ker = np.stack([b[..., 1, 2], b[..., 2, 0], b[..., 0, 1]], axis=-1)
    dens = np.einsum("...i,...i->...", alpha.data, ker)
    if np.min(np.abs(dens)) < 1e-14:
        raise StructureError("alpha ^ beta degenerate: Reeb system singular at a point")
    return TensorField(alpha.grid, ker / dens[..., None], "u", alpha.frame)


@dataclass
class CompatibleMetric:
    """A certified compatible metric with its derived (1,1) tensor phi."""

    structure: Structure
    g: TensorField
    phi: TensorField
    certificate: dict[str, float]
    _connection: Connection | None = field(default=None, repr=False)

    @property
    def grid(self) -> Grid:
        return self.structure.grid

    @property
    def ginv(self) -> np.ndarray:
        return inverse_metric(self.g.data)

    @property
    def connection(self) -> Connection:
        if self._connection is None:
            self._connection = christoffel(self.g)
        return self._connection

    def h_tensor(self) -> TensorField:
        """h = (1/2) L_R phi; symmetric, anticommutes with phi, kills R."""
        lphi = lie_derivative(self.phi, self.structure.reeb)
        return TensorField(self.grid, 0.5 * lphi.data, "ud", self.phi.frame)

    def max_residual(self, keys=None) -> float:
        keys = keys or self.certificate.keys()
        return max(self.certificate[k] for k in keys)


# identities in the certificate that are pointwise algebra (no stencils)
ALGEBRAIC_CERT_KEYS = (
    "phi_squared", "beta_from_g_phi", "alpha_metric_dual", "reeb_unit_norm",
    "alpha_circ_phi", "phi_of_reeb", "hodge_alpha_beta", "metric_reconstruction",
)


def certify_compatible(structure: Structure, g: TensorField) -> CompatibleMetric:
    """Derive phi from g and evaluate every compatibility identity.

    Returns the metric packaged with a certificate mapping identity
    names to sup-norm residuals.  Raises only for structurally unusable
    input (g not symmetric positive definite); interpretation of the
    residuals is left to the caller.
    """
    tensors.check_positive_definite(g.data)
    if _sup(g.data - np.swapaxes(g.data, -1, -2)) > 1e-12 * max(1.0, _sup(g.data)):
        raise StructureError("metric is not symmetric")
    grid = structure.grid
    alpha, beta, reeb = structure.alpha.data, structure.beta.data, structure.reeb.data
    ginv = inverse_metric(g.data)
    phi = np.einsum("...kl,...lj->...kj", ginv, beta)

    phi2 = np.einsum("...ik,...kj->...ij", phi, phi)
    proj = -np.eye(3) + np.einsum("...j,...i->...ij", alpha, reeb)
    r_low = np.einsum("...ij,...j->...i", g.data, reeb)
    r_norm = np.sqrt(np.einsum("...i,...i->...", r_low, reeb))
    g_phiphi = np.einsum("...kl,...ki,...lj->...ij", g.data, phi, phi)

    cert = {
        "phi_squared": _sup(phi2 - proj),
        "beta_from_g_phi": _sup(beta - np.einsum("...ik,...kj->...ij", g.data, phi)),
        "alpha_metric_dual": _sup(alpha - r_low),
        "reeb_unit_norm": _sup(r_norm - 1.0),
        "alpha_circ_phi": _sup(np.einsum("...i,...ij->...j", alpha, phi)),
        "phi_of_reeb": _sup(np.einsum("...ij,...j->...i", phi, reeb)),
        "metric_reconstruction": _sup(
            g.data - g_phiphi - np.einsum("...i,...j->...ij", alpha, alpha)),
        "hodge_alpha_beta": _sup(
            hodge_star(structure.alpha, g.data, structure.orientation).data - beta),
    }
    if structure.flavor != "cosymplectic":
        dalpha = exterior_derivative(structure.alpha).data
        anti = (np.einsum("...kj,...ki->...ij", dalpha, phi)
                + np.einsum("...ik,...kj->...ij", dalpha, phi))
        cert["d_alpha_phi_antisymmetry"] = _sup(anti)
    return CompatibleMetric(structure, g,
                            TensorField(grid, phi, "ud", g.frame), cert)


def d_alpha_plus(metric: CompatibleMetric) -> TensorField:
    """(1,1) metric dual of d alpha: g(., dalpha+ .) = d alpha.

    Vanishes on cosymplectic charts and equals phi on contact charts.
    """
    dalpha = exterior_derivative(metric.structure.alpha).data
    plus = np.einsum("...kl,...lj->...kj", metric.ginv, dalpha)
    return TensorField(metric.grid, plus, "ud", metric.g.frame)


# -- polar-decomposition metric builder -----------------------------------

_KEPT_AXES = np.array([[1, 2], [0, 2], [0, 1]])


def polar_compatible_metric(structure: Structure, k: TensorField) -> CompatibleMetric:
    """Compatible metric from an arbitrary metric by pointwise polar splitting.

    On ker(alpha) the 2-form defines an operator A by beta = k(., A .);
    A is k-antisymmetric, so S = (-A^2)^{1/2} is k-symmetric positive
    and J = A S^{-1} is a complex structure.  The output restricts to
    g = k(., S .) on ker(alpha) (the polar 'stretch' factor of A), is
    alpha (x) alpha in the Reeb direction, and has phi = J on
    ker(alpha).  The postcondition is that certification passes; when k
    is already compatible, A = phi gives S = 1 and the metric returns
    unchanged.
    """
    tensors.check_positive_definite(k.data)
    grid = structure.grid
    alpha, reeb = structure.alpha.data, structure.reeb.data

    drop = np.argmax(np.abs(alpha), axis=-1)
    kept = _KEPT_AXES[drop]                                    # (..., 2)
    cand = np.eye(3) - np.einsum("...i,...a->...ia", reeb, alpha)
    idx = np.broadcast_to(kept[..., None, :], kept.shape[:-1] + (3, 2))
    b = np.take_along_axis(cand, idx, axis=-1)                 # (..., 3, 2)

    k_hat = np.einsum("...ia,...ij,...jb->...ab", b, k.data, b)
    b_hat = np.einsum("...ia,...ij,...jb->...ab", b, structure.beta.data, b)
    w = b_hat[..., 0, 1]
    if np.min(np.abs(w)) < 1e-14:
        raise StructureError("beta degenerate on ker(alpha): polar operator singular")

    a_op = np.linalg.inv(k_hat) @ b_hat
    p = -(a_op @ a_op)
    detp = p[..., 0, 0] * p[..., 1, 1] - p[..., 0, 1] * p[..., 1, 0]
    sdet = np.sqrt(detp)
    trp = p[..., 0, 0] + p[..., 1, 1]
    denom = np.sqrt(trp + 2.0 * sdet)
    s = (p + sdet[..., None, None] * np.eye(2)) / denom[..., None, None]

    g_hat = k_hat @ s
    g_hat = 0.5 * (g_hat + np.swapaxes(g_hat, -1, -2))

    frame = np.concatenate([reeb[..., None], b], axis=-1)      # columns (R, b0, b1)
    coframe = np.linalg.inv(frame)                             # rows dual to frame
    block = np.zeros(grid.shape + (3, 3))
    block[..., 0, 0] = 1.0
    block[..., 1:, 1:] = g_hat
    g = np.einsum("...ai,...ab,...bj->...ij", coframe, block, coframe)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    return certify_compatible(structure, TensorField(grid, g, "dd", k.frame))
