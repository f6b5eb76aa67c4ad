"""
Right-hand sides of the fourth-order dispersive curve flow.

The flow is

    u_t = a J D^3 u_x + (lambda + b <u_x, u_x>) J D u_x + c <D u_x, u_x> J u_x

with J the tangent-plane rotation and D the covariant derivative along
the curve.  On the unit sphere the same flow has a pure cross-product
form whose coefficients map (a, b, c) -> (a, a+b, 5a+c); both forms are
implemented so their agreement is a test, not an assumption.  The
parabolic regularization replaces a J by (-eps + a J) in the leading
term.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import Curve, TangentField, UnitSphere, covariant_chain


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


@dataclass(frozen=True)
class FlowParams:
    """
    Flow constants.

    ``a`` weighs the fourth-order dispersion (zero only for the pure
    Schroedinger-map limit), ``b`` and ``c`` the cubic terms, ``lam`` the
    second-order term.  ``eps`` in [0, 1] is the parabolic regularization
    strength and ``S`` the sectional curvature of the bound target.
    """

    a: float
    b: float
    c: float
    lam: float
    eps: float = 0.0
    S: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")

    def with_target(self, target):
        """Copy with S replaced by the target's constant curvature."""
        if target.constant_curvature is None:
            raise ValueError(
                f"target {target.kind!r} has no constant curvature to bind"
            )
        return replace(self, S=float(target.constant_curvature))

    def with_eps(self, eps):
        return replace(self, eps=float(eps))


PRESETS = {
    "schrodinger-map": (FlowParams(0.0, 0.0, 0.0, 1.0), "a = b = c = 0, lambda = 1"),
    "integrable": (FlowParams(1.0, 1.5, 0.0, 1.0), "c = 0, 3a - 2b = 0, lambda = 1"),
    "heisenberg-biquadratic": (FlowParams(1.0, 2.0, 1.0, 1.0), "3a - 2b + c = 0, lambda = 1"),
    "anco-myrzakulov": (FlowParams(-1.0, -1.0, -0.5, 0.0), "a = b = -1, c = -1/2, lambda = 0"),
}


def preset(name):
    """Named parameter set (eps = 0)."""
    try:
        return PRESETS[name][0]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None


def preset_constraint(name):
    return PRESETS[name][1]


def _dealias(grid, values, enabled):
    return grid.dealias(values) if enabled else values


def _covariant_rhs_values(grid, target, params, points, eps, dealias=False):
    # Shared evaluation path: the regularized flow at eps = 0 is
    # bit-identical to the dispersive flow because the eps branch is
    # simply skipped.  Scalar coefficients are formed first, then
    # multiplied, for reproducibility.
    ux, w1, w2, w3 = covariant_chain(target, grid, points, 3)
    coef_second = params.lam + params.b * _dot(ux, ux)
    coef_zeroth = params.c * _dot(w1, ux)
    out = (
        params.a * target.jmul(points, w3)
        + coef_second[:, None] * target.jmul(points, w1)
        + coef_zeroth[:, None] * target.jmul(points, ux)
    )
    if eps != 0.0:
        out = out - eps * w3
    return _dealias(grid, out, dealias)


def rhs_intrinsic_values(grid, target, params, points, dealias=False):
    """Covariant-form right-hand side on raw point arrays."""
    return _covariant_rhs_values(grid, target, params, points, 0.0, dealias)


def rhs_regularized_values(grid, target, params, points, dealias=False):
    """Regularized right-hand side; eps comes from the params."""
    return _covariant_rhs_values(grid, target, params, points, params.eps, dealias)


def rhs_extrinsic_sphere_values(grid, params, points, dealias=False):
    """
    Cross-product form on the unit sphere,

        u_t = u x [a u_xxxx + (lambda + (a+b)|u_x|^2) u_xx + (5a+c)(u_xx, u_x) u_x],

    evaluated with plain spectral derivatives of the ambient components.
    One forward transform and one stacked inverse transform per call.
    """
    n = grid.n
    spec = np.fft.rfft(points, axis=0)
    ik = 1j * grid._kr
    ik_odd = ik.copy()
    ik_odd[-1] = 0.0
    mults = np.stack([ik_odd, ik**2, ik**4])[:, :, None]
    ux, uxx, uxxxx = np.fft.irfft(mults * spec[None], n, axis=1)
    coef_second = params.lam + (params.a + params.b) * _dot(ux, ux)
    coef_first = (5.0 * params.a + params.c) * _dot(uxx, ux)
    bracket = params.a * uxxxx + coef_second[:, None] * uxx + coef_first[:, None] * ux
    return _dealias(grid, np.cross(points, bracket), dealias)


def rhs_intrinsic(params, target, curve):
    """Covariant-form right-hand side as a tangent field."""
    values = rhs_intrinsic_values(curve.grid, target, params, curve.points)
    return TangentField(curve.grid, values, curve)


def rhs_regularized(params, target, curve):
    """Regularized right-hand side (eps > 0 adds fourth-order dissipation)."""
    values = rhs_regularized_values(curve.grid, target, params, curve.points)
    return TangentField(curve.grid, values, curve)


def rhs_extrinsic_sphere(params, curve):
    """Cross-product right-hand side; curve must lie on the unit sphere."""
    if curve.points.shape[1] != 3:
        raise ValueError("the cross-product form needs curves in R^3")
    values = rhs_extrinsic_sphere_values(curve.grid, params, curve.points)
    return TangentField(curve.grid, values, Curve(curve.grid, curve.points))


RHS_KINDS = ("intrinsic", "extrinsic-sphere", "regularized")


def evaluate_rhs_values(kind, grid, target, params, points, dealias=False):
    """Dispatch a right-hand-side evaluation on raw arrays."""
    if kind == "intrinsic":
        return rhs_intrinsic_values(grid, target, params, points, dealias)
    if kind == "regularized":
        return rhs_regularized_values(grid, target, params, points, dealias)
    if kind == "extrinsic-sphere":
        if not isinstance(target, UnitSphere):
            raise ValueError(
                f"the cross-product form is defined on the unit sphere, not {target.kind!r}"
            )
        return rhs_extrinsic_sphere_values(grid, params, points, dealias)
    raise ValueError(f"unknown rhs kind {kind!r}; expected one of {RHS_KINDS}")
