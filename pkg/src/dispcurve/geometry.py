"""
Target surfaces and the tangent-space calculus of curves on them.

Everything is represented extrinsically: a curve is its array of ambient
sample points, a tangent field is an ambient vector per node, and the
covariant derivative is the tangent projection of the spectral
derivative.  Supported targets are the unit sphere (curvature 1), the
flat torus (curvature 0, represented in the plane since only derivatives
of the curve are ever consumed), and ellipsoids (variable curvature, the
deliberate counterexample for the curvature-obstruction diagnostic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid

CONSTRAINT_TOL = 1e-12
ON_SURFACE_TOL = 1e-8


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


class UnitSphere:
    """Canonical unit sphere in R^3 with outward normal u."""

    kind = "sphere"
    ambient_dim = 3
    constant_curvature = 1.0

    def unit_normal(self, points):
        return points / np.linalg.norm(points, axis=-1, keepdims=True)

    def project(self, points, vectors):
        return vectors - _dot(vectors, points)[:, None] * points

    def jmul(self, points, vectors):
        return np.cross(points, vectors)

    def curvature(self, points):
        return np.ones(points.shape[0])

    def constraint_values(self, points):
        return np.linalg.norm(points, axis=-1) - 1.0

    def renormalize(self, points):
        return points / np.linalg.norm(points, axis=-1, keepdims=True)

    def __repr__(self):
        return "UnitSphere()"

    def __eq__(self, other):
        return isinstance(other, UnitSphere)


class FlatTorus:
    """Flat 2-torus; curves carry planar representatives, projection is trivial."""

    kind = "flat-torus"
    ambient_dim = 2
    constant_curvature = 0.0

    def unit_normal(self, points):
        raise ValueError("the flat torus has no ambient normal")

    def project(self, points, vectors):
        return np.array(vectors, dtype=float, copy=True)

    def jmul(self, points, vectors):
        return np.stack([-vectors[:, 1], vectors[:, 0]], axis=1)

    def curvature(self, points):
        return np.zeros(points.shape[0])

    def constraint_values(self, points):
        return np.zeros(points.shape[0])

    def renormalize(self, points):
        return np.array(points, dtype=float, copy=True)

    def __repr__(self):
        return "FlatTorus()"

    def __eq__(self, other):
        return isinstance(other, FlatTorus)


class Ellipsoid:
    """
    Ellipsoid x^2/p^2 + y^2/q^2 + z^2/r^2 = 1 with semi-axes (p, q, r).

    Gaussian curvature comes from the closed form for a level-set
    surface, K = (grad(phi)^T adj(Hess(phi)) grad(phi)) / |grad(phi)|^4,
    which for this quadric reduces to
    1 / (p^2 q^2 r^2 (x^2/p^4 + y^2/q^4 + z^2/r^4)^2).
    """

    kind = "ellipsoid"
    ambient_dim = 3
    constant_curvature = None

    def __init__(self, p, q, r):
        if min(p, q, r) <= 0:
            raise ValueError(f"semi-axes must be positive, got {(p, q, r)}")
        self.semi_axes = (float(p), float(q), float(r))
        self._inv_sq = np.array([p, q, r], dtype=float) ** -2

    def level(self, points):
        return np.einsum("ij,j->i", points**2, self._inv_sq) - 1.0

    def level_gradient(self, points):
        return 2.0 * points * self._inv_sq

    def unit_normal(self, points):
        g = self.level_gradient(points)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def project(self, points, vectors):
        nu = self.unit_normal(points)
        return vectors - _dot(vectors, nu)[:, None] * nu

    def jmul(self, points, vectors):
        return np.cross(self.unit_normal(points), vectors)

    def curvature(self, points):
        p, q, r = self.semi_axes
        w = np.einsum("ij,j->i", points**2, self._inv_sq**2)
        return 1.0 / (p**2 * q**2 * r**2 * w**2)

    def constraint_values(self, points):
        return self.level(points)

    def renormalize(self, points):
        # Newton steps along grad(phi); quadratic convergence, a couple
        # of iterations collapse any residual the integrator produces.
        out = np.array(points, dtype=float, copy=True)
        for _ in range(25):
            phi = self.level(out)
            if np.max(np.abs(phi)) <= 1e-15:
                break
            g = self.level_gradient(out)
            out = out - (phi / _dot(g, g))[:, None] * g
        return out

    def __repr__(self):
        return f"Ellipsoid{self.semi_axes}"

    def __eq__(self, other):
        return isinstance(other, Ellipsoid) and other.semi_axes == self.semi_axes


def make_target(kind, semi_axes=None):
    if kind == "sphere":
        return UnitSphere()
    if kind == "flat-torus":
        return FlatTorus()
    if kind == "ellipsoid":
        if semi_axes is None:
            raise ValueError("ellipsoid target needs semi_axes (p, q, r)")
        return Ellipsoid(*semi_axes)
    raise ValueError(f"unknown target kind {kind!r}")


@dataclass(frozen=True)
class Curve:
    """A closed curve sampled on a grid: one ambient point per node."""

    grid: Grid
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] != self.grid.n:
            raise ValueError(
                f"curve points must have shape ({self.grid.n}, d), got {pts.shape}"
            )
        object.__setattr__(self, "points", pts)

    def derivative(self, order=1):
        return self.grid.derivative(self.points, order)


@dataclass(frozen=True)
class TangentField:
    """A tangent vector per node along a base curve."""

    grid: Grid
    vectors: np.ndarray
    base: Curve

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=float)
        if vec.shape != self.base.points.shape:
            raise ValueError(
                f"tangent field shape {vec.shape} does not match curve "
                f"shape {self.base.points.shape}"
            )
        object.__setattr__(self, "vectors", vec)


def check_on_target(target, curve, tol=CONSTRAINT_TOL):
    """Max constraint residual of the curve; raises if it exceeds tol."""
    res = float(np.max(np.abs(target.constraint_values(curve.points))))
    if res > tol:
        raise ValueError(
            f"curve violates the {target.kind} constraint by {res:.3e} (tol {tol:.1e})"
        )
    return res


def project_tangent(target, curve, vectors):
    """Pointwise orthogonal projection of an ambient field onto the tangent planes."""
    values = vectors.vectors if isinstance(vectors, TangentField) else np.asarray(vectors, dtype=float)
    return TangentField(curve.grid, target.project(curve.points, values), curve)


def complex_structure(target, curve, field):
    """Rotation by pi/2 in each tangent plane (cross product with the normal)."""
    return TangentField(curve.grid, target.jmul(curve.points, field.vectors), curve)


def covariant_derivative(target, curve, field, order=1):
    """Tangent projection of the spectral derivative, applied ``order`` times."""
    if order < 1:
        raise ValueError(f"covariant derivative order must be >= 1, got {order}")
    values = field.vectors
    for _ in range(order):
        values = target.project(curve.points, curve.grid.derivative(values, 1))
    return TangentField(curve.grid, values, curve)


def covariant_chain(target, grid, points, max_order):
    """
    Raw-array covariant derivatives of the velocity field.

    Returns ``[u_x, D u_x, D^2 u_x, ..., D^max_order u_x]`` where ``D`` is
    projection composed with the spectral derivative.
    """
    ux = grid.derivative(points, 1)
    chain = [ux]
    for _ in range(max_order):
        chain.append(target.project(points, grid.derivative(chain[-1], 1)))
    return chain


def sectional_curvature(target, point):
    """Gaussian curvature of the target at a single on-surface point."""
    point = np.asarray(point, dtype=float).reshape(1, -1)
    if point.shape[1] != target.ambient_dim:
        raise ValueError(
            f"point has dimension {point.shape[1]}, target is {target.ambient_dim}-dimensional"
        )
    res = float(np.max(np.abs(target.constraint_values(point))))
    if res > ON_SURFACE_TOL:
        raise ValueError(f"point is off the {target.kind} surface by {res:.3e}")
    return float(target.curvature(point)[0])


def metric_inner(field1, field2):
    """Pointwise inner product of two tangent fields (the embedding is isometric)."""
    if field1.grid is not field2.grid and field1.grid != field2.grid:
        raise ValueError("tangent fields live on different grids")
    if field1.vectors.shape != field2.vectors.shape:
        raise ValueError("tangent fields have mismatched shapes")
    return _dot(field1.vectors, field2.vectors)


FRAME_KINDS = ("A1", "A2", "P1", "P2")


def frame_operator(kind, target, curve, field):
    """
    The four first-order frame operators built from u_x and its covariant
    derivative w = D u_x:

      P1 Y = <Y, u_x> J u_x
      P2 Y = <w, u_x> J Y
      A1 Y = <Y, w> J u_x + <Y, u_x> J w + <Y, J w> u_x + <Y, J u_x> w
      A2 Y = <Y, J u_x> w - <Y, J w> u_x

    A1 and A2 are symmetric in the metric; P1 and P2 are the
    derivative-loss terms the gauge correction cancels.
    """
    if kind not in FRAME_KINDS:
        raise ValueError(f"unknown frame operator {kind!r}; expected one of {FRAME_KINDS}")
    pts = curve.points
    grid = curve.grid
    y = field.vectors
    ux = grid.derivative(pts, 1)
    w = target.project(pts, grid.derivative(ux, 1))
    jux = target.jmul(pts, ux)
    if kind == "P1":
        out = _dot(y, ux)[:, None] * jux
    elif kind == "P2":
        out = _dot(w, ux)[:, None] * target.jmul(pts, y)
    else:
        jw = target.jmul(pts, w)
        if kind == "A1":
            out = (
                _dot(y, w)[:, None] * jux
                + _dot(y, ux)[:, None] * jw
                + _dot(y, jw)[:, None] * ux
                + _dot(y, jux)[:, None] * w
            )
        else:
            out = _dot(y, jux)[:, None] * w - _dot(y, jw)[:, None] * ux
    return TangentField(grid, out, curve)


def great_circle(grid):
    x = grid.nodes
    return Curve(grid, np.stack([np.cos(x), np.sin(x), np.zeros(grid.n)], axis=1))


def latitude_circle(grid, r):
    if not 0.0 < r <= 1.0:
        raise ValueError(f"latitude radius must lie in (0, 1], got {r}")
    x = grid.nodes
    h = np.sqrt(1.0 - r * r)
    return Curve(grid, np.stack([r * np.cos(x), r * np.sin(x), np.full(grid.n, h)], axis=1))


def perturbed_great_circle(grid, mode, amplitude, mode2=0, amplitude2=0.0):
    """
    Great circle plus out-of-plane modes, radially renormalized.

    The optional second mode is added before normalization (stability
    studies perturb admissible curves this way, so both members of a pair
    satisfy the constraint exactly).
    """
    x = grid.nodes
    z = amplitude * np.sin(mode * x)
    if mode2:
        z = z + amplitude2 * np.sin(mode2 * x)
    pts = np.stack([np.cos(x), np.sin(x), z], axis=1)
    return Curve(grid, pts / np.linalg.norm(pts, axis=1, keepdims=True))


def _band_limited_coefficients(max_mode, seed, components=3):
    # Draw order is fixed (mode-major, then component, then cos/sin) so the
    # coefficients depend on the seed alone, never on the grid size.
    rng = np.random.default_rng(seed)
    coeffs = np.empty((max_mode, components, 2))
    for k in range(max_mode):
        for c in range(components):
            coeffs[k, c, :] = rng.standard_normal(2)
    return coeffs


def _band_limited_sum(x, coeffs, amplitude):
    out = np.zeros((x.size, coeffs.shape[1]))
    for k in range(coeffs.shape[0]):
        mode = k + 1
        basis_c = np.cos(mode * x)
        basis_s = np.sin(mode * x)
        # 1/mode^2 weighting keeps the loop smooth at every max_mode
        w = amplitude / mode**2
        for c in range(coeffs.shape[1]):
            out[:, c] += w * (coeffs[k, c, 0] * basis_c + coeffs[k, c, 1] * basis_s)
    return out


def band_limited_random_loop(grid, max_mode, amplitude, seed):
    """
    Seeded random smooth loop on the sphere.

    The underlying Fourier coefficients are a function of the seed only,
    so the same seed sampled on two grids gives samples of the same
    analytic curve (this is what resolution studies rely on).
    """
    base = great_circle(grid).points
    pert = _band_limited_sum(grid.nodes, _band_limited_coefficients(max_mode, seed), amplitude)
    pts = base + pert
    return Curve(grid, pts / np.linalg.norm(pts, axis=1, keepdims=True))


def random_tangent_field(target, curve, max_mode, amplitude, seed):
    """Seeded band-limited ambient field projected tangent along the curve."""
    coeffs = _band_limited_coefficients(max_mode, seed, components=target.ambient_dim)
    ambient = _band_limited_sum(curve.grid.nodes, coeffs, amplitude)
    return project_tangent(target, curve, ambient)


INITIAL_KINDS = ("great-circle", "latitude", "perturbed-great-circle", "band-limited-random")


def make_initial(kind, grid, r=0.6, mode=3, amplitude=0.05, mode2=0,
                 amplitude2=0.0, max_mode=5, seed=0):
    """Build one of the named initial curves on the unit sphere."""
    if kind == "great-circle":
        return great_circle(grid)
    if kind == "latitude":
        return latitude_circle(grid, r)
    if kind == "perturbed-great-circle":
        return perturbed_great_circle(grid, mode, amplitude, mode2, amplitude2)
    if kind == "band-limited-random":
        return band_limited_random_loop(grid, max_mode, amplitude, seed)
    raise ValueError(f"unknown initial-data kind {kind!r}; expected one of {INITIAL_KINDS}")
