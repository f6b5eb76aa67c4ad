import numpy as np
import pytest

from dispcurve.flow import (
    FlowParams,
    evaluate_rhs_values,
    preset,
    preset_constraint,
    PRESETS,
    rhs_extrinsic_sphere,
    rhs_intrinsic,
    rhs_regularized,
)
from dispcurve.geometry import (
    Curve,
    FlatTorus,
    UnitSphere,
    band_limited_random_loop,
    great_circle,
    latitude_circle,
)
from dispcurve.grid import Grid


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


class TestPresets:
    def test_anco_myrzakulov_constants(self):
        p = preset("anco-myrzakulov")
        assert (p.a, p.b, p.c, p.lam) == (-1.0, -1.0, -0.5, 0.0)
        assert p.eps == 0.0

    def test_integrable_constants(self):
        p = preset("integrable")
        assert (p.a, p.b, p.c, p.lam) == (1.0, 1.5, 0.0, 1.0)
        assert 3 * p.a - 2 * p.b == 0.0

    def test_schrodinger_map_constants(self):
        assert preset("schrodinger-map") == FlowParams(0.0, 0.0, 0.0, 1.0)

    def test_heisenberg_biquadratic_constraint(self):
        p = preset("heisenberg-biquadratic")
        assert 3 * p.a - 2 * p.b + p.c == 0.0
        assert p.lam == 1.0

    def test_every_preset_has_a_constraint_string(self):
        for name in PRESETS:
            assert preset_constraint(name)

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset("landau")

    def test_eps_range_enforced(self):
        with pytest.raises(ValueError):
            FlowParams(1.0, 0.0, 0.0, 0.0, eps=1.5)
        with pytest.raises(ValueError):
            FlowParams(1.0, 0.0, 0.0, 0.0, eps=-0.1)

    def test_bind_target_curvature(self):
        p = preset("integrable").with_target(FlatTorus())
        assert p.S == 0.0


class TestStationaryGreatCircle:
    # n = 16 here: the third/fourth spectral derivatives amplify node
    # round-off by (n/2)^4, and the 1e-12 bound must sit above that

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_intrinsic_vanishes(self, name):
        g = Grid(16)
        c = great_circle(g)
        out = rhs_intrinsic(preset(name), UnitSphere(), c)
        assert np.max(np.abs(out.vectors)) <= 1e-12

    def test_extrinsic_vanishes(self):
        # bracket collapses to a multiple of u itself, and u x u = 0
        g = Grid(16)
        c = great_circle(g)
        out = rhs_extrinsic_sphere(FlowParams(1.0, 2.0, -0.5, 1.0), c)
        assert np.max(np.abs(out.vectors)) <= 1e-12

    def test_regularized_vanishes_for_any_eps(self):
        g = Grid(16)
        c = great_circle(g)
        for eps in (0.1, 1.0):
            out = rhs_regularized(preset("integrable").with_eps(eps), UnitSphere(), c)
            assert np.max(np.abs(out.vectors)) <= 1e-12


class TestLatitudeCircle:
    def test_schrodinger_map_form(self):
        # the covariant form reduces to -lambda * h * u_x on a latitude circle
        g = Grid(64)
        r = 0.6
        c = latitude_circle(g, r)
        out = rhs_intrinsic(preset("schrodinger-map"), UnitSphere(), c)
        expected = -0.8 * c.derivative(1)
        assert np.max(np.abs(out.vectors - expected)) <= 1e-12

    def test_schrodinger_map_matches_extrinsic(self):
        g = Grid(64)
        c = latitude_circle(g, 0.6)
        a = rhs_intrinsic(preset("schrodinger-map"), UnitSphere(), c).vectors
        b = rhs_extrinsic_sphere(preset("schrodinger-map"), c).vectors
        assert np.max(np.abs(a - b)) <= 1e-10

    def test_extrinsic_is_a_constant_multiple_of_the_velocity(self):
        g = Grid(32)
        r, a, b, cc, lam = 0.6, 1.0, 0.25, -0.3, 1.0
        c = latitude_circle(g, r)
        out = rhs_extrinsic_sphere(FlowParams(a, b, cc, lam), c).vectors
        ux = c.derivative(1)
        omega = np.sqrt(1 - r * r) * (a - lam - (a + b) * r * r)
        ratio = _dot(out, ux) / _dot(ux, ux)
        assert np.max(np.abs(ratio - omega)) <= 1e-10
        assert np.max(np.abs(out - omega * ux)) <= 1e-10


class TestFlatTorusLinearForm:
    def test_matches_direct_dft_operator(self):
        # with b = c = 0 the flow is i (a u_xxxx + lam u_xx) on complex samples
        g = Grid(32)
        x = g.nodes
        pts = np.stack([0.3 * np.cos(2 * x) + 0.1 * np.sin(5 * x), 0.2 * np.sin(3 * x)], axis=1)
        c = Curve(g, pts)
        params = FlowParams(0.7, 0.0, 0.0, -1.3)
        out = rhs_intrinsic(params, FlatTorus(), c).vectors
        z = pts[:, 0] + 1j * pts[:, 1]
        spec = np.fft.fft(z)
        k = np.fft.fftfreq(g.n, d=1.0 / g.n)
        oracle_spec = 1j * (params.a * k**4 - params.lam * k**2) * spec
        oracle = np.fft.ifft(oracle_spec)
        assert np.max(np.abs(out[:, 0] - oracle.real)) <= 1e-10
        assert np.max(np.abs(out[:, 1] - oracle.imag)) <= 1e-10


class TestRegularized:
    def test_eps_zero_is_bit_identical_to_intrinsic(self):
        g = Grid(64)
        sph = UnitSphere()
        c = band_limited_random_loop(g, 5, 0.2, seed=21)
        p = FlowParams(1.0, 1.5, -0.5, 1.0, eps=0.0)
        assert np.array_equal(
            rhs_regularized(p, sph, c).vectors, rhs_intrinsic(p, sph, c).vectors
        )

    def test_eps_adds_pure_dissipation(self):
        g = Grid(64)
        sph = UnitSphere()
        c = band_limited_random_loop(g, 5, 0.2, seed=22)
        p0 = FlowParams(1.0, 1.5, -0.5, 1.0)
        p1 = p0.with_eps(0.25)
        diff = rhs_regularized(p1, sph, c).vectors - rhs_intrinsic(p0, sph, c).vectors
        ux = g.derivative(c.points, 1)
        w = ux
        for _ in range(3):
            w = sph.project(c.points, g.derivative(w, 1))
        assert np.max(np.abs(diff + 0.25 * w)) <= 1e-10


class TestRhsInvariants:
    def test_outputs_are_tangent(self):
        g = Grid(64)
        sph = UnitSphere()
        c = band_limited_random_loop(g, 5, 0.2, seed=23)
        nu = c.points
        for kind in ("intrinsic", "regularized", "extrinsic-sphere"):
            params = FlowParams(1.0, 2.0, 1.0, 1.0, eps=0.5 if kind == "regularized" else 0.0)
            out = evaluate_rhs_values(kind, g, sph, params, c.points)
            bound = 1e-10 * (1.0 + np.linalg.norm(out, axis=1))
            assert np.all(np.abs(_dot(out, nu)) <= bound)

    def test_linearity_in_lambda(self):
        g = Grid(64)
        sph = UnitSphere()
        c = band_limited_random_loop(g, 5, 0.2, seed=24)
        p1 = FlowParams(1.0, 2.0, 1.0, 0.7)
        p2 = FlowParams(1.0, 2.0, 1.0, -0.4)
        diff = rhs_intrinsic(p1, sph, c).vectors - rhs_intrinsic(p2, sph, c).vectors
        w1 = sph.project(c.points, g.derivative(g.derivative(c.points, 1), 1))
        expected = (p1.lam - p2.lam) * sph.jmul(c.points, w1)
        scale = np.max(np.abs(expected)) + 1.0
        assert np.max(np.abs(diff - expected)) <= 1e-12 * scale

    def test_intrinsic_matches_extrinsic_spectrally(self):
        # the coefficient map (a, b, c) -> (a, a+b, 5a+c) relates the two
        # forms; their residual is discretization, decaying with n
        params = FlowParams(1.0, 2.0, 1.0, 1.0)
        sph = UnitSphere()
        sup = {}
        for n in (32, 128):
            g = Grid(n)
            c = band_limited_random_loop(g, 8, 0.1, seed=25)
            a = evaluate_rhs_values("intrinsic", g, sph, params, c.points)
            b = evaluate_rhs_values("extrinsic-sphere", g, sph, params, c.points)
            sup[n] = np.max(np.abs(a - b))
        assert sup[128] <= 1e-8
        assert sup[128] <= sup[32] / 100

    def test_extrinsic_requires_the_sphere(self):
        g = Grid(32)
        c = Curve(g, np.zeros((32, 2)))
        with pytest.raises(ValueError):
            evaluate_rhs_values("extrinsic-sphere", g, FlatTorus(), preset("integrable"), c.points)

    def test_unknown_kind_rejected(self):
        g = Grid(32)
        c = great_circle(g)
        with pytest.raises(ValueError):
            evaluate_rhs_values("implicit", g, UnitSphere(), preset("integrable"), c.points)
