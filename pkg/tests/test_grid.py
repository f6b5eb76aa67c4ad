import numpy as np
import pytest

from dispcurve.grid import Grid, make_grid, quadrature, resample, spectral_derivative


def test_nodes_and_wavenumbers():
    g = make_grid(8)
    assert g.nodes[1] == pytest.approx(np.pi / 4, abs=0)
    assert set(g.wavenumbers.tolist()) == set(range(-4, 4))
    assert np.all(np.diff(g.nodes) == g.dx)


@pytest.mark.parametrize("bad", [7, 9, 6, 4, 0, -8])
def test_grid_rejects_bad_sizes(bad):
    with pytest.raises(ValueError):
        make_grid(bad)


def test_first_derivative_of_sine():
    g = make_grid(32)
    f = np.sin(3 * g.nodes)
    df = spectral_derivative(g, f, 1)
    assert np.max(np.abs(df - 3 * np.cos(3 * g.nodes))) <= 1e-12


def test_derivative_of_constant_is_zero():
    g = make_grid(16)
    for order in (1, 2, 3, 4):
        assert np.max(np.abs(g.derivative(np.full(16, 2.5), order))) <= 1e-12


def test_fourth_derivative_identity():
    # moderate n: the (i k)^4 multiplier amplifies input round-off by
    # (n/2)^4, so the 1e-12 bound needs k_max^4 * eps below it
    g = make_grid(16)
    f = np.sin(g.nodes)
    assert np.max(np.abs(g.derivative(f, 4) - f)) <= 1e-12


def test_derivative_rejects_bad_order():
    g = make_grid(16)
    with pytest.raises(ValueError):
        g.derivative(np.zeros(16), 0)


def test_derivative_componentwise_on_vector_fields():
    g = make_grid(32)
    field = np.stack([np.sin(g.nodes), np.cos(2 * g.nodes), np.ones(32)], axis=1)
    d = g.derivative(field, 1)
    assert np.max(np.abs(d[:, 0] - np.cos(g.nodes))) <= 1e-12
    assert np.max(np.abs(d[:, 1] + 2 * np.sin(2 * g.nodes))) <= 1e-12
    assert np.max(np.abs(d[:, 2])) <= 1e-13


def test_nyquist_mode_handling():
    n = 16
    g = make_grid(n)
    nyq = np.cos((n // 2) * g.nodes)
    # odd orders zero the Nyquist mode, even orders keep (i k)^m
    assert np.max(np.abs(g.derivative(nyq, 1))) <= 1e-12
    assert np.max(np.abs(g.derivative(nyq, 2) + (n // 2) ** 2 * nyq)) <= 1e-9


def test_quadrature_of_sin_squared():
    g = make_grid(16)
    assert quadrature(g, np.sin(g.nodes) ** 2) == pytest.approx(np.pi, abs=1e-13)


def test_quadrature_of_constant():
    g = make_grid(8)
    assert quadrature(g, np.ones(8)) == pytest.approx(2 * np.pi, abs=1e-13)


def test_quadrature_of_mean_zero_mode():
    g = make_grid(32)
    assert abs(quadrature(g, np.cos(5 * g.nodes))) <= 1e-13


def test_compensated_quadrature_agrees():
    g = make_grid(64)
    rng = np.random.default_rng(3)
    f = rng.standard_normal(64)
    assert quadrature(g, f) == pytest.approx(quadrature(g, f, compensated=True), rel=1e-13)


def test_resample_refine():
    g = make_grid(16)
    f = np.sin(g.nodes)
    g2, f2 = resample(g, f, 32)
    assert np.max(np.abs(f2 - np.sin(g2.nodes))) <= 1e-12


def test_resample_identity():
    g = make_grid(16)
    f = np.cos(3 * g.nodes)
    _, f2 = resample(g, f, 16)
    assert np.array_equal(f, f2)


def test_resample_coarsen_keeps_surviving_mode():
    g = make_grid(32)
    f = np.sin(3 * g.nodes)
    g2, f2 = resample(g, f, 8)
    assert np.max(np.abs(f2 - np.sin(3 * g2.nodes))) <= 1e-12


def test_resample_vector_field():
    g = make_grid(16)
    field = np.stack([np.sin(g.nodes), np.cos(g.nodes)], axis=1)
    g2, f2 = resample(g, field, 64)
    assert np.max(np.abs(f2[:, 0] - np.sin(g2.nodes))) <= 1e-12
    assert np.max(np.abs(f2[:, 1] - np.cos(g2.nodes))) <= 1e-12


def test_resample_rejects_bad_target():
    g = make_grid(16)
    for bad in (7, 6):
        with pytest.raises(ValueError):
            resample(g, np.zeros(16), bad)


def test_derivative_is_linear():
    g = make_grid(32)
    rng = np.random.default_rng(11)
    f1 = rng.standard_normal(32)
    f2 = rng.standard_normal(32)
    lhs = g.derivative(2.5 * f1 - 0.75 * f2, 3)
    rhs = 2.5 * g.derivative(f1, 3) - 0.75 * g.derivative(f2, 3)
    assert np.max(np.abs(lhs - rhs)) <= 1e-11


def test_derivative_has_zero_mean():
    g = make_grid(48)
    rng = np.random.default_rng(5)
    f = rng.standard_normal(48)
    assert abs(quadrature(g, g.derivative(f, 1))) <= 1e-12


def test_product_rule_is_spectrally_accurate():
    # D(fg) vs f'g + fg' on progressively finer grids: the aliasing error
    # of the coarse product must fall faster than any fixed power of 1/n.
    errs = {}
    for n in (32, 64):
        g = make_grid(n)
        f = np.exp(np.sin(g.nodes))
        h = np.exp(np.cos(2 * g.nodes))
        lhs = g.derivative(f * h, 1)
        rhs = g.derivative(f, 1) * h + f * g.derivative(h, 1)
        errs[n] = np.max(np.abs(lhs - rhs))
    assert errs[64] <= errs[32] / 100 or errs[64] <= 1e-12


def test_dealias_truncates_high_modes():
    g = make_grid(32)
    f = np.cos(3 * g.nodes) + np.cos(14 * g.nodes)
    out = g.dealias(f)
    assert np.max(np.abs(out - np.cos(3 * g.nodes))) <= 1e-12
