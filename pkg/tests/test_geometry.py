"""Spectral geometry layer: grids, Hessians, determinant fields, integration."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusma.errors import PreconditionError
from torusma.geometry import (
    Torus, GridFunction, flat_metric, conformal_metric, complex_hessian,
    laplacian, inverse_quarter_laplacian, gradient_sup_norm, integrate,
    det_field, trace_field, adjugate_field, min_eig_field, max_eig_field,
    mixed_det_field,
)


def trig_field(torus, coeffs, max_freq=3):
    """Deterministic band-limited test function from a coefficient list."""
    vals = np.zeros(torus.shape)
    i = 0
    for axis in range(torus.ndim_real):
        x = torus.axis_coord(axis)
        for k in range(1, max_freq + 1):
            a = coeffs[i % len(coeffs)]
            b = coeffs[(i + 1) % len(coeffs)]
            vals = vals + (a * np.cos(2 * np.pi * k * x)
                           + b * np.sin(2 * np.pi * k * x)) * np.ones(torus.shape)
            i += 2
    return GridFunction(torus, vals)


class TestTorus:
    def test_basic_attributes(self):
        t = Torus(2, 16)
        assert t.shape == (16, 16, 16, 16)
        assert t.ndim_real == 4
        assert t.spacing == 1 / 16
        assert t.volume == 1.0

    def test_invalid_dimension(self):
        with pytest.raises(PreconditionError):
            Torus(3, 16)

    def test_invalid_lattice(self):
        with pytest.raises(PreconditionError):
            Torus(1, 48)  # not a power of two

    def test_periodic_distance_wraps(self):
        t = Torus(1, 64)
        d = t.periodic_distance((0.0, 0.0))
        assert d.max() == pytest.approx(np.sqrt(0.5), rel=1e-12)
        assert d.min() == 0.0


class TestComplexHessian:
    def test_cosine_diagonal_entry(self):
        # f = a cos(2 pi x1): f_{z z-bar} = Lap f / 4 = -a pi^2 cos(2 pi x1)
        t = Torus(1, 64)
        a = 0.3
        x = t.axis_coord(0)
        f = GridFunction(t, a * np.cos(2 * np.pi * x) * np.ones(t.shape))
        H = complex_hessian(f)
        expected = -a * np.pi**2 * np.cos(2 * np.pi * x) * np.ones(t.shape)
        assert np.allclose(H[..., 0, 0].real, expected, atol=1e-12)
        assert np.abs(H[..., 0, 0].imag).max() < 1e-12

    def test_cross_entry_analytic(self):
        # f = cos(2 pi x1) cos(2 pi y2): 4 f_{z1 z2-bar}
        #   = (d_x1 - i d_y1)(d_x2 + i d_y2) f = i d_x1 d_y2 f
        t = Torus(2, 16)
        x1, y2 = t.axis_coord(0), t.axis_coord(3)
        f = GridFunction(t, np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * y2)
                         * np.ones(t.shape))
        H = complex_hessian(f)
        expected = 1j * np.pi**2 * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * y2) \
            * np.ones(t.shape)
        assert np.allclose(H[..., 0, 1], expected, atol=1e-12)

    def test_hermitian_symmetry(self):
        t = Torus(2, 16)
        f = trig_field(t, [0.4, -0.2, 0.1, 0.3])
        H = complex_hessian(f)
        assert np.allclose(H, np.conj(np.swapaxes(H, -1, -2)), atol=1e-13)

    @given(a=st.floats(-1, 1), b=st.floats(-1, 1))
    @settings(max_examples=20, deadline=None)
    def test_linearity(self, a, b):
        t = Torus(1, 32)
        f = trig_field(t, [0.5, -0.3])
        g = trig_field(t, [-0.2, 0.7, 0.1])
        lhs = complex_hessian(GridFunction(t, a * f.values + b * g.values))
        rhs = a * complex_hessian(f) + b * complex_hessian(g)
        assert np.allclose(lhs, rhs, atol=1e-10)

    def test_trace_is_quarter_laplacian(self):
        t = Torus(2, 16)
        f = trig_field(t, [0.3, 0.2, -0.4])
        H = complex_hessian(f)
        assert np.allclose(trace_field(H).real, 0.25 * laplacian(f), atol=1e-11)

    def test_constant_has_zero_hessian(self):
        t = Torus(1, 32)
        H = complex_hessian(GridFunction.constant(t, 3.7))
        assert np.abs(H).max() == 0.0


def random_hermitian_psd(rng, shape, n):
    R = rng.normal(size=shape + (n, n)) + 1j * rng.normal(size=shape + (n, n))
    return R @ np.conj(np.swapaxes(R, -1, -2))


class TestMatrixFields:
    @pytest.mark.parametrize("n", [1, 2])
    def test_det_adj_eig_against_numpy(self, n):
        rng = np.random.default_rng(0)
        M = random_hermitian_psd(rng, (50,), n)
        assert np.allclose(det_field(M), np.linalg.det(M).real, atol=1e-10)
        eigs = np.linalg.eigvalsh(M)
        assert np.allclose(min_eig_field(M), eigs[..., 0], atol=1e-10)
        assert np.allclose(max_eig_field(M), eigs[..., -1], atol=1e-10)
        # adjugate identity M adj(M) = det(M) I
        prod = M @ adjugate_field(M)
        eye = np.linalg.det(M).real[..., None, None] * np.eye(n)
        assert np.allclose(prod, eye, atol=1e-8)

    def test_mixed_det_polarization(self):
        # 2 mixed(A, B) = det(A + B) - det A - det B for 2x2
        rng = np.random.default_rng(1)
        A = random_hermitian_psd(rng, (40,), 2)
        B = random_hermitian_psd(rng, (40,), 2)
        lhs = 2.0 * mixed_det_field(A, B)
        rhs = np.linalg.det(A + B).real - np.linalg.det(A).real \
            - np.linalg.det(B).real
        assert np.allclose(lhs, rhs, atol=1e-8)


class TestPoissonInverse:
    def test_roundtrip(self):
        t = Torus(1, 64)
        f = trig_field(t, [0.2, -0.5, 0.3])
        u = inverse_quarter_laplacian(t, 0.25 * laplacian(f))
        assert np.allclose(u, f.values - f.values.mean(), atol=1e-11)

    def test_output_has_zero_mean(self):
        t = Torus(2, 16)
        rng = np.random.default_rng(2)
        u = inverse_quarter_laplacian(t, rng.normal(size=t.shape))
        assert abs(u.mean()) < 1e-13


class TestIntegration:
    def test_constant_density_unit_volume(self):
        m = flat_metric(Torus(2, 8))
        assert integrate(np.ones(m.torus.shape), m) == pytest.approx(1.0)

    def test_gradient_sup_norm_sine(self):
        t = Torus(1, 128)
        a = 0.07
        f = GridFunction(t, a * np.sin(2 * np.pi * t.axis_coord(0))
                         * np.ones(t.shape))
        assert gradient_sup_norm(f) == pytest.approx(2 * np.pi * a, rel=1e-3)


class TestMetrics:
    def test_flat_metric_constants(self):
        m = flat_metric(Torus(1, 32))
        assert m.is_flat
        assert m.K == 0.0 and m.A == 0.0 and m.B == 0.0
        assert m.min_eig() == pytest.approx(1.0)

    def test_conformal_zero_amplitude_is_flat(self):
        m = conformal_metric(Torus(1, 32), 0.0)
        assert m.K == 0.0 and m.A == 0.0 and m.B == 0.0

    def test_conformal_amplitude_bound(self):
        with pytest.raises(PreconditionError):
            conformal_metric(Torus(1, 32), 0.6)

    def test_conformal_has_positive_curvature_bounds(self):
        m = conformal_metric(Torus(1, 64), 0.2)
        assert not m.is_flat
        assert m.K > 0.0 and m.B > 0.0
        assert m.min_eig() > 0.0
