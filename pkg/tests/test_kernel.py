import numpy as np
import pytest

from ibcochlea.grid import FluidGrid
from ibcochlea.kernel import delta_h, interpolate, kernel_weights, phi, spread

from _reference import slow_interpolate, slow_spread


class TestPhi:
    def test_special_values(self):
        assert phi(0.0) == 0.5
        assert phi(1.0) == 0.25
        assert phi(-1.0) == 0.25
        assert phi(2.0) == 0.0
        assert phi(-2.0) == 0.0
        assert phi(3.5) == 0.0

    def test_branch_continuity(self):
        for r0 in (1.0, 2.0):
            eps = 1e-9
            left, right = phi(r0 - eps), phi(r0 + eps)
            assert abs(left - phi(r0)) < 1e-8
            assert abs(right - phi(r0)) < 1e-8

    def test_partition_of_unity(self):
        rng = np.random.default_rng(7)
        r = rng.uniform(-3, 3, size=1000)
        total = sum(phi(r - j) for j in range(-6, 7))
        np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_nonnegative_and_bounded(self):
        r = np.linspace(-2.5, 2.5, 2001)
        w = phi(r)
        assert (w >= 0).all() and (w <= 0.5 + 1e-15).all()


class TestDeltaH:
    def test_center_value(self):
        h = 0.3
        assert delta_h((0.0, 0.0, 0.0), h) == pytest.approx(h**-3 / 8, rel=1e-14)

    def test_compact_support(self):
        h = 0.5
        assert delta_h((2 * h, 0.1, 0.1), h) == 0.0
        assert delta_h((0.1, -2.5 * h, 0.1), h) == 0.0

    def test_lattice_sum_is_one(self):
        h, n = 0.25, 8
        rng = np.random.default_rng(3)
        for _ in range(5):
            X = rng.uniform(0, n * h, size=3)
            x = h * np.arange(n)
            dx = (x[:, None, None, None] - X[0] + n * h / 2) % (n * h) - n * h / 2
            dy = (x[None, :, None, None] - X[1] + n * h / 2) % (n * h) - n * h / 2
            dz = (x[None, None, :, None] - X[2] + n * h / 2) % (n * h) - n * h / 2
            disp = np.concatenate(
                [np.broadcast_to(d, (n, n, n, 1)) for d in (dx, dy, dz)], axis=-1
            )
            total = delta_h(disp, h).sum() * h**3
            assert total == pytest.approx(1.0, abs=1e-12)


class TestKernelWeights:
    def test_window_and_sum(self):
        rng = np.random.default_rng(11)
        X = rng.uniform(-5, 5, size=(40, 3))
        h = 0.7
        idx, w = kernel_weights(X, h)
        assert idx.shape == (40, 3, 4) and w.shape == (40, 3, 4)
        base = np.floor(X / h).astype(int)
        np.testing.assert_array_equal(idx[..., 0], base - 1)
        np.testing.assert_array_equal(idx[..., 3], base + 2)
        np.testing.assert_allclose(w.sum(axis=-1), 1.0, atol=1e-12)


@pytest.fixture
def fluid():
    return FluidGrid(dims=(16, 8, 8), h=0.5, rho=1.0, mu=0.01)


class TestSpread:
    def test_zero_force(self, fluid):
        X = np.array([[1.1, 2.2, 0.7]])
        spread(np.zeros((1, 3)), X, fluid, dq=0.25)
        assert not fluid.F.any()

    def test_single_point_conservation(self, fluid):
        dq = 0.06
        X = np.array([[8 * fluid.h, 3 * fluid.h, 5 * fluid.h]])  # on a node
        f = np.array([[1.0, 0.0, 0.0]])
        spread(f, X, fluid, dq)
        total = fluid.F.sum(axis=(1, 2, 3)) * fluid.h**3
        np.testing.assert_allclose(total, [dq, 0.0, 0.0], atol=1e-15)
        # support confined to the 4^3 stencil around the node
        nz = np.argwhere(fluid.F[0] != 0)
        assert nz[:, 0].min() >= 7 and nz[:, 0].max() <= 10

    def test_opposite_forces_cancel(self, fluid):
        X = np.array([[1.3, 1.7, 2.9], [1.3, 1.7, 2.9]])
        f = np.array([[2.0, -1.0, 0.5], [-2.0, 1.0, -0.5]])
        spread(f, X, fluid, dq=0.1)
        assert not fluid.F.any()

    def test_matches_reference_loop(self, fluid):
        rng = np.random.default_rng(5)
        X = rng.uniform(-2, 10, size=(25, 3))
        f = rng.standard_normal((25, 3))
        dq = 0.11
        spread(f, X, fluid, dq)
        ref = slow_spread(f, X, fluid.dims, fluid.h, dq)
        np.testing.assert_allclose(fluid.F, ref, rtol=1e-12, atol=1e-14)

    def test_total_force_conservation_random(self, fluid):
        rng = np.random.default_rng(9)
        X = rng.uniform(0, 4, size=(200, 3))
        f = rng.standard_normal((200, 3))
        dq = 0.07
        spread(f, X, fluid, dq)
        total = fluid.F.sum(axis=(1, 2, 3)) * fluid.h**3
        np.testing.assert_allclose(total, f.sum(axis=0) * dq, rtol=1e-12, atol=1e-13)

    def test_rejects_non_finite(self, fluid):
        X = np.array([[1.0, 1.0, 1.0], [np.nan, 1.0, 1.0]])
        f = np.zeros((2, 3))
        with pytest.raises(ValueError, match=r"position.*'oval'.*\(1,"):
            spread(f, X, fluid, dq=0.1, name="oval")
        X[1, 0] = 1.0
        f[0, 2] = np.inf
        with pytest.raises(ValueError, match="force"):
            spread(f, X, fluid, dq=0.1)

    def test_lattice_translation_equivariance(self, fluid):
        rng = np.random.default_rng(13)
        X = rng.uniform(0, 3, size=(30, 3))
        f = rng.standard_normal((30, 3))
        spread(f, X, fluid, dq=0.1)
        base = fluid.F.copy()
        fluid.F[:] = 0.0
        shift = np.array([3, 5, 1])
        spread(f, X + shift * fluid.h, fluid, dq=0.1)
        np.testing.assert_allclose(
            fluid.F, np.roll(base, shift, axis=(1, 2, 3)), rtol=1e-12, atol=1e-14
        )


class TestInterpolate:
    def test_uniform_field_reproduced(self, fluid):
        fluid.u[0] = 1.5
        fluid.u[1] = -0.25
        fluid.u[2] = 4.0
        rng = np.random.default_rng(21)
        X = rng.uniform(-4, 12, size=(50, 3))
        U = interpolate(fluid.u, X, fluid.h)
        np.testing.assert_allclose(U, np.array([1.5, -0.25, 4.0]) * np.ones((50, 1)), atol=1e-13)

    def test_zero_field(self, fluid):
        X = np.array([[0.3, 0.3, 0.3]])
        assert not interpolate(fluid.u, X, fluid.h).any()

    def test_matches_reference_loop(self, fluid):
        rng = np.random.default_rng(17)
        fluid.u[:] = rng.standard_normal(fluid.u.shape)
        X = rng.uniform(0, 8, size=(20, 3))
        got = interpolate(fluid.u, X, fluid.h)
        np.testing.assert_allclose(got, slow_interpolate(fluid.u, X, fluid.h), rtol=1e-12)

    def test_preserves_leading_shape(self, fluid):
        X = np.zeros((4, 5, 3))
        assert interpolate(fluid.u, X, fluid.h).shape == (4, 5, 3)


class TestAdjointness:
    def test_spread_interpolate_adjoint(self, fluid):
        rng = np.random.default_rng(31)
        n = 60
        X = rng.uniform(0, 6, size=(n, 3))
        f = rng.standard_normal((n, 3))
        v = rng.standard_normal(fluid.u.shape)
        dq = 0.09
        spread(f, X, fluid, dq)
        lhs = (fluid.F * v).sum() * fluid.h**3
        rhs = (f * interpolate(v, X, fluid.h)).sum() * dq
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)
