"""Backend equivalence and correctness of the projection kernels."""

import numpy as np
import pytest

from smecplan import _kernels_py as pure
from smecplan import kernels

try:
    from smecplan import _kernels as compiled
except ImportError:
    compiled = None

BACKENDS = [pure] if compiled is None else [pure, compiled]


def brute_force_simplex_box(v, total, caps, grid=400_000):
    """Reference projection by fine scan over the shift parameter."""
    taus = np.linspace(v.min() - caps.max() - 1, v.max() + 1, grid)
    xs = np.clip(v[None, :] - taus[:, None], 0, caps[None, :])
    sums = xs.sum(axis=1)
    return xs[np.argmin(np.abs(sums - total))]


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
class TestRowProjection:
    def test_matches_brute_force(self, backend, rng):
        caps = np.ones(8)
        for _ in range(30):
            v = rng.normal(size=(1, 8))
            got = backend.proj_rows_simplex_box(v, np.array([1.0]), caps)[0]
            ref = brute_force_simplex_box(v[0], 1.0, caps)
            assert np.allclose(got, ref, atol=2e-4)
            assert got.sum() == pytest.approx(1.0, abs=1e-12)
            assert got.min() >= 0 and got.max() <= 1 + 1e-12

    def test_idempotent(self, backend, rng):
        caps = np.ones(6)
        v = rng.dirichlet(np.ones(6))[None, :]
        out = backend.proj_rows_simplex_box(v, np.array([1.0]), caps)
        assert np.allclose(out, v, atol=1e-12)

    def test_zero_total_rows_vanish(self, backend, rng):
        v = rng.normal(size=(3, 5))
        out = backend.proj_rows_simplex_box(v, np.array([1.0, 0.0, 1.0]), np.ones(5))
        assert np.all(out[1] == 0)
        assert out[0].sum() == pytest.approx(1.0, abs=1e-12)

    def test_column_caps_close_columns(self, backend, rng):
        caps = np.array([1.0, 0.0, 1.0, 1.0])
        v = rng.normal(size=(2, 4)) + 2.0
        out = backend.proj_rows_simplex_box(v, np.ones(2), caps)
        assert np.all(out[:, 1] == 0)
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)

    def test_cap_binding(self, backend):
        # one dominant coordinate saturates its cap, remainder spreads
        v = np.array([[10.0, 0.0, 0.0]])
        caps = np.array([0.5, 1.0, 1.0])
        out = backend.proj_rows_simplex_box(v, np.array([1.0]), caps)[0]
        assert out[0] == pytest.approx(0.5, abs=1e-12)
        assert out[1] == pytest.approx(0.25, abs=1e-12)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
class TestHalfspace:
    def test_inside_untouched(self, backend):
        x = np.array([0.2, 0.2])
        out = backend.proj_halfspace(x, np.array([1.0, 1.0]), 1.0)
        assert np.allclose(out, x)

    def test_projection_lands_on_boundary(self, backend, rng):
        for _ in range(20):
            x = rng.normal(size=5)
            a = rng.normal(size=5)
            b = float(rng.normal())
            out = backend.proj_halfspace(x, a, b)
            assert float(a @ out) <= b + 1e-9
            if float(a @ x) > b:
                assert float(a @ out) == pytest.approx(b, abs=1e-9 * max(1, abs(b)))


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
class TestDykstra:
    def test_projects_into_intersection(self, backend, rng):
        # dense positive halfspaces nearly parallel to the row-sum planes are
        # the slow case for alternating projections; give them room
        k, m = 3, 6
        caps = np.ones(m)
        totals = np.ones(k)
        a = np.abs(rng.normal(size=(2, k * m)))
        b = np.array([1.2, 1.5])
        u = rng.normal(size=(k, m)) * 2
        x, ok, viol, _, _ = backend.dykstra_project(u, totals, caps, a, b, 30_000, 1e-11)
        assert ok
        assert viol <= 1e-8
        assert np.allclose(x.sum(axis=1), 1.0, atol=1e-9)
        assert (a @ x.reshape(-1) <= b + 1e-9).all()

    def test_detects_empty_intersection(self, backend, rng):
        k, m = 2, 4
        # rows must sum to 1 but the halfspace demands total <= 0.5
        a = np.ones((1, k * m))
        b = np.array([0.5 * k])
        u = rng.normal(size=(k, m))
        x, ok, viol, _, _ = backend.dykstra_project(u, np.ones(k), np.ones(m), a, b, 300, 1e-11)
        assert not ok
        assert viol > 1e-6

    def test_warm_start_agrees_with_cold(self, backend, rng):
        k, m = 2, 5
        a = np.abs(rng.normal(size=(1, k * m)))
        b = np.array([1.0])
        u1 = rng.normal(size=(k, m))
        x1, ok1, _, pr, ph = backend.dykstra_project(u1, np.ones(k), np.ones(m), a, b, 30_000, 1e-11)
        u2 = u1 + 0.01 * rng.normal(size=(k, m))
        x_warm, ok2, _, _, _ = backend.dykstra_project(
            u2, np.ones(k), np.ones(m), a, b, 30_000, 1e-11, pr, ph
        )
        x_cold, ok3, _, _, _ = backend.dykstra_project(u2, np.ones(k), np.ones(m), a, b, 30_000, 1e-11)
        assert ok1 and ok2 and ok3
        # warm start trades exactness for speed but must stay feasible and close
        assert np.allclose(x_warm, x_cold, atol=5e-3)
        assert np.allclose(x_warm.sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.skipif(compiled is None, reason="compiled kernels unavailable")
class TestBackendEquivalence:
    def test_row_projection_bitwise_close(self, rng):
        for _ in range(50):
            k, m = int(rng.integers(1, 6)), int(rng.integers(2, 24))
            v = rng.normal(size=(k, m)) * rng.uniform(0.1, 5)
            totals = rng.uniform(0, 1.5, size=k).round(1)
            caps = np.ones(m)
            a = pure.proj_rows_simplex_box(v, totals, caps)
            b = compiled.proj_rows_simplex_box(v, totals, caps)
            assert np.allclose(a, b, atol=1e-13)

    def test_dykstra_agreement(self, rng):
        for _ in range(20):
            k, m = 3, 7
            v = rng.normal(size=(k, m))
            a_mat = np.abs(rng.normal(size=(2, k * m)))
            b_vec = np.array([1.3, 1.1])
            xa, oka, _, _, _ = pure.dykstra_project(v, np.ones(k), np.ones(m), a_mat, b_vec, 3000, 1e-11)
            xb, okb, _, _, _ = compiled.dykstra_project(v, np.ones(k), np.ones(m), a_mat, b_vec, 3000, 1e-11)
            assert oka == okb
            assert np.allclose(xa, xb, atol=1e-9)

    def test_selected_backend_exports(self):
        assert kernels.BACKEND in ("compiled", "python")
