import numpy as np
import pytest

from mixture_ot.errors import DegenerateCovarianceError
from mixture_ot.gaussian import Gaussian, w2_gaussian_sq
from mixture_ot.gmm import Gmm, canonicalize
from mixture_ot.linalg import SpdMatrix
from mixture_ot.mw2 import (
    mw2,
    mw2_geodesic,
    mw2_trace_bound,
    plan_to_dict,
    quantiles_1d,
    w2_1d_exact,
)
from mixture_ot.transport import solve_transport

from conftest import gmm_1d, random_gmm


def dirac_mixture(weights, means):
    means = np.atleast_2d(np.asarray(means, dtype=float))
    d = means.shape[1]
    comps = [Gaussian(m, SpdMatrix(np.zeros((d, d)))) for m in means]
    return Gmm(np.asarray(weights, dtype=float), comps)


def same_mixture(a: Gmm, b: Gmm, tol=1e-9) -> bool:
    ca, cb = canonicalize(a), canonicalize(b)
    if ca.n_components != cb.n_components:
        return False
    if not np.allclose(ca.weights, cb.weights, atol=tol):
        return False
    return all(
        np.allclose(x.mean, y.mean, atol=tol)
        and np.allclose(x.cov.entries, y.cov.entries, atol=tol)
        for x, y in zip(ca.components, cb.components)
    )


class TestMw2:
    def test_self_distance_zero_diagonal_plan(self, example_1d_pair):
        mu0, _ = example_1d_pair
        dist, plan = mw2(mu0, mu0)
        assert dist < 1e-9
        assert np.allclose(plan.coupling.weights, np.diag(mu0.weights), atol=1e-12)

    def test_single_gaussian_reduction(self):
        rng = np.random.default_rng(0)
        a = random_gmm(rng, 3, 1)
        b = random_gmm(rng, 3, 1)
        dist, _ = mw2(a, b)
        expect = np.sqrt(w2_gaussian_sq(a.components[0], b.components[0]))
        assert dist == pytest.approx(expect, abs=1e-12)

    def test_worked_example_plan(self, example_1d_pair):
        mu0, mu1 = example_1d_pair
        dist, plan = mw2(mu0, mu1)
        assert dist**2 == pytest.approx(0.12475, abs=1e-9)
        assert np.allclose(plan.coupling.weights, [[0.3, 0.0], [0.3, 0.4]], atol=1e-9)
        assert len(plan.support()) == 3
        assert np.allclose(plan.coupling.weights.sum(axis=1), plan.source.weights,
                           atol=1e-9)
        assert np.allclose(plan.coupling.weights.sum(axis=0), plan.target.weights,
                           atol=1e-9)

    def test_plan_pushforward_invariant(self, example_1d_pair):
        mu0, mu1 = example_1d_pair
        _, plan = mw2(mu0, mu1)
        for k, l in plan.support():
            amap = plan.map_for(k, l)
            src = plan.source.components[k]
            dst = plan.target.components[l]
            assert np.allclose(amap(src.mean), dst.mean, atol=1e-8)
            pushed = amap.linear @ src.cov.entries @ amap.linear.T
            assert np.allclose(pushed, dst.cov.entries, atol=1e-8)

    def test_degenerate_source_distance_only(self):
        mu0 = dirac_mixture([0.6, 0.4], [[0.0], [1.0]])
        mu1 = gmm_1d([1.0], [0.5], [0.2])
        dist, plan = mw2(mu0, mu1)
        assert dist > 0.0
        assert all(m is None for row in plan.maps for m in row)
        with pytest.raises(DegenerateCovarianceError):
            plan.map_for(0, 0)

    def test_metric_properties_random(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            dim = int(rng.integers(1, 4))
            a = random_gmm(rng, dim, int(rng.integers(1, 5)))
            b = random_gmm(rng, dim, int(rng.integers(1, 5)))
            c = random_gmm(rng, dim, int(rng.integers(1, 5)))
            dab, _ = mw2(a, b)
            dba, _ = mw2(b, a)
            assert abs(dab - dba) < 1e-10
            dbc, _ = mw2(b, c)
            dac, _ = mw2(a, c)
            assert dac <= dab + dbc + 1e-8

    def test_identity_of_indiscernibles(self):
        base = gmm_1d([0.5, 0.5], [0.0, 1.0], [0.1, 0.2])
        # same distribution, redundant parametrization
        clone = gmm_1d([0.25, 0.25, 0.5], [0.0, 0.0, 1.0], [0.1, 0.1, 0.2])
        dist, _ = mw2(base, clone)
        assert dist == pytest.approx(0.0, abs=1e-12)
        assert same_mixture(base, clone)
        other = gmm_1d([0.5, 0.5], [0.05, 1.0], [0.1, 0.2])
        dist, _ = mw2(base, other)
        assert dist > 1e-3

    def test_dimension_mismatch(self):
        a = gmm_1d([1.0], [0.0], [1.0])
        b = random_gmm(np.random.default_rng(2), 2, 1)
        with pytest.raises(ValueError, match="dimension"):
            mw2(a, b)


class TestGeodesic:
    def test_endpoints(self, example_1d_pair):
        mu0, mu1 = example_1d_pair
        _, plan = mw2(mu0, mu1)
        assert same_mixture(mw2_geodesic(plan, 0.0), mu0)
        assert same_mixture(mw2_geodesic(plan, 1.0), mu1, tol=1e-8)

    def test_single_gaussian_matches_gaussian_geodesic(self):
        from mixture_ot.gaussian import interpolate_gaussian

        rng = np.random.default_rng(3)
        a = random_gmm(rng, 2, 1, jitter=1e-2)
        b = random_gmm(rng, 2, 1, jitter=1e-2)
        _, plan = mw2(a, b)
        mid = mw2_geodesic(plan, 0.5)
        direct = interpolate_gaussian(a.components[0], b.components[0], 0.5)
        assert np.allclose(mid.components[0].mean, direct.mean, atol=1e-9)
        assert np.allclose(mid.components[0].cov.entries, direct.cov.entries, atol=1e-8)

    def test_worked_example_midpoint(self, example_1d_pair):
        mu0, mu1 = example_1d_pair
        dist, plan = mw2(mu0, mu1)
        mid = mw2_geodesic(plan, 0.5)
        assert mid.n_components == 3
        d_half, _ = mw2(mu0, mid)
        assert d_half == pytest.approx(0.5 * dist, abs=1e-6)

    def test_constant_speed_grid(self):
        rng = np.random.default_rng(4)
        a = random_gmm(rng, 2, 3, jitter=1e-2)
        b = random_gmm(rng, 2, 2, jitter=1e-2)
        dist, plan = mw2(a, b)
        ts = [0.0, 0.25, 0.5, 0.75, 1.0]
        points = {t: mw2_geodesic(plan, t) for t in ts}
        for i, s in enumerate(ts):
            for t in ts[i + 1:]:
                d, _ = mw2(points[s], points[t])
                assert d == pytest.approx((t - s) * dist, abs=1e-6)

    def test_missing_maps_error(self):
        mu0 = dirac_mixture([1.0], [[0.0]])
        mu1 = gmm_1d([1.0], [1.0], [0.5])
        _, plan = mw2(mu0, mu1)
        with pytest.raises(DegenerateCovarianceError):
            mw2_geodesic(plan, 0.5)


class TestTraceBound:
    def test_diracs_zero(self):
        a = dirac_mixture([0.5, 0.5], [[0.0], [1.0]])
        b = dirac_mixture([1.0], [[2.0]])
        assert mw2_trace_bound(a, b) == 0.0

    def test_standard_gaussians(self):
        a = gmm_1d([1.0], [0.0], [1.0])
        b = gmm_1d([1.0], [3.0], [1.0])
        assert mw2_trace_bound(a, b) == pytest.approx(2.0 * np.sqrt(2.0), abs=1e-12)

    def test_worked_example_value(self, example_1d_pair):
        # sqrt(2 (0.3 0.03^2 + 0.7 0.04^2)) + sqrt(2 (0.6 0.06^2 + 0.4 0.07^2))
        mu0, mu1 = example_1d_pair
        expect = np.sqrt(2 * 0.00139) + np.sqrt(2 * 0.00412)
        assert mw2_trace_bound(mu0, mu1) == pytest.approx(expect, abs=1e-12)
        assert expect == pytest.approx(0.1435001, abs=1e-6)


class TestW2OneD:
    def test_identical(self, example_1d_pair):
        mu0, _ = example_1d_pair
        assert w2_1d_exact(mu0, mu0) == pytest.approx(0.0, abs=1e-12)

    def test_translation(self):
        a = gmm_1d([1.0], [0.0], [1.0])
        b = gmm_1d([1.0], [2.0], [1.0])
        assert w2_1d_exact(a, b) == pytest.approx(2.0, abs=1e-10)

    def test_quantiles_monotone_and_correct(self):
        g = gmm_1d([0.4, 0.6], [0.0, 2.0], [0.5, 0.25])
        us = np.linspace(0.01, 0.99, 41)
        qs = quantiles_1d(g, us)
        assert np.all(np.diff(qs) > 0)
        # bisection should invert the CDF: recompute CDF via scipy
        from scipy.special import ndtr

        cdf = 0.4 * ndtr((qs - 0.0) / 0.5) + 0.6 * ndtr((qs - 2.0) / 0.25)
        assert np.allclose(cdf, us, atol=1e-10)

    def test_quantiles_with_dirac_component(self):
        g = Gmm(
            np.array([0.5, 0.5]),
            (
                Gaussian(np.array([0.0]), SpdMatrix([[0.0]])),
                Gaussian(np.array([2.0]), SpdMatrix([[0.04]])),
            ),
        )
        qs = quantiles_1d(g, np.array([0.1, 0.45, 0.9]))
        assert abs(qs[0]) < 1e-9
        assert abs(qs[1]) < 1e-9
        assert qs[2] > 2.0

    def test_sandwich_on_worked_example(self, example_1d_pair):
        mu0, mu1 = example_1d_pair
        w2 = w2_1d_exact(mu0, mu1)
        dist, _ = mw2(mu0, mu1)
        bound = mw2_trace_bound(mu0, mu1)
        assert 0.0 < w2 <= dist + 1e-4
        assert dist <= w2 + bound + 1e-4

    def test_affine_image_equality(self):
        # target = affine image of the source: mixture distance equals
        # the diagonal coupling cost and the exact 1D distance
        mu0 = gmm_1d([0.3, 0.7], [0.2, 0.4], [0.03, 0.04])
        a, b = 1.7, 0.1
        mu1 = gmm_1d([0.3, 0.7], [a * 0.2 + b, a * 0.4 + b], [a * 0.03, a * 0.04])
        dist, _ = mw2(mu0, mu1)
        diag_cost = sum(
            w * w2_gaussian_sq(c0, c1)
            for w, c0, c1 in zip(mu0.weights, mu0.components, mu1.components)
        )
        assert dist**2 == pytest.approx(diag_cost, abs=1e-10)
        assert w2_1d_exact(mu0, mu1, quad_points=16384) == pytest.approx(dist, abs=1e-6)

    def test_dirac_target_decomposition(self):
        # with a Dirac-mixture target the squared distance splits into a
        # means-only transport plus the weighted covariance traces
        rng = np.random.default_rng(5)
        for _ in range(10):
            k0, k1 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            mu0 = random_gmm(rng, 2, k0)
            targets = rng.standard_normal((k1, 2))
            wts = rng.random(k1) + 0.1
            wts /= wts.sum()
            mu1 = dirac_mixture(wts, targets)
            dist, _ = mw2(mu0, mu1)
            mean_cost = np.array(
                [[np.sum((c.mean - t) ** 2) for t in targets] for c in mu0.components]
            )
            _, lp = solve_transport(mean_cost, mu0.weights, wts)
            traces = sum(w * c.cov.trace for w, c in zip(mu0.weights, mu0.components))
            assert dist**2 == pytest.approx(lp + traces, abs=1e-10)


class TestPlanSerialization:
    def test_positive_pairs_only(self, example_1d_pair):
        mu0, mu1 = example_1d_pair
        _, plan = mw2(mu0, mu1)
        payload = plan_to_dict(plan)
        assert len(payload["maps"]) == 3
        keys = {(m["k"], m["l"]) for m in payload["maps"]}
        assert keys == set(plan.support())
        for entry in payload["maps"]:
            assert np.asarray(entry["linear"]).shape == (1, 1)
            assert np.asarray(entry["offset"]).shape == (1,)
