import math

import numpy as np
import pytest

from adasa.problems import (
    BimatrixProblem,
    CapacityProjectionError,
    NetworkProblem,
    SaaMinimization,
    UtilityProblem,
    _index_weights,
    bimatrix_oracle,
    capacity_vector,
    network_gradient,
    network_value,
    project_capacity,
    project_simplex,
    saa_reference,
)
from adasa.sa_core import SaddlePoint


class TestProjectSimplex:
    def test_feasible_point_unchanged(self):
        assert np.allclose(project_simplex(np.array([0.5, 0.5])), [0.5, 0.5])

    def test_hand_kkt(self):
        assert np.allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])

    def test_symmetry(self):
        assert np.allclose(project_simplex(np.array([0.0, 0.0])), [0.5, 0.5])

    def test_feasibility_and_idempotence(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            v = rng.normal(0, 3, rng.integers(1, 12))
            p = project_simplex(v)
            assert p.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(p >= 0)
            assert np.allclose(project_simplex(p), p, atol=1e-12)

    def test_variational_inequality(self):
        # (v - p)'(q - p) <= 0 for every feasible q characterizes the projection
        rng = np.random.default_rng(1)
        for _ in range(50):
            v = rng.normal(0, 2, 6)
            p = project_simplex(v)
            for _ in range(20):
                q = rng.dirichlet(np.ones(6))
                assert (v - p) @ (q - p) <= 1e-9

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            project_simplex(np.array([np.nan, 0.0]))


class TestProjectCapacity:
    def test_interior_point_fixed(self):
        a = np.array([[1.0, 1.0], [0.0, 1.0]])
        c = np.array([1.0, 0.6])
        v = np.array([0.2, 0.3])
        assert np.allclose(project_capacity(v, a, c), v, atol=1e-9)

    def test_one_dimensional_clip(self):
        out = project_capacity(np.array([2.0]), np.array([[1.0]]), np.array([0.5]))
        assert out[0] == pytest.approx(0.5, abs=1e-10)

    def test_feasibility_audit(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            n = rng.integers(1, 6)
            links = rng.integers(1, 5)
            a = (rng.uniform(size=(links, n)) < 0.5).astype(float)
            for l in range(links):
                if a[l].sum() == 0:
                    a[l, rng.integers(n)] = 1.0
            c = rng.uniform(0.1, 1.0, links)
            v = rng.normal(0, 1, n)
            out = project_capacity(v, a, c)
            assert np.all(a @ out <= c + 1e-8)
            assert np.all(out >= -1e-12)
            again = project_capacity(out, a, c)
            assert np.allclose(again, out, atol=1e-8)

    def test_variational_inequality(self):
        rng = np.random.default_rng(3)
        a = (rng.uniform(size=(4, 5)) < 0.5).astype(float)
        a[a.sum(axis=1) == 0, 0] = 1.0
        c = rng.uniform(0.2, 1.0, 4)
        for _ in range(40):
            v = rng.normal(0, 1, 5)
            p = project_capacity(v, a, c, tol=1e-12)
            for _ in range(10):
                u = rng.uniform(0, 1, 5)
                scale = (c / np.maximum(a @ u, 1e-12)).min()
                q = u * min(1.0, scale) * rng.uniform()
                assert (v - p) @ (q - p) <= 1e-7

    def test_cycle_cap_failure_reports_residual(self):
        a = np.array([[1.0, 1.0]])
        c = np.array([0.5])
        with pytest.raises(CapacityProjectionError, match="residual"):
            project_capacity(np.array([5.0, 5.0]), a, c, max_cycles=1)


class TestUtilityProblem:
    def _problem(self, **kw):
        defaults = dict(
            n=4,
            intercepts=np.array([0.0, 0.5]),
            slopes=np.array([1.0, 0.5]),
            eta=0.5,
            epsilon=0.5,
        )
        defaults.update(kw)
        return UtilityProblem(**defaults)

    def test_single_piece_oracle_is_linear(self):
        problem = self._problem(intercepts=np.array([0.2]), slopes=np.array([0.7]))
        rng = np.random.default_rng(4)
        xi = np.random.default_rng(4).standard_normal(4)
        x = np.full(4, 0.25)
        out = problem.oracle(x, rng)
        expected = 0.7 * (problem.coeff_base + xi) + 0.5 * x
        assert np.allclose(out, expected)

    def test_two_piece_crossover(self):
        problem = self._problem()
        # pieces 0 + 1*t and 0.5 + 0.5*t swap the max at t = 1
        assert problem.piecewise_max(0.0) == 0.5
        assert problem.piecewise_max(2.0) == 2.0
        v_h, s_h, knots = problem._envelope
        assert knots == pytest.approx([1.0])

    def test_integrand_convexity_on_random_segments(self):
        problem = UtilityProblem.from_seed(6, eta=0.5, epsilon=0.5, seed=9)
        rng = np.random.default_rng(5)
        for _ in range(200):
            t1, t2 = rng.normal(0, 3, 2)
            lam = rng.uniform()
            chord = lam * problem.piecewise_max(t1) + (1 - lam) * problem.piecewise_max(t2)
            assert problem.piecewise_max(lam * t1 + (1 - lam) * t2) <= chord + 1e-12

    def test_oracle_determinism(self):
        problem = UtilityProblem.from_seed(5, eta=0.5, epsilon=0.5, seed=10)
        x = np.full(5, 0.2)
        a = [problem.oracle(x, np.random.default_rng(42)) for _ in range(3)]
        b = [problem.oracle(x, np.random.default_rng(42)) for _ in range(3)]
        assert all(np.array_equal(u, v) for u, v in zip(a, b))

    def test_oracle_mean_matches_smoothed_gradient(self):
        # average oracle output at fixed x against a common-random-numbers
        # finite difference of the Monte-Carlo smoothed value
        from adasa.smoothing import sample_ball_batch

        problem = UtilityProblem.from_seed(4, eta=0.5, epsilon=0.4, seed=11)
        n, eps = 4, 0.4
        x = np.full(n, 0.25)
        rng = np.random.default_rng(6)
        m = 400_000
        z = sample_ball_batch(m, n, eps, rng)
        xi = rng.standard_normal((m, n))
        coeff = problem.coeff_base[None, :] + xi

        def value_batch(pt):
            w = pt[None, :] + z
            t = np.einsum("ij,ij->i", coeff, w)
            vals = (problem.intercepts[None, :] + problem.slopes[None, :] * t[:, None]).max(axis=1)
            return vals + 0.5 * problem.eta * (w**2).sum(axis=1)

        t = np.einsum("ij,ij->i", coeff, x[None, :] + z)
        active = np.argmax(problem.intercepts[None, :] + problem.slopes[None, :] * t[:, None], axis=1)
        grads = problem.slopes[active][:, None] * coeff + problem.eta * (x[None, :] + z)
        grad_mean = grads.mean(axis=0)
        se = math.sqrt(grads.var(axis=0).sum() / m)

        h = 1e-3
        fd = np.zeros(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fd[i] = (value_batch(x + e).mean() - value_batch(x - e).mean()) / (2 * h)
        assert np.linalg.norm(grad_mean - fd) <= 4.0 * se + 5e-3

    def test_sandwich_property(self):
        # f <= f_hat <= f + eps*C at random feasible points, within MC noise
        problem = UtilityProblem.from_seed(6, eta=0.5, epsilon=0.5, seed=12)
        rng = np.random.default_rng(7)
        cap = problem.estimate_subgradient_bound(rng, pilot_size=20_000)
        for _ in range(10):
            x = rng.dirichlet(np.ones(6))
            f_hat, se_hat = _mc_smoothed_value(problem, x, 20_000, rng)
            f_val, se_val = _mc_plain_value(problem, x, 20_000, rng)
            sigma = 3.0 * math.hypot(se_hat, se_val)
            assert f_val - sigma <= f_hat <= f_val + problem.epsilon * cap + sigma


def _mc_smoothed_value(problem, x, m, rng):
    from adasa.smoothing import sample_ball_batch

    z = sample_ball_batch(m, problem.n, problem.epsilon, rng)
    xi = rng.standard_normal((m, problem.n))
    w = x[None, :] + z
    t = np.einsum("ij,ij->i", problem.coeff_base[None, :] + xi, w)
    vals = (problem.intercepts[None, :] + problem.slopes[None, :] * t[:, None]).max(axis=1)
    vals = vals + 0.5 * problem.eta * (w**2).sum(axis=1)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(m))


def _mc_plain_value(problem, x, m, rng):
    xi = rng.standard_normal((m, problem.n))
    t = (problem.coeff_base[None, :] + xi) @ x
    vals = (problem.intercepts[None, :] + problem.slopes[None, :] * t[:, None]).max(axis=1)
    vals = vals + 0.5 * problem.eta * float(x @ x)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(m))


class TestGaussianMaxAffine:
    def test_value_and_derivatives_match_quadrature(self):
        from scipy.integrate import quad

        from adasa.problems import _gaussian_max_affine, _upper_envelope

        rng = np.random.default_rng(1)
        v = rng.uniform(0, 1, 6)
        s = rng.uniform(0, 1, 6)
        v_h, s_h, knots = _upper_envelope(v, s)
        assert np.all(np.diff(knots) > 0)

        def psi_quad(mu, sigma):
            f = lambda u: np.max(v + s * u) * math.exp(
                -0.5 * ((u - mu) / sigma) ** 2
            ) / (sigma * math.sqrt(2 * math.pi))
            return quad(f, mu - 12 * sigma, mu + 12 * sigma, limit=800,
                        epsabs=1e-12, epsrel=1e-12)[0]

        h = 1e-4
        for mu in (-3.0, -0.5, 0.4, 2.0):
            for sigma in (0.05, 0.4, 1.5):
                val, dmu, dsig = _gaussian_max_affine(
                    np.array([mu]), np.array([sigma]), v_h, s_h, knots
                )
                assert val[0] == pytest.approx(psi_quad(mu, sigma), abs=1e-9)
                fd_mu = (psi_quad(mu + h, sigma) - psi_quad(mu - h, sigma)) / (2 * h)
                fd_sig = (psi_quad(mu, sigma + h) - psi_quad(mu, sigma - h)) / (2 * h)
                assert dmu[0] == pytest.approx(fd_mu, abs=1e-7)
                assert dsig[0] == pytest.approx(fd_sig, abs=1e-7)


class TestBimatrixProblem:
    def test_matrix_structure(self):
        problem = BimatrixProblem(n=6, eta=0.01, epsilon=0.2)
        a = problem.matrix
        assert np.allclose(a, a.T)
        assert a[5, 5] == 1.0
        assert np.all((a > 0) & (a <= 1))
        assert a[0, 0] == pytest.approx(1.0 / 11.0)

    def test_vertex_index_is_deterministic(self):
        problem = BimatrixProblem(n=5, eta=0.01, epsilon=0.2)
        y = np.zeros(5)
        y[2] = 1.0
        rng = np.random.default_rng(8)
        for _ in range(20):
            gx, _ = problem.sampled_gradient(np.full(5, 0.2), y, rng)
            assert np.array_equal(gx, problem.matrix[:, 2])

    def test_simplex_weights_equal_coordinates(self):
        rng = np.random.default_rng(9)
        y = rng.dirichlet(np.ones(7))
        assert np.allclose(_index_weights(y), y)

    def test_off_simplex_weights_shift_by_min(self):
        u = np.array([0.5, -0.2, 0.1])
        w = _index_weights(u)
        shifted = u + 0.2
        assert np.allclose(w, shifted / shifted.sum())

    def test_zero_mean_sampled_gradient(self):
        problem = BimatrixProblem(n=8, eta=0.01, epsilon=0.2)
        rng = np.random.default_rng(10)
        x = rng.dirichlet(np.ones(8))
        y = rng.dirichlet(np.ones(8))
        state = SaddlePoint(x=x, y=y)
        m = 100_000
        draws = np.empty((m, 16))
        for i in range(m):
            gx, gy = bimatrix_oracle(problem, state, rng)
            draws[i, :8] = gx
            draws[i, 8:] = gy
        exact = np.concatenate(problem.exact_gradient(x, y))
        err = np.linalg.norm(draws.mean(axis=0) - exact)
        tol = 3.0 * math.sqrt(draws.var(axis=0).sum() / m)
        assert err <= tol

    def test_regularized_secant_inequalities(self):
        # eta-strong convexity in x and eta-strong concavity in y
        problem = BimatrixProblem(n=5, eta=0.3, epsilon=0.2)
        a, eta = problem.matrix, 0.3
        rng = np.random.default_rng(11)

        def lagrangian(x, y):
            return y @ a @ x + 0.5 * eta * x @ x - 0.5 * eta * y @ y

        for _ in range(100):
            x1, x2 = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
            y = rng.dirichlet(np.ones(5))
            gx = a.T @ y + eta * x1
            lhs = lagrangian(x2, y) - lagrangian(x1, y)
            assert lhs >= gx @ (x2 - x1) + 0.5 * eta * np.sum((x2 - x1) ** 2) - 1e-12
            y1, y2 = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
            x = rng.dirichlet(np.ones(5))
            gy = a @ x - eta * y1
            lhs = lagrangian(x, y2) - lagrangian(x, y1)
            assert lhs <= gy @ (y2 - y1) - 0.5 * eta * np.sum((y2 - y1) ** 2) + 1e-12

    def test_run_oracle_determinism(self):
        problem = BimatrixProblem(n=6, eta=0.01, epsilon=0.2)
        oracle = problem.run_oracle()
        x = np.full(6, 1 / 6)
        outs1 = [oracle(x, x, np.random.default_rng(3)) for _ in range(2)]
        outs2 = [oracle(x, x, np.random.default_rng(3)) for _ in range(2)]
        for (a1, b1), (a2, b2) in zip(outs1, outs2):
            assert np.array_equal(a1, a2) and np.array_equal(b1, b2)


class TestNetworkProblem:
    def test_gradient_at_origin(self):
        a = np.array([[1.0, 0.0], [1.0, 1.0]])
        k = np.array([0.4, 0.9])
        assert np.allclose(network_gradient(np.zeros(2), k, a), -k)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        a = (rng.uniform(size=(5, 4)) < 0.5).astype(float)
        a[a.sum(axis=1) == 0, 0] = 1.0
        k = rng.uniform(0.2, 1.0, 4)
        x = rng.uniform(0.0, 0.4, 4)
        g = network_gradient(x, k, a)
        h = 1e-6
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            fd = (network_value(x + e, k, a) - network_value(x - e, k, a)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-6)

    def test_log_domain_error(self):
        with pytest.raises(ValueError):
            network_gradient(np.array([-1.5]), np.array([0.5]), np.array([[1.0]]))

    def test_capacity_presets(self):
        c3 = capacity_vector("c3")
        assert np.allclose(capacity_vector("c1"), 2 * c3)
        assert np.allclose(capacity_vector("c2"), c3 / 0.75)
        with pytest.raises(ValueError):
            capacity_vector("c4")

    def test_from_seed_connectivity(self):
        for seed in range(5):
            problem = NetworkProblem.from_seed(5, "c3", seed=seed)
            assert np.all(problem.link_matrix.sum(axis=1) >= 1)
            assert np.all(problem.link_matrix.sum(axis=0) >= 1)

    def test_constants_are_coherent(self):
        problem = NetworkProblem.from_seed(5, "c3", seed=3)
        consts = problem.constants()
        assert 0 < consts["eta"] <= consts["lip"]
        assert consts["nu2"] == pytest.approx(5 * 0.8**2 / 12.0)
        assert consts["d2"] > 0

    def test_single_user_closed_form(self):
        problem = NetworkProblem(
            n=1,
            link_matrix=np.array([[1.0]]),
            capacity=np.array([10.0]),
            k_range=(4.0, 4.0),
        )
        ref = saa_reference(problem, sample_size=1000, seed=0, grad_map_tol=1e-12)
        assert abs(ref.point[0] - 1.0) <= 1e-10


class _QuadraticToy:
    """Strongly convex quadratic with a known minimizer, for the solver oracle."""

    def __init__(self, target):
        self.target = np.asarray(target, dtype=float)

    def build_saa(self, sample_size, rng):
        b = self.target

        def value_grad(x):
            d = x - b
            return 0.5 * float(d @ d), d

        return SaaMinimization(
            value_grad=value_grad,
            proj=lambda v: v,
            x0=np.zeros_like(b),
            initial_step=1.0,
        )


class TestSaaReference:
    def test_quadratic_matches_closed_form(self):
        toy = _QuadraticToy([0.3, -1.2, 2.5])
        ref = saa_reference(toy, sample_size=1000, seed=0)
        assert np.allclose(ref.point, toy.target, atol=1e-6)
        assert ref.converged

    def test_bimatrix_unregularized_limit(self):
        # as eta -> 0 the saddle point approaches (e_1, e_n)
        problem = BimatrixProblem(n=10, eta=1e-4, epsilon=0.2)
        ref = saa_reference(problem, sample_size=1000, seed=0)
        target = np.zeros(20)
        target[0] = 1.0
        target[-1] = 1.0
        assert np.linalg.norm(ref.point - target) <= 1e-8

    def test_repeatability(self):
        problem = UtilityProblem.from_seed(5, eta=0.5, epsilon=0.5, seed=14)
        r1 = saa_reference(problem, sample_size=2000, seed=21)
        r2 = saa_reference(problem, sample_size=2000, seed=21)
        assert np.array_equal(r1.point, r2.point)

    def test_sample_size_floor(self):
        with pytest.raises(ValueError):
            saa_reference(_QuadraticToy([0.0]), sample_size=10, seed=0)
