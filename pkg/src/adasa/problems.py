"""Benchmark problems, their sampled oracles, projections, and reference solutions.

Three problems: a stochastic utility model (piecewise-linear max of a Gaussian
linear form, regularized and smoothed), a regularized bilinear matrix game on a
pair of simplices, and a network rate-allocation problem with capacity
constraints. Each exposes a sampled-gradient oracle for the SA engine, exact
constants for the steplength schedules, and a deterministic sample-average
objective whose minimizer serves as the reference for error curves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .sa_core import SaddlePoint
from .smoothing import sample_ball, sample_ball_batch

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class CapacityProjectionError(RuntimeError):
    """Dykstra's algorithm failed to converge within the cycle cap."""


# ---------------------------------------------------------------------------
# projections


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} by sort and threshold."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a vector with non-finite entries")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    active = u - css / idx > 0
    rho = idx[active][-1]
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


def project_capacity(
    v: np.ndarray,
    link_matrix: np.ndarray,
    capacity: np.ndarray,
    tol: float = 1e-10,
    max_cycles: int = 100_000,
) -> np.ndarray:
    """Euclidean projection onto {x >= 0, Ax <= C} via Dykstra's alternating
    projections over the orthant and one halfspace per link."""
    x = np.asarray(v, dtype=float).copy()
    a_rows = np.asarray(link_matrix, dtype=float)
    cap = np.asarray(capacity, dtype=float)
    sqnorms = np.einsum("ij,ij->i", a_rows, a_rows)
    if np.any(sqnorms == 0.0):
        raise ValueError("link matrix has an empty row")
    n_sets = 1 + a_rows.shape[0]
    increments = [np.zeros_like(x) for _ in range(n_sets)]
    # the orthant is projected last so the returned point is exactly
    # nonnegative; any residual infeasibility lands on the halfspaces
    for _ in range(max_cycles):
        x_prev = x.copy()
        for l in range(a_rows.shape[0]):
            y = x + increments[l]
            excess = a_rows[l] @ y - cap[l]
            x = y - (max(excess, 0.0) / sqnorms[l]) * a_rows[l]
            increments[l] = y - x
        y = x + increments[-1]
        x = np.maximum(y, 0.0)
        increments[-1] = y - x
        if np.max(np.abs(x - x_prev)) <= tol and np.max(a_rows @ x - cap) <= 1e-9:
            return x
    residual = float(np.max(np.maximum(a_rows @ x - cap, 0.0)))
    residual = max(residual, float(np.max(np.maximum(-x, 0.0))))
    raise CapacityProjectionError(
        f"no convergence within {max_cycles} cycles; feasibility residual {residual:.3e}"
    )


# ---------------------------------------------------------------------------
# shared solver machinery for reference solutions


@dataclass
class SaaMinimization:
    """Deterministic sample-average minimization: value/gradient, projection, start."""

    value_grad: Callable[[np.ndarray], tuple[float, np.ndarray]]
    proj: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    initial_step: float


@dataclass
class SaaSaddle:
    """Deterministic strongly monotone saddle operator with per-block projections."""

    operator: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    proj_x: Callable[[np.ndarray], np.ndarray]
    proj_y: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    y0: np.ndarray
    step: float


@dataclass
class Reference:
    """Reference solution with the residual at which the solver stopped."""

    point: np.ndarray
    grad_map_norm: float
    converged: bool
    iterations: int


def _minimize_projected(
    saa: SaaMinimization,
    grad_map_tol: float,
    max_iter: int,
    stall_window: int = 5_000,
) -> Reference:
    """Fixed-step projected gradient with a divergence guard.

    A sufficient-decrease line search breaks down once value differences reach
    rounding scale, long before the gradient mapping does, so the step is held
    at initial_step (halved only on sustained increase) and the loop stops when
    the mapping residual meets grad_map_tol or stops improving.
    """
    x = saa.proj(np.asarray(saa.x0, dtype=float))
    step = saa.initial_step
    best_x, best_res = x, math.inf
    last_improvement = 0
    f_prev = math.inf
    rising = 0
    for it in range(max_iter):
        f, g = saa.value_grad(x)
        residual = float(np.linalg.norm(x - saa.proj(x - g)))
        if residual < 0.9 * best_res:
            last_improvement = it
        if residual < best_res:
            best_x, best_res = x, residual
        if best_res <= grad_map_tol:
            return Reference(best_x, best_res, True, it)
        if it - last_improvement > stall_window:
            break
        if f > f_prev + 1e-12 * max(1.0, abs(f_prev)):
            rising += 1
            if rising >= 5:
                step *= 0.5
                rising = 0
        else:
            rising = 0
        f_prev = f
        x = saa.proj(x - step * g)
    warnings.warn(
        f"projected gradient stopped at residual {best_res:.3e}; "
        "returning best iterate"
    )
    return Reference(best_x, best_res, False, max_iter)


def _solve_saddle_extragradient(
    saa: SaaSaddle,
    grad_map_tol: float,
    max_iter: int,
    stall_window: int = 20_000,
) -> Reference:
    x = saa.proj_x(np.asarray(saa.x0, dtype=float))
    y = saa.proj_y(np.asarray(saa.y0, dtype=float))
    gamma = saa.step
    best = (x, y, math.inf)
    last_improvement = 0
    for it in range(max_iter):
        fx, fy = saa.operator(x, y)
        if it % 25 == 0:
            res = float(
                np.linalg.norm(
                    np.concatenate([x - saa.proj_x(x - fx), y - saa.proj_y(y - fy)])
                )
            )
            if res < 0.9 * best[2]:
                last_improvement = it
            if res < best[2]:
                best = (x, y, res)
            if res <= grad_map_tol:
                return Reference(np.concatenate([x, y]), res, True, it)
            if it - last_improvement > stall_window:
                break
        xm = saa.proj_x(x - gamma * fx)
        ym = saa.proj_y(y - gamma * fy)
        fxm, fym = saa.operator(xm, ym)
        x = saa.proj_x(x - gamma * fxm)
        y = saa.proj_y(y - gamma * fym)
    warnings.warn(
        f"extragradient stopped at residual {best[2]:.3e}; returning best iterate"
    )
    return Reference(np.concatenate([best[0], best[1]]), best[2], False, max_iter)


def saa_reference(
    problem,
    sample_size: int = 100_000,
    seed: int | np.random.Generator = 0,
    grad_map_tol: float = 1e-8,
    max_iter: int = 500_000,
) -> Reference:
    """Reference solution from the problem's deterministic sample-average objective.

    Minimization problems run projected gradient descent with backtracking until
    the unit-step gradient-mapping norm falls below grad_map_tol; saddle problems
    run extragradient against the same natural-residual criterion. On budget
    exhaustion the best iterate is returned with converged=False and a warning.
    """
    if sample_size < 1_000:
        raise ValueError(f"sample_size must be >= 1000, got {sample_size}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    saa = problem.build_saa(sample_size, rng)
    if isinstance(saa, SaaSaddle):
        return _solve_saddle_extragradient(saa, grad_map_tol, max_iter)
    return _minimize_projected(saa, grad_map_tol, max_iter)


# ---------------------------------------------------------------------------
# stochastic utility problem


def _upper_envelope(
    intercepts: np.ndarray, slopes: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reduce max-affine pieces to the upper envelope.

    Returns (intercepts, slopes, knots) with slopes strictly increasing and
    knots the abscissas where consecutive envelope pieces exchange the max.
    """
    order = np.lexsort((intercepts, slopes))
    stack: list[tuple[float, float]] = []  # (slope, intercept)
    for idx in order:
        s_new, v_new = float(slopes[idx]), float(intercepts[idx])
        if stack and stack[-1][0] == s_new:
            if stack[-1][1] >= v_new:
                continue
            stack.pop()
        while len(stack) >= 2:
            s_top, v_top = stack[-1]
            s_sub, v_sub = stack[-2]
            t_top = (v_sub - v_top) / (s_top - s_sub)
            t_new = (v_sub - v_new) / (s_new - s_sub)
            if t_new <= t_top:
                stack.pop()
            else:
                break
        stack.append((s_new, v_new))
    s_h = np.array([p[0] for p in stack])
    v_h = np.array([p[1] for p in stack])
    knots = (v_h[:-1] - v_h[1:]) / (s_h[1:] - s_h[:-1])
    return v_h, s_h, knots


def _gaussian_max_affine(
    mu: np.ndarray,
    sigma: np.ndarray,
    v_h: np.ndarray,
    s_h: np.ndarray,
    knots: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """E[max_i(v_i + s_i U)], dE/dmu, dE/dsigma for U ~ N(mu, sigma^2).

    Closed form piece by piece over the envelope knots; the boundary terms
    cancel because the envelope is continuous at every knot.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.maximum(np.atleast_1d(np.asarray(sigma, dtype=float)), 1e-300)
    m = mu.size
    r = s_h.size
    if r == 1:
        value = v_h[0] + s_h[0] * mu
        return value, np.full(m, s_h[0]), np.zeros(m)
    z = (knots[None, :] - mu[:, None]) / sigma[:, None]
    cdf = np.empty((m, r + 1))
    cdf[:, 0] = 0.0
    cdf[:, 1:r] = ndtr(z)
    cdf[:, r] = 1.0
    pdf = np.zeros((m, r + 1))
    pdf[:, 1:r] = np.exp(-0.5 * z**2) / _SQRT_2PI
    d_cdf = np.diff(cdf, axis=1)
    d_pdf = pdf[:, :-1] - pdf[:, 1:]
    value = ((v_h[None, :] + s_h[None, :] * mu[:, None]) * d_cdf).sum(axis=1)
    value += sigma * (d_pdf * s_h[None, :]).sum(axis=1)
    d_mu = d_cdf @ s_h
    d_sigma = d_pdf @ s_h
    return value, d_mu, d_sigma


@dataclass
class UtilityProblem:
    """Regularized, smoothed stochastic utility model on the unit simplex.

    The sampled integrand is max_i(v_i + s_i * t) with t = sum_j (j/n + xi_j) x_j
    and standard normal xi, plus the strong-convexity term (eta/2)||x||^2.
    Smoothing perturbs the query point with a uniform epsilon-ball draw.
    """

    n: int
    intercepts: np.ndarray
    slopes: np.ndarray
    eta: float
    epsilon: float

    def __post_init__(self) -> None:
        self.intercepts = np.asarray(self.intercepts, dtype=float)
        self.slopes = np.asarray(self.slopes, dtype=float)
        if self.intercepts.shape != self.slopes.shape:
            raise ValueError("intercepts and slopes must align")
        self.coeff_base = np.arange(1, self.n + 1) / self.n
        self._envelope = _upper_envelope(self.intercepts, self.slopes)

    @classmethod
    def from_seed(
        cls,
        n: int,
        eta: float,
        epsilon: float,
        pieces: int = 5,
        seed: int | np.random.Generator = 0,
    ) -> "UtilityProblem":
        """Pieces drawn uniform on [0,1]; slopes sorted ascending and intercepts
        descending so several pieces are active on the envelope."""
        rng = (
            seed
            if isinstance(seed, np.random.Generator)
            else np.random.default_rng(seed)
        )
        intercepts = np.sort(rng.uniform(0.0, 1.0, pieces))[::-1].copy()
        slopes = np.sort(rng.uniform(0.0, 1.0, pieces))
        return cls(n=n, intercepts=intercepts, slopes=slopes, eta=eta, epsilon=epsilon)

    def piecewise_max(self, t: float) -> float:
        return float(np.max(self.intercepts + self.slopes * t))

    def integrand_value(self, x: np.ndarray, rng: np.random.Generator) -> float:
        """One sample of the regularized integrand at x."""
        xi = rng.standard_normal(self.n)
        t = float((self.coeff_base + xi) @ x)
        return self.piecewise_max(t) + 0.5 * self.eta * float(x @ x)

    def oracle(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Subgradient sample of the regularized integrand at the queried point."""
        xi = rng.standard_normal(self.n)
        coeff = self.coeff_base + xi
        t = float(coeff @ x)
        active = int(np.argmax(self.intercepts + self.slopes * t))
        return self.slopes[active] * coeff + self.eta * x

    def estimate_subgradient_bound(
        self,
        rng: np.random.Generator,
        pilot_size: int = 100_000,
        percentile: float = 99.9,
        inflation: float = 1.25,
    ) -> float:
        """Percentile bound on subgradient norms over the enlarged simplex.

        The Gaussian noise makes the true supremum infinite; the smoothed oracle
        truncates at this estimate, taken at the barycenter.
        """
        center = np.full(self.n, 1.0 / self.n)
        xi = rng.standard_normal((pilot_size, self.n))
        z = sample_ball_batch(pilot_size, self.n, self.epsilon, rng)
        points = center[None, :] + z
        coeff = self.coeff_base[None, :] + xi
        t = np.einsum("ij,ij->i", coeff, points)
        active = np.argmax(
            self.intercepts[None, :] + self.slopes[None, :] * t[:, None], axis=1
        )
        grads = self.slopes[active][:, None] * coeff + self.eta * points
        norms = np.linalg.norm(grads, axis=1)
        return float(np.percentile(norms, percentile) * inflation)

    def build_saa(self, sample_size: int, rng: np.random.Generator) -> SaaMinimization:
        """Deterministic objective: the Gaussian expectation is exact (closed form
        for a max-affine function under a normal), the ball perturbation is a
        fixed sample average of `sample_size` draws."""
        z_samples = sample_ball_batch(sample_size, self.n, self.epsilon, rng)
        z_mean = z_samples.mean(axis=0)
        v_h, s_h, knots = self._envelope
        a = self.coeff_base
        eta = self.eta

        def value_grad(x: np.ndarray) -> tuple[float, np.ndarray]:
            w = x[None, :] + z_samples
            mu = w @ a
            sig = np.linalg.norm(w, axis=1)
            psi, d_mu, d_sig = _gaussian_max_affine(mu, sig, v_h, s_h, knots)
            value = float(psi.mean() + 0.5 * eta * (sig**2).mean())
            safe_sig = np.maximum(sig, 1e-12)
            grad = (
                a * d_mu.mean()
                + (w * (d_sig / safe_sig)[:, None]).mean(axis=0)
                + eta * (x + z_mean)
            )
            return value, grad

        # curvature of the Gaussian envelope is modest; eta dominates for the
        # baseline settings, so 1/(eta + sum of slopes) is a safe opening step
        step = 1.0 / (self.eta + float(self.slopes.max()) * (1.0 + self.n))
        return SaaMinimization(
            value_grad=value_grad,
            proj=project_simplex,
            x0=np.full(self.n, 1.0 / self.n),
            initial_step=step,
        )


def utility_oracle(
    problem: UtilityProblem, x: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Module-level alias for the utility problem's sampled subgradient."""
    return problem.oracle(x, rng)


# ---------------------------------------------------------------------------
# bilinear matrix game


def _index_weights(u: np.ndarray) -> np.ndarray:
    shift = min(0.0, float(u.min()))
    w = u - shift
    total = w.sum()
    if total <= 1e-300:
        return np.full(u.size, 1.0 / u.size)
    return w / total


def _draw_index(u: np.ndarray, rng: np.random.Generator) -> int:
    """Index q with probability (u_q - min(0, u)) / sum_j (u_j - min(0, u)),
    driven by a single uniform variate."""
    w = _index_weights(u)
    return int(np.searchsorted(np.cumsum(w), rng.uniform(), side="right").clip(0, u.size - 1))


@dataclass
class BimatrixProblem:
    """Regularized bilinear game min_x max_y y^T A x on a pair of simplices,
    with A_ij = (i + j - 1)/(2n - 1) (1-based), symmetric with A_nn = 1."""

    n: int
    eta: float
    epsilon: float
    matrix: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.matrix is None:
            i = np.arange(1, self.n + 1)
            self.matrix = (i[:, None] + i[None, :] - 1.0) / (2.0 * self.n - 1.0)

    def exact_gradient(
        self, x: np.ndarray, y: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Unregularized pair (A^T y, -A x)."""
        return self.matrix.T @ y, -(self.matrix @ x)

    def sampled_gradient(
        self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        """Column/row sample (A_{., l(y)}, -A_{l(x), .}); zero-mean noise around
        the exact pair at any feasible (x, y)."""
        l_col = _draw_index(y, rng)
        l_row = _draw_index(x, rng)
        return self.matrix[:, l_col].copy(), -self.matrix[l_row, :].copy()

    def run_oracle(
        self,
    ) -> Callable[[np.ndarray, np.ndarray, np.random.Generator], tuple[np.ndarray, np.ndarray]]:
        """Smoothed regularized saddle oracle for the engine.

        One joint uniform draw from the 2n-ball perturbs both blocks; indices are
        sampled at the perturbed pair, and the y-part is returned in ascent
        convention: (A_{., l(y+z2)} + eta*(x+z1), A_{l(x+z1), .} - eta*(y+z2)).
        """
        n, eta, eps, a = self.n, self.eta, self.epsilon, self.matrix

        def oracle(x, y, rng):
            zeta = sample_ball(2 * n, eps, rng)
            xh = x + zeta[:n]
            yh = y + zeta[n:]
            l_col = _draw_index(yh, rng)
            l_row = _draw_index(xh, rng)
            gx = a[:, l_col] + eta * xh
            gy = a[l_row, :] - eta * yh
            return gx, gy

        return oracle

    def lipschitz(self) -> float:
        """Exact gradient Lipschitz constant ||A||_2 + eta.

        The ball perturbation leaves a bilinear-plus-quadratic objective bilinear
        plus quadratic (it only adds a constant), so the generic smoothed-oracle
        bound is unnecessary here.
        """
        return float(np.linalg.norm(self.matrix, 2)) + self.eta

    def diameter_squared(self) -> float:
        return 4.0  # sqrt(2)^2 per simplex, stacked

    def estimate_noise_bound(
        self, rng: np.random.Generator, pilot_size: int = 10_000, inflation: float = 1.5
    ) -> float:
        """Pilot estimate of the gradient-noise second moment at the barycenters."""
        x0 = np.full(self.n, 1.0 / self.n)
        oracle = self.run_oracle()
        samples = np.empty((pilot_size, 2 * self.n))
        for i in range(pilot_size):
            gx, gy = oracle(x0, x0, rng)
            samples[i, : self.n] = gx
            samples[i, self.n :] = gy
        center = samples.mean(axis=0)
        return float(((samples - center) ** 2).sum(axis=1).mean() * inflation)

    def build_saa(self, sample_size: int, rng: np.random.Generator) -> SaaSaddle:
        """Deterministic regularized saddle operator; the index sampling is
        unbiased and the smoothing shift is an additive constant, so no sampling
        is needed to form the expectation."""
        a, eta = self.matrix, self.eta

        def operator(x, y):
            return a.T @ y + eta * x, -(a @ x) + eta * y

        lip = self.lipschitz()
        return SaaSaddle(
            operator=operator,
            proj_x=project_simplex,
            proj_y=project_simplex,
            x0=np.full(self.n, 1.0 / self.n),
            y0=np.full(self.n, 1.0 / self.n),
            step=0.7 / lip,
        )


def bimatrix_oracle(
    problem: BimatrixProblem, state: SaddlePoint, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sampled (column, -row) pair at a saddle state; mean is (A^T y, -A x)."""
    return problem.sampled_gradient(state.x, state.y, rng)


# ---------------------------------------------------------------------------
# network utility problem


def network_gradient(
    x: np.ndarray, k: np.ndarray, link_matrix: np.ndarray
) -> np.ndarray:
    """Gradient of -sum_i k_i log(1+x_i) + ||Ax||^2 at x (exact per sample)."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(x <= -1.0):
        raise ValueError("log(1+x) undefined: some component is <= -1")
    a = np.asarray(link_matrix, dtype=float)
    return -k / (1.0 + x) + 2.0 * a.T @ (a @ x)


def network_value(x: np.ndarray, k: np.ndarray, link_matrix: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if np.any(x <= -1.0):
        raise ValueError("log(1+x) undefined: some component is <= -1")
    ax = np.asarray(link_matrix, dtype=float) @ x
    return float(-(k * np.log1p(x)).sum() + ax @ ax)


CAPACITY_C3 = np.array([0.10, 0.15, 0.20, 0.10, 0.15, 0.20, 0.20, 0.15, 0.25])


def capacity_vector(name: str) -> np.ndarray:
    """Capacity presets: c3 is the base vector, c2 = c3/0.75, c1 = 2*c3."""
    scale = {"c1": 2.0, "c2": 1.0 / 0.75, "c3": 1.0}
    if name not in scale:
        raise ValueError(f"unknown capacity preset {name!r}; use c1, c2 or c3")
    return CAPACITY_C3 * scale[name]


@dataclass
class NetworkProblem:
    """Rate allocation for n users over the links of a 0/1 adjacency matrix.

    Sampled cost -sum_i k_i(xi) log(1+x_i) + ||Ax||^2 with k_i uniform on
    k_range, subject to x >= 0 and Ax <= capacity. Already smooth, so no
    smoothing layer is attached.
    """

    n: int
    link_matrix: np.ndarray
    capacity: np.ndarray
    k_range: tuple[float, float] = (0.2, 1.0)

    def __post_init__(self) -> None:
        self.link_matrix = np.asarray(self.link_matrix, dtype=float)
        self.capacity = np.asarray(self.capacity, dtype=float)
        if self.link_matrix.shape != (self.capacity.size, self.n):
            raise ValueError("link matrix must be (links, users) matching capacity")
        if np.any(self.link_matrix.sum(axis=1) < 1):
            raise ValueError("every link must carry at least one user")
        if np.any(self.link_matrix.sum(axis=0) < 1):
            # a user crossing no link makes the cost unbounded below
            raise ValueError("every user must cross at least one link")
        self._gram = self.link_matrix.T @ self.link_matrix

    @classmethod
    def from_seed(
        cls,
        n: int,
        capacity: np.ndarray | str = "c3",
        density: float = 0.35,
        seed: int | np.random.Generator = 0,
        k_range: tuple[float, float] = (0.2, 1.0),
    ) -> "NetworkProblem":
        rng = (
            seed
            if isinstance(seed, np.random.Generator)
            else np.random.default_rng(seed)
        )
        cap = capacity_vector(capacity) if isinstance(capacity, str) else np.asarray(capacity)
        links = cap.size
        a = (rng.uniform(size=(links, n)) < density).astype(float)
        for l in range(links):
            if a[l].sum() < 1:
                a[l, rng.integers(n)] = 1.0
        for i in range(n):
            if a[:, i].sum() < 1:
                a[rng.integers(links), i] = 1.0
        return cls(n=n, link_matrix=a, capacity=cap, k_range=k_range)

    def sample_k(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.k_range[0], self.k_range[1], self.n)

    def oracle(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return network_gradient(x, self.sample_k(rng), self.link_matrix)

    def projection(self, tol: float = 1e-10) -> Callable[[np.ndarray], np.ndarray]:
        a, cap = self.link_matrix, self.capacity
        return lambda v: project_capacity(v, a, cap, tol=tol)

    def user_caps(self) -> np.ndarray:
        """Per-user upper bound min over crossed links of C_l."""
        masked = np.where(self.link_matrix > 0, self.capacity[:, None], np.inf)
        return masked.min(axis=0)

    def constants(self) -> dict[str, float]:
        """eta/L/nu2/D2 for the steplength schedules.

        eta: k_min/(1+x_max)^2 plus the smallest eigenvalue of 2 A^T A when
        positive; L: k_max + 2 lambda_max(A^T A); nu2: exact bound
        n*(k_hi-k_lo)^2/12 since (1+x) >= 1 on the feasible set.
        """
        caps = self.user_caps()
        x_max = float(caps.max())
        eigs = np.linalg.eigvalsh(self._gram)
        k_lo, k_hi = self.k_range
        eta = k_lo / (1.0 + x_max) ** 2 + max(0.0, 2.0 * float(eigs[0]))
        lip = k_hi + 2.0 * float(eigs[-1])
        nu2 = self.n * (k_hi - k_lo) ** 2 / 12.0
        d2 = float((caps**2).sum())
        return {"eta": eta, "lip": lip, "nu2": nu2, "d2": d2}

    def build_saa(self, sample_size: int, rng: np.random.Generator) -> SaaMinimization:
        """The sampled cost is linear in k, so SAA collapses to the mean k vector."""
        k_bar = rng.uniform(self.k_range[0], self.k_range[1], (sample_size, self.n)).mean(
            axis=0
        )
        a = self.link_matrix
        gram = self._gram

        def value_grad(x: np.ndarray) -> tuple[float, np.ndarray]:
            ax = a @ x
            value = float(-(k_bar * np.log1p(x)).sum() + ax @ ax)
            return value, -k_bar / (1.0 + x) + 2.0 * gram @ x

        consts = self.constants()
        # tighter projection than the SA runs use: the gradient-mapping stop
        # cannot go below the projector's own accuracy floor
        return SaaMinimization(
            value_grad=value_grad,
            proj=self.projection(tol=1e-13),
            x0=np.zeros(self.n),
            initial_step=1.0 / consts["lip"],
        )
