"""Saddle-point solvers and a posteriori verification.

Three routes to a saddle point of the action:

* ``extragradient`` -- the classical two-step scheme for the monotone
  operator ``(grad_x J, -grad_y J)``; needs only first derivatives.
* ``newton`` -- damped Newton with Armijo backtracking on the first-order
  system; quadratic convergence near a solution.
* ``nested`` -- the constructive route of the existence argument: minimize
  in ``x`` at fixed ``y``, then ascend the concave reduced function of ``y``.

``verify_saddle`` checks a candidate a posteriori: small system defect,
sampled saddle inequalities, and agreement of the one-sided inner solves
with the candidate value.
"""

import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, h_norm, random_in_ball
from .problem import (action_i, grad_i, make_candidate, residual,
                      residual_i, second_partials_i)

INNER_MAX_ITER = 200
ARMIJO = 1e-4


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by all solvers; tolerances are absolute."""

    method: str = "newton"
    step: float = None          # extragradient step; None -> 0.9 / Lipschitz estimate
    tol_grad: float = 1e-10
    tol_res: float = 1e-10
    max_iter: int = 20000
    multistart: int = 8
    seed: int = 0
    cluster_radius: float = 1e-4
    record_trace: bool = False
    inner_tol_factor: float = 1e-2

    def __post_init__(self):
        if self.method not in ("extragradient", "newton", "nested"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.tol_grad <= 0 or self.tol_res <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")
        if self.cluster_radius <= 0:
            raise ValueError("cluster_radius must be positive")


def product_distance(a, b) -> float:
    """Distance between two candidate points in the product difference norm."""
    return float(np.hypot(h_norm(a.x - b.x), h_norm(a.y - b.y)))


def _assemble_jacobian(spec, u, xv, yv):
    fxx, fxy, fyy = second_partials_i(spec, u, xv, yv)
    L = spec.lap.matrix
    T = spec.T
    M = np.zeros((2 * T, 2 * T))
    M[:T, :T] = L + np.diag(fxx)
    M[:T, T:] = np.diag(fxy)
    M[T:, :T] = -np.diag(fxy)
    M[T:, T:] = L - np.diag(fyy)
    return M


def lipschitz_estimate(spec, u, radius_x, radius_y, samples=8, seed=0, power_iters=60):
    """Largest Jacobian 2-norm of the monotone operator over sampled points.

    Power iteration at each sample; the maximum over samples estimates the
    Lipschitz constant of the operator on the product ball.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(max(1, samples)):
        x = random_in_ball(spec.T, radius_x, rng)
        y = random_in_ball(spec.T, radius_y, rng)
        M = _assemble_jacobian(spec, u, x.interior, y.interior)
        v = rng.standard_normal(2 * spec.T)
        v /= np.linalg.norm(v)
        sigma = 0.0
        for _ in range(power_iters):
            w = M.T @ (M @ v)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            sigma = np.sqrt(nw)
            v = w / nw
        best = max(best, sigma)
    if best == 0.0:
        best = spec.lap.norm_inf
    return float(best)


def _trace_row(spec, u, it, xv, yv, gn):
    return (it, gn, residual_i(spec, u, xv, yv), action_i(spec, u, xv, yv))


def extragradient(spec, u, z0, cfg: SolverConfig):
    """Two-step extragradient on ``G = (grad_x J, -grad_y J)``.

    Stops when the Euclidean norm of ``G`` drops below ``tol_grad``.
    Divergence (norm growing tenfold over 50 iterations) and iteration
    exhaustion return the best iterate flagged as not converged.
    """
    x0, y0 = z0
    xv, yv = x0.interior, y0.interior
    if cfg.step is not None:
        gamma = cfg.step
    else:
        gamma = 0.9 / lipschitz_estimate(
            spec, u, 2.0 * (1.0 + h_norm(x0)), 2.0 * (1.0 + h_norm(y0)), seed=cfg.seed)
    trace = [] if cfg.record_trace else None
    history = deque(maxlen=50)
    best = (np.inf, xv, yv, 0)
    converged = False
    it = 0
    for it in range(cfg.max_iter):
        gx, gy = grad_i(spec, u, xv, yv)
        gn = float(np.sqrt(gx @ gx + gy @ gy))
        if trace is not None:
            trace.append(_trace_row(spec, u, it, xv, yv, gn))
        if gn < best[0]:
            best = (gn, xv, yv, it)
        if gn <= cfg.tol_grad:
            converged = True
            break
        if not np.isfinite(gn):
            break
        if len(history) == 50 and gn > 10.0 * history[0]:
            break  # step too large for this problem
        history.append(gn)
        xh = xv - gamma * gx
        yh = yv + gamma * gy
        gxh, gyh = grad_i(spec, u, xh, yh)
        xv = xv - gamma * gxh
        yv = yv + gamma * gyh
    if not converged:
        _, xv, yv, _ = best
    return make_candidate(spec, u, GridFunction.from_interior(xv),
                          GridFunction.from_interior(yv), "extragradient",
                          iterations=it, converged=converged, trace=trace)


def newton(spec, u, z0, cfg: SolverConfig):
    """Damped Newton on the first-order system ``(L x + F_x, L y - F_y)``.

    Armijo backtracking on the system norm; stops when the max-norm defect
    falls below ``tol_res``.  Raises :class:`SolverError` on a singular
    Jacobian (with a condition estimate); stalls return the iterate flagged.
    """
    x0, y0 = z0
    xv, yv = x0.interior, y0.interior
    T = spec.T
    trace = [] if cfg.record_trace else None
    converged = False
    it = 0
    for it in range(cfg.max_iter):
        gx, gy = grad_i(spec, u, xv, yv)
        R = np.concatenate((gx, -gy))
        rn_inf = float(np.max(np.abs(R)))
        if trace is not None:
            trace.append(_trace_row(spec, u, it, xv, yv, float(np.linalg.norm(R))))
        if rn_inf <= cfg.tol_res:
            converged = True
            break
        M = _assemble_jacobian(spec, u, xv, yv)
        try:
            d = np.linalg.solve(M, -R)
        except np.linalg.LinAlgError:
            d = None
        if d is None or not np.all(np.isfinite(d)):
            raise SolverError(
                f"singular Jacobian at iteration {it} (cond estimate {np.linalg.cond(M):.3e})")
        rn2 = float(np.linalg.norm(R))
        t = 1.0
        accepted = False
        while t >= 1e-12:
            xt = xv + t * d[:T]
            yt = yv + t * d[T:]
            gxt, gyt = grad_i(spec, u, xt, yt)
            if np.linalg.norm(np.concatenate((gxt, -gyt))) <= (1.0 - ARMIJO * t) * rn2:
                xv, yv = xt, yt
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break  # line search stall; return flagged
    return make_candidate(spec, u, GridFunction.from_interior(xv),
                          GridFunction.from_interior(yv), "newton",
                          iterations=it, converged=converged, trace=trace)


def _regularized_solve(H, g, sign):
    """Direction ``d`` with ``H d = -g`` nudged toward descent (sign=+1) or ascent (-1)."""
    lam = 0.0
    I = np.eye(H.shape[0])
    while lam <= 1e8:
        try:
            d = np.linalg.solve(H + sign * lam * I, -g)
        except np.linalg.LinAlgError:
            d = None
        if d is not None and np.all(np.isfinite(d)):
            slope = float(g @ d)
            if (sign > 0 and slope < 0) or (sign < 0 and slope > 0):
                return d
        lam = 1e-10 if lam == 0.0 else lam * 100.0
    return -sign * g  # steepest fallback


def _convex_min(value_fn, grad_fn, hess_fn, v0, tol, max_iter=INNER_MAX_ITER):
    """Newton descent with Armijo backtracking for a convex objective."""
    v = np.array(v0, dtype=float)
    val = value_fn(v)
    for _ in range(max_iter):
        g = grad_fn(v)
        if np.linalg.norm(g) <= tol:
            return v
        d = _regularized_solve(hess_fn(v), g, sign=+1)
        slope = float(g @ d)
        t = 1.0
        while t >= 1e-14:
            vt = v + t * d
            valt = value_fn(vt)
            if valt <= val + ARMIJO * t * slope:
                v, val = vt, valt
                break
            t *= 0.5
        else:
            return v  # no further progress at machine scale
    return v


def _min_in_x(spec, u, yv, x_start, tol):
    L = spec.lap.matrix
    return _convex_min(
        lambda v: action_i(spec, u, v, yv),
        lambda v: grad_i(spec, u, v, yv)[0],
        lambda v: L + np.diag(second_partials_i(spec, u, v, yv)[0]),
        x_start, tol)


def _max_in_y(spec, u, xv, y_start, tol):
    L = spec.lap.matrix
    return _convex_min(
        lambda v: -action_i(spec, u, xv, v),
        lambda v: -grad_i(spec, u, xv, v)[1],
        lambda v: L - np.diag(second_partials_i(spec, u, xv, v)[2]),
        y_start, tol)


def nested_minimax(spec, u, y0, cfg: SolverConfig, outer="y"):
    """Nested solve: optimize the reduced function of the outer variable.

    With ``outer="y"`` (the default) the inner problem minimizes the convex
    ``x``-section and the outer loop ascends the concave reduced function,
    realizing ``max_y min_x``; the outer direction comes from the Schur
    complement of the second-derivative blocks.  ``outer="x"`` mirrors the
    construction and realizes ``min_x max_y`` (pass the starting ``x`` as
    ``y0``).  Stops once the outer gradient norm reaches ``tol_grad``.
    """
    if outer not in ("y", "x"):
        raise ValueError(f"outer must be 'y' or 'x', got {outer!r}")
    T = spec.T
    L = spec.lap.matrix
    tol_outer = cfg.tol_grad
    tol_inner = max(cfg.inner_tol_factor * tol_outer, 1e-14)
    wv = y0.interior
    inner = np.zeros(T)
    trace = [] if cfg.record_trace else None
    converged = False
    it = 0

    def reduced_value(w, inner_start):
        if outer == "y":
            v = _min_in_x(spec, u, w, inner_start, tol_inner)
            return action_i(spec, u, v, w), v
        v = _max_in_y(spec, u, w, inner_start, tol_inner)
        return action_i(spec, u, w, v), v

    val, inner = reduced_value(wv, inner)
    for it in range(cfg.max_iter):
        if outer == "y":
            g = grad_i(spec, u, inner, wv)[1]
        else:
            g = grad_i(spec, u, wv, inner)[0]
        gn = float(np.linalg.norm(g))
        if trace is not None:
            xv, yv = (inner, wv) if outer == "y" else (wv, inner)
            trace.append(_trace_row(spec, u, it, xv, yv, gn))
        if gn <= tol_outer:
            converged = True
            break
        if outer == "y":
            fxx, fxy, fyy = second_partials_i(spec, u, inner, wv)
            Axx = L + np.diag(fxx)
            cross = np.linalg.lstsq(Axx, np.diag(fxy), rcond=None)[0]
            S = (-L + np.diag(fyy)) - np.diag(fxy) @ cross
            d = _regularized_solve(S, g, sign=-1)  # ascent direction for concave reduced fn
            slope = float(g @ d)
            t, accepted = 1.0, False
            while t >= 1e-14:
                trial, inner_t = reduced_value(wv + t * d, inner)
                if trial >= val + ARMIJO * t * slope:
                    wv, val, inner = wv + t * d, trial, inner_t
                    accepted = True
                    break
                t *= 0.5
        else:
            fxx, fxy, fyy = second_partials_i(spec, u, wv, inner)
            Ayy_neg = L - np.diag(fyy)  # = -(d^2 J / dy^2)
            cross = np.linalg.lstsq(Ayy_neg, np.diag(fxy), rcond=None)[0]
            S = (L + np.diag(fxx)) + np.diag(fxy) @ cross  # Hessian of the reduced max-fn
            d = _regularized_solve(S, g, sign=+1)
            slope = float(g @ d)
            t, accepted = 1.0, False
            while t >= 1e-14:
                trial, inner_t = reduced_value(wv + t * d, inner)
                if trial <= val + ARMIJO * t * slope:
                    wv, val, inner = wv + t * d, trial, inner_t
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            break
    xv, yv = (inner, wv) if outer == "y" else (wv, inner)
    method = "nested" if outer == "y" else "nested-xfirst"
    return make_candidate(spec, u, GridFunction.from_interior(xv),
                          GridFunction.from_interior(yv), method,
                          iterations=it, converged=converged, trace=trace)


def solve(spec, u, z0, cfg: SolverConfig):
    """Dispatch one solve from a starting pair according to ``cfg.method``."""
    if cfg.method == "extragradient":
        return extragradient(spec, u, z0, cfg)
    if cfg.method == "newton":
        return newton(spec, u, z0, cfg)
    return nested_minimax(spec, u, z0[1], cfg)


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of the a posteriori saddle checks; failures are listed, not raised."""

    passed: bool
    residual_norm: float
    residual_ok: bool
    inequality_gap_y: float
    inequality_gap_x: float
    inequalities_ok: bool
    min_over_x: float
    max_over_y: float
    minimax_ok: bool
    value: float
    eps: float
    failures: tuple


def verify_saddle(spec, u, cand, probes=64, eps=1e-8, radii=None, seed=0, tol_res=None):
    """Check that a candidate is a saddle point solving the system.

    (a) system defect below ``tol_res`` (default ``1e-8 * (1 + max row sum
    of the difference matrix)``); (b) sampled saddle inequalities against
    ``probes`` random points of the product ball; (c) the inner solves
    ``min_x J(x, y*)`` and ``max_y J(x*, y)`` both reproduce the candidate
    value within ``eps``.
    """
    if tol_res is None:
        tol_res = 1e-8 * (1.0 + spec.lap.norm_inf)
    if radii is None:
        rx = 2.0 * (1.0 + h_norm(cand.x))
        ry = 2.0 * (1.0 + h_norm(cand.y))
    elif isinstance(radii, tuple):
        rx, ry = radii
    else:
        rx, ry = radii.r1, radii.r2
    rn = residual(spec, u, cand.x, cand.y)
    residual_ok = rn <= tol_res

    rng = np.random.default_rng(seed)
    xv = cand.x.interior
    yv = cand.y.interior
    value = action_i(spec, u, xv, yv)
    worst_y = -np.inf
    worst_x = -np.inf
    for _ in range(max(1, probes)):
        py = random_in_ball(spec.T, ry, rng)
        px = random_in_ball(spec.T, rx, rng)
        worst_y = max(worst_y, action_i(spec, u, xv, py.interior) - value)
        worst_x = max(worst_x, value - action_i(spec, u, px.interior, yv))
    inequalities_ok = worst_y <= eps and worst_x <= eps

    tol_inner = max(1e-2 * eps, 1e-13)
    x_min = _min_in_x(spec, u, yv, xv, tol_inner)
    y_max = _max_in_y(spec, u, xv, yv, tol_inner)
    min_over_x = action_i(spec, u, x_min, yv)
    max_over_y = action_i(spec, u, xv, y_max)
    minimax_ok = abs(min_over_x - value) <= eps and abs(max_over_y - value) <= eps

    failures = []
    if not residual_ok:
        failures.append(f"residual {rn:.3e} exceeds {tol_res:.3e}")
    if worst_y > eps:
        failures.append(f"saddle inequality fails in y by {worst_y:.3e}")
    if worst_x > eps:
        failures.append(f"saddle inequality fails in x by {worst_x:.3e}")
    if abs(min_over_x - value) > eps:
        failures.append(f"min over x differs from value by {min_over_x - value:.3e}")
    if abs(max_over_y - value) > eps:
        failures.append(f"max over y differs from value by {max_over_y - value:.3e}")
    return VerifyReport(
        passed=not failures, residual_norm=rn, residual_ok=residual_ok,
        inequality_gap_y=float(worst_y), inequality_gap_x=float(worst_x),
        inequalities_ok=inequalities_ok, min_over_x=float(min_over_x),
        max_over_y=float(max_over_y), minimax_ok=minimax_ok,
        value=float(value), eps=eps, failures=tuple(failures))


@dataclass(frozen=True)
class SaddleSet:
    """Cluster representatives of converged multistart candidates."""

    points: tuple
    cluster_radius: float
    attempts: int = 0
    failures: int = 0

    @property
    def all_failed(self):
        return not self.points


def _thread_count():
    raw = os.environ.get("SADDLEBVP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def saddle_set(spec, u, cfg: SolverConfig, radii=None):
    """Multistart solve and clustering of the distinct saddle points found.

    Starts are uniform in the product ball (radii from a certificate when
    available); converged candidates closer than ``cluster_radius`` in the
    product norm collapse to the best-resolved representative.  Results are
    deterministic for a fixed seed and independent of execution order.
    """
    if radii is None:
        rx = ry = 4.0
    elif isinstance(radii, tuple):
        rx, ry = radii
    else:
        rx, ry = radii.r1, radii.r2
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.multistart)
    starts = []
    for child in seeds:
        rng = np.random.default_rng(child)
        starts.append((random_in_ball(spec.T, rx, rng), random_in_ball(spec.T, ry, rng)))

    def run(z0):
        try:
            return solve(spec, u, z0, cfg)
        except SolverError:
            return None

    threads = _thread_count()
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(z0) for z0 in starts]

    converged = [c for c in results if c is not None and c.converged]
    failures = len(results) - len(converged)
    reps = []
    for cand in sorted(converged, key=lambda c: c.residual_norm):
        if all(product_distance(cand, rep) > cfg.cluster_radius for rep in reps):
            reps.append(cand)
    reps.sort(key=lambda c: (c.value, tuple(c.x.interior)))
    return SaddleSet(points=tuple(reps), cluster_radius=cfg.cluster_radius,
                     attempts=cfg.multistart, failures=failures)
