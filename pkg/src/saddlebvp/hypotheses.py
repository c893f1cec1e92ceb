"""Numerical certification of the structural assumptions on the integrand.

A problem is *certified* when, over a sampling box, the integrand satisfies

* a quadratic lower growth bound in its ``x`` slot:
  ``F(k, x, y(k), u) >= -alpha1 x^2 + beta1 x + gamma1(k)``,
* a quadratic upper growth bound in its ``y`` slot:
  ``F(k, x(k), y, u) <= alpha2 y^2 + beta2 y + gamma2(k)``,
* convexity of the action in ``x`` and concavity in ``y``,

with ``alpha1, alpha2 < 1/(2 c2)`` where ``c2`` is the quadratic embedding
constant of the grid.  The growth constants yield a priori radii ``r1, r2``
such that every saddle point lies in the product of the corresponding balls.

Sampled checks cannot prove the bounds globally; reports carry the box and
densities used, and quadratic integrands are decided exactly.
"""

from dataclasses import dataclass

import numpy as np

from .expressions import depends_on, evaluate
from .grid import GridFunction, embedding_constant, h_norm
from .problem import action, field_values

DEFAULT_TOL = 1e-9


class HypothesisError(ValueError):
    pass


@dataclass(frozen=True)
class GrowthCertificate:
    """User-supplied growth constants with their sampling box.

    ``gamma1, gamma2`` are arrays over the nodes ``1..T``.  ``anchor_y``
    (resp. ``anchor_x``) fixes the other slot of the integrand in the lower
    (resp. upper) bound; ``None`` requires the bound uniformly over the box,
    which is what parameter-dependence studies need.  A usable certificate
    has ``alpha1, alpha2 < 1/(2 c2)``; that margin is checked by
    :func:`verify_growth` and :func:`ball_radii` rather than at construction
    so that violating certificates can be reported, not crashed on.
    """

    alpha1: float
    beta1: float
    gamma1: np.ndarray
    alpha2: float
    beta2: float
    gamma2: np.ndarray
    box_radius: float
    anchor_y: GridFunction = None
    anchor_x: GridFunction = None

    def __post_init__(self):
        g1 = np.atleast_1d(np.asarray(self.gamma1, dtype=float))
        g2 = np.atleast_1d(np.asarray(self.gamma2, dtype=float))
        if g1.shape != g2.shape or g1.ndim != 1:
            raise HypothesisError(f"gamma arrays must share shape (T,), got {g1.shape} and {g2.shape}")
        if self.box_radius <= 0:
            raise HypothesisError(f"box radius must be positive, got {self.box_radius}")
        for g in (g1, g2):
            g.flags.writeable = False
        object.__setattr__(self, "gamma1", g1)
        object.__setattr__(self, "gamma2", g2)
        for name in ("anchor_y", "anchor_x"):
            a = getattr(self, name)
            if a is not None and a.T != g1.size:
                raise HypothesisError(f"{name} has {a.T} interior nodes, expected {g1.size}")

    @property
    def T(self):
        return self.gamma1.size

    @classmethod
    def constant(cls, T, alpha1, beta1, gamma1, alpha2, beta2, gamma2,
                 box_radius, anchor_y=None, anchor_x=None):
        """Certificate with node-independent gamma constants."""
        return cls(alpha1=alpha1, beta1=beta1, gamma1=np.full(T, float(gamma1)),
                   alpha2=alpha2, beta2=beta2, gamma2=np.full(T, float(gamma2)),
                   box_radius=box_radius, anchor_y=anchor_y, anchor_x=anchor_x)


def certificate_from_dict(data, T) -> GrowthCertificate:
    def gamma(key):
        v = data[key]
        return np.full(T, float(v)) if np.isscalar(v) else np.asarray(v, dtype=float)

    def anchor(key):
        v = data.get(key)
        return None if v is None else GridFunction.from_interior(np.asarray(v, dtype=float))

    try:
        return GrowthCertificate(
            alpha1=float(data["alpha1"]), beta1=float(data["beta1"]), gamma1=gamma("gamma1"),
            alpha2=float(data["alpha2"]), beta2=float(data["beta2"]), gamma2=gamma("gamma2"),
            box_radius=float(data["box"]), anchor_y=anchor("anchor_y"), anchor_x=anchor("anchor_x"))
    except KeyError as exc:
        raise HypothesisError(f"certificate missing key {exc.args[0]!r}") from exc


def certificate_to_dict(cert: GrowthCertificate) -> dict:
    return {
        "alpha1": cert.alpha1, "beta1": cert.beta1, "gamma1": list(cert.gamma1),
        "alpha2": cert.alpha2, "beta2": cert.beta2, "gamma2": list(cert.gamma2),
        "box": cert.box_radius,
        "anchor_y": None if cert.anchor_y is None else list(cert.anchor_y.interior),
        "anchor_x": None if cert.anchor_x is None else list(cert.anchor_x.interior),
    }


@dataclass(frozen=True)
class ConvexityReport:
    passed: bool
    exact: bool
    worst_margin: float
    counterexample: dict = None


def _sample_interior(rng, T, radius):
    return GridFunction.from_interior(rng.uniform(-radius, radius, size=T))


def check_convexity_x(spec, u, y, box, samples, seed=0, tol=DEFAULT_TOL) -> ConvexityReport:
    """Check convexity of ``x -> action(spec, u, x, y)`` on the box.

    Midpoint convexity on random pairs, plus positive semidefiniteness of
    ``L + diag(F_xx)`` at sampled points when curvature varies with the
    state.  Quadratic-in-state integrands are decided exactly from a single
    matrix.  Returns the first violation found.
    """
    return _check_curvature(spec, u, y, box, samples, seed, tol, convex=True)


def check_concavity_y(spec, u, x, box, samples, seed=0, tol=DEFAULT_TOL) -> ConvexityReport:
    """Mirror image of :func:`check_convexity_x`: ``-L + diag(F_yy)`` must be negative semidefinite."""
    return _check_curvature(spec, u, x, box, samples, seed, tol, convex=False)


def _check_curvature(spec, u, fixed, box, samples, seed, tol, convex):
    rng = np.random.default_rng(seed)
    T = spec.T
    curvature_node = spec.field.fxx if convex else spec.field.fyy
    state_dependent = depends_on(curvature_node, "x") or depends_on(curvature_node, "y")
    L = spec.lap.matrix
    worst_eig = np.inf

    def hessian_margin(point):
        # smallest eigenvalue of L + diag(F_xx), or of -(-L + diag(F_yy))
        if convex:
            diag = field_values(spec, u, point, fixed, curvature_node)
            M = L + np.diag(diag)
        else:
            diag = field_values(spec, u, fixed, point, curvature_node)
            M = L - np.diag(diag)
        return float(np.linalg.eigvalsh(M)[0])

    n_points = 1 if not state_dependent else max(1, samples)
    for _ in range(n_points):
        point = _sample_interior(rng, T, box)
        eig = hessian_margin(point)
        worst_eig = min(worst_eig, eig)
        if eig < -tol:
            return ConvexityReport(
                passed=False, exact=not state_dependent, worst_margin=eig,
                counterexample={"kind": "hessian", "point": list(point.interior),
                                "eigenvalue": eig})
    if not state_dependent:
        return ConvexityReport(passed=True, exact=True, worst_margin=worst_eig)

    worst_mid = -np.inf
    for _ in range(max(1, samples)):
        p1 = _sample_interior(rng, T, box)
        p2 = _sample_interior(rng, T, box)
        mid = 0.5 * (p1 + p2)
        if convex:
            gap = action(spec, u, mid, fixed) - 0.5 * (
                action(spec, u, p1, fixed) + action(spec, u, p2, fixed))
        else:
            gap = 0.5 * (action(spec, u, fixed, p1) + action(spec, u, fixed, p2)) - \
                action(spec, u, fixed, mid)
        worst_mid = max(worst_mid, gap)
        if gap > tol:
            return ConvexityReport(
                passed=False, exact=False, worst_margin=-gap,
                counterexample={"kind": "midpoint", "first": list(p1.interior),
                                "second": list(p2.interior), "gap": gap})
    return ConvexityReport(passed=True, exact=False, worst_margin=min(worst_eig, -worst_mid))


@dataclass(frozen=True)
class GrowthReport:
    passed: bool
    alpha_ok: bool
    alpha_margins: tuple
    worst_lower_margin: float
    worst_upper_margin: float
    counterexample: dict = None
    box_radius: float = 0.0
    densities: tuple = ()

    @property
    def worst_margin(self):
        return min(self.worst_lower_margin, self.worst_upper_margin)


def verify_growth(spec, cert: GrowthCertificate, grid_density=201, tol=DEFAULT_TOL) -> GrowthReport:
    """Sample both growth bounds densely over the certificate's box.

    The free slot of each inequality runs over ``grid_density`` points in
    ``[-R, R]``; the parameter and (for anchorless certificates) the other
    slot run over coarser grids.  Reports the worst margin found; any margin
    below ``-tol`` is a counterexample.
    """
    if cert.T != spec.T:
        raise HypothesisError(f"certificate is for T={cert.T}, problem has T={spec.T}")
    c2 = embedding_constant(2, spec.T)
    limit = 1.0 / (2.0 * c2)
    margins = (limit - cert.alpha1, limit - cert.alpha2)
    if margins[0] <= 0 or margins[1] <= 0:
        return GrowthReport(
            passed=False, alpha_ok=False, alpha_margins=margins,
            worst_lower_margin=-np.inf, worst_upper_margin=-np.inf,
            counterexample={"kind": "alpha margin violated",
                            "alpha1": cert.alpha1, "alpha2": cert.alpha2, "limit": limit},
            box_radius=cert.box_radius, densities=(grid_density,))

    R = cert.box_radius
    n_free = max(3, int(grid_density))
    n_u = max(5, n_free // 8)
    n_other = max(5, n_free // 8)
    s = np.linspace(-R, R, n_free)
    us = np.linspace(-spec.D, spec.D, n_u)
    other = np.linspace(-R, R, n_other)

    def side_margin(lower):
        worst = np.inf
        witness = None
        alpha, beta, gamma = ((cert.alpha1, cert.beta1, cert.gamma1) if lower
                              else (cert.alpha2, cert.beta2, cert.gamma2))
        anchor = cert.anchor_y if lower else cert.anchor_x
        for k in range(1, spec.T + 1):
            free = s[:, None, None]
            uu = us[None, :, None]
            anchored = (np.float64(anchor(k)) if anchor is not None
                        else other[None, None, :])
            env = ({"k": float(k), "x": free, "y": anchored, "u": uu} if lower
                   else {"k": float(k), "x": anchored, "y": free, "u": uu})
            F = evaluate(spec.field.f, env)
            bound = (-alpha if lower else alpha) * free ** 2 + beta * free + gamma[k - 1]
            margin = np.asarray(F - bound if lower else bound - F, dtype=float)
            margin = np.broadcast_to(margin, (n_free, n_u, 1 if anchor is not None else n_other))
            idx = np.unravel_index(np.argmin(margin), margin.shape)
            if margin[idx] < worst:
                worst = float(margin[idx])
                witness = {"k": k, "s": float(s[idx[0]]), "u": float(us[idx[1]]),
                           "anchored": float(anchor(k)) if anchor is not None
                           else float(other[idx[2]])}
        return worst, witness

    lower_margin, lower_witness = side_margin(lower=True)
    upper_margin, upper_witness = side_margin(lower=False)
    counterexample = None
    if lower_margin < -tol:
        counterexample = {"kind": "lower growth bound violated", **lower_witness,
                          "margin": lower_margin}
    elif upper_margin < -tol:
        counterexample = {"kind": "upper growth bound violated", **upper_witness,
                          "margin": upper_margin}
    return GrowthReport(
        passed=counterexample is None, alpha_ok=True, alpha_margins=margins,
        worst_lower_margin=lower_margin, worst_upper_margin=upper_margin,
        counterexample=counterexample, box_radius=R, densities=(n_free, n_u, n_other))


@dataclass(frozen=True)
class BallRadii:
    """A priori radii confining every saddle point, with derivation constants.

    ``a1 = 1/2 - c2 alpha1`` and ``a2 = 1/2 - c2 alpha2`` are the coercivity
    margins; ``value_lower <= saddle value <= value_upper`` bracket the
    optimal value via the quadratic minorant/majorant whose coefficients are
    the ``beta_tilde``/``gamma_tilde`` constants.
    """

    r1: float
    r2: float
    beta_tilde1: float
    gamma_tilde1: float
    beta_tilde2: float
    gamma_tilde2: float
    a1: float
    a2: float
    value_lower: float
    value_upper: float

    def contains(self, x: GridFunction, y: GridFunction, slack=1e-6) -> bool:
        return (h_norm(x) <= self.r1 * (1.0 + slack)
                and h_norm(y) <= self.r2 * (1.0 + slack))


def ball_radii(cert: GrowthCertificate, c2: float, T: int) -> BallRadii:
    """Radii of the balls that contain every saddle point.

    The x-side minorant ``a1 t^2 - bt1 t + gt1`` is coercive and the y-side
    majorant ``-a2 t^2 + bt2 t + gt2`` anti-coercive; bracketing the optimal
    value between the minorant's minimum and the majorant's maximum gives the
    radii as the positive roots of two quadratics.  The majorant falls below
    ``value_lower`` for ``h_norm(y) > r2``, and symmetrically for ``r1``.
    """
    if cert.T != T:
        raise HypothesisError(f"certificate is for T={cert.T}, expected {T}")
    a1 = 0.5 - c2 * cert.alpha1
    a2 = 0.5 - c2 * cert.alpha2
    if a1 <= 0 or a2 <= 0:
        raise HypothesisError(
            f"growth margin violated: need alpha < {1.0 / (2 * c2)}, "
            f"got alpha1={cert.alpha1}, alpha2={cert.alpha2}")
    scale = np.sqrt(T * c2)
    bt1 = abs(cert.beta1) * scale
    bt2 = abs(cert.beta2) * scale
    ny = 0.0 if cert.anchor_y is None else h_norm(cert.anchor_y)
    nx = 0.0 if cert.anchor_x is None else h_norm(cert.anchor_x)
    gt1 = float(np.sum(cert.gamma1)) - 0.5 * ny ** 2
    gt2 = float(np.sum(np.maximum(cert.gamma2, 0.0))) + 0.5 * nx ** 2
    value_lower = gt1 - bt1 ** 2 / (4.0 * a1)
    value_upper = gt2 + bt2 ** 2 / (4.0 * a2)
    disc2 = bt2 ** 2 + 4.0 * a2 * (gt2 - value_lower)
    disc1 = bt1 ** 2 + 4.0 * a1 * (value_upper - gt1)
    if disc1 < 0 or disc2 < 0:
        raise HypothesisError("inconsistent growth constants: empty value bracket")
    r2 = (bt2 + np.sqrt(disc2)) / (2.0 * a2)
    r1 = (bt1 + np.sqrt(disc1)) / (2.0 * a1)
    return BallRadii(r1=float(r1), r2=float(r2),
                     beta_tilde1=float(bt1), gamma_tilde1=float(gt1),
                     beta_tilde2=float(bt2), gamma_tilde2=float(gt2),
                     a1=float(a1), a2=float(a2),
                     value_lower=float(value_lower), value_upper=float(value_upper))


def _grid_gap_pad(vals):
    # Second differences bound how far the sampled extreme can sit below the
    # true one between grid points (midpoint error ~ f'' h^2 / 8, kinks ~ jump h / 2).
    pad = 0.0
    for axis in range(vals.ndim):
        if vals.shape[axis] >= 3:
            d2 = np.diff(vals, n=2, axis=axis)
            if d2.size:
                pad = max(pad, 0.5 * float(np.max(np.abs(d2))))
    return pad


def fit_growth_certificate(spec, box_radius, alpha1=None, alpha2=None,
                           density=241, slack=1e-6, anchor_y=None, anchor_x=None):
    """Heuristic certificate: pick alphas, fit the gamma offsets by sampling.

    Uses half the admissible alpha margin unless alphas are given, sets the
    linear terms to zero, and chooses the gamma constants as the worst
    sampled slack of each bound over the box, padded by a second-difference
    estimate of the between-samples error so the result verifies on grids of
    comparable density.  Validity beyond the box is the caller's judgement.
    """
    c2 = embedding_constant(2, spec.T)
    if alpha1 is None:
        alpha1 = 0.25 / c2
    if alpha2 is None:
        alpha2 = 0.25 / c2
    R = float(box_radius)
    n = max(9, int(density))
    s = np.linspace(-R, R, n)
    us = np.linspace(-spec.D, spec.D, max(5, n // 8))
    other = np.linspace(-R, R, max(5, n // 8))

    gamma1 = np.empty(spec.T)
    gamma2 = np.empty(spec.T)
    for k in range(1, spec.T + 1):
        free = s[:, None, None]
        uu = us[None, :, None]
        y_slot = np.float64(anchor_y(k)) if anchor_y is not None else other[None, None, :]
        F = evaluate(spec.field.f, {"k": float(k), "x": free, "y": y_slot, "u": uu})
        vals = np.asarray(F + alpha1 * free ** 2, dtype=float)
        gamma1[k - 1] = float(np.min(vals)) - _grid_gap_pad(vals) - slack
        x_slot = np.float64(anchor_x(k)) if anchor_x is not None else other[None, None, :]
        F = evaluate(spec.field.f, {"k": float(k), "x": x_slot, "y": free, "u": uu})
        vals = np.asarray(F - alpha2 * free ** 2, dtype=float)
        gamma2[k - 1] = float(np.max(vals)) + _grid_gap_pad(vals) + slack
    return GrowthCertificate(alpha1=alpha1, beta1=0.0, gamma1=gamma1,
                             alpha2=alpha2, beta2=0.0, gamma2=gamma2,
                             box_radius=R, anchor_y=anchor_y, anchor_x=anchor_x)
