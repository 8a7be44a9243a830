"""Pseudo-Jacobian maps: rules assigning a matrix polytope to each point.

A pseudo-Jacobian of a continuous f at x is a closed matrix set whose support
values dominate every upper Dini directional derivative of the scalarizations
v.f; it generalizes the Jacobian to continuous, possibly non-Lipschitz maps.
This module holds the representations (:class:`PseudoJacobianMap`,
:class:`MappingSpec`), the three constructor kinds, ball-hull sampling, and a
sampling-based falsifier of the defining inequality.  The falsifier can only
refute a candidate, never prove it; every verdict records its budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import sampling
from .errors import DomainError, EvaluationError, InvalidInputError
from .matrixset import MatrixPolytope, as_square_matrix, dedupe_matrices, support_function

KINDS = ("analytic-singleton", "finite-set", "sampled")


@dataclass(frozen=True)
class MappingSpec:
    """An evaluable continuous mapping R^n -> R^n.

    `evaluate` must be total and finite on the domain of interest; when an
    analytic Jacobian is supplied it is expected to match finite differences
    on smooth points (checked by the test suite, not at call time).
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    dim: int
    analytic_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""


def as_position(x, dim: int) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.size != dim:
        raise InvalidInputError(f"expected a point of dimension {dim}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("position must be finite")
    return v


def mapping_value(f: MappingSpec, x) -> np.ndarray:
    """Evaluate f with validation; non-finite output raises EvaluationError."""
    x = as_position(x, f.dim)
    y = np.asarray(f.evaluate(x), dtype=float).reshape(-1)
    if y.size != f.dim:
        raise EvaluationError(
            f"mapping '{f.label}' returned dimension {y.size}, expected {f.dim}", point=x
        )
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        raise EvaluationError(
            f"mapping '{f.label}' produced a non-finite value", component=bad, point=x
        )
    return y


@dataclass(frozen=True)
class PseudoJacobianMap:
    """Rule x -> MatrixPolytope, with provenance and a declared-usc flag.

    `usc_declared` is metadata only: upper semicontinuity of a black-box
    set-valued map cannot be certified from finitely many samples.
    """

    rule: Callable[[np.ndarray], MatrixPolytope]
    kind: str
    dim: int
    usc_declared: bool = False
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"kind must be one of {KINDS}")
        if self.dim < 1:
            raise InvalidInputError("dim must be positive")


def eval_at(J: PseudoJacobianMap, x) -> MatrixPolytope:
    """The polytope J(x); analytic-singleton maps yield one vertex and no rays."""
    x = as_position(x, J.dim)
    poly = J.rule(x)
    if not isinstance(poly, MatrixPolytope) or poly.dim != J.dim:
        raise EvaluationError(
            f"pseudo-Jacobian rule '{J.label}' returned an invalid polytope", point=x
        )
    return poly


def analytic_singleton(f: MappingSpec, usc_declared: bool = True) -> PseudoJacobianMap:
    """Singleton pseudo-Jacobian {df(x)} from a mapping with an analytic Jacobian."""
    if f.analytic_jacobian is None:
        raise InvalidInputError("mapping has no analytic Jacobian")
    jac = f.analytic_jacobian

    def rule(x: np.ndarray) -> MatrixPolytope:
        return MatrixPolytope.singleton(as_square_matrix(jac(x)))

    return PseudoJacobianMap(
        rule=rule, kind="analytic-singleton", dim=f.dim, usc_declared=usc_declared,
        label=f.label or "analytic",
    )


def finite_set_map(
    rule: Callable[[np.ndarray], MatrixPolytope],
    dim: int,
    usc_declared: bool = False,
    label: str = "",
) -> PseudoJacobianMap:
    """User-defined set-valued rule returning vertices/rays at each point."""
    return PseudoJacobianMap(rule=rule, kind="finite-set", dim=dim,
                             usc_declared=usc_declared, label=label)


def fd_jacobian(f: MappingSpec, x, step: float = 1e-6) -> np.ndarray:
    """Forward-difference Jacobian estimate of f at x."""
    x = as_position(x, f.dim)
    fx = mapping_value(f, x)
    cols = []
    for j in range(f.dim):
        xp = x.copy()
        xp[j] += step
        cols.append((mapping_value(f, xp) - fx) / step)
    return np.stack(cols, axis=1)


def sampled_candidate(
    f: MappingSpec,
    perturbations: int = 32,
    radius: float = 1e-4,
    fd_step: float = 1e-6,
    seed: int = 0,
) -> PseudoJacobianMap:
    """Gradient-sampling-style pseudo-Jacobian candidate.

    Vertices are finite-difference Jacobians at the point and at seeded
    perturbations within `radius`.  The result is a *candidate* only and
    should be screened with :func:`falsify_pseudo_jacobian` before use in
    reports.
    """
    if perturbations < 1 or radius <= 0 or fd_step <= 0:
        raise InvalidInputError("perturbations, radius, fd_step must be positive")

    def rule(x: np.ndarray) -> MatrixPolytope:
        rng = sampling.rng_for(seed, "sampled-pj", *[float(v) for v in x])
        offsets = rng.standard_normal((perturbations, f.dim))
        norms = np.linalg.norm(offsets, axis=1)
        norms[norms == 0.0] = 1.0
        offsets = offsets / norms[:, None] * (radius * rng.uniform(0, 1, perturbations)[:, None])
        verts = [fd_jacobian(f, x, fd_step)]
        verts.extend(fd_jacobian(f, x + off, fd_step) for off in offsets)
        return MatrixPolytope(vertices=dedupe_matrices(verts))

    return PseudoJacobianMap(rule=rule, kind="sampled", dim=f.dim,
                             usc_declared=False, label=f.label or "sampled")


# ---------------------------------------------------------------------------
# ball hulls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallBudget:
    """Sampling budget for union hulls over a ball.

    Shells are dyadic radii with an absolute floor (see
    :func:`pjinv.sampling.ball_shell_points`), which keeps samples nested
    across balls whose radii differ by powers of two.  Defaults give roughly
    128 points per ball including the center.
    """

    shell_directions: int = 5
    min_shell_radius: float = 2.0**-26
    max_shells: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.shell_directions < 1 or self.max_shells < 1 or self.min_shell_radius <= 0:
            raise InvalidInputError("ball budget fields must be positive")


DEFAULT_BALL_BUDGET = BallBudget()


def ball_sample_points(x, beta: float, budget: BallBudget | None = None, dim: int | None = None) -> np.ndarray:
    """The deterministic ball sample used by :func:`eval_ball`, center first."""
    budget = budget or DEFAULT_BALL_BUDGET
    x = np.asarray(x, dtype=float).reshape(-1)
    if dim is not None and x.size != dim:
        raise InvalidInputError("dimension mismatch")
    if beta <= 0:
        raise DomainError("ball radius must be positive")
    return sampling.ball_shell_points(
        x, beta, budget.shell_directions, budget.min_shell_radius,
        budget.max_shells, budget.seed,
    )


def eval_ball(J: PseudoJacobianMap, x, beta: float, budget: BallBudget | None = None) -> MatrixPolytope:
    """Union-hull approximation of the pseudo-Jacobian over the ball x + beta*B.

    Vertices and rays are unions over the deterministic seeded ball sample
    (center included).  The sample under-approximates the ball, so hull
    co-norms over-estimate the true ball index; callers report this as an
    enclosure caveat.
    """
    x = as_position(x, J.dim)
    points = ball_sample_points(x, beta, budget, dim=J.dim)
    vertices: list[np.ndarray] = []
    rays: list[np.ndarray] = []
    for p in points:
        poly = eval_at(J, p)
        vertices.extend(poly.vertices)
        rays.extend(poly.rays)
    return MatrixPolytope(vertices=dedupe_matrices(vertices), rays=dedupe_matrices(rays))


# ---------------------------------------------------------------------------
# falsifier
# ---------------------------------------------------------------------------


DEFAULT_DINI_STEPS = tuple(np.geomspace(1e-2, 1e-8, 13))


@dataclass(frozen=True)
class FalsificationVerdict:
    """Outcome of a pseudo-Jacobian screen.  Refutation only: `falsified` False
    means no violation was found within the recorded budget, not a proof."""

    falsified: bool
    witness: tuple | None  # (u, v, gap)
    pairs_tested: int
    steps: tuple
    tolerance: float

    def to_json_dict(self) -> dict:
        witness = None
        if self.witness is not None:
            u, v, gap = self.witness
            witness = {"u": list(map(float, u)), "v": list(map(float, v)), "gap": float(gap)}
        return {
            "falsified": self.falsified,
            "witness": witness,
            "pairs_tested": self.pairs_tested,
            "steps": [float(s) for s in self.steps],
            "tolerance": self.tolerance,
        }


def falsify_pseudo_jacobian(
    J: PseudoJacobianMap,
    f: MappingSpec,
    x,
    pairs: int = 256,
    steps=DEFAULT_DINI_STEPS,
    tolerance: float = 1e-4,
    seed: int = 0,
) -> FalsificationVerdict:
    """Search for directions violating the pseudo-Jacobian inequality at x.

    For sampled unit pairs (u, v) the upper Dini directional derivative of
    v.f at x along u is estimated from one-sided difference quotients on a
    geometric step grid; the polytope side sup <v, Au> is evaluated exactly
    (max over vertices, +inf when a ray pairs positively).  A gap above
    `tolerance` falsifies the candidate with the witness pair.
    """
    if J.dim != f.dim:
        raise InvalidInputError("dimension mismatch between map and pseudo-Jacobian")
    x = as_position(x, f.dim)
    steps = np.sort(np.asarray(tuple(steps), dtype=float))[::-1]
    if steps.size == 0 or steps[-1] <= 0:
        raise InvalidInputError("steps must be positive")
    poly = eval_at(J, x)
    fx = mapping_value(f, x)

    rng = sampling.rng_for(seed, "falsify")
    n_aligned = min(64, pairs // 4) if pairs >= 8 else 0
    us = sampling.sphere_points(f.dim, pairs, rng if f.dim > 2 else None)
    vs = us.copy()
    if pairs > n_aligned:
        extra = sampling.sphere_points(
            f.dim, pairs - n_aligned, sampling.rng_for(seed, "falsify-v")
        )
        vs[n_aligned:] = extra

    # One-sided limit: estimate limsup from the smallest-step band.
    band = steps <= steps.min() * 100.0
    worst_gap = -np.inf
    witness = None
    for u, v in zip(us, vs):
        quotients = []
        for t in steps[band]:
            try:
                fy = mapping_value(f, x + t * u)
            except EvaluationError:
                continue
            quotients.append(float(v @ (fy - fx)) / t)
        if not quotients:
            continue
        estimate = max(quotients)
        sup = support_function(poly, v, u)
        gap = estimate - sup
        if gap > worst_gap:
            worst_gap = gap
            witness = (u.copy(), v.copy(), gap)
    falsified = worst_gap > tolerance
    return FalsificationVerdict(
        falsified=falsified,
        witness=witness if falsified else None,
        pairs_tested=int(len(us)),
        steps=tuple(float(s) for s in steps),
        tolerance=tolerance,
    )
