"""Certified local inversion and global inversion by lifting image segments.

Lifting the segment from f(anchor) to a target through local inverses is the
operational core of global inversion: each accepted step records the local
regularity floor, so a converged certificate carries a quantitative witness
(the minimum floor along the lift is the empirical compact-set constant for
the segment image).  Breakdown is reported, never silently bridged: a
vanishing floor is exactly the obstruction the theory predicts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidInputError,
    LocalSolveFailureError,
    NonConvergenceError,
    NotRegularError,
)
from .matrixset import SearchBudget
from .pseudojac import BallBudget, MappingSpec, PseudoJacobianMap, as_position, eval_at, mapping_value
from .regularity import ball_index, regularity_index

STATUS_CONVERGED = "converged"
STATUS_MAX_STEPS = "max-steps"
STATUS_BREAKDOWN = "regularity-breakdown"
STATUS_LOCAL_FAILURE = "local-solve-failure"

#: Reduced budgets for per-step floor estimates along a lift; certificates
#: record them.  Full-budget enclosures remain available for final audits.
LIFT_SEARCH_BUDGET = SearchBudget(
    directions=64, rounds=2, inner_iterations=80, ray_points=16, polish_candidates=2
)
LIFT_BALL_BUDGET = BallBudget(shell_directions=4, min_shell_radius=2.0**-10, max_shells=12)


def local_invert(
    f: MappingSpec,
    J: PseudoJacobianMap,
    x_guess,
    y,
    tol: float = 1e-10,
    max_iter: int = 80,
    search_budget: SearchBudget | None = None,
) -> np.ndarray:
    """Solve f(x) = y near x_guess by damped Newton on a selected hull vertex.

    The Newton matrix is the pseudo-Jacobian vertex of maximal co-norm (for
    singleton maps, the Jacobian itself): any invertible selection works
    locally, and the best-conditioned vertex minimizes step error.  Damping
    halves the step until the residual decreases.

    Raises NotRegularError ("not Jf-regular here") when the regularity floor
    at the guess is not positive, LocalSolveFailureError when 60 halvings
    yield no decrease, NonConvergenceError when max_iter is exhausted.
    """
    budget = search_budget or LIFT_SEARCH_BUDGET
    x = as_position(x_guess, f.dim)
    y = as_position(y, f.dim)
    if regularity_index(J, x, budget).lower <= 0.0:
        raise NotRegularError("not Jf-regular here")

    residual = mapping_value(f, x) - y
    res_norm = float(np.linalg.norm(residual))
    for _ in range(max_iter):
        if res_norm <= tol:
            return x
        vertices = eval_at(J, x).vertex_array()
        svals = np.linalg.svd(vertices, compute_uv=False)[..., -1]
        a = vertices[int(np.argmax(svals))]
        try:
            step = np.linalg.solve(a, -residual)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(a, -residual, rcond=None)
        lam = 1.0
        for _halving in range(61):
            candidate = x + lam * step
            cand_res = mapping_value(f, candidate) - y
            cand_norm = float(np.linalg.norm(cand_res))
            if cand_norm < res_norm:
                x, residual, res_norm = candidate, cand_res, cand_norm
                break
            lam *= 0.5
        else:
            raise LocalSolveFailureError(
                f"no residual decrease after 60 halvings (residual {res_norm:.3e})"
            )
    if res_norm <= tol:
        return x
    raise NonConvergenceError(f"residual {res_norm:.3e} after {max_iter} iterations")


@dataclass(frozen=True)
class StepRecord:
    t: float
    x: tuple
    alpha_floor: float
    step_len: float
    residual: float

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "x": [float(v) for v in self.x],
            "alpha_floor": self.alpha_floor,
            "step_len": self.step_len,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class StepConfig:
    """Step control for segment lifting.

    The Cauchy estimate bounds the lifted move by step/floor, so steps are
    sized as safety * floor * beta and verified after each local solve; beta
    adapts as min(beta_max, 2 * previous accepted move).
    """

    safety: float = 0.5
    beta_max: float = 0.5
    residual_tol: float = 1e-10
    dt_min: float = 1e-12
    max_steps: int = 10_000
    local_max_iter: int = 80
    ball_budget: BallBudget = field(default_factory=lambda: LIFT_BALL_BUDGET)
    search_budget: SearchBudget = field(default_factory=lambda: LIFT_SEARCH_BUDGET)
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.safety <= 1.0) or self.beta_max <= 0:
            raise InvalidInputError("safety in (0, 1], beta_max > 0 required")
        if self.residual_tol <= 0 or self.dt_min <= 0 or self.max_steps < 1:
            raise InvalidInputError("tolerances and step counts must be positive")


@dataclass(frozen=True)
class InversionCertificate:
    """Path-lifting trace with per-step regularity floors.

    For status "converged", final_x satisfies ||f(final_x) - target|| <=
    residual_tol and alpha_K is the minimum floor along the lift -- the
    empirical compact-set constant of the segment image.
    """

    target: tuple
    start: tuple
    steps: tuple
    status: str
    final_x: tuple
    final_residual: float
    alpha_K: float | None
    residual_tol: float
    breakdown_location: tuple | None = None

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    def to_json_dict(self) -> dict:
        return {
            "target": [float(v) for v in self.target],
            "start": [float(v) for v in self.start],
            "status": self.status,
            "final_x": [float(v) for v in self.final_x],
            "final_residual": self.final_residual,
            "alpha_K": self.alpha_K,
            "residual_tol": self.residual_tol,
            "breakdown_location": None
            if self.breakdown_location is None
            else [float(v) for v in self.breakdown_location],
            "steps": [s.to_json_dict() for s in self.steps],
        }

    def trace_rows(self) -> list:
        """(t, x..., alpha_floor, residual) rows for CSV export."""
        return [
            [s.t, *s.x, s.alpha_floor, s.residual] for s in self.steps
        ]


def _certificate(target, start, steps, status, x, residual, tol, breakdown=None):
    floors = [s.alpha_floor for s in steps]
    return InversionCertificate(
        target=tuple(map(float, target)),
        start=tuple(map(float, start)),
        steps=tuple(steps),
        status=status,
        final_x=tuple(map(float, x)),
        final_residual=float(residual),
        alpha_K=min(floors) if floors else None,
        residual_tol=tol,
        breakdown_location=None if breakdown is None else tuple(map(float, breakdown)),
    )


def lift_segment(
    f: MappingSpec,
    J: PseudoJacobianMap,
    x_start,
    y_start,
    y_end,
    config: StepConfig | None = None,
) -> InversionCertificate:
    """Lift the image segment from y_start to y_end starting at x_start.

    At the current lifted point, beta and the ball-index floor a bound the
    local inverse's Lipschitz constant by 1/a on moves shorter than beta, so
    a step of c*a*beta in the image keeps the lifted move inside the
    beta-ball.  Each accepted step is verified against that Cauchy estimate;
    failures halve the step.  A nonpositive floor ends the lift with status
    "regularity-breakdown", step underflow with "max-steps".
    """
    cfg = config or StepConfig()
    x = as_position(x_start, f.dim)
    y0 = as_position(y_start, f.dim)
    y1 = as_position(y_end, f.dim)
    start_residual = float(np.linalg.norm(mapping_value(f, x) - y0))
    if start_residual > max(cfg.residual_tol, 1e-9):
        raise InvalidInputError(
            f"x_start does not lift y_start: residual {start_residual:.3e}"
        )
    segment = y1 - y0
    seg_len = float(np.linalg.norm(segment))
    if seg_len == 0.0:
        return _certificate(y1, x_start, [], STATUS_CONVERGED, x, start_residual, cfg.residual_tol)

    steps: list[StepRecord] = []
    t = 0.0
    beta = cfg.beta_max
    while t < 1.0 - 1e-15:
        if len(steps) >= cfg.max_steps:
            return _certificate(
                y1, x_start, steps, STATUS_MAX_STEPS, x,
                np.linalg.norm(mapping_value(f, x) - y1), cfg.residual_tol,
            )
        floor = ball_index(
            J, x, beta, ball_budget=cfg.ball_budget, search_budget=cfg.search_budget
        ).lower
        if floor <= 0.0:
            return _certificate(
                y1, x_start, steps, STATUS_BREAKDOWN, x,
                np.linalg.norm(mapping_value(f, x) - y1), cfg.residual_tol, breakdown=x,
            )
        dt = min(1.0 - t, cfg.safety * floor * beta / seg_len)
        accepted = False
        halved = False
        while not accepted:
            if dt < cfg.dt_min:
                return _certificate(
                    y1, x_start, steps, STATUS_MAX_STEPS, x,
                    np.linalg.norm(mapping_value(f, x) - y1), cfg.residual_tol,
                )
            y_next = y0 + (t + dt) * segment
            try:
                x_next = local_invert(
                    f, J, x, y_next, tol=cfg.residual_tol,
                    max_iter=cfg.local_max_iter, search_budget=cfg.search_budget,
                )
            except (LocalSolveFailureError, NonConvergenceError, NotRegularError):
                dt *= 0.5
                halved = True
                continue
            move = float(np.linalg.norm(x_next - x))
            cauchy_bound = dt * seg_len / floor * (1.0 + 1e-6)
            if move > beta or move > cauchy_bound:
                dt *= 0.5
                halved = True
                continue
            accepted = True
        t += dt
        residual = float(np.linalg.norm(mapping_value(f, x_next) - y_next))
        steps.append(
            StepRecord(t=float(t), x=tuple(map(float, x_next)), alpha_floor=float(floor),
                       step_len=move, residual=residual)
        )
        x = x_next
        # Trust-radius update: after halvings shrink to twice the realized
        # move so the next ball dominates it; otherwise grow back to the cap.
        if halved:
            beta = min(cfg.beta_max, max(2.0 * move, 1e-8))
        else:
            beta = min(cfg.beta_max, 2.0 * beta)
    final_residual = float(np.linalg.norm(mapping_value(f, x) - y1))
    return _certificate(y1, x_start, steps, STATUS_CONVERGED, x, final_residual, cfg.residual_tol)


def global_invert(
    f: MappingSpec,
    J: PseudoJacobianMap,
    y,
    x_anchor=None,
    config: StepConfig | None = None,
) -> InversionCertificate:
    """Invert y by lifting the segment from f(anchor) to y (anchor defaults to 0)."""
    cfg = config or StepConfig()
    anchor = np.zeros(f.dim) if x_anchor is None else as_position(x_anchor, f.dim)
    y_anchor = mapping_value(f, anchor)
    return lift_segment(f, J, anchor, y_anchor, y, cfg)
