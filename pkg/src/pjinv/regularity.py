"""Regularity indices, radial profiles, invertibility balls, and global certificates.

The regularity index alpha(x) of a mapping relative to a pseudo-Jacobian map
is the co-norm infimum over the hull of the pseudo-Jacobian at x; a positive
value certifies local invertibility with a Lipschitz local inverse.  Radial
lower bounds eta(t) on alpha over spheres integrate to an inscribed-ball
radius sigma for the image of a ball, and a divergent radial integral
certifies a global homeomorphism (the Hadamard-type condition).

Everything here is conservative in the emitted direction: profiles use lower
enclosure ends and lower Riemann sums, so a published sigma is a true lower
bound *modulo sphere-sampling coverage*, and every certificate records its
budget and caveats.  The theorems quantify over continua; honesty about
sampling is the only sound desk-scale reading.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import sampling
from .errors import DomainError, InvalidInputError, NotCertifyingError, PjinvError
from .matrixset import (
    Enclosure,
    MatrixPolytope,
    SearchBudget,
    dedupe_matrices,
    image_set_distance,
    polytope_conorm,
)
from .pseudojac import (
    BallBudget,
    MappingSpec,
    PseudoJacobianMap,
    as_position,
    eval_at,
    eval_ball,
    mapping_value,
)

#: Fraction shaved off ball-hull lower ends: union hulls over finitely many
#: ball samples under-approximate the true ball hull, so their co-norm
#: over-estimates the ball index.  Exact (deduped) singleton hulls skip it.
BALL_COVERAGE_ALLOWANCE = 0.05


def regularity_index(J: PseudoJacobianMap, x, budget: SearchBudget | None = None) -> Enclosure:
    """Enclosure of alpha(x), the co-norm infimum over the hull of J(x).

    A positive lower end certifies regularity at x.
    """
    return polytope_conorm(eval_at(J, x), budget)


def ball_index(
    J: PseudoJacobianMap,
    x,
    beta: float,
    ball_budget: BallBudget | None = None,
    search_budget: SearchBudget | None = None,
    coverage_allowance: float = BALL_COVERAGE_ALLOWANCE,
) -> Enclosure:
    """Enclosure of alpha(x, beta), the index over the hull of J on x + beta*B.

    Monotone nonincreasing in beta up to sampling tolerance.  The lower end
    is discounted by `coverage_allowance` whenever the sampled hull has more
    than one generator, reflecting that the sample under-approximates the
    ball.
    """
    if beta <= 0:
        raise DomainError("ball radius beta must be positive")
    hull = eval_ball(J, x, beta, ball_budget)
    enc = polytope_conorm(hull, search_budget)
    if hull.is_singleton:
        return enc
    return Enclosure(max(0.0, enc.lower * (1.0 - coverage_allowance)), enc.upper)


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------

DEFAULT_BETA_SEQUENCE = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class BetaLimitReport:
    """Ball indices along a shrinking radius sequence vs. the point index."""

    betas: tuple
    ball_values: tuple
    point_value: Enclosure
    gap_at_smallest: float
    passes: bool
    gap_tolerance: float

    def to_json_dict(self) -> dict:
        return {
            "betas": [float(b) for b in self.betas],
            "ball_values": [v.to_json_dict() for v in self.ball_values],
            "point_value": self.point_value.to_json_dict(),
            "gap_at_smallest": self.gap_at_smallest,
            "passes": self.passes,
            "gap_tolerance": self.gap_tolerance,
        }


def beta_limit_audit(
    J: PseudoJacobianMap,
    x,
    beta_sequence=DEFAULT_BETA_SEQUENCE,
    gap_tolerance: float = 1e-3,
    ball_budget: BallBudget | None = None,
    search_budget: SearchBudget | None = None,
) -> BetaLimitReport:
    """Audit that ball indices recover the point index as beta shrinks to 0.

    For maps whose pseudo-Jacobian is upper semicontinuous at x the gap at
    the smallest radius should vanish; the audit passes when it is below
    `gap_tolerance`.
    """
    betas = tuple(float(b) for b in beta_sequence)
    if len(betas) < 1 or any(b <= 0 for b in betas) or any(
        b2 >= b1 for b1, b2 in zip(betas, betas[1:])
    ):
        raise InvalidInputError("beta sequence must be strictly decreasing and positive")
    point = regularity_index(J, x, search_budget)
    values = tuple(
        ball_index(J, x, b, ball_budget, search_budget, coverage_allowance=0.0) for b in betas
    )
    gap = abs(point.upper - values[-1].upper)
    return BetaLimitReport(
        betas=betas,
        ball_values=values,
        point_value=point,
        gap_at_smallest=float(gap),
        passes=bool(gap <= gap_tolerance),
        gap_tolerance=gap_tolerance,
    )


@dataclass(frozen=True)
class GrowthReport:
    """Sampled check of ||f(x+h) - f(x)|| >= floor * ||h|| for ||h|| < beta."""

    violations: int
    worst_ratio: float
    trials: int
    floor: float
    beta: float

    def to_json_dict(self) -> dict:
        return {
            "violations": self.violations,
            "worst_ratio": self.worst_ratio,
            "trials": self.trials,
            "floor": self.floor,
            "beta": self.beta,
        }


def growth_bound_audit(
    f: MappingSpec,
    J: PseudoJacobianMap,
    x,
    beta: float,
    trials: int = 500,
    seed: int = 0,
    slack: float = 1e-6,
    ball_budget: BallBudget | None = None,
    search_budget: SearchBudget | None = None,
) -> GrowthReport:
    """Sample steps h inside the beta-ball and check the growth inequality
    against the lower end of the ball-index enclosure.

    `worst_ratio` is min over samples of ||f(x+h)-f(x)|| / (floor * ||h||);
    violations count samples below 1 - slack.  Requires a positive floor.
    """
    x = as_position(x, f.dim)
    floor = ball_index(J, x, beta, ball_budget, search_budget).lower
    if floor <= 0.0:
        raise DomainError("growth bound audit requires a positive ball index floor")
    rng = sampling.rng_for(seed, "growth")
    fx = mapping_value(f, x)
    worst = np.inf
    violations = 0
    for _ in range(trials):
        u = rng.standard_normal(f.dim)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            continue
        r = beta * rng.uniform(0.0, 1.0) ** (1.0 / f.dim)
        h = u / norm * min(r, beta * (1.0 - 1e-12))
        if np.linalg.norm(h) == 0.0:
            continue
        ratio = float(np.linalg.norm(mapping_value(f, x + h) - fx) / (floor * np.linalg.norm(h)))
        worst = min(worst, ratio)
        if ratio < 1.0 - slack:
            violations += 1
    return GrowthReport(
        violations=violations, worst_ratio=float(worst), trials=trials,
        floor=float(floor), beta=float(beta),
    )


# ---------------------------------------------------------------------------
# radial profiles and inscribed balls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegularityProfile:
    """Sampled radial lower bound eta(t) on the regularity index around a center.

    eta[i] is the minimum index lower bound over the sampled sphere of radius
    radii[i]; sigma_lower is the conservative lower Riemann sum of eta over
    [0, rho] (per-interval endpoint minimum).  Not certifying when some eta
    estimate is nonpositive, in which case sigma_lower is None.
    """

    center: tuple
    radii: np.ndarray
    eta: np.ndarray
    sphere_count: int
    certifying: bool
    sigma_lower: float | None
    seed: int

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if radii.size != eta.size or radii.size < 1:
            raise InvalidInputError("profile grids must align")
        if radii[0] != 0.0 or np.any(np.diff(radii) <= 0):
            raise InvalidInputError("radii must strictly increase from 0")
        if not np.all(np.isfinite(eta)):
            raise InvalidInputError("eta values must be finite")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "eta", eta)

    @property
    def rho(self) -> float:
        return float(self.radii[-1])

    def cumulative_lower_sums(self) -> np.ndarray:
        """Lower-sum integral of eta from 0 to each grid radius."""
        if self.radii.size == 1:
            return np.zeros(1)
        mins = np.minimum(self.eta[:-1], self.eta[1:])
        pieces = mins * np.diff(self.radii)
        return np.concatenate([[0.0], np.cumsum(pieces)])

    def to_json_dict(self) -> dict:
        return {
            "center": [float(v) for v in self.center],
            "radii": self.radii.tolist(),
            "eta": self.eta.tolist(),
            "sphere_count": self.sphere_count,
            "certifying": self.certifying,
            "sigma_lower": None if self.sigma_lower is None else float(self.sigma_lower),
            "seed": self.seed,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["t", "eta_lower", "samples"])
        for t, e in zip(self.radii, self.eta):
            samples = 1 if t == 0.0 else self.sphere_count
            writer.writerow([repr(float(t)), repr(float(e)), samples])
        return buf.getvalue()


def radial_profile(
    J: PseudoJacobianMap,
    x0,
    rho: float,
    n_radii: int = 33,
    sphere_count: int = 256,
    search_budget: SearchBudget | None = None,
    seed: int = 0,
    threads: int = 1,
) -> RegularityProfile:
    """Sample eta(t) = min over the sphere ||x - x0|| = t of the index lower bound.

    Radii form a uniform grid on [0, rho]; eta(0) is the index at the center
    itself.  rho = 0 degenerates to the trivial single-point profile with
    sigma = 0.  Spheres use low-discrepancy points for n <= 3 and seeded
    Gaussian directions above.
    """
    x0 = as_position(x0, J.dim)
    if rho < 0:
        raise DomainError("profile radius must be nonnegative")
    if rho == 0.0:
        eta0 = regularity_index(J, x0, search_budget).lower
        return RegularityProfile(
            center=tuple(map(float, x0)), radii=np.array([0.0]), eta=np.array([eta0]),
            sphere_count=sphere_count, certifying=bool(eta0 > 0.0), sigma_lower=0.0, seed=seed,
        )
    if n_radii < 2:
        raise InvalidInputError("need at least two radii")
    radii = np.linspace(0.0, rho, n_radii)

    def eta_at(i: int) -> float:
        t = radii[i]
        if t == 0.0:
            return regularity_index(J, x0, search_budget).lower
        dirs = sampling.sphere_grid(J.dim, sphere_count, seed, "profile", i)
        return min(
            regularity_index(J, x0 + t * u, search_budget).lower for u in dirs
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            eta = np.array(list(pool.map(eta_at, range(n_radii))))
    else:
        eta = np.array([eta_at(i) for i in range(n_radii)])

    certifying = bool(np.all(eta > 0.0))
    sigma = None
    if certifying:
        sigma = float((np.minimum(eta[:-1], eta[1:]) * np.diff(radii)).sum())
    return RegularityProfile(
        center=tuple(map(float, x0)), radii=radii, eta=eta, sphere_count=sphere_count,
        certifying=certifying, sigma_lower=sigma, seed=seed,
    )


@dataclass(frozen=True)
class InvertibilityBallCertificate:
    """Certified inscribed ball: f(center) + sigma*B inside the image of the
    rho-ball, together with the radial growth data backing it."""

    center: tuple
    center_image: tuple
    rho: float
    sigma: float
    radii: np.ndarray
    cumulative_integral: np.ndarray
    caveats: tuple

    def growth_floor(self, distance: float) -> float:
        """Lower bound on ||f(x) - f(center)|| at ||x - center|| = distance."""
        return float(np.interp(distance, self.radii, self.cumulative_integral))

    def to_json_dict(self) -> dict:
        return {
            "center": [float(v) for v in self.center],
            "center_image": [float(v) for v in self.center_image],
            "rho": self.rho,
            "sigma_lower": self.sigma,
            "radii": self.radii.tolist(),
            "cumulative_integral": self.cumulative_integral.tolist(),
            "caveats": list(self.caveats),
        }


def invertibility_ball(profile: RegularityProfile, f: MappingSpec) -> InvertibilityBallCertificate:
    """Emit the inscribed-ball certificate from a certifying profile.

    The image of the rho-ball around the center covers f(center) + sigma*B,
    and ||f(x) - f(center)|| dominates the cumulative integral of eta up to
    ||x - center||; both statements inherit the sphere-sampling caveat.
    """
    if not profile.certifying or profile.sigma_lower is None:
        bad = int(np.argmin(profile.eta))
        raise NotCertifyingError(
            "profile is not certifying: eta estimate "
            f"{profile.eta[bad]:.3e} at radius {profile.radii[bad]:.6g} is not positive"
        )
    center = np.array(profile.center)
    image = mapping_value(f, center)
    return InvertibilityBallCertificate(
        center=profile.center,
        center_image=tuple(float(v) for v in image),
        rho=profile.rho,
        sigma=float(profile.sigma_lower),
        radii=profile.radii.copy(),
        cumulative_integral=profile.cumulative_lower_sums(),
        caveats=(
            f"eta sampled on {profile.sphere_count} sphere points per radius; "
            "spherical infima are sampled, not exact",
            "sigma is a lower Riemann sum of the sampled eta",
        ),
    )


# ---------------------------------------------------------------------------
# Hadamard-type certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialMinorant:
    """Declared radial minorant with an analytic integral.

    kinds: "constant" (eta = c, divergent integral) and "inverse-linear"
    (eta = c/(1+t), log-divergent integral).
    """

    kind: str
    c: float

    def __post_init__(self):
        if self.kind not in ("constant", "inverse-linear"):
            raise InvalidInputError("minorant kind must be 'constant' or 'inverse-linear'")

    @classmethod
    def constant(cls, c: float) -> "RadialMinorant":
        return cls("constant", float(c))

    @classmethod
    def inverse_linear(cls, c: float) -> "RadialMinorant":
        return cls("inverse-linear", float(c))

    @classmethod
    def parse(cls, text: str) -> "RadialMinorant":
        try:
            kind, value = text.split(":", 1)
            c = float(value)
        except ValueError:
            raise InvalidInputError(
                f"bad minorant '{text}'; use const:<c> or invlinear:<c>"
            ) from None
        if kind == "const":
            return cls.constant(c)
        if kind == "invlinear":
            return cls.inverse_linear(c)
        raise InvalidInputError(f"bad minorant kind '{kind}'; use const or invlinear")

    @property
    def divergent(self) -> bool:
        return self.c > 0.0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.c)
        return self.c / (1.0 + t)

    def integral(self, r_max: float) -> float:
        if self.kind == "constant":
            return self.c * r_max
        return float(self.c * np.log1p(r_max))

    def describe(self) -> str:
        if self.kind == "constant":
            return f"eta(t) = {self.c}"
        return f"eta(t) = {self.c}/(1+t)"


@dataclass(frozen=True)
class HadamardVerdict:
    """Outcome of the radial-integral certifier."""

    certified_global: bool
    integral_lower: float
    r_max: float
    reason: str
    witness_radius: float | None
    caveats: tuple

    def to_json_dict(self) -> dict:
        return {
            "certified_global": self.certified_global,
            "integral_lower": self.integral_lower,
            "r_max": self.r_max,
            "reason": self.reason,
            "witness_radius": self.witness_radius,
            "caveats": list(self.caveats),
        }


def _lower_sum(values: np.ndarray, grid: np.ndarray) -> float:
    mins = np.minimum(values[:-1], values[1:])
    return float((mins * np.diff(grid)).sum())


def hadamard_certify(
    J: PseudoJacobianMap,
    f: MappingSpec,
    eta,
    r_max: float,
    divergence_threshold: float = 1.0,
    center=None,
    declared_minorant: RadialMinorant | None = None,
    check_radii: int = 33,
    sphere_count: int = 64,
    n_grid: int = 2_000_001,
    search_budget: SearchBudget | None = None,
    seed: int = 0,
) -> HadamardVerdict:
    """Certify global invertibility from a radial lower bound on the index.

    `eta` is a :class:`RadialMinorant`, a :class:`RegularityProfile`, or a
    callable t -> eta(t).  The minorant (or the callable's declared minorant)
    is verified pointwise against sampled index values on spheres up to
    `r_max`; a violation refuses certification with the witness radius.
    Divergence of the integral can never be observed numerically, so
    certification requires an analytically divergent declared form: a
    verified constant floor certifies outright, an inverse-linear minorant
    certifies when the observed integral lower bound exceeds
    `divergence_threshold`.  A bare callable is never certified; its lower-sum
    integral over [0, r_max] is still reported.  Every verdict carries the
    caveat that sampling covers only the r_max ball.
    """
    if r_max <= 0:
        raise DomainError("r_max must be positive")
    center = np.zeros(J.dim) if center is None else as_position(center, J.dim)
    caveats = (
        f"sampling covers only ||x - center|| <= {r_max}; behavior beyond is declared, not observed",
        f"spherical infima sampled on {sphere_count} points per radius",
    )

    # Radial eta evaluations used for the integral.
    if isinstance(eta, RadialMinorant):
        minorant: RadialMinorant | None = eta
        eta_fn = eta.value
        integral_lower = eta.integral(r_max)
    elif isinstance(eta, RegularityProfile):
        if r_max > eta.rho:
            raise DomainError("r_max exceeds the profile radius")
        minorant = declared_minorant
        grid = eta.radii
        mask = grid <= r_max
        eta_fn = lambda t, _p=eta: np.interp(t, _p.radii, _p.eta)  # noqa: E731
        integral_lower = _lower_sum(eta.eta[mask], grid[mask])
    elif callable(eta):
        minorant = declared_minorant
        eta_fn = eta
        grid = np.linspace(0.0, r_max, n_grid)
        try:
            vals = np.asarray(eta(grid), dtype=float)
            if vals.shape != grid.shape:
                raise TypeError
        except Exception:
            vals = np.array([float(eta(t)) for t in grid])
        integral_lower = _lower_sum(vals, grid)
    else:
        raise InvalidInputError("eta must be a RadialMinorant, RegularityProfile, or callable")

    # Nonpositivity scan of the declared eta on a coarse grid.
    coarse = np.linspace(0.0, r_max, max(check_radii, 2))
    coarse_vals = np.atleast_1d(np.asarray(eta_fn(coarse), dtype=float))
    if coarse_vals.size != coarse.size:
        coarse_vals = np.array([float(eta_fn(t)) for t in coarse])
    bad = np.flatnonzero(coarse_vals <= 0.0)
    if bad.size:
        t_bad = float(coarse[bad[0]])
        return HadamardVerdict(
            certified_global=False, integral_lower=float(integral_lower), r_max=float(r_max),
            reason=f"eta is not positive at radius {t_bad:.6g}",
            witness_radius=t_bad, caveats=caveats,
        )

    # Pointwise verification of eta against sampled index values.
    for i, t in enumerate(coarse):
        if t == 0.0:
            alpha = regularity_index(J, center, search_budget).lower
        else:
            dirs = sampling.sphere_grid(J.dim, sphere_count, seed, "hadamard", i)
            alpha = min(
                regularity_index(J, center + t * u, search_budget).lower for u in dirs
            )
        if float(coarse_vals[i]) > alpha + 1e-9:
            return HadamardVerdict(
                certified_global=False, integral_lower=float(integral_lower),
                r_max=float(r_max),
                reason=(
                    f"declared eta({t:.6g}) = {float(coarse_vals[i]):.6g} exceeds the sampled "
                    f"index floor {alpha:.6g}"
                ),
                witness_radius=float(t), caveats=caveats,
            )

    # Certification requires an analytically divergent declared form.
    if minorant is not None and minorant is not eta:
        # callable (or profile) with a declared minorant: check eta >= minorant.
        m_vals = minorant.value(coarse)
        gap = coarse_vals - m_vals
        if np.any(gap < -1e-12):
            t_bad = float(coarse[int(np.argmin(gap))])
            return HadamardVerdict(
                certified_global=False, integral_lower=float(integral_lower),
                r_max=float(r_max),
                reason=f"eta drops below its declared minorant at radius {t_bad:.6g}",
                witness_radius=t_bad, caveats=caveats,
            )

    if minorant is None:
        return HadamardVerdict(
            certified_global=False, integral_lower=float(integral_lower), r_max=float(r_max),
            reason="no declared divergent minorant; divergence is not verifiable from samples",
            witness_radius=None, caveats=caveats,
        )
    if not minorant.divergent:
        return HadamardVerdict(
            certified_global=False, integral_lower=float(integral_lower), r_max=float(r_max),
            reason="declared minorant is not positive",
            witness_radius=None, caveats=caveats,
        )
    if minorant.kind == "constant":
        return HadamardVerdict(
            certified_global=True, integral_lower=float(integral_lower), r_max=float(r_max),
            reason=f"verified constant floor {minorant.c}; its radial integral diverges",
            witness_radius=None, caveats=caveats,
        )
    if integral_lower > divergence_threshold:
        return HadamardVerdict(
            certified_global=True, integral_lower=float(integral_lower), r_max=float(r_max),
            reason=(
                f"verified {minorant.describe()}, analytically divergent; observed integral "
                f"{integral_lower:.6g} exceeds threshold {divergence_threshold}"
            ),
            witness_radius=None, caveats=caveats,
        )
    return HadamardVerdict(
        certified_global=False, integral_lower=float(integral_lower), r_max=float(r_max),
        reason=(
            f"observed integral {integral_lower:.6g} does not exceed threshold "
            f"{divergence_threshold}"
        ),
        witness_radius=None, caveats=caveats,
    )


# ---------------------------------------------------------------------------
# compact-set characterization check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PreimageRecord:
    target: tuple
    preimage: tuple
    residual: float
    alpha_lower: float

    def to_json_dict(self) -> dict:
        return {
            "target": [float(v) for v in self.target],
            "preimage": [float(v) for v in self.preimage],
            "residual": self.residual,
            "alpha_lower": self.alpha_lower,
        }


@dataclass(frozen=True)
class CompactSetReport:
    """Desk-scale surrogate for the compact-set regularity characterization.

    alpha_K_lower is the minimum index lower bound over the preimages found
    inside the search box; completeness of the preimage search is limited to
    that box, which is recorded as a caveat rather than claimed away.
    """

    alpha_K_lower: float | None
    found: tuple
    misses: tuple
    caveats: tuple

    def to_json_dict(self) -> dict:
        return {
            "alpha_K_lower": self.alpha_K_lower,
            "found": [r.to_json_dict() for r in self.found],
            "misses": [
                {"target": [float(v) for v in t], "reason": reason} for t, reason in self.misses
            ],
            "caveats": list(self.caveats),
        }


def compact_set_check(
    J: PseudoJacobianMap,
    f: MappingSpec,
    k_points,
    search_box,
    grid_per_dim: int = 41,
    polish_tol: float = 1e-8,
    search_budget: SearchBudget | None = None,
) -> CompactSetReport:
    """Locate preimages of finitely many targets inside a bounded box and
    report the minimum regularity floor among them.

    Grid search proposes candidates; local inversion polishes them.  Targets
    with no polished preimage in the box are reported per-point, not fatally.
    """
    from .inversion import local_invert  # deferred: inversion builds on this module

    lo, hi = (np.asarray(b, dtype=float).reshape(-1) for b in search_box)
    if lo.size != f.dim or hi.size != f.dim or np.any(hi <= lo):
        raise InvalidInputError("search box must be bounded with lower < upper")
    targets = [as_position(t, f.dim) for t in np.atleast_2d(np.asarray(k_points, dtype=float))]

    axes = [np.linspace(lo[d], hi[d], grid_per_dim) for d in range(f.dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, f.dim)
    images = np.stack([mapping_value(f, p) for p in mesh])

    found: list[PreimageRecord] = []
    misses: list[tuple] = []
    for target in targets:
        best = int(np.argmin(np.linalg.norm(images - target[None, :], axis=1)))
        try:
            x_star = local_invert(f, J, mesh[best], target, tol=polish_tol,
                                  search_budget=search_budget)
        except PjinvError as exc:
            misses.append((tuple(map(float, target)), f"polish failed: {exc}"))
            continue
        if np.any(x_star < lo - 1e-9) or np.any(x_star > hi + 1e-9):
            misses.append((tuple(map(float, target)), "polished preimage left the search box"))
            continue
        residual = float(np.linalg.norm(mapping_value(f, x_star) - target))
        alpha = regularity_index(J, x_star, search_budget).lower
        found.append(
            PreimageRecord(
                target=tuple(map(float, target)),
                preimage=tuple(map(float, x_star)),
                residual=residual,
                alpha_lower=float(alpha),
            )
        )
    alpha_k = min((r.alpha_lower for r in found), default=None)
    return CompactSetReport(
        alpha_K_lower=alpha_k,
        found=tuple(found),
        misses=tuple(misses),
        caveats=(
            "preimage search is complete only relative to the supplied box and grid",
            f"grid: {grid_per_dim} points per dimension",
        ),
    )


# ---------------------------------------------------------------------------
# mean-value inclusion audit
# ---------------------------------------------------------------------------


def segment_hull(J: PseudoJacobianMap, u, v, samples: int = 64) -> MatrixPolytope:
    """Union hull of the pseudo-Jacobian over a sampled segment [u, v]."""
    u = as_position(u, J.dim)
    v = as_position(v, J.dim)
    vertices: list[np.ndarray] = []
    rays: list[np.ndarray] = []
    for t in np.linspace(0.0, 1.0, samples):
        poly = eval_at(J, u + t * (v - u))
        vertices.extend(poly.vertices)
        rays.extend(poly.rays)
    return MatrixPolytope(vertices=dedupe_matrices(vertices), rays=dedupe_matrices(rays))


def mean_value_gap(f: MappingSpec, J: PseudoJacobianMap, u, v, samples: int = 64) -> float:
    """Distance from f(u) - f(v) to the segment-hull image set H (u - v).

    The mean-value inclusion puts f(u) - f(v) inside the closed hull of the
    pseudo-Jacobian along the segment applied to u - v; the returned distance
    is the sampled-hull violation (convex minimization over hull weights).
    """
    u = as_position(u, f.dim)
    v = as_position(v, f.dim)
    hull = segment_hull(J, u, v, samples)
    delta = u - v
    target = mapping_value(f, u) - mapping_value(f, v)
    return image_set_distance(hull, delta, target)
