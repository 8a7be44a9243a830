"""Scalar Dini derivative estimates, path lengths, and mean-value audits.

The lower/upper scalar derivatives of f at x are the liminf/limsup of
||f(y) - f(x)|| / ||y - x|| as y -> x.  Finite sampling can only see finitely
many directions and radii, so the lower estimate is biased upward and the
upper estimate downward; estimates carry their budget and are never claimed
as two-sided enclosures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sampling
from .errors import DomainError, InvalidInputError
from .pseudojac import MappingSpec, as_position, mapping_value

DEFAULT_RADII = tuple(np.geomspace(1e-2, 1e-7, 11))
#: Quotients are aggregated over radii within this factor of the smallest.
BAND_FACTOR = 100.0


@dataclass(frozen=True)
class DiniEstimate:
    """Sampled difference-quotient statistics at a point.

    `lower` estimates the lower scalar derivative (an over-estimate of the
    true liminf), `upper` the upper one (an under-estimate of the limsup).
    """

    point: tuple
    lower: float
    upper: float
    radii_used: tuple
    directions_used: int

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise InvalidInputError("dini lower exceeds upper")

    def to_json_dict(self) -> dict:
        return {
            "point": [float(v) for v in self.point],
            "lower": float(self.lower),
            "upper": float(self.upper),
            "radii_used": [float(r) for r in self.radii_used],
            "directions_used": self.directions_used,
        }


def _estimate(f: MappingSpec, x, radii, directions, seed: int) -> DiniEstimate:
    x = as_position(x, f.dim)
    if radii is None:
        radii = DEFAULT_RADII
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    if radii.size == 0 or radii[-1] <= 0:
        raise InvalidInputError("radii must be positive")
    if directions is None:
        directions = max(64, 64 * f.dim)
    if directions < 64:
        raise InvalidInputError("need at least 64 directions")
    dirs = sampling.sphere_grid(f.dim, directions, seed, "dini")
    fx = mapping_value(f, x)

    band = radii <= radii.min() * BAND_FACTOR
    quotients = np.empty((int(band.sum()), dirs.shape[0]))
    for i, r in enumerate(radii[band]):
        for j, u in enumerate(dirs):
            quotients[i, j] = np.linalg.norm(mapping_value(f, x + r * u) - fx) / r
    return DiniEstimate(
        point=tuple(float(v) for v in x),
        lower=float(quotients.min()),
        upper=float(quotients.max()),
        radii_used=tuple(float(r) for r in radii),
        directions_used=int(dirs.shape[0]),
    )


def dini_lower(f: MappingSpec, x, radii=None, directions=None, seed: int = 0) -> DiniEstimate:
    """Estimate of the lower scalar derivative at x (headline field `.lower`).

    One-sided shrinking-radius bands mirror the liminf structure; the minimum
    difference quotient over the smallest-radius band is reported.  Being a
    minimum over finitely many samples, it over-estimates the true liminf.
    """
    return _estimate(f, x, radii, directions, seed)


def dini_upper(f: MappingSpec, x, radii=None, directions=None, seed: int = 0) -> DiniEstimate:
    """Estimate of the upper scalar derivative at x (headline field `.upper`);
    an under-estimate of the true limsup."""
    return _estimate(f, x, radii, directions, seed)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathSample:
    """A sampled path q on [a, b] together with its image under a mapping."""

    parameter_grid: np.ndarray
    points: np.ndarray
    image_points: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.parameter_grid, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        img = np.asarray(self.image_points, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise InvalidInputError("parameter grid needs at least two samples")
        if np.any(np.diff(grid) <= 0):
            raise InvalidInputError("parameter grid must be strictly ascending")
        if pts.shape[0] != grid.size or img.shape[0] != grid.size:
            raise InvalidInputError("grids and point arrays must align")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(img))):
            raise InvalidInputError("path points must be finite")
        object.__setattr__(self, "parameter_grid", grid)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "image_points", img)

    @classmethod
    def from_mapping(cls, f: MappingSpec, points, a: float = 0.0, b: float = 1.0) -> "PathSample":
        points = np.asarray(points, dtype=float)
        grid = np.linspace(a, b, points.shape[0])
        images = np.stack([mapping_value(f, p) for p in points])
        return cls(parameter_grid=grid, points=points, image_points=images)

    @classmethod
    def straight_segment(cls, f: MappingSpec, x0, x1, samples: int = 33) -> "PathSample":
        x0 = np.asarray(x0, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        ts = np.linspace(0.0, 1.0, samples)
        pts = x0[None, :] + ts[:, None] * (x1 - x0)[None, :]
        return cls.from_mapping(f, pts)


def path_length(p: PathSample) -> float:
    """Polygonal length of the image path; nondecreasing under grid refinement."""
    deltas = np.diff(p.image_points, axis=0)
    return float(np.linalg.norm(deltas, axis=1).sum())


@dataclass(frozen=True)
class MviReport:
    """Mean-value-inequality audit: image length vs. Dini floor times chord."""

    lhs: float
    rhs_floor: float
    floor: float
    chord: float
    passes: bool
    grid_points: int

    def to_json_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs_floor": self.rhs_floor,
            "floor": self.floor,
            "chord": self.chord,
            "passes": self.passes,
            "grid_points": self.grid_points,
        }


def mvi_audit(
    f: MappingSpec,
    q: PathSample,
    radii=None,
    directions=None,
    seed: int = 0,
    slack: float = 1e-3,
) -> MviReport:
    """Check length(f o q) >= (inf over grid of dini_lower) * ||q(b) - q(a)||.

    The inequality holds at some intermediate point of the path; testing the
    path infimum is the assertable consequence (the existential point itself
    is not computable).
    """
    chord = float(np.linalg.norm(q.points[-1] - q.points[0]))
    if chord == 0.0:
        raise DomainError("degenerate path: endpoints coincide")
    image = np.stack([mapping_value(f, p) for p in q.points])
    lhs = float(np.linalg.norm(np.diff(image, axis=0), axis=1).sum())
    floor = min(
        _estimate(f, p, radii, directions, seed).lower for p in q.points
    )
    rhs_floor = floor * chord
    return MviReport(
        lhs=lhs,
        rhs_floor=rhs_floor,
        floor=float(floor),
        chord=chord,
        passes=lhs >= rhs_floor * (1.0 - slack),
        grid_points=int(q.points.shape[0]),
    )
