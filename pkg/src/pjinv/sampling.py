"""Deterministic sampling primitives: seed splitting, sphere points, ball shells.

Every stochastic choice in the toolkit flows through :func:`rng_for`, which
derives a child generator from a 64-bit seed plus a tuple of labels.  Equal
(seed, labels) pairs always produce the same stream, so operations are pure
functions of their inputs plus the seed they were handed.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

_SEED_MASK = (1 << 64) - 1


def _label_key(label) -> int:
    if isinstance(label, (bool, int, np.integer)):
        return int(label) & 0xFFFFFFFF
    if isinstance(label, (float, np.floating)):
        return zlib.crc32(struct.pack("<d", float(label)))
    return zlib.crc32(str(label).encode("utf-8"))


def rng_for(seed: int, *labels) -> np.random.Generator:
    """Child generator for (seed, labels); the documented splitting scheme.

    Labels may be ints, floats, or strings.  Floats are keyed by their IEEE
    bit pattern, so e.g. a shell of radius 0.25 gets the same directions no
    matter which enclosing ball requested it.
    """
    key = tuple(_label_key(lbl) for lbl in labels)
    ss = np.random.SeedSequence(entropy=int(seed) & _SEED_MASK, spawn_key=key)
    return np.random.default_rng(ss)


def sphere_points(dim: int, count: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """`count` unit vectors in R^dim, shape (count, dim).

    dim 1 alternates +1/-1 and dim 2 uses evenly spaced angles (rotated by a
    seeded offset when `rng` is given); both are low-discrepancy.  Higher
    dimensions use normalized Gaussian draws and require `rng`.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if dim == 1:
        pts = np.ones((count, 1))
        pts[1::2, 0] = -1.0
        return pts
    if dim == 2:
        offset = 0.0 if rng is None else float(rng.uniform(0.0, 2.0 * np.pi))
        angles = offset + 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if rng is None:
        raise ValueError("dim >= 3 requires an explicit generator")
    raw = rng.standard_normal((count, dim))
    norms = np.linalg.norm(raw, axis=1)
    norms[norms == 0.0] = 1.0
    return raw / norms[:, None]


def fibonacci_sphere(count: int) -> np.ndarray:
    """Deterministic quasi-uniform points on the 2-sphere (dim 3 only)."""
    i = np.arange(count) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / count)
    golden = np.pi * (1.0 + np.sqrt(5.0))
    theta = golden * i
    return np.column_stack(
        [np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)]
    )


def sphere_grid(dim: int, count: int, seed: int = 0, *labels) -> np.ndarray:
    """Sphere sample used for infima over spheres: low-discrepancy for n <= 3."""
    if dim == 1:
        return sphere_points(1, min(count, 2))
    if dim == 2:
        return sphere_points(2, count)
    if dim == 3:
        return fibonacci_sphere(count)
    return sphere_points(dim, count, rng_for(seed, "sphere", *labels))


def shell_radii(beta: float, min_radius: float, max_shells: int) -> np.ndarray:
    """Ascending dyadic shell radii beta * 2^-j, floored at an absolute radius.

    The floor is absolute rather than relative so that the shell set for a
    smaller ball is a subset of the shell set for a 2^m-times larger one;
    that nesting is what makes ball samples prefix-compatible across radii.
    """
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    radii = []
    r = float(beta)
    while r >= min_radius and len(radii) < max_shells:
        radii.append(r)
        r *= 0.5
    if not radii:
        radii = [float(beta)]
    return np.array(radii[::-1])


def shell_directions(dim: int, count: int, seed: int, radius: float) -> np.ndarray:
    """Directions for one shell, seeded by the shell radius bit pattern."""
    rng = rng_for(seed, "shell", float(radius))
    if dim <= 2:
        return sphere_points(dim, count, rng)
    return sphere_points(dim, count, rng)


def ball_shell_points(
    center: np.ndarray,
    beta: float,
    directions_per_shell: int,
    min_radius: float,
    max_shells: int,
    seed: int = 0,
) -> np.ndarray:
    """Sample of the closed ball center + beta*B: the center, then dyadic shells.

    Points are ordered center-first, shells by ascending radius, so the sample
    for beta is a prefix of the sample for 2^m * beta under the same seed.
    """
    center = np.asarray(center, dtype=float)
    radii = shell_radii(beta, min_radius, max_shells)
    chunks = [center[None, :]]
    for r in radii:
        dirs = shell_directions(center.size, directions_per_shell, seed, float(r))
        chunks.append(center[None, :] + r * dirs)
    return np.vstack(chunks)
