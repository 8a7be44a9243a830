"""Matrix and matrix-set algebra: co-norms of matrices, hulls, and recession cones.

The co-norm of a square matrix A is inf over unit vectors u of ||Au||, which
in the Euclidean setting equals the smallest singular value; it is positive
exactly when A is invertible.  This module extends the co-norm to finitely
generated convex matrix sets

    co(vertices) + cone(rays),

returning an :class:`Enclosure` of the infimum.  The upper end is always the
exact co-norm of an explicit member of the set found by optimization, so it
is a genuine upper bound of the infimum.  The lower end subtracts only the
numeric margin: it is a floor *up to sampling coverage* of the unit sphere,
which is the recorded caveat of every derived certificate.  Single-vertex,
ray-free sets are computed exactly and the enclosure degenerates to a point.

Unbounded sets (nonempty rays) cannot be enumerated; rays are expanded onto a
geometric grid of magnitudes before hull search, and :func:`recession_conorm`
separately audits the limiting directions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from . import sampling
from .errors import DomainError, InvalidInputError

#: Default threshold for "is zero" decisions on co-norm values.
ZERO_TOL = 1e-9

Matrix = np.ndarray


def as_square_matrix(a) -> np.ndarray:
    """Validate and return a finite square float matrix."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix entries must be finite")
    return m


def co_norm(a) -> float:
    """Co-norm of a single matrix: inf_{||u||=1} ||Au||, the smallest singular value.

    For invertible A this equals 1/||A^-1|| in the operator 2-norm.
    """
    m = as_square_matrix(a)
    return float(np.linalg.svd(m, compute_uv=False)[-1])


@dataclass(frozen=True)
class Enclosure:
    """Two-sided bracket [lower, upper] for an optimized infimum."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise InvalidInputError("enclosure ends must be finite")
        if self.lower > self.upper + 1e-12:
            raise InvalidInputError("enclosure lower end exceeds upper end")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_json_dict(self) -> dict:
        return {"lower": float(self.lower), "upper": float(self.upper)}


@dataclass(frozen=True)
class SearchBudget:
    """Deterministic budget for the sphere/hull co-norm search.

    directions/rounds drive the outer minimization over unit vectors; the
    inner minimization over hull weights runs accelerated projected gradient
    for `inner_iterations` steps (tolerance `inner_tol`) plus an exact
    nonnegative least-squares polish of the best `polish_candidates`
    directions.  Rays are expanded over a geometric magnitude grid
    [ray_t_min, ray_t_max] with `ray_points` points; `max_expanded` caps the
    expanded vertex count (the effective grid is recorded by callers).
    """

    directions: int = 256
    rounds: int = 4
    inner_iterations: int = 200
    inner_tol: float = 1e-10
    ray_t_min: float = 1e-3
    ray_t_max: float = 1e3
    ray_points: int = 64
    max_expanded: int = 1024
    polish_candidates: int = 8
    margin: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if min(self.directions, self.rounds, self.inner_iterations, self.ray_points) < 1:
            raise InvalidInputError("search budget counts must be positive")
        if self.ray_t_min <= 0 or self.ray_t_max < self.ray_t_min:
            raise InvalidInputError("ray grid must satisfy 0 < t_min <= t_max")
        if self.margin < 0 or self.inner_tol <= 0:
            raise InvalidInputError("margin must be nonnegative and inner_tol positive")


DEFAULT_BUDGET = SearchBudget()


@dataclass(frozen=True)
class MatrixPolytope:
    """Finitely generated convex matrix set co(vertices) + cone(rays).

    Vertices generate the convex hull; rays generate the recession cone and
    are stored normalized to unit Frobenius norm.  All members share `dim`.
    """

    vertices: tuple
    rays: tuple = ()
    dim: int = 0

    def __post_init__(self):
        verts = tuple(as_square_matrix(v) for v in self.vertices)
        if not verts:
            raise InvalidInputError("polytope needs at least one vertex")
        n = verts[0].shape[0]
        dim = self.dim if self.dim else n
        if dim != n or any(v.shape[0] != n for v in verts):
            raise InvalidInputError("all vertices must share the polytope dimension")
        rays = []
        for r in self.rays:
            r = as_square_matrix(r)
            if r.shape[0] != n:
                raise InvalidInputError("ray dimension mismatch")
            norm = float(np.linalg.norm(r))
            if norm <= 0.0:
                raise InvalidInputError("zero matrix is not a recession direction")
            rays.append(r / norm)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "rays", tuple(rays))
        object.__setattr__(self, "dim", n)

    @classmethod
    def singleton(cls, a) -> "MatrixPolytope":
        return cls(vertices=(as_square_matrix(a),))

    @property
    def is_singleton(self) -> bool:
        return len(self.vertices) == 1 and not self.rays

    def vertex_array(self) -> np.ndarray:
        return np.stack(self.vertices)

    def expanded_vertex_array(self, budget: SearchBudget = DEFAULT_BUDGET) -> np.ndarray:
        """Vertices plus v + t*ray over a geometric magnitude grid, stacked (k, n, n).

        The grid is capped so the expansion stays within budget.max_expanded;
        for well-posed inputs the co-norm stabilizes as t grows, and
        :func:`recession_conorm` audits the limit directions separately.
        """
        verts = list(self.vertices)
        if self.rays:
            n_pairs = len(self.vertices) * len(self.rays)
            points = min(budget.ray_points, max(4, budget.max_expanded // max(n_pairs, 1)))
            grid = np.geomspace(budget.ray_t_min, budget.ray_t_max, points)
            for v in self.vertices:
                for r in self.rays:
                    verts.extend(v + t * r for t in grid)
        return np.stack(verts)

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "vertices": [v.tolist() for v in self.vertices],
            "rays": [r.tolist() for r in self.rays],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "MatrixPolytope":
        try:
            vertices = tuple(np.array(v, dtype=float) for v in data["vertices"])
            rays = tuple(np.array(r, dtype=float) for r in data.get("rays", []))
            dim = int(data.get("dim", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed polytope document: {exc}") from exc
        return cls(vertices=vertices, rays=rays, dim=dim)


def dedupe_matrices(mats) -> tuple:
    """Drop exact duplicates, preserving first-seen order."""
    seen = set()
    out = []
    for m in mats:
        key = np.ascontiguousarray(m).tobytes()
        if key not in seen:
            seen.add(key)
            out.append(m)
    return tuple(out)


def support_function(S: MatrixPolytope, v, u, ray_tol: float = 1e-12) -> float:
    """sup over A in S of <v, Au>.  Linear in A, so exact: max over vertices,
    +inf when some ray has positive pairing."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    best = max(float(v @ (vert @ u)) for vert in S.vertices)
    for r in S.rays:
        if float(v @ (r @ u)) > ray_tol:
            return np.inf
    return best


# ---------------------------------------------------------------------------
# hull co-norm search
# ---------------------------------------------------------------------------


def _project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row of y onto the probability simplex."""
    d, k = y.shape
    u = np.sort(y, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, k + 1)
    cond = u - css / ind > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(d), rho] / (rho + 1.0)
    return np.maximum(y - theta[:, None], 0.0)


def _fista_simplex(V: np.ndarray, U: np.ndarray, iterations: int, tol: float) -> np.ndarray:
    """For each direction u (rows of U), minimize ||sum_i w_i V_i u||^2 over the
    weight simplex by accelerated projected gradient.  Returns best weights (d, k)."""
    k = V.shape[0]
    d = U.shape[0]
    # M[j] has columns V_i u_j, shape (d, n, k)
    M = np.einsum("kab,db->dak", V, U)
    lips = 2.0 * np.maximum((M**2).sum(axis=(1, 2)), 1e-30)
    step = (1.0 / lips)[:, None]
    w = np.full((d, k), 1.0 / k)
    best_w = w.copy()
    best_obj = np.einsum("dak,dk->da", M, w)
    best_obj = (best_obj**2).sum(axis=1)
    z = w.copy()
    t_acc = 1.0
    milestone = best_obj.copy()
    for it in range(iterations):
        mz = np.einsum("dak,dk->da", M, z)
        grad = 2.0 * np.einsum("dak,da->dk", M, mz)
        w_new = _project_simplex(z - step * grad)
        obj = np.einsum("dak,dk->da", M, w_new)
        obj = (obj**2).sum(axis=1)
        improved = obj < best_obj
        best_obj = np.where(improved, obj, best_obj)
        best_w[improved] = w_new[improved]
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2))
        z = w_new + ((t_acc - 1.0) / t_next) * (w_new - w)
        w = w_new
        t_acc = t_next
        if best_obj.max() < tol * tol:
            break
        # stop once the leading direction's objective stalls; straggling
        # directions only matter for ranking, which the polish re-checks
        if (it + 1) % 16 == 0:
            gmin = best_obj.min()
            if milestone.min() - gmin < tol * max(gmin, 1.0):
                break
            milestone = best_obj.copy()
    return best_w


def _exact_min_norm_2d(P: np.ndarray) -> np.ndarray:
    """Exact min-norm point in the hull of 2-D column points, per direction.

    P has shape (d, k, 2).  The nearest point of a planar convex hull to the
    origin lies on a segment between two generators, so scanning all pairs is
    exact.  Returns simplex weights (d, k).
    """
    d, k, _ = P.shape
    ii, jj = np.triu_indices(k, 1)
    # Work from the Gram matrix: segment distances need only inner products.
    gram = P @ P.swapaxes(1, 2)
    diag = np.einsum("dkk->dk", gram)
    a2 = diag[:, ii]
    b2 = diag[:, jj]
    ab_dot = gram[:, ii, jj]
    denom = np.maximum(a2 + b2 - 2.0 * ab_dot, 1e-300)
    t = np.clip((a2 - ab_dot) / denom, 0.0, 1.0)
    dist2 = a2 + 2.0 * t * (ab_dot - a2) + t * t * denom
    best = np.argmin(dist2, axis=1)
    rows = np.arange(d)
    w = np.zeros((d, k))
    tb = t[rows, best]
    w[rows, ii[best]] = 1.0 - tb
    w[rows, jj[best]] = tb
    return w


#: Upper bound on directions * pairs for the exact 2-D inner solver.
_PAIRS_LIMIT = 4_000_000


def _inner_weights(V: np.ndarray, U: np.ndarray, budget: "SearchBudget") -> np.ndarray:
    """Per-direction simplex weights minimizing ||A(w) u||; exact in the plane
    when the pair scan fits in memory, accelerated projected gradient otherwise."""
    k, n, _ = V.shape
    d = U.shape[0]
    if n == 2 and k >= 2 and d * k * (k - 1) // 2 <= _PAIRS_LIMIT:
        P = np.einsum("kab,db->dka", V, U)
        return _exact_min_norm_2d(P)
    return _fista_simplex(V, U, budget.inner_iterations, budget.inner_tol)


def _nnls_simplex(V: np.ndarray, u: np.ndarray, penalty: float = 1e6) -> np.ndarray:
    """Exact-ish inner solve: min ||sum w_i V_i u|| over the simplex via NNLS
    with a penalty row enforcing the sum constraint, then renormalized."""
    cols = np.einsum("kab,b->ka", V, u).T  # (n, k)
    k = cols.shape[1]
    a = np.vstack([cols, penalty * np.ones((1, k))])
    b = np.zeros(a.shape[0])
    b[-1] = penalty
    try:
        w, _ = optimize.nnls(a, b)
    except Exception:  # pragma: no cover - nnls is robust on these sizes
        return np.full(k, 1.0 / k)
    s = w.sum()
    if s <= 0.0:
        return np.full(k, 1.0 / k)
    return w / s


def _min_singular_batch(mats: np.ndarray) -> np.ndarray:
    return np.linalg.svd(mats, compute_uv=False)[..., -1]


def _search_min_conorm(V: np.ndarray, budget: SearchBudget) -> float:
    """Best (smallest) co-norm realized by an explicit member of co(rows of V).

    Every candidate value is the exact smallest singular value of a genuine
    convex combination, so the result is always a true upper bound of the
    hull infimum; search quality only affects tightness.
    """
    k, n, _ = V.shape
    vertex_vals = _min_singular_batch(V)
    best_val = float(vertex_vals.min())
    if k == 1:
        return best_val

    pool_dirs: list[np.ndarray] = []
    pool_w: list[np.ndarray] = []
    pool_vals: list[float] = []

    n_keep = max(4, budget.directions // 16)
    refine_count = max(16, budget.directions // 4)
    for rnd in range(budget.rounds):
        if rnd == 0:
            U = sampling.sphere_grid(n, budget.directions, budget.seed, "conorm", 0)
        else:
            order = np.argsort(pool_vals)[:n_keep]
            base = np.stack([pool_dirs[i] for i in order])
            rng = sampling.rng_for(budget.seed, "conorm-jitter", rnd)
            reps = max(1, refine_count // base.shape[0])
            radius = 0.5 * 4.0 ** (-rnd)
            jit = base[:, None, :] + radius * rng.standard_normal((base.shape[0], reps, n))
            U = jit.reshape(-1, n)
            norms = np.linalg.norm(U, axis=1)
            norms[norms == 0.0] = 1.0
            U = U / norms[:, None]
        W = _inner_weights(V, U, budget)
        A = np.einsum("dk,kab->dab", W, V)
        vals = _min_singular_batch(A)
        best_val = min(best_val, float(vals.min()))
        pool_dirs.extend(U)
        pool_w.extend(W)
        pool_vals.extend(vals.tolist())

    # Exact polish of the most promising directions, alternating between the
    # inner weight solve and the minimizing unit vector of the current member.
    order = np.argsort(pool_vals)[: budget.polish_candidates]
    for idx in order:
        u = pool_dirs[idx]
        for _ in range(3):
            w = _nnls_simplex(V, u)
            a = np.einsum("k,kab->ab", w, V)
            _, svals, vt = np.linalg.svd(a)
            best_val = min(best_val, float(svals[-1]))
            u = vt[-1]
    return best_val


def polytope_conorm(S: MatrixPolytope, budget: SearchBudget | None = None) -> Enclosure:
    """Enclosure of inf of the co-norm over co(vertices) (+ expanded rays).

    For a fixed unit u the map A -> ||Au|| is convex over the hull, so the
    inner minimization is a convex program over the weight simplex; the outer
    minimization over the unit sphere uses deterministic seeded multi-start
    with local refinement.  Singleton, ray-free sets are exact and the two
    enclosure ends coincide.
    """
    if not isinstance(S, MatrixPolytope):
        raise InvalidInputError("expected a MatrixPolytope")
    budget = budget or DEFAULT_BUDGET
    if S.is_singleton:
        v = co_norm(S.vertices[0])
        return Enclosure(v, v)
    best = _search_min_conorm(S.expanded_vertex_array(budget), budget)
    return Enclosure(max(0.0, best - budget.margin), best)


def recession_conorm(S: MatrixPolytope, budget: SearchBudget | None = None) -> Enclosure:
    """Enclosure of the co-norm infimum over the recession cone minus zero.

    Cone members are scale-equivalent to convex combinations of the generating
    rays, so the infimum is taken over the hull of the rays normalized to unit
    operator norm; the value is then scale-free (sigma_min/sigma_max for a
    single ray) and zero exactly when some nonzero recession combination is
    singular.
    """
    if not isinstance(S, MatrixPolytope):
        raise InvalidInputError("expected a MatrixPolytope")
    if not S.rays:
        raise DomainError("no recession directions")
    normalized = []
    for r in S.rays:
        top = float(np.linalg.svd(r, compute_uv=False)[0])
        normalized.append(r / top)
    return polytope_conorm(MatrixPolytope(vertices=tuple(normalized)), budget)


def image_set_distance(
    S: MatrixPolytope, delta, target, penalty: float = 1e6
) -> float:
    """Distance from `target` to the set S @ delta = {A delta : A in S}.

    Solved as a nonnegative least-squares problem over hull weights (summing
    to one) and ray coefficients (free nonnegative).
    """
    delta = np.asarray(delta, dtype=float)
    target = np.asarray(target, dtype=float)
    vcols = np.stack([v @ delta for v in S.vertices], axis=1)  # (n, kv)
    kv = vcols.shape[1]
    if S.rays:
        rcols = np.stack([r @ delta for r in S.rays], axis=1)
        cols = np.hstack([vcols, rcols])
    else:
        cols = vcols
    sum_row = np.zeros((1, cols.shape[1]))
    sum_row[0, :kv] = penalty
    a = np.vstack([cols, sum_row])
    b = np.concatenate([target, [penalty]])
    coef, _ = optimize.nnls(a, b)
    s = coef[:kv].sum()
    if s <= 0.0:
        coef = coef.copy()
        coef[:kv] = 1.0 / kv
    else:
        coef = coef.copy()
        coef[:kv] /= s
    return float(np.linalg.norm(cols @ coef - target))
