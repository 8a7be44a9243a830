"""Built-in mappings with reference pseudo-Jacobian maps.

Labels: ``example4`` (a non-Lipschitz planar map with a fractional-power fold
along y = 0, whose pseudo-Jacobian needs recession rays there), ``absabs``
(componentwise absolute value, with both a four-matrix and a Clarke-interval
polytope at the kinks), ``rotation``, ``cubic-diagonal``, ``identity``, and
dynamic ``linear:<matrix-json>`` labels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping as TypingMapping

import numpy as np

from .errors import InvalidInputError
from .mapdsl import cbrt
from .matrixset import MatrixPolytope
from .pseudojac import MappingSpec, PseudoJacobianMap, analytic_singleton, finite_set_map

ROTATION_ANGLE = math.pi / 3.0


@dataclass(frozen=True)
class RegistryEntry:
    """A named mapping plus its reference pseudo-Jacobian variants."""

    label: str
    mapping: MappingSpec
    pseudo_jacobians: TypingMapping[str, PseudoJacobianMap]
    default_variant: str
    source: str | None = None

    def pseudo_jacobian(self, variant: str | None = None) -> PseudoJacobianMap:
        name = variant or self.default_variant
        try:
            return self.pseudo_jacobians[name]
        except KeyError:
            raise InvalidInputError(
                f"mapping '{self.label}' has no pseudo-Jacobian variant '{name}'; "
                f"available: {sorted(self.pseudo_jacobians)}"
            ) from None


# ---------------------------------------------------------------------------
# example4: f(x, y) = (x - y, x + 3 y^(1/3))
# ---------------------------------------------------------------------------

EXAMPLE4_SOURCE = "(x - y, x + 3*cbrt(y))"


def _example4_eval(p: np.ndarray) -> np.ndarray:
    # Mirrors the parsed DSL source operation-for-operation (0-ulp agreement).
    return np.array([p[0] - p[1], p[0] + 3.0 * cbrt(p[1])])


def _example4_rule(p: np.ndarray) -> MatrixPolytope:
    y = float(p[1])
    if y == 0.0:
        return MatrixPolytope(
            vertices=(np.array([[1.0, -1.0], [1.0, 0.0]]),),
            rays=(np.array([[0.0, 0.0], [0.0, 1.0]]),),
        )
    slope = cbrt(y) ** -2.0  # y^(-2/3), even power so positive for y < 0
    return MatrixPolytope.singleton(np.array([[1.0, -1.0], [1.0, slope]]))


def _example4_entry() -> RegistryEntry:
    mapping = MappingSpec(evaluate=_example4_eval, dim=2, label="example4")
    pj = finite_set_map(_example4_rule, dim=2, usc_declared=True, label="example4")
    return RegistryEntry(
        label="example4",
        mapping=mapping,
        pseudo_jacobians={"native": pj},
        default_variant="native",
        source=EXAMPLE4_SOURCE,
    )


# ---------------------------------------------------------------------------
# absabs: f(x, y) = (|x|, |y|)
# ---------------------------------------------------------------------------

ABSABS_SOURCE = "(abs(x), abs(y))"


def _absabs_eval(p: np.ndarray) -> np.ndarray:
    return np.array([abs(p[0]), abs(p[1])])


def _sign_choices(v: float) -> tuple:
    if v > 0.0:
        return (1.0,)
    if v < 0.0:
        return (-1.0,)
    return (1.0, -1.0)


def _absabs_rule(p: np.ndarray) -> MatrixPolytope:
    verts = tuple(
        np.diag([s1, s2]) for s1 in _sign_choices(float(p[0])) for s2 in _sign_choices(float(p[1]))
    )
    return MatrixPolytope(vertices=verts)


def _absabs_entry() -> RegistryEntry:
    mapping = MappingSpec(evaluate=_absabs_eval, dim=2, label="absabs")
    signs = finite_set_map(_absabs_rule, dim=2, usc_declared=True, label="absabs-signs")
    # The Clarke generalized Jacobian at a kink is the diagonal-interval set;
    # as a polytope it is generated by the same extreme sign matrices.
    clarke = finite_set_map(_absabs_rule, dim=2, usc_declared=True, label="absabs-clarke")
    return RegistryEntry(
        label="absabs",
        mapping=mapping,
        pseudo_jacobians={"signs": signs, "clarke": clarke},
        default_variant="signs",
        source=ABSABS_SOURCE,
    )


# ---------------------------------------------------------------------------
# smooth built-ins
# ---------------------------------------------------------------------------


def _linear_entry(matrix: np.ndarray, label: str) -> RegistryEntry:
    matrix = np.array(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidInputError(f"'{label}': linear map needs a square matrix")
    if not np.all(np.isfinite(matrix)):
        raise InvalidInputError(f"'{label}': matrix entries must be finite")
    dim = matrix.shape[0]
    mapping = MappingSpec(
        evaluate=lambda p, _a=matrix: _a @ p,
        dim=dim,
        analytic_jacobian=lambda p, _a=matrix: _a,
        label=label,
    )
    pj = analytic_singleton(mapping)
    return RegistryEntry(
        label=label, mapping=mapping, pseudo_jacobians={"native": pj}, default_variant="native"
    )


def _rotation_entry() -> RegistryEntry:
    c, s = math.cos(ROTATION_ANGLE), math.sin(ROTATION_ANGLE)
    return _linear_entry(np.array([[c, -s], [s, c]]), "rotation")


CUBIC_DIAGONAL_SOURCE = "(x + x^3, y + y^3)"


def _cubic_entry() -> RegistryEntry:
    mapping = MappingSpec(
        evaluate=lambda p: np.array([p[0] + p[0] ** 3, p[1] + p[1] ** 3]),
        dim=2,
        analytic_jacobian=lambda p: np.diag([1.0 + 3.0 * p[0] ** 2, 1.0 + 3.0 * p[1] ** 2]),
        label="cubic-diagonal",
    )
    pj = analytic_singleton(mapping)
    return RegistryEntry(
        label="cubic-diagonal",
        mapping=mapping,
        pseudo_jacobians={"native": pj},
        default_variant="native",
        source=CUBIC_DIAGONAL_SOURCE,
    )


_BUILTINS = {
    "example4": _example4_entry,
    "absabs": _absabs_entry,
    "rotation": _rotation_entry,
    "cubic-diagonal": _cubic_entry,
    "identity": lambda: _linear_entry(np.eye(2), "identity"),
}


def labels() -> tuple:
    """Static registry labels (dynamic ``linear:<matrix-json>`` also accepted)."""
    return tuple(sorted(_BUILTINS))


def get(label: str) -> RegistryEntry:
    """Look up a registry entry by label."""
    if label in _BUILTINS:
        return _BUILTINS[label]()
    if label.startswith("linear:"):
        payload = label[len("linear:"):]
        try:
            matrix = np.array(json.loads(payload), dtype=float)
        except (json.JSONDecodeError, ValueError) as exc:
            raise InvalidInputError(f"bad linear matrix JSON in '{label}': {exc}") from exc
        return _linear_entry(matrix, label)
    raise InvalidInputError(
        f"unknown mapping label '{label}'; built-ins: {', '.join(labels())}, "
        "or linear:<matrix-json>"
    )
