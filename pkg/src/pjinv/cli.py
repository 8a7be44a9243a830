"""Command-line front end orchestrating analyses and machine-readable reports.

Every report embeds the tool version, the seed, a full echo of the effective
configuration, the budgets used, and certificate caveats.  All randomness
flows from the single config seed through the splitting scheme in
:mod:`pjinv.sampling`.  Exit codes: 0 success/certified, 2 honest
"not certified" verdicts, 1 errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__, dini, inversion, mapdsl, registry, regularity
from .errors import PjinvError, UsageError
from .matrixset import MatrixPolytope, SearchBudget, polytope_conorm
from .pseudojac import (
    BallBudget,
    MappingSpec,
    PseudoJacobianMap,
    eval_at,
    falsify_pseudo_jacobian,
    finite_set_map,
    sampled_candidate,
)
from .sampling import rng_for

COMMANDS = ("index", "profile", "invert", "certify", "dini", "falsify", "audit")
AUDIT_KINDS = ("beta", "growth", "mvi", "meanvalue")

_SEARCH_FIELDS = {f.name for f in dataclasses.fields(SearchBudget)} - {"seed"}
_BALL_FIELDS = {f.name for f in dataclasses.fields(BallBudget)} - {"seed"}
_EXTRA_KEYS = {
    "n_radii", "sphere_count", "trials", "pairs", "segment_samples",
    "grid_per_dim", "n_grid", "check_radii", "samples", "threshold",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated, JSON-safe run configuration; echoed verbatim into reports."""

    command: str
    mapping: str
    pseudo_jacobian: str = "native"
    at: tuple | None = None
    target: tuple | None = None
    anchor: tuple | None = None
    rho: float = 1.0
    rmax: float = 100.0
    eta: str | None = None
    beta: float = 0.5
    seed: int = 0
    budget: dict = field(default_factory=dict)
    tol: float | None = None
    output: str = "json"
    output_path: str | None = None
    threads: int = 1
    trace: str | None = None
    audit_kind: str | None = None
    no_timestamp: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command '{self.command}'")
        if self.output not in ("json", "csv", "text"):
            raise UsageError(f"--format must be json, csv, or text, got '{self.output}'")
        if self.audit_kind is not None and self.audit_kind not in AUDIT_KINDS:
            raise UsageError(f"--kind must be one of {AUDIT_KINDS}")


def derive_seed(seed: int, label: str) -> int:
    """Component seed derived from the master seed (documented splitting)."""
    return int(rng_for(seed, "cli", label).integers(2**63))


def _parse_vector(text: str, flag: str) -> tuple:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated floats, got '{text}'") from None


def _parse_budget(text: str) -> dict:
    out: dict = {}
    for item in text.split(","):
        if not item:
            continue
        if "=" not in item:
            raise UsageError(f"--budget: expected key=value, got '{item}'")
        key, value = item.split("=", 1)
        key = key.strip()
        if key not in _SEARCH_FIELDS | _BALL_FIELDS | _EXTRA_KEYS:
            raise UsageError(f"--budget: unknown key '{key}'")
        try:
            out[key] = int(value) if value.lstrip("+-").isdigit() else float(value)
        except ValueError:
            raise UsageError(f"--budget: bad value for '{key}': '{value}'") from None
    return out


def _budgets(config: RunConfig) -> tuple[SearchBudget, BallBudget, dict]:
    search_kw = {k: v for k, v in config.budget.items() if k in _SEARCH_FIELDS}
    ball_kw = {k: v for k, v in config.budget.items() if k in _BALL_FIELDS}
    extras = {k: v for k, v in config.budget.items() if k in _EXTRA_KEYS}
    search = SearchBudget(seed=derive_seed(config.seed, "search"), **search_kw)
    ball = BallBudget(seed=derive_seed(config.seed, "ball"), **ball_kw)
    return search, ball, extras


def _looks_like_dsl(text: str) -> bool:
    return text.lstrip().startswith("(") or text.lstrip().startswith("vars")


def _resolve_mapping(config: RunConfig) -> tuple[MappingSpec, PseudoJacobianMap, list]:
    """Mapping + pseudo-Jacobian from --map/--pj; returns extra caveats."""
    caveats: list[str] = []
    spec_text = config.pseudo_jacobian
    if _looks_like_dsl(config.mapping):
        expr = mapdsl.parse_mapping(config.mapping)
        mapping = mapdsl.to_mapping_spec(expr, label="dsl")
        entry = None
    else:
        entry = registry.get(config.mapping)
        mapping = entry.mapping

    if spec_text == "sampled" or (spec_text == "native" and entry is None):
        pj = sampled_candidate(mapping, seed=derive_seed(config.seed, "sampled-pj"))
        if spec_text == "native":
            caveats.append(
                "inline mappings have no native pseudo-Jacobian; using a sampled candidate"
            )
    elif spec_text.startswith("file:"):
        path = spec_text[len("file:"):]
        try:
            with open(path, "r", encoding="utf-8") as fh:
                poly = MatrixPolytope.from_json_dict(json.load(fh))
        except OSError as exc:
            raise UsageError(f"--pj file: cannot read '{path}': {exc}") from exc
        pj = finite_set_map(lambda _x, _p=poly: _p, dim=mapping.dim, label=f"file:{path}")
        caveats.append(f"pseudo-Jacobian loaded from '{path}' applies the same polytope everywhere")
    elif entry is not None:
        variant = None if spec_text == "native" else spec_text
        pj = entry.pseudo_jacobian(variant)
    else:
        raise UsageError(f"--pj: '{spec_text}' needs a registry mapping")

    if pj.kind == "sampled":
        probe = config.at or config.anchor or tuple(np.zeros(mapping.dim))
        verdict = falsify_pseudo_jacobian(
            pj, mapping, np.array(probe), pairs=64, seed=derive_seed(config.seed, "screen")
        )
        state = "FALSIFIED" if verdict.falsified else "not falsified"
        caveats.append(
            f"sampled pseudo-Jacobian candidate screened at {list(probe)}: {state} "
            f"({verdict.pairs_tested} direction pairs)"
        )
    return mapping, pj, caveats


def _require(config: RunConfig, attr: str, flag: str):
    value = getattr(config, attr)
    if value is None:
        raise UsageError(f"{flag} is required for '{config.command}'")
    return value


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _run_index(config, mapping, pj, search, ball, extras, caveats):
    at = np.array(_require(config, "at", "--at"))
    poly = eval_at(pj, at)
    enclosure = polytope_conorm(poly, search)
    result = {
        "point": [float(v) for v in at],
        "enclosure": enclosure.to_json_dict(),
        "regular": bool(enclosure.lower > 0.0),
        "polytope": {"vertices": len(poly.vertices), "rays": len(poly.rays)},
    }
    return 0, result


def _run_profile(config, mapping, pj, search, ball, extras, caveats):
    at = np.array(config.at if config.at is not None else np.zeros(mapping.dim))
    profile = regularity.radial_profile(
        pj, at, config.rho,
        n_radii=int(extras.get("n_radii", 33)),
        sphere_count=int(extras.get("sphere_count", 256)),
        search_budget=search,
        seed=derive_seed(config.seed, "profile"),
        threads=config.threads,
    )
    caveats.append("eta uses lower enclosure ends; sigma is a lower Riemann sum")
    if profile.certifying:
        certificate = regularity.invertibility_ball(profile, mapping)
        caveats.extend(certificate.caveats)
        result = {"profile": profile.to_json_dict(), "certificate": certificate.to_json_dict()}
        return 0, result
    result = {"profile": profile.to_json_dict(), "certificate": None}
    return 2, result


def _run_invert(config, mapping, pj, search, ball, extras, caveats):
    target = np.array(_require(config, "target", "--target"))
    anchor = np.array(config.anchor) if config.anchor is not None else None
    cfg = inversion.StepConfig(
        residual_tol=config.tol if config.tol is not None else 1e-10,
        ball_budget=ball if config.budget else inversion.LIFT_BALL_BUDGET,
        search_budget=search if config.budget else inversion.LIFT_SEARCH_BUDGET,
        seed=derive_seed(config.seed, "lift"),
    )
    cert = inversion.global_invert(mapping, pj, target, anchor, cfg)
    caveats.append("per-step floors use the reduced lift budgets recorded here")
    return (0 if cert.converged else 2), {"certificate": cert.to_json_dict()}


def _run_certify(config, mapping, pj, search, ball, extras, caveats):
    eta_text = _require(config, "eta", "--eta")
    minorant = regularity.RadialMinorant.parse(eta_text)
    verdict = regularity.hadamard_certify(
        pj, mapping, minorant, config.rmax,
        divergence_threshold=float(extras.get("threshold", 1.0)),
        check_radii=int(extras.get("check_radii", 33)),
        sphere_count=int(extras.get("sphere_count", 64)),
        search_budget=search,
        seed=derive_seed(config.seed, "hadamard"),
    )
    caveats.extend(verdict.caveats)
    return (0 if verdict.certified_global else 2), {"verdict": verdict.to_json_dict()}


def _run_dini(config, mapping, pj, search, ball, extras, caveats):
    at = np.array(_require(config, "at", "--at"))
    estimate = dini.dini_lower(
        mapping, at, seed=derive_seed(config.seed, "dini"),
        directions=int(extras["samples"]) if "samples" in extras else None,
    )
    caveats.append("finite sampling biases the lower estimate upward; budget recorded")
    return 0, {"estimate": estimate.to_json_dict()}


def _run_falsify(config, mapping, pj, search, ball, extras, caveats):
    at = np.array(_require(config, "at", "--at"))
    verdict = falsify_pseudo_jacobian(
        pj, mapping, at,
        pairs=int(extras.get("pairs", 256)),
        seed=derive_seed(config.seed, "falsify"),
    )
    caveats.append("the falsifier can only refute; a clean run is not a proof")
    return (2 if verdict.falsified else 0), {"verdict": verdict.to_json_dict()}


def _run_audit(config, mapping, pj, search, ball, extras, caveats):
    kind = config.audit_kind
    if kind is None:
        raise UsageError("--kind is required for 'audit'")
    if kind == "beta":
        at = np.array(_require(config, "at", "--at"))
        report = regularity.beta_limit_audit(pj, at, ball_budget=ball, search_budget=search)
        return (0 if report.passes else 2), {"kind": kind, "report": report.to_json_dict()}
    if kind == "growth":
        at = np.array(_require(config, "at", "--at"))
        report = regularity.growth_bound_audit(
            mapping, pj, at, config.beta,
            trials=int(extras.get("trials", 500)),
            seed=derive_seed(config.seed, "growth"),
            ball_budget=ball, search_budget=search,
        )
        return (0 if report.violations == 0 else 2), {"kind": kind, "report": report.to_json_dict()}
    if kind == "mvi":
        at = np.array(_require(config, "at", "--at"))
        target = np.array(_require(config, "target", "--target"))
        path = dini.PathSample.straight_segment(
            mapping, at, target, samples=int(extras.get("samples", 17))
        )
        report = dini.mvi_audit(mapping, path, seed=derive_seed(config.seed, "mvi"))
        return (0 if report.passes else 2), {"kind": kind, "report": report.to_json_dict()}
    at = np.array(_require(config, "at", "--at"))
    target = np.array(_require(config, "target", "--target"))
    gap = regularity.mean_value_gap(
        mapping, pj, at, target, samples=int(extras.get("segment_samples", 64))
    )
    scale = float(np.linalg.norm(np.array(at) - np.array(target)))
    passes = bool(gap <= 1e-3 * max(scale, 1e-30))
    report = {"kind": kind, "gap": float(gap), "scale": scale, "passes": passes}
    return (0 if passes else 2), report


_RUNNERS = {
    "index": _run_index,
    "profile": _run_profile,
    "invert": _run_invert,
    "certify": _run_certify,
    "dini": _run_dini,
    "falsify": _run_falsify,
    "audit": _run_audit,
}


def run(config: RunConfig) -> tuple[int, dict]:
    """Dispatch a validated config; returns (exit status, report envelope)."""
    search, ball, extras = _budgets(config)
    mapping, pj, caveats = _resolve_mapping(config)
    status, result = _RUNNERS[config.command](
        config, mapping, pj, search, ball, extras, caveats
    )
    envelope = {
        "tool": "pjinv",
        "version": __version__,
        "command": config.command,
        "seed": config.seed,
        "config": dataclasses.asdict(config),
        "budgets": {
            "search": dataclasses.asdict(search),
            "ball": dataclasses.asdict(ball),
        },
        "result": result,
        "caveats": caveats,
    }
    if not config.no_timestamp:
        envelope["timestamp"] = datetime.now(timezone.utc).isoformat()
    return status, envelope


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; errors are 1 here
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pjinv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--map", required=True, dest="mapping",
                       help="registry label or inline mapping source")
        p.add_argument("--pj", default="native",
                       help="native | sampled | file:<path> | <variant>")
        p.add_argument("--at", default=None, help="point, comma-separated")
        p.add_argument("--target", default=None, help="target point, comma-separated")
        p.add_argument("--anchor", default=None, help="anchor point, comma-separated")
        p.add_argument("--rho", type=float, default=1.0)
        p.add_argument("--rmax", type=float, default=100.0)
        p.add_argument("--eta", default=None, help="const:<c> or invlinear:<c>")
        p.add_argument("--beta", type=float, default=0.5)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--budget", default="", help="key=value[,key=value...]")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--out", default=None, dest="output_path")
        p.add_argument("--format", default="json", dest="output",
                       choices=("json", "csv", "text"))
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--trace", default=None, choices=("csv",))
        p.add_argument("--no-timestamp", action="store_true")
        if name == "audit":
            p.add_argument("--kind", default=None, choices=AUDIT_KINDS)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    seed = args.seed
    if seed is None:
        env = os.environ.get("PJINV_SEED", "")
        try:
            seed = int(env) if env else 0
        except ValueError:
            raise UsageError(f"PJINV_SEED must be an integer, got '{env}'") from None
    return RunConfig(
        command=args.command,
        mapping=args.mapping,
        pseudo_jacobian=args.pj,
        at=None if args.at is None else _parse_vector(args.at, "--at"),
        target=None if args.target is None else _parse_vector(args.target, "--target"),
        anchor=None if args.anchor is None else _parse_vector(args.anchor, "--anchor"),
        rho=args.rho,
        rmax=args.rmax,
        eta=args.eta,
        beta=args.beta,
        seed=seed,
        budget=_parse_budget(args.budget),
        tol=args.tol,
        output=args.output,
        output_path=args.output_path,
        threads=args.threads,
        trace=args.trace,
        audit_kind=getattr(args, "kind", None),
        no_timestamp=args.no_timestamp,
    )


def _render(config: RunConfig, envelope: dict) -> str:
    if config.output == "json":
        return json.dumps(envelope, sort_keys=True, indent=2) + "\n"
    if config.output == "csv" or config.trace == "csv":
        return _render_csv(config, envelope)
    return _render_text(envelope)


def _render_csv(config: RunConfig, envelope: dict) -> str:
    result = envelope["result"]
    if config.command == "profile":
        rows = ["t,eta_lower,samples"]
        profile = result["profile"]
        for t, e in zip(profile["radii"], profile["eta"]):
            samples = 1 if t == 0.0 else profile["sphere_count"]
            rows.append(f"{t!r},{e!r},{samples}")
        return "\n".join(rows) + "\n"
    if config.command == "invert":
        cert = result["certificate"]
        dim = len(cert["final_x"])
        header = ["t", *[f"x{i}" for i in range(dim)], "alpha_floor", "residual"]
        rows = [",".join(header)]
        for step in cert["steps"]:
            rows.append(
                ",".join(repr(float(v)) for v in [step["t"], *step["x"],
                                                  step["alpha_floor"], step["residual"]])
            )
        return "\n".join(rows) + "\n"
    raise UsageError(f"--format csv is not available for '{config.command}'")


def _render_text(envelope: dict) -> str:
    lines = [f"pjinv {envelope['version']} :: {envelope['command']} (seed {envelope['seed']})"]
    lines.append(json.dumps(envelope["result"], sort_keys=True, indent=2))
    for caveat in envelope["caveats"]:
        lines.append(f"caveat: {caveat}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        config = _config_from_args(args)
        status, envelope = run(config)
        text = _render(config, envelope)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except PjinvError as exc:
        payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
        return 1
    if config.output_path:
        with open(config.output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
