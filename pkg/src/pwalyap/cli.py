"""Command-line front end.

Problem files are JSON (schema below); every command writes deterministic
artifacts (17-significant-digit decimals, fixed column orders) so that
identical inputs with --deterministic produce byte-identical outputs.

Exit codes for synthesize: 0 feasible, 2 presumed infeasible,
3 iteration cap, 1 any error.
"""

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import accpm, dynamics, geometry, roa, verifier
from .accpm import AccpmConfig, BisectGamma
from .dynamics import ClosedLoop, ControllerSpec, ReluNetwork, saturated_linear_controller
from .errors import PwalyapError
from .geometry import Polytope
from .learner import PWQ, QUADRATIC, CandidateParam

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_VECTOR = {"type": "array", "items": {"type": "number"}}
_POLYTOPE = {
    "type": "object",
    "properties": {"F": _MATRIX, "h": _VECTOR},
    "required": ["F", "h"],
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema_version": {"const": 1},
        "plant": {
            "type": "object",
            "properties": {
                "modes": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "properties": {
                            "A": _MATRIX, "B": _MATRIX, "c": _VECTOR,
                            "F": _MATRIX, "h": _VECTOR,
                        },
                        "required": ["A", "B", "c", "F", "h"],
                    },
                }
            },
            "required": ["modes"],
        },
        "controller": {
            "type": "object",
            "properties": {
                "variant": {"enum": ["raw", "projected_state", "projected_input"]},
                "network": {
                    "type": "object",
                    "properties": {
                        "layers": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "properties": {"W": _MATRIX, "b": _VECTOR},
                                "required": ["W", "b"],
                            },
                        }
                    },
                    "required": ["layers"],
                },
                "saturated_linear": {
                    "type": "object",
                    "properties": {"K": _MATRIX, "limits": _MATRIX},
                    "required": ["K", "limits"],
                },
                "projection": {
                    "type": "object",
                    "properties": {"roi": _POLYTOPE, "input_set": _POLYTOPE},
                },
            },
        },
        "roi0": _POLYTOPE,
        "input_set": _POLYTOPE,
        "input_box": _POLYTOPE,
        "options": {"type": "object"},
    },
    "required": ["schema_version", "plant", "controller", "roi0"],
}


def _fmt(x):
    if isinstance(x, float):
        if np.isnan(x):
            return "null"
        return f"{x:.17g}"
    return None


def dumps_deterministic(obj, indent=0):
    """JSON text with floats as 17-significant-digit decimals."""
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {dumps_deterministic(v, indent + 2)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        inner = ", ".join(dumps_deterministic(v, indent + 2) for v in obj)
        return "[" + inner + "]"
    if isinstance(obj, (bool, type(None))):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    return json.dumps(obj)


def write_json(obj, path):
    Path(path).write_text(dumps_deterministic(obj) + "\n")


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [
                f"{v:.17g}" if isinstance(v, (float, np.floating)) else str(v) for v in row
            ]
            fh.write(",".join(cells) + "\n")


class SpecError(Exception):
    pass


def load_problem(path):
    try:
        blob = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {path}")
    except json.JSONDecodeError as e:
        raise SpecError(f"invalid JSON in {path}: {e}")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(blob), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        pointer = "/" + "/".join(str(p) for p in e.absolute_path)
        raise SpecError(f"schema violation at {pointer}: {e.message}")

    plant = dynamics.system_from_json(blob["plant"])
    ctl = blob["controller"]
    if "network" in ctl:
        net = ReluNetwork.from_json(ctl["network"])
    elif "saturated_linear" in ctl:
        sat = ctl["saturated_linear"]
        net = saturated_linear_controller(np.asarray(sat["K"], dtype=float),
                                          np.asarray(sat["limits"], dtype=float))
    else:
        raise SpecError("schema violation at /controller: needs 'network' or 'saturated_linear'")
    variant = ctl.get("variant", "raw")
    proj = ctl.get("projection", {})
    proj_roi = Polytope.from_json(proj["roi"]) if "roi" in proj else None
    proj_u = Polytope.from_json(proj["input_set"]) if "input_set" in proj else None
    try:
        spec = ControllerSpec(net, variant, roi=proj_roi, input_set=proj_u)
        input_box = Polytope.from_json(blob["input_box"]) if "input_box" in blob else None
        cl = ClosedLoop(plant, spec, input_box=input_box)
    except (ValueError, PwalyapError) as e:
        raise SpecError(f"inconsistent problem data: {e}")
    roi0 = Polytope.from_json(blob["roi0"])
    if roi0.dim != plant.state_dim:
        raise SpecError("schema violation at /roi0: dimension differs from the plant state")
    input_set = Polytope.from_json(blob["input_set"]) if "input_set" in blob else proj_u
    options = blob.get("options", {})
    return cl, roi0, input_set, options


def build_config(options, args):
    cfg = dict(options)
    if getattr(args, "candidate", None):
        cfg["candidate_kind"] = args.candidate
    if getattr(args, "epsilon", None):
        cfg["epsilon"] = args.epsilon if args.epsilon == "auto" else float(args.epsilon)
    if getattr(args, "cut_mode", None):
        cfg["cut_mode"] = args.cut_mode
    if getattr(args, "max_iters", None):
        cfg["max_iterations"] = args.max_iters
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    gamma_arg = getattr(args, "gamma", None)
    if gamma_arg:
        if gamma_arg.startswith("bisect:"):
            lo, hi, tol = (float(v) for v in gamma_arg[len("bisect:"):].split(","))
            cfg["gamma"] = BisectGamma(lo, hi, tol)
        else:
            cfg["gamma"] = float(gamma_arg)
    gamma = cfg.pop("gamma", 1.0)
    if isinstance(gamma, dict):
        gamma = BisectGamma(**gamma)
    known = {f for f in AccpmConfig.__dataclass_fields__}
    unknown = set(cfg) - known
    if unknown:
        raise SpecError(f"unknown option(s) in /options: {sorted(unknown)}")
    return AccpmConfig(gamma=gamma, **cfg)


def _scrub_times(obj):
    if isinstance(obj, dict):
        return {k: (0.0 if k in ("time_s", "wall_time") else _scrub_times(v))
                for k, v in obj.items()}
    if isinstance(obj, list):
        return [_scrub_times(v) for v in obj]
    return obj


def cmd_synthesize(args):
    cl, roi0, _, options = load_problem(args.spec)
    cfg = build_config(options, args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if isinstance(cfg.gamma, BisectGamma):
        try:
            gamma, cert = accpm.bisect_gamma(cl, roi0, cfg)
        except accpm.NoFeasibleGamma:
            gamma, cert = None, accpm.synthesize(
                cl, geometry.scale_about_origin(roi0, cfg.gamma.lo), cfg, gamma=cfg.gamma.lo
            )
    else:
        roi = geometry.scale_about_origin(roi0, cfg.gamma)
        cert = accpm.synthesize(cl, roi, cfg, gamma=cfg.gamma)
    blob = cert.to_json()
    if args.deterministic:
        blob = _scrub_times(blob)
    write_json(blob, outdir / "certificate.json")
    n = cl.plant.state_dim
    hist = cert.history_rows()
    if args.deterministic:
        hist = [row[:-1] + [0.0] for row in hist]
    write_csv(outdir / "history.csv",
              ["iteration", "p_star", *[f"x{i + 1}" for i in range(n)], "time_s"], hist)
    k = cert.iterations[0].P.shape[0] if cert.iterations else n
    svec_names = [f"D{i + 1}" for i in range(k * (k + 1) // 2)]
    write_csv(outdir / "cuts.csv",
              ["iteration", *[f"x{i + 1}" for i in range(n)], *svec_names, "c", "slack"],
              cert.cut_rows())
    print(f"status: {cert.status}  iterations: {len(cert.iterations)}")
    if cert.feasible:
        print(f"alpha: {cert.alpha:.6g}  epsilon: {cert.epsilon:.6g}")
        return 0
    return 2 if cert.status == accpm.PRESUMED_INFEASIBLE else 3


def _load_matrix(path):
    blob = json.loads(Path(path).read_text())
    if isinstance(blob, dict):
        blob = blob.get("P_star") or blob.get("P")
    P = np.asarray(blob, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise SpecError("P file must hold a square matrix")
    if np.abs(P - P.T).max() > 1e-10:
        raise SpecError("P must be symmetric")
    return 0.5 * (P + P.T)


def cmd_verify(args):
    cl, roi0, _, options = load_problem(args.spec)
    cfg = build_config(options, args)
    P = _load_matrix(args.P)
    n = cl.plant.state_dim
    kind = cfg.candidate_kind if args.candidate is None else args.candidate
    if P.shape[0] == 2 * n:
        kind = PWQ
    w = np.linalg.eigvalsh(P)
    if kind == QUADRATIC:
        if P.shape[0] != n:
            raise SpecError(f"P must be {n}x{n} for quadratic candidates")
        if w.min() <= 1e-12:
            raise SpecError("P rejected: not positive definite")
    else:
        if P.shape[0] != 2 * n:
            raise SpecError(f"P must be {2 * n}x{2 * n} for pwq candidates")
        if w.min() < -1e-12:
            raise SpecError("P rejected: indefinite")
    gamma = cfg.gamma if isinstance(cfg.gamma, float) else 1.0
    roi = geometry.scale_about_origin(roi0, gamma)
    eps, _, _ = accpm._pick_epsilon(cl, roi, cfg)
    opts = cfg.verifier_options()
    if kind == PWQ:
        res = verifier.verify_pwq(cl, P, roi, eps, opts)
    elif cl.controller.variant == "raw":
        res = verifier.verify_quadratic(cl, P, roi, eps, opts)
    else:
        res = verifier.verify_projected(cl, P, roi, eps, opts)
    blob = res.to_json()
    if args.deterministic:
        blob = _scrub_times(blob)
    print(dumps_deterministic(blob))
    return 0


def cmd_roa(args):
    cl, roi0, _, options = load_problem(args.spec)
    cfg = build_config(options, args)
    cert = json.loads(Path(args.certificate).read_text())
    if cert.get("status") != "feasible" or cert.get("P_star") is None:
        raise SpecError("certificate is not feasible; no ROA estimate to export")
    P = np.asarray(cert["P_star"], dtype=float)
    kind = cert.get("kind", QUADRATIC)
    gamma = cert.get("gamma") or 1.0
    roi = geometry.scale_about_origin(roi0, float(gamma))
    V = CandidateParam(P, kind)
    est = roa.estimate_roa(V, cl, roi, cfg.verifier_options())
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    data = roa.export_contours(est, resolution=args.resolution)
    if data["kind"] == "ellipse":
        rows = [[p[0], p[1], v] for p, v in zip(data["boundary"], data["V"])]
        write_csv(outdir / "roa_boundary.csv", ["x1", "x2", "V"], rows)
    else:
        rows = [
            [p[0], p[1], v, int(flag)]
            for p, v, flag in zip(data["points"], data["V"], data["inside"])
        ]
        write_csv(outdir / "roa_contour.csv", ["x1", "x2", "V", "inside"], rows)
    write_json({"alpha": est.alpha, "kind": data["kind"]}, outdir / "roa.json")
    print(f"alpha: {est.alpha:.6g}")
    return 0


def cmd_simulate(args):
    cl, roi0, _, options = load_problem(args.spec)
    try:
        ga, gb = args.grid.split("x")
        ga, gb = int(ga), int(gb)
    except ValueError:
        raise SpecError(f"bad --grid value {args.grid!r}; expected like 10x10")
    box = geometry.bounding_box(roi0)
    if roi0.dim != 2:
        raise SpecError("simulate expects a 2-D state space")
    xs = np.linspace(box.lower[0], box.upper[0], ga)
    ys = np.linspace(box.lower[1], box.upper[1], gb)
    rows = []
    traj_id = 0
    for a in xs:
        for b in ys:
            traj, _ = dynamics.rollout(cl, np.array([a, b]), args.horizon)
            for k, x in enumerate(traj):
                rows.append([traj_id, k, x[0], x[1]])
            traj_id += 1
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / "trajectories.csv", ["traj_id", "k", "x1", "x2"], rows)
    print(f"trajectories: {traj_id}")
    return 0


def cmd_invariant_set(args):
    cl, roi0, input_set, _ = load_problem(args.spec)
    if len(cl.plant.modes) != 1:
        raise SpecError("invariant-set requires an LTI plant (single mode)")
    if input_set is None:
        raise SpecError("invariant-set needs /input_set or /controller/projection/input_set")
    mode = cl.plant.modes[0]
    res = roa.control_invariant_set(mode.A, mode.B, roi0, input_set, max_iter=args.max_iter)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(
        {"converged": res.converged, "iterations": res.iterations, **res.S.to_json()},
        outdir / "invariant_set.json",
    )
    print(f"converged: {res.converged}  rows: {res.S.nrows}  iterations: {res.iterations}")
    return 0 if res.converged else 3


def make_parser():
    p = argparse.ArgumentParser(prog="pwalyap", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("spec", help="problem JSON file")
        sp.add_argument("--out", default="out", required=out_required, help="output directory")
        sp.add_argument("--candidate", choices=[QUADRATIC, PWQ], default=None)
        sp.add_argument("--epsilon", default=None, help="'auto' or a positive float")
        sp.add_argument("--gamma", default=None, help="float or bisect:lo,hi,tol")
        sp.add_argument("--cut-mode", dest="cut_mode", choices=["strict", "relaxed"], default=None)
        sp.add_argument("--max-iters", dest="max_iters", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--deterministic", action="store_true",
                        help="zero wall-time fields for byte-stable artifacts")
        sp.add_argument("--threads", type=int, default=1, help="accepted for compatibility")

    sp = sub.add_parser("synthesize", help="run the learner/verifier loop")
    common(sp)
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("verify", help="verify one candidate matrix")
    common(sp, out_required=False)
    sp.add_argument("--P", required=True, help="JSON file with the candidate matrix")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("roa", help="export ROA contour/boundary data")
    common(sp)
    sp.add_argument("--certificate", required=True)
    sp.add_argument("--resolution", type=int, default=512)
    sp.set_defaults(func=cmd_roa)

    sp = sub.add_parser("simulate", help="roll out trajectories from a grid")
    common(sp)
    sp.add_argument("--grid", default="10x10")
    sp.add_argument("--horizon", type=int, default=200)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("invariant-set", help="compute a control invariant set")
    common(sp)
    sp.add_argument("--max-iter", dest="max_iter", type=int, default=60)
    sp.set_defaults(func=cmd_invariant_set)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except PwalyapError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
