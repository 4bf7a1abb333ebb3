"""Command-line front end.

Exit codes: 0 success, 1 numerical failure (including failed checks),
2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import DisconjugacyError, NumericalError, UnobservableError, ValidationError
from .factorization import (
    CoprimeFactors,
    default_left_factor,
    factors_from_dict,
    factors_to_dict,
    stable_coprime_from_viable,
)
from .matrixnum import is_stable_matrix, relative_error
from .netbuild import DEMOS, compose, network_to_dict, topology_report
from .realization import load_system, sample_grid, system_to_dict, to_output_canonical
from .riccati import recover_viable
from .structure import (
    check_viability,
    dsf_from_viable,
    place_pair_poles,
    sparsity_of,
    viable_pair,
)
from .verify import Check, Report, certify_pencil, coprimeness_certificate, identity_suite

EXIT_OK, EXIT_NUMERICAL, EXIT_INVALID = 0, 1, 2


# --------------------------------------------------------------------------
# serialization helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        return val if np.isfinite(val) else None
    return obj


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), sort_keys=True, indent=2) + "\n")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read file ({exc.strerror})") from exc


def _out_dir(args, command: str, name: str) -> Path:
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name) or "system"
    path = Path(args.out) / command / safe
    path.mkdir(parents=True, exist_ok=True)
    return path


def parse_poles(text: str) -> list:
    """Comma-separated real or complex numbers such as ``"-1,-2+1j,-2-1j"``."""
    text = text.strip()
    if not text:
        return []
    out = []
    for item in text.split(","):
        item = item.strip().replace(" ", "")
        try:
            out.append(complex(item))
        except ValueError as exc:
            raise ValidationError(f"cannot parse pole {item!r}") from exc
    return out


def _read_k(path, r, p):
    data = _load_json(path)
    if isinstance(data, dict):
        if "K" not in data:
            raise ValidationError(f"{path}: expected a matrix or an object with key 'K'")
        data = data["K"]
    try:
        K = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: K must be a numeric matrix") from exc
    if K.size == 0 and r * p == 0:
        return np.zeros((r, p))
    if K.ndim != 2 or K.shape != (r, p):
        raise ValidationError(f"{path}: K must be {r}x{p}, got shape {K.shape}")
    return K


def _masks(dsf, vp, args, rng):
    nsamples = max(args.samples, 10)
    return {
        "Q": sparsity_of(dsf.Q, 1e-9, nsamples, rng).mask,
        "P": sparsity_of(dsf.P, 1e-9, nsamples, rng).mask,
        "W": sparsity_of(vp.W, 1e-9, nsamples, rng).mask,
        "V": sparsity_of(vp.V, 1e-9, nsamples, rng).mask,
    }


def _finish(args, out: Path, report: dict, checks: Report, topology=None) -> int:
    report["checks"] = checks.to_dict()["checks"]
    report["passed"] = checks.passed
    _write_json(out / "report.json", report)
    if topology is not None:
        (out / "topology.dot").write_text(topology.dot)
    status = "PASS" if checks.passed else "FAIL"
    print(f"{status} {report['command']} {report['name']}: {len(checks.checks)} checks -> {out}")
    for c in checks.checks:
        if not c.passed:
            print(f"  failed {c.name}: margin {c.margin:.3e}", file=sys.stderr)
    return EXIT_OK if checks.passed else EXIT_NUMERICAL


def _stability_check(name, A, domain) -> Check:
    eigs = np.linalg.eigvals(A) if A.size else np.zeros(0)
    if domain == "continuous":
        margin = float(-np.max(eigs.real)) if eigs.size else np.inf
    else:
        margin = float(1 - np.max(np.abs(eigs))) if eigs.size else np.inf
    return Check(name, bool(is_stable_matrix(A, domain)), margin, None)


# --------------------------------------------------------------------------
# commands


def cmd_dsf(args) -> int:
    rng = np.random.default_rng(args.seed)
    sys_, name = load_system(args.system)
    base, T = to_output_canonical(sys_)
    K = _read_k(args.k_file, base.r, base.p) if args.k_file else None
    vp = viable_pair(base, K)
    dsf = dsf_from_viable(vp)
    checks = identity_suite(sys_, vp, dsf, None, rng, args.samples, args.tol)
    via = check_viability(vp, rng, args.samples, args.tol)
    checks = checks + Report((Check("mcmillan_degree_bound", via.degree <= via.bound,
                                    float(via.bound - via.degree), None,
                                    f"degree {via.degree}, bound {via.bound}"),))
    topo = topology_report(dsf, 1e-9, max(args.samples, 10), rng, name="dsf")
    report = {
        "command": "dsf", "name": name, "n": sys_.n, "p": sys_.p, "m": sys_.m,
        "domain": sys_.domain, "K": vp.K, "transform": T,
        "masks": _masks(dsf, vp, args, rng),
        "edges": [[j + 1, i + 1] for j, i in topo.edges],
    }
    out = _out_dir(args, "dsf", name)
    return _finish(args, out, report, checks, topo if args.dot else None)


def _pipeline_factors(sys_, K_targets, rng, args):
    base, _ = to_output_canonical(sys_)
    K = place_pair_poles(base, K_targets, rng) if base.r else None
    vp = viable_pair(base, K)
    left = default_left_factor(base.p, sys_.domain)
    cf = stable_coprime_from_viable(vp, left)
    return base, vp, left, cf


def _factor_checks(sys_, vp, cf, rng, args, pair_identity: bool = True) -> Report:
    checks = Report((_stability_check("factors_stable", cf.joint.A, cf.domain),))
    checks = checks + identity_suite(sys_, vp if pair_identity else None, None, cf, rng,
                                     args.samples, args.tol)
    pair = coprimeness_certificate(vp.W, vp.V, rng, 30, args.tol)
    checks = checks + Report(tuple(Check("pair_" + c.name, c.passed, c.margin, c.worst_lambda,
                                         c.detail) for c in pair.checks))
    fac = certify_pencil(cf.joint.to_pencil(), cf.p, rng, 30, args.tol)
    checks = checks + Report(tuple(Check("factors_" + c.name, c.passed, c.margin, c.worst_lambda,
                                         c.detail) for c in fac.checks))
    return checks


def _factors_file(cf: CoprimeFactors, name: str) -> dict:
    data = factors_to_dict(cf, name)
    data["poles"] = sorted(cf.poles.tolist(), key=lambda z: (z.real, z.imag))
    return data


def cmd_coprime(args) -> int:
    rng = np.random.default_rng(args.seed)
    sys_, name = load_system(args.system)
    targets = parse_poles(args.poles)
    base, vp, left, cf = _pipeline_factors(sys_, targets, rng, args)
    checks = _factor_checks(sys_, vp, cf, rng, args)
    out = _out_dir(args, "coprime", name)
    _write_json(out / "factors.json", _factors_file(cf, name))
    report = {
        "command": "coprime", "name": name, "n": sys_.n, "p": sys_.p, "m": sys_.m,
        "domain": sys_.domain, "K": vp.K, "pair_poles": vp.pole_matrix,
        "targets": targets, "Ax": left.Ax,
    }
    topo = topology_report(dsf_from_viable(vp), 1e-9, max(args.samples, 10), rng) if args.dot else None
    return _finish(args, out, report, checks, topo)


def _recovery_checks(cf, rec, rng, args) -> Report:
    rebuilt = stable_coprime_from_viable(rec.pair, rec.left)
    grid = sample_grid([cf.joint, rec.pair.W, rec.pair.V], rng, args.samples)
    rt = max(relative_error(cf.joint.evaluate(lam), rebuilt.joint.evaluate(lam)) for lam in grid)
    p = cf.p
    ident = max(relative_error(cf.transfer(lam),
                               np.linalg.solve(lam * np.eye(p) - rec.pair.W.evaluate(lam),
                                               rec.pair.V.evaluate(lam)))
                for lam in grid)
    tol_res = rec.problem.tolerance()
    return Report((
        Check("riccati_residual", rec.solution.residual < tol_res, rec.solution.residual, None,
              f"tolerance {tol_res:.3e}"),
        Check("factor_round_trip", rt < args.tol, rt, None),
        Check("recovered_identity", ident < args.tol, ident, None),
        _stability_check("recovered_ax_stable", rec.Ax, cf.domain),
    ))


def _recovery_report(rec) -> dict:
    sol = rec.solution
    return {
        "K": sol.K, "Ax": rec.Ax, "riccati_residual": sol.residual,
        "v1_condition": sol.condition, "feasible_subspaces": sol.feasible,
        "candidate_subspaces": sol.candidates,
        "closed_spectrum": np.asarray(sol.closed_spectrum, dtype=complex),
        "W": system_to_dict(rec.pair.W, "W"), "V": system_to_dict(rec.pair.V, "V"),
    }


def cmd_recover(args) -> int:
    rng = np.random.default_rng(args.seed)
    cf, name = factors_from_dict(_load_json(args.factors))
    try:
        rec = recover_viable(cf)
    except DisconjugacyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    checks = _recovery_checks(cf, rec, rng, args)
    dsf = dsf_from_viable(rec.pair)
    topo = topology_report(dsf, 1e-9, max(args.samples, 10), rng)
    out = _out_dir(args, "recover", name)
    report = {"command": "recover", "name": name, **_recovery_report(rec),
              "masks": _masks(dsf, rec.pair, args, rng)}
    return _finish(args, out, report, checks, topo if args.dot else None)


def cmd_demo(args) -> int:
    rng = np.random.default_rng(args.seed)
    spec = DEMOS[args.network]()
    sys_ = compose(spec, rng)
    base, _ = to_output_canonical(sys_)
    vp = viable_pair(base)
    dsf = dsf_from_viable(vp)
    topo = topology_report(dsf, 1e-9, max(args.samples, 30), rng, name=args.network)
    checks = identity_suite(sys_, vp, dsf, None, rng, args.samples, args.tol)
    adjacency_ok = bool(np.array_equal(topo.adjacency(), spec.adjacency()))
    checks = checks + Report((Check("topology_matches", adjacency_ok, 1.0 if adjacency_ok else 0.0),))
    left = default_left_factor(base.p, sys_.domain)
    cf = stable_coprime_from_viable(vp, left)
    checks = checks + _factor_checks(sys_, vp, cf, rng, args, pair_identity=False)
    rec = recover_viable(cf)
    checks = checks + _recovery_checks(cf, rec, rng, args)
    grid = sample_grid([vp.W, vp.V, rec.pair.W, rec.pair.V], rng, args.samples)
    pair_err = max(max(relative_error(vp.W.evaluate(l), rec.pair.W.evaluate(l)),
                       relative_error(vp.V.evaluate(l), rec.pair.V.evaluate(l))) for l in grid)
    checks = checks + Report((Check("recovered_pair_matches", pair_err < 1e-6, pair_err, None),))
    out = _out_dir(args, "demo", args.network)
    _write_json(out / "factors.json", _factors_file(cf, args.network))
    _write_json(out / "network.json", network_to_dict(spec))
    _write_json(out / "system.json", system_to_dict(sys_, args.network))
    report = {
        "command": "demo", "name": args.network, "n": sys_.n, "p": sys_.p, "m": sys_.m,
        "edges": [[j + 1, i + 1] for j, i in topo.edges],
        "masks": _masks(dsf, vp, args, rng),
        "recovery": _recovery_report(rec),
    }
    return _finish(args, out, report, checks, topo)


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="seed of the single random generator")
    common.add_argument("--tol", type=float, default=1e-8, help="tolerance of the identity checks")
    common.add_argument("--samples", type=int, default=20, help="number of random sample points")
    common.add_argument("--out", default="out", help="output root directory")
    common.add_argument("--dot", action="store_true", help="also write topology.dot")

    parser = argparse.ArgumentParser(
        prog="dsfkit", description="Structure functions and coprime factorizations of LTI systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dsf", parents=[common], help="canonical or K-generated structure function")
    p.add_argument("system", help="system JSON file")
    p.add_argument("--k-file", help="JSON file with the (n-p) x p matrix K")
    p.set_defaults(func=cmd_dsf)

    p = sub.add_parser("coprime", parents=[common], help="stable left coprime factors")
    p.add_argument("system", help="system JSON file")
    p.add_argument("--poles", default="", help="comma-separated poles of the pair, n-p of them; write --poles=-1,-2 so the leading minus is not read as an option")
    p.set_defaults(func=cmd_coprime)

    p = sub.add_parser("recover", parents=[common], help="viable pair from stable factors")
    p.add_argument("factors", help="factor JSON file (as written by 'coprime')")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("demo", parents=[common], help="full pipeline on a demo network")
    p.add_argument("network", choices=sorted(DEMOS))
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.samples < 1:
        parser.error("--samples must be positive")
    if not args.tol > 0:
        parser.error("--tol must be positive")
    try:
        return args.func(args)
    except UnobservableError as exc:
        modes = ", ".join(f"{m:.6g}" for m in exc.modes)
        print(f"error: {exc} [unobservable modes: {modes}]", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
