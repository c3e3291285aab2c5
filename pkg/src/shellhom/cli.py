"""Command-line entry point ``shellhom``.

Subcommands read one TOML config; flags override its values.  Every run
writes ``diagnostics.txt`` and ``resolved-config.toml`` into the output
directory next to the JSON/CSV results.

Exit codes: 0 success, 2 configuration/input error, 3 solver failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cellform import INF, RegimeParams, gamma_sweep, solve_cell_form
from .config import RunConfig, check_n, fmt_float, gamma_value, load_config
from .errors import (ConfigError, ShellhomError, SolverError,
                     VerificationFailure)
from .geometry import (Disk, build_immersion, build_surface, relative_weingarten,
                       rigid_immersion, rotation_matrix, shell_identity_residuals)
from .material import material_from_config, verify_material_axioms
from .relaxation import SpectralBasis

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4


# --- serialization -----------------------------------------------------------

def _plain(obj):
    """Numpy-free copy with floats pre-formatted for the JSON writer."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _Float(float(obj))
    return obj


class _Float(float):
    pass


def dumps_json(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    def enc(v, ind):
        pad = "  " * (ind + 1)
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(x, ind + 1)}" for k, x in v.items()]
            return "{\n" + ",\n".join(items) + "\n" + "  " * ind + "}"
        if isinstance(v, list):
            if all(not isinstance(x, (dict, list)) for x in v):
                return "[" + ", ".join(enc(x, ind) for x in v) + "]"
            return "[\n" + ",\n".join(pad + enc(x, ind + 1) for x in v) + "\n" \
                + "  " * ind + "]"
        if isinstance(v, _Float):
            return json.dumps(fmt_float(v)) if not math.isfinite(v) else fmt_float(v)
        return json.dumps(v)
    return enc(_plain(obj), 0) + "\n"


def dumps_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt_float(v) for v in r])
    return buf.getvalue()


# --- argument parsing ----------------------------------------------------------

def parse_grid(text: str):
    """``a:b:nlog`` / ``a:b:nlin`` ranges or comma lists of numbers."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad grid {text!r}; expected a:b:Nlog or a:b:Nlin")
        a, b, n = parts
        kind = "log" if n.endswith("log") else "lin" if n.endswith("lin") else None
        if kind is None:
            raise ConfigError(f"grid count {n!r} must end in 'log' or 'lin'")
        try:
            a, b, k = float(a), float(b), int(n[:-3])
        except ValueError:
            raise ConfigError(f"bad grid {text!r}")
        if k < 1:
            raise ConfigError("grid needs at least one point")
        if kind == "log":
            if a <= 0 or b <= 0:
                raise ConfigError("log grid bounds must be positive")
            return list(np.logspace(math.log10(a), math.log10(b), k))
        return list(np.linspace(a, b, k))
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad number list {text!r}")


def parse_point(text: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad point {text!r}")
    if len(vals) != 2:
        raise ConfigError("point needs two parameter coordinates")
    return vals


def parse_regime(text: str):
    key, sep, val = text.partition("=")
    if not sep or key.strip() != "gamma1":
        raise ConfigError(f"bad regime {text!r}; expected gamma1=<value|inf>")
    return val.strip()


def build_parser():
    p = argparse.ArgumentParser(prog="shellhom",
                                description="Effective bending forms of "
                                            "multiscale elastic shells.")
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for sampled checks")
    common.add_argument("--regime", help="gamma1=<value|inf>")
    common.add_argument("--ny", type=int)
    common.add_argument("--nz", type=int)
    common.add_argument("--nt", type=int)
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("cellform", parents=[common], help="one cell solve")
    c.add_argument("--point", help="parameter point p1,p2")
    s = sub.add_parser("sweep", parents=[common], help="gamma1 sweep")
    s.add_argument("--gamma1", help="grid, e.g. 1e-3:1e3:9log")
    s.add_argument("--point", help="parameter point p1,p2")
    sub.add_parser("energy", parents=[common], help="limit bending energy")
    v = sub.add_parser("verify", parents=[common], help="invariant suites")
    v.add_argument("suite", choices=("geometry", "material", "relaxation"))
    for name in ("threescale", "limsup"):
        e = sub.add_parser(name, parents=[common])
        e.add_argument("--experiment", help="name of an [experiment.*] table")
        e.add_argument("--hs", help="thickness list or grid")
    return p


def apply_overrides(cfg: RunConfig, args):
    sec = cfg.sections
    if args.out:
        sec["run"]["output"] = args.out
    if args.seed is not None:
        sec["run"]["seed"] = args.seed
    if args.regime:
        sec["regime"]["gamma1"] = gamma_value(parse_regime(args.regime))
    for key in ("ny", "nz", "nt"):
        val = getattr(args, key, None)
        if val is not None:
            sec["discretization"][key] = val
    check_n(sec["discretization"])
    if getattr(args, "point", None):
        sec["run"]["point"] = parse_point(args.point)
    if getattr(args, "gamma1", None):
        sec["run"]["gamma1_grid"] = [float(g) for g in parse_grid(args.gamma1)]
    return cfg


# --- object construction -----------------------------------------------------

def _regime(cfg):
    r = cfg["regime"]
    g = r["gamma1"]
    return RegimeParams(INF if g == "inf" else float(g), str(r.get("eps_law", "auto")))


def _surface(cfg):
    s = cfg["surface"]
    q = s.get("quadrature", 8)
    q = tuple(q) if isinstance(q, list) else int(q)
    try:
        return build_surface(str(s["spec"]), q)
    except ValueError as exc:
        raise ConfigError(f"[surface] {exc}")


def _basis(cfg):
    d = cfg["discretization"]
    return SpectralBasis(d["ny"], d["nz"], d["nt"], d.get("grid_y"), d.get("grid_z"))


def _point(cfg, S):
    pt = cfg["run"].get("point")
    if pt is not None:
        p = np.asarray(pt, dtype=float)
        if not S.domain.contains(p):
            raise ConfigError(f"point {pt} outside the parameter domain")
        return p
    dom = S.domain
    if isinstance(dom, Disk):
        return np.array([dom.cx, dom.cy])
    return np.array([0.5 * (dom.u0 + dom.u1), 0.5 * (dom.v0 + dom.v1)])


def _hs(cfg, exp, args):
    from .harness import default_hs
    if getattr(args, "hs", None):
        return parse_grid(args.hs)
    return [float(h) for h in exp.get("hs", default_hs())]


# --- subcommands ---------------------------------------------------------------

def cmd_cellform(cfg, args, out):
    S, M, B = _surface(cfg), material_from_config(cfg["material"]), _basis(cfg)
    cf = solve_cell_form(_point(cfg, S), S, M, _regime(cfg), B,
                         float(cfg["discretization"]["tol"]))
    text = dumps_json(cf.to_json())
    (out / "cellform.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(cfg, args, out):
    S, M, B = _surface(cfg), material_from_config(cfg["material"]), _basis(cfg)
    grid = cfg["run"].get("gamma1_grid") or [float(g) for g in
                                             np.logspace(-3, 3, 9)]
    res = gamma_sweep(_point(cfg, S), S, M, grid, B,
                      float(cfg["discretization"]["tol"]))
    text = dumps_csv(["gamma1", "M11", "M22", "M33", "M12", "M13", "M23"],
                     res.rows())
    (out / "sweep.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_energy(cfg, args, out):
    from .energy import BendingState, bending_energy, cellforms_at_nodes
    S, M, B = _surface(cfg), material_from_config(cfg["material"]), _basis(cfg)
    u = build_immersion(str(cfg["immersion"]["spec"]))
    from .geometry import isometry_violation
    tol = cfg["immersion"].get("iso_tol")
    BS = BendingState(S, u, None, iso_tol=tol)
    if isometry_violation(S, u) > BS.iso_tol:
        res = bending_energy(BS)
    else:
        BS.cellforms = cellforms_at_nodes(S, M, _regime(cfg), B,
                                          float(cfg["discretization"]["tol"]))
        res = bending_energy(BS)
    text = dumps_json(res.to_json())
    (out / "energy.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _verify_geometry(cfg, rng):
    S = _surface(cfg)
    checks = {}
    # shell-map identities at random interior points over a t-halving sweep
    pts = S.nodes[rng.choice(len(S.nodes), size=min(4, len(S.nodes)),
                             replace=False)]
    h = 0.1
    worst, ratios = 0.0, []
    for p in pts:
        for k in range(4):
            t = 0.4 * h * 0.5 ** k
            r = shell_identity_residuals(S, h, p, t)
            worst = max(worst, r.theta_residual)
            ratios.append(r.dpi_ratio)
    checks["theta_identity"] = {"pass": worst <= 1e-6, "residual": worst}
    spread = max(ratios) / max(min(ratios), 1e-300)
    checks["projection_ratio_bounded"] = {
        "pass": bool(np.all(np.isfinite(ratios)) and max(ratios) < 1e3),
        "max_ratio": max(ratios), "spread": spread}
    # relative Weingarten map of rigid motions
    qmax = 0.0
    for _ in range(3):
        R = rotation_matrix(rng.normal(size=3), rng.uniform(0, 2 * np.pi))
        u = rigid_immersion(R, rng.normal(size=3))
        for p in pts:
            qmax = max(qmax, float(np.abs(relative_weingarten(S, u, p)).max()))
    checks["rigid_weingarten"] = {"pass": qmax <= 1e-8, "max_abs": qmax}
    fr = S.node_frames
    nn = float(np.max(np.abs(np.linalg.norm(fr.normal, axis=1) - 1)))
    checks["unit_normal"] = {"pass": nn <= 1e-12, "deviation": nn}
    return checks, {"h": h}


def _verify_material(cfg, rng):
    M = material_from_config(cfg["material"])
    rep = verify_material_axioms(M, seed=int(rng.integers(2**31)))
    checks = {k: v for k, v in rep.items() if isinstance(v, dict)}
    info = {"alpha_hat": rep["alpha_hat"], "beta_hat": rep["beta_hat"],
            "alpha": M.alpha, "beta": M.beta}
    return checks, info


def _verify_relaxation(cfg, rng):
    from .mandel import from_mandel, to_mandel
    from .material import extract_Q
    from .relaxation import relax_normal
    S, M = _surface(cfg), material_from_config(cfg["material"])
    checks = {}
    G = rng.normal(size=(20, 3, 3))
    G = G + np.swapaxes(G, 1, 2)
    rt = float(np.max(np.abs(from_mandel(to_mandel(G)) - G)))
    checks["mandel_roundtrip"] = {"pass": rt <= 1e-14, "error": rt}
    worst = 0.0
    for p in S.nodes[rng.choice(len(S.nodes), size=min(5, len(S.nodes)),
                                replace=False)]:
        fr = S.frame_at(p)
        y, z, t = rng.random(2), rng.random(2), rng.random() - 0.5
        Qd = extract_Q(M, p, y, z, t)
        rel = relax_normal(Qd, fr)
        for _ in range(5):
            q = rng.normal(size=(2, 2))
            q = q + q.T
            # minimise over the normal/shear slots by direct least squares
            Qc = _frame_form(Qd, fr)
            a = np.array([q[0, 0], q[1, 1], np.sqrt(2) * q[0, 1]])
            keep, elim = [0, 1, 5], [2, 3, 4]
            b = np.linalg.solve(Qc[np.ix_(elim, elim)], -Qc[np.ix_(elim, keep)] @ a)
            v = np.zeros(6)
            v[keep], v[elim] = a, b
            brute = float(v @ Qc @ v)
            worst = max(worst, abs(rel(q) - brute) / max(abs(brute), 1e-300))
    checks["relax_vs_direct"] = {"pass": worst <= 1e-10, "rel_error": worst}
    return checks, {}


def _frame_form(Qd, fr):
    """Frame-coefficient Mandel matrix built by polarisation of Q."""
    from .mandel import from_mandel
    d = fr.coframe
    E = np.eye(6)
    out = np.zeros((6, 6))
    vals = {}
    for i in range(6):
        Gi = d.T @ from_mandel(E[i]) @ d
        vals[i] = Qd(Gi)
    for i in range(6):
        out[i, i] = vals[i]
        for j in range(i):
            Gij = d.T @ from_mandel(E[i] + E[j]) @ d
            out[i, j] = out[j, i] = 0.5 * (Qd(Gij) - vals[i] - vals[j])
    return out


def cmd_verify(cfg, args, out):
    rng = np.random.default_rng(cfg.seed)
    suite = {"geometry": _verify_geometry, "material": _verify_material,
             "relaxation": _verify_relaxation}[args.suite]
    checks, info = suite(cfg, rng)
    ok = all(bool(c["pass"]) for c in checks.values())
    rep = {"suite": args.suite, "seed": cfg.seed, "pass": ok, "checks": checks,
           "info": info}
    text = dumps_json(rep)
    (out / f"verify-{args.suite}.json").write_text(text)
    sys.stdout.write(text)
    if not ok:
        failed = [k for k, c in checks.items() if not c["pass"]]
        raise VerificationFailure(f"{args.suite}: failed {', '.join(failed)}")
    return EXIT_OK


def cmd_threescale(cfg, args, out):
    from .harness import ThreeScaleExperiment, osc_z_pairing, three_scale_pairing
    name, exp = cfg.experiment(("threescale", "strong", "oscz"), args.experiment)
    for key in ("f", "phi", "limit"):
        if key not in exp:
            raise ConfigError(f"[experiment.{name}] misses {key!r}")
    E = ThreeScaleExperiment(
        _surface(cfg), str(exp["f"]), str(exp["phi"]), str(exp["limit"]),
        _regime(cfg), _hs(cfg, exp, args), rho=exp.get("rho"),
        npp=int(exp.get("npp", 8)), n_slow=int(exp.get("n_slow", 16)),
        n_t=int(exp.get("n_t", 4)), cost_guard=float(exp.get("cost_guard", 1e8)))
    if exp["type"] == "oscz":
        rows = osc_z_pairing(E)
    else:
        rows = three_scale_pairing(E, strong=exp["type"] == "strong")
    text = dumps_csv(["h", "lhs", "rhs", "gap"], [r[:4] for r in rows])
    (out / "threescale.csv").write_text(text)
    (out / "threescale-flat.csv").write_text(
        dumps_csv(["h", "shell", "flat", "diff"],
                  [[r[0], r[1], r[4], r[5]] for r in rows]))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_limsup(cfg, args, out):
    from .harness import RecoveryConfig, limsup_check
    name, exp = cfg.experiment(("limsup",), args.experiment)
    w = exp.get("w")
    RC = RecoveryConfig(
        _surface(cfg), build_immersion(str(cfg["immersion"]["spec"])),
        material_from_config(cfg["material"]), _regime(cfg),
        w=[str(c) for c in w] if w is not None else None,
        profiles={k: [str(c) for c in v] for k, v in
                  (exp.get("profiles") or {}).items()},
        hs=_hs(cfg, exp, args), npp=int(exp.get("npp", 8)),
        n_slow=int(exp.get("n_slow", 16)), n_t=int(exp.get("n_t", 8)),
        cost_guard=float(exp.get("cost_guard", 1e8)),
        require_convex=bool(exp.get("require_convex", False)))
    rows = limsup_check(RC)
    text = dumps_csv(["h", "energy_over_h2", "limit", "gap", "Jh_vs_Ih"], rows)
    (out / "limsup.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"cellform": cmd_cellform, "sweep": cmd_sweep, "energy": cmd_energy,
            "verify": cmd_verify, "threescale": cmd_threescale,
            "limsup": cmd_limsup}


def _write_diag(out: Path | None, code, message):
    text = f"exit {code}\n{message}\n"
    target = out if out is not None else Path(".")
    try:
        target.mkdir(parents=True, exist_ok=True)
        (target / "diagnostics.txt").write_text(text)
    except OSError:
        pass
    if code:
        sys.stderr.write(f"shellhom: {message}\n")


def run(argv=None) -> int:
    """Execute one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    out = Path(args.out) if args.out else None
    try:
        cfg = apply_overrides(load_config(args.config), args)
        out = cfg.output
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved-config.toml").write_text(cfg.to_toml())
        code = COMMANDS[args.command](cfg, args, out)
        _write_diag(out, code, "ok")
        return code
    except VerificationFailure as exc:
        _write_diag(out, EXIT_VERIFY, f"verification failed: {exc}")
        return EXIT_VERIFY
    except SolverError as exc:
        _write_diag(out, EXIT_SOLVER, f"solver failure: {type(exc).__name__}: {exc}")
        return EXIT_SOLVER
    except (ShellhomError, ValueError, KeyError) as exc:
        _write_diag(out, EXIT_CONFIG, f"config error: {type(exc).__name__}: {exc}")
        return EXIT_CONFIG


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
