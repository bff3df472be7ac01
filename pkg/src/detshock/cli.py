"""Command-line front end.

Subcommands ``polar``, ``solve``, ``verify`` and ``sweep``; see
``detshock --help``.  Exit codes: 0 ok, 1 configuration error, 2 solver
failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .csvio import read_header, read_table, write_table
from .elliptic_solver import background_pair, make_field, write_field_csv
from .errors import ConfigError, DetShockError, VerificationError, exit_code_for
from .free_boundary import (
    FreeBoundarySolution,
    SolveSettings,
    l_sweep,
    max_workers,
    solve_free_boundary,
    update_shock,
)
from .gas_model import GasParams, incoming_state
from .geometry import (
    BluntBody,
    ShockCurve,
    build_cutoff_domain,
    default_body,
    lower_cutoff_height,
    make_grid,
    wedge_body,
    write_shock_csv,
)
from .shock_polar import detachment_angle, polar_curve, solve_branches, write_polar_csv
from .verifier import VerificationReport, verify

log = logging.getLogger("detshock")

# ----------------------------------------------------------------------------
# config -> objects


def make_body(cfg: RunConfig) -> BluntBody:
    if cfg.body == "wedge":
        return wedge_body(cfg.theta_w, apex=cfg.wedge_apex)
    return default_body(cfg.theta_w, cfg.h0)


def resolve_L(cfg: RunConfig, body: BluntBody, factor: float | None = None) -> float:
    """Absolute cut-off height from ``L`` or a multiple of the minimum height."""
    if factor is None and cfg.L is not None:
        return cfg.L
    L_min = lower_cutoff_height(body, cfg.d0)
    if not L_min > 0.0:
        raise ConfigError("the minimum cut-off height is not positive for this body; set L explicitly")
    return (cfg.L_factor if factor is None else factor) * L_min


def make_settings(cfg: RunConfig) -> SolveSettings:
    return SolveSettings(
        n_s=cfg.n_s,
        n_t=cfg.n_t,
        stretch=cfg.stretch,
        damping=cfg.damping,
        tol_f=cfg.tol_f,
        max_outer=cfg.max_outer,
        omega=cfg.omega,
        tol_psi=cfg.tol_psi,
        tol_pde=cfg.tol_pde,
        max_picard=cfg.max_picard,
    )


def _solve_kwargs(cfg: RunConfig, g: GasParams, body: BluntBody, eps: float) -> dict:
    kwargs = {
        "seed_profile": cfg.seed_profile,
        "norm_params": (cfg.norm_beta, cfg.norm_alpha),
    }
    if cfg.M1 is not None and cfg.M2 is not None:
        kwargs["membership"] = (cfg.M1, cfg.M2)
    if cfg.body == "wedge":
        # the straight wedge carries the background stream function on its walls
        bg = background_pair(g, eps, body.theta_w, cfg.d0, body.b0)
        kwargs["wall_data"] = bg.psi0
        kwargs["seed_profile"] = "background"
    return kwargs


def _run_solve(cfg: RunConfig, L: float, eps: float) -> FreeBoundarySolution:
    g = GasParams(cfg.gamma, cfg.b0_bernoulli)
    body = make_body(cfg)
    return solve_free_boundary(body, g, eps, cfg.d0, L, make_settings(cfg), **_solve_kwargs(cfg, g, body, eps))


def _write_solution(out: Path, cfg: RunConfig, sol: FreeBoundarySolution, g: GasParams) -> None:
    out.mkdir(parents=True, exist_ok=True)
    header = cfg.header_lines() + [f"L_used={sol.report.L!r}"]
    write_shock_csv(out / "shock.csv", sol.shock, header)
    write_field_csv(out / "field.csv", sol.field, g, header)
    (out / "report.txt").write_text(sol.report.to_text(), encoding="utf-8")


# ----------------------------------------------------------------------------
# subcommands


def cmd_polar(cfg: RunConfig, out: Path) -> int:
    """Polar curve, branch states and detachment angle."""
    g = GasParams(cfg.gamma, cfg.b0_bernoulli)
    out.mkdir(parents=True, exist_ok=True)
    curve = polar_curve(g, cfg.eps, cfg.polar_samples)
    write_polar_csv(out / "polar.csv", curve, g, cfg.eps, cfg.header_lines())
    theta_det, point = detachment_angle(g, cfg.eps, return_point=True)
    (out / "detachment.txt").write_text(
        f"config_hash = {cfg.digest()}\n"
        f"theta_det_degrees = {math.degrees(theta_det)!r}\n"
        f"theta_det_radians = {theta_det!r}\n"
        f"u = {float(point[0])!r}\nv = {float(point[1])!r}\n",
        encoding="utf-8",
    )
    strong, weak = solve_branches(g, cfg.eps, cfg.theta_w)
    inc = incoming_state(g, cfg.eps)
    lines = [f"config_hash = {cfg.digest()}", f"rho_inf = {inc.rho!r}", f"u_inf = {inc.u1!r}"]
    for label, sol in (("strong", strong), ("weak", weak)):
        lines += [f"{label}.{k} = {float(getattr(sol, k))!r}" for k in ("rho", "u", "s")]
        for key, value in sol.entropy_margins(inc).items():
            lines.append(f"{label}.margin.{key} = {float(value)!r}")
    (out / "branches.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("polar written to %s (theta_det = %.4f deg)", out, math.degrees(theta_det))
    return 0


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    """Free-boundary solve: ``shock.csv``, ``field.csv`` and ``report.txt``."""
    g = GasParams(cfg.gamma, cfg.b0_bernoulli)
    L = resolve_L(cfg, make_body(cfg))
    sol = _run_solve(cfg, L, cfg.eps)
    _write_solution(out, cfg, sol, g)
    rep = sol.report
    log.info("converged in %d outer iterations (%.1f s); %d checks failed",
             rep.iterations, rep.elapsed, len(rep.checks.failures()))
    return 0


def _header_value(lines: list[str], key: str) -> str | None:
    for line in lines:
        if line.startswith(key + "="):
            return line.split("=", 1)[1]
    return None


def reverify(cfg: RunConfig, out: Path) -> VerificationReport:
    """Rebuild the domain from ``shock.csv``, attach ``field.csv`` and run the checks."""
    g = GasParams(cfg.gamma, cfg.b0_bernoulli)
    body = make_body(cfg)
    shock_path, field_path = out / "shock.csv", out / "field.csv"
    for path in (shock_path, field_path):
        if not path.exists():
            raise ConfigError(f"missing input file {path}")
    header = read_header(shock_path)
    tab = read_table(shock_path)
    fp = tab["f_prime"]
    shock = ShockCurve(tab["x2"], tab["f"], (float(fp[0]), float(fp[-1])))
    L = shock.L
    dom = build_cutoff_domain(body, shock, cfg.d0, L, cfg.stretch)
    grid = make_grid(dom, cfg.n_s, cfg.n_t)
    ftab = read_table(field_path)
    n_s, n_t = grid.shape
    if ftab["psi"].size != n_s * n_t:
        raise ConfigError(f"field.csv has {ftab['psi'].size} nodes, config expects {n_s}x{n_t}")
    psi = np.empty((n_s, n_t))
    xy = np.empty((n_s, n_t, 2))
    ii, jj = ftab["i"].astype(int), ftab["j"].astype(int)
    psi[ii, jj] = ftab["psi"]
    xy[ii, jj, 0], xy[ii, jj, 1] = ftab["x1"], ftab["x2"]
    fld = make_field(g, grid, psi)
    bg = background_pair(g, cfg.eps, body.theta_w, cfg.d0, body.b0)

    report = VerificationReport()
    report.add("config_hash_match", float(_header_value(header, "config_hash") == cfg.digest()), ">=", 1.0)
    report.add("grid_consistency", float(np.max(np.abs(xy - grid.x))), "<=", 1e-9 * (1.0 + L))
    checks = verify(fld, shock, body, g, cfg.eps, cfg.d0, bg)
    report.checks.extend(checks.checks)
    fixed = float(np.max(np.abs(update_shock(fld, dom, g, cfg.eps).f - shock.f)))
    report.add("fixed_point_residual", fixed, "<=", 2.0 * cfg.tol_f * (1.0 + L))
    return report


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    """Re-read a solve's outputs, write ``verify.txt``; exit 0 iff every check passes."""
    report = reverify(cfg, out)
    (out / "verify.txt").write_text(report.to_text(), encoding="utf-8")
    failed = report.failures()
    if failed:
        raise VerificationError("failed checks: " + ", ".join(c.name for c in failed))
    return 0


SUMMARY_COLUMNS = (
    "converged",
    "verified",
    "min_b_minus_f",
    "max_mach",
    "min_fpp",
    "rh_residual",
    "asym_fprime",
    "asym_far_field",
)


def _summary_row(sol: FreeBoundarySolution | None) -> dict:
    if sol is None:
        return {"converged": 0, "verified": 0, **{k: math.nan for k in SUMMARY_COLUMNS[2:]}}
    c = sol.report.checks
    return {
        "converged": 1,
        "verified": int(c.all_passed),
        "min_b_minus_f": sol.report.min_gap,
        "max_mach": c["max_mach"].value,
        "min_fpp": c["convexity_min_fpp"].value,
        "rh_residual": max(c["rh_mass"].value, c["rh_tangential"].value),
        "asym_fprime": c["asym_fprime"].value,
        "asym_far_field": c["asym_far_field"].value,
    }


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    """Independent solves over ``L_list``/``L_factor_list`` or ``eps_list``."""
    g = GasParams(cfg.gamma, cfg.b0_bernoulli)
    body = make_body(cfg)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.L_list or cfg.L_factor_list:
        key = "L"
        values = list(cfg.L_list) or [resolve_L(cfg, body, f) for f in cfg.L_factor_list]
        sweep = l_sweep(body, g, cfg.eps, cfg.d0, values, make_settings(cfg), **_solve_kwargs(cfg, g, body, cfg.eps))
        sols, errs = sweep.solutions, sweep.errors
        write_table(
            out / "differences.csv",
            ["L_a", "L_b", "shock_difference"],
            {"L_a": values[:-1], "L_b": values[1:], "shock_difference": sweep.differences},
            cfg.header_lines(),
        )
    elif cfg.eps_list:
        key = "eps"
        values = list(cfg.eps_list)
        L = resolve_L(cfg, body)

        def job(e):
            try:
                return _run_solve(cfg, L, e), None
            except DetShockError as exc:
                return None, f"{type(exc).__name__}: {exc}"

        with ThreadPoolExecutor(max_workers=max_workers(len(values))) as pool:
            results = list(pool.map(job, values))
        sols = [r[0] for r in results]
        errs = [r[1] for r in results]
    else:
        raise ConfigError("sweep needs L_list, L_factor_list or eps_list")

    rows = {name: [] for name in (key,) + SUMMARY_COLUMNS}
    for value, sol, err in zip(values, sols, errs):
        run_dir = out / f"{key}_{value:.6g}"
        if sol is not None:
            run_cfg = cfg.replace(eps=value) if key == "eps" else cfg
            _write_solution(run_dir, run_cfg, sol, g)
            (run_dir / "verify.txt").write_text(sol.report.checks.to_text(), encoding="utf-8")
        else:
            run_dir.mkdir(parents=True, exist_ok=True)
            (run_dir / "error.txt").write_text(err + "\n", encoding="utf-8")
            log.warning("%s = %g failed: %s", key, value, err)
        rows[key].append(value)
        for name, v in _summary_row(sol).items():
            rows[name].append(v)
    write_table(out / "summary.csv", list(rows), rows, cfg.header_lines())
    good = sum(1 for c, v in zip(rows["converged"], rows["verified"]) if c and v)
    if good:
        return 0
    if any(rows["converged"]):
        raise VerificationError("no sweep entry passed verification")
    return 2


COMMANDS = {"polar": cmd_polar, "solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detshock",
        description="Detached bow shock past a symmetric blunt body.",
        epilog="exit codes: 0 ok, 1 configuration error, 2 solver failure, 3 verification failure",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "polar": "shock polar, branch states and detachment angle",
        "solve": "free-boundary solve on the cut-off domain",
        "verify": "re-check the outputs of a solve",
        "sweep": "independent solves over L_list/L_factor_list or eps_list",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--out", type=Path, help="output directory (default: output_dir from the config)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            cfg = load_config(args.config, args.override)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DetShockError):
                raise
            raise ConfigError(str(exc)) from exc
        out = args.out if args.out is not None else Path(cfg.output_dir)
        return COMMANDS[args.command](cfg, out)
    except (DetShockError, FileNotFoundError) as exc:
        code = exit_code_for(exc)
        kind = {1: "configuration error", 2: "solver failure", 3: "verification failure"}[code]
        print(f"detshock {args.command}: {kind}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
