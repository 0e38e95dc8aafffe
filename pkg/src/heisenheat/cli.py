"""Command-line front end: ``heisenheat <command> [options]``.

Every configuration key of a command is also a ``--key value`` flag.
Exit codes: 0 all checks passed, 1 a check failed, 2 bad configuration,
3 numerical failure, 4 output/I-O problem.
"""
from __future__ import annotations

import argparse
import math
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from .config import SCHEMAS, ConfigError, read_config_file, resolve_config
from .grid import DivergedFieldError, GridAnisotropyWarning, GridSpec, write_hfield
from .heat import NumericalInstabilityError
from .mild import NonContractiveError
from .reports import OutputExistsError, RunManifest, prepare_out_dir, write_csv

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4

OUTPUTS = {
    "kernel": ("kernel-report.csv",),
    "solve": ("trajectory.csv",),
    "sweep": ("sweep-result.csv", "sweep-fit.txt"),
    "certify": ("certificate-report.csv",),
    "mild": ("picard-report.csv",),
    "estimates": ("estimates-report.csv",),
}


class CheckLog:
    def __init__(self, stream=None):
        self.stream = stream or sys.stdout
        self.results: dict[str, bool] = {}

    def __call__(self, name: str, ok: bool, detail: str = ""):
        ok = bool(ok)
        self.results[name] = ok
        print(f"{'PASS' if ok else 'FAIL'} {name}{': ' + detail if detail else ''}", file=self.stream)

    @property
    def all_passed(self) -> bool:
        return all(self.results.values())


def _grid(cfg) -> GridSpec:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridAnisotropyWarning)
        return GridSpec(cfg["n"], cfg["L_xy"], cfg["L_tau"], cfg["N_xy"], cfg["N_tau"])


# ----------------------------------------------------------------- commands

def cmd_kernel(cfg, out: Path, man: RunManifest, args, check: CheckLog):
    from .heat import check_scaling_identity, check_semigroup, heat_kernels

    g = _grid(cfg)
    ts = sorted(set(cfg["t"]))
    need = sorted(set(ts) | {cfg["t_ref"]} | {t / 2 for t in ts})
    snaps = dict(zip(need, heat_kernels(need, g, mollifier_width=cfg["mollifier"], safety=cfg["safety"])))
    ref = snaps[cfg["t_ref"]]
    rows = []
    for t in ts:
        k = snaps[t]
        try:
            sc = 0.0 if t == cfg["t_ref"] else check_scaling_identity(k, ref)
        except ValueError:
            sc = math.nan
        half = snaps[t / 2]
        sg = check_semigroup(half, half, k)
        rows.append({"t": t, "mass": k.mass, "min_over_max": k.min_over_max, "fitted_c": k.fitted_c,
                     "fitted_C": k.fitted_C, "scaling_err": sc, "semigroup_err": sg})
        if cfg["write_fields"]:
            man.add_output(write_hfield(k.field, out / f"kernel_t{t:g}.hfield"))
    man.add_output(write_csv(out / "kernel-report.csv", list(rows[0]), rows))
    wanted = {c.strip() for c in cfg["checks"].split(",") if c.strip()}
    unknown = wanted - {"mass", "positivity", "sandwich", "semigroup", "scaling"}
    if unknown:
        raise ConfigError(f"invalid value for 'checks': unknown check(s) {', '.join(sorted(unknown))}")
    for r in rows:
        t = r["t"]
        if "mass" in wanted:
            check(f"mass t={t:g}", abs(r["mass"] - 1) <= 0.02, f"{r['mass']:.6f}")
        if "positivity" in wanted:
            check(f"positivity t={t:g}", r["min_over_max"] >= -0.01, f"min/max {r['min_over_max']:.3g}")
        if "sandwich" in wanted:
            c, C = r["fitted_c"], r["fitted_C"]
            check(f"sandwich t={t:g}", c > 0 and C > 0 and c <= C, f"c={c:.4g} C={C:.4g}")
        if "semigroup" in wanted:
            check(f"semigroup t={t:g}", r["semigroup_err"] <= 0.05, f"{r['semigroup_err']:.4g}")
        if "scaling" in wanted and t != cfg["t_ref"]:
            check(f"scaling t={t:g} vs {cfg['t_ref']:g}", r["scaling_err"] <= 0.05, f"{r['scaling_err']:.4g}")


def _solver_config(cfg, grid, epsilon, snapshots=()):
    from .solver import SolverConfig

    params = {"R0": cfg["R0"]} if cfg["u0"] == "compact_bump" else (
        {"kappa": cfg["u0_kappa"]} if cfg["u0"] == "weighted_decay" else {})
    return SolverConfig(p=cfg["p"], epsilon=epsilon, grid=grid, dt_safety=cfg["dt_safety"],
                        blowup_threshold=cfg.get("threshold"), t_max=cfg["t_max"],
                        boundary=cfg.get("boundary", "dirichlet"), u0_kind=cfg["u0"], u0_params=params,
                        c_nl=cfg["c_nl"], kappa=cfg.get("kappa"), snapshot_times=tuple(snapshots),
                        record_every=cfg.get("record_every", 1))


def cmd_solve(cfg, out, man, args, check):
    from .solver import INSTABILITY, run

    rec = run(_solver_config(cfg, _grid(cfg), cfg["epsilon"], cfg["snapshots"]))
    cols = ["t", "sup_norm", "mass", "boundary_max", "weighted_norm_kappa"]
    w = rec.weighted_norms if rec.weighted_norms is not None else [None] * len(rec.times)
    rows = zip(rec.times, rec.sup_norms, rec.masses, rec.boundary_max, w)
    man.add_output(write_csv(out / "trajectory.csv", cols, rows))
    for t, f in sorted(rec.snapshots.items()):
        man.add_output(write_hfield(f, out / f"u_t{t:g}.hfield"))
    man.update(termination=rec.termination, lifespan_estimate=rec.lifespan_estimate,
               contaminated=rec.contaminated, steps=rec.steps, last_stable_time=rec.last_stable_time)
    print(f"termination={rec.termination} T_h={rec.lifespan_estimate} steps={rec.steps} "
          f"contaminated={rec.contaminated}")
    if rec.termination == INSTABILITY:
        raise FloatingPointError(f"solver became unstable at t={rec.first_diverged_time:.6g}")


def cmd_sweep(cfg, out, man, args, check):
    from .sweep import CRITICAL, SUBCRITICAL, SweepConfig, geometric_ladder, run_sweep

    grid = _grid(cfg)
    base = _solver_config(dict(cfg, threshold=None, boundary="dirichlet"), grid, 1.0)
    sc = SweepConfig(p=cfg["p"], epsilons=tuple(geometric_ladder(cfg["eps0"], cfg["count"], cfg["ratio"])),
                     base=base, grid=grid if cfg["grid_mode"] == "common" else None,
                     expected_T0=cfg["expected_T0"], workers=args.workers, N=cfg["N_xy"])
    res = run_sweep(sc)
    rows = [{"epsilon": r.epsilon, "T_h": r.T_h, "termination": r.termination,
             "contaminated": r.contaminated, "grid_Lxy": r.grid.L_xy, "grid_N": r.grid.N_xy}
            for r in res.runs]
    man.add_output(write_csv(out / "sweep-result.csv", list(rows[0]), rows))
    fit = out / "sweep-fit.txt"
    fit.write_text("".join(f"{k} = {v}\n" for k, v in (
        ("regime", res.regime), ("theory_slope", f"{res.theory_slope:.17g}"),
        ("fitted_slope", f"{res.fitted_slope:.17g}"), ("r2", f"{res.r_squared:.17g}"),
        ("pass", str(res.passed).lower()))))
    man.add_output(fit)
    man.update(sweep_details=res.details)
    if res.regime == SUBCRITICAL:
        check("subcritical slope", res.passed,
              f"fitted {res.fitted_slope:.4f} vs {res.theory_slope:.4f}, r2={res.r_squared:.4f}")
    elif res.regime == CRITICAL:
        check("critical form", res.passed, f"slope {res.fitted_slope:.4g}, r2={res.r_squared:.4f}")
    else:
        check("supercritical threshold", res.passed, str(res.details))


def cmd_certify(cfg, out, man, args, check):
    from .certificates import certify_trajectory
    from .solver import BLOWUP, run

    snaps = (0.0,) + tuple(np.geomspace(0.05, 100.0, cfg["snapshots"]))
    c = dict(cfg, u0="compact_bump", t_max=1e4, threshold=None, boundary="dirichlet", kappa=None)
    rec = run(_solver_config(c, _grid(cfg), cfg["epsilon"], snaps))
    if rec.termination != BLOWUP:
        raise FloatingPointError(f"certificates need a blow-up trajectory; run ended by {rec.termination}")
    rep = certify_trajectory(rec, cfg["epsilon"], cfg["p"], cfg["R"], cfg["deriv_N"], cfg["si2_slack"])
    rows = list(rep.rows())
    man.add_output(write_csv(out / "certificate-report.csv", list(rows[0]), rows))
    man.update(lifespan_estimate=rec.lifespan_estimate, inequalities=rep.inequalities)
    for name, ok in rep.inequalities.items():
        check(name, ok)


def cmd_mild(cfg, out, man, args, check):
    from .mild import contraction_probe, picard_solve, random_ball_pair
    from .solver import initial_datum

    g = _grid(cfg)
    u0 = initial_datum("weighted_decay", {"kappa": cfg["kappa"]}, g)
    times = np.linspace(0.0, cfg["T"], cfg["m"] + 1)
    rng = np.random.default_rng(args.seed)
    probes = []
    for _ in range(cfg["probes"]):
        u, v = random_ball_pair(g, times, cfg["radius"] * cfg["epsilon"], cfg["kappa"], rng)
        probes.append(contraction_probe(u, v, cfg["epsilon"], cfg["p"], cfg["kappa"],
                                        radius=cfg["radius"]))
    res = picard_solve(u0, cfg["epsilon"], cfg["p"], cfg["kappa"], cfg["T"], cfg["iterations"], cfg["m"])
    rows = [(i + 1, r, b, l) for i, (r, b, l) in enumerate(zip(res.residuals, res.ball_norms, res.lipschitz))]
    man.add_output(write_csv(out / "picard-report.csv",
                             ["iteration", "residual", "ball_norm", "lipschitz_estimate"], rows))
    man.update(probe_ratios=probes)
    if probes:
        check("contraction probes", max(probes) <= cfg["max_probe_ratio"], f"max ratio {max(probes):.4g}")
    # ratios at round-off level carry no information
    ratios = [b / a for a, b in zip(res.residuals, res.residuals[1:]) if a > 1e-13]
    check("picard geometric decay", bool(ratios) and max(ratios) <= cfg["max_residual_ratio"],
          f"max residual ratio {max(ratios) if ratios else math.nan:.4g}")


def cmd_estimates(cfg, out, man, args, check):
    from .mild import check_duhamel_bound, check_linear_decay

    g = _grid(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridAnisotropyWarning)
        wide = GridSpec(cfg["n"], cfg["wide_L_xy"], cfg["wide_L_tau"], cfg["wide_N"], cfg["wide_N"])
    rows = []
    Q = g.Q
    for kappa in cfg["kappas"]:
        rep = check_linear_decay(kappa, g if kappa > Q else wide, cfg["linear_times"])
        rows += [("linear_decay", kappa, t, r, rep.passed) for t, r in zip(rep.times, rep.max_ratios)]
        check(f"linear decay kappa={kappa:g}", rep.passed and not rep.contaminated,
              f"ratios {min(rep.max_ratios):.4g}..{max(rep.max_ratios):.4g}"
              + (" (boundary-contaminated)" if rep.contaminated else ""))
    for alpha in cfg["alphas"]:
        endpoint = math.isclose(alpha, 1 + Q / 2)
        ts = cfg["endpoint_times"] if endpoint else cfg["duhamel_times"]
        rep = check_duhamel_bound(alpha, g, ts, steps_per_unit=cfg["steps_per_unit"])
        rows += [(rep.check_name, alpha, t, r, rep.passed) for t, r in zip(rep.times, rep.max_ratios)]
        ok = rep.passed and not rep.contaminated
        detail = f"ratios {min(rep.max_ratios):.4g}..{max(rep.max_ratios):.4g}"
        if endpoint:
            plain = rep.extra["plain"]
            rows += [("duhamel_bound_plain", alpha, t, r, False) for t, r in zip(rep.times, plain)]
            grows = bool(np.all(np.diff(plain) > 0))
            ok = ok and grows
            detail += f"; uncorrected {'grows' if grows else 'does not grow'} ({plain[0]:.3g}..{plain[-1]:.3g})"
        check(f"duhamel bound alpha={alpha:g}", ok, detail)
    man.add_output(write_csv(out / "estimates-report.csv",
                             ["check_name", "kappa_or_alpha", "t", "max_ratio", "pass"], rows))


COMMAND_FUNCS = {"kernel": cmd_kernel, "solve": cmd_solve, "sweep": cmd_sweep,
                 "certify": cmd_certify, "mild": cmd_mild, "estimates": cmd_estimates}


# ------------------------------------------------------------------- parser

def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=d, help="flat key = value config file")
    p.add_argument("--out", metavar="DIR", default=d, help="output directory (default: ./<command>-out)")
    p.add_argument("--workers", metavar="N", type=int, default=argparse.SUPPRESS if suppress else 1)
    p.add_argument("--seed", metavar="S", type=int, default=argparse.SUPPRESS if suppress else 0)
    p.add_argument("--force", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="overwrite existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heisenheat", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=f"run the {name} workflow")
        _global_flags(sp, suppress=True)
        grp = sp.add_argument_group("configuration keys")
        for key, spec in schema.items():
            grp.add_argument(f"--{key}", dest=f"cfg__{key}", metavar="VALUE", default=None,
                             help=f"{spec.help} (default {spec.default!r})".strip())
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    overrides = {k[5:]: v for k, v in vars(args).items() if k.startswith("cfg__") and v is not None}
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(command, file_values, overrides)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out or f"{command}-out")
    try:
        out = prepare_out_dir(out_dir, args.force, OUTPUTS[command])
        man = RunManifest(out, command, cfg, workers=args.workers, seed=args.seed)
    except (OutputExistsError, OSError) as e:
        print(f"output error: {e}", file=sys.stderr)
        return EXIT_IO
    check = CheckLog()
    code, status, msg = EXIT_OK, "ok", ""
    try:
        COMMAND_FUNCS[command](cfg, out, man, args, check)
        if not check.all_passed:
            code, status = EXIT_CHECK, "checks failed"
    except ConfigError as e:
        code, status, msg = EXIT_CONFIG, "config error", str(e)
    except (ArithmeticError, DivergedFieldError, NumericalInstabilityError, NonContractiveError) as e:
        code, status, msg = EXIT_NUMERICAL, "numerical failure", str(e)
    except ValueError as e:
        # a module precondition rejected the resolved configuration
        code, status, msg = EXIT_CONFIG, "config error", str(e)
    except OSError as e:
        code, status, msg = EXIT_IO, "i/o error", str(e)
    except Exception as e:  # noqa: BLE001 - recorded in the manifest, then re-raised
        man.finalize("crashed", 70, f"{type(e).__name__}: {e}", traceback=traceback.format_exc())
        raise
    except KeyboardInterrupt:
        man.finalize("interrupted", 130)
        raise
    if msg:
        print(f"{status}: {msg}", file=sys.stderr)
    man.finalize(status, code, msg, checks=check.results)
    return code


if __name__ == "__main__":
    sys.exit(main())
