"""Command-line front end: single solves, simulations, parameter sweeps, and
validation checks.  Sweeps emit a schema-stable CSV; reruns with the same
config and seed are byte-identical.

Exit codes: 0 success, 2 config error, 3 solver error, 4 check failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys
from dataclasses import dataclass, replace

import numpy as np

from .distributions import DistributionError, RandomSource, parse_distribution
from .epoch_model import ChannelModel, McConfig, ModelError, draw_epoch_pool, expected_penalty_at
from .penalty import OuParams, PenaltyError, classify_assumption, ou_mmse_closed, ou_mmse_numeric, parse_penalty
from .simulator import POLICY_NAMES, ZeroWait, run, run_all_baselines, solve_baseline_policies
from .solver import (
    SolverConfig,
    SolverError,
    f_beta,
    feasibility_zbar,
    q_gap,
    solve_beta,
    zero_wait_optimal,
)

CSV_HEADER = (
    "param,value,beta,b,opt_avg,opt_se,zw_avg,zw_se,oneway_avg,oneway_se,"
    "twowayef_avg,twowayef_se,onewayef_avg,onewayef_se"
)

_CSV_POLICY_ORDER = ("optimal", "zero-wait", "1-way", "2-wayEF", "1-wayEF")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    forward: str = "lognormal:1.5"
    backward: str = "lognormal:1.5"
    alpha: float = 0.8
    penalty: str = "linear:2"
    epochs: int = 100_000
    samples: int = 100_000
    seed: int = 1
    tol_beta: float = 1e-4
    tol_b: float = 1e-6
    max_iter: int = 200
    allow_unverified_assumption: bool = False
    zbar: float | None = None
    policy: str = "all"
    param: str | None = None
    grid: list[float] | None = None
    workers: int = 1
    out: str | None = None
    trace: str | None = None

    def channel(self) -> ChannelModel:
        return ChannelModel(self.alpha, parse_distribution(self.forward), parse_distribution(self.backward))

    def age_penalty(self):
        return parse_penalty(self.penalty)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            tol_beta=self.tol_beta,
            tol_b=self.tol_b,
            mc=McConfig(samples=self.samples, seed=self.seed),
            max_iter=self.max_iter,
            allow_unverified_assumption=self.allow_unverified_assumption,
        )


_CONFIG_FIELDS = {
    "forward": str,
    "backward": str,
    "alpha": float,
    "penalty": str,
    "epochs": int,
    "samples": int,
    "seed": int,
    "tol_beta": float,
    "tol_b": float,
    "max_iter": int,
    "allow_unverified_assumption": lambda s: s.strip().lower() in ("1", "true", "yes"),
    "zbar": float,
    "policy": str,
    "param": str,
    "grid": lambda s: [float(v) for v in s.split(",")],
    "workers": int,
    "out": str,
    "trace": str,
}


def load_config_file(path: str) -> dict:
    """Flat ``key = value`` lines mirroring the CLI flags; '#' starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
                key, _, value = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in _CONFIG_FIELDS:
                    raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
                try:
                    values[key] = _CONFIG_FIELDS[key](value.strip())
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return values


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **load_config_file(args.config))
    overrides = {}
    for name in _CONFIG_FIELDS:
        if hasattr(args, name) and getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if getattr(args, "allow_unverified_assumption", False):
        overrides["allow_unverified_assumption"] = True
    return replace(cfg, **overrides)


def _fmt(x) -> str:
    return f"{float(x):.6g}"


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key=value config file; flags override")
    parser.add_argument("--forward", help="forward delay spec, e.g. lognormal:1.5")
    parser.add_argument("--backward", help="backward delay spec, e.g. constant:0")
    parser.add_argument("--alpha", type=float, help="forward failure probability in [0, 1)")
    parser.add_argument("--penalty", help="penalty spec, e.g. linear:2 or ou:1:1:1:1")
    parser.add_argument("--samples", type=int, help="Monte-Carlo pool size for the solver")
    parser.add_argument("--seed", type=int, help="root seed for solver pools and simulations")
    parser.add_argument("--tol-beta", dest="tol_beta", type=float, help="outer bisection tolerance")
    parser.add_argument("--tol-b", dest="tol_b", type=float, help="inner threshold tolerance")
    parser.add_argument("--max-iter", dest="max_iter", type=int, help="bisection iteration cap")
    parser.add_argument(
        "--allow-unverified-assumption",
        action="store_true",
        default=None,
        help="proceed even when no sufficient optimality condition was verified",
    )


def _solve_report(cfg: ExperimentConfig):
    channel = cfg.channel()
    penalty = cfg.age_penalty()
    scfg = cfg.solver_config()
    policy = solve_beta(channel, penalty, scfg)
    verdict = zero_wait_optimal(channel, penalty, scfg)
    report = classify_assumption(penalty, channel, cfg.zbar)
    return channel, penalty, scfg, policy, verdict, report


def cmd_solve(cfg: ExperimentConfig) -> int:
    channel, penalty, scfg, policy, verdict, report = _solve_report(cfg)
    lo, hi = policy.bracket
    print(f"beta          : {_fmt(policy.beta)}  (optimal long-run average penalty)")
    print(f"b             : {_fmt(policy.b)}  (wait max(b - age - backward, 0) after a success)")
    print(f"bracket       : [{_fmt(lo)}, {_fmt(hi)}]  width {_fmt(hi - lo)}")
    print(f"beta std err  : {_fmt(policy.beta_std_err)}  ({policy.samples} pool epochs)")
    print(f"assumption    : {'satisfied' if report.satisfied else 'UNVERIFIED'} ({report.condition}) - {report.detail}")
    print(f"zero-wait     : {'optimal' if verdict.optimal else 'suboptimal'} (margin {_fmt(verdict.margin)} +/- {_fmt(verdict.std_err)})")
    if cfg.zbar is not None:
        ok = feasibility_zbar(channel, penalty, cfg.zbar, scfg)
        print(f"zbar={_fmt(cfg.zbar)}  : {'feasible' if ok else 'INFEASIBLE'} waiting cap", end="")
        print(f"; solved rule waits at most b={_fmt(policy.b)}" + (" > zbar" if policy.b > cfg.zbar else ""))
    if cfg.out:
        payload = {
            "beta": policy.beta,
            "b": policy.b,
            "bracket_lo": lo,
            "bracket_hi": hi,
            "zero_wait_optimal": verdict.optimal,
            "margin": verdict.margin,
        }
        with open(cfg.out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"wrote {cfg.out}")
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> int:
    channel = cfg.channel()
    penalty = cfg.age_penalty()
    scfg = cfg.solver_config()
    if cfg.policy == "all":
        if cfg.trace:
            raise ConfigError("--trace needs a single --policy")
        comparison = run_all_baselines(channel, penalty, cfg.epochs, cfg.seed, scfg)
        for name in _CSV_POLICY_ORDER:
            if name in comparison.results:
                r = comparison.results[name]
                extra = ""
                if name in comparison.policies:
                    solved = comparison.policies[name].solved
                    extra = f"  (beta {_fmt(solved.beta)}, b {_fmt(solved.b)})"
                print(f"{name:>9}: avg {_fmt(r.avg_penalty)} +/- {_fmt(r.std_err)}{extra}")
            else:
                print(f"{name:>9}: FAILED {comparison.failures.get(name, '')}")
        if comparison.failures:
            return EXIT_SOLVER
        return EXIT_OK

    if cfg.policy not in POLICY_NAMES:
        raise ConfigError(f"unknown policy {cfg.policy!r}; choose from {', '.join(POLICY_NAMES)} or all")
    if cfg.policy == "zero-wait":
        deployed = ZeroWait()
    else:
        policies, failures = solve_baseline_policies(channel, penalty, scfg, names=(cfg.policy,))
        if cfg.policy in failures:
            raise SolverError(failures[cfg.policy])
        deployed = policies[cfg.policy]
    out = run(deployed, channel, penalty, cfg.epochs, cfg.seed, trace=bool(cfg.trace))
    if cfg.trace:
        result, trace = out
        trace.to_csv(cfg.trace)
        print(f"wrote {len(trace.events)} trace events to {cfg.trace}")
    else:
        result = out
    print(f"{cfg.policy}: avg {_fmt(result.avg_penalty)} +/- {_fmt(result.std_err)} over {result.epochs} epochs")
    return EXIT_OK


_DEFAULT_SIGMA_GRID = [round(v, 10) for v in np.linspace(0.3, 1.8, 8)]
# 1/(1-alpha) from 2 to 10; nine points so that alpha = 0.5 and 0.8 both land
# on the grid.
_DEFAULT_ALPHA_GRID = [round(1.0 - 1.0 / v, 10) for v in np.linspace(2.0, 10.0, 9)]


def default_grid(param: str) -> list[float]:
    if param in ("sigma1", "sigma2"):
        return list(_DEFAULT_SIGMA_GRID)
    if param == "alpha":
        return list(_DEFAULT_ALPHA_GRID)
    raise ConfigError(f"unknown sweep parameter {param!r}; choose sigma1, sigma2, or alpha")


def _apply_sweep_value(cfg: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    if param == "sigma1":
        return replace(cfg, forward=f"lognormal:{value:.12g}")
    if param == "sigma2":
        return replace(cfg, backward=f"lognormal:{value:.12g}")
    if param == "alpha":
        return replace(cfg, alpha=value)
    raise ConfigError(f"unknown sweep parameter {param!r}")


@dataclass
class SweepRow:
    """One grid point: swept value, the optimal solve, and all five deployed
    policies (failed baselines carry NaN cells)."""

    param: str
    value: float
    comparison: object  # BaselineRun

    @property
    def beta(self) -> float:
        opt = self.comparison.policies.get("optimal")
        return opt.solved.beta if opt else math.nan

    @property
    def b(self) -> float:
        opt = self.comparison.policies.get("optimal")
        return opt.solved.b if opt else math.nan

    def csv_cells(self) -> list[str]:
        cells = [self.param, _fmt(self.value), _fmt(self.beta), _fmt(self.b)]
        for name in _CSV_POLICY_ORDER:
            result = self.comparison.results.get(name)
            if result is None:
                cells.extend(["nan", "nan"])
            else:
                cells.extend([_fmt(result.avg_penalty), _fmt(result.std_err)])
        return cells


def _sweep_point(point_cfg: ExperimentConfig):
    comparison = run_all_baselines(
        point_cfg.channel(), point_cfg.age_penalty(), point_cfg.epochs, point_cfg.seed,
        point_cfg.solver_config(),
    )
    return comparison


def sweep_rows(cfg: ExperimentConfig) -> tuple[list[SweepRow], bool]:
    """Run one five-policy comparison per grid point, in grid order."""
    if cfg.param is None:
        raise ConfigError("sweep needs --param sigma1|sigma2|alpha")
    grid = cfg.grid if cfg.grid is not None else default_grid(cfg.param)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("sweep grid values must be strictly increasing")
    if cfg.param == "alpha" and cfg.backward == ExperimentConfig.backward and cfg.grid is None:
        cfg = replace(cfg, backward="lognormal:2.3")

    points = [_apply_sweep_value(cfg, cfg.param, v) for v in grid]
    for point in points:
        point.channel()  # validate every grid point up front
        point.age_penalty()

    if cfg.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            comparisons = list(pool.map(_sweep_point, points))
    else:
        comparisons = [_sweep_point(p) for p in points]

    rows = [SweepRow(cfg.param, value, comparison) for value, comparison in zip(grid, comparisons)]
    any_failure = any(row.comparison.failures for row in rows)
    return rows, any_failure


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    lines = [CSV_HEADER] + [",".join(row.csv_cells()) for row in rows]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_sweep(cfg: ExperimentConfig) -> int:
    if cfg.out is None:
        raise ConfigError("sweep needs --out <csv path>")
    rows, any_failure = sweep_rows(cfg)
    write_sweep_csv(rows, cfg.out)
    print(f"wrote {len(rows)} rows to {cfg.out}")
    if any_failure:
        for row in rows:
            for name, msg in row.comparison.failures.items():
                print(f"  {row.param}={_fmt(row.value)}: {name} failed: {msg}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _check_wald(channel, scfg) -> tuple[bool, str]:
    pool = draw_epoch_pool(channel, scfg.mc.samples, RandomSource(scfg.mc.seed).generator())
    total = pool.total_delay
    expected = (channel.forward.mean() + channel.backward.mean()) / (1.0 - channel.alpha)
    se = float(np.std(total, ddof=1) / math.sqrt(pool.n))
    dev = abs(float(np.mean(total)) - expected)
    return dev <= 4.0 * se, f"|mean - {expected:.6g}| = {dev:.3g} vs 4 s.e. = {4 * se:.3g}"


def _check_crn_monotone(channel, penalty, scfg) -> tuple[bool, str]:
    mc = McConfig(samples=min(scfg.mc.samples, 50_000), seed=scfg.mc.seed)
    grid = np.linspace(0.0, 5.0, 11)
    vals = [expected_penalty_at(c, channel, penalty, mc).value for c in grid]
    ok = all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    return ok, "E[p(c+Y')] non-decreasing on c grid under common draws"


def _check_f_scan(channel, penalty, scfg) -> tuple[bool, str]:
    pool = draw_epoch_pool(channel, scfg.mc.samples, RandomSource(scfg.mc.seed).generator())
    from .solver import _zero_wait_ratio

    bounds = penalty.bounds()
    k1 = bounds.p_lower + 1e-9
    _, _, k2 = _zero_wait_ratio(pool, penalty)
    # extend past the zero-wait ratio: when zero-wait is optimal, f is exactly
    # zero there on the shared pool and the sign flip sits just beyond it
    top = k2 + 0.1 * (k2 - k1)
    if math.isfinite(bounds.p_upper):
        top = min(top, 0.5 * (k2 + bounds.p_upper))
    grid = np.linspace(k1, top, 12)
    vals = [f_beta(b, channel, penalty, scfg, pool=pool).f for b in grid]
    mono = all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
    signs = [v < 0.0 for v in vals]
    changes = sum(a != b for a, b in zip(signs, signs[1:]))
    return mono and changes == 1, f"monotone={mono}, sign changes={changes} (expect 1)"


def _check_q_gap(channel, penalty, scfg, seed) -> tuple[bool, str]:
    policy = solve_beta(channel, penalty, scfg)
    rng = RandomSource(seed, stream=7).generator()
    worst = math.inf
    scale = max(policy.b, channel.forward.mean() + channel.backward.mean(), 1.0)
    probe_cfg = SolverConfig(mc=McConfig(samples=min(scfg.mc.samples, 50_000), seed=scfg.mc.seed))
    for _ in range(20):
        delta = float(rng.uniform(0.0, 2.0 * scale))
        x = float(rng.uniform(0.0, scale))
        z = float(rng.uniform(0.0, 2.0 * scale))
        est = q_gap(policy, delta, x, z, probe_cfg)
        worst = min(worst, est.value + 3.0 * est.std_err)
        mu = policy.waiting_time(delta, x)
        at_mu = q_gap(policy, delta, x, mu, probe_cfg)
        if at_mu.value != 0.0:
            return False, f"gap at the rule's own wait is {at_mu.value:g}, expected 0"
    return worst >= 0.0, f"min over probes of (gap + 3 s.e.) = {worst:.3g}"


def _check_riccati(seed) -> tuple[bool, str]:
    rng = RandomSource(seed, stream=11).generator()
    worst = 0.0
    for _ in range(5):
        params = OuParams(
            theta=float(rng.uniform(0.1, 2.0)),
            sigma=float(rng.uniform(0.2, 2.0)),
            h=float(rng.uniform(0.0, 2.0)),
            r=float(rng.uniform(0.2, 2.0)),
        )
        grid = np.linspace(0.0, 10.0, 201)
        closed = ou_mmse_closed(grid, params)
        numeric = ou_mmse_numeric(grid, params, step=1e-3)
        worst = max(worst, float(np.max(np.abs(closed - numeric))))
        if np.any(np.diff(closed) < -1e-12):
            return False, "closed form not monotone in age"
        if abs(ou_mmse_closed(1e3, params) - params.steady_state) > 1e-6:
            return False, "closed form does not reach its steady state"
    return worst <= 1e-8, f"max |closed - RK4| = {worst:.3g} (tolerance 1e-8)"


def cmd_check(cfg: ExperimentConfig) -> int:
    channel = cfg.channel()
    penalty = cfg.age_penalty()
    scfg = cfg.solver_config()
    checks = [
        ("wald-identity", lambda: _check_wald(channel, scfg)),
        ("crn-monotonicity", lambda: _check_crn_monotone(channel, penalty, scfg)),
        ("f-beta-scan", lambda: _check_f_scan(channel, penalty, scfg)),
        ("q-gap", lambda: _check_q_gap(channel, penalty, scfg, cfg.seed)),
        ("riccati-oracle", lambda: _check_riccati(cfg.seed)),
    ]
    failed = 0
    for name, fn in checks:
        ok, detail = fn()
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += 0 if ok else 1
    if failed:
        print(f"{failed} check(s) failed")
        return EXIT_CHECK
    print("all checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoi-sampling",
        description="Optimal sampling for data freshness over an unreliable two-way-delay channel",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve the optimal threshold policy")
    _add_common(p_solve)
    p_solve.add_argument("--zbar", type=float, help="waiting cap to check for feasibility")
    p_solve.add_argument("--out", help="write a JSON report here")

    p_sim = sub.add_parser("simulate", help="simulate policies on the configured channel")
    _add_common(p_sim)
    p_sim.add_argument("--epochs", type=int, help="number of simulated epochs")
    p_sim.add_argument("--policy", choices=list(POLICY_NAMES) + ["all"], help="which policy to run")
    p_sim.add_argument("--trace", help="write an event trace CSV here (single policy only)")

    p_sweep = sub.add_parser("sweep", help="sweep sigma1, sigma2, or alpha and emit CSV")
    _add_common(p_sweep)
    p_sweep.add_argument("--epochs", type=int, help="epochs per grid point")
    p_sweep.add_argument("--param", choices=["sigma1", "sigma2", "alpha"], help="swept parameter")
    p_sweep.add_argument("--grid", type=lambda s: [float(v) for v in s.split(",")], help="comma-separated grid")
    p_sweep.add_argument("--workers", type=int, help="parallel grid points (default 1)")
    p_sweep.add_argument("--out", help="output CSV path")

    p_check = sub.add_parser("check", help="run the validation bundle on the configured model")
    _add_common(p_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "check":
            return cmd_check(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, DistributionError, PenaltyError, ModelError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
