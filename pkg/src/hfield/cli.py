"""Command-line front end: simulation campaigns, verification suites, reports.

Every report is CSV with a one-line JSON header comment carrying the fully
resolved configuration; ``hfield rerun <file>`` replays a report from its
own header and reproduces it byte for byte.  Floats are serialized with
repr() so output bytes do not depend on locale or platform formatting.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from hfield import core, hermite, integral, randgen, stats, wave

Z_LIMIT = 3.0


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def write_report(path, command: str, config: dict, columns, rows) -> None:
    header = json.dumps({"command": command, "config": config}, sort_keys=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {header}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_report_header(path) -> dict:
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# "):
        raise ValueError(f"{path}: missing header comment")
    return json.loads(first[2:])


def run_replicates(fn, n: int, threads: int) -> list:
    """Apply fn to replicate indices 0..n-1; ordered results either way."""
    if threads <= 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def _threads_default() -> int:
    env = os.environ.get("HFIELD_THREADS")
    return int(env) if env else 1


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).split(",") if x != "")


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).split(",") if x != "")


def _apply_config_file(args: argparse.Namespace, section: str, parser_defaults: dict) -> None:
    """Flat INI config: values fill in wherever the flag kept its default."""
    if not getattr(args, "config", None):
        return
    cp = configparser.ConfigParser()
    with open(args.config) as fh:
        cp.read_file(fh)
    if not cp.has_section(section):
        return
    for key, raw in cp.items(section):
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise SystemExit(f"config file option [{section}] {key} is not a known flag")
        if getattr(args, attr) == parser_defaults.get(attr):
            default = parser_defaults.get(attr)
            if isinstance(default, bool):
                setattr(args, attr, raw.strip().lower() in ("1", "true", "yes", "on"))
            elif isinstance(default, int) and not isinstance(default, bool):
                setattr(args, attr, int(raw))
            elif isinstance(default, float):
                setattr(args, attr, float(raw))
            else:
                setattr(args, attr, raw)


def _hurst_tuple(args) -> tuple[float, ...]:
    hs = _parse_floats(args.hurst)
    if len(hs) == 1 and args.d > 1:
        hs = hs * args.d
    if len(hs) != args.d:
        raise SystemExit(f"--hurst needs 1 or {args.d} values, got {len(hs)}")
    return hs


def _sim_grid(args, hs) -> core.GridSpec:
    extent = _parse_floats(args.extent)
    if len(extent) == 1 and args.d > 1:
        extent = extent * args.d
    cells = _parse_ints(args.cells) if args.cells else tuple(
        max(1, int(round(args.n * e))) for e in extent
    )
    if len(cells) == 1 and args.d > 1:
        cells = cells * args.d
    return core.GridSpec((0.0,) * args.d, extent, cells)


def _make_generator(args, grid, hurst):
    if args.generator == "variation":
        return lambda rng: hermite.generate_hermite_variation(grid, hurst, args.n, rng)
    if args.generator == "gaussian":
        return lambda rng: hermite.generate_gaussian_exact(grid, hurst, rng)
    if args.generator == "kernel":
        cfg = hermite.KernelConfig(
            truncation_depth=args.kernel_l,
            y_cells=args.kernel_ycells,
            s_quadrature_points=args.kernel_squad,
        )
        return lambda rng: hermite.generate_kernel_discretized(grid, hurst, cfg, rng)
    raise SystemExit(f"unknown generator {args.generator!r}")


def _resolved(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys}


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_SIM_KEYS = [
    "d", "q", "hurst", "n", "extent", "cells", "replicates", "seed", "generator",
    "kernel_l", "kernel_ycells", "kernel_squad", "moments_only", "threads", "out",
]


def cmd_simulate(args) -> int:
    hs = _hurst_tuple(args)
    hurst = core.HurstIndex(hs, args.q)
    grid = _sim_grid(args, hs)
    gen = _make_generator(args, grid, hurst)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    probe_nodes = [tuple(o + e for o, e in zip(grid.origin, grid.extent))]
    half = tuple(o + 0.5 * e for o, e in zip(grid.origin, grid.extent))
    try:
        grid.node_index(half)
        probe_nodes.append(half)
    except core.OffGridError:
        pass

    def one(rep: int):
        field = gen(randgen.RngStream(args.seed, rep))
        if not args.moments_only:
            core.write_field(field, out_dir / f"field_{rep:04d}.hfld")
        return [field.value_at(p) ** 2 for p in probe_nodes]

    sq = np.array(run_replicates(one, args.replicates, args.threads))
    rows = []
    for j, p in enumerate(probe_nodes):
        est = float(sq[:, j].mean())
        se = float(sq[:, j].std(ddof=1) / math.sqrt(args.replicates))
        theory = hermite.covariance(hurst, p, p)
        z = (est - theory) / se if se > 0 else 0.0
        rows.append((f"second_moment@{','.join(repr(float(c)) for c in p)}", est, se, theory, z))
    write_report(
        out_dir / "simulate_summary.csv",
        "simulate",
        _resolved(args, _SIM_KEYS),
        ["quantity", "estimate", "se", "theory", "z"],
        rows,
    )
    print(f"wrote {out_dir / 'simulate_summary.csv'}")
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

_VERIFY_KEYS = [
    "suite", "d", "q", "hurst", "n", "replicates", "seed", "scales", "shift",
    "steps", "theory_slope_override", "threads", "out",
]


def _verify_covariance(args, hurst, rows) -> None:
    """Empirical covariance agreement between q=1 and q=2 on a small grid."""
    pts = [0.5, 0.75, 1.0]
    queries = [(a,) * args.d for a in pts]
    ests = {}
    for q in (1, 2):
        hq = core.HurstIndex(hurst.H, q)
        grid = core.GridSpec((0.0,) * args.d, (1.0,) * args.d, (args.n,) * args.d)

        def one(rep: int, hq=hq, grid=grid):
            f = hermite.generate_hermite_variation(grid, hq, args.n, randgen.RngStream(args.seed + q, rep))
            return [f.value_at(p) for p in queries]

        vals = np.array(run_replicates(one, args.replicates, args.threads))
        ests[q] = vals
    for i, p in enumerate(queries):
        for j, r in enumerate(queries):
            if j < i:
                continue
            prod1 = ests[1][:, i] * ests[1][:, j]
            prod2 = ests[2][:, i] * ests[2][:, j]
            diff = prod1.mean() - prod2.mean()
            se = math.sqrt(prod1.var(ddof=1) / len(prod1) + prod2.var(ddof=1) / len(prod2))
            z = diff / se if se > 0 else 0.0
            rows.append((f"cov_q1_vs_q2@{p}x{r}", float(prod1.mean()), se, float(prod2.mean()), z))


def _verify_self_similarity(args, hurst, rows) -> None:
    scales = _parse_floats(args.scales)
    exact = [hermite.covariance(hurst, (c,) * args.d, (c,) * args.d) for c in scales]
    rep_exact = hermite.verify_self_similarity(hurst, scales, exact)
    theory = args.theory_slope_override if args.theory_slope_override is not None else rep_exact.theory
    rows.append(("self_similarity_exact_slope", rep_exact.slope, 0.0, theory, 0.0 if abs(rep_exact.slope - theory) < 1e-9 else math.inf))
    moments, ses = hermite.variation_scale_moments(hurst, args.n, scales, args.replicates, args.seed)
    rep_mc = hermite.verify_self_similarity(hurst, scales, moments, ses)
    z = (rep_mc.slope - theory) / rep_mc.slope_se if rep_mc.slope_se > 0 else 0.0
    rows.append(("self_similarity_mc_slope", rep_mc.slope, rep_mc.slope_se, theory, z))


def _verify_stationarity(args, hurst, rows) -> None:
    shift = _parse_floats(args.shift)
    if len(shift) == 1 and args.d > 1:
        shift = shift * args.d
    t = (0.5,) * args.d
    extent = tuple(s + v for s, v in zip(shift, t))
    extent = tuple(max(1.0, e) for e in extent)
    grid = core.GridSpec((0.0,) * args.d, extent, tuple(int(round(args.n * e)) for e in extent))
    sampler = lambda rng: hermite.generate_hermite_variation(grid, hurst, args.n, rng)
    rep = hermite.verify_stationary_increments(sampler, t, shift, args.replicates, args.seed)
    rows.extend(rep.rows())


def _verify_isometry(args, hurst, rows) -> None:
    steps = integral.random_step_functions(5, args.d, seed=args.seed, lattice=8)
    for i, f in enumerate(steps):
        rep = integral.mc_isometry_check(f, hurst, args.n, args.replicates, args.seed + i)
        rows.append((f"isometry_step{i}", rep.mc_variance, rep.mc_se, rep.inner_product, rep.z))


def cmd_verify(args) -> int:
    hs = _hurst_tuple(args)
    hurst = core.HurstIndex(hs, args.q)
    rows: list[tuple] = []
    suites = ["covariance", "self-similarity", "stationarity", "isometry"] if args.suite == "all" else [args.suite]
    for suite in suites:
        if suite == "covariance":
            _verify_covariance(args, hurst, rows)
        elif suite == "self-similarity":
            _verify_self_similarity(args, hurst, rows)
        elif suite == "stationarity":
            _verify_stationarity(args, hurst, rows)
        elif suite == "isometry":
            _verify_isometry(args, hurst, rows)
        else:
            raise SystemExit(f"unknown suite {suite!r}")
    write_report(
        args.out, "verify", _resolved(args, _VERIFY_KEYS),
        ["check", "estimate", "se", "theory", "z"], rows,
    )
    failures = [r for r in rows if r[4] is not None and abs(r[4]) > Z_LIMIT]
    width = max(len(r[0]) for r in rows)
    for r in rows:
        mark = "ok" if r not in failures else "FAIL"
        print(f"{r[0]:<{width}}  estimate={_fmt(r[1]):>22}  theory={_fmt(r[3]):>22}  z={_fmt(r[4]):>22}  {mark}")
    if failures:
        print(f"{len(failures)} check(s) exceeded |z| <= {Z_LIMIT}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# wave
# ---------------------------------------------------------------------------

_WAVE_KEYS = [
    "d", "q", "hurst_time", "hurst_space", "t", "m", "cells_t", "cells_x",
    "replicates", "seed", "scaling", "separations", "localtime", "bins",
    "save_solution", "threads", "out",
]


def _wave_config(args) -> wave.WaveConfig:
    hs = _parse_floats(args.hurst_space)
    if len(hs) == 1 and args.d > 1:
        hs = hs * args.d
    return wave.WaveConfig(
        space_dim=args.d,
        q=args.q,
        hurst_time=args.hurst_time,
        hurst_space=hs,
        horizon=args.t,
        half_width=args.m,
        cells_t=args.cells_t,
        cells_x=args.cells_x,
    )


def cmd_wave(args) -> int:
    config = _wave_config(args)
    rep = wave.beta_exponent(config)
    print(f"beta = {rep.beta:.6g}, existence bound 2H+1 = {rep.existence_bound:.6g}")
    if not rep.exists:
        print(
            f"refusing: existence requires beta < 2H + 1, but beta = {rep.beta:.6g} "
            f">= {rep.existence_bound:.6g}",
            file=sys.stderr,
        )
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[tuple] = []

    probe = (config.horizon, *(0.0,) * config.space_dim)
    weights = wave.wave_query_weights(config, np.array([probe]))

    def one(r: int):
        return float(
            wave.solve_wave_values(config, randgen.RngStream(args.seed, r), np.array([probe]), weights=weights)[0]
        )

    vals = np.array(run_replicates(one, args.replicates, args.threads))
    est = float(np.mean(vals**2))
    se = float(np.std(vals**2, ddof=1) / math.sqrt(args.replicates))
    oracle = wave.solution_variance_oracle(config, probe[0], probe[1:])
    z = (est - oracle) / se if se > 0 else 0.0
    rows.append((f"variance@{probe}", est, se, oracle, z))

    if args.scaling in ("time", "space", "both"):
        seps = _parse_floats(args.separations)
        axes = ["time", "space"] if args.scaling == "both" else [args.scaling]
        for ax in axes:
            srep = wave.verify_increment_scaling(config, ax, seps, args.replicates, args.seed)
            rows.extend(srep.rows())

    if args.save_solution or args.localtime:
        sol = wave.solve_wave_mild(config, randgen.RngStream(args.seed, 0))
        if args.save_solution:
            core.write_field(sol.to_field(), out_dir / "wave_solution.hfld")
        if args.localtime:
            grid = sol.solution_grid()
            cv = sol.values[tuple(slice(0, -1) for _ in range(grid.d))]
            lo, hi = float(cv.min()), float(cv.max())
            pad = 1e-9 + 0.05 * (hi - lo + 1e-12)
            edges = np.linspace(lo - pad, hi + pad, args.bins + 1)
            est_lt = stats.local_time_histogram(sol.values, grid, edges)
            lt_rows = [(c, dens) for c, dens in est_lt.to_csv_rows()]
            write_report(
                out_dir / "wave_localtime.csv", "wave-localtime",
                _resolved(args, _WAVE_KEYS), ["bin_center", "density"], lt_rows,
            )

    write_report(
        out_dir / "wave_report.csv", "wave", _resolved(args, _WAVE_KEYS),
        ["quantity", "estimate", "se", "theory", "z"], rows,
    )
    print(f"wrote {out_dir / 'wave_report.csv'}")
    return 0


# ---------------------------------------------------------------------------
# localtime
# ---------------------------------------------------------------------------

_LOCALTIME_KEYS = ["field", "bins", "range_lo", "range_hi", "fourier", "out"]


def cmd_localtime(args) -> int:
    field = core.read_field(args.field)
    grid = field.grid
    cv = field.values[tuple(slice(0, -1) for _ in range(grid.d))]
    lo = args.range_lo if args.range_lo is not None else float(cv.min()) - 1e-9
    hi = args.range_hi if args.range_hi is not None else float(cv.max()) + 1e-9
    edges = np.linspace(lo, hi, args.bins + 1)
    est = stats.local_time_histogram(field.values, grid, edges)
    columns = ["bin_center", "density"]
    rows: list[tuple] = est.to_csv_rows()
    if args.fourier:
        z_max = math.pi / est.bin_width
        four = stats.local_time_fourier(field.values, grid, est.bin_centers, z_max)
        columns.append("fourier_density")
        rows = [(c, d, f) for (c, d), f in zip(rows, four)]
    write_report(args.out, "localtime", _resolved(args, _LOCALTIME_KEYS), columns, rows)
    print(
        f"total mass {est.total_mass():.6g} (box volume {est.box_volume:.6g}); "
        f"int density^2 = {est.l2_norm_sq():.6g}"
    )
    return 0


# ---------------------------------------------------------------------------
# wiener
# ---------------------------------------------------------------------------

_WIENER_KEYS = ["steps", "field", "d", "q", "hurst", "n", "replicates", "seed", "threads", "out"]


def cmd_wiener(args) -> int:
    with open(args.steps) as fh:
        step_rows = [line.split(",") for line in fh.read().splitlines() if line and not line.startswith("#")]
    f = integral.StepFunction.from_csv_rows(step_rows)
    rows: list[tuple] = []
    if args.field:
        field = core.read_field(args.field)
        val = integral.wiener_integral(f, field)
        ip = integral.inner_product_H(f, f, field.hurst)
        rows.append(("wiener_integral", val, None, None, None))
        rows.append(("inner_product", ip, None, None, None))
    else:
        hs = _hurst_tuple(args)
        hurst = core.HurstIndex(hs, args.q)
        rep = integral.mc_isometry_check(f, hurst, args.n, args.replicates, args.seed, threads=args.threads)
        rows.append(("isometry_mc_variance", rep.mc_variance, rep.mc_se, rep.inner_product, rep.z))
        rows.append(("lattice_variance", rep.lattice_variance, None, rep.inner_product, None))
    write_report(args.out, "wiener", _resolved(args, _WIENER_KEYS), ["quantity", "estimate", "se", "theory", "z"], rows)
    for r in rows:
        print(f"{r[0]} = {_fmt(r[1])}")
    return 0


# ---------------------------------------------------------------------------
# rerun
# ---------------------------------------------------------------------------


def cmd_rerun(args) -> int:
    header = read_report_header(args.report)
    command = header["command"].split("-")[0]
    cfg = header["config"]
    argv = [command]
    for key, val in cfg.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        elif val is not None:
            argv.extend([flag, str(val)])
    return main(argv)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p, *, hurst=True):
    p.add_argument("--d", type=int, default=1, help="parameter-space dimension")
    p.add_argument("--q", type=int, default=1, help="Hermite order")
    if hurst:
        p.add_argument("--hurst", type=str, default="0.75", help="comma-separated Hurst values")
    p.add_argument("--n", type=int, default=128, help="variation-lattice resolution per unit")
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_threads_default())
    p.add_argument("--config", type=str, default=None, help="INI config file; flags override")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    ap = argparse.ArgumentParser(prog="hfield", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    subparsers: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("simulate", help="sample Hermite-sheet realizations")
    _add_common(p)
    p.add_argument("--extent", type=str, default="1")
    p.add_argument("--cells", type=str, default=None)
    p.add_argument("--generator", choices=["variation", "kernel", "gaussian"], default="variation")
    p.add_argument("--kernel-l", type=float, default=8.0)
    p.add_argument("--kernel-ycells", type=int, default=64)
    p.add_argument("--kernel-squad", type=int, default=4)
    p.add_argument("--moments-only", action="store_true")
    p.add_argument("--out", type=str, default="hfield_out")
    p.set_defaults(fn=cmd_simulate, section="simulate")

    p = sub.add_parser("verify", help="run statistical verification suites")
    _add_common(p)
    p.add_argument("--suite", choices=["covariance", "self-similarity", "stationarity", "isometry", "all"], default="all")
    p.add_argument("--scales", type=str, default="0.25,0.5,1,2")
    p.add_argument("--shift", type=str, default="0.5")
    p.add_argument("--steps", type=str, default=None)
    p.add_argument("--theory-slope-override", type=float, default=None, help="test mode: force the theory slope")
    p.add_argument("--out", type=str, default="verify_report.csv")
    p.set_defaults(fn=cmd_verify, section="verify")

    p = sub.add_parser("wave", help="solve the stochastic wave equation and verify moments")
    p.add_argument("--d", type=int, default=1, help="space dimension")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--hurst-time", type=float, default=0.75)
    p.add_argument("--hurst-space", type=str, default="0.75")
    p.add_argument("--t", type=float, default=1.0, help="time horizon")
    p.add_argument("--m", type=float, default=1.25, help="spatial half width")
    p.add_argument("--cells-t", type=int, default=64)
    p.add_argument("--cells-x", type=int, default=160)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=_threads_default())
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--scaling", choices=["time", "space", "both", "none"], default="none")
    p.add_argument("--separations", type=str, default="0.0625,0.125,0.25,0.5")
    p.add_argument("--localtime", action="store_true")
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--save-solution", action="store_true")
    p.add_argument("--out", type=str, default="hfield_out")
    p.set_defaults(fn=cmd_wave, section="wave")

    p = sub.add_parser("localtime", help="occupation-density estimates for a saved field")
    p.add_argument("--field", type=str, required=True)
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--range-lo", type=float, default=None)
    p.add_argument("--range-hi", type=float, default=None)
    p.add_argument("--fourier", action="store_true")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--out", type=str, default="localtime.csv")
    p.set_defaults(fn=cmd_localtime, section="localtime")

    p = sub.add_parser("wiener", help="Wiener integrals of a step function")
    _add_common(p)
    p.add_argument("--steps", type=str, required=True, help="CSV: a, lo..., hi... per line")
    p.add_argument("--field", type=str, default=None, help="field file; omit for an MC isometry check")
    p.add_argument("--out", type=str, default="wiener_report.csv")
    p.set_defaults(fn=cmd_wiener, section="wiener")

    p = sub.add_parser("rerun", help="replay a command from a report header")
    p.add_argument("report", type=str)
    p.set_defaults(fn=cmd_rerun, section="rerun")

    for name, child in sub.choices.items():
        subparsers[name] = child
    return ap, subparsers


def main(argv=None) -> int:
    ap, subparsers = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        defaults = {
            a.dest: a.default for a in subparsers[args.command]._actions
        }
        _apply_config_file(args, args.section, defaults)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
