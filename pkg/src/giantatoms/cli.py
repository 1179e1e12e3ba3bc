"""Command-line front end: named sweeps written as CSV/JSON plus a manifest."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import CrossoverNotBracketed, transition_point
from .layout import (
    TWO_PI,
    decoherence_free_frequency,
    parameter_sweep,
    plan_selective_coupling,
    preset_chain_all_to_all,
    preset_chain_nearest_neighbor,
)
from .models import SpinChainModel, TwoQubitModel, spin_chain_liouvillian
from .protocol import (
    DEFAULT_DX_RATIO,
    DEFAULT_GAMMA_HZ,
    DEFAULT_RAMP_HZ_PER_S,
    DEFAULT_SPAN_M,
    DEFAULT_V_M_PER_S,
    NoiseConfig,
    SimOptions,
    default_layout,
    make_plan,
    physical_params,
)

SCHEMA_VERSION = 1
OUT_ENV = "GIANTATOMS_OUT"


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ parsing helpers


def float_list(text: str) -> list[float]:
    """``"0,0.1,2"`` or ``"a..b:step"``."""
    text = str(text).strip()
    if ".." in text:
        span, _, step = text.partition(":")
        lo, hi = (float(x) for x in span.split(".."))
        step = float(step) if step else 1.0
        if step <= 0 or hi < lo:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + k * step, 12) for k in range(n)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def int_list(text: str) -> list[int]:
    text = str(text).strip()
    if ".." in text:
        span, _, step = text.partition(":")
        lo, hi = (int(x) for x in span.split(".."))
        step = int(step) if step else None
        if step is None:
            # 10..100 means decades-ish doubling when no step is given
            vals, v = [], lo
            while v <= hi:
                vals.append(v)
                v *= 2
            return vals
        return list(range(lo, hi + 1, step))
    return [int(x) for x in text.split(",") if x.strip()]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class Emitter:
    """Writes artifacts deterministically and records them for the manifest."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def _write(self, name: str, text: str) -> None:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()

    def table(self, stem: str, header, rows) -> None:
        rows = [list(r) for r in rows]
        if self.args.format == "json":
            recs = [{h: (float(v) if isinstance(v, (float, np.floating)) else v) for h, v in zip(header, r)} for r in rows]
            self._write(f"{stem}.json", json.dumps(recs, indent=1, allow_nan=True) + "\n")
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        self._write(f"{stem}.csv", buf.getvalue())

    def record(self, stem: str, obj) -> None:
        self._write(f"{stem}.json", json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def _inputs(args) -> dict:
    skip = {"out", "threads", "func", "format_explicit"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _manifest(args, emitter: Emitter, wall: float, caught) -> dict:
    import scipy

    inputs = _inputs(args)
    blob = json.dumps(inputs, sort_keys=True, default=str)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "inputs": json.loads(blob),
        "inputs_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "seed": args.seed,
        "versions": {
            "giantatoms": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": wall,
        "warnings": sorted({f"{w.category.__name__}: {w.message}" for w in caught}),
        "files": dict(sorted(emitter.files.items())),
    }


# -------------------------------------------------------------- hardware


def _hardware_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("hardware (braided pair)")
    g.add_argument("--span-cm", type=float, default=DEFAULT_SPAN_M * 100, help="dx1 + dx2 in cm")
    g.add_argument("--dx-ratio", type=float, default=DEFAULT_DX_RATIO, help="dx1 / dx2")
    g.add_argument("--v", type=float, default=DEFAULT_V_M_PER_S, help="waveguide light speed in m/s")
    g.add_argument("--gamma-mhz", type=float, default=DEFAULT_GAMMA_HZ / 1e6, help="gamma/2pi per coupling point in MHz")
    g.add_argument("--ramp-ghz-per-ns", type=float, default=DEFAULT_RAMP_HZ_PER_S / 1e18, help="v1/2pi in GHz/ns")
    g.add_argument("--max-phase", type=float, default=0.02, help="largest phase per integration piece (rad)")
    g.add_argument(
        "--no-residual-coupling",
        action="store_true",
        help="zero the exchange while qubit 1 is detuned (ablation)",
    )


def _setup(args, mode: str = "liouvillian", noise: NoiseConfig = NoiseConfig()):
    from .experiments import ProtocolSetup

    layout = default_layout(args.span_cm / 100, args.dx_ratio, args.v, args.gamma_mhz * 1e6)
    phys = physical_params(layout, TWO_PI * args.ramp_ghz_per_ns * 1e18)
    opts = SimOptions(mode=mode, noise=noise, max_phase=args.max_phase, residual_coupling=not args.no_residual_coupling)
    return ProtocolSetup(layout, phys, opts)


def _grid_args(p, gamma="2..6:0.05", window=None, points=None):
    p.add_argument("--gamma-grid", type=float_list, default=float_list(gamma), help="target decay rates (units of g)")
    p.add_argument("--t-final", type=float, default=window, help="fit window end in units of pi/g")
    p.add_argument("--t-points", type=int, default=points, help="samples on the window (default spacing pi/10)")


# ------------------------------------------------------------ subcommands


def cmd_params_sweep(args, em: Emitter) -> None:
    gamma = TWO_PI * args.gamma_mhz * 1e6
    if args.preset == "braided-pair":
        layout = default_layout(args.span_cm / 100, args.dx_ratio, args.v, args.gamma_mhz * 1e6)
    elif args.preset == "chain-nn":
        layout = preset_chain_nearest_neighbor(args.n_atoms, 4e-3, 1e-3, gamma, args.v)
    else:
        layout = preset_chain_all_to_all(args.n_atoms, 1e-3, gamma, args.v)
    grid = np.linspace(0.0, args.max_omega, args.points + 1)[1:] * layout.omega0
    header, rows = parameter_sweep(layout, grid)
    em.table("params_sweep", header, rows)
    em.record(
        "params_summary",
        {
            "preset": args.preset,
            "omega0_ghz": layout.omega0 / TWO_PI / 1e9,
            "omega_DF_over_omega0": decoherence_free_frequency(layout) / layout.omega0,
            "layout": layout.to_dict(),
        },
    )


def _zeno(args, em: Emitter, omega: float) -> None:
    from .experiments import ZENO_HEADER, zeno_sweep

    window = None if args.t_final is None else args.t_final * math.pi
    l = None if args.l == 0 else args.l
    noise = NoiseConfig(args.gamma_ex * TWO_PI * args.gamma_mhz * 1e6, args.gamma_phi * TWO_PI * args.gamma_mhz * 1e6)
    z = zeno_sweep(
        args.gamma_grid,
        omega=omega,
        window=window,
        n_points=args.t_points,
        baseline=args.baseline,
        l=l,
        setup=_setup(args, noise=noise) if l else None,
        threads=args.threads,
    )
    em.table("zeno_rates", ZENO_HEADER, z.rows())
    try:
        cross = z.crossovers()
    except CrossoverNotBracketed as exc:
        cross = {"error": str(exc)}
    em.record(
        "zeno_crossover",
        {"omega_over_g": omega, "window_over_pi": z.window / math.pi, "baseline": args.baseline, "l": l, **cross},
    )
    if args.show_gamma:
        _dynamics(args, em, omega, z.window, l, noise)


def _dynamics(args, em, omega, window, l, noise) -> None:
    from .analysis import simulation_error
    from .experiments import exact_n2, protocol_n2, steady_n2, time_grid

    tg = time_grid(window, args.t_points)
    rows = []
    setup = _setup(args, noise=noise) if l else None
    for gam in args.show_gamma:
        m = TwoQubitModel(1.0, omega, gam)
        ex = exact_n2(m, tg)
        n_inf = steady_n2(m) if gam > 0 else 0.0
        sim = protocol_n2(m, tg, l, setup) if l else np.full_like(ex, np.nan)
        err = simulation_error(sim, ex, n_inf) if l else np.full_like(ex, np.nan)
        err[tg == 0] = 0.0
        rows.extend((gam, t / math.pi, a, b, e) for t, a, b, e in zip(tg, ex, sim, err))
    em.table("zeno_dynamics", ["gamma_over_g", "t_over_pi", "n2_exact", "n2_sim", "delta"], rows)


def cmd_zeno(args, em):
    _zeno(args, em, args.omega_drive)


def cmd_nonhermitian(args, em) -> None:
    from .experiments import TRANSITION_HEADER, nonhermitian_sweep

    window = args.t_final * math.pi
    s = nonhermitian_sweep(
        args.gamma_grid,
        window=window,
        n_points=args.t_points,
        l=args.l or None,
        setup=_setup(args, mode="no_jump") if args.l else None,
        threads=args.threads,
    )
    em.table("nonhermitian_labels", TRANSITION_HEADER, s.rows())
    try:
        tr = s.transitions()
    except CrossoverNotBracketed as exc:
        # keep the exact boundary when the simulated labels never switch
        tr = {"exact": transition_point(s.gammas, s.labels_exact), "simulated": None, "error": str(exc)}
    em.record("nonhermitian_transition", {"l": args.l, "window_over_pi": args.t_final, **tr})


def cmd_trotter_error(args, em) -> None:
    from .experiments import max_error_slope, time_grid, trotter_error_map

    tg = time_grid(args.t_final * math.pi, args.t_points)
    errs = trotter_error_map(
        args.gamma, args.omega_drive, args.l, tg, ideal=args.ideal, order=args.order,
        setup=None if args.ideal else _setup(args), threads=args.threads,
    )
    rows = [(l, t / math.pi, e) for l, row in zip(args.l, errs) for t, e in zip(tg, row)]
    em.table("trotter_error", ["l", "t_over_pi", "delta"], rows)
    summary = {"gamma_over_g": args.gamma, "omega_over_g": args.omega_drive, "ideal": args.ideal}
    if len(args.l) >= 2:
        summary["max_error_slope"] = max_error_slope(args.l, errs)
    em.record("trotter_error_summary", summary)


def cmd_noise_sweep(args, em) -> None:
    from .analysis import find_crossover
    from .experiments import zeno_sweep

    gam = TWO_PI * args.gamma_mhz * 1e6
    window = None if args.t_final is None else args.t_final * math.pi
    rows, summary = [], []
    for gx in args.gamma_ex:
        for gp in args.gamma_phi:
            setup = _setup(args, noise=NoiseConfig(gx * gam, gp * gam))
            z = zeno_sweep(args.gamma_grid, args.omega_drive, window, args.t_points, args.baseline, args.l, setup, args.threads)
            rows.extend((gx, gp, g, r) for g, r in zip(z.gammas, z.rate_sim))
            try:
                c = find_crossover(z.gammas, z.rate_sim)
            except CrossoverNotBracketed:
                c = None
            summary.append({"gamma_ex_over_gamma": gx, "gamma_phi_over_gamma": gp, "crossover_over_g": c})
    em.table("noise_rates", ["gamma_ex_over_gamma", "gamma_phi_over_gamma", "gamma_over_g", "rate_sim_over_g"], rows)
    em.record("noise_crossovers", {"omega_over_g": args.omega_drive, "l": args.l, "points": summary})


def cmd_budget(args, em) -> None:
    from .experiments import exact_n2, no_jump_n2, steady_n2
    from .trajectories import post_selection_runs, required_experiments

    t_eval = args.t_eval if args.t_eval is not None else (5.0 if args.omega_drive else 3.0)
    m = TwoQubitModel(1.0, args.omega_drive, args.gamma)
    t = t_eval * math.pi
    n2 = float(exact_n2(m, [t])[0])
    n_inf = steady_n2(m)
    n_exp = required_experiments(args.target_delta, n2, n_inf)
    _, P = no_jump_n2(TwoQubitModel(1.0, 0.0, args.gamma_post), [t])
    em.record(
        "budget",
        {
            "target_delta": args.target_delta,
            "t_eval": t_eval,
            "N_exp": n_exp,
            "gamma_over_g": args.gamma,
            "omega_over_g": args.omega_drive,
            "n2": n2,
            "n2_inf": n_inf,
            "no_jump_probability": float(P[0]),
            "no_jump_gamma_over_g": args.gamma_post,
            "post_selection_runs": post_selection_runs(args.n_post, float(P[0])),
        },
    )


def cmd_spinchain_demo(args, em) -> None:
    from .core import product_state, population, propagate_series

    n = args.n
    bonds = [(k, k + 1) for k in range(n - 1)] if args.connectivity == "nearest-neighbor" else [
        (a, b) for a in range(n) for b in range(a + 1, n)
    ]
    J = {}
    for a, b in bonds:
        J[(a, b, "x", "x")] = args.J
        J[(a, b, "y", "y")] = args.J
    model = SpinChainModel(n, J, B=(args.B,) * n, gamma=(args.decay,) + (0.0,) * (n - 1), connectivity=args.connectivity)
    occ = [0] * n
    occ[-1] = 1
    tg = np.linspace(0.0, args.t_final * math.pi, args.t_points)
    states = propagate_series(spin_chain_liouvillian(model), product_state(occ), tg)
    header = ["t_over_pi"] + [f"n{k + 1}" for k in range(n)]
    em.table("spinchain_populations", header, ([t / math.pi] + [population(r, k) for k in range(n)] for t, r in zip(tg, states)))
    em.record("spinchain_model", model.to_dict())


def cmd_plan_gates(args, em) -> None:
    gamma = TWO_PI * args.gamma_mhz * 1e6
    if args.preset == "chain-nn":
        layout = preset_chain_nearest_neighbor(args.n_atoms, 4e-3, 1e-3, gamma, args.v)
    else:
        layout = preset_chain_all_to_all(args.n_atoms, 1e-3, gamma, args.v)
    w0 = layout.omega0
    if args.decay is not None:
        omegas = plan_selective_coupling(layout, decay_atom=args.decay - 1)
        target = {"decay_atom": args.decay}
    else:
        a, b = args.pair
        omegas = plan_selective_coupling(layout, target_pair=(a - 1, b - 1))
        target = {"pair": [a, b]}
    em.record(
        "gate_plan",
        {
            "preset": args.preset,
            "n_atoms": args.n_atoms,
            **target,
            "omega_over_omega0": [w / w0 for w in omegas],
            "omega_ghz": [w / TWO_PI / 1e9 for w in omegas],
        },
    )


def cmd_plan(args, em) -> None:
    """Dump the hardware schedule of one Trotter plan."""
    setup = _setup(args)
    plan = make_plan(TwoQubitModel(1.0, args.omega_drive, args.gamma), args.t_sim * math.pi, args.l, setup.phys)
    em.record("plan", plan.to_dict())


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    p.add_argument("--out", default=os.environ.get(OUT_ENV, "."), help=f"output directory (env {OUT_ENV})")
    p.add_argument("--seed", type=int, default=0, help="random seed recorded in the manifest")
    p.add_argument("--threads", type=int, default=1, help="worker threads for grid points")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="giantatoms", description=__doc__, formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params-sweep", help="g, Gamma and Gamma_coll versus frequency", formatter_class=fmt)
    p.add_argument("--preset", choices=("braided-pair", "chain-nn", "chain-all"), default="braided-pair")
    p.add_argument("--n-atoms", type=int, default=4)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--max-omega", type=float, default=5.0, help="sweep end in units of omega0")
    _hardware_args(p)
    p.set_defaults(func=cmd_params_sweep)

    for name, omega, window in (("zeno", 0.0, None), ("zeno-driven", 0.1, None)):
        p = sub.add_parser(name, help="fitted decay rates and the Zeno crossover", formatter_class=fmt)
        p.add_argument("--omega-drive", type=float, default=omega, help="drive strength (units of g)")
        p.add_argument("--l", type=int, default=50, help="Trotter steps (0 skips the simulation)")
        p.add_argument("--baseline", choices=("steady", "final"), default="steady")
        p.add_argument("--show-gamma", type=float_list, default=None, help="also write n2(t) for these rates")
        p.add_argument("--gamma-ex", type=float, default=0.0, help="extra decay (units of gamma)")
        p.add_argument("--gamma-phi", type=float, default=0.0, help="dephasing (units of gamma)")
        _grid_args(p)
        _hardware_args(p)
        p.set_defaults(func=cmd_zeno)

    p = sub.add_parser("nonhermitian", help="oscillatory to non-oscillatory transition", formatter_class=fmt)
    p.add_argument("--l", type=int, default=30, help="Trotter steps (0 skips the simulation)")
    _grid_args(p, gamma="3.5..4.4:0.02", window=3.0, points=121)
    _hardware_args(p)
    p.set_defaults(func=cmd_nonhermitian)

    p = sub.add_parser("trotter-error", help="simulation error delta(t, l)", formatter_class=fmt)
    p.add_argument("--gamma", type=float, default=6.0)
    p.add_argument("--omega-drive", type=float, default=0.0)
    p.add_argument("--l", type=int_list, default=int_list("10..100:10"), help="step counts, list or a..b:step")
    p.add_argument("--ideal", action="store_true", help="ideal splitting instead of the hardware schedule")
    p.add_argument("--order", type=int, choices=(1, 2), default=2, help="splitting order with --ideal")
    p.add_argument("--t-final", type=float, default=3.0)
    p.add_argument("--t-points", type=int, default=31)
    _hardware_args(p)
    p.set_defaults(func=cmd_trotter_error)

    p = sub.add_parser("noise-sweep", help="Zeno rates under extra decay and dephasing", formatter_class=fmt)
    p.add_argument("--gamma-ex", type=float_list, default=[0.0], help="extra decay values (units of gamma)")
    p.add_argument("--gamma-phi", type=float_list, default=[0.0], help="dephasing values (units of gamma)")
    p.add_argument("--omega-drive", type=float, default=0.0)
    p.add_argument("--l", type=int, default=50)
    p.add_argument("--baseline", choices=("steady", "final"), default="final")
    _grid_args(p, gamma="3..4.8:0.05")
    _hardware_args(p)
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("budget", help="repetitions needed for a target statistical error", formatter_class=fmt)
    p.add_argument("--omega-drive", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=6.0, help="target decay rate (units of g)")
    p.add_argument("--target-delta", type=float, default=0.5)
    p.add_argument("--t-eval", type=float, default=None, help="evaluation time in units of pi/g (default 3, or 5 when driven)")
    p.add_argument("--n-post", type=float, default=100, help="post-selected records wanted")
    p.add_argument("--gamma-post", type=float, default=3.9, help="decay rate used for the no-jump probability")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("spinchain-demo", help="dynamics of a small XY spin chain", formatter_class=fmt)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--connectivity", choices=("nearest-neighbor", "all-to-all"), default="nearest-neighbor")
    p.add_argument("--J", type=float, default=2.0)
    p.add_argument("--B", type=float, default=0.0)
    p.add_argument("--decay", type=float, default=1.0, help="decay of site 1")
    p.add_argument("--t-final", type=float, default=3.0)
    p.add_argument("--t-points", type=int, default=61)
    p.set_defaults(func=cmd_spinchain_demo)

    p = sub.add_parser("plan-gates", help="parking frequencies for a selective coupling", formatter_class=fmt)
    p.add_argument("--preset", choices=("chain-nn", "chain-all"), default="chain-all")
    p.add_argument("--n-atoms", type=int, default=4)
    p.add_argument("--pair", type=lambda s: tuple(int(x) for x in s.split(",")), default=(1, 4), help="1-based atoms")
    p.add_argument("--decay", type=int, default=None, help="1-based atom to make decay instead")
    p.add_argument("--gamma-mhz", type=float, default=DEFAULT_GAMMA_HZ / 1e6)
    p.add_argument("--v", type=float, default=DEFAULT_V_M_PER_S)
    p.set_defaults(func=cmd_plan_gates)

    p = sub.add_parser("plan", help="segment times and waveform of one Trotter plan", formatter_class=fmt)
    p.add_argument("--gamma", type=float, default=6.0)
    p.add_argument("--omega-drive", type=float, default=0.0)
    p.add_argument("--t-sim", type=float, default=3.0, help="simulated time in units of pi/g")
    p.add_argument("--l", type=int, default=50)
    _hardware_args(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="run a TOML scenario file", formatter_class=fmt)
    p.add_argument("scenario")
    p.set_defaults(func=None)

    for action in sub.choices.values():
        if action.prog.split()[-1] != "run":
            _common(action)
    return parser


# ---------------------------------------------------------------- scenarios


def _load_toml(path: str) -> dict:
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_SCENARIO_KEYS = {"name", "command", "seed", "out", "format", "threads", "params"}


def scenario_argv(cfg: dict, parser: argparse.ArgumentParser, source: str = "scenario") -> list[str]:
    """Translate a scenario table into subcommand arguments, checking every field."""
    unknown = set(cfg) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown field(s) {sorted(unknown)}")
    if "command" not in cfg:
        raise ConfigError(f"{source}: missing field 'command'")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    cmd = cfg["command"]
    if cmd not in sub.choices or cmd == "run":
        raise ConfigError(f"{source}: field 'command': unknown subcommand {cmd!r}")
    sp = sub.choices[cmd]
    known = {a.dest: a for a in sp._actions}
    argv = [cmd]
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{source}: field 'params' must be a table")
    for key in ("seed", "out", "format", "threads"):
        if key in cfg:
            params = {**params, key: cfg[key]}
    for key, val in params.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise ConfigError(f"{source}: field 'params.{key}' is not an option of {cmd!r}")
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
            continue
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        argv.extend([flag, str(val)])
    return argv


def _run_parsed(args) -> int:
    t0 = time.perf_counter()
    em = Emitter(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        args.func(args, em)
    wall = time.perf_counter() - t0
    man = _manifest(args, em, wall, caught)
    (Path(args.out) / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for w in man["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        try:
            cfg = _load_toml(args.scenario)
            sub_argv = scenario_argv(cfg, parser, args.scenario)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        try:
            args = parser.parse_args(sub_argv)
        except SystemExit as exc:
            print(f"error: {args.scenario}: invalid parameter value", file=sys.stderr)
            return int(exc.code or 2)
        args.scenario_name = cfg.get("name", "")
    try:
        return _run_parsed(args)
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
