"""Command-line interface.

Subcommands:

* find-state       minimise <S(T)> over the retained grid, write the state
* sweep            evaluate S(t) for a state on a time grid, write CSV
* hv-demo          lattice walk: Birkhoff decomposition + sampler check
* classical-check  random classical ensembles stay non-negative

Exit codes: 0 success (violation found where one is sought), 2 bad
configuration or input, 3 no violation found, 4 a numerical check failed.

Configuration values are always given in natural units (hbar = M = Omega
= 1).  With --units si the oscillator outputs are converted on the way
out using the configured mass and trap frequency.  All artifacts are
deterministic: identical configuration and seed give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields

import numpy as np

from .bell import (
    BellEngine,
    TwoModeState,
    find_violating_state,
    integrated_bell_parameter,
    sweep,
)
from .dynamics import METHODS, HarmonicStrategy
from .errors import AccuracyError
from .hv import (
    LatticeModel,
    SubadditiveFunctional,
    TrajectoryEnsemble,
    TrajectoryFunctional,
    birkhoff_decompose,
    classical_bell_S,
    classical_bell_S_generalized,
    corrupt_decomposition,
    hv_distribution_check,
)

SCHEMA_VERSION = 1
HBAR_SI = 1.054571817e-34
CLASSICAL_THRESHOLD = -1e-10
RECONSTRUCTION_TOL = 1e-10


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the command-line layer, natural units."""

    omega0: float = 4.0
    omega1: float = 1.0
    n_sub: int = 9
    n_big: int = 64
    probe_time: float = float(np.pi / 2.0)
    t_start: float = 0.0
    t_end: float = 3.0
    steps: int = 601
    method: str = "ladder"
    seed: int = 7
    units: str = "natural"
    si_mass: float = 1e-30
    si_omega: float = 1e8
    check_convergence: bool = True
    lattice_sites: int = 4
    walk_steps: int = 2
    walk_kind: str = "dft"
    hv_samples: int = 1_000_000
    m0: int = 0
    corrupt: bool = False
    ensembles: int = 1000
    members: int = 8
    time_points: int = 64

    def __post_init__(self):
        if self.units not in ("natural", "si"):
            raise ValueError("units must be 'natural' or 'si'")
        if self.method not in METHODS:
            raise ValueError("method must be one of %r" % (METHODS,))
        if self.walk_kind not in ("dft", "random"):
            raise ValueError("walk_kind must be 'dft' or 'random'")
        for name in ("omega0", "omega1", "probe_time", "si_mass", "si_omega"):
            if not (getattr(self, name) > 0):
                raise ValueError("%s must be positive" % name)
        for name in ("n_sub", "n_big", "steps", "lattice_sites", "walk_steps",
                     "hv_samples", "ensembles", "members", "time_points"):
            if int(getattr(self, name)) < 1:
                raise ValueError("%s must be a positive integer" % name)

    def strategy(self) -> HarmonicStrategy:
        return HarmonicStrategy({0: self.omega0, 1: self.omega1})


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_BOOL_FIELDS = ("check_convergence", "corrupt")


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    if name in _BOOL_FIELDS:
        if isinstance(value, bool):
            return value
        raise ValueError("config key %r must be a boolean" % name)
    if kind == "int":
        if isinstance(value, bool) or int(value) != float(value):
            raise ValueError("config key %r must be an integer" % name)
        return int(value)
    if kind == "float":
        return float(value)
    return str(value)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Merge defaults, an optional JSON config file, and CLI overrides."""
    data = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        data.update(loaded)
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ValueError("unknown config keys: %s" % ", ".join(unknown))
    clean = {k: _coerce(k, v) for k, v in data.items()}
    return RunConfig(**clean)


def unit_scales(cfg: RunConfig) -> dict:
    """Multipliers applied to natural-unit times and lengths on output."""
    if cfg.units == "natural":
        return {"system": "natural", "time_scale": 1.0, "length_scale": 1.0}
    time_scale = 1.0 / cfg.si_omega
    length_scale = float(np.sqrt(HBAR_SI / (cfg.si_mass * cfg.si_omega)))
    return {
        "system": "si",
        "time_scale": time_scale,
        "length_scale": length_scale,
        "mass_kg": cfg.si_mass,
        "omega_rad_per_s": cfg.si_omega,
    }


def _write_json(path: str, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_find_state(cfg: RunConfig, out_path: str) -> int:
    scales = unit_scales(cfg)
    result = find_violating_state(
        strategy=cfg.strategy(), probe_time=cfg.probe_time, n_sub=cfg.n_sub,
        n_big=cfg.n_big, method=cfg.method, check_convergence=cfg.check_convergence,
    )
    ls, ts = scales["length_scale"], scales["time_scale"]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "find-state",
        "xi_minus": result.xi_minus * ls,
        "probe_time": result.probe_time * ts,
        "n_sub": cfg.n_sub,
        "n_big": cfg.n_big,
        "method": cfg.method,
        "omega0": cfg.omega0,
        "omega1": cfg.omega1,
        "violation": result.violation,
        "degenerate": result.degenerate,
        "eigen_gap": result.gap * ls,
        "converged": result.converged,
        "convergence": {str(k): v * ls for k, v in sorted(result.convergence.items())},
        "state": {
            "n_sub": cfg.n_sub,
            "re": [float(x) for x in result.state.amplitudes.real],
            "im": [float(x) for x in result.state.amplitudes.imag],
        },
        "units": scales,
    }
    _write_json(out_path, payload)
    print("xi_minus = %r (%s), wrote %s" % (
        payload["xi_minus"], "violation" if result.violation else "no violation", out_path))
    if result.converged is False:
        print("truncation convergence check failed", file=sys.stderr)
        return 4
    return 0 if result.violation else 3


def _load_state(path: str) -> TwoModeState:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        block = data["state"]
        amps = np.asarray(block["re"], dtype=float) + 1j * np.asarray(block["im"], dtype=float)
        n_sub = int(block["n_sub"])
    except (KeyError, TypeError) as exc:
        raise ValueError("state file %s lacks a valid 'state' block" % path) from exc
    return TwoModeState.from_amplitudes(amps, n_sub)


def cmd_sweep(cfg: RunConfig, out_path: str, state_path: str | None) -> int:
    scales = unit_scales(cfg)
    if state_path is not None:
        state = _load_state(state_path)
        if state.n_sub != cfg.n_sub:
            raise ValueError("state grid (%d) does not match config n_sub (%d)"
                             % (state.n_sub, cfg.n_sub))
    else:
        state = find_violating_state(
            strategy=cfg.strategy(), probe_time=cfg.probe_time, n_sub=cfg.n_sub,
            n_big=cfg.n_big, method=cfg.method, check_convergence=False,
        ).state
    result = sweep(state, strategy=cfg.strategy(), t_start=cfg.t_start,
                   t_end=cfg.t_end, steps=cfg.steps, n_big=cfg.n_big, method=cfg.method)

    ls, ts = scales["length_scale"], scales["time_scale"]
    lines = ["t,f00,f01,f10,f11,S"]
    comp = result.components
    for i, t in enumerate(result.times):
        row = [t * ts, comp["f00"][i] * ls, comp["f01"][i] * ls,
               comp["f10"][i] * ls, comp["f11"][i] * ls, result.values[i] * ls]
        lines.append(",".join(repr(float(v)) for v in row))
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    idx_min = int(np.argmin(result.values))
    intervals = [[a * ts, b * ts] for a, b in result.negative_intervals]
    window_integrals = [
        integrated_bell_parameter(result, a, b) * ls * ts
        for a, b in result.negative_intervals
    ]
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "command": "sweep",
        "t_start": cfg.t_start * ts,
        "t_end": cfg.t_end * ts,
        "steps": cfg.steps,
        "n_big": cfg.n_big,
        "method": cfg.method,
        "refine_tol": result.refine_tol,
        "negative_intervals": intervals,
        "window_integrals": window_integrals,
        "min_value": result.values[idx_min] * ls,
        "min_time": result.times[idx_min] * ts,
        "units": scales,
    }
    _write_json(out_path + ".json", sidecar)
    print("wrote %s (+.json); %d negative interval(s)" % (out_path, len(intervals)))
    return 0 if intervals else 3


def cmd_hv_demo(cfg: RunConfig, out_path: str) -> int:
    if cfg.walk_kind == "dft":
        model = LatticeModel.dft_walk(cfg.lattice_sites, cfg.walk_steps)
    else:
        model = LatticeModel.random_walk(cfg.lattice_sites, cfg.walk_steps, seed=cfg.seed)
    if not (0 <= cfg.m0 < model.n_sites):
        raise ValueError("m0 must be a site index in [0, lattice_sites)")
    stochastic = model.step_stochastic()
    decomps = [birkhoff_decompose(k) for k in stochastic]
    recon_errors = [float(np.abs(d.reconstruct() - k).max())
                    for d, k in zip(decomps, stochastic)]
    if cfg.corrupt:
        decomps = [corrupt_decomposition(d) for d in decomps]
    check = hv_distribution_check(model, m0=cfg.m0, n_samples=cfg.hv_samples,
                                  seed=cfg.seed, decompositions=decomps)
    bound = decomps[0].term_bound
    ok = (max(recon_errors) <= RECONSTRUCTION_TOL
          and all(d.n_terms <= bound for d in decomps)
          and check.passed)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "hv-demo",
        "walk_kind": cfg.walk_kind,
        "n_sites": model.n_sites,
        "n_steps": model.n_steps,
        "m0": cfg.m0,
        "seed": cfg.seed,
        "corrupted": cfg.corrupt,
        "reconstruction_errors": recon_errors,
        "term_counts": [d.n_terms for d in decomps],
        "term_bound": bound,
        "sampler": {
            "mode": check.mode,
            "n_samples": check.n_samples,
            "n_outcomes": check.n_outcomes,
            "max_abs_dev": check.max_abs_dev,
            "max_sigma": check.max_sigma,
            "tv_distance": check.tv_distance,
            "passed": check.passed,
        },
        "passed": ok,
    }
    _write_json(out_path, payload)
    print("wrote %s; %s" % (out_path, "pass" if ok else "FAIL"))
    return 0 if ok else 4


def cmd_classical_check(cfg: RunConfig, out_path: str) -> int:
    sub_abs = SubadditiveFunctional.absolute()
    sub_skew = SubadditiveFunctional.from_callable(
        lambda u: np.abs(u) + 0.3 * u, name="abs+skew", symmetric=False)
    f_int = TrajectoryFunctional.time_integral(sub_abs)
    f_peak = TrajectoryFunctional.peak(sub_abs)
    f_skew = TrajectoryFunctional.time_integral(sub_skew)
    times = np.linspace(cfg.t_start, cfg.t_end, cfg.time_points)

    mins = {"pointwise": np.inf, "integrated": np.inf, "gen_integral": np.inf,
            "gen_peak": np.inf, "gen_skew": np.inf}
    for i in range(cfg.ensembles):
        ens = TrajectoryEnsemble.random(seed=cfg.seed + i, n_members=cfg.members,
                                        times=times)
        res = classical_bell_S(ens)
        mins["pointwise"] = min(mins["pointwise"], res.min_pointwise)
        mins["integrated"] = min(mins["integrated"], res.s_integral)
        mins["gen_integral"] = min(mins["gen_integral"],
                                   classical_bell_S_generalized(ens, f_int))
        mins["gen_peak"] = min(mins["gen_peak"],
                               classical_bell_S_generalized(ens, f_peak))
        mins["gen_skew"] = min(mins["gen_skew"],
                               classical_bell_S_generalized(ens, f_skew))
    ok = all(v >= CLASSICAL_THRESHOLD for v in mins.values())
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "classical-check",
        "ensembles": cfg.ensembles,
        "members": cfg.members,
        "time_points": cfg.time_points,
        "seed": cfg.seed,
        "threshold": CLASSICAL_THRESHOLD,
        "minima": {k: float(v) for k, v in sorted(mins.items())},
        "passed": ok,
    }
    _write_json(out_path, payload)
    print("wrote %s; %s" % (out_path, "pass" if ok else "FAIL"))
    return 0 if ok else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="belltraj",
        description="Bell tests on the distance between two oscillator trajectories",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file with RunConfig keys")
        p.add_argument("--units", choices=("natural", "si"))
        p.add_argument("--seed", type=int)
        p.add_argument("--method", choices=METHODS)

    p_find = sub.add_parser("find-state", help="minimise <S(T)> and store the state")
    add_common(p_find)
    p_find.add_argument("--out", default="state.json")
    p_find.add_argument("--n-sub", type=int, dest="n_sub")
    p_find.add_argument("--n-big", type=int, dest="n_big")
    p_find.add_argument("--probe-time", type=float, dest="probe_time")
    p_find.add_argument("--omega0", type=float)
    p_find.add_argument("--omega1", type=float)
    p_find.add_argument("--no-convergence", dest="check_convergence",
                        action="store_const", const=False,
                        help="skip the doubled-grid truncation check")

    p_sweep = sub.add_parser("sweep", help="S(t) over a time grid for a state")
    add_common(p_sweep)
    p_sweep.add_argument("--state", help="state JSON written by find-state")
    p_sweep.add_argument("--out", default="sweep.csv")
    p_sweep.add_argument("--n-sub", type=int, dest="n_sub")
    p_sweep.add_argument("--n-big", type=int, dest="n_big")
    p_sweep.add_argument("--t-start", type=float, dest="t_start")
    p_sweep.add_argument("--t-end", type=float, dest="t_end")
    p_sweep.add_argument("--steps", type=int)
    p_sweep.add_argument("--omega0", type=float)
    p_sweep.add_argument("--omega1", type=float)

    p_hv = sub.add_parser("hv-demo", help="lattice walk hidden-variable demo")
    add_common(p_hv)
    p_hv.add_argument("--out", default="hv_demo.json")
    p_hv.add_argument("--sites", type=int, dest="lattice_sites")
    p_hv.add_argument("--walk-steps", type=int, dest="walk_steps")
    p_hv.add_argument("--kind", choices=("dft", "random"), dest="walk_kind")
    p_hv.add_argument("--samples", type=int, dest="hv_samples")
    p_hv.add_argument("--m0", type=int)
    p_hv.add_argument("--corrupt", action="store_const", const=True,
                      help="negative control: tamper with the weights")

    p_cl = sub.add_parser("classical-check", help="classical ensembles stay non-negative")
    add_common(p_cl)
    p_cl.add_argument("--out", default="classical_check.json")
    p_cl.add_argument("--ensembles", type=int)
    p_cl.add_argument("--members", type=int)
    p_cl.add_argument("--time-points", type=int, dest="time_points")

    return parser


_CONFIG_KEYS = set(_FIELD_TYPES)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k in _CONFIG_KEYS}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "find-state":
            return cmd_find_state(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.state)
        if args.command == "hv-demo":
            return cmd_hv_demo(cfg, args.out)
        return cmd_classical_check(cfg, args.out)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except AccuracyError as exc:
        print("check failed: %s" % exc, file=sys.stderr)
        return 4


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
