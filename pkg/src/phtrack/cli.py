"""Command-line entry point.

Subcommands
-----------
simulate     run the scenarios in a config and write one CSV per mode
check-gains  sweep the configuration grid and report the gain-condition margin
verify       run the randomized property suites
distance     print the metric distance between two phase-space points

Exit codes: 0 success, 1 a property or gain condition failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import contraction, models, properties, tracking
from .phsys import MechanicalPHSystem, PhaseState
from .sim import MODES, Scenario, SimLog, simulate
from .tracking import ControllerGains, ReferenceTrajectory

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Declarative description of a run; round-trips through JSON."""

    model: dict = field(default_factory=lambda: {"name": "scara", "params": {}})
    reference: dict = field(default_factory=lambda: {"preset": "paper"})
    gains: dict = field(default_factory=lambda: {
        "lambda_diag": [15.0, 15.0, 15.0], "kd_diag": [30.0, 60.0, 90.0]})
    initial: dict = field(default_factory=lambda: {"q": [0.0, 0.0, 0.0], "p": [0.0, 0.0, 0.0]})
    horizon: float = 10.0
    step: float = 1e-3
    modes: List[str] = field(default_factory=lambda: ["closed_loop"])
    tangent: Optional[List[float]] = None
    input: Optional[dict] = None
    seed: int = 12345
    grid: int = 720
    distance_segments: int = 16
    verify_count: int = 200
    out_dir: str = "out"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        allowed = set(cls.__dataclass_fields__)
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return RunConfig.from_dict(raw)


def paper_preset() -> RunConfig:
    """The bundled SCARA benchmark scenario."""
    return RunConfig()


def _build_system(cfg: RunConfig) -> MechanicalPHSystem:
    spec = cfg.model
    name = spec.get("name")
    params = spec.get("params", {}) or {}
    try:
        if name == "scara":
            return models.scara(models.ScaraParams(**params))
        if name == "constant_inertia":
            return models.toy_constant_inertia(**params)
        if name == "pendulum":
            return models.toy_pendulum(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model parameters for {name!r}: {exc}") from exc
    raise ConfigError(f"unknown model {name!r}; expected scara, constant_inertia or pendulum")


def _build_reference(cfg: RunConfig, n: int) -> ReferenceTrajectory:
    spec = cfg.reference
    if "preset" in spec:
        if spec["preset"] == "paper":
            if n != 3:
                raise ConfigError("the paper reference preset is three-dimensional")
            return tracking.paper_reference()
        if spec["preset"] == "rest":
            return tracking.constant_reference(np.zeros(n))
        raise ConfigError(f"unknown reference preset {spec['preset']!r}")
    try:
        a = np.asarray(spec["amplitude"], dtype=float)
        w = np.asarray(spec["omega"], dtype=float)
        b = np.asarray(spec["offset"], dtype=float)
    except KeyError as exc:
        raise ConfigError("reference needs a preset or amplitude/omega/offset lists") from exc
    if not (a.size == w.size == b.size == n):
        raise ConfigError(f"reference coefficient lists must have length {n}")
    return tracking.sinusoidal_reference(a, w, b)


def _square_matrix(spec: dict, diag_key: str, full_key: str, n: int, what: str) -> np.ndarray:
    if diag_key in spec:
        v = np.asarray(spec[diag_key], dtype=float)
        if v.size != n:
            raise ConfigError(f"{what} diagonal must have length {n}")
        return np.diag(v)
    if full_key in spec:
        A = np.asarray(spec[full_key], dtype=float)
        if A.shape != (n, n):
            raise ConfigError(f"{what} matrix must be {n}x{n}")
        return A
    raise ConfigError(f"gains need {diag_key} or {full_key}")


def _build_gains(cfg: RunConfig, n: int) -> ControllerGains:
    L = _square_matrix(cfg.gains, "lambda_diag", "lambda", n, "Lambda")
    K = _square_matrix(cfg.gains, "kd_diag", "kd", n, "Kd")
    try:
        return ControllerGains(L, K)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_input(cfg: RunConfig, n: int):
    if cfg.input is None:
        return None
    try:
        a = np.asarray(cfg.input["amplitude"], dtype=float)
        w = np.asarray(cfg.input["omega"], dtype=float)
        b = np.asarray(cfg.input["offset"], dtype=float)
    except KeyError as exc:
        raise ConfigError("input needs amplitude/omega/offset lists") from exc
    if not (a.size == w.size == b.size == n):
        raise ConfigError(f"input coefficient lists must have length {n}")
    return lambda t: a * np.sin(w * t) + b


def _build_scenario(cfg: RunConfig, mode: str, sys_: MechanicalPHSystem,
                    ref: ReferenceTrajectory, gains: ControllerGains) -> Scenario:
    n = sys_.n
    q0 = np.asarray(cfg.initial.get("q", np.zeros(n)), dtype=float)
    p0 = np.asarray(cfg.initial.get("p", np.zeros(n)), dtype=float)
    if q0.size != n or p0.size != n:
        raise ConfigError(f"initial state must have q and p of length {n}")
    delta0 = None
    if mode == "prolonged":
        if cfg.tangent is None:
            raise ConfigError("prolonged mode needs a tangent vector in the config")
        delta0 = np.asarray(cfg.tangent, dtype=float)
    try:
        return Scenario(system=sys_, reference=ref, gains=gains, horizon=cfg.horizon,
                        step=cfg.step, mode=mode, x0=PhaseState(q0, p0, 0.0),
                        delta0=delta0, u_fn=_build_input(cfg, n),
                        distance_segments=cfg.distance_segments)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def csv_header(n: int) -> List[str]:
    cols = ["t"]
    for group in ("q", "p", "q_d", "u", "u_eq", "u_at", "q_tilde", "sigma"):
        cols += [f"{group}{i + 1}" for i in range(n)]
    cols += ["H", "H_d", "dist", "beta", "V"]
    return cols


def write_csv(log: SimLog, path: Path) -> None:
    """Full-precision delimited dump; a failed run gets a trailing comment marker."""
    n = log.q.shape[1]
    fmt = lambda x: format(float(x), ".17g")
    lines = [",".join(csv_header(n))]
    for k in range(log.t.size):
        row = [fmt(log.t[k])]
        for series in (log.q, log.p, log.q_d, log.u, log.u_eq, log.u_at,
                       log.q_tilde, log.sigma):
            row += [fmt(v) for v in series[k]]
        row += [fmt(log.H[k]), fmt(log.H_d[k]), fmt(log.dist[k]),
                fmt(log.beta[k]), fmt(log.V[k])]
        lines.append(",".join(row))
    if log.failed:
        lines.append(f"# aborted at t={fmt(log.t[-1])}: {log.reason}")
    path.write_text("\n".join(lines) + "\n")


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> int:
    sys_ = _build_system(cfg)
    ref = _build_reference(cfg, sys_.n)
    gains = _build_gains(cfg, sys_.n)
    if not cfg.modes:
        raise ConfigError("config lists no modes to run")
    for mode in cfg.modes:
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    out_dir.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for mode in cfg.modes:
        log = simulate(_build_scenario(cfg, mode, sys_, ref, gains))
        name = "trajectory.csv" if len(cfg.modes) == 1 else f"trajectory_{mode}.csv"
        write_csv(log, out_dir / name)
        if log.failed:
            print(f"{mode}: integration aborted ({log.reason}); partial log written")
            status = EXIT_FAILED_CHECK
        else:
            print(f"{mode}: {log.t.size} samples -> {out_dir / name}")
    return status


def cmd_check_gains(cfg: RunConfig, grid_count: Optional[int] = None) -> int:
    sys_ = _build_system(cfg)
    gains = _build_gains(cfg, sys_.n)
    count = grid_count or cfg.grid
    if count < 1:
        raise ConfigError("grid count must be positive")
    sweep = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    worst_margin = np.inf
    worst_beta = np.inf
    for axis in range(sys_.n):
        qs = np.zeros((count, sys_.n))
        qs[:, axis] = sweep
        margins, betas = contraction.grid_certificates(sys_, gains, qs)
        worst_margin = min(worst_margin, margins.min())
        worst_beta = min(worst_beta, betas.min())
    ok = worst_margin > 0.0
    report = {
        "grid_points_per_axis": count,
        "min_margin": worst_margin,
        "min_beta": worst_beta,
        "min_distance_rate": 0.5 * worst_beta,
        "holds": bool(ok),
    }
    print(json.dumps(report, indent=2))
    print(f"gain condition {'holds' if ok else 'FAILS'}: "
          f"min margin {worst_margin:.6g}, min beta {worst_beta:.6g}")
    return EXIT_OK if ok else EXIT_FAILED_CHECK


def cmd_verify(cfg: RunConfig, seed: Optional[int] = None) -> int:
    sys_ = _build_system(cfg)
    ref = _build_reference(cfg, sys_.n)
    gains = _build_gains(cfg, sys_.n)
    results = properties.standard_suite(sys_, ref, gains, seed=seed or cfg.seed,
                                        count=cfg.verify_count)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed")
    return EXIT_OK if not failed else EXIT_FAILED_CHECK


def _parse_point(text: str, n: int, t: float) -> PhaseState:
    vals = np.asarray([float(v) for v in text.replace(";", ",").split(",") if v.strip()])
    if vals.size != 2 * n:
        raise ConfigError(f"state must list 2n = {2 * n} numbers (q then p)")
    return PhaseState(vals[:n], vals[n:], t)


def cmd_distance(cfg: RunConfig, state: str, desired: str, segments: Optional[int]) -> int:
    sys_ = _build_system(cfg)
    gains = _build_gains(cfg, sys_.n)
    x = _parse_point(state, sys_.n, 0.0)
    x_d = _parse_point(desired, sys_.n, 0.0)
    d = contraction.riemannian_distance(sys_, gains, x, x_d,
                                        segments or cfg.distance_segments)
    print(format(d, ".17g"))
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phtrack", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=str, default=None,
                        help="JSON config path (defaults to the bundled benchmark preset)")

    sp = sub.add_parser("simulate", help="run scenarios and write CSV logs")
    common(sp)
    sp.add_argument("--out", type=str, default=None, help="output directory")

    sp = sub.add_parser("check-gains", help="evaluate the gain condition on a grid")
    common(sp)
    sp.add_argument("--grid", type=int, default=None, help="grid points per axis")

    sp = sub.add_parser("verify", help="run the randomized property suites")
    common(sp)
    sp.add_argument("--seed", type=int, default=None, help="seed for the sampled states")

    sp = sub.add_parser("distance", help="print d(x, x_d) for two phase-space points")
    common(sp)
    sp.add_argument("--state", type=str, required=True, help="comma list: q then p")
    sp.add_argument("--desired", type=str, required=True, help="comma list: q then p")
    sp.add_argument("--segments", type=int, default=None)

    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else paper_preset()
        if args.command == "simulate":
            out = Path(args.out) if args.out else Path(cfg.out_dir)
            return cmd_simulate(cfg, out)
        if args.command == "check-gains":
            return cmd_check_gains(cfg, args.grid)
        if args.command == "verify":
            return cmd_verify(cfg, args.seed)
        if args.command == "distance":
            return cmd_distance(cfg, args.state, args.desired, args.segments)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
