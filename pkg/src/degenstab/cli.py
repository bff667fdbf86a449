"""Command-line entry point.

Subcommands: modes | kernel | verify | simulate | report.  Exit codes:
0 success, 2 config validation failure, 3 numerical failure, 4 resonance
failure, 5 verification gate failure.  stdout carries only the paths of the
written summaries; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from degenstab import closed_loop_sim, fredholm_transform, kernel_builder, verification
from degenstab.kernel_builder import (
    DecayConfig,
    IllConditionedError,
    ResonanceError,
    build_kernel,
    ncheck_count,
)
from degenstab.special_functions import ConvergenceError, DomainError
from degenstab.spectral_basis import DegenerateParams, QuadratureError, build_modes, write_modes_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_RESONANCE = 4
EXIT_VERIFY = 5


@dataclass
class RunConfig:
    alpha: float = 0.5
    decay_rate: float = 5.0
    n_modes: int = 64
    resonance_margin: float | None = None
    t_final: float = 1.0
    dt: float = 0.005
    integrator_tol: float = 1e-6
    fit_start: float = 0.1
    fit_end: float = 0.8
    out_dir: str = "out"
    seed: int = 0

    def validate(self) -> list[str]:
        errors = []
        if not math.isfinite(self.alpha) or not 0.0 <= self.alpha < 1.0:
            errors.append(f"alpha: must lie in [0, 1), got {self.alpha}")
        if not math.isfinite(self.decay_rate) or self.decay_rate < 0.0:
            errors.append(f"lambda: must be >= 0, got {self.decay_rate}")
        if self.n_modes < 1:
            errors.append(f"n_modes: must be >= 1, got {self.n_modes}")
        if self.resonance_margin is not None and self.resonance_margin <= 0.0:
            errors.append(f"resonance_margin: must be > 0, got {self.resonance_margin}")
        if self.t_final <= 0.0:
            errors.append(f"t_final: must be > 0, got {self.t_final}")
        if self.dt <= 0.0:
            errors.append(f"dt: must be > 0, got {self.dt}")
        if self.integrator_tol <= 0.0:
            errors.append(f"integrator_tol: must be > 0, got {self.integrator_tol}")
        if not 0.0 < self.fit_start < self.fit_end <= self.t_final:
            errors.append(
                f"fit window: need 0 < fit_start < fit_end <= t_final, got "
                f"({self.fit_start}, {self.fit_end}) with t_final {self.t_final}"
            )
        elif self.dt > (self.fit_end - self.fit_start) / 50.0:
            errors.append("dt: too coarse for the fit window (need >= 50 samples inside)")
        if self.seed < 0:
            errors.append(f"seed: must be >= 0, got {self.seed}")
        return errors

    def sim_config(self) -> closed_loop_sim.SimConfig:
        return closed_loop_sim.SimConfig(
            t_final=self.t_final,
            dt=self.dt,
            integrator_tol=self.integrator_tol,
            fit_window=(self.fit_start, self.fit_end),
        )


_CONFIG_KEYS = {
    "alpha": ("alpha", float),
    "lambda": ("decay_rate", float),
    "n_modes": ("n_modes", int),
    "resonance_margin": ("resonance_margin", float),
    "t_final": ("t_final", float),
    "dt": ("dt", float),
    "integrator_tol": ("integrator_tol", float),
    "fit_start": ("fit_start", float),
    "fit_end": ("fit_end", float),
    "out_dir": ("out_dir", str),
    "seed": ("seed", int),
}


def load_config_file(path: str, cfg: RunConfig) -> list[str]:
    """Apply `key = value` lines from a plain-text config file.  '#' comments."""
    errors = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        return [f"config: cannot read {path}: {exc}"]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"config:{lineno}: expected key = value, got {raw!r}")
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            errors.append(f"config:{lineno}: unknown key {key!r}")
            continue
        attr, conv = _CONFIG_KEYS[key]
        try:
            setattr(cfg, attr, conv(value))
        except ValueError:
            errors.append(f"config:{lineno}: cannot parse {key} value {value!r}")
    return errors


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degenstab",
        description="Backstepping boundary stabilization of the degenerate heat equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("modes", "write the eigenmode table"),
        ("kernel", "build the backstepping kernel and transform matrices"),
        ("verify", "run the full property battery"),
        ("simulate", "run closed-loop and target simulations"),
        ("report", "run the whole pipeline and write a combined report"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", help="key = value config file; flags override")
        cmd.add_argument("--alpha", type=float, help="degeneracy exponent in [0, 1)")
        cmd.add_argument("--lambda", dest="decay_rate", type=float, help="target decay rate")
        cmd.add_argument("--n-modes", type=int, help="truncation")
        cmd.add_argument("--resonance-margin", type=float)
        cmd.add_argument("--t-final", type=float)
        cmd.add_argument("--dt", type=float)
        cmd.add_argument("--integrator-tol", type=float)
        cmd.add_argument("--fit-start", type=float)
        cmd.add_argument("--fit-end", type=float)
        cmd.add_argument("--out-dir", type=str)
        cmd.add_argument("--seed", type=int)
        if name == "verify":
            cmd.add_argument(
                "--sabotage-gram",
                action="store_true",
                help="negative-control hook: corrupt one Gram entry before checking",
            )
    return parser


def resolve_config(args: argparse.Namespace) -> tuple[RunConfig, list[str]]:
    cfg = RunConfig()
    errors = []
    if getattr(args, "config", None):
        errors += load_config_file(args.config, cfg)
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    errors += cfg.validate()
    return cfg, errors


def _json_dump(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare(cfg: RunConfig):
    """Shared pipeline front half: params, modes, resonance check, kernel."""
    params = DegenerateParams(cfg.alpha)
    config = DecayConfig(cfg.decay_rate, cfg.resonance_margin)
    modes_check = build_modes(params, ncheck_count(cfg.n_modes, config))
    nr = kernel_builder.check_nonresonance(modes_check, config)
    if not nr.ok:
        n, k, dist = nr.offending
        what = f"lambda - lam_{n}" if k == 0 else f"lambda - lam_{n} - lam_{k}"
        msg = f"resonance failure: |{what}| = {dist:.3e} < margin {config.margin:.3e}"
        if nr.suggested_perturbation is not None:
            msg += f"; smallest admissible perturbation: lambda + {nr.suggested_perturbation:.6e}"
        raise ResonanceError(msg)
    modes = modes_check[: cfg.n_modes]
    if cfg.decay_rate == 0.0:
        print("warning: lambda = 0 gives the identity transform (no feedback)", file=sys.stderr)
    kernel = build_kernel(modes, params, config)
    return params, config, modes, kernel


def cmd_modes(cfg: RunConfig, out: Path) -> Path:
    params = DegenerateParams(cfg.alpha)
    modes = build_modes(params, cfg.n_modes)
    path = out / "modes.csv"
    write_modes_csv(modes, path)
    return path


def cmd_kernel(cfg: RunConfig, out: Path) -> Path:
    params, config, modes, kernel = _prepare(cfg)
    system = fredholm_transform.assemble(kernel, modes)
    kernel_builder.write_kernel_table_csv(kernel, out / "kernel_table.csv")
    kernel_builder.write_kernel_grid_csv(kernel, modes, params, out / "kernel_grid.csv")
    fredholm_transform.write_matrix_csv(system.T_mat, out / "transform_matrix.csv", prefix="n")
    fredholm_transform.write_spectrum_csv(
        fredholm_transform.closed_loop_spectrum(system, modes), out / "spectrum.csv"
    )
    residual = fredholm_transform.tb_residual(system)
    with open(out / "tb_residual.csv", "w", newline="") as fh:
        fh.write("k,relative_residual\n")
        for i, r in enumerate(residual):
            fh.write(f"{i + 1},{r:.17g}\n")
    summary = fredholm_transform.write_summary_json(system, modes, out / "kernel_summary.json")
    summary["condition_estimate_solve"] = kernel.condition
    _json_dump(summary, out / "kernel_summary.json")
    return out / "kernel_summary.json"


def cmd_verify(cfg: RunConfig, out: Path, sabotage: bool) -> tuple[Path, bool]:
    gates = verification.run_verification(
        alpha=cfg.alpha,
        decay_rate=cfg.decay_rate,
        n_modes=cfg.n_modes,
        resonance_margin=cfg.resonance_margin,
        seed=cfg.seed,
        sabotage_gram=sabotage,
        sim_cfg=cfg.sim_config(),
    )
    payload = {
        "config": {"alpha": cfg.alpha, "lambda": cfg.decay_rate, "n_modes": cfg.n_modes, "seed": cfg.seed},
        "gates": [{"name": g.name, "passed": g.passed, "detail": g.detail} for g in gates],
        "all_passed": all(g.passed for g in gates),
    }
    _json_dump(payload, out / "verify.json")
    with open(out / "verify.txt", "w") as fh:
        for g in gates:
            fh.write(f"[{'PASS' if g.passed else 'FAIL'}] {g.name}: {g.detail}\n")
    failed = [g.name for g in gates if not g.passed]
    if failed:
        print(f"failed gates: {', '.join(failed)}", file=sys.stderr)
    return out / "verify.json", not failed


def cmd_simulate(cfg: RunConfig, out: Path) -> Path:
    params, config, modes, kernel = _prepare(cfg)
    system = fredholm_transform.assemble(kernel, modes)
    sim_cfg = cfg.sim_config()
    u0 = 1.0 / np.arange(1, cfg.n_modes + 1, dtype=float)
    traj_u = closed_loop_sim.simulate_closed_loop(system, modes, u0, sim_cfg)
    traj_v = closed_loop_sim.simulate_target(
        modes, cfg.decay_rate, system.T_mat @ u0, sim_cfg
    )
    deviation = closed_loop_sim.conjugate_check(system, modes, u0, sim_cfg)
    closed_loop_sim.write_trajectory_csv(traj_u, out / "closed_loop.csv")
    closed_loop_sim.write_trajectory_csv(traj_v, out / "target.csv")
    c_est = math.exp(traj_u.fit_intercept) / traj_u.l2_norm[0]
    summary = {
        "alpha": cfg.alpha,
        "lambda": cfg.decay_rate,
        "n_modes": cfg.n_modes,
        "fitted_rate_closed_loop": traj_u.fitted_rate,
        "fitted_rate_target": traj_v.fitted_rate,
        "rate_floor": 0.95 * (modes[0].lam + cfg.decay_rate),
        "decay_constant_estimate": c_est,
        "transform_condition": system.sigma_max / system.sigma_min,
        "conjugacy_deviation": deviation,
    }
    _json_dump(summary, out / "simulate_summary.json")
    return out / "simulate_summary.json"


def cmd_report(cfg: RunConfig, out: Path) -> tuple[Path, bool]:
    modes_path = cmd_modes(cfg, out)
    kernel_path = cmd_kernel(cfg, out)
    verify_path, ok = cmd_verify(cfg, out, sabotage=False)
    sim_path = cmd_simulate(cfg, out)
    report = {
        "artifacts": {
            "modes": str(modes_path),
            "kernel": str(kernel_path),
            "verify": str(verify_path),
            "simulate": str(sim_path),
        },
        "all_gates_passed": ok,
    }
    _json_dump(report, out / "report.json")
    lines = [f"run: alpha={cfg.alpha} lambda={cfg.decay_rate} N={cfg.n_modes}"]
    lines += [f"  {k}: {v}" for k, v in report["artifacts"].items()]
    lines.append(f"  all gates passed: {ok}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    return out / "report.json", ok


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg, errors = resolve_config(args)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "modes":
            print(cmd_modes(cfg, out))
        elif args.command == "kernel":
            print(cmd_kernel(cfg, out))
        elif args.command == "verify":
            path, ok = cmd_verify(cfg, out, sabotage=bool(getattr(args, "sabotage_gram", False)))
            print(path)
            if not ok:
                return EXIT_VERIFY
        elif args.command == "simulate":
            print(cmd_simulate(cfg, out))
        elif args.command == "report":
            path, ok = cmd_report(cfg, out)
            print(path)
            if not ok:
                return EXIT_VERIFY
    except ResonanceError as exc:
        print(f"resonance error: {exc}", file=sys.stderr)
        return EXIT_RESONANCE
    except (
        ConvergenceError,
        QuadratureError,
        IllConditionedError,
        closed_loop_sim.IntegratorError,
        DomainError,
    ) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
