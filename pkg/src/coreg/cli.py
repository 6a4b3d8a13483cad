"""Command-line surface: certify, design and simulate pipelines over the
builtin scenarios or a scenario config file.

Outputs are deterministic: identical configs produce byte-identical CSV
files.  Exit codes: 0 success, 1 input error, 2 failed certificate or
synthesis, 3 divergence (partial trace retained).
"""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hybrid_sim import DivergenceError, error_metrics, simulate
from .linalg import DimensionError, NumericalError
from .regulator import (DesignError, PreconditionError,
                        RegulationInfeasibleError, SynthesisError,
                        assemble_zoh, certify_zoh, design_zoh)
from .scenarios import (ConfigError, MicrogridParams, Scenario,
                        builtin_scenario, parse_scenario_config,
                        random_initial_conditions, run_microgrid)

# Fixed seed for the "random" initial states, so runs are reproducible.
DEFAULT_SEED = 12345

DEFAULT_HORIZON = {"corp": 30.0, "microgrid": 5.0}


@dataclass
class RunConfig:
    kind: str  # corp | microgrid
    scenario: object  # Scenario | MicrogridParams
    horizon: float
    substeps: int
    out_dir: Path
    k1_source: str  # paper | synthesize
    mu: float | None
    h: float | None
    force: bool


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _mat_to_lists(m) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(m)]


def _load_scenario(args) -> tuple[str, object]:
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(1, f"cannot read config: {exc}") from None
        return parse_scenario_config(text)
    return builtin_scenario(args.scenario)


def _run_config(args) -> RunConfig:
    kind, scenario = _load_scenario(args)
    horizon = getattr(args, "horizon", None)
    if horizon is None:
        horizon = DEFAULT_HORIZON[kind]
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    substeps = getattr(args, "substeps", 5)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    return RunConfig(
        kind=kind,
        scenario=scenario,
        horizon=float(horizon),
        substeps=int(substeps),
        out_dir=Path(args.out),
        k1_source=args.k1,
        mu=args.mu,
        h=args.h,
        force=bool(getattr(args, "force", False)),
    )


def _resolve_gains(cfg: RunConfig):
    sc: Scenario = cfg.scenario
    source = cfg.k1_source
    if source == "auto":
        source = "paper" if sc.k1 is not None else "synthesize"
    if source == "paper":
        if sc.k1 is None:
            raise ValueError(
                "--k1 paper requested but the scenario carries no reference "
                "gains; use --k1 synthesize"
            )
        return list(sc.k1), "paper"
    return None, "synthesize"


def _build_design(cfg: RunConfig):
    sc: Scenario = cfg.scenario
    h = cfg.h if cfg.h is not None else sc.h
    mu = cfg.mu if cfg.mu is not None else sc.mu
    k1, source = _resolve_gains(cfg)
    design = assemble_zoh(sc.plants, sc.exo, sc.graph, h, mu=mu, k1=k1)
    return design, source


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _require_corp(cfg: RunConfig, command: str):
    if cfg.kind != "corp":
        raise ValueError(
            f"`{command}` applies to cooperative-regulation scenarios; "
            "the microgrid scenario is run through `simulate`"
        )


def cmd_certify(args) -> int:
    cfg = _run_config(args)
    _require_corp(cfg, "certify")
    sc: Scenario = cfg.scenario
    design, _ = _build_design(cfg)
    cert = certify_zoh(design, sc.plants, sc.exo, sc.graph)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "certificate.json"
    _write_json(path, cert.to_dict())
    print(f"certificate: {'pass' if cert.verdict else 'fail'} "
          f"(rho_eta={cert.rho_eta:.6g}, max rho_agent="
          f"{max(cert.rho_agent):.6g}) -> {path}")
    return 0 if cert.verdict else 2


def cmd_design(args) -> int:
    cfg = _run_config(args)
    _require_corp(cfg, "design")
    sc: Scenario = cfg.scenario
    h = cfg.h if cfg.h is not None else sc.h
    mu = cfg.mu if cfg.mu is not None else sc.mu
    k1, source = _resolve_gains(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        design, cert = design_zoh(sc.plants, sc.exo, sc.graph, h,
                                  mu=mu, k1=k1)
    except DesignError as exc:
        if exc.certificate is not None:
            _write_json(cfg.out_dir / "certificate.json",
                        exc.certificate.to_dict())
        print(f"design failed: {exc}", file=sys.stderr)
        return 2
    payload = {
        "h": design.h,
        "mu": design.mu,
        "k1_source": source,
        "k1": [_mat_to_lists(k) for k in design.K1],
        "k2": [_mat_to_lists(k) for k in design.K2],
        "pi": [_mat_to_lists(p) for p in design.Pi],
        "certificate": cert.to_dict(),
    }
    path = cfg.out_dir / "design.json"
    _write_json(path, payload)
    print(f"design: pass (mu={design.mu:.6g}) -> {path}")
    return 0


def _write_error_csv(path: Path, trace, n_agents: int, p_dims):
    with open(path, "w", newline="\n") as fh:
        cols = []
        for i in range(1, n_agents + 1):
            if p_dims[i - 1] == 1:
                cols.append(f"e{i}")
            else:
                cols.extend(f"e{i}c{j}" for j in range(1, p_dims[i - 1] + 1))
        fh.write("t," + ",".join(cols) + "\n")
        for rec in trace.records:
            row = [_fmt(rec.t)]
            for e in rec.errors:
                row.extend(_fmt(v) for v in e)
            fh.write(",".join(row) + "\n")


def _simulate_corp(cfg: RunConfig) -> int:
    sc: Scenario = cfg.scenario
    design, _ = _build_design(cfg)
    x0, eta0, w0 = random_initial_conditions(sc, DEFAULT_SEED)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        trace = simulate(sc.plants, sc.exo, design, sc.graph,
                         x0, eta0, w0, T=cfg.horizon,
                         substeps=cfg.substeps, force=cfg.force)
        diverged = False
    except DivergenceError as exc:
        trace = exc.trace
        diverged = True
    with open(cfg.out_dir / "trace.csv", "w", newline="\n") as fh:
        trace.write_csv(fh)
    p_dims = [p.p for p in sc.plants]
    _write_error_csv(cfg.out_dir / "errors.csv", trace, len(sc.plants), p_dims)
    report = error_metrics(trace, threshold=1e-2)
    series = trace.max_error_series()
    final_err = series[-1][1] if series else float("nan")
    _write_json(cfg.out_dir / "metrics.json", {
        "horizon": trace.t_end,
        "h": design.h,
        "mu": design.mu,
        "final_max_error": final_err,
        "diverged": diverged,
        "settling": report.to_dict(),
    })
    if diverged:
        print(f"simulation diverged at t={trace.t_end:.6g}; partial trace "
              f"written to {cfg.out_dir}", file=sys.stderr)
        return 3
    print(f"simulated T={trace.t_end:g}s: final max|e| = {final_err:.3e} "
          f"-> {cfg.out_dir}")
    return 0


def _p_main_at(params: MicrogridParams, t: float) -> float:
    value = params.schedule[0][1]
    for ts, vs in params.schedule:
        if t >= ts - 1e-12:
            value = vs
    return value


def _simulate_microgrid(cfg: RunConfig) -> int:
    params: MicrogridParams = cfg.scenario
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        trace = run_microgrid(params, T=cfg.horizon)
        diverged = False
    except DivergenceError as exc:
        trace = exc.trace
        diverged = True
    n = params.n_mg
    with open(cfg.out_dir / "microgrid.csv", "w", newline="\n") as fh:
        head = ["t"]
        for name in ("lambda", "p_r", "p", "q", "omega"):
            head.extend(f"{name}{i}" for i in range(1, n + 1))
        fh.write(",".join(head) + "\n")
        omega = trace.omega
        for r in range(trace.t.size):
            row = [_fmt(trace.t[r])]
            row.extend(_fmt(v) for v in trace.Lambda[r])
            row.extend(_fmt(v) for v in trace.P_r[r])
            row.extend(_fmt(v) for v in trace.phys[r, :, 3])
            row.extend(_fmt(v) for v in trace.phys[r, :, 4])
            row.extend(_fmt(v) for v in omega[r])
            fh.write(",".join(row) + "\n")
    with open(cfg.out_dir / "incremental_cost.csv", "w", newline="\n") as fh:
        fh.write("t," + ",".join(f"lambda{i}" for i in range(1, n + 1)) + "\n")
        for r in range(trace.t.size):
            fh.write(",".join([_fmt(trace.t[r])]
                              + [_fmt(v) for v in trace.Lambda[r]]) + "\n")
    with open(cfg.out_dir / "power_tracking.csv", "w", newline="\n") as fh:
        fh.write("t,p_main,sum_p_r\n")
        for r in range(trace.t.size):
            fh.write(f"{_fmt(trace.t[r])},"
                     f"{_fmt(_p_main_at(params, trace.t[r]))},"
                     f"{_fmt(trace.P_r[r].sum())}\n")
    with open(cfg.out_dir / "frequency.csv", "w", newline="\n") as fh:
        fh.write("t," + ",".join(f"omega{i}" for i in range(1, n + 1)) + "\n")
        omega = trace.omega
        for r in range(trace.t.size):
            fh.write(",".join([_fmt(trace.t[r])]
                              + [_fmt(v) for v in omega[r]]) + "\n")
    metrics = {
        "horizon": float(trace.t[-1]) if trace.t.size else 0.0,
        "dispatch_h": params.dispatch_h,
        "diverged": diverged,
    }
    if not diverged:
        lam = trace.final.Lambda
        metrics.update({
            "lambda_final": [float(v) for v in lam],
            "lambda_spread": float(lam.max() - lam.min()),
            "sum_p_r_final": float(trace.final.P_r.sum()),
            "p_main_final": _p_main_at(params, float(trace.t[-1])),
            "max_abs_domega_final": float(np.abs(trace.final_phys[:, 1]).max()),
        })
    _write_json(cfg.out_dir / "metrics.json", metrics)
    if diverged:
        print(f"micro-grid run diverged; partial trace written to "
              f"{cfg.out_dir}", file=sys.stderr)
        return 3
    print(f"microgrid T={cfg.horizon:g}s: lambda spread = "
          f"{metrics['lambda_spread']:.3e}, sum P_r = "
          f"{metrics['sum_p_r_final']:.6f} -> {cfg.out_dir}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    if cfg.kind == "microgrid":
        return _simulate_microgrid(cfg)
    return _simulate_corp(cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coreg",
        description="Sampled-data cooperative output regulation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_sim=False):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--scenario", default="example41",
                         choices=("example41", "microgrid"),
                         help="builtin scenario name")
        src.add_argument("--config", default=None,
                         help="path to a scenario config file")
        p.add_argument("--mu", type=float, default=None,
                       help="override the consensus step size")
        p.add_argument("--h", type=float, default=None,
                       help="override the sampling period (seconds)")
        p.add_argument("--k1", default="auto",
                       choices=("auto", "paper", "synthesize"),
                       help="gain source: scenario reference gains or "
                            "discrete LQR synthesis")
        p.add_argument("--out", default="out", help="output directory")
        if with_sim:
            p.add_argument("-T", "--horizon", type=float, default=None,
                           help="simulation horizon in seconds")
            p.add_argument("--substeps", type=int, default=5,
                           help="dense-output points per sampling interval")
            p.add_argument("--force", action="store_true",
                           help="simulate even when the certificate fails")

    p_cert = sub.add_parser("certify", help="emit a stability certificate")
    common(p_cert)
    p_cert.set_defaults(func=cmd_certify)

    p_design = sub.add_parser("design", help="synthesize gains and certify")
    common(p_design)
    p_design.set_defaults(func=cmd_design)

    p_sim = sub.add_parser("simulate", help="run the hybrid closed loop")
    common(p_sim, with_sim=True)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (PreconditionError, RegulationInfeasibleError, SynthesisError,
            DesignError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DimensionError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
