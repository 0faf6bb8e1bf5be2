"""``measure-dyn <command> --config <path> [--set k=v ...] --out <dir>``.

Exit status is 0 when every asserted contract of the run holds, 1 when one
fails and 2 when the configuration is invalid (nothing is written then).
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .composition import (
    CompactWindow,
    PreconditionError,
    chaos_certificate,
    cosine_certificate,
    mixing_witness,
    paper_weight,
    periodic_point,
    transitivity_certificate,
    weight_from_preset,
)
from .config import COMMANDS, ConfigError, ExperimentConfig, load_config
from .markov import (
    GridFunction,
    GridMeasure,
    NotCertifiedError,
    contraction_certificate,
    forward_spread,
    invariant_measure,
    kernel_from_preset,
    normalize_kernel,
    observed_contraction,
    tv_distance,
)
from .measures import tv_norm
from .reporting import csv_text, json_text, write_atomic

logger = logging.getLogger("measure_dyn")

CONTRACT_SLACK = 1e-9


@dataclass
class Run:
    """Accumulates contracts, report sections and CSV texts for one invocation."""

    contracts: list[dict] = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)

    def check(self, name: str, ok: bool, **detail) -> bool:
        self.contracts.append({"name": name, "passed": bool(ok), **detail})
        if not ok:
            logger.warning("contract failed: %s %s", name, detail)
        return bool(ok)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.contracts)


def _certificate(run: Run, kind: str, cfg: ExperimentConfig, ws=None, K=None, label=None):
    ws = ws or weight_from_preset(cfg.weight_system)
    K = K or cfg.compact_window()
    fn = {"transitivity": transitivity_certificate, "cosine": cosine_certificate,
          "chaos": chaos_certificate}[kind]
    rep = fn(ws, K, cfg.n_max, cfg.tol)
    label = label or kind
    run.sections[label] = rep.to_dict()
    run.files[f"{label}.csv"] = csv_text(rep.csv_header(), rep.csv_rows())
    run.check(f"{label}.passed", rep.passed, notes=rep.notes)
    return rep


def run_mixing(run: Run, cfg: ExperimentConfig) -> None:
    ws = weight_from_preset(cfg.weight_system)
    mu, v = cfg.measure("mu"), cfg.measure("v")
    try:
        wit = mixing_witness(ws, mu, v, cfg.n)
    except PreconditionError as exc:
        run.check("mixing.precondition", False, error=str(exc))
        return
    run.sections["mixing"] = {
        "n": cfg.n,
        "eta": wit.eta.to_records(),
        "err_in": wit.err_in,
        "err_out": wit.err_out,
        "bound_in": wit.bound_in,
        "bound_out": wit.bound_out,
    }
    run.check("mixing.err_in_bound", wit.err_in <= wit.bound_in * (1 + 1e-12) + 1e-12 * (tv_norm(mu) + tv_norm(v)),
              err_in=wit.err_in, bound=wit.bound_in)
    run.check("mixing.err_out_bound", wit.within_bounds, err_out=wit.err_out, bound=wit.bound_out)
    rows = []
    for n in range(1, cfg.n + 1):
        try:
            w = mixing_witness(ws, mu, v, n)
        except PreconditionError:
            continue
        rows.append([n, w.err_in, w.err_out, w.bound_in, w.bound_out])
    run.files["mixing.csv"] = csv_text(["n", "err_in", "err_out", "bound_in", "bound_out"], rows)


def run_periodic(run: Run, cfg: ExperimentConfig) -> None:
    ws = weight_from_preset(cfg.weight_system)
    mu = cfg.measure("mu")
    try:
        res = periodic_point(ws, mu, cfg.N, cfg.L)
    except PreconditionError as exc:
        run.check("periodic.summable", False, error=str(exc))
        return
    rows = []
    for L in range(1, cfg.L + 1):
        r = periodic_point(ws, mu, cfg.N, L)
        rows.append([L, r.residual_T, r.residual_C, r.tail_bound, r.residual_bound])
    run.files["periodic.csv"] = csv_text(
        ["L", "residual_T", "residual_C", "tail_bound", "residual_bound"], rows
    )
    run.sections["periodic"] = {
        "N": cfg.N, "L": cfg.L, "q_forward": res.q_forward, "q_backward": res.q_backward,
        "tail_bound": res.tail_bound, "residual_bound": res.residual_bound,
        "residual_T": res.residual_T, "residual_C": res.residual_C,
        "v_atoms": len(res.v),
    }
    run.check("periodic.residual_T_le_2_tail", res.residual_T <= 2 * res.tail_bound,
              residual=res.residual_T, bound=2 * res.tail_bound)
    run.check("periodic.residual_C_le_2_tail", res.residual_C <= 2 * res.tail_bound,
              residual=res.residual_C, bound=2 * res.tail_bound)


def run_markov(run: Run, cfg: ExperimentConfig, label: str = "markov") -> None:
    dom, k = kernel_from_preset(
        cfg.kernel, P=cfg.grid_size,
        domain=tuple(cfg.domain) if cfg.domain else None, rule=cfg.quadrature,
    )
    K = normalize_kernel(dom, k)
    cert = contraction_certificate(K, dom)
    section = {"kernel": cfg.kernel, "grid_size": dom.size, "quadrature": dom.rule, **cert.to_dict()}
    run.sections[label] = section
    run.check(f"{label}.row_stochastic", float(np.max(np.abs(K.row_sums(dom) - 1))) <= 1e-12)
    if not run.check(f"{label}.certificate", cert.passed, ktilde_sup=cert.ktilde_sup,
                     threshold=cert.threshold):
        return
    observed = observed_contraction(K, dom, cfg.trials, cfg.seed)
    section["observed_contraction"] = observed
    run.check(f"{label}.observed_le_rate", observed <= cert.rate + CONTRACT_SLACK,
              observed=observed, rate=cert.rate)

    start = _start_measure(cfg.start, dom)
    try:
        res = invariant_measure(K, dom, start, cfg.markov_tol, cfg.max_iter)
    except NotCertifiedError as exc:  # pragma: no cover - certificate checked above
        run.check(f"{label}.invariant_measure", False, error=str(exc))
        return
    alt_start = GridMeasure.point_mass(dom, dom.a) if cfg.start == "uniform" else GridMeasure.base_probability(dom)
    alt = invariant_measure(K, dom, alt_start, cfg.markov_tol, cfg.max_iter)
    gap = tv_distance(res.pi, alt.pi)
    section.update(res.to_dict())
    section["start_snap_distance"] = start.snap_distance
    section["uniqueness_tv_gap"] = gap
    section["forward_spread"] = forward_spread(K, dom, GridFunction.from_callable(dom, lambda x: x), 10)
    run.check(f"{label}.converged", res.converged, iterations=res.iterations)
    run.check(f"{label}.residual_le_tol", res.residual <= cfg.markov_tol, residual=res.residual)
    worst = max(res.rate_history, default=0.0)
    run.check(f"{label}.rate_history_le_rate", worst <= cert.rate + CONTRACT_SLACK, worst=worst)
    run.check(f"{label}.unique", gap <= 2 * cfg.markov_tol / (1 - cert.rate), gap=gap)
    pi = res.pi
    csv_name = f"{label}.csv"
    section["pi_csv_path"] = csv_name
    run.files[csv_name] = csv_text(
        ["x", "mass", "density"], zip(dom.points, pi.masses, pi.density(dom))
    )


def _start_measure(spec: str, dom) -> GridMeasure:
    if spec == "uniform":
        return GridMeasure.base_probability(dom)
    return GridMeasure.point_mass(dom, float(spec.partition(":")[2]))


def run_all_paper(run: Run, cfg: ExperimentConfig) -> None:
    ws = paper_weight()
    K = CompactWindow(-10.0, 10.0, 4001)
    base = ExperimentConfig(command="all-paper", n_max=60, tol=1e-2)
    tr = _certificate(run, "transitivity", base, ws, K)
    _certificate(run, "cosine", base, ws, K)
    _certificate(run, "chaos", base, ws, K)
    ratio = tr.estimated_ratio
    run.check("transitivity.decay_ratio", ratio is not None and abs(ratio - 0.5) <= 1e-3, ratio=ratio)
    markov_cfg = ExperimentConfig(command="markov", seed=cfg.seed, trials=cfg.trials)
    run_markov(run, markov_cfg)
    sec = run.sections.get("markov", {})
    run.check("markov.rate_le_pi_over_4", sec.get("rate", math.inf) <= math.pi / 4 + CONTRACT_SLACK,
              rate=sec.get("rate"))
    run.files["all-paper.csv"] = csv_text(
        ["contract", "passed"], [[c["name"], c["passed"]] for c in run.contracts]
    )


def run(cfg: ExperimentConfig) -> Run:
    r = Run()
    c = cfg.command
    if c in ("transitivity", "cosine", "chaos"):
        _certificate(r, c, cfg)
    elif c == "mixing":
        run_mixing(r, cfg)
    elif c == "periodic":
        run_periodic(r, cfg)
    elif c == "markov":
        run_markov(r, cfg)
    elif c == "all-paper":
        run_all_paper(r, cfg)
    return r


def _thread_limit():
    raw = os.environ.get("MEASURE_DYN_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MEASURE_DYN_THREADS must be an integer, got {raw!r}") from None
    if n <= 0:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def execute(command: str, config_path, overrides, out_dir) -> int:
    try:
        cfg = load_config(command, config_path, overrides or [])
        limit = _thread_limit()
    except ConfigError as exc:
        print(f"measure-dyn: invalid config: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    with limit:
        result = run(cfg)
    report = {
        "command": command,
        "config": cfg.to_dict(),
        "passed": result.passed,
        "contracts": result.contracts,
        "results": result.sections,
        "wall_clock_s": time.perf_counter() - t0,
        "versions": {
            "measure_dyn": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    out = Path(out_dir)
    for name, text in result.files.items():
        write_atomic(out / name, text)
    write_atomic(out / "report.json", json_text(report))
    if not result.passed:
        failed = [c["name"] for c in result.contracts if not c["passed"]]
        print(f"measure-dyn: contract failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="measure-dyn",
        description="Run operator-dynamics certificates and experiments; write report.json and CSVs.",
        epilog="exit status: 0 all contracts hold, 1 a contract failed, 2 invalid config",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field (dotted keys for nested fields; JSON values)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return execute(args.command, args.config, args.overrides, args.out)


if __name__ == "__main__":
    sys.exit(main())
