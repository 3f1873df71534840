"""Command-line front end: analyze, simulate, sector-check and sweep."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cuk, ripple
from .config import RunConfig, load_config, parse_deltas, parse_quantity
from .equiv import classify, find_equilibrium, linearize, reduce
from .errors import (ConfigurationError, DomainError, EquivalentControlSingular, Infeasible,
                     NoCrossing, NoEquilibrium, SmcError, UnsupportedSurface)
from .lmi import certify, verify_certificate
from .sim import ccm_automaton, measure_cycle, record_remainder, simulate

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


@dataclass
class Report:
    """Ordered key/value record written as text and as JSON."""

    values: dict = field(default_factory=dict)
    units: dict = field(default_factory=dict)

    def add(self, key, value, unit=""):
        self.values[key] = _plain(value)
        if unit:
            self.units[key] = unit

    def text(self) -> str:
        lines = []
        for key, value in self.values.items():
            unit = f" [{self.units[key]}]" if key in self.units else ""
            lines.append(f"{key}{unit} = {_render(value)}")
        return "\n".join(lines) + "\n"

    def json(self) -> str:
        return json.dumps({"values": self.values, "units": self.units}, indent=2) + "\n"

    def write(self, directory: Path, stem: str):
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{stem}.txt").write_text(self.text(), encoding="utf-8")
        (directory / f"{stem}.json").write_text(self.json(), encoding="utf-8")


def _plain(value):
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    return value


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    return str(value)


# -- analysis pipeline ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Analysis:
    x_star: np.ndarray
    u_eq: float
    reduced: object
    component: int  # index into the reduced coordinates
    cert: object | None
    r: float | None


def _cuk_ripple_ok(cfg: RunConfig) -> bool:
    return cfg.preset == "cuk" and cfg.m[2] == 0 and cfg.m[3] == 0


def _equilibrium(cfg: RunConfig, report: Report | None):
    system, surface = cfg.system(), cfg.surface()
    if cfg.preset == "cuk" and cfg.guess is None:
        branches = cuk.equilibria(cfg.m, cfg.m5, cfg.params)
        found = [classify(system, surface, b.x_star) for b in branches]
        if found[0].x_star.tolist() == found[1].x_star.tolist():
            found = found[:1]
    else:
        guess = cfg.guess if cfg.guess is not None else np.zeros(cfg.n)
        found = [find_equilibrium(system, surface, guess)]
    if report is not None:
        for i, eq in enumerate(found):
            report.add(f"branch{i + 1}_x_star", eq.x_star, "SI")
            report.add(f"branch{i + 1}_u_eq", eq.u_eq_star)
            report.add(f"branch{i + 1}_tag", eq.branch_tag)
            report.add(f"branch{i + 1}_residual", eq.residual)
    feasible = [eq for eq in found if eq.feasible]
    if not feasible:
        raise NoEquilibrium("no equilibrium with 0 <= u_eq <= 1 on the surface")
    return feasible[0]


def _sector_component(cfg: RunConfig, reduced) -> int:
    state = cfg.sector_state
    if state is None:
        state = cuk.V_C1 + 1 if cfg.preset == "cuk" else int(reduced.keep[0]) + 1
    idx = np.flatnonzero(reduced.keep == state - 1)
    if idx.size == 0:
        raise ConfigurationError(f"[lmi] sector_state: state {state} is eliminated by the surface")
    return int(idx[0])


def run_analysis(cfg: RunConfig, report: Report | None = None) -> Analysis:
    """Equilibrium, linearisation, reduction and sector certificate.

    Raises Infeasible after filling ``report`` when A* is not Hurwitz.
    """
    system, surface = cfg.system(), cfg.surface()
    eq = _equilibrium(cfg, report)
    A1 = linearize(system, surface, eq.x_star)
    eliminate = None if cfg.eliminate is None else cfg.eliminate - 1
    reduced = reduce(system, surface, eq.x_star, A1, eliminate)
    k = _sector_component(cfg, reduced)
    if report is not None:
        report.add("x_star", eq.x_star, "SI")
        report.add("u_eq_star", eq.u_eq_star)
        report.add("A1", A1, "1/s")
        report.add("eig_A1", np.linalg.eigvals(A1), "1/s")
        report.add("eliminated_state", reduced.eliminated_index + 1)
        report.add("A_star", reduced.A_star, "1/s")
        report.add("eig_A_star", np.linalg.eigvals(reduced.A_star), "1/s")
        report.add("sector_state", int(reduced.keep[k]) + 1)
    H = np.zeros_like(reduced.A_star)
    H[k, k] = 1.0
    try:
        cert = certify(reduced.A_star, H, transform=cfg.transform, column=k,
                       margin=cfg.margin, tol=cfg.tol, normalization=cfg.eigvec_norm)
    except Infeasible as exc:
        if report is not None:
            report.add("lmi_status", f"infeasible: {exc}")
            report.add("lmi_max_eig", exc.max_eig)
        raise
    r = cert.r_column if cfg.back_map == "column" else cert.r_full
    if report is not None:
        check = verify_certificate(cert, np.random.default_rng(0).standard_normal((256, H.shape[0])))
        report.add("lmi_status", "feasible")
        report.add("alpha", cert.alpha)
        report.add("alpha_bisection", cert.alpha_bisection)
        report.add("r_tilde", cert.r_tilde, "1/s")
        report.add("r_full", cert.r_full, "1/s")
        report.add("r_column", cert.r_column, "1/s")
        report.add("r", r, "1/s")
        report.add("back_map", cfg.back_map)
        report.add("eigvec_norm", cfg.eigvec_norm)
        report.add("lmi_max_eig", cert.lmi_max_eig)
        report.add("lmi_iterations", cert.iterations)
        report.add("certificate_verified", bool(check.ok))
        report.add("modal_transform", cert.T)
    return Analysis(eq.x_star, eq.u_eq_star, reduced, k, cert, r)


def cmd_analyze(cfg: RunConfig) -> tuple[Report, int]:
    report = Report()
    report.add("preset", cfg.preset)
    report.add("surface_m", list(cfg.m))
    report.add("surface_m5", cfg.m5)
    report.add("delta", cfg.delta, "S units")
    code = EXIT_OK
    try:
        an = run_analysis(cfg, report)
    except (NoEquilibrium, Infeasible) as exc:
        report.add("status", f"{type(exc).__name__}: {exc}")
        return report, EXIT_INFEASIBLE
    if cfg.preset == "cuk":
        p = cfg.params
        report.add("off_mode_eigenvalues", cuk.off_mode_eigenvalues(p), "1/s")
    if _cuk_ripple_ok(cfg):
        p, surface = cfg.params, cfg.surface()
        try:
            T_S = ripple.switching_period(surface, an.u_eq, p)
            pred = ripple.predict_ripples(T_S, an.u_eq, an.x_star, p)
            report.add("T_S_predicted", pred.T_S, "s")
            report.add("ripple_i_l1_predicted", pred.d_iL1, "A")
            report.add("ripple_i_l2_predicted", pred.d_iL2, "A")
            report.add("ripple_v_c1_predicted", pred.d_vC1, "V")
            report.add("ripple_v_c2_predicted", pred.d_vC2, "V")
            if cfg.dv_c1_max is not None:
                report.add("dv_c1_max_configured", cfg.dv_c1_max, "V")
                report.add("delta_max_configured",
                           ripple.hysteresis_limit(cfg.dv_c1_max, an.x_star, p, surface), "A")
            if int(an.reduced.keep[an.component]) == cuk.V_C1:
                y = ripple.axis_crossing(an.reduced, an.component, an.r)
                dv, dmax = ripple.ripple_limit_from_crossing(y, an.x_star, p, surface)
                report.add("dv_c1_max", dv, "V")
                report.add("delta_max", dmax, "A")
        except (UnsupportedSurface, NoCrossing, ValueError) as exc:
            report.add("ripple_status", f"{type(exc).__name__}: {exc}")
    report.add("status", "ok")
    return report, code


# -- simulation ----------------------------------------------------------------

def _automaton(cfg: RunConfig, surface):
    if cfg.preset == "cuk":
        return cuk.automaton(cfg.params, surface, cfg.realization)
    return ccm_automaton(cfg.system(), surface)


def _initial_state(cfg: RunConfig) -> np.ndarray:
    if isinstance(cfg.x0, tuple):
        return np.array(cfg.x0)
    if cfg.x0 == "origin":
        return np.zeros(cfg.n)
    return _equilibrium(cfg, None).x_star


def run_simulation(cfg: RunConfig, delta: float | None = None):
    surface = cfg.surface(delta)
    trace = simulate(_automaton(cfg, surface), _initial_state(cfg), cfg.u0, cfg.t_end, cfg.sample_dt)
    return trace, measure_cycle(trace)


def write_waveform(trace, cfg: RunConfig, directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    keys = cfg.state_keys
    with open(directory / "waveform.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *keys, "u", "mode"])
        for t, x, u, mode in zip(trace.t.tolist(), trace.x.tolist(), trace.u.tolist(), trace.mode.tolist()):
            w.writerow([repr(t), *map(repr, x), int(u), mode])
    if cfg.preset == "cuk":
        with open(directory / "phase.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i_l1", "i_l2"])
            for a, b in trace.x[:, :2].tolist():
                w.writerow([repr(a), repr(b)])


def _metrics_report(cfg: RunConfig, trace, metrics, delta: float) -> Report:
    rep = Report()
    rep.add("delta", delta, "S units")
    rep.add("realization", cfg.realization)
    rep.add("samples", len(trace))
    rep.add("events", len(trace.events))
    rep.add("modes_visited", sorted(metrics.modes_visited))
    rep.add("converged", metrics.converged)
    rep.add("T_S", metrics.T_S, "s")
    units = ("A", "A", "V", "V") if cfg.preset == "cuk" else ("SI",) * cfg.n
    for key, val, unit in zip(cfg.state_keys, metrics.ripple, units):
        rep.add(f"ripple_{key}", float(val), unit)
    for key, val, unit in zip(cfg.state_keys, metrics.average, units):
        rep.add(f"average_{key}", float(val), unit)
    return rep


def cmd_simulate(cfg: RunConfig) -> tuple[Report, int]:
    trace, metrics = run_simulation(cfg)
    out = Path(cfg.out_dir)
    write_waveform(trace, cfg, out)
    rep = _metrics_report(cfg, trace, metrics, cfg.delta)
    rep.write(out, "metrics")
    return rep, EXIT_OK


# -- sector check --------------------------------------------------------------

@dataclass(frozen=True)
class SectorResult:
    delta: float
    verdict: str
    y: np.ndarray
    h: np.ndarray
    t: np.ndarray
    worst_ratio: float
    metrics: object


def _sector_window(cfg: RunConfig, an: Analysis, delta: float) -> SectorResult:
    trace, metrics = run_simulation(cfg, delta)
    rises = trace.rising_edges()
    empty = np.array([])
    if not metrics.converged or rises.size < cfg.steady_periods + 1:
        return SectorResult(delta, "inconclusive", empty, empty, empty, np.nan, metrics)
    t_from = rises[-(cfg.steady_periods + 1)]
    # the remainder does not depend on the band width
    series = record_remainder(trace, an.reduced, an.component, t_from)
    if series.y.size == 0:
        return SectorResult(delta, "inconclusive", empty, empty, empty, np.nan, metrics)
    nz = series.y != 0
    ratio = float(np.max(np.abs(series.h[nz]) / np.abs(series.y[nz]))) if np.any(nz) else 0.0
    inside = bool(np.all(np.abs(series.h) <= an.r * np.abs(series.y)))
    return SectorResult(delta, "inside" if inside else "violated", series.y, series.h, series.t,
                        ratio, metrics)


def _sector_worker(args):
    cfg, an, delta = args
    try:
        return _sector_window(cfg, an, delta)
    except (SmcError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return exc


def _pool_map(fn, items):
    workers = min(len(items), os.cpu_count() or 1)
    if workers <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_sector_check(cfg: RunConfig, deltas) -> tuple[Report, int]:
    deltas = tuple(deltas)
    if not deltas:
        raise ConfigurationError("sector-check needs at least one delta")
    report = Report()
    an = run_analysis(cfg)
    report.add("r_tilde", an.cert.r_tilde, "1/s")
    report.add("r", an.r, "1/s")
    report.add("back_map", cfg.back_map)
    results = _pool_map(_sector_worker, [(cfg, an, d) for d in deltas])
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    code = EXIT_OK
    all_y, all_h = [], []
    with open(out / "sector.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta", "t", "y", "h", "r_tilde_bound", "r_bound", "verdict"])
        for d, res in zip(deltas, results):
            tag = f"delta_{d!r}"
            if isinstance(res, Exception):
                report.add(f"{tag}_verdict", f"error: {type(res).__name__}: {res}")
                code = max(code, EXIT_NUMERICAL)
                continue
            report.add(f"{tag}_verdict", res.verdict)
            report.add(f"{tag}_max_ratio", res.worst_ratio, "1/s")
            report.add(f"{tag}_T_S", res.metrics.T_S, "s")
            if res.verdict == "inconclusive":
                code = max(code, EXIT_INFEASIBLE)
                continue
            all_y.append(res.y)
            all_h.append(res.h)
            for t, y, h in zip(res.t.tolist(), res.y.tolist(), res.h.tolist()):
                inside = "inside" if abs(h) <= an.r * abs(y) else "violated"
                w.writerow([repr(d), repr(t), repr(y), repr(h), repr(an.cert.r_tilde * abs(y)),
                            repr(an.r * abs(y)), inside])
    if all_y and _cuk_ripple_ok(cfg) and int(an.reduced.keep[an.component]) == cuk.V_C1:
        try:
            y = ripple.estimate_linear_ripple_limit(np.concatenate(all_y), np.concatenate(all_h), an.r)
            dv, dmax = ripple.ripple_limit_from_crossing(y, an.x_star, cfg.params, cfg.surface())
            report.add("crossing_y", y, "V")
            report.add("dv_c1_max", dv, "V")
            report.add("delta_max", dmax, "A")
        except NoCrossing:
            report.add("crossing_y", "none")
    report.write(out, "sector")
    return report, code


# -- sweep ---------------------------------------------------------------------

SWEEP_HEADER = ["delta", "T_S_predicted", "T_S_measured",
                "ripple_i_l1_predicted", "ripple_i_l1_measured",
                "ripple_i_l2_predicted", "ripple_i_l2_measured",
                "ripple_v_c1_predicted", "ripple_v_c1_measured",
                "ripple_v_c2_predicted", "ripple_v_c2_measured",
                "sector_ok", "status"]


def _sweep_row(args):
    cfg, an, delta = args
    row = {k: "" for k in SWEEP_HEADER}
    row["delta"] = repr(delta)
    try:
        if _cuk_ripple_ok(cfg):
            T_S = ripple.switching_period(cfg.surface(delta), an.u_eq, cfg.params)
            pred = ripple.predict_ripples(T_S, an.u_eq, an.x_star, cfg.params)
            row["T_S_predicted"] = repr(pred.T_S)
            for key, val in zip(cuk.STATE_KEYS, (pred.d_iL1, pred.d_iL2, pred.d_vC1, pred.d_vC2)):
                row[f"ripple_{key}_predicted"] = repr(float(val))
        res = _sector_window(cfg, an, delta)
        m = res.metrics
        row["T_S_measured"] = repr(float(m.T_S))
        if cfg.preset == "cuk":
            for key, val in zip(cuk.STATE_KEYS, m.ripple):
                row[f"ripple_{key}_measured"] = repr(float(val))
        row["sector_ok"] = {"inside": "yes", "violated": "no"}.get(res.verdict, "")
        row["status"] = "ok" if res.verdict != "inconclusive" else "not_converged"
    except (SmcError, np.linalg.LinAlgError, FloatingPointError) as exc:
        row["status"] = f"error:{type(exc).__name__}"
    return row


def cmd_sweep(cfg: RunConfig, deltas) -> tuple[Report, int]:
    deltas = tuple(deltas)
    if not deltas:
        raise ConfigurationError("sweep needs at least one delta")
    an = run_analysis(cfg)
    rows = _pool_map(_sweep_row, [(cfg, an, d) for d in deltas])
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    report = Report()
    report.add("rows", len(rows))
    report.add("succeeded", sum(r["status"] == "ok" for r in rows))
    code = EXIT_OK if any(r["status"] == "ok" for r in rows) else EXIT_INFEASIBLE
    if any(r["status"].startswith("error") for r in rows) and code != EXIT_OK:
        code = EXIT_NUMERICAL
    return report, code


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smclmi", description=__doc__)
    parser.add_argument("command", choices=["analyze", "simulate", "sector-check", "sweep"])
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--delta", help="hysteresis half-width; sector-check and sweep accept "
                        "a list '1m,10m' or a log range 'start:stop:count'")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--realization", choices=["uni", "bi"])
    parser.add_argument("--paper-literal-capacitors", action="store_true",
                        help="use C1 = 1 nF and C2 = 20 nF")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    multi = args.command in ("sector-check", "sweep")
    try:
        cfg = load_config(args.config)
        deltas = None
        if multi:
            deltas = parse_deltas(args.delta) if args.delta else (cfg.delta,)
            cfg = cfg.with_overrides(None, args.out, args.realization, args.paper_literal_capacitors)
        else:
            delta = parse_quantity(args.delta, "--delta") if args.delta else None
            cfg = cfg.with_overrides(delta, args.out, args.realization, args.paper_literal_capacitors)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "analyze":
            report, code = cmd_analyze(cfg)
            report.write(Path(cfg.out_dir), "report")
        elif args.command == "simulate":
            report, code = cmd_simulate(cfg)
        elif args.command == "sector-check":
            report, code = cmd_sector_check(cfg, deltas)
        else:
            report, code = cmd_sweep(cfg, deltas)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoEquilibrium, Infeasible) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SmcError, EquivalentControlSingular, DomainError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    sys.stdout.write(report.text())
    return code


if __name__ == "__main__":
    sys.exit(main())
