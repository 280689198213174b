"""Scenario configuration, run orchestration, persistence, and the CLI.

Scenarios are configured by versioned JSON documents validated against
:data:`CONFIG_SCHEMA` (side conditions on the energy-weight constants are
checked by name, so a violated inequality is reported verbatim).  The
five scenarios are

* ``background_check`` — residual audit of the attractor fixed point,
* ``modes`` — eigenvalue sweep of the linear perturbation oscillators,
* ``homogeneous`` — the reduced kinetic cosmology with its monitors,
* ``characteristics`` — mass-shell-conserving geodesic transport with
  the momentum-support envelope,
* ``full_report`` — homogeneous matter plus the vacuum mode sector,
  feeding every run monitor (smallness, total-energy decay,
  continuation, completeness).

Outputs are a per-scenario CSV log and a JSON report, both byte-stable
for a fixed ``(config, seed)`` pair; the process exit code is 0 exactly
when every enabled monitor holds (``--strict`` additionally enforces a
margin floor).  The ``MILNE_LAB_THREADS`` environment variable caps
particle-level parallelism.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry, matter, modes, homogeneous, transport, energies
from .geometry import (BACKGROUND_LAPSE, background_geometry, make_time_frame,
                       rescaled_christoffels, correction_constants)
from .massshell import compute_p0, mass_shell_residual

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "RunLog",
    "CONFIG_SCHEMA",
    "REPORT_SCHEMA",
    "validate_config",
    "validate_report",
    "run_scenario",
    "emit_report",
    "main",
]

SCENARIOS = ("background_check", "modes", "homogeneous", "characteristics",
             "full_report")

CONFIG_SCHEMA = {
    "schemaVersion": 1,
    "fields": {
        "schemaVersion": {"type": "int", "default": 1},
        "scenario": {"type": "str", "required": True, "choices": SCENARIOS},
        "seed": {"type": "int", "required": True},
        "tau0": {"type": "float", "default": -1.0},
        "T0": {"type": "float", "default": 0.0},
        "Tend": {"type": "float", "default": 5.0},
        "h": {"type": "float", "default": 1e-3},
        "lambdaGrid": {"type": "list[float]",
                       "default": [1.0 / 9.0, 0.2, 5.0 / 9.0, 1.0, 2.0]},
        "epsPrime": {"type": "float", "default": 1.0 / 900.0},
        "deltaAlpha": {"type": "float", "default": 0.0},
        "deltaE": {"type": "float", "default": 0.05},
        "deltaEcal": {"type": "float", "default": 0.9},
        "epsDecay": {"type": "float", "default": 0.2},
        "epsTot": {"type": "float", "default": 0.05},
        "epsLoc": {"type": "float", "default": 0.1},
        "smallnessDelta": {"type": "float", "default": 0.5},
        "radialNodes": {"type": "int", "default": 257},
        "quadNodes": {"type": "int", "default": 96},
        "particleCount": {"type": "int", "default": 1000},
        "perturbationEps": {"type": "float", "default": 1e-3},
        "matterAmp": {"type": "float", "default": 2e-4},
        "matterQmax": {"type": "float", "default": 2.0},
        "modeAmp": {"type": "float", "default": 1e-2},
        "gronwallC": {"type": "float", "default": 10.0},
        "logEvery": {"type": "int", "default": 10},
        "strictMarginFloor": {"type": "float", "default": 0.0},
        "out": {"type": "str", "default": None},
    },
}

REPORT_SCHEMA = {
    "schemaVersion": 1,
    "required": ["schemaVersion", "scenario", "seed", "ok", "monitors",
                 "summary"],
    "monitor_fields": ["holds"],
}


class ConfigError(ValueError):
    """Configuration rejected; the message names the violated condition."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario configuration (see :data:`CONFIG_SCHEMA`)."""

    scenario: str
    seed: int
    schemaVersion: int = 1
    tau0: float = -1.0
    T0: float = 0.0
    Tend: float = 5.0
    h: float = 1e-3
    lambdaGrid: tuple = (1.0 / 9.0, 0.2, 5.0 / 9.0, 1.0, 2.0)
    epsPrime: float = 1.0 / 900.0
    deltaAlpha: float = 0.0
    deltaE: float = 0.05
    deltaEcal: float = 0.9
    epsDecay: float = 0.2
    epsTot: float = 0.05
    epsLoc: float = 0.1
    smallnessDelta: float = 0.5
    radialNodes: int = 257
    quadNodes: int = 96
    particleCount: int = 1000
    perturbationEps: float = 1e-3
    matterAmp: float = 2e-4
    matterQmax: float = 2.0
    modeAmp: float = 1e-2
    gronwallC: float = 10.0
    logEvery: int = 10
    strictMarginFloor: float = 0.0
    out: Optional[str] = None


def _named_check(cond: bool, name: str, detail: str) -> None:
    if not cond:
        raise ConfigError(f"config error [{name}]: {detail}")


def validate_config(raw) -> ScenarioConfig:
    """Parse and validate a configuration document.

    ``raw`` may be a JSON string or an already-decoded mapping.  Unknown
    keys are rejected, defaults are filled in, and every side condition
    is checked with a named error, including the energy-weight
    inequalities ``deltaE < 1/2``, ``deltaEcal > 1/2``,
    ``deltaE + deltaEcal < 1`` and the decay-budget conditions
    ``1 - 2 deltaAlpha - deltaE - epsTot > 1 - epsDecay`` and
    ``deltaEcal - epsTot > 1 - epsDecay``.
    """
    if isinstance(raw, (str, bytes)):
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config error [json]: {exc}") from exc
    else:
        data = dict(raw)
    if not isinstance(data, dict):
        raise ConfigError("config error [json]: top level must be an object")
    fields = CONFIG_SCHEMA["fields"]
    unknown = sorted(set(data) - set(fields))
    _named_check(not unknown, "unknown-keys", f"unrecognised keys {unknown}")
    for name, spec in fields.items():
        if spec.get("required") and name not in data:
            raise ConfigError(f"config error [missing]: {name!r} is required")
    merged = {name: data.get(name, spec.get("default"))
              for name, spec in fields.items()}

    _named_check(merged["schemaVersion"] == CONFIG_SCHEMA["schemaVersion"],
                 "schemaVersion",
                 f"expected {CONFIG_SCHEMA['schemaVersion']}, "
                 f"got {merged['schemaVersion']}")
    _named_check(merged["scenario"] in SCENARIOS, "scenario",
                 f"scenario must be one of {SCENARIOS}, got "
                 f"{merged['scenario']!r}")
    for name in ("seed", "radialNodes", "quadNodes", "particleCount",
                 "logEvery"):
        _named_check(isinstance(merged[name], int)
                     and not isinstance(merged[name], bool),
                     name, f"{name} must be an integer")
    c = dict(merged)
    _named_check(c["tau0"] < 0.0, "tau0 < 0", f"tau0={c['tau0']}")
    _named_check(c["h"] > 0.0, "h > 0", f"h={c['h']}")
    _named_check(c["Tend"] > c["T0"], "Tend > T0",
                 f"T0={c['T0']}, Tend={c['Tend']}")
    _named_check(0.0 < c["deltaE"] < 0.5, "deltaE < 1/2",
                 f"deltaE={c['deltaE']} (deltaE < 1/2 required)")
    _named_check(c["deltaEcal"] > 0.5, "deltaEcal > 1/2",
                 f"deltaEcal={c['deltaEcal']}")
    _named_check(c["deltaE"] + c["deltaEcal"] < 1.0, "deltaE + deltaEcal < 1",
                 f"sum={c['deltaE'] + c['deltaEcal']}")
    _named_check(0.0 < c["epsDecay"] < 1.0, "0 < epsDecay < 1",
                 f"epsDecay={c['epsDecay']}")
    lhs1 = 1.0 - 2.0 * c["deltaAlpha"] - c["deltaE"] - c["epsTot"]
    _named_check(lhs1 > 1.0 - c["epsDecay"],
                 "1 - 2 deltaAlpha - deltaE - epsTot > 1 - epsDecay",
                 f"lhs={lhs1}, rhs={1.0 - c['epsDecay']}")
    lhs2 = c["deltaEcal"] - c["epsTot"]
    _named_check(lhs2 > 1.0 - c["epsDecay"],
                 "deltaEcal - epsTot > 1 - epsDecay",
                 f"lhs={lhs2}, rhs={1.0 - c['epsDecay']}")
    lam = tuple(float(v) for v in c["lambdaGrid"])
    _named_check(len(lam) > 0 and all(v >= 1.0 / 9.0 - 1e-12 for v in lam),
                 "lambdaGrid >= 1/9", f"lambdaGrid={lam}")
    _named_check(0.0 < c["epsPrime"] < 1.0 / 9.0, "0 < epsPrime < 1/9",
                 f"epsPrime={c['epsPrime']}")
    for name in ("radialNodes", "quadNodes", "particleCount", "logEvery"):
        _named_check(c[name] > 0, f"{name} > 0", f"{name}={c[name]}")
    c["lambdaGrid"] = lam
    c["out"] = None if c["out"] is None else str(c["out"])
    return ScenarioConfig(**c)


@dataclass
class RunLog:
    """Append-only per-step table with a strictly increasing time column."""

    columns: list
    rows: list = field(default_factory=list)

    def append(self, row) -> None:
        row = list(row)
        if len(row) != len(self.columns):
            raise ValueError("row width does not match the columns")
        if "T" in self.columns and self.rows:
            i = self.columns.index("T")
            if not row[i] > self.rows[-1][i]:
                raise ValueError("time column must be strictly increasing")
        self.rows.append(row)

    def extend(self, rows) -> None:
        for row in rows:
            self.append(row)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows], dtype=float)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def _thread_budget() -> int:
    raw = os.environ.get("MILNE_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(
            f"config error [MILNE_LAB_THREADS]: not an integer: {raw!r}"
        ) from exc
    return max(1, n)


def _matter_profile(cfg: ScenarioConfig):
    amp, qmax = cfg.matterAmp, cfg.matterQmax
    prof = lambda q: amp * np.maximum(0.0, 1.0 - (q / qmax) ** 2)
    return matter.RadialDistribution(grid=np.linspace(0.0, qmax, 200),
                                     qmax=qmax, profile=prof)


def _run_background_check(cfg: ScenarioConfig) -> dict:
    frame = make_time_frame(cfg.tau0, cfg.T0)
    geom = background_geometry()
    blocks = rescaled_christoffels(geom, frame)
    checks = {
        "gamma_star": float(np.max(np.abs(blocks["gamma_star"]))),
        "gamma_star_star": float(np.max(np.abs(blocks["gamma_star_star"]))),
    }
    # homogeneous evolution right-hand side at the vacuum fixed point
    N0 = homogeneous.solve_lapse_algebraic(0.0, 0.0)
    checks["scale_factor_rhs"] = abs(2.0 * (N0 / 3.0 - 1.0) * 1.0)
    drho, dj = matter.continuity_rhs(0.0, np.zeros(3), geom, frame, 0.0)
    checks["continuity_rho_rhs"] = abs(drho)
    checks["continuity_j_rhs"] = float(np.max(np.abs(dj)))
    du, dw = modes.mode_rhs(0.0, 0.0, 5.0 / 9.0, cfg.T0)
    checks["mode_rhs"] = max(abs(du), abs(dw))
    rng = np.random.default_rng(cfg.seed)
    p = rng.normal(size=(min(cfg.particleCount, 256), 3))
    p0 = compute_p0(geom, p, frame, method="paper_primary")
    checks["massshell_residual"] = float(
        np.max(np.abs(mass_shell_residual(geom, p, p0, frame))))
    checks["hamiltonian_b_minus_1"] = abs(
        homogeneous.hamiltonian_constraint_b(0.0, frame) - 1.0)

    log = RunLog(columns=["check", "residual"])
    for name, val in sorted(checks.items()):
        log.rows.append([name, val])
    lapse_exact = (N0 == BACKGROUND_LAPSE)
    worst = max(checks.values())
    monitors = {"fixed_point": {"holds": bool(worst < 1e-12),
                                "margin": 1e-12 - worst},
                "algebraic_lapse_exact": {"holds": bool(lapse_exact),
                                          "value": N0}}
    ok = monitors["fixed_point"]["holds"] and lapse_exact
    return {"log": log, "monitors": monitors,
            "summary": {"worst_residual": worst, "lapse": N0}, "ok": ok}


def _run_modes(cfg: ScenarioConfig) -> dict:
    n_steps = max(1000, int(round((cfg.Tend - cfg.T0) / cfg.h)))
    rows = modes.mode_sweep(cfg.lambdaGrid, T_span=(cfg.T0, cfg.Tend),
                            n_steps=n_steps, eps_prime=cfg.epsPrime)
    log = RunLog(columns=modes.MODE_CSV_COLUMNS)
    log.rows = rows
    per_mode = {}
    for lam, alpha, cE, rate, min_eig, max_violation in rows:
        if lam > 1.0 / 9.0 + 1e-12:
            holds = abs(rate - 2.0) <= 0.02 and max_violation <= 1e-12
        else:
            holds = max_violation <= 1e-12 and rate >= 2.0 * alpha - 0.05
        per_mode[f"lambda={lam:.6g}"] = {
            "holds": bool(holds and min_eig > 0.0),
            "fitted_rate": rate, "alpha": alpha, "cE": cE,
            "min_quadform_eig": min_eig, "max_violation": max_violation}
    monitors = {"rate_table": {"holds": all(v["holds"]
                                            for v in per_mode.values()),
                               "modes": per_mode}}
    return {"log": log, "monitors": monitors,
            "summary": {"n_modes": len(rows)},
            "ok": monitors["rate_table"]["holds"]}


def _fit_window(T: np.ndarray) -> tuple:
    """Fit on the late part of the run, past the order-one transient."""
    lo = T[0] + 0.4 * (T[-1] - T[0])
    return (float(lo), float(T[-1]))


def _homogeneous_run(cfg: ScenarioConfig):
    f0 = _matter_profile(cfg)
    span = cfg.Tend - cfg.T0
    n_steps = max(cfg.logEvery, int(round(span / max(cfg.h, 1e-3))))
    n_steps += (-n_steps) % cfg.logEvery
    return homogeneous.evolve_homogeneous(
        f0, tau0=cfg.tau0, T_end=span, n_steps=n_steps, n_q=cfg.radialNodes,
        log_every=cfg.logEvery, n_nodes=cfg.quadNodes)


def _homogeneous_series(cfg: ScenarioConfig, run) -> dict:
    s0 = abs(cfg.tau0)
    return {
        "T": run.T, "s": s0 * np.exp(-run.T), "N": run.N, "b": run.b_ode,
        "rho": run.rho, "eta_under": run.eta_under,
        "sasaki54sq": run.E_report**2,
    }


def _monitor_config(cfg: ScenarioConfig) -> dict:
    return {"epsDecay": cfg.epsDecay, "epsTot": cfg.epsTot,
            "epsLoc": cfg.epsLoc, "smallnessDelta": cfg.smallnessDelta,
            "deltaE": cfg.deltaE, "deltaEcal": cfg.deltaEcal}


def _decay_summary(cfg: ScenarioConfig, run) -> dict:
    s = abs(cfg.tau0) * np.exp(-run.T)
    window = _fit_window(run.T)
    lapse_fit = energies.decay_fit(run.T, np.abs(run.N - 3.0), window=window)
    eta_fit = energies.decay_fit(run.T, s**2 * run.eta_under, window=window)
    mask = run.T >= run.T[-1] - 1.0
    rho_final = run.rho[mask]
    rho_drift = float(abs(rho_final[-1] - rho_final[0]) / rho_final[-1])
    return {
        "lapse_rate": lapse_fit.rate,
        "tau2_eta_under_rate": eta_fit.rate,
        "rho_drift_per_efold": rho_drift,
        "fit_window": list(window),
        "constraint_defect": float(np.max(np.abs(run.b_ode
                                                 - run.b_constraint))),
        "continuity_defect": float(np.max(np.abs(run.rho - run.rho_cont))),
    }


def _run_homogeneous(cfg: ScenarioConfig) -> dict:
    run = _homogeneous_run(cfg)
    log = RunLog(columns=homogeneous.HOMOGENEOUS_CSV_COLUMNS)
    log.rows = run.rows()
    if not run.completed:
        return {"log": log, "monitors": {},
                "summary": {"abort": run.abort_reason}, "ok": False}
    mons = energies.monitors(_homogeneous_series(cfg, run),
                             _monitor_config(cfg))
    summary = _decay_summary(cfg, run)
    summary["b0"] = run.b0
    ok = run.completed and all(m["holds"] for m in mons.values())
    return {"log": log, "monitors": mons, "summary": summary, "ok": ok}


def _run_characteristics(cfg: ScenarioConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.particleCount
    ens = transport.ParticleEnsemble(
        x=rng.uniform(-1.2, 1.2, size=(n, 3)),
        p=rng.normal(scale=0.7, size=(n, 3)),
        weights=np.full(n, 1.0 / n))
    frame0 = make_time_frame(cfg.tau0, cfg.T0)
    provider = transport.manufactured_lapse_fields(cfg.perturbationEps)
    threads = _thread_budget()
    log_t, _ = transport.integrate_characteristics(
        ens, provider, frame0, cfg.Tend, cfg.h, mode="derived",
        log_every=max(1, int(round(0.05 / cfg.h))), threads=threads)
    norms = {key: np.array([provider.norm_envelopes[key](t) for t in log_t.T])
             for key in ("X", "Sigma", "Nm3", "dTX", "GammaStar",
                         "GammaStarStar")}
    norms["tau0_abs"] = abs(cfg.tau0)
    gron = transport.support_bound_check(log_t.T, log_t.calG, norms,
                                         C=cfg.gronwallC)
    max_res = float(np.max(np.abs(log_t.massshell_residual)))
    flagged = int(np.sum(log_t.flagged))
    monitors = {
        "massshell": {"holds": bool(max_res < 1e-8 and flagged == 0),
                      "max_residual": max_res, "flagged": flagged},
        "support_envelope": {"holds": gron["holds"],
                             "margin": gron["margin"]},
    }
    log = RunLog(columns=["T", "calG", "max_residual", "envelope"])
    res_by_step = np.max(np.abs(log_t.massshell_residual), axis=1)
    log.rows = [[float(t), float(g), float(r), float(e)]
                for t, g, r, e in zip(log_t.T, log_t.calG, res_by_step,
                                      gron["envelope"])]
    ok = all(m["holds"] for m in monitors.values())
    return {"log": log, "monitors": monitors,
            "summary": {"max_residual": max_res, "flagged": flagged,
                        "final_calG": float(log_t.calG[-1])}, "ok": ok}


def _run_full_report(cfg: ScenarioConfig) -> dict:
    run = _homogeneous_run(cfg)
    if not run.completed:
        return {"log": RunLog(columns=homogeneous.HOMOGENEOUS_CSV_COLUMNS),
                "monitors": {}, "summary": {"abort": run.abort_reason},
                "ok": False}
    # vacuum mode sector integrated on the same log grid
    a = cfg.modeAmp
    mode_runs = []
    n_steps = max(2000, 20 * (run.T.size - 1))
    for lam in cfg.lambdaGrid:
        traj = modes.integrate_mode(lam, a, -a, (float(run.T[0]),
                                                 float(run.T[-1])),
                                    n_steps, eps_prime=cfg.epsPrime)
        mode_runs.append(traj)
    stride = n_steps // (run.T.size - 1)
    E6 = np.zeros_like(run.T)
    g_norm_sq = np.zeros_like(run.T)
    for traj in mode_runs:
        u = traj.u[::stride]
        w = traj.w[::stride]
        E6 += modes.corrected_energy(u, w, traj.lam, traj.constants, order=6)
        g_norm_sq += 4.5 * traj.lam * u**2

    series = _homogeneous_series(cfg, run)
    series["E6"] = E6
    mons = energies.monitors(series, _monitor_config(cfg))

    summary = _decay_summary(cfg, run)
    window = _fit_window(run.T)
    g_fit = energies.decay_fit(run.T, np.sqrt(g_norm_sq), window=window)
    summary["mode_metric_rate"] = g_fit.rate
    summary["mode_metric_rate_floor"] = 1.0 - cfg.deltaE - 0.05
    summary["Etot_T0"] = mons["totalDecay"]["Etot0"]

    log = RunLog(columns=homogeneous.HOMOGENEOUS_CSV_COLUMNS + ["E6"])
    log.rows = [row + [float(e)] for row, e in zip(run.rows(), E6)]
    rates_ok = (abs(summary["lapse_rate"] - 1.0) <= 0.1
                and abs(summary["tau2_eta_under_rate"] - 2.0) <= 0.1
                and summary["rho_drift_per_efold"] < 0.01
                and g_fit.rate >= summary["mode_metric_rate_floor"])
    mons["decay_rates"] = {"holds": bool(rates_ok),
                           "lapse_rate": summary["lapse_rate"],
                           "tau2_eta_under_rate":
                               summary["tau2_eta_under_rate"],
                           "rho_drift_per_efold":
                               summary["rho_drift_per_efold"],
                           "mode_metric_rate": g_fit.rate}
    ok = all(m["holds"] for m in mons.values())
    return {"log": log, "monitors": mons, "summary": summary, "ok": ok}


_RUNNERS = {
    "background_check": _run_background_check,
    "modes": _run_modes,
    "homogeneous": _run_homogeneous,
    "characteristics": _run_characteristics,
    "full_report": _run_full_report,
}


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Dispatch a validated configuration to its scenario runner.

    Returns ``{"log": RunLog, "monitors": ..., "summary": ..., "ok": bool,
    "config": cfg}``; deterministic for fixed ``(config, seed)``.
    """
    result = _RUNNERS[cfg.scenario](cfg)
    result["config"] = cfg
    return result


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def validate_report(report: dict) -> None:
    """Self-test a JSON report against :data:`REPORT_SCHEMA`."""
    for key in REPORT_SCHEMA["required"]:
        if key not in report:
            raise ValueError(f"report missing required key {key!r}")
    if report["schemaVersion"] != REPORT_SCHEMA["schemaVersion"]:
        raise ValueError("report schema version mismatch")
    for name, mon in report["monitors"].items():
        for fld in REPORT_SCHEMA["monitor_fields"]:
            if fld not in mon:
                raise ValueError(f"monitor {name!r} missing field {fld!r}")


def emit_report(result: dict, out_dir: str) -> dict:
    """Write the CSV log and JSON report; returns the written paths.

    Floats are serialised with ``repr`` (shortest round-trip form) and
    newlines are fixed to ``\\n``, so outputs are byte-stable for
    identical inputs.
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg = result["config"]
    log = result["log"]
    csv_path = os.path.join(out_dir, f"{cfg.scenario}_log.csv")
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(",".join(log.columns) + "\n")
        for row in log.rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    report = {
        "schemaVersion": REPORT_SCHEMA["schemaVersion"],
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "ok": bool(result["ok"]),
        "monitors": _jsonable(result["monitors"]),
        "summary": _jsonable(result["summary"]),
        # the destination directory is not part of the run's identity
        "config": _jsonable({k: v for k, v in dataclasses.asdict(cfg).items()
                             if k != "out"}),
    }
    validate_report(report)
    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"csv": csv_path, "json": json_path}


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

_CLI_SCENARIOS = {
    "background-check": "background_check",
    "modes": "modes",
    "homogeneous": "homogeneous",
    "characteristics": "characteristics",
    "report": "full_report",
}


def _strict_margins(monitors: dict, floor: float) -> list:
    """Names of monitors whose margin falls below the strict floor."""
    failing = []
    for name, mon in monitors.items():
        margin = mon.get("margin")
        if margin is not None and margin < floor:
            failing.append(name)
    return failing


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="milne-lab",
        description="Scenario runner for the kinetic cosmology lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for cli_name in _CLI_SCENARIOS:
        p = sub.add_parser(cli_name)
        p.add_argument("--config", metavar="PATH", default=None,
                       help="JSON configuration file (defaults used if omitted)")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory for CSV/JSON artifacts")
        p.add_argument("--seed", metavar="N", type=int, default=None,
                       help="override the configured RNG seed")
        p.add_argument("--strict", action="store_true",
                       help="fail when any monitor margin is below the "
                            "configured floor")
    args = parser.parse_args(argv)

    raw = {}
    if args.config is not None:
        with open(args.config) as fh:
            raw = json.load(fh)
    raw.setdefault("scenario", _CLI_SCENARIOS[args.command])
    if raw["scenario"] != _CLI_SCENARIOS[args.command]:
        print(f"error: config scenario {raw['scenario']!r} does not match "
              f"subcommand {args.command!r}", file=sys.stderr)
        return 2
    if args.seed is not None:
        raw["seed"] = args.seed
    raw.setdefault("seed", 0)
    if args.out is not None:
        raw["out"] = args.out
    try:
        cfg = validate_config(raw)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2

    result = run_scenario(cfg)
    ok = bool(result["ok"])
    if args.strict and ok:
        failing = _strict_margins(result["monitors"], cfg.strictMarginFloor)
        if failing:
            ok = False
            result["summary"]["strict_failures"] = failing
    if cfg.out is not None:
        paths = emit_report(result, cfg.out)
        print(f"wrote {paths['csv']} and {paths['json']}")
    for name, mon in sorted(result["monitors"].items()):
        state = "ok" if mon.get("holds") else "FAIL"
        margin = mon.get("margin")
        extra = f" margin={margin:.3e}" if margin is not None else ""
        print(f"monitor {name}: {state}{extra}")
    print(f"scenario {cfg.scenario}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
