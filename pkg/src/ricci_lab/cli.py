"""Command-line front end.

Four subcommands:

* ``verify``     -- run the residual suite for one catalog geometry
* ``identities`` -- integral identities and eigenvalue extraction on
                    the unit sphere, with a quadrature convergence table
* ``flow``       -- self-similar solution checks and the grid
                    integrator, optionally against the gauge-fixed flow
* ``report``     -- the full battery, written to a directory as JSON +
                    CSV + figures

Exit codes: 0 all checks passed, 1 at least one check failed, 2 usage
error (unknown subcommand, unknown geometry, malformed flags), 3 a
parameter violated its documented range. The ``RICCI_LAB_THREADS``
environment variable caps worker threads for the report battery;
everything stays in one process.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, catalog, figures, flow
from .quadrature import integrate, sphere_rule
from .report import (ReportEnvelope, RunConfig, trajectory_csv, write_text)
from .util import FlowAbort, ParameterError, WindowError, parallel_map
from .verify import (INTEGRAL_TOL, POINTWISE_TOL, EIGEN_TOL, ResidualReport,
                     bochner_stokes_check, eigen_equality_check,
                     integral_identity_check, ricci_lower_bound_and_diameter,
                     verify_suite)

# Short geometry aliases accepted on the command line.
ALIASES = {
    "berger": "berger-soliton",
    "warped": "warped-soliton",
    "obata": "obata-sphere",
    "witness": "non-gradient-witness",
}

GEOMETRY_PARAM_KEYS = ("kappa", "tau", "m", "lam", "n", "r", "theta",
                       "c1", "c2", "a", "b", "v", "w")

TRAJ_HELP = ("trajectory CSV path; columns are t,node,x1,A,W,phi_1..phi_n "
             "with one row per grid node per stored time, W the full "
             "fiber coefficient g_22(x1)")

# Exact reference values for the quadrature convergence witness
# integral(1 / (2 + h)) over the unit sphere, h the last-axis height.
_WITNESS_EXACT = {2: 2.0 * np.pi * np.log(3.0),
                  3: 4.0 * np.pi ** 2 * (2.0 - np.sqrt(3.0))}
_VOLUME_EXACT = {2: 4.0 * np.pi, 3: 2.0 * np.pi ** 2}

# Errors below this are round-off noise; the monotonicity check treats
# them as equal.
_NOISE_FLOOR = 1e-13


def _floats(text):
    """Parse a comma-separated float list; single values stay scalars."""
    if isinstance(text, (int, float)):
        return float(text)
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    parts = [p for p in str(text).split(",") if p.strip()]
    vals = [float(p) for p in parts]
    return vals[0] if len(vals) == 1 else vals


def _load_config(args, parser_dests) -> dict:
    if not getattr(args, "config", None):
        return {}
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, ValueError) as exc:
        raise _UsageError(f"cannot read config {args.config}: {exc}")
    if not isinstance(cfg, dict):
        raise _UsageError("config file must hold a JSON object")
    unknown = sorted(set(cfg) - parser_dests)
    if unknown:
        raise _UsageError(
            f"unknown config key(s): {', '.join(unknown)}")
    return cfg


class _UsageError(Exception):
    pass


def _resolve(args, defaults: dict) -> dict:
    """Merge CLI values over config-file values over defaults.

    Every option is declared with ``default=None`` so an unset flag is
    distinguishable from an explicit one; the config file fills the gap,
    then the canonical default.
    """
    dests = set(defaults) | {"config"}
    cfg = _load_config(args, dests)
    out = {}
    for dest, default in defaults.items():
        val = getattr(args, dest, None)
        if val is None:
            val = cfg.get(dest, default)
        out[dest] = val
    return out


def _print_records(records) -> None:
    for rec in records:
        rec = rec.as_dict() if hasattr(rec, "as_dict") else rec
        if "passed" not in rec or rec.get("passed") is None:
            status = " info"
        else:
            status = " PASS" if rec["passed"] else " FAIL"
        value = rec.get("value")
        cmp_ = rec.get("comparison", "<=")
        tol = rec.get("tol")
        tail = ""
        if value is not None and tol is not None:
            tail = f"{value:12.4e} {cmp_} {tol:g}"
        print(f"{status}  {rec['label']:<34}{tail}")


def _finish(command: str, config: RunConfig, records, t0: float,
            resolved: dict) -> int:
    wall = None if resolved.get("reproducible") else time.perf_counter() - t0
    cfg = config.as_dict()
    if resolved.get("reproducible"):
        cfg["out"] = None   # keep the envelope independent of where it lands
    env = ReportEnvelope(command=command, config=cfg,
                         records=records, version=__version__,
                         wall_clock_s=wall)
    _print_records(records)
    print(f"verdict: {env.verdict}")
    out = resolved.get("out")
    if out:
        write_text(out, env.to_json())
        print(f"report written to {out}")
    figdir = resolved.get("figdir")
    if figdir:
        os.makedirs(figdir, exist_ok=True)
        path = os.path.join(figdir, f"{command}-residuals.png")
        figures.residual_figure(records, path, title=f"{command} residuals")
        print(f"figure written to {path}")
    return 0 if env.verdict == "pass" else 1


# ---------------------------------------------------------------------------
# verify


VERIFY_DEFAULTS = {
    "count": 100, "order": 16, "seed": None, "out": None, "figdir": None,
    "reproducible": False, "tol_pointwise": POINTWISE_TOL,
    "tol_integral": INTEGRAL_TOL, "tol_eigen": EIGEN_TOL,
    **{k: None for k in GEOMETRY_PARAM_KEYS},
}


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    opt = _resolve(args, VERIFY_DEFAULTS)
    name = ALIASES.get(args.geometry, args.geometry)
    params = {}
    for key in GEOMETRY_PARAM_KEYS:
        if opt[key] is not None:
            val = opt[key]
            params[key] = _floats(val) if key in ("a", "b", "v", "w") \
                else val
    for key in ("m", "n"):
        if key in params:
            params[key] = int(params[key])
    try:
        bundle = catalog.build(name, **params)
    except LookupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TypeError as exc:
        print(f"error: missing or malformed parameter for {name!r}: {exc}",
              file=sys.stderr)
        return 3
    records = list(verify_suite(
        bundle, count=int(opt["count"]), quad_order=int(opt["order"]),
        seed=opt["seed"], tol_pointwise=opt["tol_pointwise"],
        tol_integral=opt["tol_integral"], tol_eigen=opt["tol_eigen"]))
    if name == "berger-soliton":
        try:
            bound = ricci_lower_bound_and_diameter(params["kappa"],
                                                   params["tau"])
            records.append(ResidualReport.of(
                "diameter-bound-finite", 0.0, 0.0, **bound))
        except ParameterError as exc:
            records.append({"label": "diameter-bound-finite",
                            "details": {"skipped": str(exc)}})
    config = RunConfig(
        command="verify", geometry=name, params=params,
        tolerances={"pointwise": opt["tol_pointwise"],
                    "integral": opt["tol_integral"],
                    "eigen": opt["tol_eigen"]},
        count=int(opt["count"]), order=int(opt["order"]),
        seed=opt["seed"], out=opt["out"])
    return _finish("verify", config, records, t0, opt)


# ---------------------------------------------------------------------------
# identities


IDENTITIES_DEFAULTS = {
    "m": 2, "order": 32, "count": 200, "theta": 1.0, "c1": 0.0, "c2": 0.0,
    "v": None, "w": None, "seed": None, "out": None, "figdir": None,
    "reproducible": False, "tol_integral": INTEGRAL_TOL,
    "tol_eigen": EIGEN_TOL,
}


def _convergence_rows(geom, m: int, order: int):
    """Quadrature error table: volume, height-square calibration, and
    the genuinely non-polynomial witness integral, per rule order."""
    h_v = geom.fields["h_v"]
    vol_exact = _VOLUME_EXACT[m]
    rows = []
    for o in sorted({4, 8, 16} | {order}):
        rule = sphere_rule(m, o)
        hv = h_v.value(rule.points)
        vol = integrate(rule, np.ones(rule.count))
        cal = integrate(rule, hv ** 2)
        wit = integrate(rule, 1.0 / (2.0 + hv))
        rows.append({
            "order": o, "nodes": rule.count,
            "volume_err": abs(vol - vol_exact),
            "calibration_err": abs(cal - vol_exact / (m + 1)),
            "witness_err": abs(wit - _WITNESS_EXACT[m]),
        })
    return rows


def cmd_identities(args) -> int:
    t0 = time.perf_counter()
    opt = _resolve(args, IDENTITIES_DEFAULTS)
    m = int(opt["m"])
    order = int(opt["order"])
    if m < 2:
        raise ParameterError(f"constraint violated: m >= 2 (got m={m})")
    if m not in (2, 3):
        raise ParameterError(
            f"sphere quadrature rules cover m in {{2, 3}} (got m={m})")
    params = {"m": m, "theta": float(opt["theta"]), "c1": float(opt["c1"]),
              "c2": float(opt["c2"])}
    for key in ("v", "w"):
        if opt[key] is not None:
            params[key] = _floats(opt[key])
    bundle = catalog.build("obata-sphere", **params)
    geom = bundle.geometry
    rule = sphere_rule(m, order)

    records = list(integral_identity_check(bundle, rule,
                                           opt["tol_integral"]))
    records.append(bochner_stokes_check(geom.metric, bundle.eta, rule,
                                        opt["tol_integral"]))
    pts = geom.sample(int(opt["count"]), opt["seed"])
    eig = eigen_equality_check(bundle, pts, tol=opt["tol_eigen"])
    records.append(ResidualReport.of(
        "eigen-equality", eig.eigen_residual, opt["tol_eigen"],
        **{k: v for k, v in eig.as_dict().items()
           if k != "eigen_residual"}))

    rows = _convergence_rows(geom, m, order)
    errs = [max(r["witness_err"], _NOISE_FLOOR) for r in rows]
    monotone = all(b <= a for a, b in zip(errs, errs[1:]))
    records.append(ResidualReport.of(
        "quadrature-convergence", 0.0 if monotone else 1.0, 0.0,
        rows=rows))
    print("order   nodes   volume_err     calibration_err  witness_err")
    for r in rows:
        print(f"{r['order']:>5}  {r['nodes']:>6}   {r['volume_err']:<12.4e}"
              f"   {r['calibration_err']:<14.4e}   {r['witness_err']:.4e}")

    config = RunConfig(
        command="identities", geometry=f"obata-sphere(m={m})",
        params=params,
        tolerances={"integral": opt["tol_integral"],
                    "eigen": opt["tol_eigen"]},
        count=int(opt["count"]), order=order, seed=opt["seed"],
        out=opt["out"])
    code = _finish("identities", config, records, t0, opt)
    figdir = opt.get("figdir")
    if figdir:
        series = {k: [(r["order"], r[k]) for r in rows]
                  for k in ("volume_err", "calibration_err", "witness_err")}
        path = os.path.join(figdir, "identities-convergence.png")
        figures.convergence_figure(series, path)
        print(f"figure written to {path}")
    return code


# ---------------------------------------------------------------------------
# flow


FLOW_DEFAULTS = {
    "m": 2, "lam": -2.0, "n": 1, "t_end": 0.01, "nodes": 201,
    "x_lo": -2.0, "x_hi": 2.0, "dt": 1e-3, "dt_max": 1e-2, "count": 9,
    "printed_forms": False, "deturck": False, "skip_integrator": False,
    "traj": None, "seed": None, "out": None, "figdir": None,
    "reproducible": False, "tol_flow": 1e-5, "tol_grid": 1e-3,
    "tol_gauge": 1e-2, "tol_pointwise": POINTWISE_TOL,
}


def _oracle_arrays(oracle, t: float, x: np.ndarray):
    pts = np.zeros((x.size, oracle.m))
    pts[:, 0] = x
    gv = oracle.metric_at(t).value(pts)
    return gv[:, 0, 0], gv[:, 1, 1], oracle.map_at(t).value(pts)


def _run_integrator(oracle, opt, records):
    x = np.linspace(float(opt["x_lo"]), float(opt["x_hi"]),
                    int(opt["nodes"]))
    t_end = float(opt["t_end"])
    a0, w0, phi0 = _oracle_arrays(oracle, 0.0, x)
    bc = flow.OracleBC(flow.oracle_boundary_fn(
        oracle, np.r_[x[:2], x[-2:]], max(t_end, 1e-3)), pad=2)
    run = flow.integrate_flow_1d(
        x, a0, w0, phi0, m=oracle.m, theta=oracle.theta, lam=oracle.lam,
        a_off=oracle.a, t_end=t_end, dt_max=float(opt["dt_max"]), bc=bc,
        snapshots=(t_end / 2.0,) if t_end > 0 else ())
    a_ref, w_ref, p_ref = _oracle_arrays(oracle, t_end, x)
    fin = run.final
    err_a = np.abs(fin.A - a_ref) / np.maximum(1.0, np.abs(a_ref))
    err_w = np.abs(fin.W - w_ref) / np.maximum(1.0, np.abs(w_ref))
    err_p = np.abs(fin.phi - p_ref) / np.maximum(1.0, np.abs(p_ref))
    sup = max(err_a.max(), err_w.max(), err_p.max())
    records.append(ResidualReport.of(
        "integrator-vs-oracle", sup, opt["tol_grid"],
        nodes=int(opt["nodes"]), t_end=t_end, steps=run.steps,
        dt_min=run.dt_min, dt_max=run.dt_max))

    # Zero-forcing control: flat product metric, constant map. Nothing
    # may move, to round-off.
    nodes = x.size
    phi_c = np.full((nodes, oracle.n), 2.0) + oracle.a
    ctrl = flow.integrate_flow_1d(
        x, np.ones(nodes), np.ones(nodes), phi_c, m=oracle.m,
        theta=oracle.theta, lam=oracle.lam, a_off=oracle.a, t_end=t_end,
        dt_max=float(opt["dt_max"]), bc=flow.StaticBC(2, oracle.n))
    drift = max(np.abs(ctrl.final.A - 1.0).max(),
                np.abs(ctrl.final.W - 1.0).max(),
                np.abs(ctrl.final.phi - phi_c).max())
    records.append(ResidualReport.of(
        "integrator-zero-control", drift, 1e-12, steps=ctrl.steps))
    return run, {"A": err_a, "W": err_w,
                 "phi": err_p.max(axis=1)}


def cmd_flow(args) -> int:
    t0 = time.perf_counter()
    opt = _resolve(args, FLOW_DEFAULTS)
    m = int(opt["m"])
    lam = float(opt["lam"])
    n = int(opt["n"])
    t_end = float(opt["t_end"])
    if t_end < 0:
        raise ParameterError(f"T >= 0 required (got T={t_end})")
    oracle = flow.build_self_similar(m, lam, n=n)
    printed = flow.PrintedForms(m, lam, n=n)
    t_probe = t_end if t_end > 0 else 0.0
    oracle.window_check(t_probe + 2.0 * float(opt["dt"]))

    geom = oracle.base.geometry
    pts = geom.sample(int(opt["count"]), opt["seed"])
    records: list = []

    psi = oracle.psi_jets(t_probe, pts)[0]
    psi_printed = printed.psi_values(t_probe, pts)
    records.append(ResidualReport.of(
        "oracle-vs-printed-psi1",
        float(np.abs(psi[:, 0] - psi_printed[:, 0]).max()),
        opt["tol_pointwise"], t=t_probe))
    fiber_gap = float(np.abs(psi[:, 1:] - psi_printed[:, 1:]).max())

    conv = flow.residual_convergence(
        oracle, t_probe, pts, dts=(2.0 * float(opt["dt"]),
                                   float(opt["dt"])))
    resid = conv["rows"][-1]
    records.append(ResidualReport.of(
        "flow-residual-metric", resid["metric"], opt["tol_flow"],
        t=t_probe, dt=resid["dt"]))
    records.append(ResidualReport.of(
        "flow-residual-map", resid["map"], opt["tol_flow"],
        t=t_probe, dt=resid["dt"]))
    order = conv["orders"][0]
    order_err = max(abs(order["metric"] - 2.0), abs(order["map"] - 2.0))
    records.append(ResidualReport.of(
        "flow-residual-order", order_err, 0.2, **order))

    if opt["printed_forms"]:
        pr = flow.flow_residual_of_solution(printed, t_probe, pts,
                                            float(opt["dt"]))
        records.append({
            "label": "printed-forms-flow-residual",
            "details": {
                "t": t_probe, "metric": pr["metric"], "map": pr["map"],
                "metric_passes": pr["metric"] <= opt["tol_flow"],
                "map_passes": pr["map"] <= opt["tol_flow"],
                "psi_fiber_gap": fiber_gap,
                "discrepancy": bool(pr["metric"] > opt["tol_flow"]
                                    or fiber_gap > opt["tol_pointwise"]),
            }})

    run = None
    err_profiles = None
    if not opt["skip_integrator"]:
        run, err_profiles = _run_integrator(oracle, opt, records)

    if opt["deturck"]:
        corr = flow.deturck_correspondence_check(
            m, lam, n=n, x_lo=float(opt["x_lo"]), x_hi=float(opt["x_hi"]),
            nodes=int(opt["nodes"]), t_end=t_end if t_end > 0 else 0.005,
            dt_max=float(opt["dt_max"]))
        gap = max(corr["gap_A"], corr["gap_W"], corr["gap_phi"])
        records.append(ResidualReport.of(
            "deturck-correspondence", gap, opt["tol_gauge"],
            gap_A=corr["gap_A"], gap_W=corr["gap_W"],
            gap_phi=corr["gap_phi"], beta_estimate=corr["beta_estimate"],
            direct_steps=corr["direct_steps"],
            deturck_steps=corr["deturck_steps"]))

    if opt["traj"] and run is not None:
        write_text(opt["traj"], trajectory_csv(run))
        print(f"trajectory written to {opt['traj']}")

    config = RunConfig(
        command="flow", geometry="warped-soliton",
        params={"m": m, "lam": lam, "n": n},
        tolerances={"flow": opt["tol_flow"], "grid": opt["tol_grid"],
                    "gauge": opt["tol_gauge"],
                    "pointwise": opt["tol_pointwise"]},
        count=int(opt["count"]),
        grid={"nodes": int(opt["nodes"]), "x_lo": float(opt["x_lo"]),
              "x_hi": float(opt["x_hi"]), "t_end": t_end,
              "dt_max": float(opt["dt_max"]), "dt_fd": float(opt["dt"])},
        seed=opt["seed"], out=opt["out"])
    code = _finish("flow", config, records, t0, opt)
    figdir = opt.get("figdir")
    if figdir and run is not None:
        os.makedirs(figdir, exist_ok=True)
        p1 = figures.trajectory_figure(
            run, os.path.join(figdir, "flow-profiles.png"))
        p2 = figures.error_profile_figure(
            run.final.x, err_profiles,
            os.path.join(figdir, "flow-error.png"))
        print(f"figures written to {p1}, {p2}")
    return code


# ---------------------------------------------------------------------------
# report


REPORT_DEFAULTS = {
    "outdir": "report_out", "seed": None, "reproducible": False,
    "order": 32, "t_end": 0.01, "nodes": 201,
}


def cmd_report(args) -> int:
    t0 = time.perf_counter()
    opt = _resolve(args, REPORT_DEFAULTS)
    outdir = opt["outdir"]
    figdir = os.path.join(outdir, "figures")
    os.makedirs(figdir, exist_ok=True)
    seed = opt["seed"]
    order = int(opt["order"])
    t_end = float(opt["t_end"])
    nodes = int(opt["nodes"])

    def tag(records, suite):
        out = []
        for rec in records:
            d = rec.as_dict() if hasattr(rec, "as_dict") else dict(rec)
            d["suite"] = suite
            out.append(d)
        return out

    def task_verify(spec):
        name, params = spec
        bundle = catalog.build(name, **params)
        recs = verify_suite(bundle, count=100, seed=seed)
        label = ",".join(f"{k}={v}" for k, v in sorted(params.items()))
        return tag(recs, f"verify:{name}({label})")

    def task_identities(_):
        bundle = catalog.build("obata-sphere", m=2)
        rule = sphere_rule(2, order)
        recs = list(integral_identity_check(bundle, rule))
        recs.append(bochner_stokes_check(bundle.geometry.metric,
                                         bundle.eta, rule))
        rows = _convergence_rows(bundle.geometry, 2, order)
        errs = [max(r["witness_err"], _NOISE_FLOOR) for r in rows]
        recs.append(ResidualReport.of(
            "quadrature-convergence",
            0.0 if all(b <= a for a, b in zip(errs, errs[1:])) else 1.0,
            0.0, rows=rows))
        return tag(recs, "identities:m=2"), rows

    verify_specs = [
        ("berger-soliton", {"kappa": 9.0, "tau": 2.0}),
        ("warped-soliton", {"m": 2, "lam": -2.0}),
        ("obata-sphere", {"m": 2}),
        ("non-gradient-witness", {"m": 2, "lam": -2.0}),
    ]
    verify_records = parallel_map(task_verify, verify_specs)
    records: list = [r for grp in verify_records for r in grp]
    id_records, conv_rows = task_identities(None)
    records.extend(id_records)

    oracle = flow.build_self_similar(2, -2.0)
    flow_opt = dict(FLOW_DEFAULTS)
    flow_opt.update({"t_end": t_end, "nodes": nodes, "seed": seed})
    flow_records: list = []
    pts = oracle.base.geometry.sample(9, seed)
    printed = flow.PrintedForms(2, -2.0)
    t_probe = max(t_end, 0.01)
    psi = oracle.psi_jets(t_probe, pts)[0]
    psi_pr = printed.psi_values(t_probe, pts)
    flow_records.append(ResidualReport.of(
        "oracle-vs-printed-psi1",
        float(np.abs(psi[:, 0] - psi_pr[:, 0]).max()), POINTWISE_TOL))
    resid = flow.flow_residual_of_solution(oracle, t_probe, pts)
    flow_records.append(ResidualReport.of(
        "flow-residual-metric", resid["metric"], 1e-5, t=t_probe))
    flow_records.append(ResidualReport.of(
        "flow-residual-map", resid["map"], 1e-5, t=t_probe))
    pr = flow.flow_residual_of_solution(printed, t_probe, pts)
    flow_records.append({
        "label": "printed-forms-flow-residual",
        "details": {"t": t_probe, "metric": pr["metric"], "map": pr["map"],
                    "metric_passes": pr["metric"] <= 1e-5,
                    "map_passes": pr["map"] <= 1e-5,
                    "discrepancy": bool(pr["metric"] > 1e-5)}})
    run, err_profiles = _run_integrator(oracle, flow_opt, flow_records)
    corr = flow.deturck_correspondence_check(
        2, -2.0, nodes=nodes, t_end=min(0.005, t_end) or 0.005)
    gap = max(corr["gap_A"], corr["gap_W"], corr["gap_phi"])
    flow_records.append(ResidualReport.of(
        "deturck-correspondence", gap, 1e-2, gap_A=corr["gap_A"],
        gap_W=corr["gap_W"], gap_phi=corr["gap_phi"]))
    records.extend(tag(flow_records, "flow:m=2,lam=-2"))

    config = RunConfig(
        command="report", params={"battery": "full"},
        tolerances={"pointwise": POINTWISE_TOL, "integral": INTEGRAL_TOL,
                    "flow": 1e-5, "grid": 1e-3, "gauge": 1e-2},
        order=order,
        grid={"nodes": nodes, "t_end": t_end}, seed=seed, out=None)
    wall = None if opt["reproducible"] else time.perf_counter() - t0
    env = ReportEnvelope(command="report", config=config.as_dict(),
                         records=records, version=__version__,
                         wall_clock_s=wall)
    json_path = os.path.join(outdir, "report.json")
    write_text(json_path, env.to_json())
    csv_path = os.path.join(outdir, "trajectory.csv")
    write_text(csv_path, trajectory_csv(run))
    figures.residual_figure(
        [r for r in records if "value" in r],
        os.path.join(figdir, "residuals.png"), title="full battery")
    figures.convergence_figure(
        {k: [(r["order"], r[k]) for r in conv_rows]
         for k in ("volume_err", "calibration_err", "witness_err")},
        os.path.join(figdir, "convergence.png"))
    figures.trajectory_figure(run, os.path.join(figdir, "profiles.png"))
    figures.error_profile_figure(run.final.x, err_profiles,
                                 os.path.join(figdir, "error.png"))
    _print_records(records)
    print(f"verdict: {env.verdict}")
    print(f"report written to {json_path}")
    print(f"trajectory written to {csv_path}")
    print(f"figures written to {figdir}")
    return 0 if env.verdict == "pass" else 1


# ---------------------------------------------------------------------------
# Parser


def _add_common(sub, defaults):
    sub.add_argument("--config", help="JSON file supplying any of this "
                     "subcommand's options; explicit flags win")
    sub.add_argument("--seed", type=int, help="sampling seed (default: "
                     "stable per-geometry seeds)")
    sub.add_argument("--out", help="write the JSON report envelope here")
    sub.add_argument("--figdir", help="directory for rendered figures")
    sub.add_argument("--reproducible", action="store_true", default=None,
                     help="omit wall-clock timing so identical configs "
                     "produce byte-identical reports")
    for dest, default in defaults.items():
        if dest.startswith("tol_"):
            flag = "--" + dest.replace("_", "-")
            sub.add_argument(flag, type=float, default=None,
                             help=f"tolerance (default {default:g})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ricci-lab",
        description="Residual verification for drift-coupled Ricci "
                    "solitons and the coupled flow.",
        epilog="exit codes: 0 pass, 1 check failed, 2 usage error, "
               "3 parameter out of range. RICCI_LAB_THREADS caps worker "
               "threads.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    pv = subs.add_parser(
        "verify", help="residual suite for one catalog geometry",
        description="Run the verification suite for a named geometry. "
                    f"Known names: {', '.join(catalog.names())} "
                    f"(aliases: {', '.join(sorted(ALIASES))}).")
    pv.add_argument("geometry", help="catalog name or alias")
    for key in GEOMETRY_PARAM_KEYS:
        if key == "lam":
            pv.add_argument("--lambda", dest="lam", type=float,
                            help="soliton constant (negative branch)")
        elif key in ("m", "n"):
            pv.add_argument(f"--{key}", type=int)
        elif key in ("a", "b", "v", "w"):
            pv.add_argument(f"--{key}", help="comma-separated floats")
        else:
            pv.add_argument(f"--{key}", type=float)
    pv.add_argument("--count", type=int, help="sample points (default 100)")
    pv.add_argument("--order", type=int,
                    help="quadrature order for integral checks (default 16)")
    _add_common(pv, VERIFY_DEFAULTS)
    pv.set_defaults(fn=cmd_verify)

    pi = subs.add_parser(
        "identities", help="integral identities on the unit sphere",
        description="Integral identities, the Stokes-type scalar check, "
                    "and eigenvalue extraction on the unit m-sphere, "
                    "plus a quadrature convergence table.")
    pi.add_argument("--m", type=int, help="sphere dimension, 2 or 3")
    pi.add_argument("--order", type=int, help="quadrature order "
                    "(default 32)")
    pi.add_argument("--count", type=int)
    pi.add_argument("--theta", type=float)
    pi.add_argument("--c1", type=float)
    pi.add_argument("--c2", type=float)
    pi.add_argument("--v", help="comma-separated height direction")
    pi.add_argument("--w", help="comma-separated height direction")
    _add_common(pi, IDENTITIES_DEFAULTS)
    pi.set_defaults(fn=cmd_identities)

    pf = subs.add_parser(
        "flow", help="self-similar solution checks and the grid "
                     "integrator",
        description="Check the integrated self-similar solution against "
                    "the published closed forms, measure its flow "
                    "residual, and compare the grid integrator against "
                    "it. " + TRAJ_HELP + ".")
    pf.add_argument("--m", type=int)
    pf.add_argument("--lambda", dest="lam", type=float)
    pf.add_argument("--n", type=int, help="target dimension")
    pf.add_argument("--T", dest="t_end", type=float,
                    help="integration horizon (default 0.01)")
    pf.add_argument("--N", dest="nodes", type=int,
                    help="grid nodes (default 201)")
    pf.add_argument("--x-lo", type=float)
    pf.add_argument("--x-hi", type=float)
    pf.add_argument("--dt", type=float,
                    help="time step of the residual finite difference")
    pf.add_argument("--dt-max", type=float)
    pf.add_argument("--count", type=int, help="residual sample points")
    pf.add_argument("--printed-forms", action="store_true", default=None,
                    help="also measure the published closed-form time "
                    "slices and record whether they satisfy the flow")
    pf.add_argument("--deturck", action="store_true", default=None,
                    help="integrate the gauge-fixed flow and compare "
                    "through the tracked reparametrization")
    pf.add_argument("--skip-integrator", action="store_true", default=None)
    pf.add_argument("--traj", help=TRAJ_HELP)
    _add_common(pf, FLOW_DEFAULTS)
    pf.set_defaults(fn=cmd_flow)

    pr = subs.add_parser(
        "report", help="full battery into a directory",
        description="Run the verification battery and write report.json, "
                    "trajectory.csv, and figures/*.png into --outdir. "
                    + TRAJ_HELP + ".")
    pr.add_argument("--outdir")
    pr.add_argument("--order", type=int)
    pr.add_argument("--T", dest="t_end", type=float)
    pr.add_argument("--N", dest="nodes", type=int)
    pr.add_argument("--seed", type=int)
    pr.add_argument("--config")
    pr.add_argument("--reproducible", action="store_true", default=None)
    pr.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, WindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FlowAbort as exc:
        print(f"flow aborted: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
