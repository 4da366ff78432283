"""Command-line interface.

Subcommands map one-to-one onto the library pipeline: build (graphs),
resistance (renormalization and boundary-resistance checks), spectrum
(discrete eigenproblems), qg-spectrum (metric-graph eigenvalue scan),
analyze (counting function, exponent fit, Weyl ratio, regime), export-eigfun
and plot.  Every run writes its outputs plus a manifest.json with content
hashes into the output directory.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, geometry, measures, quantum, resistance, spectrum as spc
from .config import ConfigError, ManifestWriter, RunConfig, load_config_file, parse_config
from .geometry import ResourceCapError
from .resistance import ParameterError, StructuralError
from .spectrum import NumericalError
from .svg import KIND_HEATMAP, KIND_LOGLOG, KIND_STEP, KIND_WEYL, render_svg

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_RESOURCE = 4


def fmt12(x: float) -> str:
    return f"{float(x):.12g}"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(str(c) for c in row) + "\n")
    return buf.getvalue()


def _apply_thread_cap():
    cap = os.environ.get("FRACTAL_SPECTRA_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        raise ConfigError(".FRACTAL_SPECTRA_THREADS", f"not an integer: {cap!r}")
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        os.environ.setdefault("OMP_NUM_THREADS", str(n))
        os.environ.setdefault("OPENBLAS_NUM_THREADS", str(n))


# ---------------------------------------------------------------- commands

def cmd_build(cfg: RunConfig, man: ManifestWriter):
    t0 = time.perf_counter()
    graph = geometry.build_graph(cfg.model(), cfg.level, max_vertices=cfg.max_vertices)
    man.timings["build"] = time.perf_counter() - t0
    man.write_text("graph.json", graph.to_json() + "\n")
    print(f"built {cfg.model_name} level {cfg.level}: "
          f"{graph.n} vertices, {len(graph.edges)} edges")


def cmd_resistance(cfg: RunConfig, man: ManifestWriter):
    params = cfg.resistance_params()
    model = cfg.model()
    t0 = time.perf_counter()
    residual = resistance.check_compatibility(model, params)
    rows = []
    payload = {
        "model": cfg.model_name,
        "r": cfg.r,
        "rho": params.rho,
        "compatibility_residual": residual,
    }
    if cfg.model_name == "hanoi":
        for lev in range(1, cfg.level + 1):
            g = geometry.build_graph(model, lev, max_vertices=cfg.max_vertices)
            net = resistance.assign_resistances(g, params)
            b = g.boundary_ids()
            reff = resistance.effective_resistance(net, b[0], b[1])
            full, tail, metric = resistance.boundary_resistance_series(cfg.r, lev)
            rows.append((lev, fmt12(reff), fmt12(full), fmt12(tail), fmt12(metric)))
        payload["boundary_resistance"] = [
            {"level": lev, "effective": float(e), "series_full": float(f),
             "series_tail": float(t), "series_metric": float(mm)}
            for (lev, e, f, t, mm) in rows
        ]
    man.timings["resistance"] = time.perf_counter() - t0
    man.write_text("resistance.json", json.dumps(payload, indent=1,
                                                 default=float) + "\n")
    if rows:
        man.write_text("boundary_resistance.csv",
                       _csv(rows, ("level", "effective", "series_full",
                                   "series_tail", "series_metric")))
    print(f"compatibility residual {residual:.3e} (rho = {fmt12(params.rho)})")


def _solve(cfg: RunConfig, want_vectors=False):
    graph = geometry.build_graph(cfg.model(), cfg.level, max_vertices=cfg.max_vertices)
    net = resistance.assign_resistances(graph, cfg.resistance_params())
    masses = measures.vertex_masses(graph, cfg.measure_params())
    op = spc.assemble(net, masses, cfg.bc)
    sp = spc.solve_spectrum(op, want_vectors=want_vectors,
                            cluster_rtol=cfg.cluster_rtol,
                            params={"r": cfg.r, "a": cfg.a, "b": cfg.b})
    return graph, net, masses, op, sp


def _spectrum_rows(sp):
    rows = []
    idx = 0
    for (val, mult) in sp.clusters:
        rows.append((idx, fmt12(val), mult, sp.bc, sp.level))
        idx += mult
    return rows


def cmd_spectrum(cfg: RunConfig, man: ManifestWriter):
    t0 = time.perf_counter()
    _g, _net, _m, _op, sp = _solve(cfg)
    man.timings["solve"] = time.perf_counter() - t0
    man.write_text("spectrum.csv",
                   _csv(_spectrum_rows(sp),
                        ("index", "eigenvalue", "multiplicity", "bc", "level")))
    shown = ", ".join(f"{v:.6g} (x{m})" for (v, m) in sp.clusters[:6])
    print(f"{cfg.bc} spectrum, dim {sp.dim}; bottom: {shown}")


def cmd_qg_spectrum(cfg: RunConfig, man: ManifestWriter):
    if cfg.model_name != "hanoi":
        raise ParameterError("qg-spectrum supports the hanoi model only")
    params = cfg.resistance_params()
    model = cfg.model()
    conv = cfg.length_convention
    t0 = time.perf_counter()
    if conv is None:
        g1 = geometry.build_graph(model, 1)
        report = quantum.convention_match_report({1: g1}, params)
        conv = report["selected"] or quantum.CONV_RESISTANCE
        man.write_text("match_report.json", json.dumps(report, indent=1) + "\n")
        print(f"convention match report: selected {report['selected']!r} "
              f"(details in match_report.json)")
    graph = geometry.build_graph(model, cfg.level, max_vertices=cfg.max_vertices)
    mg = quantum.build_metric_graph(graph, params, conv)
    qs = quantum.scan_spectrum(mg, cfg.lambda_min, cfg.lambda_max,
                               grid_step=cfg.grid_step, threshold=cfg.svd_threshold)
    man.timings["scan"] = time.perf_counter() - t0
    rows = []
    for (lam, mult, smin) in qs.roots:
        lam2 = lam * lam
        renorm = quantum.renormalize_qg(lam2, cfg.a, cfg.r)
        rows.append((fmt12(lam), fmt12(lam2), fmt12(renorm), mult, f"{smin:.3e}"))
    man.write_text("qspectrum.csv",
                   _csv(rows, ("lambda", "lambda_squared", "renormalized",
                               "multiplicity", "sigma_min")))
    print(f"metric-graph scan ({conv} lengths): {len(qs.roots)} roots "
          f"in [{cfg.lambda_min:g}, {cfg.lambda_max:g}]")
    for row in rows[:8]:
        print("  lambda^2 =", row[1], " renormalized =", row[2], f" (x{row[3]})")


def cmd_analyze(cfg: RunConfig, man: ManifestWriter):
    t0 = time.perf_counter()
    graph, net, masses, op, sp = _solve(cfg)
    man.timings["solve"] = time.perf_counter() - t0
    cf = analysis.counting_function(sp)
    slope, stderr = analysis.fit_spectral_exponent(cf, cfg.fit_window)
    ev = cf.eigenvalues
    man.write_text("counting.csv",
                   _csv(((fmt12(x), i + 1) for i, x in enumerate(ev)), ("x", "N")))
    window = cfg.fit_window or (ev[0], ev[min(analysis.DEFAULT_FIT_COUNT, len(ev)) - 1])
    fit_payload = {"slope": slope, "stderr": stderr,
                   "window": [float(window[0]), float(window[1])],
                   "d_s_estimate": 2.0 * slope}
    man.write_text("fit.json", json.dumps(fit_payload, indent=1) + "\n")
    xs, ratio = analysis.weyl_ratio(cf, 2.0 * slope, x_hi=float(window[1]) * 10)
    man.write_text("weyl.csv",
                   _csv(zip(map(fmt12, xs), map(fmt12, ratio)), ("x", "weyl_ratio")))
    if cfg.model_name == "sg3":
        rep = analysis.sg3_regime(cfg.r, cfg.a)
        man.write_text("regime.json", json.dumps({
            "ra": rep.ra, "regime": rep.regime,
            "predicted_exponent": rep.predicted_exponent,
            "printed_exponent": rep.printed_exponent,
            "log_correction": rep.log_correction, "d_s": rep.d_s,
        }, indent=1) + "\n")
    if cfg.model_name == "hanoi" and cfg.bc == "dirichlet" and cfg.level >= 2:
        labels = _dn_labels(cfg, net, masses, sp)
        man.write_text("labels.csv",
                       _csv(labels, ("eigenvalue", "multiplicity", "label")))
    print(f"fit: N(x) ~ x^{slope:.5f} (stderr {stderr:.5f}) over "
          f"[{window[0]:.6g}, {window[1]:.6g}]")


def _dn_labels(cfg, net, masses, sp_d):
    op_n = spc.assemble(net, masses, spc.NEUMANN)
    sp_n = spc.solve_spectrum(op_n, want_vectors=False, cluster_rtol=cfg.cluster_rtol)
    prev_cfg_level = cfg.level - 1
    pg = geometry.build_graph(cfg.model(), prev_cfg_level)
    pnet = resistance.assign_resistances(pg, cfg.resistance_params())
    pmass = measures.vertex_masses(pg, cfg.measure_params())
    prev_d = spc.solve_spectrum(spc.assemble(pnet, pmass, spc.DIRICHLET),
                                want_vectors=False)
    prev_n = spc.solve_spectrum(spc.assemble(pnet, pmass, spc.NEUMANN),
                                want_vectors=False)
    prev_dn = [v for (v, _m) in analysis.match_dn(prev_d, prev_n)]
    ra = cfg.r * cfg.a
    out = []
    for (val, mult, label) in analysis.classify_dn(sp_d, sp_n, prev_dn, ra):
        out.append((fmt12(val), mult, label))
    return out


def cmd_export_eigfun(cfg: RunConfig, man: ManifestWriter):
    graph, _net, _masses, op, sp = _solve(cfg, want_vectors=True)
    idx = cfg.eig_index
    vec = spc.eigenfunction(op, sp, idx)
    rows = [(v.id, v.address, fmt12(v.x), fmt12(v.y), fmt12(vec[v.id]))
            for v in graph.vertices]
    man.write_text(f"eigfun_{idx}.csv",
                   _csv(rows, ("id", "address", "x", "y", "value")))
    print(f"eigenfunction {idx} (eigenvalue {sp.eigenvalues[idx]:.8g}) exported")


def cmd_plot(cfg: RunConfig, man: ManifestWriter):
    graph, _net, _masses, op, sp = _solve(cfg, want_vectors=True)
    cf = analysis.counting_function(sp)
    ev = cf.eigenvalues
    ns = np.arange(1, len(ev) + 1)
    kmax = min(analysis.DEFAULT_FIT_COUNT, len(ev))
    man.write_bytes("counting_step.svg",
                    render_svg((ev[:kmax], ns[:kmax]), KIND_STEP,
                               title=f"{cfg.model_name} level {cfg.level} counting function"))
    slope, _err = analysis.fit_spectral_exponent(cf, cfg.fit_window)
    man.write_bytes("counting_loglog.svg",
                    render_svg((ev, ns), KIND_LOGLOG,
                               title=f"{cfg.model_name} level {cfg.level} log-log",
                               annotations={"slope": slope}))
    xs, ratio = analysis.weyl_ratio(cf, 2.0 * slope)
    man.write_bytes("weyl.svg",
                    render_svg((xs, np.maximum(ratio, 1e-12)), KIND_WEYL,
                               title=f"Weyl ratio, d_s = {2 * slope:.4f}"))
    vec = spc.eigenfunction(op, sp, cfg.eig_index)
    coords = [(v.x, v.y) for v in graph.vertices]
    edges = [(e.u, e.v) for e in graph.edges]
    man.write_bytes("eigenfunction.svg",
                    render_svg((coords, list(vec), edges), KIND_HEATMAP,
                               title=f"eigenfunction {cfg.eig_index}, "
                                     f"eigenvalue {sp.eigenvalues[cfg.eig_index]:.6g}"))
    print("wrote counting_step.svg, counting_loglog.svg, weyl.svg, eigenfunction.svg")


COMMANDS = {
    "build": cmd_build,
    "resistance": cmd_resistance,
    "spectrum": cmd_spectrum,
    "qg-spectrum": cmd_qg_spectrum,
    "analyze": cmd_analyze,
    "export-eigfun": cmd_export_eigfun,
    "plot": cmd_plot,
}


def _add_common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--model")
    p.add_argument("--level", type=int)
    p.add_argument("--r")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--bc")
    p.add_argument("--fit-window", help="x_lo:x_hi")
    p.add_argument("--lambda-min")
    p.add_argument("--lambda-max")
    p.add_argument("--grid-step")
    p.add_argument("--svd-threshold")
    p.add_argument("--length-convention")
    p.add_argument("--renormalize", action="store_true", default=None)
    p.add_argument("--eig-index", type=int)
    p.add_argument("--cluster-rtol")
    p.add_argument("--max-vertices", type=int)
    p.add_argument("--out")


def _flags_to_raw(ns: argparse.Namespace) -> dict:
    raw = {}
    if ns.config:
        raw.update(load_config_file(ns.config))
    mapping = {
        "model": ns.model, "level": ns.level, "r": ns.r, "a": ns.a, "b": ns.b,
        "bc": ns.bc, "lambda_min": ns.lambda_min, "lambda_max": ns.lambda_max,
        "grid_step": ns.grid_step, "svd_threshold": ns.svd_threshold,
        "length_convention": ns.length_convention, "renormalize": ns.renormalize,
        "eig_index": ns.eig_index, "cluster_rtol": ns.cluster_rtol,
        "max_vertices": ns.max_vertices, "out": ns.out,
    }
    for key, val in mapping.items():
        if val is not None:
            raw[key] = val
    if ns.fit_window:
        parts = ns.fit_window.split(":")
        if len(parts) != 2:
            raise ConfigError(".fit_window", "expected x_lo:x_hi")
        raw["fit_window"] = [parts[0], parts[1]]
    return raw


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fractal-spectra",
        description="Spectra of graph approximations of two hybrid fractals")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common_flags(sub.add_parser(name))
    ns = parser.parse_args(argv)
    try:
        _apply_thread_cap()
        raw = _flags_to_raw(ns)
        cfg = parse_config(ns.command, raw)
        out_dir = Path(cfg.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        man = ManifestWriter(cfg, out_dir)
        t0 = time.perf_counter()
        COMMANDS[ns.command](cfg, man)
        man.timings["total"] = time.perf_counter() - t0
        man.finish()
        return EXIT_OK
    except (ConfigError, ParameterError) as exc:
        _emit_error(EXIT_CONFIG, exc)
        return EXIT_CONFIG
    except ResourceCapError as exc:
        _emit_error(EXIT_RESOURCE, exc)
        return EXIT_RESOURCE
    except (NumericalError, StructuralError, np.linalg.LinAlgError) as exc:
        _emit_error(EXIT_NUMERIC, exc)
        return EXIT_NUMERIC


def _emit_error(code: int, exc: Exception):
    print(json.dumps({"error": {"exit_code": code,
                                "kind": type(exc).__name__,
                                "message": str(exc)}}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
