"""Command line front end: ``spectral-flow-lab ssf|smatrix|verify``.

Exit codes: 0 clean, 1 invariant failure or flagged result, 2 model-domain
error (resonance, band edge), 3 configuration error.
"""
import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import OUTPUT_ENV, SCHEMA_VERSION, ExperimentConfig
from .errors import BandEdgeError, ConfigurationError, DomainError, ResonanceError
from .lattice import LatticePotential, bound_states_of, factor_potential
from .scattering import (
    OperatorPath,
    default_r_grid,
    eigenphase_track,
    mu_from_phases,
    mu_integral,
    path_scattering_matrix,
)
from .spectral_shift import bump, singular_steps, xi_ac_detail
from .texp import constant_path, texp, texp_series
from . import verify as V

EXIT_OK, EXIT_FAIL, EXIT_DOMAIN, EXIT_CONFIG = 0, 1, 2, 3

CSV_COLUMNS = ["lambda", "xi_ac", "xi_ac_err", "det_re", "det_im", "theta1", "theta2", "unitarity_resid", "status"]
SUITES = ("texp", "gauge", "birman_krein", "krein_trace", "paths")


def _float(x):
    return None if x is None or not math.isfinite(x) else float(x)


def _record(cfg, path, lam, with_smatrix=False):
    rec = {"lambda": float(lam)}
    try:
        xi, err, flagged = xi_ac_detail(path, lam, nodes=cfg.r_nodes, edge_margin=cfg.edge_margin)
        sample = path_scattering_matrix(path, lam, cfg.edge_margin)
        track = eigenphase_track(path, lam, default_r_grid(path), cfg.edge_margin)
    except ResonanceError as exc:
        rec.update({k: math.nan for k in CSV_COLUMNS[1:-1]}, status="resonance", diagnostic=str(exc))
        return rec
    except BandEdgeError as exc:
        rec.update({k: math.nan for k in CSV_COLUMNS[1:-1]}, status="band_edge", diagnostic=str(exc))
        return rec
    theta = np.sort(track.final)
    status = "ok"
    if flagged:
        status = "quad_flag"
    elif track.ambiguous:
        status = "ambiguous_phase"
    rec.update(
        xi_ac=xi,
        xi_ac_err=err,
        det_re=sample.det.real,
        det_im=sample.det.imag,
        theta1=float(theta[0]),
        theta2=float(theta[1]),
        unitarity_resid=sample.unitarity_residual,
        status=status,
    )
    if with_smatrix:
        thetas = (np.arange(cfg.theta_points) + 0.5) * 2 * np.pi / cfg.theta_points
        mu = mu_from_phases(track.final, thetas)
        rec["S"] = [[[float(z.real), float(z.imag)] for z in row] for row in sample.S]
        rec["eigenphases"] = [float(t) for t in sample.eigenphases]
        rec["mu"] = [int(m) for m in mu]
        rec["xi_from_mu_grid"] = float(-np.mean(mu))
        rec["xi_from_mu_exact"] = float(-mu_integral(track.final) / (2 * np.pi))
    return rec


def _sweep(cfg, path, with_smatrix):
    grid = cfg.grid()
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(lambda lam: _record(cfg, path, lam, with_smatrix), grid))
    return [_record(cfg, path, lam, with_smatrix) for lam in grid]


def _steps_json(steps):
    return [{"interval": [_float(lo), _float(hi)], "value": int(v)} for (lo, hi), v in steps]


def _exit_for(records):
    statuses = {r["status"] for r in records}
    if statuses & {"resonance", "band_edge"}:
        return EXIT_DOMAIN
    if statuses - {"ok"}:
        return EXIT_FAIL
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def cmd_ssf(cfg):
    path = cfg.path()
    records = _sweep(cfg, path, with_smatrix=False)
    manifest = {
        "schema": SCHEMA_VERSION,
        "command": "ssf",
        "config": cfg.echo(),
        "records": records,
        "singular_steps": _steps_json(singular_steps(path)),
    }
    return manifest, _exit_for(records)


def cmd_smatrix(cfg):
    path = cfg.path()
    records = _sweep(cfg, path, with_smatrix=True)
    manifest = {
        "schema": SCHEMA_VERSION,
        "command": "smatrix",
        "config": cfg.echo(),
        "theta_grid": "midpoints (k + 1/2) 2 pi / theta_points",
        "records": records,
    }
    return manifest, _exit_for(records)


# ---------------------------------------------------------------------------
# Verification suites


def _grid_subset(grid, count):
    if len(grid) <= count:
        return grid
    return grid[np.linspace(0, len(grid) - 1, count).round().astype(int)]


def _vertices(path):
    return [v for v in path.vertices if v]


def _split_disjoint(v):
    items = sorted(v.as_dict().items())
    half = max(1, len(items) // 2)
    a = LatticePotential.from_mapping(dict(items[:half]))
    b = LatticePotential.from_mapping(dict(items[half:]))
    return a, b


def suite_texp(cfg):
    checks = V.check_texp_lemmas(n_paths=20, dim=4, steps=cfg.texp_steps, seed=0)
    rng = np.random.default_rng(1)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    a = (m + m.conj().T) / (2 * np.sqrt(6))
    p = constant_path(a, (0.0, 0.1))
    diff = np.linalg.norm(texp_series(p, 6).value - texp(p, 1).value)
    checks.append(V._at_most("Texp series oracle vs product (constant 3x3, [0, 0.1])", diff, 1e-8))
    return checks


def suite_gauge(cfg):
    path = cfg.path()
    grid = cfg.grid()
    verts = _vertices(path)
    pairs = [_split_disjoint(v) for v in verts if len(v) >= 2]
    return [
        V.check_gauge(verts, grid),
        V.check_pi_additivity(pairs, grid),
        V.check_sum_rule(verts, grid),
    ]


def suite_birman_krein(cfg):
    path = cfg.path()
    grid = cfg.grid()
    checks = [
        V.check_unitarity([path], grid),
        V.check_birman_krein([path], grid, nodes=cfg.r_nodes),
        V.check_det_channel_space(_vertices(path), grid),
    ]
    checks.extend(V.check_mu([path], _grid_subset(grid, 10), cfg.theta_points))
    return checks


def _singular_queries(start, end, count=20):
    sites = sorted(set(start.support) | set(end.support))
    energies = []
    for v in (start, end):
        c = v.on(sites)
        nz = c != 0
        if np.any(nz):
            energies.extend(bound_states_of(c[nz], np.array(sites)[nz]))
    top = 2.0 + max([abs(e) - 2 for e in energies], default=0.0) + 1.0
    cand = np.concatenate([np.linspace(2.001, top, count // 2 + 4), -np.linspace(2.001, top, count // 2 + 4)])
    keep = [q for q in cand if all(abs(q - e) > 1e-3 for e in energies)]
    return keep[:count]


def suite_krein_trace(cfg):
    path = cfg.path()
    n = cfg.truncation_N
    sizes = sorted({(n - 1) // 4 + 1 | 1, (n - 1) // 2 + 1 | 1, n})
    checks = V.check_krein(path.end, sizes, start=path.start)
    queries = _singular_queries(path.start, path.end)
    checks.append(V.check_singular(path.end, queries, n=n, start=path.start))
    return checks


def suite_paths(cfg):
    path = cfg.path()
    grid = _grid_subset(cfg.grid(), 50)
    checks = [V.check_texp_stationary([path], grid, steps=cfg.texp_steps)]
    end = path.end
    if end:
        rng = np.random.default_rng(2)
        lo, hi = cfg.band_min, cfg.band_max
        samples = [(float(rng.uniform(lo, hi)), float(rng.uniform(0.0, 1.0))) for _ in range(10)]
        checks.append(V.check_derivative(end, samples))
    direct = OperatorPath((path.start, path.end))
    far = max(path.sites(), default=0) + 5
    detour = OperatorPath((path.start, path.end + LatticePotential.from_mapping({far: 2.0}), path.end))
    checks.append(V.check_path_independence([(direct, path), (direct, detour)], grid))
    return checks


SUITE_FUNCS = {
    "texp": suite_texp,
    "gauge": suite_gauge,
    "birman_krein": suite_birman_krein,
    "krein_trace": suite_krein_trace,
    "paths": suite_paths,
}


def cmd_verify(cfg, suite="all", echo=None):
    names = SUITES if suite == "all" else (suite,)
    results = {}
    ok = True
    for name in names:
        try:
            checks = SUITE_FUNCS[name](cfg)
        except DomainError as exc:
            return {"schema": SCHEMA_VERSION, "command": "verify", "suite": suite, "error": str(exc)}, EXIT_DOMAIN
        results[name] = [c.as_dict() for c in checks]
        for c in checks:
            ok &= c.passed
            if echo is not None:
                echo(f"{name}: {c.line()}")
    manifest = {
        "schema": SCHEMA_VERSION,
        "command": "verify",
        "suite": suite,
        "config": cfg.echo(),
        "checks": results,
        "summary": {
            "passed": bool(ok),
            "max_residuals": {c["name"]: c["value"] for checks in results.values() for c in checks},
        },
    }
    return manifest, EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# Output


def records_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        row = []
        for col in CSV_COLUMNS:
            val = rec.get(col)
            row.append(repr(float(val)) if isinstance(val, (float, np.floating)) else str(val))
        writer.writerow(row)
    return buf.getvalue()


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def emit(manifest, cfg, output):
    """Write the manifest (JSON) or the per-lambda CSV plus a JSON sidecar."""
    text_json = json.dumps(_jsonable(manifest), indent=2, sort_keys=False) + "\n"
    fmt = cfg.output_format
    if output is not None and Path(output).suffix.lower() in (".json", ".csv"):
        fmt = Path(output).suffix.lower()[1:]
    if fmt == "json" or "records" not in manifest:
        _write(text_json, output)
        return
    _write(records_csv(manifest["records"]), output)
    if output is not None:
        Path(str(output) + ".manifest.json").write_text(text_json)


def build_parser():
    parser = argparse.ArgumentParser(prog="spectral-flow-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("ssf", "spectral shift profile"), ("smatrix", "scattering matrices and mu-invariant"),
                        ("verify", "run verification suites")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--output", help="output file (default: config output.path, else stdout)")
        p.add_argument("--threads", type=int, help="concurrent lambda evaluations")
        if name == "verify":
            p.add_argument("--suite", default="all", choices=SUITES + ("all",))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigurationError("--threads must be >= 1")
            cfg.threads = args.threads
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    output = args.output or os.environ.get(OUTPUT_ENV) or cfg.output_path
    try:
        if args.command == "ssf":
            manifest, code = cmd_ssf(cfg)
        elif args.command == "smatrix":
            manifest, code = cmd_smatrix(cfg)
        else:
            manifest, code = cmd_verify(cfg, args.suite, echo=lambda s: print(s, file=sys.stderr))
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"model-domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    emit(manifest, cfg, output)
    return code


if __name__ == "__main__":
    sys.exit(main())
