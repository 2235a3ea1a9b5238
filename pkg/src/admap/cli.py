"""Batch front-end: single-point analyses and parameter scans.

Scans exploit the reset-parameter decomposition Phi(w) = gamma*phi_raw(w) + d:
the stable-manifold geometry and a dense sampling of phi_raw are computed
once per scan and shared across all (d, gamma) cells, which keeps staircase
and plane scans deterministic and fast.
"""

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Optional, Sequence

import numpy as np

from .adaptation import (
    SampledPhi,
    iterate_orbit,
    sample_map,
)
from .errors import AdmapError, ConditionViolatedError
from .flow import NonSpiking, integrate_to_spike
from .manifolds import ResetLineGeometry, build_geometry
from .model import ModelParams, fixed_points
from .rotation import (
    N_DEFAULT,
    Q_MAX,
    build_lift,
    classify_regime,
    rotation_interval,
    rotation_number,
    signature_from_rho,
)
from .transient import SignatureTarget, accessible_counts, design_interval, verify_target

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3
EXIT_HARD = 4


def fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.17g}"
    return str(x)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(fmt(x) for x in r))
    text = "\n".join(lines) + "\n"
    _write(path, text)


def write_json(path, obj):
    _write(path, json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON-serializable: {type(o)}")


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------- arguments

CONFIG_KEYS = {
    "a": float, "eps": float, "b": float, "I": float, "vR": float,
    "gamma": float, "d": float, "w0": float, "iters": int,
    "scan-d": str, "scan-gamma": str, "out": str, "format": str,
    "workers": int, "dump-trajectory": bool, "signature-target": str,
}


def load_config(path):
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line is not key=value: {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in CONFIG_KEYS:
                raise ValueError(f"unknown config key: {k}")
            caster = CONFIG_KEYS[k]
            out[k] = (v.lower() in ("1", "true", "yes")) if caster is bool \
                else caster(v)
    return out


def add_common(parser):
    parser.add_argument("--config", type=str, default=None,
                        help="flat key=value config file")
    parser.add_argument("--a", type=float, default=None)
    parser.add_argument("--eps", type=float, default=None)
    parser.add_argument("--b", type=float, default=None)
    parser.add_argument("--I", type=float, default=None)
    parser.add_argument("--vR", type=float, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--d", type=float, default=None)
    parser.add_argument("--w0", type=float, default=None)
    parser.add_argument("--iters", type=int, default=None)
    parser.add_argument("--scan-d", type=str, default=None, metavar="LO:HI:N")
    parser.add_argument("--scan-gamma", type=str, default=None, metavar="LO:HI:N")
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--dump-trajectory", action="store_true", default=None)
    parser.add_argument("--signature-target", type=str, default=None)


DEFAULTS = {
    "a": 0.2, "eps": 0.1, "b": 1.0, "I": 0.1175, "vR": 0.1158,
    "gamma": 1.0, "d": 0.0, "w0": None, "iters": None,
    "scan-d": None, "scan-gamma": None, "out": None, "format": "json",
    "workers": 1, "dump-trajectory": False, "signature-target": None,
}


def resolve(args):
    """Merge defaults < config file < explicit CLI flags."""
    merged = dict(DEFAULTS)
    if args.config:
        merged.update(load_config(args.config))
    for key in CONFIG_KEYS:
        attr = key.replace("-", "_")
        val = getattr(args, attr, None)
        if val is not None:
            merged[key] = val
    return merged


def params_from(merged) -> ModelParams:
    return ModelParams(
        a=merged["a"], eps=merged["eps"], b=merged["b"], I=merged["I"],
        vR=merged["vR"], gamma=merged["gamma"], d=merged["d"],
    )


def parse_range(spec, name):
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except Exception:
        raise ValueError(f"--{name} must be LO:HI:N, got {spec!r}")
    if not (hi > lo and n >= 2):
        raise ValueError(f"--{name}: need HI > LO and N >= 2")
    return np.linspace(lo, hi, n)


# ------------------------------------------------------------ scan machinery

@dataclass
class ScanContext:
    """Geometry and raw-map sampling shared by every cell of a scan."""

    params: ModelParams
    equilibria: object
    geometry: ResetLineGeometry       # reset-free part (wi, w_lim+-)
    sampled: SampledPhi

    @classmethod
    def build(cls, params, d_values, gamma_values, n=2000):
        eq = fixed_points(params)
        geo = build_geometry(params, equilibria=eq)
        lo = min(g * geo.w_lim_minus + d
                 for g in gamma_values for d in d_values)
        hi = max(g * geo.w_lim_plus + d
                 for g in gamma_values for d in d_values)
        span = hi - lo
        sp = SampledPhi(params, geo, (lo - 0.01 * span, hi + 0.01 * span),
                        n=n, equilibria=eq)
        return cls(params=params, equilibria=eq, geometry=geo, sampled=sp)

    def principal_geometry(self):
        """Two-intersection simplification: keep only the outermost
        stable-manifold crossings (the near-tangential spiral pairs are
        dropped, matching the two-intersections assumption of the (d, gamma)
        partition figure)."""
        geo = self.geometry
        if geo.p <= 2:
            return geo
        wi = (geo.wi[0], geo.wi[-1])
        return ResetLineGeometry(
            wi=wi, p=2, p1=1, w_star=geo.w_star,
            w_star_star=geo.w_star_star, w_lim_minus=geo.w_lim_minus,
            w_lim_plus=geo.w_lim_plus, gamma=geo.gamma, d=geo.d,
        )


def _snap_frac(rho, bound, q_max=Q_MAX):
    frac = Fraction(float(rho)).limit_denominator(q_max)
    if abs(float(frac) - rho) <= bound:
        return frac.numerator, frac.denominator
    return None


def _classify_cell(ctx, geo, gamma, d):
    g = geo.with_reset(gamma=gamma, d=d)
    smap = sample_map(ctx.params, g, (g.beta, g.alpha), n=0,
                      evaluator=ctx.sampled.phi_evaluator(gamma, d))
    return g, smap, classify_regime(smap)


def _vector_rho(ctx, geo, gammas, ds, x0s, n_iter):
    """Rotation numbers of the (monotone) lifts for many reset cells at
    once; elementwise numpy iteration so the results do not depend on how
    cells are chunked across workers."""
    gammas = np.asarray(gammas, float)
    ds = np.asarray(ds, float)
    alpha = gammas * geo.w_lim_plus + ds
    beta = gammas * geo.w_lim_minus + ds
    theta = alpha - beta
    # per-cell discontinuity: first stable-manifold point above beta (may
    # exceed alpha, in which case the branch below never triggers)
    wi_arr = np.asarray(geo.wi)
    idx = np.searchsorted(wi_arr, beta, side="right")
    w1 = np.where(idx < len(wi_arr), wi_arr[np.minimum(idx, len(wi_arr) - 1)],
                  np.inf)
    x = np.asarray(x0s, float).copy()
    x0 = x.copy()
    sp = ctx.sampled
    for _ in range(n_iter):
        k = np.ceil((x - alpha) / theta)
        r = x - k * theta
        low = r <= beta
        r[low] += theta[low]
        k[low] -= 1
        high = r > alpha
        r[high] -= theta[high]
        k[high] += 1
        vals = gammas * sp(r) + ds
        x = vals + theta * (r > w1) + k * theta
    return (x - x0) / (n_iter * theta)


def _envelope_interval_rho(ctx, geo, gamma, d, n_iter, n_samples=10_000):
    g = geo.with_reset(gamma=gamma, d=d)
    beta, alpha = g.beta, g.alpha
    theta = alpha - beta
    w1 = next(w for w in g.wi if beta < w < alpha)
    eps = 1e-9
    base = np.linspace(beta + eps, alpha, n_samples)
    offs = np.geomspace(max(theta * 1e-2, eps), eps, 16)
    grid = np.unique(np.concatenate(
        [base, w1 - offs, w1 + offs, [w1], alpha - offs]))
    grid = grid[(grid > beta) & (grid <= alpha)]
    phi_vals = gamma * ctx.sampled(grid) + d
    psi = np.where(grid == w1, alpha,
                   np.where(grid < w1, phi_vals, phi_vals + theta))
    lo = np.minimum.accumulate(psi[::-1])[::-1]
    hi = np.maximum.accumulate(psi)
    lo = np.maximum.accumulate(np.minimum(lo, theta + psi.min()))
    hi = np.maximum.accumulate(np.maximum(hi, psi.max() - theta))

    def rho_of(values):
        x = 0.5 * (beta + w1)
        x0 = x
        for _ in range(n_iter):
            k = math.ceil((x - alpha) / theta)
            r = x - k * theta
            if r <= beta:
                r += theta
                k -= 1
            elif r > alpha:
                r -= theta
                k += 1
            x = float(np.interp(r, grid, values)) + k * theta
        return (x - x0) / (n_iter * theta)

    return rho_of(lo), rho_of(hi)


def _staircase_chunk(ctx, geo, gamma, n_iter, d_chunk):
    rows = []
    failures = 0
    monotone = np.zeros(len(d_chunk), dtype=bool)
    labels = []
    for i, d in enumerate(d_chunk):
        try:
            _, smap, lab = _classify_cell(ctx, geo, gamma, float(d))
            if not (lab.conditions["C1"] and lab.conditions["C3"]):
                raise ConditionViolatedError(
                    "C1" if not lab.conditions["C1"] else "C3",
                    lab.witnesses)
            labels.append(lab)
            monotone[i] = lab.witnesses["phiAlpha"] <= lab.witnesses["phiBeta"]
        except AdmapError as exc:
            labels.append(exc)
    w1 = next(w for w in geo.wi
              if gamma * geo.w_lim_minus + d_chunk[0] < w)
    alpha = gamma * geo.w_lim_plus + np.asarray(d_chunk)
    beta = gamma * geo.w_lim_minus + np.asarray(d_chunk)
    x0 = 0.5 * (beta + w1)
    rhos = _vector_rho(ctx, geo, np.full(len(d_chunk), gamma),
                       np.asarray(d_chunk), x0, n_iter)
    bound = 1.0 / n_iter
    for i, d in enumerate(d_chunk):
        lab = labels[i]
        if isinstance(lab, Exception):
            rows.append((d, "error", math.nan, math.nan, math.nan,
                         "", "", f"{type(lab).__name__}"))
            failures += 1
            continue
        if monotone[i]:
            rho = float(rhos[i])
            snap = _snap_frac(rho, bound)
            rows.append((d, "number", rho, rho, rho,
                         snap[0] if snap else "", snap[1] if snap else "",
                         lab.region))
        else:
            a, b = _envelope_interval_rho(ctx, geo, gamma, float(d), n_iter)
            snap = _snap_frac(0.5 * (a + b), bound) if b - a <= 2 * bound else None
            rows.append((d, "interval", math.nan, a, b,
                         snap[0] if snap else "", snap[1] if snap else "",
                         lab.region))
    return rows, failures


def _run_chunked(fn, chunks, workers):
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


# ------------------------------------------------------------- subcommands

def cmd_equilibria(merged):
    params = params_from(merged)
    eq = fixed_points(params)
    lam = eq.focus_eigen
    obj = {
        "focus": {"v": eq.v_minus, "w": eq.w_minus,
                  "re": lam.real, "im": abs(lam.imag)},
        "saddle": {"v": eq.v_plus, "w": eq.w_plus,
                   "mu": eq.saddle_eigen.mu, "nu": eq.saddle_eigen.nu,
                   "xi": eq.saddle_eigen.xi},
    }
    if merged["format"] == "csv":
        write_csv(merged["out"],
                  ["point", "v", "w", "e1", "e2"],
                  [("focus", eq.v_minus, eq.w_minus, lam.real, abs(lam.imag)),
                   ("saddle", eq.v_plus, eq.w_plus,
                    -eq.saddle_eigen.mu, eq.saddle_eigen.nu)])
    else:
        write_json(merged["out"], obj)
    return EXIT_OK


def cmd_manifold(merged):
    params = params_from(merged)
    eq = fixed_points(params)
    geo = build_geometry(params, equilibria=eq)
    g = geo.with_reset(gamma=merged["gamma"], d=merged["d"])
    if merged["format"] == "csv":
        write_csv(merged["out"], ["wi"], [(w,) for w in g.wi])
    else:
        write_json(merged["out"], g.to_dict())
    return EXIT_OK


def cmd_phi(merged):
    params = params_from(merged)
    eq = fixed_points(params)
    geo = build_geometry(params, equilibria=eq).with_reset(
        gamma=merged["gamma"], d=merged["d"])
    if merged["w0"] is not None:
        from .adaptation import phi as phi_op
        pv = phi_op(params, geo, merged["w0"], equilibria=eq)
        rows = [(merged["w0"], pv.value, pv.half_rotations)]
    else:
        n = merged["iters"] or 200
        smap = sample_map(params, geo, (geo.beta, geo.alpha), n=n,
                          equilibria=eq)
        rows = list(zip(smap.grid, smap.values, smap.osc_counts))
    if merged["format"] == "json":
        write_json(merged["out"], [
            {"w": w, "phi": v, "halfRotations": h} for w, v, h in rows])
    else:
        write_csv(merged["out"], ["w", "phi", "halfRotations"], rows)
    return EXIT_OK


def cmd_orbit(merged):
    params = params_from(merged)
    eq = fixed_points(params)
    geo = build_geometry(params, equilibria=eq).with_reset(
        gamma=merged["gamma"], d=merged["d"])
    w0 = merged["w0"]
    if w0 is None:
        raise ValueError("--w0 is required for orbit")
    n = merged["iters"] or 100
    rec = iterate_orbit(params, geo, w0, n, equilibria=eq)
    rows = [(k, rec.iterates[k],
             rec.half_rotations[k] if k < len(rec.half_rotations) else "")
            for k in range(len(rec.iterates))]
    if merged["format"] == "json":
        write_json(merged["out"], {
            "w0": w0,
            "iterates": rec.iterates,
            "halfRotations": rec.half_rotations,
            "signature": rec.signature.to_dict(),
        })
    else:
        write_csv(merged["out"], ["k", "w_k", "halfRotations_k"], rows)
    if merged["dump-trajectory"]:
        traj_rows = []
        w = float(w0)
        for k in range(n):
            res = integrate_to_spike(params, w, equilibria=eq,
                                     return_trajectory=True)
            if isinstance(res, NonSpiking):
                break
            ev, traj = res
            traj_rows.extend(
                (k, t, v, ww) for t, v, ww in zip(traj.t, traj.v, traj.w))
            w = geo.gamma * ev.w_at_spike + geo.d
        base = merged["out"] or "orbit"
        write_csv(f"{base}.traj.csv", ["k", "t", "v", "w"], traj_rows)
    return EXIT_OK


def _point_interpolant(params, geo, eq, n=600):
    """Raw-map interpolant on an interval covering both the raw limits and
    the reset images (beta, alpha)."""
    lo = min(geo.w_lim_minus, geo.beta)
    hi = max(geo.w_lim_plus, geo.alpha)
    span = hi - lo
    return SampledPhi(params, geo, (lo - 0.01 * span, hi + 0.01 * span),
                      n=n, equilibria=eq)


def cmd_rotation(merged):
    params = params_from(merged)
    eq = fixed_points(params)
    geo = build_geometry(params, equilibria=eq).with_reset(
        gamma=merged["gamma"], d=merged["d"])
    sp = _point_interpolant(params, geo, eq)
    smap = sample_map(params, geo, (geo.beta, geo.alpha), n=0, equilibria=eq,
                      evaluator=sp.phi_evaluator(geo.gamma, geo.d))
    label = classify_regime(smap)
    n = merged["iters"] or N_DEFAULT
    lift = build_lift(smap)
    if lift.monotone:
        res = rotation_number(lift, w0=merged["w0"], n=n)
    else:
        res = rotation_interval(lift, n=n)
    out = res.to_dict()
    out["region"] = label.region
    out["conditions"] = label.conditions
    out["witnesses"] = label.witnesses
    write_json(merged["out"], out)
    return EXIT_OK


def cmd_staircase(merged):
    params = params_from(merged)
    if not merged["scan-d"]:
        raise ValueError("staircase requires --scan-d LO:HI:N")
    ds = parse_range(merged["scan-d"], "scan-d")
    gamma = merged["gamma"]
    n_iter = merged["iters"] or N_DEFAULT
    ctx = ScanContext.build(params, ds, [gamma])
    geo = ctx.principal_geometry()
    workers = max(1, merged["workers"])
    chunks = [c for c in np.array_split(ds, workers) if len(c)]
    results = _run_chunked(
        partial(_staircase_chunk, ctx, geo, gamma, n_iter), chunks, workers)
    rows = []
    failures = 0
    for r, f in results:
        rows.extend(r)
        failures += f
    header = ["d", "kind", "rho", "a", "b", "p", "q", "region"]
    if merged["format"] == "json":
        write_json(merged["out"], [dict(zip(header, row)) for row in rows])
    else:
        write_csv(merged["out"], header, rows)
    return EXIT_PARTIAL if failures else EXIT_OK


def _boundary_segments(D, G, field):
    """Zero-level segments of a witness field on the scan grid (linear
    interpolation along grid edges, one segment per sign-change cell)."""
    segs = []
    nd, ng = field.shape
    for i in range(nd - 1):
        for j in range(ng - 1):
            pts = []
            corners = [
                (field[i, j], field[i + 1, j], D[i], D[i + 1], G[j], G[j]),
                (field[i, j], field[i, j + 1], D[i], D[i], G[j], G[j + 1]),
                (field[i + 1, j], field[i + 1, j + 1],
                 D[i + 1], D[i + 1], G[j], G[j + 1]),
                (field[i, j + 1], field[i + 1, j + 1],
                 D[i], D[i + 1], G[j + 1], G[j + 1]),
            ]
            for f0, f1, d0, d1, g0, g1 in corners:
                if np.isnan(f0) or np.isnan(f1) or f0 * f1 >= 0:
                    continue
                t = f0 / (f0 - f1)
                pts.append((d0 + t * (d1 - d0), g0 + t * (g1 - g0)))
            if len(pts) >= 2:
                segs.append([list(pts[0]), list(pts[1])])
    return segs


def _plane_chunk(ctx, geo, n_iter, cells):
    """cells: list of (i, j, d, gamma).  Returns rows + witness values.

    The rotation iteration runs vectorized over the whole chunk; elementwise
    numpy ops make the per-cell numbers independent of the chunking."""
    labels = []
    for (i, j, d, gamma) in cells:
        try:
            _, _, lab = _classify_cell(ctx, geo, gamma, d)
            labels.append(lab)
        except AdmapError as exc:
            labels.append(exc)
    ds = np.array([c[2] for c in cells])
    gs = np.array([c[3] for c in cells])
    rhos = _vector_rho(ctx, geo, gs, ds, np.zeros(len(cells)), n_iter)
    bound = 1.0 / n_iter
    out = []
    for (i, j, d, gamma), lab, rho in zip(cells, labels, rhos):
        if isinstance(lab, Exception):
            out.append((i, j, d, gamma, math.nan, "", "", "error", None,
                        type(lab).__name__))
            continue
        rho = float(rho)
        snap = _snap_frac(rho, bound)
        out.append((i, j, d, gamma, rho,
                    snap[0] if snap else "", snap[1] if snap else "",
                    lab.region, lab.witnesses, None))
    return out


def cmd_plane(merged):
    params = params_from(merged)
    if not (merged["scan-d"] and merged["scan-gamma"]):
        raise ValueError("plane requires --scan-d and --scan-gamma")
    ds = parse_range(merged["scan-d"], "scan-d")
    gs = parse_range(merged["scan-gamma"], "scan-gamma")
    n_iter = merged["iters"] or 2000
    ctx = ScanContext.build(params, ds, gs)
    geo = ctx.principal_geometry()
    cells = [(i, j, float(d), float(g))
             for i, d in enumerate(ds) for j, g in enumerate(gs)]
    workers = max(1, merged["workers"])
    chunk_list = [[cells[i] for i in idxs] for idxs in
                  np.array_split(np.arange(len(cells)), workers)
                  if len(idxs)]
    results = _run_chunked(
        partial(_plane_chunk, ctx, geo, n_iter), chunk_list, workers)
    flat = [row for chunk in results for row in chunk]
    flat.sort(key=lambda r: (r[0], r[1]))
    failures = sum(1 for r in flat if r[9] is not None)

    witness_fields = {}
    for name in ("overlap", "phiBeta_vs_w1", "phiAlpha_vs_w1", "alpha_vs_wstar"):
        witness_fields[name] = np.full((len(ds), len(gs)), np.nan)
    for (i, j, d, gamma, rho, p, q, region, wit, err) in flat:
        if wit is None:
            continue
        witness_fields["overlap"][i, j] = wit["phiAlpha"] - wit["phiBeta"]
        witness_fields["phiBeta_vs_w1"][i, j] = wit["phiBeta"] - wit["w1"]
        witness_fields["phiAlpha_vs_w1"][i, j] = wit["phiAlpha"] - wit["w1"]
        witness_fields["alpha_vs_wstar"][i, j] = wit["alpha"] - wit["wStar"]
    boundaries = {name: _boundary_segments(ds, gs, f)
                  for name, f in witness_fields.items()}

    header = ["d", "gamma", "rho", "p", "q", "region"]
    rows = [(d, gamma, rho, p, q, region)
            for (i, j, d, gamma, rho, p, q, region, wit, err) in flat]
    if merged["format"] == "json":
        write_json(merged["out"], {
            "cells": [dict(zip(header, row)) for row in rows],
            "boundaries": boundaries,
        })
    else:
        write_csv(merged["out"], header, rows)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_signature_from_rho(merged, extra):
    if len(extra) != 2:
        raise ValueError("signature-from-rho needs positional P Q")
    p, q = int(extra[0]), int(extra[1])
    sig = signature_from_rho(p, q)
    write_json(merged["out"], sig.to_dict())
    return EXIT_OK


def cmd_transient_design(merged):
    params = params_from(merged)
    if not merged["signature-target"]:
        raise ValueError("transient-design requires --signature-target")
    target = SignatureTarget(tuple(
        float(s) for s in merged["signature-target"].split(",")))
    eq = fixed_points(params)
    geo = build_geometry(params, equilibria=eq).with_reset(
        gamma=merged["gamma"], d=merged["d"])
    J = design_interval(params, geo, target, equilibria=eq)
    mid = 0.5 * (J[0] + J[1])
    verified = verify_target(params, geo, mid, target, equilibria=eq)
    write_json(merged["out"], {
        "target": list(target.sequence),
        "accessible": accessible_counts(geo),
        "J": [J[0], J[1]],
        "verified": bool(verified),
    })
    return EXIT_OK if verified else EXIT_PARTIAL


def cmd_analyze(merged):
    params = params_from(merged)
    eq = fixed_points(params)
    report = {"params": {
        "a": params.a, "eps": params.eps, "b": params.b, "I": params.I,
        "vR": params.vR, "gamma": merged["gamma"], "d": merged["d"],
    }}
    lam = eq.focus_eigen
    report["equilibria"] = {
        "focus": {"v": eq.v_minus, "w": eq.w_minus,
                  "re": lam.real, "im": abs(lam.imag)},
        "saddle": {"v": eq.v_plus, "w": eq.w_plus,
                   "mu": eq.saddle_eigen.mu, "nu": eq.saddle_eigen.nu,
                   "xi": eq.saddle_eigen.xi},
    }
    failures = 0
    try:
        geo = build_geometry(params, equilibria=eq).with_reset(
            gamma=merged["gamma"], d=merged["d"])
        report["geometry"] = geo.to_dict()
        sp = _point_interpolant(params, geo, eq)
        smap = sample_map(params, geo, (geo.beta, geo.alpha), n=0,
                          equilibria=eq,
                          evaluator=sp.phi_evaluator(geo.gamma, geo.d))
        label = classify_regime(smap)
        report["regime"] = label.to_dict()
        n = merged["iters"] or N_DEFAULT
        try:
            lift = build_lift(smap)
            res = rotation_number(lift, n=n) if lift.monotone \
                else rotation_interval(lift, n=n)
            report["rotation"] = res.to_dict()
        except AdmapError as exc:
            report["rotation"] = {"error": type(exc).__name__, "detail": str(exc)}
            failures += 1
        w0 = merged["w0"]
        if w0 is None:
            interior = [w for w in geo.wi if geo.beta < w < geo.alpha]
            w0 = 0.5 * (geo.beta + (interior[0] if interior else geo.alpha))
        rec = iterate_orbit(params, geo, w0, 200, equilibria=eq)
        report["signature"] = rec.signature.to_dict()
        report["orbitW0"] = w0
    except AdmapError as exc:
        report["geometryError"] = {"error": type(exc).__name__,
                                   "detail": str(exc)}
        failures += 1
    write_json(merged["out"], report)
    return EXIT_PARTIAL if failures else EXIT_OK


# -------------------------------------------------------------------- main

def build_parser():
    ap = argparse.ArgumentParser(
        prog="admap",
        description="Adaptation-map toolkit: analyses and parameter scans",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    names = ("equilibria", "manifold", "phi", "orbit", "rotation",
             "staircase", "plane", "signature-from-rho", "transient-design",
             "analyze")
    for name in names:
        p = sub.add_parser(name)
        add_common(p)
        if name == "signature-from-rho":
            p.add_argument("pq", nargs=2, metavar=("P", "Q"))
    return ap


DISPATCH = {
    "equilibria": cmd_equilibria,
    "manifold": cmd_manifold,
    "phi": cmd_phi,
    "orbit": cmd_orbit,
    "rotation": cmd_rotation,
    "staircase": cmd_staircase,
    "plane": cmd_plane,
    "transient-design": cmd_transient_design,
    "analyze": cmd_analyze,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code != 0 else EXIT_OK
    try:
        merged = resolve(args)
        if args.command == "signature-from-rho":
            return cmd_signature_from_rho(merged, args.pq)
        return DISPATCH[args.command](merged)
    except (ValueError, AdmapError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - hard-failure boundary
        sys.stderr.write(f"hard failure: {type(exc).__name__}: {exc}\n")
        return EXIT_HARD


if __name__ == "__main__":
    sys.exit(main())
