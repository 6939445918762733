"""Batch driver: ``starforms verify|sweep|chain|moments --config cfg.json --out out.csv``.

Configs are JSON objects. Every numeric setting has a default listed in
:data:`DEFAULTS`, and a config overrides any of them. Seeds are always
explicit integers. Output is CSV with a header row, ``.`` decimals, LF line
ends and floats printed with 17 significant digits. Rows come out in a fixed
order, so the same config gives a byte-identical file.

Exit codes: 0 all checks pass, 1 a check fails, 2 bad config, 3 I/O error.
The environment variable ``STARFORMS_WORKERS`` sets the number of worker
processes for sweeps and chain runs (default 1).
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, Iterable, List, Sequence

import numpy as np

from . import exterior as ext
from .bogovskii import BogovskiiConfig, apply_bogovskii, trace_residuals
from .chain import build_chain, glue_bc, glue_no_bc
from .constants import KINDS, cigar_family, estimate_empirical_ratio, is_nondecreasing
from .geometry import Ball, Ellipsoid
from .mollifier import build_bump, multi_indices
from .poincare import PoincareConfig, homotopy_defect
from .polyform import PolyForm, bump_cut_form, ellipsoidal_bump, random_closed_form

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

DEFAULTS: Dict[str, dict] = {
    "verify": {
        "seed": 0,
        "dims": [2, 3],
        "algebra_samples": 200,
        "homotopy_samples": 10,
        "poly_degree": 3,
        "locality_points": 40,
        "trace_tests": 5,
        "level": 4,
        "tolerances": {
            "algebra": 1e-12,
            "homotopy": 1e-8,
            "locality": 1e-10,
            "trace": 1e-3,
            "gluing_dv": 1e-7,
            "gluing_jump": 1e-8,
        },
    },
    "sweep": {
        "seed": 0,
        "n": 2,
        "ell": [1, 2],
        "kinds": ["poincare", "bogovskii"],
        "ratios": [1, 2, 4, 8],
        "radius": 0.5,
        "ensemble": 8,
        "degree": 2,
        "level": None,
        "safety": 2.0,
        "trend_rtol": {"poincare": 1e-9, "bogovskii": 1e-4},
    },
    "chain": {
        "seed": 0,
        "n": 2,
        "N": [2, 4, 8],
        "ell": [1, 2],
        "modes": ["no-bc"],
        "link_length": 3.0,
        "radius": 0.5,
        "overlap_fraction": 0.25,
        "poly_degree": 2,
        "bc_spacing": 0.025,
        "bc_bound_scale": None,
        "tolerances": {"no-bc_dv": 1e-7, "no-bc_jump": 1e-8, "bc_dv": 1e-2},
    },
    "moments": {"center": [0.0, 0.0], "radius": 1.0, "degree": 4},
}


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    """CSV cell text: integers and strings as-is, floats with 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def emit_csv(header: Sequence[str], rows: Iterable[Sequence], path: str) -> None:
    """Write a header and rows; raises ``OSError`` on I/O failure."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])


# --- config -----------------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise ConfigError(f"unknown config key {k!r}")
        if isinstance(out[k], dict) and isinstance(v, dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _dim(n) -> int:
    if not isinstance(n, int) or not 1 <= n <= ext.MAX_DIM:
        raise ConfigError(f"unsupported dimension n={n!r} (supported: 1..{ext.MAX_DIM})")
    return n


def load_config(command: str, raw: dict) -> dict:
    """Merge ``raw`` over the defaults of ``command`` and validate it."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    if raw.pop("command", command) != command:
        raise ConfigError("config command does not match the subcommand")
    cfg = _merge(DEFAULTS[command], raw)
    if "seed" in cfg and not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    for k in ("tolerances", "trend_rtol"):
        for name, tol in cfg.get(k, {}).items():
            if not isinstance(tol, (int, float)) or tol < 0:
                raise ConfigError(f"{k}.{name} must be a nonnegative number")
    if command == "verify":
        for n in cfg["dims"]:
            _dim(n)
            if n < 2:
                raise ConfigError("verification suites need n >= 2")
    elif command == "sweep":
        _dim(cfg["n"])
        for l in cfg["ell"]:
            if not 1 <= l <= cfg["n"]:
                raise ConfigError(f"ell={l} outside 1..n")
        for k in cfg["kinds"]:
            if k not in KINDS:
                raise ConfigError(f"unknown operator kind {k!r}")
        if not cfg["ratios"] or min(cfg["ratios"]) < 1:
            raise ConfigError("ratios must be a nonempty list of numbers >= 1")
        if cfg["ensemble"] < 1:
            raise ConfigError("ensemble must be >= 1")
    elif command == "chain":
        n = _dim(cfg["n"])
        if min(cfg["N"]) < 2:
            raise ConfigError("chains need N >= 2")
        for m in cfg["modes"]:
            if m not in ("no-bc", "bc"):
                raise ConfigError(f"unknown mode {m!r}")
        for l in cfg["ell"]:
            if not 1 <= l <= n:
                raise ConfigError(f"ell={l} outside 1..n")
        if not 0 < cfg["overlap_fraction"] < 0.5:
            raise ConfigError("overlap_fraction must lie in (0, 1/2)")
    elif command == "moments":
        _dim(len(cfg["center"]))
        if not cfg["radius"] > 0 or cfg["degree"] < 0:
            raise ConfigError("radius must be positive and degree nonnegative")
    return cfg


def _workers() -> int:
    raw = os.environ.get("STARFORMS_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"STARFORMS_WORKERS must be an integer, got {raw!r}") from None


def _map(fn: Callable, items: List) -> List:
    """Ordered map, in a process pool when more than one worker is requested."""
    workers = min(_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- verify --------------------------------------------------------------------------


def _algebra_suite(cfg: dict) -> List[tuple]:
    rng = np.random.default_rng(cfg["seed"])
    worst = {"anticommutativity": 0.0, "double_star": 0.0, "contraction_antiderivation": 0.0, "d_squared": 0.0}
    for n in range(2, ext.MAX_DIM + 1):
        for _ in range(cfg["algebra_samples"] // (ext.MAX_DIM - 1)):
            p, q = rng.integers(0, n + 1, size=2)
            if p + q > n:
                q = n - p
            a = ext.FormValue(n, int(p), rng.normal(size=ext.dim(n, int(p))))
            b = ext.FormValue(n, int(q), rng.normal(size=ext.dim(n, int(q))))
            ab, ba = ext.wedge(a, b), ext.wedge(b, a)
            worst["anticommutativity"] = max(worst["anticommutativity"], float(np.max(np.abs(ab.coeffs - (-1) ** (p * q) * ba.coeffs))))
            ss = ext.hodge_star(ext.hodge_star(a))
            worst["double_star"] = max(worst["double_star"], float(np.max(np.abs(ss.coeffs - (-1) ** (p * (n - p)) * a.coeffs))))
            if p >= 1 and p + q <= n:
                z = rng.normal(size=n)
                lhs = ext.contract(z, ab).coeffs
                rhs = ext.wedge(ext.contract(z, a), b).coeffs
                if q >= 1:
                    rhs = rhs + (-1) ** p * ext.wedge(a, ext.contract(z, b)).coeffs
                worst["contraction_antiderivation"] = max(worst["contraction_antiderivation"], float(np.max(np.abs(lhs - rhs))))
        for k in range(0, n - 1):
            u = PolyForm.random(n, k, 3, rng)
            worst["d_squared"] = max(worst["d_squared"], u.d().d().max_abs_coeff())
    tol = cfg["tolerances"]["algebra"]
    return [("algebra", name, val, tol) for name, val in worst.items()]


def _homotopy_suite(cfg: dict) -> List[tuple]:
    rows = []
    tol = cfg["tolerances"]["homotopy"]
    for n in cfg["dims"]:
        domains = {"ball": Ball(np.zeros(n), 1.0), "ellipsoid": Ellipsoid(np.zeros(n), [2.0] + [0.5] * (n - 1), ball=(np.zeros(n), 0.5))}
        for name, dom in domains.items():
            mol = build_bump(dom.ball_center, dom.ball_radius, moment_degree=cfg["poly_degree"] + 4)
            worst = 0.0
            for l in range(1, n + 1):
                for s in range(cfg["homotopy_samples"]):
                    u = random_closed_form(n, l, cfg["poly_degree"], cfg["seed"] * 1000 + 97 * l + s)
                    worst = max(worst, homotopy_defect(PoincareConfig(mol, l), u))
            rows.append(("homotopy", f"dPu_minus_u_n{n}_{name}", worst, tol))
    return rows


def _locality_trace_suite(cfg: dict) -> List[tuple]:
    rng = np.random.default_rng(cfg["seed"] + 1)
    disk = Ball(np.zeros(2), 1.0, ball=([0.0, 0.0], 0.3))
    bcfg = BogovskiiConfig(build_bump([0.0, 0.0], 0.3), 1, disk)
    c, r = np.array([0.45, 0.1]), 0.3
    u = bump_cut_form(PolyForm.random(2, 0, 2, rng), c, r).d()
    # points of the disk outside the convex hull of the ball and the support (equal radii)
    X = disk.sample(20 * cfg["locality_points"], rng)
    t = np.clip(X @ c / (c @ c), 0.0, 1.0)
    far = X[np.linalg.norm(X - t[:, None] * c, axis=1) > r + 0.05][: cfg["locality_points"]]
    loc = float(np.max(np.abs(apply_bogovskii(bcfg, u, far))))
    psis = [PolyForm.random(2, 1, 2, rng) for _ in range(cfg["trace_tests"])]
    pairs = trace_residuals(bcfg, u, disk, psis, cfg["level"], cfg["tolerances"]["trace"])
    k = int(np.argmax([v / t if t else np.inf for v, t in pairs]))
    return [
        ("locality", "bogovskii_outside_hull", loc, cfg["tolerances"]["locality"]),
        ("trace", "bogovskii_trace_pairing", pairs[k][0], pairs[k][1]),
    ]


def _gluing_suite(cfg: dict) -> List[tuple]:
    chain = build_chain(3, seed=cfg["seed"])
    rows = []
    for l in (1, 2):
        u = random_closed_form(2, l, 2, cfg["seed"] + l)
        _, rep = glue_no_bc(chain, u, seed=cfg["seed"])
        rows.append(("gluing", f"no_bc_dv_residual_l{l}", rep.max_dv_residual, cfg["tolerances"]["gluing_dv"]))
        rows.append(("gluing", f"no_bc_interface_jump_l{l}", rep.max_interface_jump, cfg["tolerances"]["gluing_jump"]))
    return rows


def run_verify(cfg: dict, out: str) -> int:
    rows = []
    for suite in (_algebra_suite, _homotopy_suite, _locality_trace_suite, _gluing_suite):
        rows.extend(suite(cfg))
    table = [(s, name, val, tol, bool(val <= tol)) for s, name, val, tol in rows]
    emit_csv(["suite", "invariant", "residual", "tolerance", "pass"], table, out)
    failed = [f"{s}/{name}" for s, name, _, _, ok in table if not ok]
    for name in failed:
        print(f"FAIL {name}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# --- sweep -----------------------------------------------------------------------------


def _sweep_item(args):
    kind, l, ratio, cfg = args
    dom = cigar_family([ratio], cfg["n"], cfg["radius"])[0]
    return estimate_empirical_ratio(kind, dom, l, cfg["ensemble"], cfg["degree"], cfg["seed"], level=cfg["level"])


SWEEP_HEADER = ["n", "ell", "kind", "R", "rho", "vol_ratio", "kappa", "bound", "empirical", "seed", "ensemble",
                "within_bound", "trend"]


def run_sweep(cfg: dict, out: str) -> int:
    items = [(k, l, t, cfg) for k in cfg["kinds"] for l in cfg["ell"] for t in cfg["ratios"]]
    reports = _map(_sweep_item, items)
    rows, ok = [], True
    nr = len(cfg["ratios"])
    for g in range(0, len(items), nr):
        group = reports[g:g + nr]
        kind = items[g][0]
        scale = cfg["safety"] * group[0].empirical_ratio
        bounds = [scale * r.stats.ratio_diam * r.kappa for r in group]
        emp = [r.empirical_ratio for r in group]
        order = np.argsort(cfg["ratios"], kind="stable")
        trend = is_nondecreasing(np.array(emp)[order], cfg["trend_rtol"][kind]) and is_nondecreasing(np.array(bounds)[order])
        for r, b, t in zip(group, bounds, cfg["ratios"]):
            within = r.empirical_ratio <= b
            ok &= within and trend
            rows.append((cfg["n"], r.l, kind, r.stats.R, r.stats.rho, r.stats.ratio_vol, r.kappa, b, r.empirical_ratio,
                         cfg["seed"], cfg["ensemble"], within, trend))
    emit_csv(SWEEP_HEADER, rows, out)
    return EXIT_OK if ok else EXIT_FAIL


# --- chain -------------------------------------------------------------------------------


CHAIN_HEADER = ["N", "ell", "mode", "max_dv_residual", "max_interface_jump", "v_h1", "chain_bound", "C_T", "C_S", "C_P",
                "seed"]


def _chain_item(args):
    N, l, mode, cfg = args
    n = cfg["n"]
    chain = build_chain(N, n, cfg["link_length"], cfg["radius"], cfg["overlap_fraction"], seed=cfg["seed"])
    if mode == "no-bc":
        u = random_closed_form(n, l, cfg["poly_degree"], cfg["seed"])
        _, rep = glue_no_bc(chain, u, seed=cfg["seed"])
        ok = (rep.max_dv_residual <= cfg["tolerances"]["no-bc_dv"]
              and rep.max_interface_jump <= cfg["tolerances"]["no-bc_jump"] and rep.bound_holds)
    else:
        semi = [0.4 * cfg["link_length"]] + [0.85 * cfg["radius"]] * (n - 1)
        w = ellipsoidal_bump(np.zeros(n), semi)
        u = w.d()
        _, rep = glue_bc(chain, u, spacing=cfg["bc_spacing"], seed=cfg["seed"], bound_scale=cfg["bc_bound_scale"],
                         compute_h1=True)
        ok = rep.max_dv_residual <= cfg["tolerances"]["bc_dv"] and rep.bound_holds
    return rep, ok


def run_chain(cfg: dict, out: str) -> int:
    items = []
    for mode in cfg["modes"]:
        for l in cfg["ell"]:
            if mode == "bc" and l != 1:
                continue
            for N in cfg["N"]:
                items.append((N, l, mode, cfg))
    results = _map(_chain_item, items)
    rows = [(r.N, r.l, r.mode, r.max_dv_residual, r.max_interface_jump, r.v_h1, r.chain_bound, r.C_T, r.C_S, r.C_P,
             cfg["seed"]) for r, _ in results]
    emit_csv(CHAIN_HEADER, rows, out)
    return EXIT_OK if all(ok for _, ok in results) else EXIT_FAIL


# --- moments -----------------------------------------------------------------------------


def run_moments(cfg: dict, out: str) -> int:
    mol = build_bump(cfg["center"], cfg["radius"], moment_degree=cfg["degree"])
    n = mol.n
    rows = [tuple(a) + (mol.moment(a),) for a in multi_indices(n, cfg["degree"])]
    emit_csv([f"alpha_{i + 1}" for i in range(n)] + ["value"], rows, out)
    return EXIT_OK


COMMANDS = {"verify": run_verify, "sweep": run_sweep, "chain": run_chain, "moments": run_moments}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="starforms", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file (defaults are used when omitted)")
    parser.add_argument("--out", required=True, help="output CSV path")
    args = parser.parse_args(argv)
    try:
        raw = {}
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        cfg = load_config(args.command, raw)
        _workers()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except (json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args.out)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
