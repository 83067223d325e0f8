"""Command-line front end.

Configuration is an INI file with sectioned flat key/value blocks::

    [params]    alpha, beta, theta, p, q
    [field]     kind, size, center, amplitude
    [grid]      counts  (lattice over the field support) or origin, spacing, counts
    [sampling]  seed, x_samples, h_max, n_boot, pairs, configs, samples, s_values, deltas, stride
    [points]    points = x1,x2,x3; x1,x2,x3; ...
    [baseline]  alpha, x, a, b, n, exps, counts

Every run writes ``<command>.csv`` (first line ``# config_hash=<hash>``,
then the documented header) and ``<command>.report.json``.  Exit codes:
0 success, 2 schema error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from .dyadic import (classify_many, cube_inclusion_check, in_shell, lemma51_cube,
                     random_case3_config)
from .fields import (CoverageError, InvalidShape, QuadratureGrid, make_field)
from .kernels import KernelSpec, SingularPoint, eval_kernel
from .operators import (OperatorInstance, apply, baseline_1d, baseline_3param,
                        build_prefix_table, cone_values, strong_maximal, zygmund_maximal)
from .params import (ConstraintViolation, InfeasibleRegion, OperatorParams, ThreeParamExponents,
                     compute_vartheta, validate)
from .report import ExperimentReport, config_hash

COMMANDS = ("kernel-eval", "partition-check", "shear-identity", "operator-apply", "maximal",
            "hedberg", "decay", "scaling", "lemma51", "baseline")

# Monte Carlo commands must carry a seed
SEEDED = {"partition-check", "shear-identity", "hedberg", "decay", "lemma51"}

HEADERS = {
    "kernel-eval": ["x1", "x2", "x3", "value", "flushed"],
    "partition-check": ["metric", "value"],
    "shear-identity": ["s", "operator_rel_err", "phi_abs_err", "maximal_rel_err", "norm_ratio_rel_err"],
    "operator-apply": ["x1", "x2", "x3", "piece", "value"],
    "maximal": ["x1", "x2", "x3", "strong", "zygmund"],
    "hedberg": ["x_index", "ell", "lhs", "rhs", "ratio", "lambda", "ratio_j_max"],
    "decay": ["h", "S"],
    "scaling": ["delta", "ratio"],
    "lemma51": ["metric", "value"],
    "baseline": ["metric", "value"],
}


class SchemaError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# ------------------------------------------------------------- config

class Config:
    """Typed access to the sectioned config; missing fields raise :class:`SchemaError`."""

    def __init__(self, raw: dict[str, dict[str, str]]):
        self.raw = raw

    @classmethod
    def read(cls, path: str | None) -> "Config":
        cp = configparser.ConfigParser()
        if path is not None:
            if not cp.read(path):
                raise SchemaError(f"cannot read config file {path}")
        return cls({s: dict(cp[s]) for s in cp.sections()})

    def _get(self, section: str, key: str, default):
        sec = self.raw.get(section, {})
        if key in sec:
            return sec[key]
        if default is _REQUIRED:
            raise SchemaError(f"missing required field [{section}] {key}")
        return default

    def num(self, section: str, key: str, default=None) -> float:
        v = self._get(section, key, _REQUIRED if default is None else default)
        try:
            return float(v)
        except (TypeError, ValueError):
            raise SchemaError(f"[{section}] {key} must be a number, got {v!r}") from None

    def int(self, section: str, key: str, default=None) -> int:
        v = self.num(section, key, default)
        if v != int(v):
            raise SchemaError(f"[{section}] {key} must be an integer, got {v}")
        return int(v)

    def vec(self, section: str, key: str, default=None) -> list[float]:
        v = self._get(section, key, _REQUIRED if default is None else default)
        if not isinstance(v, str):
            return list(v)
        try:
            return [float(t) for t in v.replace(";", ",").split(",") if t.strip()]
        except ValueError:
            raise SchemaError(f"[{section}] {key} must be a comma list of numbers") from None

    def text(self, section: str, key: str, default=None) -> str:
        return str(self._get(section, key, _REQUIRED if default is None else default))

    def set_seed(self, seed: int) -> None:
        self.raw.setdefault("sampling", {})["seed"] = str(seed)

    def seed(self) -> int:
        return self.int("sampling", "seed")


_REQUIRED = object()


def parse_params(cfg: Config) -> OperatorParams:
    return validate(OperatorParams(cfg.num("params", "alpha"), cfg.num("params", "beta"),
                                   cfg.num("params", "theta", 1.0), cfg.num("params", "p"),
                                   cfg.num("params", "q")))


def parse_field(cfg: Config):
    kind = cfg.text("field", "kind")
    size = cfg.vec("field", "size", [1.0])
    center = cfg.vec("field", "center", [0.0])
    return make_field(kind, size if len(size) > 1 else size[0],
                      center if len(center) > 1 else center[0], cfg.num("field", "amplitude", 1.0))


def parse_grid(cfg: Config, f) -> QuadratureGrid:
    counts = [int(c) for c in cfg.vec("grid", "counts")]
    if len(counts) == 1:
        counts *= 3
    if "origin" in cfg.raw.get("grid", {}):
        return QuadratureGrid(tuple(cfg.vec("grid", "origin")), tuple(cfg.vec("grid", "spacing")),
                              tuple(counts))
    return QuadratureGrid.over_box(f.support_box, counts)


def parse_points(cfg: Config) -> np.ndarray:
    text = cfg.text("points", "points")
    try:
        pts = np.array([[float(t) for t in row.split(",")] for row in text.split(";") if row.strip()])
    except ValueError:
        raise SchemaError("[points] points must be ';'-separated triples") from None
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise SchemaError("[points] points must be ';'-separated triples")
    return pts


# ------------------------------------------------------------- commands

def cmd_kernel_eval(cfg, threads):
    a, b, t = cfg.num("params", "alpha"), cfg.num("params", "beta"), cfg.num("params", "theta", 1.0)
    spec = KernelSpec.main(a, b) if t == 1.0 else KernelSpec.with_theta(a, b, t)
    pts = parse_points(cfg)
    vals, flags = eval_kernel(spec, pts, return_flags=True)
    rows = [[*x, v, int(fl)] for x, v, fl in zip(pts.tolist(), np.atleast_1d(vals).tolist(),
                                                  np.atleast_1d(flags).tolist())]
    return rows, {"points": len(rows)}


def cmd_partition_check(cfg, threads):
    rng = np.random.default_rng(cfg.seed())
    n = cfg.int("sampling", "pairs", 100000)
    x = rng.uniform(-8, 8, (n, 3))
    y = x + rng.choice([-1.0, 1.0], (n, 3)) * np.exp2(rng.uniform(-20, 20, (n, 3)))
    d = y - x
    ell, j, k, valid = classify_many(np.zeros(3), d)
    e = np.stack([j, j - ell, 2 * j - ell - k], axis=1)
    a = np.abs(d)
    inside = np.all((a >= np.exp2(e)) & (a < np.exp2(e + 1)), axis=1)
    violations = int(np.count_nonzero(valid & ~inside))
    spot = min(n, 1000)
    roundtrip = sum(not in_shell(x[i], y[i], (ell[i], j[i], k[i])) for i in range(spot))
    rows = [["pairs", n], ["invalid", int(np.count_nonzero(~valid))],
            ["violations", violations + roundtrip]]
    return rows, {"violations": violations + roundtrip}


def _targets(cfg, grid, f, key="x_samples", default=50):
    rng = np.random.default_rng(cfg.seed())
    return an.sample_targets(grid, an.default_window(f), cfg.int("sampling", key, default), rng)


def cmd_shear_identity(cfg, threads):
    params, f = parse_params(cfg), parse_field(cfg)
    grid = parse_grid(cfg, f)
    idx = _targets(cfg, grid, f)
    rows = []
    for s in (int(v) for v in cfg.vec("sampling", "s_values", "-3,-2,-1,0,1,2,3")):
        rows.append([s, an.operator_shear_identity(f, params, s, idx, grid),
                     an.phi_transport_error(f, params.p, s, idx, grid),
                     an.maximal_transport_error(f, s, idx[:5], grid),
                     abs(an.norm_shear_ratio(f, params.p, s, grid) / 2.0 ** (2 * s) - 1)])
    return rows, {"max_operator_rel_err": max(r[1] for r in rows),
                  "max_phi_abs_err": max(r[2] for r in rows)}


def cmd_operator_apply(cfg, threads):
    params, f = parse_params(cfg), parse_field(cfg)
    grid = parse_grid(cfg, f)
    inst = OperatorInstance(KernelSpec.from_params(params), grid)
    rows = []
    for x in parse_points(cfg):
        rows.append([*x.tolist(), "total", apply(inst, f, x)])
        for ell, v in sorted(cone_values(inst, f, x).items()):
            rows.append([*x.tolist(), ell, v])
    return rows, {"points": len(parse_points(cfg))}


def cmd_maximal(cfg, threads):
    f = parse_field(cfg)
    grid = parse_grid(cfg, f)
    table = build_prefix_table(f, grid)
    rows = [[*x.tolist(), strong_maximal(table, x), zygmund_maximal(table, x)] for x in parse_points(cfg)]
    return rows, {"points": len(rows)}


def cmd_hedberg(cfg, threads):
    params, f = parse_params(cfg), parse_field(cfg)
    grid = parse_grid(cfg, f)
    vt = compute_vartheta(params)
    xs = grid.corner(_targets(cfg, grid, f, default=100))
    res = an.hedberg_check(f, params, vt, xs, grid, threads)
    rows = [[r["x_index"], r["ell"], r["lhs"], r["rhs"], r["ratio"], r["lambda"], r["ratio_j_max"]]
            for r in res.rows]
    if not res.all_finite:
        raise NumericalFailure("non-finite Hedberg ratio")
    return rows, {"vartheta": vt, "c_hat": res.c_hat, "c_hat_j": res.c_hat_j, "c_est2": res.c_est2}


def cmd_decay(cfg, threads):
    params, f = parse_params(cfg), parse_field(cfg)
    grid = parse_grid(cfg, f)
    seed = cfg.seed()
    fit = an.orthogonality_decay(f, params, compute_vartheta(params), cfg.int("sampling", "h_max", 8),
                                 cfg.int("sampling", "x_samples", 200), seed, grid,
                                 n_boot=cfg.int("sampling", "n_boot", 1000), threads=threads)
    rows = [[h, s] for h, s in zip(fit.h_values, fit.s_values)]
    return rows, {"epsilon_hat": fit.epsilon_hat, "r2": fit.fit_quality,
                  "ci_low": fit.ci_low, "ci_high": fit.ci_high}


def cmd_scaling(cfg, threads):
    params, f = parse_params(cfg), parse_field(cfg)
    grid = parse_grid(cfg, f)
    res = an.homogeneity_scaling(f, params, cfg.vec("sampling", "deltas", "0.25,0.5,1,2,4"), grid,
                                 stride=cfg.int("sampling", "stride", 4))
    rows = [[d, r] for d, r in zip(res.deltas, res.ratios)]
    return rows, {"slope": res.slope, "expected_slope": res.expected_slope, "r2": res.r2}


def cmd_lemma51(cfg, threads):
    rng = np.random.default_rng(cfg.seed())
    n_cfg, n_pts = cfg.int("sampling", "configs", 10000), cfg.int("sampling", "samples", 1000)
    empty = incl = area = 0
    for _ in range(n_cfg):
        y, wit, ell, j = random_case3_config(rng)
        cube = lemma51_cube(y, wit, ell, j)
        if cube is None:
            empty += 1
            continue
        incl += int(cube_inclusion_check(cube, y, wit, ell, j, n_pts, rng) > 0)
        area += int(cube.area != math.ldexp(1.0, 2 * cube.jv - 5))
    rows = [["configs", n_cfg], ["empty", empty], ["inclusion_failures", incl], ["area_failures", area]]
    return rows, {"failures": empty + incl + area}


def cmd_baseline(cfg, threads):
    a = cfg.num("baseline", "alpha", 0.5)
    x = cfg.num("baseline", "x", 2.0)
    lo, hi = cfg.num("baseline", "a", 0.0), cfg.num("baseline", "b", 1.0)
    n = cfg.int("baseline", "n", 100000)
    one = baseline_1d(a, lambda t: np.ones_like(t), x, lo, hi, n)
    closed = ((x - lo) ** a - (x - hi) ** a) / a if x >= hi else float("nan")
    exps = ThreeParamExponents(*cfg.vec("baseline", "exps", "0.5,0.5,0.5"))
    f = make_field("box_indicator", 1.0, 0.0)
    m = cfg.int("baseline", "counts", 16)
    grid = QuadratureGrid.over_box(f.support_box, (m, m, m))
    pt = np.array(cfg.vec("baseline", "point", "1.5,2,2.5"))
    three = baseline_3param(exps, f, pt, grid)
    prod = 1.0
    for i, ai in enumerate(exps.as_tuple()):
        prod *= baseline_1d(ai, lambda t: np.ones_like(t), pt[i], -0.5, 0.5, m)
    rows = [["one_d", one], ["one_d_closed", closed], ["one_d_rel_err", abs(one - closed) / abs(closed)],
            ["three_param", three], ["product_1d", prod], ["three_param_rel_err", abs(three - prod) / prod]]
    return rows, dict(rows)


HANDLERS = {
    "kernel-eval": cmd_kernel_eval, "partition-check": cmd_partition_check,
    "shear-identity": cmd_shear_identity, "operator-apply": cmd_operator_apply,
    "maximal": cmd_maximal, "hedberg": cmd_hedberg, "decay": cmd_decay, "scaling": cmd_scaling,
    "lemma51": cmd_lemma51, "baseline": cmd_baseline,
}


# ------------------------------------------------------------- output

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_outputs(out: Path, command: str, rows, report: ExperimentReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{command}.csv", "w", newline="") as fh:
        fh.write(f"# config_hash={report.config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADERS[command])
        for r in rows:
            w.writerow([_cell(v) for v in r])
    (out / f"{command}.report.json").write_text(report.to_json() + "\n")


def run(command: str, cfg: Config, out: Path, threads: int = 1) -> int:
    if command not in HANDLERS:
        raise SchemaError(f"unknown command {command!r}")
    seed = cfg.seed() if command in SEEDED else None
    try:
        rows, measured = HANDLERS[command](cfg, threads)
    except (ConstraintViolation, InvalidShape) as e:
        raise SchemaError(str(e)) from e
    except (CoverageError, SingularPoint, InfeasibleRegion, an.InsufficientSignal,
            an.ZeroFunction, FloatingPointError) as e:
        raise NumericalFailure(str(e)) from e
    report = ExperimentReport({"command": command, **cfg.raw}, measured, seed=seed)
    write_outputs(out, command, rows, report)
    return 0


def compare_reports(a: Path, b: Path) -> tuple[bool, str]:
    """Accept two reports only if each hash matches its own config and both hashes agree."""
    docs = []
    for p in (a, b):
        d = json.loads(Path(p).read_text())
        if d.get("config_hash") != config_hash(d.get("config", {}), d.get("seed")):
            return False, f"{p}: embedded hash does not match its config"
        docs.append(d)
    if docs[0]["config_hash"] != docs[1]["config_hash"]:
        return False, "config hashes differ"
    same = docs[0]["measured"] == docs[1]["measured"]
    return True, "measured values identical" if same else "same config, measured values differ"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zygfrac", description="Zygmund fractional integral experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sp = sub.add_parser(c)
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, help="overrides [sampling] seed")
        sp.add_argument("--threads", type=int, default=1)
    cp = sub.add_parser("compare", help="check two report files against their config hashes")
    cp.add_argument("reports", nargs=2)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            ok, msg = compare_reports(*map(Path, args.reports))
            print(msg)
            return 0 if ok else 2
        cfg = Config.read(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise SchemaError("seed must be an unsigned 64-bit integer")
            cfg.set_seed(args.seed)
        return run(args.command, cfg, Path(args.out), args.threads)
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return 2
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
