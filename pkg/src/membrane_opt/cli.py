"""Configuration parsing, experiment orchestration, and file exports.

Configs are plain ``key = value`` text, one pair per line, ``#`` comments
allowed; unknown keys are rejected.  Subcommands:

    solve   single run from the uniform density; exports fields, trace,
            partition, contours, and PGM images
    oracle  brute-force enumeration cross-checked against multi-start
    sweep   one seeded run per seed, a single CSV row each
    check   conformal-invariance, regularity, and symmetry reports
    plate   order-4 (clamped bilaplacian) run with the solve export set

Exit codes: 0 success, 1 input error, 2 solver non-convergence.  Every
emitted file carries header comments with the config hash, grid size, and
density bounds; identical configs byte-reproduce identical artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .eigen import SolverError, SolverOptions, first_eigenpair
from .grid import (
    Grid,
    GridSpec,
    annulus_spec,
    box_spec,
    build_grid,
    disk_spec,
    domain_volume,
    dumbbell_spec,
    grid_csv,
    mirror_permutation,
    square_spec,
)
from .operators import OperatorSpec, assemble_stiffness, assemble_weight
from .optimizer import (
    CONVERGED,
    CYCLING,
    MAX_ITER,
    DensityField,
    LevelSetPartition,
    OptimizationTrace,
    ProblemSpec,
    classify_solutions,
    conformal_bounds,
    minimize,
)
from .verify import (
    contour_csv,
    enumerate_optimal,
    extract_contour,
    regularity_trend,
    sublevel_check,
)

__all__ = ["ConfigError", "RunConfig", "main", "parse_config", "run"]

SUBCOMMANDS = ("solve", "oracle", "sweep", "check", "plate")

_BOOL_KEYS = ("export_fields", "export_trace", "export_contours", "export_images")
_KNOWN_KEYS = {
    "subcommand", "d", "shape", "h", "side", "bbox", "center", "radius",
    "r_in", "r_out", "bell", "neck_length", "neck_width", "bump_amplitude",
    "A", "lam", "Lam", "M", "n", "p",
    "cg_tol", "eig_tol", "max_power_iterations", "max_alternations",
    "seeds", "out", "check_levels", "oracle_cap", *_BOOL_KEYS,
}


class ConfigError(ValueError):
    pass


def _parse_number(key: str, text: str) -> float:
    try:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"key '{key}': not a number: {text!r}") from exc


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"key '{key}': not an integer: {text!r}") from exc


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"key '{key}': not a boolean: {text!r}")


def _parse_floats(key: str, text: str) -> tuple[float, ...]:
    return tuple(_parse_number(key, part.strip()) for part in text.split(","))


def _parse_ints(key: str, text: str) -> tuple[int, ...]:
    return tuple(_parse_int(key, part.strip()) for part in text.split(","))


def _smooth_bump(center: np.ndarray, radius: float, amplitude: float):
    """Compactly supported mollifier bump, value ``amplitude`` at the center."""
    def w(point: np.ndarray) -> float:
        s2 = float(np.sum((np.asarray(point) - center) ** 2)) / radius**2
        if s2 >= 1.0:
            return 0.0
        return amplitude * math.exp(1.0 - 1.0 / (1.0 - s2))
    return w


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Fully validated run description with its grid and problem built."""

    subcommand: str
    grid_spec: GridSpec
    grid: Grid
    problem: ProblemSpec
    solver: SolverOptions
    max_alternations: int
    seeds: tuple[int, ...]
    out_dir: str
    export_fields: bool
    export_trace: bool
    export_contours: bool
    export_images: bool
    check_levels: int
    oracle_cap: int
    raw: dict

    @property
    def config_hash(self) -> str:
        payload = {k: v for k, v in self.raw.items() if k != "out"}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def header_lines(self, what: str) -> list[str]:
        return [
            f"membrane-opt {what}",
            f"config={self.config_hash} subcommand={self.subcommand}",
            f"nodes={self.grid.node_count} lattice={'x'.join(str(c + 1) for c in self.grid.lattice_cells)} h={self.grid.spacing!r}",
            f"rho_min={self.problem.rho_min!r} rho_max={self.problem.rho_max!r} M={self.problem.mass!r} p={self.problem.order}",
        ]


def _build_grid_spec(values: dict) -> GridSpec:
    d = values["d"]
    shape = values["shape"]
    h = values["h"]
    amplitude = values["bump_amplitude"]
    background = None
    if amplitude != 0.0:
        if shape == "square":
            side = values["side"]
            center = np.full(d, side / 2.0)
            radius = side / 2.0
        elif shape == "rectangle":
            bbox = values["bbox"] or ()
            center = np.array([(lo + hi) / 2.0 for lo, hi in bbox])
            radius = min(((hi - lo) / 2.0 for lo, hi in bbox), default=1.0)
        elif shape == "disk":
            center = np.asarray(values["center"] or (0.0,) * d)
            radius = values["radius"]
        else:
            # the remaining shapes reject a background below; any values do
            center = np.zeros(d)
            radius = 1.0
        background = _smooth_bump(center, radius, amplitude)

    if shape == "square":
        return square_spec(h, side=values["side"], dimension=d, background=background)
    if shape == "rectangle":
        if values["bbox"] is None:
            raise ConfigError("key 'bbox': required for shape rectangle")
        spec = box_spec(h, values["bbox"], background=background)
        if spec.dimension != d:
            raise ConfigError(f"key 'bbox': gives {spec.dimension} axes, d = {d}")
        return spec
    if shape == "disk":
        center = values["center"] or (0.0,) * d
        if len(center) != d:
            raise ConfigError(f"key 'center': needs {d} components")
        return disk_spec(h, radius=values["radius"], center=center, dimension=d,
                         background=background)
    if shape == "annulus":
        if values["r_in"] is None or values["r_out"] is None:
            raise ConfigError("keys 'r_in'/'r_out': required for shape annulus")
        center = values["center"] or (0.0,) * d
        if background is not None:
            raise ConfigError("key 'bump_amplitude': not supported on annulus")
        return annulus_spec(h, values["r_in"], values["r_out"], center=center,
                            dimension=d)
    if shape == "dumbbell":
        if d != 2:
            raise ConfigError("key 'shape': dumbbell requires d = 2")
        if background is not None:
            raise ConfigError("key 'bump_amplitude': not supported on dumbbell")
        return dumbbell_spec(h, bell=values["bell"],
                             neck_length=values["neck_length"],
                             neck_width=values["neck_width"])
    raise ConfigError(
        f"key 'shape': unknown shape {shape!r} "
        "(square | rectangle | disk | annulus | dumbbell)"
    )


def parse_config(text: str, subcommand: str | None = None,
                 out_override: str | None = None,
                 seeds_override: str | None = None) -> RunConfig:
    """Validate ``key = value`` text into a RunConfig, defaults applied.

    Unknown or duplicate keys are rejected; errors name the offending key
    and the violated constraint.  Infeasible (A, M) combinations surface
    here because the grid is built during validation.
    """
    pairs: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for key {key!r}")
        pairs[key] = value

    sub = subcommand or pairs.get("subcommand", "solve")
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"key 'subcommand': unknown subcommand {sub!r}")
    if subcommand and "subcommand" in pairs and pairs["subcommand"] != subcommand:
        raise ConfigError(
            f"key 'subcommand': config says {pairs['subcommand']!r}, "
            f"command line says {subcommand!r}"
        )

    for required in ("shape", "h", "M"):
        if required not in pairs:
            raise ConfigError(f"key '{required}': required but missing")

    has_exponent = "A" in pairs
    has_box = "lam" in pairs or "Lam" in pairs
    if has_exponent and has_box:
        raise ConfigError("keys 'A'/'lam': give either A or explicit (lam, Lam), not both")
    if not has_exponent and not ("lam" in pairs and "Lam" in pairs):
        raise ConfigError("key 'A': required (or give both lam and Lam)")

    values: dict = {
        "d": _parse_int("d", pairs.get("d", "2")),
        "shape": pairs["shape"],
        "h": _parse_number("h", pairs["h"]),
        "side": _parse_number("side", pairs.get("side", "1.0")),
        "bbox": None,
        "center": None,
        "radius": _parse_number("radius", pairs.get("radius", "1.0")),
        "r_in": _parse_number("r_in", pairs["r_in"]) if "r_in" in pairs else None,
        "r_out": _parse_number("r_out", pairs["r_out"]) if "r_out" in pairs else None,
        "bell": _parse_number("bell", pairs.get("bell", "1.0")),
        "neck_length": _parse_number("neck_length", pairs.get("neck_length", "0.5")),
        "neck_width": _parse_number("neck_width", pairs.get("neck_width", "0.125")),
        "bump_amplitude": _parse_number("bump_amplitude", pairs.get("bump_amplitude", "0.0")),
        "M": _parse_number("M", pairs["M"]),
    }
    if "bbox" in pairs:
        flat = _parse_floats("bbox", pairs["bbox"])
        if len(flat) % 2:
            raise ConfigError("key 'bbox': needs an even number of entries (lo,hi per axis)")
        values["bbox"] = tuple(
            (flat[2 * k], flat[2 * k + 1]) for k in range(len(flat) // 2)
        )
    if "center" in pairs:
        values["center"] = _parse_floats("center", pairs["center"])

    p = _parse_int("p", pairs.get("p", "4" if sub == "plate" else "2"))
    if p not in (2, 4):
        raise ConfigError(f"key 'p': operator order must be 2 or 4, got {p}")
    if sub == "plate" and p != 4:
        raise ConfigError("key 'p': the plate subcommand is the order-4 run, p must be 4")
    if p == 4 and sub not in ("plate", "solve"):
        raise ConfigError(f"key 'p': order 4 is only valid for solve or plate, not {sub}")
    n = _parse_int("n", pairs["n"]) if "n" in pairs else (2 if p == 2 else 4)
    if n < 2:
        raise ConfigError(f"key 'n': exponent must be >= 2, got {n}")

    try:
        grid_spec = _build_grid_spec(values)
        grid = build_grid(grid_spec)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"grid construction failed: {exc}") from exc

    if has_exponent:
        bound_exponent = _parse_number("A", pairs["A"])
        try:
            lam, big_lam = conformal_bounds(bound_exponent, n)
        except ValueError as exc:
            raise ConfigError(f"key 'A': {exc}") from exc
    else:
        lam = _parse_number("lam", pairs["lam"])
        big_lam = _parse_number("Lam", pairs["Lam"])

    try:
        problem = ProblemSpec(grid=grid, rho_min=lam, rho_max=big_lam,
                              mass=values["M"], order=p, exponent=n)
    except ValueError as exc:
        raise ConfigError(f"key 'M': {exc}") from exc

    default_cg = "1e-12" if p == 4 else "1e-10"
    try:
        solver = SolverOptions(
            cg_rel_tol=_parse_number("cg_tol", pairs.get("cg_tol", default_cg)),
            eig_rel_tol=_parse_number("eig_tol", pairs.get("eig_tol", "1e-9")),
            max_iterations=_parse_int("max_power_iterations",
                                      pairs.get("max_power_iterations", "500")),
        )
    except ValueError as exc:
        raise ConfigError(f"solver options: {exc}") from exc
    max_alternations = _parse_int("max_alternations", pairs.get("max_alternations", "200"))
    if max_alternations < 1:
        raise ConfigError("key 'max_alternations': must be >= 1")

    seeds_text = seeds_override or pairs.get("seeds", "0")
    seeds = _parse_ints("seeds", seeds_text)
    if not seeds:
        raise ConfigError("key 'seeds': need at least one seed")
    out_dir = out_override or pairs.get("out", "out")

    exports = {key: _parse_bool(key, pairs.get(key, "true")) for key in _BOOL_KEYS}
    check_levels = _parse_int("check_levels", pairs.get("check_levels", "3"))
    if check_levels < 2:
        raise ConfigError("key 'check_levels': need at least 2 refinement levels")
    oracle_cap = _parse_int("oracle_cap", pairs.get("oracle_cap", "20"))

    raw = {
        "subcommand": sub,
        "d": values["d"],
        "shape": values["shape"],
        "h": values["h"],
        "side": values["side"],
        "bbox": values["bbox"],
        "center": values["center"],
        "radius": values["radius"],
        "r_in": values["r_in"],
        "r_out": values["r_out"],
        "bell": values["bell"],
        "neck_length": values["neck_length"],
        "neck_width": values["neck_width"],
        "bump_amplitude": values["bump_amplitude"],
        "rho_min": lam,
        "rho_max": big_lam,
        "M": values["M"],
        "n": n,
        "p": p,
        "cg_tol": solver.cg_rel_tol,
        "eig_tol": solver.eig_rel_tol,
        "max_power_iterations": solver.max_iterations,
        "max_alternations": max_alternations,
        "seeds": list(seeds),
        "out": out_dir,
        "check_levels": check_levels,
        "oracle_cap": oracle_cap,
        **exports,
    }
    return RunConfig(
        subcommand=sub, grid_spec=grid_spec, grid=grid, problem=problem,
        solver=solver, max_alternations=max_alternations, seeds=seeds,
        out_dir=out_dir, check_levels=check_levels, oracle_cap=oracle_cap,
        raw=raw, **{k: exports[k] for k in _BOOL_KEYS},
    )


# ---------------------------------------------------------------------------
# artifact writers

def _comment_block(lines) -> str:
    return "".join(f"# {line}\n" for line in lines)


def density_csv(density: DensityField, exponent: int, header_lines) -> str:
    values = density.values
    u = density.conformal_factor(exponent)
    out = [_comment_block(header_lines) + "node,rho,u"]
    for i in range(values.shape[0]):
        out.append(f"{i},{float(values[i])!r},{float(u[i])!r}")
    return "\n".join(out) + "\n"


def eigenfunction_csv(phi: np.ndarray, header_lines) -> str:
    out = [_comment_block(header_lines) + "node,phi"]
    for i, v in enumerate(phi):
        out.append(f"{i},{float(v)!r}")
    return "\n".join(out) + "\n"


def trace_text(trace: OptimizationTrace, header: dict) -> str:
    lines = [json.dumps({"type": "header", **header}, sort_keys=True)]
    for r in trace.records:
        lines.append(json.dumps({
            "type": "record", "iteration": r.iteration, "mu": r.eigenvalue,
            "threshold": r.threshold, "set_change": r.set_change,
            "residual": r.residual,
        }, sort_keys=True))
    lines.append(json.dumps({"type": "status", "status": trace.status}, sort_keys=True))
    return "\n".join(lines) + "\n"


def partition_text(partition: LevelSetPartition, header_lines) -> str:
    extra = [
        f"threshold={partition.threshold!r}",
        f"fractional_node={partition.fractional_node}",
        f"low_count={partition.low_count} high_count={partition.high_count}",
        "one low-region node index per line",
    ]
    body = "\n".join(str(int(i)) for i in partition.low_nodes)
    return _comment_block(list(header_lines) + extra) + body + "\n"


def pgm_bytes(grid: Grid, values: np.ndarray, what: str, header_lines) -> bytes:
    """Binary P5 image of nodal values on the 2D lattice.

    Linear min-max scaling to 0..255 over interior nodes; pixels outside
    the domain are 0.  Row r is lattice row j = (height - 1 - r), column c
    is lattice column i = c, so the y axis points up.
    """
    if grid.dimension != 2:
        raise ValueError("PGM export requires a two-dimensional grid")
    n0, n1 = grid.lattice_cells
    width, height = n0 + 1, n1 + 1
    vmin = float(np.min(values))
    vmax = float(np.max(values))
    span = vmax - vmin
    scaled = np.zeros(values.shape, dtype=np.uint8) if span == 0.0 else \
        np.round((values - vmin) / span * 255.0).astype(np.uint8)
    image = np.zeros((height, width), dtype=np.uint8)
    rows = (n1 - grid.nodes[:, 1]).astype(np.int64)
    cols = grid.nodes[:, 0].astype(np.int64)
    image[rows, cols] = scaled
    comments = list(header_lines) + [
        f"{what}: linear min-max scaling min={vmin!r} max={vmax!r} -> 0..255",
        "row r = lattice j (height-1-r), col c = lattice i (y axis up)",
    ]
    head = "P5\n" + _comment_block(comments) + f"{width} {height}\n255\n"
    return head.encode() + image.tobytes()


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def _status_file(out: Path, config: RunConfig, ok: bool, detail: str) -> None:
    state = "ok" if ok else "incomplete"
    _write(out / "status.txt",
           f"# config={config.config_hash} subcommand={config.subcommand} "
           f"nodes={config.grid.node_count}\n"
           f"status = {state}\ndetail = {detail}\n")


# ---------------------------------------------------------------------------
# subcommand drivers

def _export_solution(config: RunConfig, out: Path, density, pair, partition, trace) -> None:
    head = config.header_lines
    if config.export_fields:
        _write(out / "density.csv",
               density_csv(density, config.problem.exponent, head("density field")))
        _write(out / "eigenfunction.csv", eigenfunction_csv(
            pair.vector,
            head(f"eigenfunction mu={pair.eigenvalue!r} residual={pair.residual!r}")))
        _write(out / "grid.csv", grid_csv(config.grid, head("grid nodes")))
    if config.export_trace:
        _write(out / "trace.txt", trace_text(trace, {
            "config": config.config_hash, "nodes": config.grid.node_count,
            "rho_min": config.problem.rho_min, "rho_max": config.problem.rho_max,
            "M": config.problem.mass, "p": config.problem.order,
        }))
    _write(out / "partition.txt", partition_text(partition, head("low-region partition")))
    if config.export_contours and config.grid.dimension == 2:
        contours = extract_contour(pair.vector, partition.threshold, config.grid)
        _write(out / "contours.csv", contour_csv(
            contours, head(f"level curves at threshold={partition.threshold!r}")))
    if config.export_images and config.grid.dimension == 2:
        (out / "phi.pgm").write_bytes(
            pgm_bytes(config.grid, pair.vector, "phi", head("eigenfunction image")))
        indicator = np.zeros(config.grid.node_count)
        indicator[partition.low_nodes] = 1.0
        (out / "region.pgm").write_bytes(
            pgm_bytes(config.grid, indicator, "low-region indicator",
                      head("low-region image")))


def _run_solve(config: RunConfig, out: Path) -> int:
    density, pair, partition, trace = minimize(
        config.problem, opts=config.solver, max_alternations=config.max_alternations)
    _export_solution(config, out, density, pair, partition, trace)
    ok = trace.status in (CONVERGED, CYCLING)
    _status_file(out, config, ok, f"terminal status {trace.status}")
    return 0 if ok else 2


def _run_oracle(config: RunConfig, out: Path) -> int:
    oracle = enumerate_optimal(config.grid, config.problem, node_cap=config.oracle_cap)
    results = [minimize(config.problem, init=seed, opts=config.solver,
                        max_alternations=config.max_alternations)
               for seed in config.seeds]
    best = min(r[1].eigenvalue for r in results)
    rel = abs(best - oracle.eigenvalue) / abs(oracle.eigenvalue)
    verdict = "MATCH" if rel <= 1e-10 else "MISMATCH"
    ok_sub, margin = sublevel_check(oracle.eigenvector, oracle.partition)

    lines = _comment_block(config.header_lines("oracle cross-check"))
    lines += (
        f"candidates = {len(oracle.ranking)}\n"
        f"oracle_mu = {oracle.eigenvalue!r}\n"
        f"multi_start_best_mu = {best!r}\n"
        f"rel_diff = {rel!r}\n"
        f"verdict = {verdict}\n"
        f"oracle_sublevel_ok = {ok_sub}\n"
        f"oracle_sublevel_margin = {margin!r}\n"
    )
    _write(out / "oracle_report.txt", lines)

    rank_lines = [_comment_block(config.header_lines("oracle ranking"))
                  + "mu,high_nodes,fractional_node"]
    for cand in oracle.ranking:
        high = ";".join(str(i) for i in cand.high_nodes)
        rank_lines.append(f"{cand.eigenvalue!r},{high},{cand.fractional_node}")
    _write(out / "ranking.csv", "\n".join(rank_lines) + "\n")
    _status_file(out, config, True, f"verdict {verdict}")
    return 0


def _run_sweep(config: RunConfig, out: Path) -> int:
    results = [minimize(config.problem, init=seed, opts=config.solver,
                        max_alternations=config.max_alternations)
               for seed in config.seeds]
    classes, labels = classify_solutions(config.seeds, results,
                                         config.grid.node_count)
    head = config.header_lines("seed sweep") + [f"solution_classes={len(classes)}"]
    lines = [_comment_block(head)
             + "seed,class,status,iterations,mu,threshold,low_count,fractional_node"]
    for seed, label, (density, pair, partition, trace) in zip(
            config.seeds, labels, results):
        lines.append(
            f"{seed},{label},{trace.status},{len(trace)},{pair.eigenvalue!r},"
            f"{partition.threshold!r},{partition.low_count},{partition.fractional_node}"
        )
    _write(out / "sweep.csv", "\n".join(lines) + "\n")
    bad = any(r[3].status == MAX_ITER for r in results)
    _status_file(out, config, not bad, f"{len(classes)} solution classes")
    return 2 if bad else 0


def _run_check(config: RunConfig, out: Path) -> int:
    head = config.header_lines

    # conformal invariance: bump background against its flat reweighting
    amplitude = config.raw["bump_amplitude"] or 0.3
    flat_spec = config.grid_spec
    if flat_spec.background is not None:
        flat_spec = GridSpec(flat_spec.dimension, flat_spec.spacing,
                             flat_spec.bounds, flat_spec.shape, None)
    bump_values = {
        "d": config.raw["d"], "shape": config.raw["shape"], "h": config.raw["h"],
        "side": config.raw["side"], "bbox": config.raw["bbox"],
        "center": config.raw["center"], "radius": config.raw["radius"],
        "r_in": config.raw["r_in"], "r_out": config.raw["r_out"],
        "bell": config.raw["bell"], "neck_length": config.raw["neck_length"],
        "neck_width": config.raw["neck_width"], "bump_amplitude": amplitude,
    }
    curved_spec = _build_grid_spec(bump_values)
    curved = build_grid(curved_spec)
    flat = build_grid(flat_spec)

    a_curved = assemble_stiffness(curved, OperatorSpec(order=2))
    a_flat = assemble_stiffness(flat, OperatorSpec(order=2))
    bit_identical = (
        np.array_equal(a_curved.matrix.indptr, a_flat.matrix.indptr)
        and np.array_equal(a_curved.matrix.indices, a_flat.matrix.indices)
        and np.array_equal(a_curved.matrix.data, a_flat.matrix.data)
    )

    fraction = config.problem.mass / domain_volume(flat)
    curved_problem = ProblemSpec(
        grid=curved, rho_min=config.problem.rho_min, rho_max=config.problem.rho_max,
        mass=fraction * domain_volume(curved), order=2,
        exponent=config.problem.exponent)

    rho_uniform = np.full(curved.node_count, fraction)
    w_curved = assemble_weight(curved, rho_uniform)
    w_flat = assemble_weight(flat, rho_uniform * curved.e2w)
    weight_rel = float(np.max(np.abs(w_curved - w_flat) / np.abs(w_curved)))

    mu_curved = first_eigenpair(a_curved, w_curved, config.solver).eigenvalue
    mu_flat = first_eigenpair(a_flat, w_flat, config.solver).eigenvalue
    uniform_rel = abs(mu_curved - mu_flat) / abs(mu_flat)

    density, pair, _, _ = minimize(curved_problem, opts=config.solver,
                                   max_alternations=config.max_alternations)
    mu_reweighted = first_eigenpair(
        a_flat, assemble_weight(flat, density.values * curved.e2w),
        config.solver).eigenvalue
    converged_rel = abs(pair.eigenvalue - mu_reweighted) / abs(mu_reweighted)

    conformal_ok = bit_identical and uniform_rel <= 1e-12 and converged_rel <= 1e-12
    _write(out / "check_conformal.txt", _comment_block(
        head("conformal invariance check") + [f"bump_amplitude={amplitude!r}"]) + (
        f"stiffness_bit_identical = {bit_identical}\n"
        f"weight_max_rel_diff = {weight_rel!r}\n"
        f"mu_uniform_rel_diff = {uniform_rel!r}\n"
        f"mu_converged_rel_diff = {converged_rel!r}\n"
        f"verdict = {'PASS' if conformal_ok else 'FAIL'}\n"
    ))

    # regularity: the same composite problem at h, h/2, ...
    levels = [config.grid.spacing / 2**k for k in range(config.check_levels)]

    def problem_at(h: float) -> ProblemSpec:
        spec = GridSpec(flat_spec.dimension, h, flat_spec.bounds, flat_spec.shape)
        g = build_grid(spec)
        return ProblemSpec(grid=g, rho_min=config.problem.rho_min,
                           rho_max=config.problem.rho_max,
                           mass=fraction * domain_volume(g),
                           order=config.problem.order,
                           exponent=config.problem.exponent)

    report = regularity_trend(problem_at, levels, opts=config.solver,
                              max_alternations=config.max_alternations)
    _write(out / "check_regularity.txt", _comment_block(
        head("second-difference regularity trend")) + (
        f"levels = {list(report.levels)!r}\n"
        f"sups = {list(report.sups)!r}\n"
        f"ratios = {list(report.ratios)!r}\n"
        f"verdict = {'PASS' if report.bounded() else 'FAIL'}\n"
    ))

    # symmetry: reflected converged densities give the same eigenvalue
    symmetric_axes = []
    for axis in range(config.grid.dimension):
        try:
            mirror_permutation(config.grid, axis)
            symmetric_axes.append(axis)
        except ValueError:
            pass
    lines = [f"symmetric_axes = {symmetric_axes!r}"]
    equivariant = True
    if symmetric_axes:
        density, pair, _, _ = minimize(config.problem, opts=config.solver,
                                       max_alternations=config.max_alternations)
        stiffness = assemble_stiffness(config.grid,
                                       OperatorSpec(order=config.problem.order))
        for axis in symmetric_axes:
            perm = mirror_permutation(config.grid, axis)
            reflected = np.empty_like(density.values)
            reflected[perm] = density.values
            mu_ref = first_eigenpair(
                stiffness, assemble_weight(config.grid, reflected),
                config.solver).eigenvalue
            rel = abs(mu_ref - pair.eigenvalue) / abs(pair.eigenvalue)
            lines.append(f"axis_{axis}_reflected_mu_rel_diff = {rel!r}")
            equivariant = equivariant and rel <= 1e-10
    lines.append(f"verdict = {'PASS' if equivariant else 'FAIL'}")
    _write(out / "check_symmetry.txt",
           _comment_block(head("mirror symmetry check")) + "\n".join(lines) + "\n")

    _status_file(out, config, True, "checks written")
    return 0


def run(config: RunConfig) -> int:
    """Execute a validated config; writes artifacts, returns the exit code."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if config.subcommand in ("solve", "plate"):
            return _run_solve(config, out)
        if config.subcommand == "oracle":
            return _run_oracle(config, out)
        if config.subcommand == "sweep":
            return _run_sweep(config, out)
        return _run_check(config, out)
    except SolverError as exc:
        partial = getattr(exc, "partial_trace", None)
        if partial is not None and config.export_trace:
            partial.status = "aborted"
            _write(out / "trace.txt", trace_text(partial, {
                "config": config.config_hash, "nodes": config.grid.node_count,
                "rho_min": config.problem.rho_min,
                "rho_max": config.problem.rho_max,
                "M": config.problem.mass, "p": config.problem.order,
            }))
        _status_file(out, config, False, f"solver failure: {exc}")
        return 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="membrane-opt",
        description="eigenvalue minimization over two-valued densities",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", required=True, help="path to key = value config")
        sub.add_argument("--out", default=None, help="output directory override")
        sub.add_argument("--seed-list", default=None,
                         help="comma-separated seed override")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        config = parse_config(text, subcommand=args.subcommand,
                              out_override=args.out,
                              seeds_override=args.seed_list)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return run(config)
    except OSError as exc:
        print(f"error: cannot write artifacts: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
