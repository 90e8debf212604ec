"""Batch command-line surface with reproducible, manifest-stamped runs.

Every command writes its outputs atomically (temp file + rename, so partial
files are never left behind) and drops a JSON manifest next to the primary
output recording the exact argv, parameters, seed, input digests and output
paths. Re-running the manifest's argv reproduces every output byte for byte;
a --threads flag only changes wall time, never bytes.

Domain errors exit 1 with a single machine-parseable line on stderr
("error: <code>: <message>"); usage errors exit 2.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import delone, discrepancy, dyadic, repetitivity, substitution
from .errors import (
    DomainError,
    InvalidInputError,
    NormalizationError,
    PartitionError,
)
from .geometry import Box

_OUTDIR_ENV = "DELREP_OUTDIR"


# -- plumbing -----------------------------------------------------------------


def _out_path(p) -> Path:
    path = Path(p)
    if not path.is_absolute():
        base = os.environ.get(_OUTDIR_ENV)
        if base:
            path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_text(path: Path, text: str) -> None:
    tmp = path.parent / (path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt_cell(v) for v in row) for row in rows)
    _write_text(path, "\n".join(lines) + "\n")


def _write_json(path: Path, doc) -> None:
    _write_text(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def _emit_pointset(P, out_csv: Path) -> list[Path]:
    tmp = out_csv.parent / (out_csv.name + ".tmp")
    delone.save_pointset(P, tmp)
    os.replace(str(tmp) + ".meta.json", str(out_csv) + ".meta.json")
    os.replace(tmp, out_csv)
    return [out_csv, Path(str(out_csv) + ".meta.json")]


def _json_safe(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _finish(command: str, argv, args, inputs: list, outputs: list[Path]) -> None:
    params = {
        k: _json_safe(v)
        for k, v in vars(args).items()
        if k not in ("func", "command") and not callable(v)
    }
    manifest = {
        "command": command,
        "argv": list(argv),
        "parameters": params,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    _write_json(Path(str(outputs[0]) + ".manifest.json"), manifest)


# -- argument parsing helpers --------------------------------------------------


def _parse_window(s: str) -> Box:
    vals = [float(x) for x in s.split(",")]
    if len(vals) < 2 or len(vals) % 2 != 0:
        raise InvalidInputError(
            f"window must be an even-length list lo...,hi..., got {s!r}"
        )
    d = len(vals) // 2
    return Box(vals[:d], vals[d:])


def _parse_floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",")]


def _parse_cube(s: str) -> dyadic.DyadicCube:
    k = None
    corner: list[int] = []
    for token in s.split(","):
        if token.startswith("k="):
            k = int(token[2:])
        elif token.startswith("corner="):
            corner.append(int(token[len("corner="):]))
        elif corner:
            corner.append(int(token))
        else:
            raise InvalidInputError(f"cannot parse cube spec token {token!r}")
    if k is None or not corner:
        raise InvalidInputError(
            f"cube spec must look like k=3,corner=0,4 — got {s!r}"
        )
    return dyadic.DyadicCube(k, tuple(corner))


def _load_points(path, window: str | None = None) -> delone.PointSet:
    box = _parse_window(window) if window else None
    return delone.load_pointset(path, window=box)


def _load_scheme_arg(value: str) -> tuple[substitution.Scheme, list]:
    """A builtin scheme name or a JSON file path; returns (scheme, inputs)."""
    try:
        return substitution.example_scheme(value), []
    except InvalidInputError:
        pass
    if not Path(value).exists():
        raise InvalidInputError(
            f"scheme {value!r} is neither a builtin name nor an existing file"
        )
    return substitution.load_scheme(value), [value]


def _points_inputs(path) -> list:
    inputs = [path]
    sidecar = Path(str(path) + ".meta.json")
    if sidecar.exists():
        inputs.append(sidecar)
    return inputs


# -- command handlers ----------------------------------------------------------


def _cmd_gen_lattice(args, argv):
    window = _parse_window(args.window)
    P = delone.gen_lattice(args.d, args.spacing, window)
    out = _out_path(args.out)
    outputs = _emit_pointset(P, out)
    _finish("gen-lattice", argv, args, [], outputs)
    return outputs


def _cmd_gen_perturbed(args, argv):
    window = _parse_window(args.window)
    P = delone.gen_perturbed(args.d, args.spacing, window, args.bound, args.seed)
    out = _out_path(args.out)
    outputs = _emit_pointset(P, out)
    _finish("gen-perturbed", argv, args, [], outputs)
    return outputs


def _default_markings(scheme: substitution.Scheme):
    return [[str(Fraction(s) / 2) for s in sides]
            for sides in scheme.prototile_sides]


def _cmd_gen_substitution(args, argv):
    scheme, inputs = _load_scheme_arg(args.scheme)
    patch = substitution.generate_patch(scheme, args.root_type, args.t)
    markings = ([m.split(",") for m in args.marking]
                if args.marking else _default_markings(scheme))
    P = substitution.extract_delone(patch, markings)
    out = _out_path(args.out)
    outputs = _emit_pointset(P, out)
    if args.tiles_out:
        tiles_path = _out_path(args.tiles_out)
        tmp = tiles_path.parent / (tiles_path.name + ".tmp")
        substitution.save_patch_csv(patch, tmp)
        os.replace(tmp, tiles_path)
        outputs.append(tiles_path)
    if args.figure:
        from . import render

        fig_path = _out_path(args.figure)
        render.save_figure(render.fig_patch(patch, title=f"t={args.t}"), fig_path)
        outputs.append(fig_path)
    _finish("gen-substitution", argv, args, inputs, outputs)
    return outputs


def _cmd_scheme_check(args, argv):
    out = _out_path(args.out)
    try:
        scheme, inputs = _load_scheme_arg(args.scheme)
    except (PartitionError, NormalizationError) as exc:
        report = {"scheme": args.scheme, "valid": False,
                  "error_code": exc.code, "error": str(exc)}
        _write_json(out, report)
        _finish("scheme-check", argv, args, [], [out])
        return [out]
    irr = substitution.check_irreducible(scheme)
    report = {"scheme": args.scheme, "valid": True, "irreducible": irr}
    if irr:
        inc = substitution.check_incommensurable(scheme)
        report["incommensurable"] = inc.incommensurable
        report["rank"] = inc.rank
        report["witness"] = ([str(w) for w in inc.witness]
                             if inc.witness else None)
    else:
        report["incommensurable"] = None
    _write_json(out, report)
    _finish("scheme-check", argv, args, inputs, [out])
    return [out]


def _cmd_scan_discrepancy(args, argv):
    P = _load_points(args.points, args.window_points)
    window = _parse_window(args.window) if args.window else None
    report = discrepancy.discrepancy_scan(
        P, mu=args.mu, delta=args.delta, boxes=args.boxes,
        t_range=(args.t_min, args.t_max), window=window, seed=args.seed,
        threads=args.threads,
    )
    out = _out_path(args.out)
    header, rows = report.csv_rows()
    _write_csv(out, header, rows)
    outputs = [out]
    if args.json:
        json_path = _out_path(args.json)
        _write_json(json_path, report.to_json())
        outputs.append(json_path)
    if args.figure:
        from . import render

        fig_path = _out_path(args.figure)
        render.save_figure(render.fig_discrepancy(report), fig_path)
        outputs.append(fig_path)
    _finish("scan-discrepancy", argv, args, _points_inputs(args.points), outputs)
    return outputs


def _cmd_scan_repetitivity(args, argv):
    P = _load_points(args.points, args.window_points)
    prof = repetitivity.profile(
        P, eps=args.eps, r_grid=_parse_floats(args.r_grid),
        probe_patches=args.probe_patches, probe_locations=args.probe_locations,
        R_max=args.r_max, seed=args.seed, threads=args.threads,
    )
    out = _out_path(args.out)
    header, rows = prof.csv_rows()
    _write_csv(out, header, rows)
    outputs = [out]
    if args.json:
        json_path = _out_path(args.json)
        _write_json(json_path, prof.to_json())
        outputs.append(json_path)
    if args.figure:
        from . import render

        fig_path = _out_path(args.figure)
        render.save_figure(render.fig_repetitivity(prof), fig_path)
        outputs.append(fig_path)
    _finish("scan-repetitivity", argv, args, _points_inputs(args.points), outputs)
    return outputs


def _cmd_fit_delta(args, argv):
    P = _load_points(args.points, args.window_points)
    w = discrepancy.weight_point_count(P)
    window = _parse_window(args.window) if args.window else P.window
    curve = discrepancy.density_curve(
        w, _parse_floats(args.t_grid), window, samples=args.samples,
        seed=args.seed, threads=args.threads,
    )
    # Fit before writing anything, so a failed fit leaves no outputs behind.
    fit = discrepancy.fit_delta(curve)
    fit_doc = curve.to_json()
    fit_doc.update({"delta_emp": fit.delta_emp, "alpha_fit": fit.alpha_fit,
                    "r2": fit.r2})
    out = _out_path(args.out)
    header, rows = curve.csv_rows()
    _write_csv(out, header, rows)
    outputs = [out]
    if args.json:
        json_path = _out_path(args.json)
        _write_json(json_path, fit_doc)
        outputs.append(json_path)
    if args.figure:
        from . import render

        fig_path = _out_path(args.figure)
        render.save_figure(render.fig_density_curve(curve), fig_path)
        outputs.append(fig_path)
    _finish("fit-delta", argv, args, _points_inputs(args.points), outputs)
    return outputs


def _cmd_bk_sum(args, argv):
    P = _load_points(args.points, args.window_points)
    rows = discrepancy.bk_partial_sum(
        P, rho=args.rho, k_max=args.k_max,
        centers_window=_parse_window(args.centers_window), k_min=args.k_min,
        max_centers_per_k=args.max_centers, threads=args.threads,
    )
    out = _out_path(args.out)
    header, csv_rows = discrepancy.bk_csv_rows(rows)
    _write_csv(out, header, csv_rows)
    outputs = [out]
    if args.figure:
        from . import render

        fig_path = _out_path(args.figure)
        render.save_figure(render.fig_bk(rows), fig_path)
        outputs.append(fig_path)
    _finish("bk-sum", argv, args, _points_inputs(args.points), outputs)
    return outputs


def _cmd_dyadic_decompose(args, argv):
    union = dyadic.CubeUnion.load_csv(args.cells)
    cube = _parse_cube(args.cube)
    result = dyadic.dyadic_decompose(union, cube)
    out = _out_path(args.out)
    _write_json(out, result.expression.to_json())
    outputs = [out]
    if args.scales_out:
        scales_path = _out_path(args.scales_out)
        _write_csv(scales_path, ("k", "count", "normalized"),
                   result.scales_csv_rows())
        outputs.append(scales_path)
    if args.figure:
        from . import render

        fig_path = _out_path(args.figure)
        title = f"leaves={len(result.leaves)} c6={result.c_measured:.3g}"
        render.save_figure(
            render.fig_cells(union, leaves=result.leaves, title=title), fig_path)
        outputs.append(fig_path)
    print(f"leaves={len(result.leaves)} c6_measured={result.c_measured!r}")
    _finish("dyadic-decompose", argv, args, [args.cells], outputs)
    return outputs


def _cmd_uc_discrepancy(args, argv):
    P = _load_points(args.points, args.window_points)
    union = dyadic.CubeUnion.load_csv(args.cells)
    result = dyadic.uc_discrepancy_check(P, union, mu=args.mu, delta=args.delta,
                                         beta=args.beta)
    out = _out_path(args.out)
    doc = result.to_json()
    doc.update({"mu": args.mu, "delta": args.delta, "beta": args.beta})
    _write_json(out, doc)
    _finish("uc-discrepancy", argv, args,
            _points_inputs(args.points) + [args.cells], [out])
    return [out]


def _cmd_tile_count_scan(args, argv):
    scheme, inputs = _load_scheme_arg(args.scheme)
    rows = substitution.tile_count_scan(scheme, args.root_type,
                                        _parse_floats(args.t_grid))
    out = _out_path(args.out)
    _write_csv(out, ("t", "count", "distinct_rel_volumes"),
               [(r.t, r.count, r.distinct_rel_volumes) for r in rows])
    outputs = [out]
    if args.fit_out:
        fit = substitution.fit_growth(rows, scheme.d)
        fit_path = _out_path(args.fit_out)
        _write_json(fit_path, {"c7": fit.c7, "k": fit.k, "r2": fit.r2})
        outputs.append(fit_path)
    if args.figure:
        from . import render

        fig_path = _out_path(args.figure)
        render.save_figure(render.fig_tile_counts(rows, d=scheme.d), fig_path)
        outputs.append(fig_path)
    _finish("tile-count-scan", argv, args, inputs, outputs)
    return outputs


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def _cmd_render(args, argv):
    from . import render

    if args.kind == "patch":
        if args.scheme is None or args.t is None:
            raise InvalidInputError("render --kind patch needs --scheme and --t")
    elif args.infile is None:
        raise InvalidInputError(f"render --kind {args.kind} needs --in")
    out = _out_path(args.out)
    inputs = []
    if args.kind == "pointset":
        P = _load_points(args.infile, args.window_points)
        fig = render.fig_pointset(P.points, P.window)
        inputs = _points_inputs(args.infile)
    elif args.kind == "cells":
        union = dyadic.CubeUnion.load_csv(args.infile)
        fig = render.fig_cells(union)
        inputs = [args.infile]
    elif args.kind == "patch":
        scheme, inputs = _load_scheme_arg(args.scheme)
        patch = substitution.generate_patch(scheme, args.root_type, args.t)
        fig = render.fig_patch(patch, title=f"t={args.t}")
    elif args.kind == "bk":
        _, rows = _read_csv(args.infile)
        shim = [SimpleNamespace(k=int(r[0]), sup_term=float(r[1]),
                                partial_sum=float(r[2])) for r in rows]
        fig = render.fig_bk(shim)
        inputs = [args.infile]
    elif args.kind == "density":
        _, rows = _read_csv(args.infile)
        ts = [float(r[0]) for r in rows]
        plus = [float(r[1]) for r in rows]
        minus = [float(r[2]) for r in rows]
        gaps = [float(r[3]) for r in rows]
        shim = SimpleNamespace(t_grid=ts, mu_plus=plus, mu_minus=minus,
                               delta_gap=gaps,
                               mu_est=0.5 * (plus[-1] + minus[-1]))
        fig = render.fig_density_curve(shim)
        inputs = [args.infile]
    elif args.kind == "repetitivity":
        _, rows = _read_csv(args.infile)
        samples = [SimpleNamespace(r=float(r[0]), R_est=float(r[1]))
                   for r in rows if r[1]]
        failures = [SimpleNamespace(r=float(r[0])) for r in rows if not r[1]]
        crep = max((s.R_est / s.r for s in samples), default=None)
        fig = render.fig_repetitivity(
            SimpleNamespace(samples=samples, failures=failures, crep_est=crep))
        inputs = [args.infile]
    elif args.kind == "tiles":
        _, rows = _read_csv(args.infile)
        shim = [SimpleNamespace(t=float(r[0]), count=int(r[1]),
                                distinct_rel_volumes=int(r[2])) for r in rows]
        fig = render.fig_tile_counts(shim, d=args.d)
        inputs = [args.infile]
    else:  # pragma: no cover - argparse choices guard this
        raise InvalidInputError(f"unknown render kind {args.kind!r}")
    render.save_figure(fig, out)
    _finish("render", argv, args, inputs, [out])
    return [out]


# -- parser --------------------------------------------------------------------


def _add_points_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--points", required=True, help="point cloud CSV")
    p.add_argument("--window-points", default=None,
                   help="window override lo...,hi... when no sidecar exists")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delrep",
        description="Delone-set repetitivity and discrepancy toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-lattice", help="integer-multiple lattice window")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--spacing", type=float, required=True)
    p.add_argument("--window", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_lattice)

    p = sub.add_parser("gen-perturbed", help="jittered lattice window")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--spacing", type=float, required=True)
    p.add_argument("--window", required=True)
    p.add_argument("--bound", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_perturbed)

    p = sub.add_parser("gen-substitution",
                       help="marked points of a substitution patch")
    p.add_argument("--scheme", required=True,
                   help="builtin name (ternary, half-split, corner) or JSON path")
    p.add_argument("--root-type", type=int, default=0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--marking", action="append", default=None,
                   help="per-prototile interior point, rationals p/q comma-joined")
    p.add_argument("--out", required=True)
    p.add_argument("--tiles-out", default=None)
    p.add_argument("--figure", default=None)
    p.set_defaults(func=_cmd_gen_substitution)

    p = sub.add_parser("scheme-check",
                       help="validity, irreducibility, incommensurability")
    p.add_argument("--scheme", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_scheme_check)

    p = sub.add_parser("scan-discrepancy", help="per-box |N - mu vol| report")
    _add_points_args(p)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--boxes", type=int, default=200)
    p.add_argument("--t-min", type=float, required=True)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--window", default=None, help="sampling window override")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--json", default=None)
    p.add_argument("--figure", default=None)
    p.set_defaults(func=_cmd_scan_discrepancy)

    p = sub.add_parser("scan-repetitivity", help="R(r, eps) profile")
    _add_points_args(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--r-grid", required=True)
    p.add_argument("--probe-patches", type=int, default=12)
    p.add_argument("--probe-locations", type=int, default=12)
    p.add_argument("--r-max", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--json", default=None)
    p.add_argument("--figure", default=None)
    p.set_defaults(func=_cmd_scan_repetitivity)

    p = sub.add_parser("fit-delta", help="density curve and gap power-law fit")
    _add_points_args(p)
    p.add_argument("--t-grid", required=True)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--window", default=None, help="sampling window override")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--json", default=None)
    p.add_argument("--figure", default=None)
    p.set_defaults(func=_cmd_fit_delta)

    p = sub.add_parser("bk-sum", help="windowed Burago-Kleiner partial sums")
    _add_points_args(p)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--k-min", type=int, default=0)
    p.add_argument("--centers-window", required=True)
    p.add_argument("--max-centers", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--figure", default=None)
    p.set_defaults(func=_cmd_bk_sum)

    p = sub.add_parser("dyadic-decompose",
                       help="single-use dyadic decomposition of a cube union")
    p.add_argument("--cells", required=True, help="cube-union CSV")
    p.add_argument("--cube", required=True, help="e.g. k=3,corner=0,4")
    p.add_argument("--out", required=True)
    p.add_argument("--scales-out", default=None)
    p.add_argument("--figure", default=None)
    p.set_defaults(func=_cmd_dyadic_decompose)

    p = sub.add_parser("uc-discrepancy",
                       help="cube-union discrepancy vs the dyadic-cube bound")
    _add_points_args(p)
    p.add_argument("--cells", required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_uc_discrepancy)

    p = sub.add_parser("tile-count-scan", help="#F_t growth along a t grid")
    p.add_argument("--scheme", required=True)
    p.add_argument("--root-type", type=int, default=0)
    p.add_argument("--t-grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fit-out", default=None)
    p.add_argument("--figure", default=None)
    p.set_defaults(func=_cmd_tile_count_scan)

    p = sub.add_parser("render", help="re-render a figure from a data file")
    p.add_argument("--kind", required=True,
                   choices=["pointset", "cells", "patch", "bk", "density",
                            "repetitivity", "tiles"])
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--window-points", default=None)
    p.add_argument("--scheme", default=None)
    p.add_argument("--root-type", type=int, default=0)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, argv)
    except DomainError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
