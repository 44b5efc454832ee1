"""Command-line entry point: ``mahlerlab {vp,baseline,theorem,moduli,dual-identity}``.

Exit codes: 0 ok, 2 malformed input, 3 geometry error, 4 flat point,
5 inconclusive.  Errors are also written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bodies import Ball, VPolytope, cross_polytope, cube, regular_simplex, unit_ball_volume
from .bodyio import SCHEMA_VERSION, BodyFormatError, dumps, load
from .curvature import fit_indicatrix, sandwich_moduli
from .errors import FlatPointError, GeometryError, InconclusiveError, SantaloConvergenceError
from .perturb import cap_modulus, cone_modulus, dual_of_cap_identity, prepare_normalized, verify_theorem
from .santalo import santalo_point, volume_product_with_error

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GEOMETRY = 3
EXIT_FLAT = 4
EXIT_INCONCLUSIVE = 5

DEFAULT_DELTAS = (1e-2, 1e-3, 1e-4)


@dataclass
class RunConfig:
    seed: int = 0
    samples: int = 1_000_000
    dim: int = 3
    delta_grid: list = field(default_factory=lambda: list(DEFAULT_DELTAS))
    eps: float = 1e-3
    output_dir: Path = Path(".")
    format: str = "csv"
    jobs: int = 1

    def __post_init__(self):
        if self.samples < 1000:
            raise ValueError("samples must be at least 1000")
        if not 2 <= self.dim <= 6:
            raise ValueError("dim must be between 2 and 6")
        d = [float(x) for x in self.delta_grid]
        if not d or any(x <= 0 for x in d) or any(b >= a for a, b in zip(d, d[1:])):
            raise ValueError("delta grid must be positive and strictly decreasing")
        self.delta_grid = d
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")
        self.output_dir = Path(self.output_dir)

    def header(self):
        return f"# mahlerlab {__version__} seed={self.seed} samples={self.samples}"


def _fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _csv(config, header, rows):
    buf = io.StringIO()
    buf.write(config.header() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def _write(config, name, text):
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = config.output_dir / name
    path.write_text(text, encoding="utf-8")
    return path


def _json_doc(config, payload):
    doc = {"schema_version": SCHEMA_VERSION, "seed": config.seed, "samples": config.samples}
    doc.update(payload)
    return dumps(doc) + "\n"


def _point(text, dim=None):
    try:
        x = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise BodyFormatError(f"point must be a comma list of numbers, got {text!r}") from exc
    if dim is not None and len(x) != dim:
        raise BodyFormatError(f"point has {len(x)} coordinates, body has dimension {dim}")
    return x


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_vp(body_file, config: RunConfig):
    K = load(body_file)
    rep = santalo_point(K, seed=config.seed, vp_samples=config.samples)
    if config.format == "json":
        return [_write(config, "vp.json", _json_doc(config, rep.to_dict()))]
    s = rep.santalo_point
    rows = [[rep.vp_at_origin, *s, rep.vp_at_santalo, rep.normalized_vp, str(rep.iterations)]]
    header = ["vp_at_origin", *[f"santalo_{i}" for i in range(len(s))], "vp_at_santalo", "normalized_vp", "iterations"]
    return [_write(config, "vp.csv", _csv(config, header, rows))]


def hanner_body():
    """The 3-dimensional prism over the unit diamond, ``B_1^2 x [-1, 1]``."""
    base = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], float)
    return VPolytope(np.array([[a, b, c] for a, b in base for c in (-1.0, 1.0)]))


def baseline_bodies(dim):
    out = [
        ("cube", cube(dim)),
        ("cross_polytope", cross_polytope(dim)),
        ("ball", Ball(dim)),
        ("simplex", regular_simplex(dim)),
    ]
    if dim == 3:
        out.append(("hanner", hanner_body()))
    return out


def baseline_rows(config: RunConfig):
    rows = []
    for name, K in baseline_bodies(config.dim):
        # simplex vp is taken at its Santaló point (the centroid); the others are centered
        z = K.vertices.mean(axis=0) if name == "simplex" else np.zeros(config.dim)
        vp, err = volume_product_with_error(K, z, config.samples, config.seed)
        tag = "exact" if err == 0 else "mc"
        rows.append((name, config.dim, vp, vp / unit_ball_volume(config.dim) ** 2, err, tag))
    return rows


def cmd_baseline(config: RunConfig):
    rows = baseline_rows(config)
    if config.format == "json":
        payload = {
            "dim": config.dim,
            "rows": [
                {"body": r[0], "vp": r[2], "normalized_vp": r[3], "stderr": r[4], "method": r[5]} for r in rows
            ],
        }
        return [_write(config, "baseline.json", _json_doc(config, payload))]
    header = ["body", "dim", "vp", "normalized_vp", "stderr", "method"]
    rows = [[r[0], str(r[1]), r[2], r[3], r[4], r[5]] for r in rows]
    return [_write(config, "baseline.csv", _csv(config, header, rows))]


def cmd_theorem(body_file, point, config: RunConfig, method="auto", symmetric=False):
    K = load(body_file)
    x0 = _point(point, K.dim)
    diag = verify_theorem(
        K,
        x0,
        config.delta_grid,
        eps=config.eps,
        method=method,
        samples=config.samples,
        seed=config.seed,
        jobs=config.jobs,
        symmetric=symmetric,
    )
    summary = diag.summary()
    expected = 0.5 * (K.dim + 1)
    summary["slope_within_tolerance"] = bool(abs(diag.exponent - expected) <= 0.15)
    summary["passed"] = all(diag.strict_decrease)
    csv_text = config.header() + "\n" + diag.csv_text()
    return [
        _write(config, "theorem.csv", csv_text),
        _write(config, "theorem.json", _json_doc(config, summary)),
    ]


def cmd_moduli(body_file, point, config: RunConfig, svg=False):
    K = load(body_file)
    x0 = _point(point, K.dim)
    rep = fit_indicatrix(K, x0)
    if rep.kappa <= 0 or not np.all(np.isfinite(rep.principal_axes_b)):
        raise FlatPointError("Gauss curvature vanishes at the point")
    grids = [
        sandwich_moduli(K, x0, rep, config.delta_grid),
        cap_modulus(K, x0, config.delta_grid, kappa=rep.kappa),
        cone_modulus(K, x0, config.delta_grid, kappa=rep.kappa, samples=config.samples, seed=config.seed),
    ]
    paths = []
    for g in grids:
        name = {"phi": "phi_hat", "g_ratio": "g_ratio", "h_ratio": "h_ratio"}[g.name]
        if config.format == "json":
            payload = {"modulus": name, "rows": [dict(zip(("t", "measured", "leading", "ratio"), r)) for r in g.csv_rows()]}
            paths.append(_write(config, f"moduli_{name}.json", _json_doc(config, payload)))
        else:
            text = _csv(config, ["t", "measured", "leading", "ratio"], g.csv_rows())
            paths.append(_write(config, f"moduli_{name}.csv", text))
    if svg:
        paths.append(_plot_moduli(grids, config))
    return paths


def _plot_moduli(grids, config):
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for g in grids:
        t = [r[0] for r in g.rows]
        ax.semilogx(t, g.ratios(), marker="o", label=g.name)
    ax.axhline(1.0, color="0.6", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("measured / leading")
    ax.legend()
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = config.output_dir / "moduli.svg"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def cmd_dual_identity(body_file, point, config: RunConfig):
    K = load(body_file)
    x0 = _point(point, K.dim)
    body, x, _, _ = prepare_normalized(K, x0, samples=config.samples, seed=config.seed)
    rows = [(d, dual_of_cap_identity(body, x, d)) for d in config.delta_grid]
    if config.format == "json":
        payload = {"rows": [{"delta": d, "discrepancy": v} for d, v in rows]}
        return [_write(config, "dual_identity.json", _json_doc(config, payload))]
    return [_write(config, "dual_identity.csv", _csv(config, ["delta", "discrepancy"], rows))]


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=1_000_000)
    common.add_argument("--dim", type=int, default=3)
    common.add_argument("--deltas", default=",".join(str(d) for d in DEFAULT_DELTAS), help="comma list, decreasing")
    common.add_argument("--eps", type=float, default=1e-3)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    parser = argparse.ArgumentParser(prog="mahlerlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vp", parents=[common], help="volume product and Santaló point")
    p.add_argument("body")
    sub.add_parser("baseline", parents=[common], help="volume products of reference bodies")
    p = sub.add_parser("theorem", parents=[common], help="cap/cone decrease experiment")
    p.add_argument("body")
    p.add_argument("--point", required=True)
    p.add_argument("--method", choices=("auto", "mc"), default="auto")
    p.add_argument("--symmetric", action="store_true")
    p = sub.add_parser("moduli", parents=[common], help="empirical moduli of the cap and cone lemmas")
    p.add_argument("body")
    p.add_argument("--point", required=True)
    p.add_argument("--svg", action="store_true")
    p = sub.add_parser("dual-identity", parents=[common], help="polar of a cap cut versus a cone add")
    p.add_argument("body")
    p.add_argument("--point", required=True)
    return parser


def _fail(code, exc):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        deltas = [float(d) for d in args.deltas.split(",") if d.strip()]
        config = RunConfig(
            seed=args.seed,
            samples=args.samples,
            dim=args.dim,
            delta_grid=deltas,
            eps=args.eps,
            output_dir=Path(args.out),
            format=args.format,
            jobs=args.jobs,
        )
        if args.command == "vp":
            paths = cmd_vp(args.body, config)
        elif args.command == "baseline":
            paths = cmd_baseline(config)
        elif args.command == "theorem":
            paths = cmd_theorem(args.body, args.point, config, method=args.method, symmetric=args.symmetric)
        elif args.command == "moduli":
            paths = cmd_moduli(args.body, args.point, config, svg=args.svg)
        else:
            paths = cmd_dual_identity(args.body, args.point, config)
    except (BodyFormatError, ValueError) as exc:
        if isinstance(exc, FlatPointError):
            return _fail(EXIT_FLAT, exc)
        if isinstance(exc, GeometryError):
            return _fail(EXIT_GEOMETRY, exc)
        return _fail(EXIT_INPUT, exc)
    except OSError as exc:
        return _fail(EXIT_INPUT, exc)
    except InconclusiveError as exc:
        return _fail(EXIT_INCONCLUSIVE, exc)
    except SantaloConvergenceError as exc:
        return _fail(EXIT_GEOMETRY, exc)
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
