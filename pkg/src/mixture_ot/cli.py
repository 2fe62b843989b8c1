"""Command-line interface.

Every artifact-producing subcommand is reproducible: stochastic ones
take a --seed (default 0) and echo it, numeric stdout is full-precision
scientific notation, and identical invocations write identical bytes.
Errors exit with status 1 and a single "error: ..." line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .barycenter import mw2_barycenter
from .gmm import fit_em, load_gmm, load_point_cloud, log_pdf, save_gmm
from .imaging import color_transfer, load_image, save_image, texture_synthesize
from .mw2 import mw2, mw2_geodesic, save_plan
from .relaxed import optimize


def _fmt(value: float) -> str:
    return format(float(value), ".17e")


def _parse_weights(values: list[float], count: int) -> np.ndarray:
    w = np.asarray(values, dtype=float)
    if w.shape[0] != count:
        raise ValueError(f"expected {count} weights, got {w.shape[0]}")
    if abs(w.sum() - 1.0) > 1e-6:
        raise ValueError(f"weights must sum to 1 within 1e-6, got {w.sum()!r}")
    return w / w.sum()


def _echo_seed(seed: int) -> None:
    print(f"seed={seed}")


def _cmd_fit(args) -> None:
    cloud = load_point_cloud(args.input)
    gmm = fit_em(cloud, args.k, args.seed, iters=args.iters, cov_reg=args.cov_reg)
    save_gmm(args.output, gmm)
    _echo_seed(args.seed)


def _cmd_distance(args) -> None:
    g0 = load_gmm(args.gmm0)
    g1 = load_gmm(args.gmm1)
    dist, plan = mw2(g0, g1)
    if args.plan_out:
        save_plan(args.plan_out, plan)
    print(_fmt(dist))


def _cmd_barycenter(args) -> None:
    gmms = [load_gmm(p) for p in args.gmms]
    weights = _parse_weights(args.weights, len(gmms))
    result = mw2_barycenter(gmms, weights)
    save_gmm(args.output, result.barycenter)
    if args.coupling_out:
        payload = {
            "shape": list(result.coupling.shape),
            "support": [list(map(int, idx)) for idx in result.coupling.support()],
            "weights": [float(result.coupling.weights[idx])
                        for idx in result.coupling.support()],
            "cost": result.cost,
        }
        Path(args.coupling_out).write_text(json.dumps(payload, indent=1) + "\n")


def _cmd_barygrid(args) -> None:
    if len(args.gmms) != 4:
        raise ValueError("barygrid needs exactly four mixture files")
    gmms = [load_gmm(p) for p in args.gmms]
    n = args.grid_size
    if n < 2:
        raise ValueError("grid size must be at least 2")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        for j in range(n):
            s, t = i / (n - 1), j / (n - 1)
            weights = np.array([
                (1 - s) * (1 - t),   # corner 0: top-left
                (1 - s) * t,         # corner 1: top-right
                s * (1 - t),         # corner 2: bottom-left
                s * t,               # corner 3: bottom-right
            ])
            result = mw2_barycenter(gmms, weights)
            save_gmm(outdir / f"barycenter_{i}_{j}.json", result.barycenter)


def _cmd_interpolate(args) -> None:
    g0 = load_gmm(args.gmm0)
    g1 = load_gmm(args.gmm1)
    _, plan = mw2(g0, g1)
    save_gmm(args.output, mw2_geodesic(plan, args.t))


def _cmd_eval_density(args) -> None:
    gmm = load_gmm(args.gmm)
    xmin, xmax, ymin, ymax, n = args.grid
    n = int(n)
    if n < 2:
        raise ValueError("grid needs at least 2 points per axis")
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        if gmm.dim == 1:
            for x in np.linspace(xmin, xmax, n):
                dens = float(np.exp(log_pdf(gmm, [x])))
                writer.writerow([repr(float(x)), repr(dens)])
        elif gmm.dim == 2:
            for x in np.linspace(xmin, xmax, n):
                for y in np.linspace(ymin, ymax, n):
                    dens = float(np.exp(log_pdf(gmm, [x, y])))
                    writer.writerow([repr(float(x)), repr(float(y)), repr(dens)])
        else:
            raise ValueError("eval-density supports 1D and 2D mixtures only")


def _cmd_color_transfer(args) -> None:
    src = load_image(args.source)
    dst = load_image(args.target)
    out = color_transfer(src, dst, k=args.k, map_kind=args.map, seed=args.seed)
    save_image(args.output, out)
    _echo_seed(args.seed)


def _cmd_texture(args) -> None:
    img = load_image(args.input)
    out = texture_synthesize(img, k=args.k, patch_size=args.patch_size, seed=args.seed)
    save_image(args.output, out)
    _echo_seed(args.seed)


def _cmd_mw2kl(args) -> None:
    nu0 = load_point_cloud(args.nu0)
    nu1 = load_point_cloud(args.nu1)
    trace: list[tuple[int, float]] = []
    params = optimize(
        nu0, nu1, k=args.k, lam=args.lam, seed=args.seed,
        step=args.step, iters=args.iters,
        callback=lambda i, e: trace.append((i, e)),
    )
    payload = {
        "K": params.k,
        "pi": params.pi.tolist(),
        "m0": params.m0.tolist(),
        "m1": params.m1.tolist(),
        "s0": params.s0.tolist(),
        "s1": params.s1.tolist(),
        "lambda": args.lam,
        "energy": trace[-1][1],
    }
    Path(args.output).write_text(json.dumps(payload, indent=1) + "\n")
    trace_path = args.trace or Path(args.output).with_suffix(".trace.csv")
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "energy"])
        for it, e in trace:
            writer.writerow([it, repr(e)])
    _echo_seed(args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixture-ot",
        description="Transport distances, plans, barycenters and imaging "
                    "pipelines for Gaussian mixture models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a mixture to a CSV point cloud")
    p.add_argument("--input", required=True, help="CSV, one point per row")
    p.add_argument("--output", required=True, help="mixture JSON to write")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--cov-reg", type=float, default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("distance", help="mixture transport distance between two GMM files")
    p.add_argument("gmm0")
    p.add_argument("gmm1")
    p.add_argument("--plan-out", default=None, help="optional plan JSON")
    p.set_defaults(func=_cmd_distance)

    p = sub.add_parser("barycenter", help="weighted barycenter of J mixtures")
    p.add_argument("gmms", nargs="+")
    p.add_argument("--weights", type=float, nargs="+", required=True,
                   help="J weights summing to 1 (within 1e-6)")
    p.add_argument("--output", required=True)
    p.add_argument("--coupling-out", default=None)
    p.set_defaults(func=_cmd_barycenter)

    p = sub.add_parser("barygrid",
                       help="bilinear grid of barycenters between four mixtures")
    p.add_argument("gmms", nargs=4)
    p.add_argument("--grid-size", type=int, default=5)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=_cmd_barygrid)

    p = sub.add_parser("interpolate", help="geodesic point between two mixtures")
    p.add_argument("gmm0")
    p.add_argument("gmm1")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_interpolate)

    p = sub.add_parser("eval-density", help="tabulate a mixture density on a grid")
    p.add_argument("gmm")
    p.add_argument("--grid", type=float, nargs=5, required=True,
                   metavar=("XMIN", "XMAX", "YMIN", "YMAX", "N"),
                   help="grid spec; 1D mixtures use XMIN XMAX N")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_eval_density)

    p = sub.add_parser("color-transfer", help="recolor an image with another's palette")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--map", choices=("mean", "rand"), default="mean")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_color_transfer)

    p = sub.add_parser("texture", help="synthesize a texture from an exemplar")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--patch-size", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_texture)

    p = sub.add_parser("mw2kl",
                       help="fit a relaxed transport+likelihood coupling to two 1D clouds")
    p.add_argument("--nu0", required=True, help="CSV cloud, one value per row")
    p.add_argument("--nu1", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--output", required=True, help="optimized parameters JSON")
    p.add_argument("--trace", default=None,
                   help="energy trace CSV (default: OUTPUT with .trace.csv suffix)")
    p.set_defaults(func=_cmd_mw2kl)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # single-line machine-parsable failure
        message = str(exc).replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
