"""``armafield`` command-line interface.

Exit codes: 0 success, 1 usage, 2 numeric failure (instability or a singular
system), 3 degenerate data, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from armafield.composite import REFERENCE_TEXTURES, make_composite
from armafield.core import ArmaParams, ModelOrder
from armafield.errors import ArmaFieldError, DegenerateFieldError, UnstableParametersError
from armafield.imaging_io import (
    field_to_image,
    load_pgm,
    render_labels,
    render_reconstruction,
    save_pgm,
    to_field,
)
from armafield.segmenter import DEFAULT_BLOCK, DEFAULT_CLASSES, match_labels, segment
from armafield.synthesis import RNG_ALGORITHM, SynthesisConfig, stability_check, synthesize
from armafield.ywls import estimate

log = logging.getLogger("armafield")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_DEGENERATE, EXIT_IO = 0, 1, 2, 3, 4

DEFAULT_ESTIMATE_ORDER = (1, 1, 1, 1)
DEFAULT_SEGMENT_ORDER = (2, 2, 0, 0)
DEFAULT_SEGMENT_AR = (3, 3)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_tuple(n):
    def parse(text):
        try:
            vals = tuple(int(v) for v in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated integers, got {text!r}")
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated integers, got {text!r}")
        return vals
    return parse


def _lag_key(key: str):
    i, j = (int(v) for v in key.split(","))
    return (i, j)


def _coeffs_to_json(coeffs):
    return {f"{i},{j}": v for (i, j), v in sorted(coeffs.items())}


def _dump(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _write_csv(path: Path, grid):
    lines = [",".join(str(int(v)) for v in row) for row in np.asarray(grid)]
    path.write_text("\n".join(lines) + "\n")


def read_csv_grid(path) -> np.ndarray:
    text = Path(path).read_text()
    rows = [[int(v) for v in line.split(",")] for line in text.splitlines() if line.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise UsageError(f"{path}: not a rectangular integer grid")
    return np.array(rows, dtype=np.int64)


def _order(order, ar_approx):
    p1, p2, q1, q2 = order
    K1, K2 = ar_approx if ar_approx else (None, None)
    try:
        return ModelOrder(p1, p2, q1, q2, K1, K2)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def load_synthesis_config(path, seed=None) -> SynthesisConfig:
    """Parse a synthesis parameter file.

    Keys: ``a`` and ``b`` (``{"i,j": value}``), ``sigma2`` (default 1),
    ``size`` (``[N1, N2]``, default ``[256, 256]``), ``burn_in`` (default 64),
    ``seed`` (default 0) and optionally ``order`` (``[p1, p2, q1, q2]``;
    inferred from the largest lags otherwise).
    """
    spec = json.loads(Path(path).read_text())
    try:
        a = {_lag_key(k): float(v) for k, v in spec.get("a", {}).items()}
        b = {_lag_key(k): float(v) for k, v in spec.get("b", {}).items()}
        if "order" in spec:
            p1, p2, q1, q2 = (int(v) for v in spec["order"])
        else:
            p1 = max([i for i, _ in a] or [0])
            p2 = max([j for _, j in a] or [0])
            q1 = max([i for i, _ in b] or [0])
            q2 = max([j for _, j in b] or [0])
        order = ModelOrder(p1, p2, q1, q2)
        params = ArmaParams(a=a, b=b, sigma2=float(spec.get("sigma2", 1.0)))
        n1, n2 = (int(v) for v in spec.get("size", (256, 256)))
        return SynthesisConfig(
            order=order,
            params=params,
            N1=n1,
            N2=n2,
            burn_in=int(spec.get("burn_in", 64)),
            seed=int(spec.get("seed", 0) if seed is None else seed),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"{path}: invalid synthesis parameters: {exc}") from exc


def _field_sidecar(x, extra):
    img, meta = field_to_image(x)
    return img, {**extra, **meta}


def cmd_synth(args) -> int:
    config = load_synthesis_config(args.params, args.seed)
    if not stability_check(config.order, config.params):
        raise UnstableParametersError("unstable parameters: the AR impulse response does not decay")
    x = synthesize(config)
    img, sidecar = _field_sidecar(x, {
        "order": list(config.order.arma),
        "params": {"a": _coeffs_to_json(config.params.a), "b": _coeffs_to_json(config.params.b),
                   "sigma2": config.params.sigma2},
        "size": [config.N1, config.N2],
        "burn_in": config.burn_in,
        "seed": config.seed,
        "rng": RNG_ALGORITHM,
    })
    out = _outdir(args.out)
    save_pgm(out / "field.pgm", img)
    _dump(sidecar, out / "field.json")
    log.info("wrote %s", out / "field.pgm")
    return EXIT_OK


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_estimate(args) -> int:
    order = _order(args.order or DEFAULT_ESTIMATE_ORDER, args.ar_approx)
    field, _ = to_field(load_pgm(args.input))
    fit = estimate(field, order)
    doc = fit.to_dict()
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        (_outdir(args.out) / "estimate.json").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_segment(args) -> int:
    if args.order:
        order = _order(args.order, args.ar_approx)
    else:
        order = _order(DEFAULT_SEGMENT_ORDER, args.ar_approx or DEFAULT_SEGMENT_AR)
    img = load_pgm(args.input)
    if img.height < 2 * args.block or img.width < 2 * args.block:
        raise DegenerateFieldError(f"a {img.height}x{img.width} image holds fewer than 2 blocks per side")
    field, mean = to_field(img)
    try:
        seg, feats = segment(field, order, args.block, args.classes, args.seed, stride=args.stride,
                             include_sigma=not args.no_sigma_feature, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _outdir(args.out)
    save_pgm(out / "labels.pgm", render_labels(seg))
    _write_csv(out / "labels.csv", seg.block_labels)
    if feats.stride == feats.block_size:
        recon = render_reconstruction(field + mean, feats.fits, feats.block_size, valid=feats.valid,
                                      variant=args.reconstruction, maxval=img.maxval)
        save_pgm(out / "reconstruction.pgm", recon)
    _dump({
        "K": seg.n_classes,
        "order": order.to_dict(),
        "block": args.block,
        "stride": feats.stride,
        "sigma_feature": not args.no_sigma_feature,
        "seed": args.seed,
        "inertia": seg.inertia,
        "iterations": seg.iterations,
        "inertia_history": seg.inertia_history,
        "centroids": seg.centroids.tolist(),
        "counts": seg.counts(),
        "invalid_blocks": int((~feats.valid).sum()),
    }, out / "segment.json")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred = read_csv_grid(args.pred)
    truth = read_csv_grid(args.truth)
    if pred.shape != truth.shape:
        raise UsageError(f"shape mismatch: prediction {pred.shape}, truth {truth.shape}")
    invalid = args.classes if args.classes else None
    acc, perm, confusion = match_labels(pred, truth, args.classes, invalid=invalid)
    sys.stdout.write(json.dumps({
        "accuracy": acc,
        "permutation": perm,
        "confusion_matrix": confusion.tolist(),
    }, indent=2) + "\n")
    return EXIT_OK


def cmd_make_composite(args) -> int:
    x, truth = make_composite(args.size, args.block, args.seed)
    img, sidecar = _field_sidecar(x, {
        "size": [args.size, args.size],
        "block": args.block,
        "seed": args.seed,
        "rng": RNG_ALGORITHM,
        "textures": [
            {"order": list(o.arma), "a": _coeffs_to_json(p.a), "b": _coeffs_to_json(p.b), "sigma2": p.sigma2}
            for o, p in REFERENCE_TEXTURES
        ],
    })
    out = _outdir(args.out)
    save_pgm(out / "composite.pgm", img)
    _dump(sidecar, out / "composite.json")
    _write_csv(out / "truth.csv", truth)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="armafield", description="2D ARMA random-field estimation and texture segmentation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="{synth,estimate,segment,evaluate}",
                                parser_class=_Parser)
    sub.required = True

    def order_flags(p, default_order, default_k):
        p.add_argument("--order", type=_int_tuple(4), metavar="p1,p2,q1,q2",
                       help=f"model order (default: {','.join(map(str, default_order))})")
        p.add_argument("--ar-approx", type=_int_tuple(2), metavar="K1,K2",
                       help=f"long-AR truncation order (default: {default_k})")

    p = sub.add_parser("synth", help="synthesize an ARMA field from a JSON parameter file")
    p.add_argument("params", help="JSON parameter file")
    p.add_argument("--seed", type=int, default=None, help="override the seed in the parameter file")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="two-stage Yule-Walker least-squares fit of a PGM image")
    p.add_argument("input", help="binary PGM")
    order_flags(p, DEFAULT_ESTIMATE_ORDER, "2*max(p1+q1,p2+q2)+2 per axis")
    p.add_argument("--out", default=None, help="output directory (default: print to stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("segment", help="block-wise ARMA features clustered with k-means")
    p.add_argument("input", help="binary PGM")
    order_flags(p, DEFAULT_SEGMENT_ORDER, "3,3 with the default order, else 2*max(p1+q1,p2+q2)+2")
    p.add_argument("--block", type=int, default=DEFAULT_BLOCK, help="block side in pixels (default: 16)")
    p.add_argument("--classes", type=int, default=DEFAULT_CLASSES, help="number of classes K (default: 3)")
    p.add_argument("--seed", type=int, default=0, help="k-means seed (default: 0)")
    p.add_argument("--stride", type=int, default=None,
                   help="sliding-window step (default: the block size, i.e. no overlap)")
    p.add_argument("--no-sigma-feature", action="store_true",
                   help="leave log sigma^2 out of the feature vector (default: included)")
    p.add_argument("--reconstruction", choices=("innovation", "zero"), default="innovation",
                   help="reconstruction variant (default: innovation)")
    p.add_argument("--workers", type=int, default=1, help="threads for block fitting (default: 1)")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="permutation-matched block accuracy of a label CSV")
    p.add_argument("pred", help="predicted block-label CSV")
    p.add_argument("truth", help="ground-truth block-label CSV")
    p.add_argument("--classes", type=int, default=None,
                   help="number of classes; prediction label K then marks invalid blocks (default: unset)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("make-composite")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--block", type=int, default=DEFAULT_BLOCK)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_make_composite)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"armafield: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateFieldError as exc:
        print(f"armafield: degenerate field: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ArmaFieldError as exc:
        print(f"armafield: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"armafield: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"armafield: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
