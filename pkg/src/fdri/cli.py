"""Command-line interface.

Exit codes: 0 ok, 1 usage, 2 I/O, 3 numerical (rank/conditioning or a failed
numerical check), 4 provenance mismatch.
"""
import argparse
import json
import os
import pathlib
import sys

import numpy as np

from . import container
from ._validation import (ConsistencyError, InvalidArgumentError, ProvenanceError,
                          RankDeficiencyError)
from .evaluation import compare_methods
from .images import list_images, load_bundled_images, prepare_image, read_image, write_pgm
from .metrics import (EXACT_ATOL, bench_reconstruct, high_frequency_fraction, mean_spectrum,
                      psnr)
from .reconstruction import (METHODS, RIGHT_INVERSE_TOL, ReconstructionMatrix, precompute,
                             reconstruct, right_inverse_error)
from .sampling import (PROTOCOLS, _ALIASES, assemble_measurement_matrix, binarize,
                       n_from_ratio, normalize_protocol, select_patterns)
from .simulator import StreamConfig, measure, run_stream
from .spectral import DEFAULT_EPS, DEFAULT_MU

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERICAL, EXIT_PROVENANCE = 0, 1, 2, 3, 4
BENCH_BUDGET_MS = 88.0


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    """A numerical check requested on the command line did not pass."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Output:
    def __init__(self, as_json):
        self.as_json = as_json

    def emit(self, record, text=None):
        if self.as_json:
            print(_dumps(record, sort_keys=True))
        elif text is not None:
            print(text)
        else:
            print(" ".join(f"{k}={_fmt(v)}" for k, v in record.items()))


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def _strict(obj):
    # strict JSON has no inf/nan literals
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _strict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_strict(v) for v in obj]
    return obj


def _dumps(obj, **kw):
    return json.dumps(_strict(obj), default=_jsonable, allow_nan=False, **kw)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _load_db(arg, shape):
    if arg is None or arg == "bundled":
        return list(load_bundled_images(shape).values())
    if arg == "none":
        return None
    paths = list_images(arg)
    if not paths:
        raise UsageError(f"no images found in {arg}")
    return [prepare_image(read_image(p), shape) for p in paths]


def _named_images(arg, shape):
    if arg is None or arg == "bundled":
        return load_bundled_images(shape)
    path = pathlib.Path(arg)
    if path.is_file():
        return {path.stem: prepare_image(read_image(path), shape)}
    return {p.stem: prepare_image(read_image(p), shape) for p in list_images(path)}


def _measurement_matrix(args_patterns, include_white):
    pset = container.load_pattern_set(args_patterns)
    return pset, assemble_measurement_matrix(pset, include_white)


def _load_pair(patterns_path, matrix_path):
    """Load P and the M it was built from, checking the provenance digest."""
    arr, meta, _ = container.load_matrix(matrix_path)
    _, M = _measurement_matrix(patterns_path, meta.get("include_white", False))
    return container.load_reconstruction(matrix_path, M), M


# ---------------------------------------------------------------- commands

def cmd_select(args, out):
    protocol = normalize_protocol(args.protocol)
    res = args.res
    if args.k is not None:
        k = args.k
    else:
        k = n_from_ratio(args.ratio, res * res)
    db = _load_db(args.db, (res, res))
    pset = select_patterns(protocol, k, db, res, seed=args.seed)
    if args.binarize:
        pset = binarize(pset)
    digest = container.save_pattern_set(args.out, pset)
    if args.pgm_dir:
        d = pathlib.Path(args.pgm_dir)
        d.mkdir(parents=True, exist_ok=True)
        for i, p in enumerate(pset.patterns):
            if args.binary01:
                if not pset.binarized:
                    raise UsageError("--binary01 requires --binarize")
                img = (p > 0).astype(np.uint8)
                write_pgm(d / f"pattern_{i:05d}.pgm", img * 255)
            else:
                lo, hi = p.min(), p.max()
                write_pgm(d / f"pattern_{i:05d}.pgm",
                          (p - lo) / (hi - lo) if hi > lo else np.ones_like(p))
    head = [list(i) if isinstance(i, tuple) else i for i in pset.ids[:args.show]]
    out.emit({"command": "select", "protocol": protocol, "k": len(pset), "n": res * res,
              "binarized": pset.binarized, "rule": pset.selection_meta.get("rule"),
              "digest": digest, "top": head})


def cmd_precompute(args, out):
    _, M = _measurement_matrix(args.patterns, args.include_white)
    dtype = np.float32 if args.precision == "f32" else np.float64
    P, report = precompute(M, args.method, args.mu, args.eps,
                           memory_budget=args.memory_mb * 2 ** 20, dtype=np.float64)
    tol = RIGHT_INVERSE_TOL["float64"]
    if dtype == np.float32:
        P = P.astype(np.float32)
        tol = RIGHT_INVERSE_TOL["float32"]
    container.save_reconstruction(args.out, P, report, include_white=bool(args.include_white),
                                  tolerance=tol)
    rec = {"command": "precompute", "method": P.method, "k": P.k, "n": P.n,
           "precision": P.dtype.name}
    rec.update(report.as_dict())
    out.emit(rec)


def cmd_verify(args, out):
    P, M = _load_pair(args.patterns, args.matrix)
    err = right_inverse_error(M, P)
    tol = float(P.provenance.get("tolerance", RIGHT_INVERSE_TOL[P.dtype.name]))
    ok = err < tol
    out.emit({"command": "verify", "max_abs_error": err, "tolerance": tol, "ok": ok})
    if not ok:
        raise CheckFailed(f"M*P deviates from identity by {err:.3g} (tolerance {tol:.3g})")


def cmd_compare(args, out):
    a, _, _ = container.load_matrix(args.a)
    b, _, _ = container.load_matrix(args.b)
    if a.shape != b.shape:
        raise UsageError(f"shape mismatch: {a.shape} vs {b.shape}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dist = float(np.linalg.norm(a - b) / np.linalg.norm(b))
    ok = dist < args.tol
    out.emit({"command": "compare", "relative_frobenius": dist, "tolerance": args.tol, "ok": ok})
    if not ok:
        raise CheckFailed(f"matrices differ by {dist:.3g} (tolerance {args.tol:.3g})")


def cmd_measure(args, out):
    pset, M = _measurement_matrix(args.patterns, args.include_white)
    scene = prepare_image(read_image(args.image), M.shape)
    mv = measure(M, scene, args.sigma, args.seed)
    container.save_measurement(args.out, mv)
    out.emit({"command": "measure", "k": len(mv), "noise_sigma": mv.noise_sigma,
              "seed": mv.seed, "source_digest": mv.source_digest})


def cmd_reconstruct(args, out):
    P = container.load_reconstruction(args.matrix)
    mv = container.load_measurement(args.measurements)
    if mv.source_digest != P.provenance.get("m_digest"):
        raise ProvenanceError("measurements were taken with a different measurement matrix")
    x = reconstruct(P, mv.values)
    write_pgm(args.out, x, bits=args.bits)
    rec = {"command": "reconstruct", "out": str(args.out), "min": float(x.min()),
           "max": float(x.max())}
    if args.reference:
        ref = prepare_image(read_image(args.reference), P.shape)
        rec["psnr_db"] = psnr(ref, np.clip(x, 0, 1), atol=EXACT_ATOL).psnr_db
    out.emit(rec)


def cmd_run(args, out):
    P, M = _load_pair(args.patterns, args.matrix)
    images = _named_images(args.images, M.shape)
    outdir = pathlib.Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    names = list(images)
    if args.stream:
        frames = [images[names[i % len(names)]] for i in range(args.frames or len(names))]
        cfg = StreamConfig(frames, dmd_rate=args.dmd_rate, noise_sigma=args.sigma,
                           seed=args.seed, clock=args.clock)
        report, recon = run_stream(cfg, P, M)
        for i, x in enumerate(recon):
            write_pgm(outdir / f"frame_{i:05d}.pgm", x)
        for rec in report.frames:
            out.emit(dict(rec, command="run"))
        summary = report.as_dict()
        summary.pop("frames")
        (outdir / "stream_report.json").write_text(
            _dumps(report.as_dict(), indent=2) + "\n")
        out.emit(dict(summary, command="run-summary"))
        return
    rows = []
    for i, name in enumerate(names):
        mv = measure(M, images[name], args.sigma, args.seed + i)
        x = reconstruct(P, mv.values)
        write_pgm(outdir / f"{name}.pgm", x)
        q = psnr(images[name], np.clip(x, 0, 1), atol=EXACT_ATOL)
        rows.append({"image": name, "psnr_db": q.psnr_db, "mse": q.mse})
        out.emit(dict(rows[-1], command="run"))
    (outdir / "psnr_table.json").write_text(
        _dumps(rows, indent=2) + "\n")


def cmd_bench(args, out):
    if args.matrix:
        P = container.load_reconstruction(args.matrix)
        if args.precision == "f32":
            P = P.astype(np.float32)
    else:
        n = args.res * args.res
        k = n_from_ratio(args.ratio, n)
        rng = np.random.default_rng(args.seed)
        dtype = np.float32 if args.precision == "f32" else np.float64
        entries = rng.standard_normal((n, k), dtype=dtype)
        P = ReconstructionMatrix(entries, (args.res, args.res), "random")
    y = np.random.default_rng(args.seed + 1).standard_normal(P.k)
    rep = bench_reconstruct(P, y, args.iterations)
    rec = dict(rep.as_dict(), command="bench", budget_ms=args.budget_ms,
               within_budget=rep.median_ms < args.budget_ms)
    out.emit(rec)


def cmd_eval(args, out):
    res = args.res
    cmp = compare_methods(_named_images(args.db, (res, res)),
                          _load_db(args.select_db, (res, res)), res, args.ratio,
                          args.protocol, args.binarize, args.mu, args.eps, args.sigma, args.seed)
    for name, q_f, q_p in zip(cmp.names, cmp.psnr_fdri, cmp.psnr_pinv):
        out.emit({"command": "eval", "image": name, "psnr_fdri": q_f, "psnr_pinv": q_p},
                 f"{name:24s} fdri {q_f:7.2f} dB   pinv {q_p:7.2f} dB")
    out.emit({"command": "eval-summary", "protocol": cmp.protocol, "binarized": cmp.binarized,
              "k": cmp.k, "n": cmp.n, "mu": cmp.mu, "mean_psnr_fdri": cmp.mean_fdri,
              "mean_psnr_pinv": cmp.mean_pinv, "fdri_wins": cmp.fdri_wins,
              "images": len(cmp.names)})


def cmd_spectrum(args, out):
    pset = container.load_pattern_set(args.patterns)
    spec = mean_spectrum(pset)
    frac = high_frequency_fraction(spec)
    if args.out:
        logspec = np.log1p(spec)
        write_pgm(args.out, logspec / logspec.max())
    out.emit({"command": "spectrum", "k": len(pset), "binarized": pset.binarized,
              "high_frequency_fraction": frac})


# ---------------------------------------------------------------- parser

def build_parser():
    protocols = sorted(set(PROTOCOLS) | set(_ALIASES))
    parser = _Parser(prog="fdri", description="Single-pixel imaging with Fourier-domain "
                     "regularized inversion.")
    parser.add_argument("--json", action="store_true", help="emit JSON lines on stdout")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: FDRI_THREADS or all cores)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("select", help="select and save a sampling pattern set")
    p.add_argument("--protocol", required=True, choices=protocols)
    p.add_argument("--res", type=int, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--ratio", type=float, default=0.03)
    g.add_argument("--k", type=int)
    p.add_argument("--binarize", action="store_true")
    p.add_argument("--db", default="bundled",
                   help="image directory, 'bundled' (default) or 'none'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="patterns.fdri")
    p.add_argument("--pgm-dir", help="also dump patterns as PGM images")
    p.add_argument("--binary01", action="store_true",
                   help="dump binarized patterns as 0/255 (DMD on/off)")
    p.add_argument("--show", type=int, default=8, help="ranking entries to print")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("precompute", help="precompute a reconstruction matrix")
    p.add_argument("--patterns", required=True)
    p.add_argument("--method", choices=METHODS, default="fdri-direct")
    p.add_argument("--mu", type=float, default=DEFAULT_MU)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    p.add_argument("--include-white", action="store_true")
    p.add_argument("--memory-mb", type=int, default=256)
    p.add_argument("--out", default="P.fdri")
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("verify", help="check M*P = I")
    p.add_argument("--patterns", required=True)
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="relative Frobenius distance of two containers")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("measure", help="simulate a measurement of one image")
    p.add_argument("--patterns", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-white", action="store_true")
    p.add_argument("--out", default="y.fdri")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a measurement")
    p.add_argument("--matrix", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--out", default="recon.pgm")
    p.add_argument("--bits", type=int, choices=(8, 16), default=8)
    p.add_argument("--reference", help="image to compute PSNR against")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("run", help="measure and reconstruct a set of images or a stream")
    p.add_argument("--patterns", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--images", default="bundled", help="image file, directory or 'bundled'")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="frames")
    p.add_argument("--stream", action="store_true", help="run the producer/consumer pipeline")
    p.add_argument("--frames", type=int, help="stream length (source is cycled)")
    p.add_argument("--dmd-rate", type=float, default=22000.0)
    p.add_argument("--clock", choices=("simulated", "wall"), default="simulated")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="time the per-frame mat-vec")
    p.add_argument("--matrix", help="reconstruction matrix (default: random)")
    p.add_argument("--res", type=int, default=256)
    p.add_argument("--ratio", type=float, default=0.03)
    p.add_argument("--precision", choices=("f32", "f64"), default="f32")
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--budget-ms", type=float, default=BENCH_BUDGET_MS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="FDRI vs pseudoinverse PSNR table")
    p.add_argument("--db", default="bundled", help="evaluation images")
    p.add_argument("--select-db", default="bundled", help="database used for selection")
    p.add_argument("--res", type=int, default=128)
    p.add_argument("--ratio", type=float, default=0.03)
    p.add_argument("--protocol", choices=protocols, default="dct")
    p.add_argument("--binarize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--mu", type=float, default=DEFAULT_MU)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("spectrum", help="mean Fourier spectrum of a pattern set")
    p.add_argument("--patterns", required=True)
    p.add_argument("--out", help="write the log-spectrum as PGM")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        os.environ["FDRI_THREADS"] = str(max(1, args.threads))
    out = Output(args.json)
    try:
        if args.threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=max(1, args.threads)):
                args.func(args, out)
        else:
            args.func(args, out)
    except (UsageError, InvalidArgumentError) as exc:
        print(f"fdri: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProvenanceError as exc:
        print(f"fdri: provenance error: {exc}", file=sys.stderr)
        return EXIT_PROVENANCE
    except (RankDeficiencyError, ConsistencyError, CheckFailed) as exc:
        print(f"fdri: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"fdri: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
