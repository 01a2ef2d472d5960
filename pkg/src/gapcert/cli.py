"""Command-line front end.

Exit status: 0 on success, 1 when a verdict is inconclusive (or a check
fails), 2 on errors and malformed arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .certifier import GapCertificate, certify, crosscheck_exact, resolve_model
from .chain import ChainSpec
from .checks import SUITES, paper_check
from .errors import GapcertError
from .models.registry import MODELS
from .operators import lowest_eigs

__all__ = ["main", "parse_range", "parse_sizes", "run"]

SCAN_COLUMNS = ("theta", "size", "lambda0", "lambda1", "gap", "bound", "seed", "verdict", "seg_len")
SPECTRUM_COLUMNS = ("theta", "size", "index", "eigenvalue")


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` grid including ``start`` and stopping before ``stop + step/2``.

    A bare number gives a one-point grid.
    """
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad theta grid {text!r}") from None
    if len(vals) == 1:
        return vals
    if len(vals) != 3 or vals[2] <= 0:
        raise argparse.ArgumentTypeError(f"theta grid must be start:stop:step with step > 0, got {text!r}")
    start, stop, step = vals
    n = int(math.floor((stop + step / 2 - start) / step))
    return [round(start + i * step, 12) for i in range(n + 1) if start + i * step < stop + step / 2]


def parse_sizes(text: str) -> list[int]:
    """``a:b`` (both ends included), ``a,b,c`` or a single integer."""
    try:
        if ":" in text:
            a, b = (int(p) for p in text.split(":"))
            return list(range(a, b + 1))
        return [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gapcert", description="Certify spectral gaps of frustration-free chains.")
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp, theta_grid=False):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--model", choices=sorted(MODELS))
        src.add_argument("--spec", type=Path, help="chain spec JSON file")
        sp.add_argument("--theta", type=parse_range if theta_grid else float,
                        help="angle in radians" + (" or start:stop:step" if theta_grid else ""))
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--out", type=Path)

    c = sub.add_parser("certify", help="run the certification pipeline")
    model_args(c)
    c.add_argument("--seg-len", type=int)

    s = sub.add_parser("scan", help="certificate bounds and exact gaps over a theta grid")
    model_args(s, theta_grid=True)
    s.add_argument("--sizes", type=parse_sizes, required=True)
    s.add_argument("--seg-len", type=int)
    s.add_argument("--threads", type=int, default=1)

    e = sub.add_parser("spectrum", help="lowest eigenvalues of the full chain")
    model_args(e, theta_grid=True)
    e.add_argument("--sizes", type=parse_sizes, required=True)
    e.add_argument("--num-eigs", type=int, default=6)
    e.add_argument("--threads", type=int, default=1)

    k = sub.add_parser("paper-check", help="check closed forms and bounds numerically")
    k.add_argument("--suite", choices=SUITES + ("all",), default="all")
    k.add_argument("--seed", type=int, default=42)
    k.add_argument("--out", type=Path)
    return p


def _source(args):
    if args.spec is not None:
        spec = ChainSpec.load(args.spec)
        return spec, spec.theta
    if args.theta is None:
        raise GapcertError(f"--theta is required for model {args.model!r}")
    return args.model, args.theta


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.16e}"


def _summary(cert: GapCertificate) -> str:
    if cert.certified:
        return (f"{cert.model} theta={cert.theta}: certified_gapped at seg_len={cert.seg_len}, "
                f"renormalized bound {cert.theorem2_bound:.6g}, final bound {cert.final_bound:.6g}\n")
    return f"{cert.model} theta={cert.theta}: inconclusive at stage {cert.failed_stage}: {cert.message}\n"


def _cmd_certify(args) -> int:
    model, theta = _source(args)
    cert = certify(model, theta, seg_len=args.seg_len, tol=args.tol, seed=args.seed)
    if args.out is not None:
        cert.save(args.out)
    else:
        sys.stdout.write(cert.dumps())
    sys.stderr.write(_summary(cert))
    return 0 if cert.certified else 1


def _scan_point(job):
    model, theta, sizes, seg_len, tol, seed = job
    cert = certify(model, theta, seg_len=seg_len, tol=tol, seed=seed)
    rows = {r.size: r for r in crosscheck_exact(model, theta, sizes, cert, tol=tol, seed=seed)}
    out = []
    for size in sizes:
        r = rows.get(size)
        if r is None:
            exact = ["nan", "nan", "nan", "nan"]
        else:
            exact = [_fmt(r.lambda0), _fmt(r.lambda1), _fmt(r.gap), _fmt(r.bound)]
        out.append([_fmt(theta), str(size), *exact, str(seed), cert.verdict, str(cert.seg_len)])
    return out, cert.certified


def _pool_map(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def _thetas(args, default):
    if args.theta is None:
        return [default]
    return args.theta


def _cmd_scan(args) -> int:
    model, theta0 = _source(args)
    thetas = _thetas(args, theta0)
    jobs = [(model, th, args.sizes, args.seg_len, args.tol, args.seed) for th in thetas]
    results = _pool_map(_scan_point, jobs, args.threads)
    rows = [row for chunk, _ in results for row in chunk]
    _emit(_csv(SCAN_COLUMNS, rows), args.out)
    return 0 if all(ok for _, ok in results) else 1


def _spectrum_point(job):
    model, theta, sizes, k, tol, seed = job
    adapter = resolve_model(model)
    out = []
    for size in sizes:
        op = adapter.full_chain(theta, size)
        ev = lowest_eigs(op, min(k, op.dim), tol=tol, seed=seed).eigenvalues
        out += [[_fmt(theta), str(size), str(i), _fmt(v)] for i, v in enumerate(ev)]
    return out


def _cmd_spectrum(args) -> int:
    model, theta0 = _source(args)
    jobs = [(model, th, args.sizes, args.num_eigs, args.tol, args.seed) for th in _thetas(args, theta0)]
    rows = [row for chunk in _pool_map(_spectrum_point, jobs, args.threads) for row in chunk]
    _emit(_csv(SPECTRUM_COLUMNS, rows), args.out)
    return 0


def _cmd_paper_check(args) -> int:
    report = paper_check(args.suite, seed=args.seed)
    text = "\n".join(report.lines()) + f"\n{len(report.results)} checks, {len(report.failures)} failures\n"
    _emit(text, args.out)
    return 0 if report.ok else 1


_COMMANDS = {"certify": _cmd_certify, "scan": _cmd_scan, "spectrum": _cmd_spectrum,
             "paper-check": _cmd_paper_check}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (GapcertError, ValueError, OSError) as exc:
        sys.stderr.write(f"gapcert: error: {exc}\n")
        return 2


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
