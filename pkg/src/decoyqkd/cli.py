"""Command-line front end.

Exit codes: 0 success (positive rate), 1 parse error, 2 numeric/domain
error, 3 computed zero rate, 4 output I/O error, 5 estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass
from pathlib import Path

from . import channel, decoy, keyrate
from .config import load_profile
from .errors import (
    EstimationError,
    IllConditionedError,
    InfeasibleRecordsError,
    InsufficientRecordsError,
    NumericError,
    ParseError,
)
from .keyrate import Method

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_NUMERIC = 2
EXIT_ZERO_RATE = 3
EXIT_IO = 4
EXIT_ESTIMATION = 5

SCAN_HEADER = ("distance_km", "method", "mu", "rate", "q_mu", "e_mu", "y1", "e1", "omega")


def fmt(x: float) -> str:
    return f"{x:.10g}"


@dataclass(frozen=True)
class ScanSpec:
    distance_start_km: float
    distance_end_km: float
    distance_step_km: float
    methods: tuple[Method, ...] = (Method.DECOY, Method.GLLP)
    mu: float | None = None

    def __post_init__(self):
        if self.distance_start_km < 0.0:
            raise ValueError("start distance must be >= 0")
        if self.distance_start_km > self.distance_end_km:
            raise ValueError("start distance must not exceed end distance")
        if self.distance_step_km <= 0.0:
            raise ValueError("distance step must be > 0")

    def distances(self) -> list[float]:
        span = self.distance_end_km - self.distance_start_km
        n = int(span / self.distance_step_km + 1e-9)
        return [round(self.distance_start_km + i * self.distance_step_km, 9) for i in range(n + 1)]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


class _Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _profile(args):
    try:
        return load_profile(args.profile)
    except OSError as exc:
        raise ParseError(f"cannot read profile: {exc.strerror or exc}", path=args.profile) from None


def format_scan(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCAN_HEADER)
    for r in rows:
        writer.writerow([fmt(r.distance_km), r.method.value, fmt(r.mu), fmt(r.rate), fmt(r.q_mu),
                         fmt(r.e_mu), fmt(r.y1), fmt(r.e1), fmt(r.omega)])
    return buf.getvalue()


def _write(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def cmd_rate(args, out):
    prof = _profile(args)
    method = Method(args.method)
    if args.mu is None:
        mu, result = keyrate.optimize_mu(prof.channel, args.distance, method, settings=prof.settings)
        if not result.secure:
            print(f"method: {method.value}", file=out)
            print(f"distance_km: {fmt(args.distance)}", file=out)
            print("no secure rate at any mu", file=out)
            return EXIT_ZERO_RATE
    else:
        mu = args.mu
        inputs = keyrate.inputs_from_model(prof.channel, args.distance, mu, method, prof.settings)
        result = keyrate.key_rate(inputs, method)
    c = result.components
    lines = [
        ("method", method.value), ("distance_km", fmt(args.distance)), ("mu", fmt(mu)),
        ("Q_mu", fmt(c["q_mu"])), ("E_mu", fmt(c["e_mu"])), ("Y_1", fmt(c["y1"])),
        ("e_1", fmt(c["e1"])), ("Q_1", fmt(c["q1"])), ("Omega", fmt(c["omega"])),
        ("rate", fmt(result.rate)),
    ]
    for key, value in lines:
        print(f"{key}: {value}", file=out)
    if not result.secure:
        print("no secure key (rate clamped to 0)", file=out)
        return EXIT_ZERO_RATE
    return EXIT_OK


def cmd_scan(args, out):
    prof = _profile(args)
    methods = tuple(Method(m) for m in (args.method or [Method.DECOY.value, Method.GLLP.value]))
    spec = ScanSpec(args.start, args.end, args.step, methods, args.mu)
    rows = keyrate.scan(prof.channel, spec.distances(), spec.methods, prof.settings, spec.mu)
    text = format_scan(rows)
    if args.out:
        _write(args.out, text)
    else:
        out.write(text)
    if args.figure:
        from .plotting import plot_scan

        try:
            ceiling = keyrate.intercept_resend_ceiling(prof.channel, prof.settings)
        except NumericError:
            ceiling = None
        try:
            plot_scan(rows, args.figure, ceiling_km=ceiling, title=Path(prof.source).name)
        except OSError as exc:
            raise _Failure(EXIT_IO, f"cannot write {args.figure}: {exc.strerror or exc}") from None
    return EXIT_OK


def cmd_estimate(args, out):
    try:
        records = decoy.read_records(args.records)
    except OSError as exc:
        raise ParseError(f"cannot read records: {exc.strerror or exc}", path=args.records) from None
    est = decoy.estimate(records, args.estimator, n_max=args.n_max)
    print(f"method: {est.method.value}", file=out)
    for name in ("y0", "y1", "e1"):
        value = getattr(est, name)
        print(f"{name}: {'n/a' if value is None else fmt(value)}", file=out)
    if args.profile is not None and est.y1 is not None:
        prof = _profile(args)
        print("mu,gain,qber,decoy_rate", file=out)
        for r in records:
            if r.mu <= 0.0 or r.gain <= 0.0:
                continue
            inputs = keyrate.RateInputs(r.mu, r.gain, r.qber, est, prof.settings.f_ec, prof.settings.q_protocol)
            rate = keyrate.rate_decoy(inputs).rate
            print(f"{fmt(r.mu)},{fmt(r.gain)},{fmt(r.qber)},{fmt(rate)}", file=out)
    return EXIT_OK


def cmd_ceiling(args, out):
    prof = _profile(args)
    ceiling = keyrate.intercept_resend_ceiling(prof.channel, prof.settings)
    print(f"intercept_resend_ceiling_km: {fmt(ceiling)}", file=out)
    for method in (Method.DECOY, Method.GLLP):
        d = keyrate.max_secure_distance(prof.channel, method, prof.settings)
        print(f"max_secure_distance_km[{method.value}]: {fmt(d)}", file=out)
    return EXIT_OK


def cmd_simulate(args, out):
    prof = _profile(args)
    eta = channel.transmittance(prof.channel, args.distance).eta
    try:
        mus = [float(x) for x in args.mus.split(",")]
    except ValueError:
        raise ParseError(f"--mus: expected comma-separated numbers, got {args.mus!r}") from None
    text = decoy.format_records(decoy.simulate_records(prof.channel, eta, mus))
    if args.out:
        _write(args.out, text)
    else:
        out.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="decoyqkd", description="Decoy-state BB84 key rates over lossy fibre.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    methods = [m.value for m in Method]

    def add_profile(p, default="gys"):
        p.add_argument("--profile", default=default, metavar="PATH",
                       help="profile file or built-in name (default: %(default)s)")

    p = sub.add_parser("rate", help="key rate at one distance")
    add_profile(p)
    p.add_argument("--distance", type=float, required=True, metavar="KM")
    p.add_argument("--mu", type=float, metavar="X", help="signal intensity (default: optimise)")
    p.add_argument("--method", choices=methods, default=Method.DECOY.value)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("scan", help="rate-versus-distance sweep as CSV")
    add_profile(p)
    p.add_argument("--start", type=float, default=0.0, metavar="KM")
    p.add_argument("--end", type=float, default=220.0, metavar="KM")
    p.add_argument("--step", type=float, default=2.0, metavar="KM")
    p.add_argument("--method", action="append", choices=[Method.DECOY.value, Method.GLLP.value])
    p.add_argument("--mu", type=float, metavar="X", help="fixed intensity (default: optimise per point)")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default: stdout)")
    p.add_argument("--figure", metavar="PATH", help="also render the curves to an image file")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("estimate", help="single-photon estimate from a mu,gain,qber CSV")
    p.add_argument("--records", required=True, metavar="PATH")
    p.add_argument("--estimator", choices=[decoy.EstimateMethod.GRID.value, decoy.EstimateMethod.VACUUM_WEAK.value],
                   default=decoy.EstimateMethod.GRID.value)
    p.add_argument("--n-max", type=int, default=decoy.DEFAULT_N_MAX, metavar="N")
    add_profile(p, default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("ceiling", help="intercept-resend ceiling and maximal secure distances")
    add_profile(p)
    p.set_defaults(func=cmd_ceiling)

    p = sub.add_parser("simulate", help="noiseless mu,gain,qber records from the channel model")
    add_profile(p)
    p.add_argument("--distance", type=float, required=True, metavar="KM")
    p.add_argument("--mus", default=",".join(str(m) for m in decoy.DEFAULT_DECOY_GRID), metavar="LIST")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleRecordsError as exc:
        print(f"estimation failed (infeasible records): {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except IllConditionedError as exc:
        print(f"estimation failed (ill-conditioned system): {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except InsufficientRecordsError as exc:
        print(f"estimation failed (insufficient records): {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, ZeroDivisionError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
