"""Command-line front end.

Subcommands: ``simulate``, ``keyrate``, ``curve``, ``optimize``, ``analyze``.
Every subcommand accepts ``--seed``, ``--out`` and ``--config``; a config file
holds ``key = value`` lines named after the long flags, and explicit flags
override it.  Exit codes: 0 success, 2 input error, 3 no key (l = 0).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from contextlib import contextmanager
from dataclasses import asdict, replace
from pathlib import Path

from phaseqss import __version__
from phaseqss.channel import BasisDependenceTooLarge, ChannelParams, gain, transmittance
from phaseqss.experiment import (
    PUBLISHED_RUNS,
    AnalysisError,
    ExperimentConfig,
    analyze,
    compare_with_published,
    experiment_config_from_mapping,
    fixture_path,
    load_fixture,
    observed_gain,
    read_key_values,
    published_config,
)
from phaseqss.montecarlo import SimConfig, SimMode, simulate
from phaseqss.optimizer import SearchSpace, expected_stats, optimize
from phaseqss.security import (
    ObservedStats,
    SecurityEpsilons,
    finite_key_length,
    phase_error_upper_bound,
)
from phaseqss.tally import CountsFormatError, parse_counts_csv

EXIT_OK, EXIT_INPUT, EXIT_NO_KEY = 0, 2, 3


class InputError(Exception):
    pass


def _count(text: str) -> int:
    value = float(text)
    if value < 0 or value != math.floor(value):
        raise argparse.ArgumentTypeError(f"{text!r} is not a nonnegative integer")
    return int(value)


def _seed(text: str) -> int:
    value = _count(text)
    if value >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _distances(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma list."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("distance step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 9) for i in range(max(n, 0))]
    return [float(v) for v in text.split(",") if v.strip()]


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=_seed, default=0, help="64-bit RNG seed")
    parser.add_argument("--out", type=Path, help="output path (default: stdout)")
    parser.add_argument("--config", type=Path, help="file of 'key = value' lines")


def _channel(parser: argparse.ArgumentParser, mu_default: float | None = 0.01) -> None:
    g = parser.add_argument_group("channel")
    g.add_argument("--mu", type=float, default=mu_default, help="intensity per pulse")
    g.add_argument("--eta-d", type=float, default=0.56, help="detector efficiency")
    g.add_argument("--pd", type=float, default=1e-8, help="dark count probability")
    g.add_argument("--ed", type=float, default=0.02, help="misalignment error rate")
    g.add_argument("--alpha", type=float, default=0.167, help="fiber loss, dB/km")
    g.add_argument("--length-km", type=float, default=None, help="total Alice-Bob length")
    g.add_argument("--loss-db", type=float, default=None, help="total fiber loss (sets length)")
    g.add_argument("--px", type=float, default=0.8, help="X-basis probability")


def _security(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("security")
    g.add_argument("--n", type=float, default=1e10, help="number of emitted pulses")
    g.add_argument("--fe", type=float, default=1.16, help="error-correction efficiency")
    for flag in ("eps-c", "eps-pa", "eps", "eps-a"):
        g.add_argument(f"--{flag}", type=float, default=1e-10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phaseqss", description="Phase-encoded quantum secret sharing toolkit."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo detection tally as counts CSV")
    _common(p)
    _channel(p)
    p.add_argument("--n", type=_count, default=10**6, help="number of emitted rounds")
    p.add_argument("--mode", choices=[m.value for m in SimMode], default=SimMode.BATCHED.value)
    p.add_argument("--sifted-only", action="store_true", help="drop discarded-basis triples")

    p = sub.add_parser("keyrate", help="finite key length from channel model or observed counts")
    _common(p)
    _channel(p, mu_default=None)
    _security(p)
    p.add_argument("--stats", type=Path, help="observed counts file (n_x, n_y, m_x, m_y as key = value)")
    p.add_argument("--q-mu", type=float, help="gain entering the coin imbalance (stats mode)")
    p.add_argument("--ep", type=float, help="override the phase error bound")
    p.add_argument("--ebx", type=float, help="override the key-round bit error rate")

    p = sub.add_parser("curve", help="optimized key rate versus distance as CSV")
    _common(p)
    _channel(p)
    _security(p)
    p.add_argument("--distances", type=_distances, default=None,
                   help="'start:stop:step' in km (inclusive) or comma list")
    p.add_argument("--fix-px", action="store_true", help="hold p_x at --px instead of optimizing")
    p.add_argument("--mu-min", type=float, default=1e-6)
    p.add_argument("--mu-max", type=float, default=0.5)

    p = sub.add_parser("optimize", help="optimal intensity and basis bias at one distance")
    _common(p)
    _channel(p)
    _security(p)
    p.add_argument("--fix-px", action="store_true", help="hold p_x at --px instead of optimizing")
    p.add_argument("--mu-min", type=float, default=1e-6)
    p.add_argument("--mu-max", type=float, default=0.5)

    p = sub.add_parser("analyze", help="finite-key analysis of a counts CSV")
    _common(p)
    p.add_argument("counts", nargs="?", type=Path, help="counts CSV")
    p.add_argument("--fixture", type=int, choices=sorted(PUBLISHED_RUNS), help="use a bundled data set")
    p.add_argument("--experiment-config", type=Path, help="experiment config (key = value)")
    p.add_argument("--csv", type=Path, help="also write the report as CSV here")
    p.add_argument("--against-table1", action="store_true",
                   help="check the published counts, error rates and key rate")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            values = read_key_values(fh)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
    actions = {a.option_strings[0][2:]: a for a in subparser._actions if a.option_strings}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            parser.error(f"config key {key!r} is not a flag of '{args.command}'")
        if action.nargs == 0:
            defaults[action.dest] = raw.lower() in ("1", "true", "yes")
            continue
        try:
            defaults[action.dest] = action.type(raw) if action.type else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            parser.error(f"config key {key!r}: {exc}")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _params(args: argparse.Namespace) -> ChannelParams:
    try:
        params = ChannelParams(
            mu=args.mu if args.mu is not None else 0.01,
            eta_d=args.eta_d,
            p_d=args.pd,
            e_d=args.ed,
            alpha=args.alpha,
            length_km=args.length_km or 0.0,
            p_x=args.px,
        )
        if args.loss_db is not None:
            if args.length_km is not None:
                raise InputError("give either --loss-db or --length-km, not both")
            params = params.with_loss_db(args.loss_db)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return params


def _epsilons(args: argparse.Namespace) -> SecurityEpsilons:
    try:
        return SecurityEpsilons(eps_c=args.eps_c, eps_pa=args.eps_pa, eps=args.eps, eps_a=args.eps_a)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _header(args: argparse.Namespace) -> list[str]:
    lines = [f"phaseqss {__version__} {args.command}"]
    for key, value in sorted(vars(args).items()):
        if key in ("command", "out", "config", "csv", "counts") or value is None:
            continue
        if isinstance(value, list):
            value = ",".join(repr(v) for v in value)
        elif isinstance(value, Path):
            value = str(value)
        lines.append(f"{key.replace('_', '-')} = {value}")
    return lines


@contextmanager
def _output(path: Path | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_kv(out, rows) -> None:
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        out.write(f"{key:<{width}}  {text}\n")


def cmd_simulate(args: argparse.Namespace) -> int:
    params = _params(args)
    try:
        config = SimConfig(n_rounds=args.n, seed=args.seed, mode=SimMode(args.mode))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    tally = simulate(params, config, sifted_only=args.sifted_only)
    with _output(args.out) as out:
        tally.to_csv(out, header=_header(args))
    return EXIT_OK


def _read_stats(path: Path) -> ObservedStats:
    try:
        with open(path, encoding="utf-8") as fh:
            values = read_key_values(fh)
        return ObservedStats(**{k: int(float(values[k.replace("_", "-")])) for k in ("n_x", "n_y", "m_x", "m_y")})
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"cannot read stats file {path}: {exc}") from None


def cmd_keyrate(args: argparse.Namespace) -> int:
    if args.mu is None:
        raise InputError("keyrate needs --mu")
    eps = _epsilons(args)
    params = _params(args)
    if args.stats is not None:
        stats = _read_stats(args.stats)
        q_mu = args.q_mu if args.q_mu is not None else (
            observed_gain(stats.n_x, args.n, params.p_x) if stats.n_x else 0.0
        )
    else:
        stats = expected_stats(params, args.n)
        q_mu = gain(params.mu, transmittance(params), params.p_d)
    rows: list[tuple[str, object]] = [
        ("n_x", stats.n_x), ("n_y", stats.n_y), ("m_x", stats.m_x), ("m_y", stats.m_y), ("q_mu", q_mu),
    ]
    ep_bar = args.ep
    if ep_bar is None:
        try:
            chain = phase_error_upper_bound(stats, params.mu, q_mu, eps)
        except (BasisDependenceTooLarge, ZeroDivisionError) as exc:
            rows += [("error", str(exc)), ("key_length_bits", 0), ("rate_per_pulse", 0.0)]
            with _output(args.out) as out:
                out.writelines(f"# {line}\n" for line in _header(args))
                _write_kv(out, rows)
            return EXIT_NO_KEY
        rows += list(asdict(chain).items())
        ep_bar = chain.ep_bar
    else:
        rows.append(("ep_bar", ep_bar))
    ebx = args.ebx if args.ebx is not None else (stats.ebx if stats.n_x else 0.5)
    if not (0 <= ep_bar <= 0.5 and 0 <= ebx <= 0.5):
        raise InputError("error rates must lie in [0, 0.5]")
    if stats.n_x > 0:
        key = finite_key_length(stats.n_x, ep_bar, ebx, args.fe, eps, n_total=args.n)
        bits, rate, leak = key.key_length_bits, key.rate_per_pulse, key.leak_ec_fraction
    else:
        bits, rate, leak = 0, 0.0, math.nan
    rows += [("ebx", ebx), ("leak_ec_fraction", leak), ("key_length_bits", bits), ("rate_per_pulse", rate)]
    with _output(args.out) as out:
        out.writelines(f"# {line}\n" for line in _header(args))
        _write_kv(out, rows)
    return EXIT_OK if bits > 0 else EXIT_NO_KEY


def _space(args: argparse.Namespace) -> SearchSpace:
    try:
        return SearchSpace(
            mu_range=(args.mu_min, args.mu_max),
            px_range=args.px if args.fix_px else (0.5, 0.99),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


CURVE_COLUMNS = ("distance_km", "loss_db", "mu_opt", "px_opt", "key_rate_per_pulse", "key_bits")


def cmd_curve(args: argparse.Namespace) -> int:
    if not args.distances:
        raise InputError("curve needs a nonempty --distances grid")
    base = _params(args)
    space, eps = _space(args), _epsilons(args)
    rows = []
    for distance in sorted(args.distances):
        if distance < 0:
            raise InputError(f"negative distance {distance}")
        fixed = replace(base, length_km=distance)
        best = optimize(space, fixed, args.n, args.fe, eps, seed=args.seed)
        rows.append((distance, fixed.loss_db, best.mu, best.p_x, best.rate, best.key_bits))
    with _output(args.out) as out:
        out.writelines(f"# {line}\n" for line in _header(args))
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for row in rows:
            writer.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in row])
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    fixed = _params(args)
    best = optimize(_space(args), fixed, args.n, args.fe, _epsilons(args), seed=args.seed)
    with _output(args.out) as out:
        out.writelines(f"# {line}\n" for line in _header(args))
        _write_kv(out, [
            ("distance_km", fixed.length_km), ("loss_db", fixed.loss_db), ("mu_opt", best.mu),
            ("px_opt", best.p_x), ("key_rate_per_pulse", best.rate), ("key_bits", best.key_bits),
        ])
    return EXIT_OK if best.feasible else EXIT_NO_KEY


def cmd_analyze(args: argparse.Namespace) -> int:
    if (args.counts is None) == (args.fixture is None):
        raise InputError("analyze needs exactly one of a counts path or --fixture")
    cfg = published_config(args.fixture) if args.fixture is not None else ExperimentConfig()
    if args.experiment_config is not None:
        try:
            with open(args.experiment_config, encoding="utf-8") as fh:
                cfg = experiment_config_from_mapping(read_key_values(fh))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read experiment config: {exc}") from None
    try:
        if args.fixture is not None:
            tally = load_fixture(args.fixture)
            source = str(fixture_path(args.fixture).name)
        else:
            with open(args.counts, encoding="utf-8") as fh:
                tally = parse_counts_csv(fh)
            source = str(args.counts)
    except (OSError, CountsFormatError) as exc:
        raise InputError(f"{args.counts or args.fixture}: {exc}") from None
    try:
        report = analyze(tally, cfg, seed=args.seed)
    except (AnalysisError, ZeroDivisionError, ValueError) as exc:
        raise InputError(f"analysis failed: {exc}") from None

    header = _header(args) + [
        f"source = {source}", f"n-total = {cfg.n_total:g}", f"mu = {cfg.mu:g}",
        f"px = {cfg.p_x:g}", f"fe = {cfg.f_e:g}",
        *(f"{k.replace('_', '-')} = {v:g}" for k, v in asdict(cfg.epsilons).items()),
    ]
    status = EXIT_OK if report.key.key_length_bits > 0 else EXIT_NO_KEY
    with _output(args.out) as out:
        out.writelines(f"# {line}\n" for line in header)
        _write_kv(out, report.as_rows())
        if args.against_table1:
            loss = args.fixture if args.fixture is not None else cfg.loss_db
            if loss is None or int(loss) not in PUBLISHED_RUNS:
                raise InputError("--against-table1 needs --fixture or loss-db in the experiment config")
            for name, ok, detail in compare_with_published(report, int(loss)):
                out.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}\n")
                if not ok:
                    status = 1
    if args.csv is not None:
        buf = io.StringIO()
        buf.writelines(f"# {line}\n" for line in header)
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("quantity", "value"))
        writer.writerows((k, repr(v) if isinstance(v, float) else v) for k, v in report.as_rows())
        args.csv.write_text(buf.getvalue(), encoding="utf-8")
    return status


COMMANDS = {
    "simulate": cmd_simulate,
    "keyrate": cmd_keyrate,
    "curve": cmd_curve,
    "optimize": cmd_optimize,
    "analyze": cmd_analyze,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        parser.print_usage(sys.stderr)
        print(f"phaseqss {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
