"""Command-line front end.

Every subcommand writes CSV (or key = value text) to ``--output`` or stdout.
``--config FILE`` supplies ``key = value`` defaults that explicit flags
override. Exit codes: 0 success, 2 domain error, 3 parse error.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import math
import sys
import warnings
from dataclasses import dataclass

from . import alphamap as am
from .errors import DomainError, ParseError, PhotoAuthError
from .optimizer import (DEFAULT_P_FN, DEFAULT_P_FP, advantage_report, minimize_u, optimize)
from .photon_stats import (DEFAULT_K, PHOTON_BUDGET_CAP, PerceptionModel, check_budget, detection_distribution,
                           make_source, miss_and_false_probs, p_see)
from .protocol_math import StoppingDesign, design_stopping
from .session import (FixedMode, ModeSet, Scripted, SimAlice, SimEve, UniformRandom, monte_carlo,
                      simulate_sessions, write_summary_csv, write_trace_csv)

EXIT_DOMAIN = 2
EXIT_PARSE = 3


class ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def fmt_p(x: float) -> str:
    return f"{x:.17g}"


def fmt_x(x: float) -> str:
    return f"{x:.12g}"


@dataclass(frozen=True)
class RunConfig:
    k_threshold: int = DEFAULT_K
    alpha_h: float = 0.16
    alpha_l: float = 0.04
    theta_h: float = am.DEFAULT_THETA_H
    theta_l: float = am.DEFAULT_THETA_L
    p_fp: float = DEFAULT_P_FP
    p_fn: float = DEFAULT_P_FN
    photon_budget_cap: float = PHOTON_BUDGET_CAP
    master_seed: int = 0
    output_path: str | None = None

    def __post_init__(self):
        if self.k_threshold < 0:
            raise DomainError(f"K must be >= 0, got {self.k_threshold}")
        for name in ("alpha_h", "alpha_l"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if self.alpha_l > self.alpha_h:
            raise DomainError(f"alpha_L ({self.alpha_l}) must not exceed alpha_H ({self.alpha_h})")
        if not self.theta_l < self.theta_h:
            raise DomainError(f"theta_L ({self.theta_l}) must be below theta_H ({self.theta_h})")
        for name in ("p_fp", "p_fn"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {getattr(self, name)}")
        if not self.photon_budget_cap > 0:
            raise DomainError(f"photon budget cap must be > 0, got {self.photon_budget_cap}")
        if self.master_seed < 0:
            raise DomainError(f"seed must be a non-negative integer, got {self.master_seed}")

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> RunConfig:
        get = lambda name, default: getattr(ns, name, None) if getattr(ns, name, None) is not None else default
        return cls(
            k_threshold=get("k", DEFAULT_K),
            alpha_h=get("alpha_h", 0.16),
            alpha_l=get("alpha_l", 0.04),
            theta_h=get("theta_h", am.DEFAULT_THETA_H),
            theta_l=get("theta_l", am.DEFAULT_THETA_L),
            p_fp=get("p_fp", DEFAULT_P_FP),
            p_fn=get("p_fn", DEFAULT_P_FN),
            photon_budget_cap=get("cap", PHOTON_BUDGET_CAP),
            master_seed=get("seed", 0),
            output_path=get("output", None),
        )


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ParseError(f"{path}: expected 'key = value'", lineno)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


# --- argument types -----------------------------------------------------------

def float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def num_range(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            raise ValueError
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range 'lo..hi', got {text!r}") from None


def seed_type(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer, got {text}")
    return v


def eve_strategy(text: str):
    name, _, arg = text.partition(":")
    try:
        if name == "uniform":
            return UniformRandom()
        if name == "fixed":
            return FixedMode(int(arg))
        if name == "modes":
            return ModeSet(tuple(int_list(arg)))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"strategy must be uniform, fixed:<m> or modes:<a,b,...>, got {text!r}")


def _sweep(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0 or hi < lo:
        raise DomainError(f"bad sweep {lo}..{hi} step {step}")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + i * step, 12) for i in range(n + 1)]


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


# --- commands -----------------------------------------------------------------

def cmd_psee(ns, cfg: RunConfig, out):
    alphas = ns.alphas or [ns.alpha]
    ks = ns.ks or [cfg.k_threshold]
    lo, hi = ns.nbar
    w = _writer(out)
    w.writerow(("nbar", "alpha", "K", "p_see"))
    for alpha in alphas:
        for k in ks:
            for x in _sweep(lo, hi, ns.step):
                src = make_source(ns.source, x)
                w.writerow((fmt_x(x), fmt_x(alpha), k, fmt_p(p_see(src, alpha, k))))


def cmd_detect_dist(ns, cfg, out):
    if not float(ns.nbar).is_integer():
        raise DomainError(f"detect-dist compares both sources and needs an integer photon number, got {ns.nbar}")
    n_exact = int(ns.nbar)
    coh = detection_distribution(make_source("coherent", ns.nbar), ns.alpha)
    sp = detection_distribution(make_source("single", n_exact), ns.alpha)
    size = max(coh.pmf.size, sp.pmf.size)
    w = _writer(out)
    w.writerow(("n", "p_coherent", "p_single"))
    for n in range(size):
        pc = coh.pmf[n] if n < coh.pmf.size else 0.0
        pq = sp.pmf[n] if n < sp.pmf.size else 0.0
        w.writerow((n, fmt_p(pc), fmt_p(pq)))


def cmd_u_curve(ns, cfg, out):
    lo, hi = ns.nbar
    step = ns.step if ns.source == "coherent" else max(1.0, round(ns.step))
    w = _writer(out)
    w.writerow(("nbar", "u"))
    for x in _sweep(lo, hi, step):
        src = make_source(ns.source, x)
        check_budget(src, cfg.photon_budget_cap)
        u = miss_and_false_probs(src, cfg.alpha_h, cfg.alpha_l, cfg.k_threshold, allow_equal=True).u
        w.writerow((fmt_x(x), fmt_p(u)))


def _write_curves(prefix: str, result):
    tag = result.kind
    with open(f"{prefix}u_{tag}.csv", "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(("nbar", "u"))
        for x, u in result.u_curve.curve:
            w.writerow((fmt_x(x), fmt_p(u)))
    with open(f"{prefix}time_{tag}.csv", "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(("N", "S_plus", "S_minus", "P_A", "T_A"))
        for r in result.time_curve.rows:
            w.writerow((r.n_spots, r.s_plus, r.s_minus, fmt_p(r.p_alice), fmt_p(r.t_alice)))


def cmd_optimize(ns, cfg, out):
    lo, hi = ns.nbar
    n_lo, n_hi = ns.n_range
    n_range = range(int(n_lo), int(n_hi) + 1)
    kw = dict(k=cfg.k_threshold, p_fp=cfg.p_fp, p_fn=cfg.p_fn, nbar_range=(lo, min(hi, cfg.photon_budget_cap)),
              resolution=ns.resolution, n_range=n_range)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        c = optimize("coherent", cfg.alpha_h, cfg.alpha_l, **kw)
        q = optimize("single", cfg.alpha_h, cfg.alpha_l, **kw)
    for wmsg in caught:
        print(f"warning: {wmsg.message}", file=sys.stderr)
    out.write(advantage_report(c, q).to_text())
    if ns.curves:
        _write_curves(ns.curves, c)
        _write_curves(ns.curves, q)


def _simulation_map(ns, cfg):
    if ns.map:
        amap = am.load(ns.map)
    else:
        amap = am.two_class_map(ns.rows, ns.cols, cfg.alpha_h, cfg.alpha_l)
    return am.classify(amap, cfg.theta_h, cfg.theta_l)


def cmd_simulate(ns, cfg, out):
    n = ns.n
    cmap = None
    u = None
    if ns.subject == "alice":
        nbar = ns.nbar
        if nbar is None:
            nbar = minimize_u(ns.source, cfg.alpha_h, cfg.alpha_l, cfg.k_threshold,
                              (1.0, cfg.photon_budget_cap)).nbar_opt
        source = make_source(ns.source, round(nbar) if ns.source == "single" else nbar)
        check_budget(source, cfg.photon_budget_cap)
        cmap = _simulation_map(ns, cfg)
        u = miss_and_false_probs(source, cmap.alpha_h_rep, cmap.alpha_l_rep, cfg.k_threshold).u
        subject = SimAlice(source, PerceptionModel(cfg.k_threshold))
    elif ns.subject == "eve":
        subject = SimEve(ns.eve_strategy)
    else:
        if not ns.script:
            raise DomainError("--subject scripted needs --script FILE")
        with open(ns.script, encoding="utf-8") as fh:
            try:
                subject = Scripted.from_lines(fh)
            except ValueError as exc:
                raise ParseError(f"{ns.script}: {exc}") from None
    if ns.s_plus is not None and ns.s_minus is not None:
        design = StoppingDesign.from_barriers(n, ns.s_plus, ns.s_minus, u)
    elif u is not None:
        design = design_stopping(n, u, cfg.p_fp, cfg.p_fn)
    else:
        raise DomainError("give --s-plus and --s-minus (thresholds are derived only for --subject alice)")
    stats = monte_carlo(subject, design, ns.sessions, cfg.master_seed, cmap, workers=ns.workers)
    write_summary_csv(stats, out)
    if ns.trace:
        records = simulate_sessions(subject, design, min(ns.sessions, ns.trace_sessions), cfg.master_seed, cmap)
        with _output(ns.trace) as fh:
            write_trace_csv(records, fh)


def cmd_alphamap_gen(ns, cfg, out):
    m = am.generate_synthetic(ns.rows, ns.cols, ns.alpha_high, ns.alpha_low, ns.jitter, ns.fraction_high,
                              cfg.master_seed, ns.subject)
    am.save(m, out)


def _read_map(path: str) -> am.AlphaMap:
    if path == "-":
        return am.load(sys.stdin)
    return am.load(path)


def cmd_alphamap_classify(ns, cfg, out):
    cm = am.classify(_read_map(ns.input), cfg.theta_h, cfg.theta_l, ns.min_per_class)
    out.write(am.classification_report(cm))


def cmd_alphamap_validate(ns, cfg, out):
    m = _read_map(ns.input)
    out.write(f"ok subject={m.subject_id} grid={m.rows}x{m.cols}\n")


# --- parser -------------------------------------------------------------------

def build_parser() -> ArgParser:
    common = ArgParser(add_help=False)
    common.add_argument("--config", help="key = value defaults file")
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--seed", type=seed_type, help="master seed")
    common.add_argument("--cap", type=float, help=f"photon budget cap (default {PHOTON_BUDGET_CAP:g})")

    p = ArgParser(prog="photoauth", description="Photon-counting biometric authentication analysis")
    sub = p.add_subparsers(dest="command", required=True, parser_class=ArgParser)

    def k_flag(sp):
        sp.add_argument("--k", type=int, help=f"perception threshold K (default {DEFAULT_K})")

    def alpha_flags(sp):
        sp.add_argument("--alpha-h", type=float, help="high-spot alpha (default 0.16)")
        sp.add_argument("--alpha-l", type=float, help="low-spot alpha (default 0.04)")

    sp = sub.add_parser("psee", parents=[common], help="probability of seeing vs photon number")
    sp.add_argument("--source", choices=("coherent", "single"), default="coherent")
    k_flag(sp)
    sp.add_argument("--ks", type=int_list, help="comma-separated K values to sweep")
    sp.add_argument("--alpha", type=float, default=0.10)
    sp.add_argument("--alphas", type=float_list, help="comma-separated alpha values to sweep")
    sp.add_argument("--nbar", type=num_range, default=(1.0, 300.0), help="range lo..hi")
    sp.add_argument("--step", type=float, default=1.0)
    sp.set_defaults(func=cmd_psee)

    sp = sub.add_parser("detect-dist", parents=[common], help="detected-photon pmf, coherent vs single-photon")
    sp.add_argument("--alpha", type=float, default=0.16)
    sp.add_argument("--nbar", type=float, default=60.0)
    sp.set_defaults(func=cmd_detect_dist)

    sp = sub.add_parser("u-curve", parents=[common], help="u = p_H + p_L vs photon number")
    sp.add_argument("--source", choices=("coherent", "single"), default="coherent")
    k_flag(sp)
    alpha_flags(sp)
    sp.add_argument("--nbar", type=num_range, default=(1.0, 200.0))
    sp.add_argument("--step", type=float, default=0.1)
    sp.set_defaults(func=cmd_u_curve)

    sp = sub.add_parser("optimize", parents=[common], help="optimal photon number, spot count and advantage")
    k_flag(sp)
    alpha_flags(sp)
    sp.add_argument("--p-fp", type=float, help=f"false-positive target (default {DEFAULT_P_FP:g})")
    sp.add_argument("--p-fn", type=float, help=f"false-negative target (default {DEFAULT_P_FN:g})")
    sp.add_argument("--nbar", type=num_range, default=(1.0, 200.0))
    sp.add_argument("--resolution", type=float, default=0.1)
    sp.add_argument("--n-range", type=num_range, default=(2, 50))
    sp.add_argument("--curves", metavar="PREFIX", help="also write u_<source>.csv and time_<source>.csv")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo authentication sessions")
    sp.add_argument("--subject", choices=("alice", "eve", "scripted"), required=True)
    sp.add_argument("--n", type=int, default=6, help="spots lit per round")
    sp.add_argument("--s-plus", type=int)
    sp.add_argument("--s-minus", type=int)
    sp.add_argument("--p-fp", type=float)
    sp.add_argument("--p-fn", type=float)
    sp.add_argument("--sessions", type=int, default=1000)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--source", choices=("coherent", "single"), default="coherent")
    sp.add_argument("--nbar", type=float, help="photon number (default: the u-minimizing value)")
    k_flag(sp)
    alpha_flags(sp)
    sp.add_argument("--map", help="alpha-map file (default: two-valued checkerboard)")
    sp.add_argument("--rows", type=int, default=5)
    sp.add_argument("--cols", type=int, default=5)
    sp.add_argument("--theta-h", type=float)
    sp.add_argument("--theta-l", type=float)
    sp.add_argument("--eve-strategy", type=eve_strategy, default=UniformRandom())
    sp.add_argument("--script", help="scripted responses, one per line")
    sp.add_argument("--trace", help="write per-round trace CSV here")
    sp.add_argument("--trace-sessions", type=int, default=100, help="sessions included in the trace")
    sp.set_defaults(func=cmd_simulate)

    amp = sub.add_parser("alphamap", help="alpha-map tools")
    asub = amp.add_subparsers(dest="action", required=True, parser_class=ArgParser)
    sp = asub.add_parser("gen", parents=[common], help="generate a synthetic alpha-map")
    sp.add_argument("--rows", type=int, default=5)
    sp.add_argument("--cols", type=int, default=5)
    sp.add_argument("--alpha-high", type=float, default=0.16)
    sp.add_argument("--alpha-low", type=float, default=0.04)
    sp.add_argument("--jitter", type=float, default=0.01)
    sp.add_argument("--fraction-high", type=float, default=0.5)
    sp.add_argument("--subject", default="synthetic")
    sp.set_defaults(func=cmd_alphamap_gen)
    for name, func, hlp in (("classify", cmd_alphamap_classify, "classify spots into high/low"),
                            ("validate", cmd_alphamap_validate, "check an alpha-map file")):
        sp = asub.add_parser(name, parents=[common], help=hlp)
        sp.add_argument("input", nargs="?", default="-", help="alpha-map file, '-' for stdin")
        if name == "classify":
            sp.add_argument("--theta-h", type=float)
            sp.add_argument("--theta-l", type=float)
            sp.add_argument("--min-per-class", type=int, default=1)
        sp.set_defaults(func=func)
    return p


def _subparsers(parser: argparse.ArgumentParser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                yield sp
                yield from _subparsers(sp)


def _apply_config(parser: argparse.ArgumentParser, config: dict[str, str]) -> None:
    # known keys become parser defaults, so explicit flags still win
    for sp in _subparsers(parser):
        dests = {a.dest for a in sp._actions}
        known = {k: v for k, v in config.items() if k in dests}
        if known:
            sp.set_defaults(**known)


def _config_path(argv: list[str]) -> str | None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    ns, _ = pre.parse_known_args(argv)
    return ns.config


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        path = _config_path(argv)
        if path:
            _apply_config(parser, read_config(path))
        ns = parser.parse_args(argv)
        if ns.cap is None:
            ns.cap = PHOTON_BUDGET_CAP
        cfg = RunConfig.from_args(ns)
        with _output(cfg.output_path) as out:
            ns.func(ns, cfg, out)
    except ParseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PhotoAuthError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
