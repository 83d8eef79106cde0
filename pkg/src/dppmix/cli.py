"""``dppmix`` command line: certify, sample, estimate and verify.

Exit codes: 0 success, 1 error, 2 certificate computed but not satisfied.
"""
from __future__ import annotations

import argparse
import sys
import warnings

from . import __version__
from .certificates import certify, default_certificate
from .core import DppmixError, Subset, bits_to_masks
from .estimation import choose_m, estimate_marginal
from .modelspec import builtin_names, dumps, load_model
from .samplers import ChainConfig, InitialDistribution, sample_states
from .verify import SUITES, run_suite

EXIT_OK, EXIT_ERROR, EXIT_UNSATISFIED = 0, 1, 2


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _initial(name: str, P) -> InitialDistribution:
    if name == "uniform":
        return InitialDistribution.uniform()
    if name == "empty":
        return InitialDistribution.point_mass(P.ground.empty)
    return InitialDistribution.point_mass(P.ground.full)


def _element(ground, token: str) -> int:
    token = token.strip()
    if token in ground.labels:
        return ground.labels.index(token)
    if token.isdigit():
        return ground.index(int(token))
    return ground.index(token)


def _chain_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=["gibbs", "mh"], default="gibbs")
    p.add_argument("--scan", choices=["systematic", "random"], default="systematic")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--init", choices=["uniform", "empty", "full"], default="uniform", help="initial distribution")


def cmd_certify(args) -> int:
    P = load_model(args.model)
    cert = certify(P, args.condition, args.epsilon, kernel=args.kernel)
    _write(dumps(cert.to_dict(include_matrices=args.matrices)) + "\n", args.out)
    return EXIT_OK if cert.satisfied else EXIT_UNSATISFIED


def cmd_sample(args) -> int:
    P = load_model(args.model)
    cfg = ChainConfig(args.kernel, args.scan, args.sweeps, args.seed, _initial(args.init, P))
    masks = bits_to_masks(sample_states(P, cfg, args.replicas))
    labels = P.ground.labels
    lines = []
    for r, m in enumerate(masks):
        S = Subset(int(m), P.n)
        rec = {"replica": r, "subset": sorted(labels[i] for i in S.elements()), "bits": hex(S.bits)}
        lines.append(dumps(rec, indent=None))
    _write("".join(line + "\n" for line in lines), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    P = load_model(args.model)
    S = Subset.from_elements([_element(P.ground, t) for t in args.marginal.split(",") if t.strip()], P.n)
    cert = default_certificate(P, args.kernel, args.epsilon)
    if args.target_bias is not None:
        if not cert.satisfied:
            raise DppmixError(f"cannot choose m from --target-bias: certificate gamma = {cert.gamma:.6g} >= 1")
        m = choose_m(cert.rate(args.scan), len(S), args.target_bias)
    else:
        m = args.sweeps
    cfg = ChainConfig(args.kernel, args.scan, m, args.seed, _initial(args.init, P))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = estimate_marginal(P, S, cfg, args.replicas, cert)
    d = rep.to_dict()
    d["target"] = [P.ground.labels[i] for i in S.elements()]
    d["certificate"] = {"condition": cert.condition.value, "gamma": cert.gamma, "satisfied": cert.satisfied}
    _write(dumps(d) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    refs = args.model or [f"builtin:{name}" for name in builtin_names()]
    checks = []
    for ref in refs:
        P = load_model(ref)
        checks += run_suite(P, ref, args.suite, args.max_n)
    width = max((len(c.name) for c in checks), default=10)
    mwidth = max((len(c.model) for c in checks), default=10)
    lines = []
    for c in checks:
        val = "" if c.value is None else f"{c.value: .3e}"
        lines.append(f"{c.status.upper():4}  {c.suite:11}  {c.model:{mwidth}}  {c.name:{width}}  {val:>11}  {c.detail}".rstrip())
    failed = sum(c.status == "fail" for c in checks)
    lines.append(f"{len(checks)} checks, {failed} failed, {sum(c.status == 'skip' for c in checks)} skipped")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        _write(dumps({"schema_version": 1, "checks": [c.to_dict() for c in checks], "failed": failed}) + "\n", args.out)
    return EXIT_ERROR if failed else EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; exit code 2 is reserved for unsatisfied certificates
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dppmix", description="Certified Gibbs and MH sampling of discrete point processes")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="compute a fast-mixing certificate")
    p.add_argument("--model", required=True, help="model JSON file or builtin:NAME")
    p.add_argument("--condition", choices=["general", "submodular", "simplified", "closed-form", "dobrushin"], default="submodular")
    p.add_argument("--kernel", choices=["gibbs", "mh"], default="gibbs", help="kernel for --condition dobrushin")
    p.add_argument("--epsilon", type=_positive_float, default=0.01)
    p.add_argument("--matrices", action="store_true", help="include the matrices in the report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sample", help="draw independent chain states as NDJSON")
    p.add_argument("--model", required=True)
    _chain_args(p)
    p.add_argument("--sweeps", type=int, required=True)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", help="Monte Carlo marginal with certified bias/MSE bounds")
    p.add_argument("--model", required=True)
    p.add_argument("--marginal", required=True, help="comma-separated labels or indices")
    how = p.add_mutually_exclusive_group(required=True)
    how.add_argument("--target-bias", type=_positive_float)
    how.add_argument("--sweeps", type=int)
    p.add_argument("--replicas", type=int, default=10000)
    p.add_argument("--epsilon", type=_positive_float, default=0.01)
    _chain_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", help="run oracle cross-checks")
    p.add_argument("--model", action="append", help="model file or builtin:NAME (repeatable; default: all builtins)")
    p.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    p.add_argument("--max-n", type=int, default=8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DppmixError, ValueError, OSError) as exc:
        sys.stderr.write(f"dppmix: error: {exc}\n")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
