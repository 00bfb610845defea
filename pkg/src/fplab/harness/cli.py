"""``fplab`` command-line interface."""
import argparse
import logging
import sys

from .. import verify
from .config import ConfigError, run_config
from .presets import PRESETS, run_preset
from .suite import verify_suite

LEMMAS = ("fixed-step", "mild", "corollary-mild", "leb", "ghal-expansive")


def _parse_set(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="fplab", description="Fixed-point iteration experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    rp = sub.add_parser("run-preset", help="run a named experiment preset")
    rp.add_argument("name", choices=sorted(PRESETS))
    rp.add_argument("--out", default="out")
    rp.add_argument("--set", action="append", metavar="KEY=VALUE", dest="overrides")
    rp.add_argument("--seed", type=int)
    rp.add_argument("--jobs", type=int, default=1)

    r = sub.add_parser("run", help="run a single configuration file")
    r.add_argument("config")
    r.add_argument("--out", help="trace path (overrides run.output)")

    v = sub.add_parser("verify", help="run the property checker suite")
    v.add_argument("--out", default="verify_out")
    v.add_argument("--seed", type=int)
    v.add_argument("--pairs", type=int, default=100_000)

    b = sub.add_parser("bounds", help="evaluate a closed-form step size and query count")
    b.add_argument("lemma", choices=LEMMAS)
    b.add_argument("--eps0", type=float)
    b.add_argument("--eps", type=float)
    b.add_argument("--gamma", type=float, default=1.0)
    b.add_argument("--D", type=float, dest="D")
    b.add_argument("--D-star", type=float, dest="D_star")
    b.add_argument("--beta", type=float)
    b.add_argument("--beta-prime", type=float, dest="beta_prime")
    b.add_argument("--mu", type=float)
    return p


def _bounds(args):
    if args.lemma == "leb":
        res = verify.bound_leb(args.beta, args.mu)
        print(f"lambda_max = {res.lam:.17g}")
        print(f"k = {res.k}{' (saturated)' if res.saturated else ''}")
        return 0
    if args.lemma == "ghal-expansive":
        level = verify.bound_ghal_expansive_error(args.D, args.gamma, args.beta, args.beta_prime)
        print(f"eps_bar = {level:.17g}")
        return 0
    if args.eps0 is None or args.eps is None:
        raise ValueError("--eps0 and --eps are required")
    fields = dict(eps0=args.eps0, eps=args.eps, gamma=args.gamma, D_star=args.D_star,
                  D=args.D, beta=args.beta, beta_prime=args.beta_prime, mu=args.mu)
    res = verify.BOUNDS[args.lemma](**fields)
    print(f"lambda = {res.lam:.17g}")
    print(f"k = {res.k}{' (saturated)' if res.saturated else ''}")
    if res.error_level is not None:
        print(f"error_level = {res.error_level:.17g}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run-preset":
            results = run_preset(args.name, args.out, _parse_set(args.overrides), args.seed,
                                 args.jobs)
            for stem, path, res in results:
                print(f"{stem}: {res.termination.value} queries={res.total_queries} "
                      f"residual={res.final_residual:.6e} -> {path}")
            return 0
        if args.command == "run":
            res, path = run_config(args.config, args.out)
            print(f"{res.algorithm}: {res.termination.value} queries={res.total_queries} "
                  f"residual={res.final_residual:.6e}" + (f" -> {path}" if path else ""))
            return 0
        if args.command == "verify":
            outcome = verify_suite(args.out, args.seed, args.pairs)
            for name, ok, _ in outcome.checks:
                print(f"{'PASS' if ok else 'FAIL'} {name}")
            return outcome.exit_code
        return _bounds(args)
    except (ConfigError, KeyError, ValueError, argparse.ArgumentTypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"fplab: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
