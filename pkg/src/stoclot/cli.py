"""Command-line frontend.

Verbs: gen, solve (chance | lottery | expected), determinize, sparsify,
certify, verify.  All output is JSON and deterministic for fixed inputs,
flags and --seed (certificates additionally carry a wall-time field).

Exit codes: 0 success, 2 infeasible demand (certificate printed), 3 input
error, 4 resource exhaustion.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import chance, determinize, expected, lottery, verify
from .certify import certify_partial_bound, certify_scc_bound
from .core import DemandChance, load_demands, load_instance
from .errors import InfeasibleDemand, InputError, ResourceError
from .lottery import QDistribution
from .verify import (CoverageAtLeast, HardCardinality, HardRadius,
                     MeanAtMost, mc_verify)


def _format_float(x):
    return format(x, ".17g")


def json_dumps(obj):
    """Deterministic JSON: sorted keys, 17-significant-digit floats."""
    def enc(o):
        if isinstance(o, float):
            return RawFloat(_format_float(o))
        if isinstance(o, dict):
            return {k: enc(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [enc(v) for v in o]
        if isinstance(o, (np.floating,)):
            return RawFloat(_format_float(float(o)))
        if isinstance(o, (np.integer,)):
            return int(o)
        return o

    class RawFloat(float):
        def __new__(cls, text):
            inst = super().__new__(cls, float(text))
            inst.text = text
            return inst

        def __repr__(self):
            return self.text

    class Encoder(json.JSONEncoder):
        def default(self, o):  # pragma: no cover - fallthrough
            return str(o)

    out = json.dumps(enc(obj), sort_keys=True, separators=(",", ":"),
                     cls=Encoder)
    return out + "\n"


def _emit(obj, path=None):
    text = json_dumps(obj)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("STOCLOT_SEED")
    if env is not None:
        return int(env)
    return 0


def _load(args, need_demands=True):
    inst = load_instance(args.instance, validate=not args.skip_validation)
    ch = ex = None
    if args.demands:
        ch, ex = load_demands(args.demands, inst)
    elif need_demands:
        raise InputError("--demands is required for this command")
    return inst, ch, ex


def _radii(inst, ch, args):
    if getattr(args, "radius", None) is not None:
        return np.full(inst.n_clients, float(args.radius))
    if ch is not None:
        if (ch.p != 1.0).any():
            raise InputError("lottery demands must have p = 1 everywhere")
        return ch.r
    return np.full(inst.n_clients, lottery.guess_radius(inst))


def _report_or_solution(sampler, checks, args):
    seed = _seed(args)
    if args.samples >= 1000:
        rep = mc_verify(sampler, args.samples, seed, checks, jobs=args.jobs)
        _emit(rep.to_json_dict(), args.out)
        return 0
    s = sampler.sample(seed)
    _emit({"open": sorted(sampler.instance.facility_ids[i] for i in s),
           "seed": seed}, args.out)
    return 0


def cmd_gen(args):
    params = {}
    for key in ("n", "n_facilities", "n_clients", "n_leaves", "dim"):
        v = getattr(args, key)
        if v is not None:
            params[key] = v
    params["k"] = args.k
    params["scc"] = args.scc
    inst = verify.gen_instance(args.kind, params, _seed(args))
    _emit(inst.to_json_dict(), args.out)
    return 0


def cmd_solve_chance(args):
    inst, ch, _ = _load(args)
    if ch is None:
        raise InputError("chance demands required")
    if args.dump_lp:
        _dump_chance_lp(inst, ch, args.dump_lp)
    if args.algo == "faithful":
        sampler = chance.FaithfulSampler(inst, ch)
        checks = [HardCardinality(inst.k),
                  CoverageAtLeast(1.0, ch.r, (1 - 1 / np.e) * ch.p)]
    elif args.algo == "half-homog":
        mode = "equal_p" if ch.homogeneous_p() else "equal_r"
        sampler = chance.HalfHomogSampler(inst, ch, mode)
        factor = 2.0 if inst.scc else 3.0
        checks = [HardCardinality(inst.k),
                  CoverageAtLeast(factor, ch.r, ch.p)]
    elif args.algo == "iterative":
        sampler = chance.IterativeSampler(inst, ch)
        checks = [HardCardinality(inst.k),
                  CoverageAtLeast(9.0, ch.r, ch.p)]
    else:
        raise InputError(f"unknown algorithm {args.algo!r}")
    return _report_or_solution(sampler, checks, args)


def cmd_solve_lottery(args):
    inst, ch, _ = _load(args, need_demands=False)
    r = _radii(inst, ch, args)
    if args.algo == "general":
        sampler = lottery.ClusterLotterySampler(inst, r, 0.0)
        factor = lottery.GENERAL_MEAN_FACTOR
    elif args.algo == "scc":
        sampler = lottery.ClusterLotterySampler(inst, r, args.q)
        factor = lottery.SCC_MEAN_FACTOR
    elif args.algo == "partial":
        qdist = _qdist(args)
        sampler = lottery.PartialLotterySampler(inst, qdist, r)
        factor = lottery.PARTIAL_MEAN_FACTOR
    else:
        raise InputError(f"unknown algorithm {args.algo!r}")
    checks = [HardCardinality(inst.k), HardRadius(3.0, np.asarray(r, float)),
              MeanAtMost(factor, np.asarray(r, float))]
    return _report_or_solution(sampler, checks, args)


def cmd_solve_expected(args):
    inst, _, ex = _load(args)
    if ex is None:
        raise InputError("expected-distance demands required")
    plugin = expected.PLUGINS[args.plugin]
    lott = expected.mwu_lottery(inst, ex, args.epsilon, plugin,
                                rounds=args.max_rounds, seed=_seed(args))
    if args.reduce_support:
        lott = expected.reduce_support(inst, lott)
    _emit(lott.to_json_dict(inst), args.out)
    return 0


def cmd_determinize(args):
    inst, _, ex = _load(args)
    if ex is None:
        raise InputError("expected-distance demands required")
    if args.mode == "scalefree":
        det = determinize.determinize_scalefree(inst, ex, args.alpha)
    elif args.mode == "log":
        det = determinize.determinize_logblowup(inst, ex, args.epsilon,
                                                _seed(args))
    elif args.mode == "exact":
        det = determinize.determinize_exact_k(inst, ex)
        if isinstance(det, determinize.InfeasibilityWitness):
            _emit({"infeasible": True, "witness_clients": det.clients,
                   "witness_targets": det.targets}, args.out)
            return 2
    else:
        raise InputError(f"unknown mode {args.mode!r}")
    _emit({"open": sorted(inst.facility_ids[i] for i in det.open_set),
           "alpha_achieved": det.alpha_achieved,
           "beta_achieved": det.beta_achieved}, args.out)
    return 0


def cmd_sparsify(args):
    inst, ch, _ = _load(args, need_demands=False)
    r = _radii(inst, ch, args)
    if args.algo == "general":
        sampler = lottery.ClusterLotterySampler(inst, r, 0.0)
    elif args.algo == "scc":
        sampler = lottery.ClusterLotterySampler(inst, r, args.q)
    elif args.algo == "partial":
        sampler = lottery.PartialLotterySampler(inst, _qdist(args), r)
    else:
        raise InputError(f"unknown algorithm {args.algo!r}")
    lott = expected.sparsify_sampling(inst, sampler, args.epsilon, _seed(args))
    _emit(lott.to_json_dict(inst), args.out)
    return 0


def cmd_certify(args):
    if args.mode == "partial":
        cert = certify_partial_bound(
            levels=args.levels, cap_m=args.cap_m, eps_grid=args.eps_grid,
            qdist=_qdist(args), sweep_p=args.sweep_p)
        _emit(cert.to_json_dict(), args.out)
    elif args.mode == "scc":
        bound = certify_scc_bound(q=args.q)
        _emit({"mode": "scc", "q": args.q, "bound": bound}, args.out)
    else:
        raise InputError(f"unknown mode {args.mode!r}")
    return 0


def _qdist(args):
    if getattr(args, "qdist", None):
        with open(args.qdist) as fh:
            return QDistribution.from_json_dict(json.load(fh))
    return QDistribution.certified_default()


def _dump_chance_lp(inst, ch, path):
    from .lp import dump_lp_text
    balls = [inst.ball(j, ch.r[j]) for j in range(inst.n_clients)]
    a_ub, b_ub = [], []
    for j in range(inst.n_clients):
        if ch.p[j] > 0:
            row = np.zeros(inst.n_facilities)
            row[balls[j]] = -1.0
            a_ub.append(row)
            b_ub.append(-float(ch.p[j]))
    for i in range(inst.n_facilities):
        row = np.zeros(inst.n_facilities)
        row[i] = 1.0
        a_ub.append(row)
        b_ub.append(1.0)
    with open(path, "w") as fh:
        fh.write(dump_lp_text(np.zeros(inst.n_facilities), a_ub, b_ub,
                              [np.ones(inst.n_facilities)], [float(inst.k)]))


def build_parser():
    p = argparse.ArgumentParser(
        prog="stoclot",
        description="stochastic clustering lotteries: solve, verify, certify")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, demands=True):
        sp.add_argument("--instance", required=True)
        sp.add_argument("--demands", required=demands)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", "--report", dest="out")
        sp.add_argument("--skip-validation", action="store_true")
        sp.add_argument("--jobs", type=int, default=1)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("--kind", required=True,
                   choices=["euclidean", "random_metric", "uniform_gadget",
                            "star"])
    g.add_argument("--n", type=int)
    g.add_argument("--n-facilities", dest="n_facilities", type=int)
    g.add_argument("--n-clients", dest="n_clients", type=int)
    g.add_argument("--n-leaves", dest="n_leaves", type=int)
    g.add_argument("--dim", type=int)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--scc", action="store_true")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    sv = sub.add_parser("solve", help="run a rounding algorithm")
    ssub = sv.add_subparsers(dest="family", required=True)

    sc = ssub.add_parser("chance")
    common(sc)
    sc.add_argument("--algo", required=True,
                    choices=["faithful", "half-homog", "iterative"])
    sc.add_argument("--samples", type=int, default=1)
    sc.add_argument("--dump-lp")
    sc.set_defaults(func=cmd_solve_chance)

    sl = ssub.add_parser("lottery")
    common(sl, demands=False)
    sl.add_argument("--algo", required=True,
                    choices=["general", "scc", "partial"])
    sl.add_argument("--q", type=float, default=lottery.SCC_Q)
    sl.add_argument("--qdist")
    sl.add_argument("--radius", type=float)
    sl.add_argument("--samples", type=int, default=1)
    sl.set_defaults(func=cmd_solve_lottery)

    se = ssub.add_parser("expected")
    common(se)
    se.add_argument("--epsilon", type=float, required=True)
    se.add_argument("--plugin", default="localsearch",
                    choices=sorted(expected.PLUGINS))
    se.add_argument("--max-rounds", dest="max_rounds", type=int,
                    default=10**4)
    se.add_argument("--reduce-support", action="store_true")
    se.set_defaults(func=cmd_solve_expected)

    dt = sub.add_parser("determinize")
    common(dt)
    dt.add_argument("--mode", required=True,
                    choices=["scalefree", "log", "exact"])
    dt.add_argument("--alpha", type=float, default=2.0)
    dt.add_argument("--epsilon", type=float, default=0.25)
    dt.set_defaults(func=cmd_determinize)

    sp = sub.add_parser("sparsify")
    common(sp, demands=False)
    sp.add_argument("--algo", required=True,
                    choices=["general", "scc", "partial"])
    sp.add_argument("--q", type=float, default=lottery.SCC_Q)
    sp.add_argument("--qdist")
    sp.add_argument("--radius", type=float)
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.set_defaults(func=cmd_sparsify)

    ct = sub.add_parser("certify")
    ct.add_argument("--mode", required=True, choices=["partial", "scc"])
    ct.add_argument("--eps-grid", dest="eps_grid", type=_power_of_two,
                    default=2.0**-12)
    ct.add_argument("--L", dest="levels", type=int, default=7)
    ct.add_argument("--M", dest="cap_m", type=int, default=10)
    ct.add_argument("--qdist")
    ct.add_argument("--sweep-p", dest="sweep_p", action="store_true")
    ct.add_argument("--q", type=float, default=lottery.SCC_Q)
    ct.add_argument("--out")
    ct.set_defaults(func=cmd_certify)

    vf = sub.add_parser("verify", help="Monte Carlo verification report")
    vsub = vf.add_subparsers(dest="family", required=True)
    vc = vsub.add_parser("chance")
    common(vc)
    vc.add_argument("--algo", required=True,
                    choices=["faithful", "half-homog", "iterative"])
    vc.add_argument("--samples", type=int, default=10**5)
    vc.add_argument("--dump-lp")
    vc.set_defaults(func=cmd_solve_chance)
    vl = vsub.add_parser("lottery")
    common(vl, demands=False)
    vl.add_argument("--algo", required=True,
                    choices=["general", "scc", "partial"])
    vl.add_argument("--q", type=float, default=lottery.SCC_Q)
    vl.add_argument("--qdist")
    vl.add_argument("--radius", type=float)
    vl.add_argument("--samples", type=int, default=10**5)
    vl.set_defaults(func=cmd_solve_lottery)

    return p


def _power_of_two(text):
    if "^" in text:
        base, exp = text.split("^")
        return float(base) ** float(exp)
    return float(text)


def main(argv=None):
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return 0 if e.code in (0, None) else 3
        return args.func(args)
    except (InputError, OSError, json.JSONDecodeError, KeyError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 3
    except InfeasibleDemand as e:
        print(f"infeasible demand: {e}", file=sys.stderr)
        if e.certificate is not None:
            print(f"certificate: {e.certificate}", file=sys.stderr)
        return 2
    except ResourceError as e:
        print(f"resource error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
