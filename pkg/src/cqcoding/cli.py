"""Command-line drivers. Every command writes a CSV table (stdout or ``--out``)
and a short run summary on stderr.

Exit codes: 0 success, 1 a checked inequality failed, 2 bad input, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from typing import Sequence

import numpy as np

from .avcq import (
    DiscreteRandomCode,
    composite_check,
    compose_cr_code,
    is_m_symmetrizable,
    reduce_random_code,
    robustification_check,
    robustify,
    symmetrizable_attack,
    type_channels,
    type_success,
    worst_case_eval,
)
from .channel_file import FIXTURES, ChannelFileError, fixture_path, load_channel_file
from .channels import InputDistribution
from .coding import Code, all_words_code, compound_code, first_letter_code
from .compound import CompoundSet, compound_capacity, minimax_check
from .hypotest import BoundViolation, BudgetExceeded, build_test_states
from .zero_error import (
    choi_distance,
    damping_channel,
    identity_channel,
    is_extremal_cq,
    is_extremal_kraus,
    kraus_product_span_dim,
    q0_obstruction,
    zero_error_size,
)

EXIT_OK, EXIT_ASSERT, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "0" if v == 0 else f"{v:.12g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(fmt(x) for x in v)
    return str(v)


class Table:
    def __init__(self, header: Sequence[str]):
        self.header = list(header)
        self.rows: list[list[str]] = []
        self.failures: list[str] = []

    def add(self, *values):
        if len(values) != len(self.header):
            raise AssertionError("row width differs from header")
        self.rows.append([fmt(v) for v in values])

    def check(self, ok: bool, what: str):
        if not ok:
            self.failures.append(what)

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def rate_param(text: str):
    """``0.1`` is absolute; ``0.25a`` is a fraction of the exponent ``a``."""
    try:
        if text.endswith("a"):
            return ("frac", float(text[:-1] or 1.0))
        return ("abs", float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or a fraction of a such as 0.25a, got {text!r}") from None


def resolve(param, a: float) -> float:
    kind, v = param
    return v * a if kind == "frac" else v


def epsilon_schedule(text: str):
    if text == "2^-l":
        return None
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("epsilon schedule is 2^-l or a constant in (0, 1)") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("epsilon must lie in (0, 1)")
    return v


# --- commands --------------------------------------------------------------------------------------


def cmd_capacity(args) -> Table:
    cf = load_channel_file(args.file)
    if not cf.channels:
        raise ChannelFileError("channels", "capacity needs cq-channels")
    if args.mode == "compound":
        res = compound_capacity(cf.channels, tol=args.tol, seed=args.seed)
        t = Table(["mode", "n_channels", "value", "upper_bound", "certified_gap", "converged", "worst_channel", "argmax_p"])
        t.add("compound", len(cf.channels), res.value, res.upper_bound, res.achieved_tol, res.converged,
              cf.states[res.worst_t], res.argmax_p.probs)
        t.check(res.value <= res.upper_bound + 1e-12, "value <= LP upper bound")
        return t
    res = minimax_check(cf.channels, grid=args.grid, tol=args.tol, seed=args.seed)
    t = Table(["mode", "grid", "n_hull_points", "max_min", "min_max", "gap", "discretization_bound", "argmin_weights", "argmax_p"])
    t.add("convex-hull", args.grid, len(res.weights), res.lhs, res.rhs, res.gap, res.discretization_bound,
          res.weights[res.rhs_index], res.lhs_result.argmax_p.probs)
    # max-min never exceeds min-max; slack for the optimizer tolerance
    t.check(res.lhs <= res.rhs + 2 * args.tol, "max_p min_q chi <= min_q max_p chi")
    return t


def cmd_code(args) -> Table:
    cf = load_channel_file(args.file)
    cset = CompoundSet(cf.channels)
    p = InputDistribution.uniform(cset.alphabet)
    t = Table(["l", "M", "rate", "a", "eta", "gamma", "epsilon", "alpha_error", "beta", "beta_bound",
               "worst_avg", "worst_max", "bound", "bound_holds"])
    for l in args.l:
        states = build_test_states(cset, p, l)
        eta, gamma = resolve(args.delta, states.a), resolve(args.gamma, states.a)
        r = compound_code(cset, p, l, eta, gamma, epsilon=args.epsilon, seed=args.seed, states=states)
        holds = r.evaluation.worst_avg <= r.error_bound + 1e-9
        t.add(l, r.code.size, r.rate, states.a, eta, gamma, r.test.epsilon_used, r.test.alpha_error, r.test.beta,
              r.test.beta_exponent_bound, r.evaluation.worst_avg, r.evaluation.worst_max, r.error_bound, holds)
        t.check(holds, f"l={l}: worst_avg <= |T|(2 lambda + 4 2^(-l gamma))")
    return t


def _pipeline_code(avcq, l: int, args, seed: int) -> tuple[Code, float]:
    """Compound-pipeline code for the type channels of length ``l``, with its worst type error."""
    cset = CompoundSet(tuple(type_channels(avcq, l)))
    p = InputDistribution.uniform(cset.alphabet)
    states = build_test_states(cset, p, l)
    eta, gamma = resolve(args.delta, states.a), resolve(args.gamma, states.a)
    code = compound_code(cset, p, l, eta, gamma, seed=seed, states=states).code
    success, _ = type_success(code, avcq)
    return code, 1.0 - success


def cmd_symmetrize(args) -> Table:
    avcq = load_channel_file(args.file).avcq
    cert = is_m_symmetrizable(avcq, feasibility_tol=args.tol)
    t = Table(["x", "y", "distance", "p", "q", "pair_symmetrizable", "symmetrizable", "attack_success"])
    attack = ""
    if cert.symmetrizable and avcq.n_inputs >= 2 and avcq.dim >= 2:
        # one-letter code on the first two inputs, decoded in the computational basis
        attack = symmetrizable_attack(avcq, cert, first_letter_code(2, 1, avcq.dim))
        t.check(attack <= 0.5 + 1e-9, "attacked worse-message success <= 1/2")
    for (x, y), w in sorted(cert.witnesses.items()):
        t.add(avcq.alphabet[x], avcq.alphabet[y], w.distance, w.p, w.q, w.distance <= args.tol,
              cert.symmetrizable, attack)
    return t


def cmd_robustify(args) -> Table:
    avcq = load_channel_file(args.file).avcq
    t = Table(["l", "seed", "M", "atoms", "type_error", "worst_success", "bound", "route_discrepancy", "holds"])
    for l in args.l:
        for k in range(args.codes):
            seed = args.seed + k
            code, gamma = _pipeline_code(avcq, l, args, seed)
            rc = robustify(code, avcq, gamma, exact=False)
            chk = robustification_check(code, rc, avcq, gamma)
            ok = chk.holds and chk.route_discrepancy <= 1e-9
            t.add(l, seed, code.size, len(rc.atoms), gamma, chk.worst_success, chk.bound, chk.route_discrepancy, ok)
            t.check(ok, f"l={l} seed={seed}: (1/l!) sum f(sigma s) >= 1 - (l+1)^|S| gamma")
    return t


def _robust_random_code(avcq, l: int, args) -> DiscreteRandomCode:
    code, gamma = _pipeline_code(avcq, l, args, args.seed)
    return robustify(code, avcq, gamma)


def cmd_reduce(args) -> Table:
    avcq = load_channel_file(args.file).avcq
    t = Table(["l", "K", "m", "rc_worst_success", "reduced_worst_success", "target", "met", "rounds", "hypotheses_met"])
    for l in args.l:
        rc = _robust_random_code(avcq, l, args)
        rc_worst = _worst(rc, avcq, args)
        res = reduce_random_code(rc, avcq, args.K, seed=args.seed, m=args.m, retries=args.retries)
        t.add(l, args.K, args.m, rc_worst, res.worst_success, res.target, res.met, res.rounds, res.hypotheses_met)
        t.check(res.met, f"l={l}: reduced family reaches 1 - l^-m")
    return t


def cmd_compose(args) -> Table:
    avcq = load_channel_file(args.file).avcq
    t = Table(["l", "m", "K", "bank_size", "messages", "prefix_error", "bank_error", "composite_success", "bound", "holds"])
    for l in args.l:
        prefix = all_words_code(avcq.n_inputs, l, avcq.dim)
        rc = robustify(first_letter_code(avcq.n_inputs, args.m, avcq.dim), avcq)
        bank = reduce_random_code(rc, avcq, prefix.size, seed=args.seed, m=1, retries=args.retries).codes
        chk = composite_check(prefix, bank, avcq)
        composite = compose_cr_code(prefix, bank)
        t.add(l, args.m, prefix.size, len(bank), composite.size, chk.prefix_error, chk.bank_error,
              chk.composite_success, chk.bound, chk.holds)
        t.check(chk.holds, f"l={l} m={args.m}: composite success >= 1 - 2 max(eps_prefix, eps_bank)")
    return t


def _worst(code, avcq, args) -> float:
    return worst_case_eval(code, avcq, sampled=args.sampled, seed=args.seed).min_success


def cmd_zero_error(args) -> Table:
    cf = load_channel_file(args.file)
    if cf.kraus is not None:
        ch = cf.kraus
        if args.x is not None:
            if cf.damping_x is None:
                raise ChannelFileError("damping_x", "--x needs a file from the damping family")
            ch = damping_channel(args.x)
        x = args.x if args.x is not None else cf.damping_x
        t = Table(["l", "x", "span_dim", "full_dim", "obstruction", "extremal", "choi_distance_to_identity"])
        extremal = is_extremal_kraus(ch)
        dist = choi_distance(ch, identity_channel(ch.d_in)) if ch.d_in == ch.d_out else ""
        for l in range(1, args.l_max + 1):
            t.add(l, "" if x is None else x, kraus_product_span_dim(ch, l), (ch.d_in**l) ** 2,
                  q0_obstruction(ch, l), extremal, dist)
        return t
    w = cf.channels[0]
    t = Table(["l", "zero_error_size", "extremal", "m_symmetrizable", "min_distance"])
    extremal = is_extremal_cq(w)
    cert = is_m_symmetrizable(cf.avcq, feasibility_tol=args.tol)
    mind = min((v.distance for v in cert.witnesses.values()), default=0.0)
    prev = {}
    for l in range(1, args.l_max + 1):
        size = zero_error_size(w, l)
        for l1, s1 in prev.items():
            if l - l1 in prev:
                t.check(size >= s1 * prev[l - l1], f"size({l}) >= size({l1}) size({l - l1})")
        prev[l] = size
        t.add(l, size, extremal, cert.symmetrizable, mind)
    return t


def cmd_fixture(args) -> Table:
    t = Table(["name", "path"])
    names = FIXTURES if args.name is None else [args.name]
    for n in names:
        t.add(n, fixture_path(n))
    return t


# --- parser ----------------------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    """``3``, ``2,3,5`` or ``2-5``."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part:
                lo, hi = part.split("-")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 3, 2,4 or 2-5, got {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("blocklengths must be positive")
    return out


def build_parser() -> argparse.ArgumentParser:
    fmt_cls = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="cqcoding", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random stream")
    common.add_argument("--out", help="write the CSV here instead of stdout")

    cap = sub.add_parser("capacity", parents=[common], formatter_class=fmt_cls, help="compound or convex-hull capacity")
    cap.add_argument("file")
    cap.add_argument("--mode", choices=["compound", "convex-hull"], default="compound")
    cap.add_argument("--tol", type=float, default=1e-4, help="certified optimality gap")
    cap.add_argument("--grid", type=int, default=64, help="hull weight resolution (convex-hull mode)")
    cap.set_defaults(run=cmd_capacity)

    rate = argparse.ArgumentParser(add_help=False)
    rate.add_argument("--l", type=_int_list, default=[1, 2, 3], help="blocklengths: 3, 2,4 or 2-5")
    rate.add_argument("--delta", type=rate_param, default=rate_param("0.25a"), help="test slack eta; suffix a for a fraction of a")
    rate.add_argument("--gamma", type=rate_param, default=rate_param("0.25a"), help="rate backoff; suffix a for a fraction of a")

    code = sub.add_parser("code", parents=[common, rate], formatter_class=fmt_cls, help="compound code pipeline per blocklength")
    code.add_argument("file")
    code.add_argument("--epsilon", type=epsilon_schedule, default=None, metavar="SCHEDULE",
                      help="regularization: 2^-l (default) or a constant")
    code.set_defaults(run=cmd_code)

    av = sub.add_parser("avcq", help="arbitrarily varying channel tools")
    avsub = av.add_subparsers(dest="avcq_command", required=True)
    mode = argparse.ArgumentParser(add_help=False)
    g = mode.add_mutually_exclusive_group()
    g.add_argument("--exhaustive", dest="sampled", action="store_false", help="enumerate every state sequence")
    g.add_argument("--sampled", dest="sampled", action="store_true", help="sample state sequences")
    mode.set_defaults(sampled=False)

    sym = avsub.add_parser("symmetrize", parents=[common], formatter_class=fmt_cls, help="m-symmetrizability certificate")
    sym.add_argument("file")
    sym.add_argument("--tol", type=float, default=1e-7, help="feasibility tolerance on the Frobenius distance")
    sym.set_defaults(run=cmd_symmetrize)

    rob = avsub.add_parser("robustify", parents=[common, rate, mode], formatter_class=fmt_cls, help="robustification inequality")
    rob.add_argument("file")
    rob.add_argument("--codes", type=int, default=1, help="pipeline codes per blocklength (seeds seed, seed+1, ...)")
    rob.set_defaults(run=cmd_robustify)

    red = avsub.add_parser("reduce", parents=[common, rate, mode], formatter_class=fmt_cls, help="random-code reduction")
    red.add_argument("file")
    red.add_argument("--K", type=int, default=9, help="number of sampled deterministic codes")
    red.add_argument("--m", type=int, default=1, help="target success 1 - l^-m")
    red.add_argument("--retries", type=int, default=20)
    red.set_defaults(run=cmd_reduce)

    comp = avsub.add_parser("compose", parents=[common, mode], formatter_class=fmt_cls, help="prefix + code bank composite")
    comp.add_argument("file")
    comp.add_argument("--l", type=_int_list, default=[2], help="prefix blocklengths")
    comp.add_argument("--m", type=int, default=2, help="bank blocklength")
    comp.add_argument("--retries", type=int, default=20)
    comp.set_defaults(run=cmd_compose)

    ze = sub.add_parser("zero-error", parents=[common], formatter_class=fmt_cls, help="zero-error sizes and extremality")
    ze.add_argument("file")
    ze.add_argument("--l-max", type=int, default=3)
    ze.add_argument("--tol", type=float, default=1e-7, help="symmetrizability tolerance")
    ze.add_argument("--x", type=float, default=None, help="damping parameter override for damping-family files")
    ze.set_defaults(run=cmd_zero_error)

    fx = sub.add_parser("fixture", parents=[common], formatter_class=fmt_cls, help="paths of the bundled channel files")
    fx.add_argument("name", nargs="?", choices=FIXTURES)
    fx.set_defaults(run=cmd_fixture)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        table = args.run(args)
    except ChannelFileError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except BoundViolation as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    body = table.render()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)
    name = args.command + (f" {args.avcq_command}" if args.command == "avcq" else "")
    print(f"{name}: {len(table.rows)} rows, seed {args.seed}", file=sys.stderr)
    for f in table.failures:
        print(f"check failed: {f}", file=sys.stderr)
    return EXIT_ASSERT if table.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
