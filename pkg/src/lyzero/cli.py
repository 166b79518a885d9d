"""Command-line entry point.  Every subcommand writes one JSON report (to
stdout or ``--out``); series-shaped output can also go to CSV.

Verdict commands (check-conditions, verify-strip, decomp-bounds) exit 0
whatever the verdict.  Commands that check the library's own invariants
exit 1 when one fails.  Errors exit 2 with a JSON error object on stderr.
"""

import argparse
import csv
import json
import os
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np

from . import __version__
from . import conditions as cond
from .corpus import KINDS, generate_corpus, random_graph
from .model import (CnfFormula, Hypergraph, coloring_to_atomic_csp, extend_projection,
                    load_instance, make_coloring_projection, special_value_projection)

THREADS_ENV = "LYZERO_THREADS"


class CliError(Exception):
    pass


# --- parsing helpers ---------------------------------------------------------

def parse_number(text):
    """'1', '1/2', '0.25' stay exact; anything with j is complex."""
    text = text.strip().replace(" ", "")
    if "j" in text:
        return complex(text)
    try:
        return Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def parse_int_list(text):
    return [int(x) for x in text.split(",") if x]


def _params(pairs):
    out = {}
    for p in pairs or []:
        key, _, value = p.partition("=")
        if not value:
            raise CliError(f"parameter {p!r} is not key=value")
        out[key] = int(value)
    return out


def to_jsonable(x):
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, float):
        return x if np.isfinite(x) else str(x)
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else x.numerator
    if isinstance(x, (complex, mpmath.mpc)):
        return {"re": to_jsonable(x.real), "im": to_jsonable(x.imag)}
    if isinstance(x, mpmath.mpf):
        return mpmath.nstr(x, 20)
    if isinstance(x, np.generic):
        return to_jsonable(x.item())
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset, np.ndarray)):
        return [to_jsonable(v) for v in x]
    return str(x)


def _load(path, q=None):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"instance file {path} does not exist")
    obj, file_q = load_instance(path)
    return obj, q if q is not None else file_q


def _atomic(obj, q):
    if isinstance(obj, Hypergraph):
        if q is None:
            raise CliError("a hypergraph instance needs q (in the file or via --q)")
        return coloring_to_atomic_csp(obj, q)
    if isinstance(obj, CnfFormula):
        return obj.to_atomic_csp()
    return obj


def _coloring(args):
    obj, q = _load(args.instance, args.q)
    if not isinstance(obj, Hypergraph):
        raise CliError("this command needs a hypergraph instance")
    if q is None:
        raise CliError("q missing")
    B = args.B if args.B is not None else max(1, min(q - 1, int(q ** 0.4)))
    proj = extend_projection(make_coloring_projection(q, B), obj.n)
    return obj, q, B, coloring_to_atomic_csp(obj, q), proj


# --- subcommands -------------------------------------------------------------

def cmd_gen(args):
    params = _params(args.param)
    if args.q is not None:
        params["q"] = args.q
    objs = generate_corpus(args.kind, params, args.seed, args.count, args.dir)
    return {"kind": args.kind, "params": params, "count": len(objs), "dir": args.dir,
            "deltas": [o.delta for o in objs]}, True


def cmd_partition(args):
    from .exact import brute_force_partition_poly, factorized_partition_poly
    obj, q = _load(args.instance, args.q)
    csp = _atomic(obj, q)
    special = special_value_projection(csp, args.special_value)
    fn = brute_force_partition_poly if args.method == "brute" else factorized_partition_poly
    poly = fn(csp, special)
    return {"method": args.method, "coefficients": poly.to_json(), "degree": poly.degree}, True


def _poly_for(args):
    from .exact import factorized_partition_poly
    obj, q = _load(args.instance, args.q)
    csp = _atomic(obj, q)
    return factorized_partition_poly(csp, special_value_projection(csp, args.special_value)), obj


def cmd_roots(args):
    from .zerofree import find_roots
    poly, _ = _poly_for(args)
    rs = find_roots(poly, args.precision_bits)
    return {"converged": rs.converged, "residual": rs.residual,
            "roots": [{"value": r.value, "radius": r.radius, "multiplicity": r.multiplicity}
                      for r in rs.roots]}, rs.converged


def cmd_verify_strip(args):
    from .zerofree import verify_strip
    poly, obj = _poly_for(args)
    gamma = args.gamma
    if gamma is None:
        gamma = Fraction(1, 16 * max(obj.delta, 1) ** 2 * max(obj.k, 1) ** 5)
    return verify_strip(poly, gamma, args.precision_bits).to_json(), True


def cmd_self_reduce(args):
    from .zerofree import ZeroFreenessError, self_reduction_chain
    obj, q = _load(args.instance, args.q)
    csp = _atomic(obj, q)
    special = special_value_projection(csp, args.special_value)
    try:
        ch = self_reduction_chain(csp, special, args.lam)
    except ZeroFreenessError as exc:
        return {"zero_at": exc.index, "ratios": exc.chain}, True
    return {"base": ch.base, "ratios": ch.ratios, "violation_probabilities": ch.violated,
            "flagged": ch.flagged, "max_discrepancy": ch.max_discrepancy,
            "telescoped": ch.telescoped(), "total": ch.total}, True


def _cond_params(args):
    if args.cnf:
        if args.alpha is None or args.beta is None:
            raise CliError("--cnf needs --alpha and --beta")
        return cond.cnf_params_from_fractions(args.k, args.delta, args.alpha, args.beta, args.lambda_c)
    if args.q is None:
        return cond.derive_coloring_params(args.k, args.delta, args.lambda_c)
    return cond.coloring_params(args.k, args.delta, args.q, args.B, args.lambda_c)


def cmd_check_conditions(args):
    p = _cond_params(args)
    if isinstance(p, cond.CnfParams):
        rep = cond.check_cnf_condition(p, args.lam)
    else:
        rep = cond.check_coloring_condition(p, args.lam)
    out = rep.to_json()
    out["parameters"] = {k: getattr(p, k) for k in ("k", "delta", "q", "B", "s", "k_mk", "k_umk")
                         if hasattr(p, k)}
    return out, True


def cmd_decomp_bounds(args):
    p = _cond_params(args)
    try:
        b = cond.closed_form_bounds(p)
    except cond.ConditionError as exc:
        return {"pass": False, "reason": str(exc)}, True
    return {"pass": b.product_ok is True, "n_hat": b.n_hat, "m_hat": b.m_hat,
            "log_product": b.log_product, "log_quarter": mpmath.log(mpmath.mpf(1) / 4)}, True


def cmd_glauber(args):
    from .dynamics import GlauberChain, point_mass, propagate
    from .exact import projected_measure
    _, _, _, csp, proj = _coloring(args)
    psi = projected_measure(csp, proj, args.lam)
    chain = GlauberChain(psi)
    st = max(chain.stationarity_residuals())
    start = np.unravel_index(int(np.argmax(np.abs(psi.values))), psi.dims)
    mu, hist = propagate(point_mass(psi.dims, start), psi, args.sweeps, chain, history=True)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep", "l1_distance"])
            w.writerows((i + 1, repr(float(d))) for i, d in enumerate(hist))
    final = float(np.abs(mu.values - psi.values).sum())
    ok = st <= 1e-10 and final <= 1e-6
    return {"stationarity": st, "final_distance": final, "sweeps": args.sweeps, "pass": ok}, ok


def cmd_lifting(args):
    from .dynamics import verify_conditional_interval
    _, _, _, csp, proj = _coloring(args)
    rest = csp.subset(range(len(csp.constraints) - 1))
    r = verify_conditional_interval(rest, proj, args.lam, csp.constraints[-1])
    out = {k: getattr(r, k) for k in ("groups", "max_imag", "min_real", "max_real",
                                      "zero_measure_violations", "triangle_lhs", "triangle_rhs")}
    out["pass"] = r.ok
    return out, r.ok


def cmd_witness(args):
    from .dynamics import (GlauberChain, ScanSchedule, bad_cluster, bad_component,
                           reconstruct_bad_cluster, sample_trace, witness_graph_local)
    from .exact import projected_measure
    h, q, B, csp, proj = _coloring(args)
    rest = csp.subset(range(len(csp.constraints) - 1))
    c_star = csp.constraints[-1]
    schedule = ScanSchedule(h.n)
    graph = witness_graph_local(rest, c_star, schedule, args.window * h.n)
    p = cond.coloring_params(h.k, h.delta, q, B)
    psi = projected_measure(rest, proj, Fraction(1))
    chain = GlauberChain(psi)
    scheme = cond.build_coloring_decomposition(p, Fraction(1), h.n)
    rng = np.random.Generator(np.random.Philox(args.seed))
    support = [np.unravel_index(i, psi.dims) for i in psi.support()]
    agree = nonempty = 0
    for _ in range(args.traces):
        tr = sample_trace(chain, scheme, support[rng.integers(len(support))], args.window * h.n, rng)
        comp = bad_component(tr.record, rest, c_star, proj, schedule)
        rebuilt = reconstruct_bad_cluster(comp, tr.updates, rest, c_star, proj, schedule)
        direct = bad_cluster(tr.final, rest, proj, c_star)
        agree += rebuilt == direct
        nonempty += not direct.empty
    ok = agree == args.traces
    return {"nodes": len(graph.nodes), "max_degree": graph.max_degree(),
            "degree_bound": graph.degree_bound(), "traces": args.traces, "agree": agree,
            "nonempty_clusters": nonempty, "pass": ok}, ok


def cmd_two_trees(args):
    from .dynamics import construct_2tree, count_2trees, is_2tree, two_tree_count_bound
    rows, ok = [], True
    for i in range(args.graphs):
        adj = random_graph(args.n, args.max_degree, seed=args.seed + i)
        D = max(len(a) for a in adj)
        counts = {j: count_2trees(adj, 0, j) for j in range(2, args.size + 1)}
        bounds = {j: two_tree_count_bound(D, j) for j in counts}
        tree = construct_2tree(adj, range(args.n), 0)
        good = (all(counts[j] <= bounds[j] for j in counts) and is_2tree(adj, tree)
                and len(tree) >= args.n // (D + 1))
        ok &= good
        rows.append({"seed": args.seed + i, "max_degree": D, "counts": counts,
                     "bounds": bounds, "greedy_size": len(tree), "pass": good})
    return {"graphs": rows, "pass": ok}, ok


def cmd_fisher(args):
    from .exact import BudgetError
    from .interpolate import (binomial_transform, cluster_series, fisher_partition_poly,
                              truncated_log_count, verify_reduction_identity)
    obj, q = _load(args.instance, args.q)
    csp = _atomic(obj, q)
    coloring = isinstance(obj, Hypergraph)
    series = cluster_series(csp, args.order, hypergraph=obj if coloring else None, q=q)
    out = {"order": args.order, "series": series.coeffs}
    try:
        f = fisher_partition_poly(csp)
    except BudgetError:
        f = None
    est = truncated_log_count(series, args.order, f.coeffs[0] if f else None)
    out["estimates"] = est.estimates
    ok = True
    if f is not None:
        out["fisher"] = f.to_json()
        out["exact_log_count"] = est.exact
        out["errors"] = est.errors
        same = binomial_transform(f, args.order) == series.coeffs
        out["binomial_transform_identity"] = same
        rng = np.random.Generator(np.random.Philox(args.seed))
        betas = [complex(*rng.uniform(-1.5, 1.5, 2)) for _ in range(args.samples)]
        try:
            rep = verify_reduction_identity(csp, betas)
            out["reduction_identity"] = {"exact": rep.polynomial_identity,
                                         "max_discrepancy": rep.max_discrepancy, "pass": rep.ok}
            ok = same and rep.ok
        except BudgetError as exc:
            out["reduction_identity"] = {"skipped": str(exc)}
            ok = same
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["order", "a_j", "estimate", "error"])
            errs = est.errors or [None] * len(est.estimates)
            for j, (a, e, err) in enumerate(zip(series.coeffs, est.estimates, errs)):
                w.writerow([j, a, mpmath.nstr(e, 20), "" if err is None else mpmath.nstr(err, 6)])
    out["pass"] = ok
    return out, ok


def _law_rows(args, report_fn):
    from .stats import disjoint_edge_law
    rows = []
    for m in args.m:
        dist = disjoint_edge_law(args.k, args.q, m, args.lam)
        r = report_fn(dist, args.k * m)
        rows.append(r.row() + (r.scaled,))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "statistic", "envelope", "scaled"])
            w.writerows((n, s, repr(e), mpmath.nstr(c, 17)) for n, s, e, c in rows)
    return {"k": args.k, "q": args.q, "m": args.m,
            "rows": [{"n": n, "statistic": s, "envelope": e, "scaled": c} for n, s, e, c in rows]}, True


def cmd_clt(args):
    from .stats import clt_report
    return _law_rows(args, clt_report)


def cmd_lclt(args):
    from .stats import lclt_report
    return _law_rows(args, lclt_report)


def cmd_chebyshev(args):
    from .stats import chebyshev_verify
    reps = [chebyshev_verify(args.k, args.q, m, args.lam) for m in args.m]
    ok = all(r.condition_passed and r.passed for r in reps)
    return {"reports": [{"m": r.m, "n": r.n, "condition": r.condition_passed, "mean": r.mean,
                         "mean_lower": r.mean_lower, "variance": r.variance,
                         "variance_bound": r.variance_bound, "tails": r.tails, "bounds": r.bounds,
                         "vacuous": r.vacuous, "pass": r.passed} for r in reps], "pass": ok}, True


def cmd_influence(args):
    from .stats import influence_bound, total_influence_exact
    obj, q = _load(args.instance, args.q)
    csp = _atomic(obj, q)
    special = special_value_projection(csp, args.special_value)
    total = total_influence_exact(csp, special, args.lam, args.var, args.value)
    bound = influence_bound(csp.domains[0], 1, args.lam, csp.delta, csp.k)
    premise = cond.check_clt_condition(csp.k, csp.delta, csp.domains[0], 1, args.lam)
    return {"total_influence": total, "bound": bound, "condition": premise.passed,
            "within_bound": total <= bound}, True


def cmd_mark_cnf(args):
    from .stats import MarkingError, moser_tardos_marking, verify_marking
    obj, _ = _load(args.instance)
    if not isinstance(obj, CnfFormula):
        raise CliError("mark-cnf needs a CNF instance")
    p = cond.cnf_params_from_fractions(obj.k, obj.delta, args.alpha, args.beta)
    runs, ok = [], True
    for seed in range(args.seed, args.seed + args.runs):
        try:
            r = moser_tardos_marking(obj, p, seed=seed)
            good = verify_marking(obj, r.marked, p)
            runs.append({"seed": seed, "marked": len(r.marked), "steps": r.steps,
                         "attempts": r.attempts, "verified": good})
        except MarkingError as exc:
            good = False
            runs.append({"seed": seed, "error": str(exc), **exc.stats})
        ok &= good
    return {"k_mk": p.k_mk, "k_umk": p.k_umk, "runs": runs, "pass": ok}, ok


def cmd_acceptance(args):
    from .acceptance import run_all
    echo = (lambda line: print(line, file=sys.stderr)) if args.verbose else None
    results = run_all(args.only, echo=echo)
    ok = all(r.passed for r in results)
    return {"criteria": [r.to_json() for r in results], "pass": ok}, ok


# --- parser ------------------------------------------------------------------

def _instance_opts(p, coloring=False):
    p.add_argument("--instance", required=True, help="instance JSON file")
    p.add_argument("--q", type=int, help="number of colours (overrides the file)")
    if coloring:
        p.add_argument("--B", type=int, help="number of non-special buckets")
    else:
        p.add_argument("--special-value", type=int, default=0)


def build_parser():
    ap = argparse.ArgumentParser(prog="lyzero", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision-bits", type=int, default=256)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(fn=fn)
        return p

    p = add("gen", cmd_gen, "generate a deterministic instance corpus")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--param", action="append", help="key=value, e.g. k=3")
    p.add_argument("--q", type=int)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--dir", required=True)

    p = add("partition", cmd_partition, "exact partition polynomial")
    _instance_opts(p)
    p.add_argument("--method", choices=("factorized", "brute"), default="factorized")

    p = add("roots", cmd_roots, "certified root enclosures")
    _instance_opts(p)

    p = add("verify-strip", cmd_verify_strip, "distance of all roots from [0, 1]")
    _instance_opts(p)
    p.add_argument("--gamma", type=parse_number)

    p = add("self-reduce", cmd_self_reduce, "telescoping ratios Z_i / Z_(i-1)")
    _instance_opts(p)
    p.add_argument("--lam", type=parse_number, default=Fraction(1))

    for name, fn, help in (("check-conditions", cmd_check_conditions, "evaluate the zero-freeness condition"),
                           ("decomp-bounds", cmd_decomp_bounds, "closed-form N-hat/M-hat and the product test")):
        p = add(name, fn, help)
        p.add_argument("--k", type=int, required=True)
        p.add_argument("--delta", type=int, required=True)
        p.add_argument("--q", type=int, help="omit to derive q from (k, delta)")
        p.add_argument("--B", type=int)
        p.add_argument("--lam", type=parse_number)
        p.add_argument("--lambda-c", type=parse_number, default=Fraction(1))
        p.add_argument("--cnf", action="store_true")
        p.add_argument("--alpha", type=parse_number)
        p.add_argument("--beta", type=parse_number)

    p = add("glauber", cmd_glauber, "exact propagation of the complex Glauber chain")
    _instance_opts(p, coloring=True)
    p.add_argument("--lam", type=parse_number, default=Fraction(1))
    p.add_argument("--sweeps", type=int, default=100)
    p.add_argument("--csv")

    p = add("lifting", cmd_lifting, "conditional-measure check for the last constraint")
    _instance_opts(p, coloring=True)
    p.add_argument("--lam", type=parse_number, default=Fraction(1))

    p = add("witness", cmd_witness, "witness graph and bad-cluster reconstruction")
    _instance_opts(p, coloring=True)
    p.add_argument("--traces", type=int, default=100)
    p.add_argument("--window", type=int, default=2, help="window length in sweeps")

    p = add("two-trees", cmd_two_trees, "2-tree counts against the counting bound")
    p.add_argument("--graphs", type=int, default=10)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--max-degree", type=int, default=3)
    p.add_argument("--size", type=int, default=5)

    p = add("fisher", cmd_fisher, "cluster series and truncated log-count")
    _instance_opts(p)
    p.add_argument("--order", type=int, default=6)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--csv")

    for name, fn in (("clt", cmd_clt), ("lclt", cmd_lclt)):
        p = add(name, fn, f"{name.upper()} statistic on disjoint-edge families")
        p.add_argument("--k", type=int, default=3)
        p.add_argument("--q", type=int, default=3)
        p.add_argument("--m", type=parse_int_list, default=[16, 64, 256, 1024])
        p.add_argument("--lam", type=parse_number, default=Fraction(1))
        p.add_argument("--csv")

    p = add("chebyshev", cmd_chebyshev, "tail, variance and mean bounds on disjoint edges")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--q", type=int, default=1000)
    p.add_argument("--m", type=parse_int_list, default=[10, 100])
    p.add_argument("--lam", type=parse_number, default=Fraction(1))

    p = add("influence", cmd_influence, "exact total influence of a pinned variable")
    _instance_opts(p)
    p.add_argument("--lam", type=parse_number, default=Fraction(1))
    p.add_argument("--var", type=int, default=0)
    p.add_argument("--value", type=int, default=0)

    p = add("mark-cnf", cmd_mark_cnf, "randomised marking of a CNF formula")
    p.add_argument("--instance", required=True)
    p.add_argument("--alpha", type=parse_number, default=Fraction("0.171562"))
    p.add_argument("--beta", type=parse_number, default=Fraction("0.257342"))
    p.add_argument("--runs", type=int, default=1)

    p = add("acceptance", cmd_acceptance, "run the acceptance experiments")
    p.add_argument("--only", type=parse_int_list)
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _meta(args, seconds):
    return {"command": args.command, "version": __version__,
            "python": platform.python_version(), "numpy": np.__version__,
            "mpmath": mpmath.__version__, "seed": args.seed,
            "precision_bits": args.precision_bits,
            "threads": os.environ.get(THREADS_ENV, "1"), "wall_time": round(seconds, 3)}


def main(argv=None):
    args = build_parser().parse_args(argv)
    t = time.perf_counter()
    try:
        with mpmath.workprec(args.precision_bits):
            result, ok = args.fn(args)
    except (CliError, FileNotFoundError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    report = {"meta": _meta(args, time.perf_counter() - t), "result": to_jsonable(result)}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
