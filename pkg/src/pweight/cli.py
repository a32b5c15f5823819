"""Command-line interface: TSV in, TSV out.

Every subcommand writes a TSV table to --out (stdout by default). Numbers
carry 17 significant digits. Stochastic subcommands require --seed.
Input or contract errors exit with status 2 and a one-line diagnostic.
"""

from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from . import designer, distfn, estimator, optimal, power, procedures, robustness, simulate, tsv
from .errors import ContractError, DomainError
from .hypotheses import WeightVector


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(lo, hi, n):
    if n < 1:
        raise DomainError("grid size must be positive")
    return np.linspace(lo, hi, n)


def _kv(out, pairs):
    tsv.write_table(["quantity", "value"], pairs, out)


def _read_weights(path, battery_ids, renormalize):
    ids, raw = tsv.load_weights(path)
    raw = tsv.align(ids, raw, battery_ids, path=path)
    if renormalize:
        return WeightVector.normalize(raw)
    mean = raw.mean()
    if abs(mean - 1.0) > 1e-9:
        raise ContractError(f"{path}: weights average {mean!r}, not 1 (pass --renormalize to rescale)")
    return WeightVector(raw)


def cmd_test(args):
    battery = tsv.load_battery(args.battery, two_sided=args.two_sided)
    if args.weights:
        w = _read_weights(args.weights, battery.ids, args.renormalize)
    else:
        w = WeightVector.uniform(battery.m)
    rejected = procedures.PROCEDURES[args.procedure](battery, w, args.alpha)
    q = procedures.adjusted_pvalues(battery, w, args.procedure)
    tsv.write_table(["id", "rejected", "q_value"], zip(battery.ids, rejected.mask, q), args.out)
    print(f"rejected\t{len(rejected)}\tof\t{battery.m}", file=sys.stderr)


def cmd_weights_optimal(args):
    ids, config = tsv.load_means(args.means)
    sol = optimal.solve_c(config, args.alpha)
    tsv.save_weights(ids, sol.weights.weights, args.out)
    print(f"c\t{tsv.fmt(sol.c)}\toracle_power\t{tsv.fmt(sol.oracle_power)}", file=sys.stderr)


def cmd_weights_family(args):
    xi = _grid(args.xi_min, args.xi_max, args.n)
    rows = []
    for c in args.c_list:
        w = optimal.rho(xi, c, args.alpha, args.m)
        top = w.max()
        scaled = w / top if top > 0 else w
        rows.extend((c, x, v) for x, v in zip(xi, scaled))
    tsv.write_table(["c", "xi", "weight"], rows, args.out)


def cmd_power_curve(args):
    xi = _grid(args.xi_min, args.xi_max, args.n)
    rows = []
    for w in args.w_list:
        p = power.power(xi, np.full(xi.shape, w), args.alpha, args.m, args.two_sided)
        rows.extend((w, x, v) for x, v in zip(xi, p))
    tsv.write_table(["weight", "xi", "power"], rows, args.out)


def cmd_power_average(args):
    ids, config = tsv.load_means(args.means, two_sided=args.two_sided)
    if args.weights:
        w = _read_weights(args.weights, ids, args.renormalize)
    else:
        w = WeightVector.uniform(config.m)
    _kv(args.out, [("average_power", power.average_power(config, w, args.alpha)), ("m1", config.m1)])


def cmd_two_point(args):
    rows = []
    for eps in args.epsilon_list:
        for B in args.B_list:
            xi = args.xi if args.xi is not None else distfn.upper_quantile(args.alpha / args.m)
            rows.append((eps, B, xi, robustness.robustness_two_point(B, eps, xi, args.alpha, args.m)))
    tsv.write_table(["epsilon", "B", "xi", "R"], rows, args.out)


def cmd_worst_case(args):
    xi = _grid(args.xi_min, args.xi_max, args.n)
    rows = robustness.worst_case_power_curves(args.a, args.gamma, args.alpha, args.m, xi, args.restrict_u)
    tsv.write_table(robustness.CURVE_COLUMNS, rows, args.out)


def cmd_turnaround(args):
    rows = []
    for eps in args.epsilon_list:
        t = robustness.turnaround(eps, args.alpha, args.m, xi=args.xi)
        rows.append((eps, t.xi, t.B0, t.B_star, t.R_at_Bstar, t.finite))
    tsv.write_table(["epsilon", "xi", "B0", "B_star", "R_max", "finite"], rows, args.out)


def cmd_safe_zone(args):
    rows = [(B, robustness.safe_zone_bound(B, args.alpha, args.m)) for B in args.B_list]
    tsv.write_table(["B", "bound"], rows, args.out)


def _design_output(args, result):
    s = result.scheme
    _kv(
        args.out,
        [
            ("epsilon", s.epsilon),
            ("B", s.B),
            ("w1", s.w1),
            ("w0", s.w0),
            ("k", s.k),
            ("m", s.m),
            ("xi", result.xi),
            ("c", result.c_value),
            ("target_power", result.target_power),
            ("min_power", result.min_power),
        ],
    )
    if args.weights_out:
        w = s.expand()
        tsv.save_weights([f"h{j + 1}" for j in range(s.m)], w.weights, args.weights_out)


def cmd_min_power(args):
    _design_output(args, designer.design_min_power(args.epsilon, args.beta, args.alpha, args.m, args.xi))


def cmd_max_count(args):
    _design_output(args, designer.design_max_count(args.beta, args.delta, args.alpha, args.m, args.xi))


def cmd_estimate(args):
    battery = tsv.load_battery(args.battery, two_sided=args.two_sided)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = estimator.weights_from_groups(battery, args.model, args.smooth, args.alpha, args.mom_variant)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    tsv.save_weights(battery.ids, res.per_test.weights, args.out)
    if args.report:
        rows = [
            (e.group_id, e.r_k, e.Y_k, e.S2_k, e.pi_hat, e.xi_hat, raw, sm)
            for e, raw, sm in zip(res.estimates, res.raw, res.smoothed)
        ]
        tsv.write_table(
            ["group_id", "r", "Y", "S2", "pi_hat", "xi_hat", "raw_w", "smoothed_w"], rows, args.report
        )


def _genome_config(args):
    return simulate.GenomeConfig(
        n_chrom=args.n_chrom,
        positions_per_chrom=args.positions,
        n_linkage_signals=args.linkage_signals,
        n_assoc=args.m,
        n_assoc_signals=args.signals,
        signal_mean=args.signal_mean,
        trace_correlation_length=args.corr_length,
        bump_height=args.bump_height,
        bump_half_width=args.bump_half_width,
    )


def cmd_sim_genome(args):
    study = simulate.synth_genome(_genome_config(args), args.seed)
    band = simulate.upweighted_mask(study, args.epsilon)
    w = simulate.trace_to_binary_weights(study, args.epsilon, args.B)
    p = study.p_values
    rows = zip(
        (f"h{j + 1}" for j in range(study.m)),
        study.assoc_chrom + 1,
        study.assoc_pos,
        study.assoc_trace,
        band,
        w.weights,
        study.assoc_stats,
        p,
        study.truth,
    )
    tsv.write_table(["id", "chrom", "pos", "trace", "band", "weight", "stat", "p", "signal"], rows, args.out)
    if args.trace_out:
        n_chrom, n_pos = study.trace.shape
        chrom = np.repeat(np.arange(1, n_chrom + 1), n_pos)
        pos = np.tile(np.arange(n_pos), n_chrom)
        tsv.write_table(
            ["chrom", "pos", "trace", "trace_mean"],
            zip(chrom, pos, study.trace.ravel(), study.trace_mean.ravel()),
            args.trace_out,
        )


def cmd_sim_surface(args):
    B_grid = args.B_list if args.B_list else list(range(1, args.B_max + 1))
    report = simulate.power_surface(
        _genome_config(args),
        epsilon_grid=args.epsilon_list,
        B_grid=B_grid,
        reps=args.reps,
        alpha=args.alpha,
        seed=args.seed,
        procedure=args.procedure,
        workers=args.workers,
    )
    tsv.write_table(simulate.SURFACE_COLUMNS, report.rows(), args.out)


def cmd_sim_fwer(args):
    est = simulate.fwer_mc(
        m=args.m,
        alpha=args.alpha,
        reps=args.reps,
        seed=args.seed,
        scheme=args.scheme,
        procedure=args.procedure,
        lognormal_c=args.lognormal_c,
        workers=args.workers,
    )
    lo, hi = est.ci
    tsv.write_table(
        ["scheme", "procedure", "m", "reps", "fwer", "se", "ci_low", "ci_high", "bound"],
        [(args.scheme, args.procedure, args.m, est.reps, est.estimate, est.se, lo, hi, est.nominal_bound(args.alpha))],
        args.out,
    )


def cmd_discontinuity(args):
    ex = optimal.discontinuity_example(args.m, args.alpha, args.a, args.gamma, args.K, args.c)
    _kv(
        args.out,
        [
            ("A", ex.A),
            ("B", ex.B),
            ("u", ex.u),
            ("xi", ex.xi),
            ("c", ex.c),
            ("c_tilde_solved", ex.c_tilde_solved),
            ("weight_xi_Q", ex.w_on_xi_under_Q),
            ("weight_xi_Qtilde", ex.w_on_xi_under_Qtilde),
            ("weight_u_Qtilde", ex.w_on_u_under_Qtilde),
            ("ratio", ex.ratio),
            ("ks_distance", ex.ks_distance),
        ],
    )


def _common(p, m_default=1000):
    p.add_argument("--alpha", type=float, default=0.05, help="familywise level")
    p.add_argument("--m", type=int, default=m_default, help="number of hypotheses")
    p.add_argument("--out", default=None, help="output TSV path (stdout when omitted)")


def _xi_grid(p, lo=0.0, hi=8.0, n=161):
    p.add_argument("--xi-min", type=float, default=lo, help="smallest mean, in standard-error units")
    p.add_argument("--xi-max", type=float, default=hi, help="largest mean, in standard-error units")
    p.add_argument("--n", type=int, default=n, help="number of grid points")


def _genome_flags(p):
    p.add_argument("--seed", type=int, required=True, help="random seed (required)")
    p.add_argument("--n-chrom", type=int, default=23, help="chromosomes")
    p.add_argument("--positions", type=int, default=2000, help="trace positions per chromosome")
    p.add_argument("--linkage-signals", type=int, default=20, help="planted variants, one per chromosome at most")
    p.add_argument("--signals", type=int, default=20, help="association signals at planted variants")
    p.add_argument("--signal-mean", type=float, default=3.2, help="mean of a signal statistic")
    p.add_argument("--corr-length", type=float, default=25.0, help="trace correlation length, in positions")
    p.add_argument("--bump-height", type=float, default=3.5, help="trace mean at a variant")
    p.add_argument("--bump-half-width", type=float, default=100.0, help="bump half-width, in positions")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="pweight", description=__doc__, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="apply a weighted testing procedure", formatter_class=fmt)
    sub_test = p_test.add_subparsers(dest="procedure", required=True)
    for name in ("bonferroni", "holm", "bh"):
        p = sub_test.add_parser(name, help=f"weighted {name}", formatter_class=fmt)
        p.add_argument("--battery", required=True, help="TSV with columns id, p, [stat], [group]")
        p.add_argument("--weights", default=None, help="TSV with columns id, weight (unit weights when omitted)")
        p.add_argument("--alpha", type=float, default=0.05, help="familywise level (FDR level for bh)")
        p.add_argument("--two-sided", action="store_true", help="statistics are two-sided")
        p.add_argument("--renormalize", action="store_true", help="rescale weights to mean one instead of rejecting them")
        p.add_argument("--out", default=None, help="output TSV path (stdout when omitted)")
        p.set_defaults(func=cmd_test)

    p_w = sub.add_parser("weights", help="optimal weights", formatter_class=fmt)
    sub_w = p_w.add_subparsers(dest="kind", required=True)
    p = sub_w.add_parser("optimal", help="optimal weights for known means", formatter_class=fmt)
    p.add_argument("--means", required=True, help="TSV with columns id, mean")
    p.add_argument("--alpha", type=float, default=0.05, help="familywise level")
    p.add_argument("--out", default=None, help="output TSV path (stdout when omitted)")
    p.set_defaults(func=cmd_weights_optimal)
    p = sub_w.add_parser("family", help="weight curves rho_c(xi), scaled to a maximum of one", formatter_class=fmt)
    p.add_argument("--c-list", type=_floats, default=[1.0, 2.0, 4.0, 8.0], help="comma-separated values of c")
    _common(p)
    _xi_grid(p, 0.01, 10.0, 200)
    p.set_defaults(func=cmd_weights_family)

    p_p = sub.add_parser("power", help="power of weighted tests", formatter_class=fmt)
    sub_p = p_p.add_subparsers(dest="kind", required=True)
    p = sub_p.add_parser("curve", help="power against the mean for fixed weights", formatter_class=fmt)
    p.add_argument("--w-list", type=_floats, default=[0.0, 0.5, 1.0, 2.0, 10.0], help="comma-separated weights")
    p.add_argument("--two-sided", action="store_true", help="two-sided tests")
    _common(p)
    _xi_grid(p)
    p.set_defaults(func=cmd_power_curve)
    p = sub_p.add_parser("average", help="average power over the alternatives of a means file", formatter_class=fmt)
    p.add_argument("--means", required=True, help="TSV with columns id, mean")
    p.add_argument("--weights", default=None, help="TSV with columns id, weight (unit weights when omitted)")
    p.add_argument("--alpha", type=float, default=0.05, help="familywise level")
    p.add_argument("--two-sided", action="store_true", help="two-sided tests")
    p.add_argument("--renormalize", action="store_true", help="rescale weights to mean one")
    p.add_argument("--out", default=None, help="output TSV path (stdout when omitted)")
    p.set_defaults(func=cmd_power_average)

    p_r = sub.add_parser("robustness", help="robustness to misspecified weights", formatter_class=fmt)
    sub_r = p_r.add_subparsers(dest="kind", required=True)
    p = sub_r.add_parser("two-point", help="R(B, eps) for two-valued weights", formatter_class=fmt)
    p.add_argument("--epsilon-list", type=_floats, default=[0.01, 0.05, 0.1, 0.2], help="up-weighted fractions")
    p.add_argument("--B-list", type=_floats, default=[1, 2, 5, 10, 20, 50, 100], help="raw weight ratios")
    p.add_argument("--xi", type=float, default=None, help="alternative mean (default z_{alpha/m})")
    _common(p)
    p.set_defaults(func=cmd_two_point)
    p = sub_r.add_parser("worst-case", help="least favorable misspecification curves", formatter_class=fmt)
    p.add_argument("--a", type=float, default=1e-6, help="alternative fraction")
    p.add_argument("--gamma", type=float, default=0.1, help="fraction of nulls taken for alternatives")
    p.add_argument("--restrict-u", action="store_true", help="restrict the wrong mean to u <= xi")
    _common(p)
    _xi_grid(p, 0.5, 8.0, 151)
    p.set_defaults(func=cmd_worst_case)
    p = sub_r.add_parser("turnaround", help="turnaround B0 and best ratio B*", formatter_class=fmt)
    p.add_argument("--epsilon-list", type=_floats, default=[1e-4, 1e-3, 0.01, 0.05, 0.1], help="up-weighted fractions")
    p.add_argument("--xi", type=float, default=None, help="alternative mean (default z_{alpha/m})")
    _common(p)
    p.set_defaults(func=cmd_turnaround)
    p = sub_r.add_parser("safe-zone", help="mean below which weights are robust even with a zero weight", formatter_class=fmt)
    p.add_argument("--B-list", type=_floats, default=[2, 5, 10, 100], help="largest weight ratios, each >= 2")
    _common(p)
    p.set_defaults(func=cmd_safe_zone)

    p_d = sub.add_parser("design", help="two-valued weight designs", formatter_class=fmt)
    sub_d = p_d.add_subparsers(dest="kind", required=True)
    p = sub_d.add_parser("min-power", help="maximize the minimum power", formatter_class=fmt)
    p.add_argument("--epsilon", type=float, required=True, help="fraction given power 1 - beta")
    p.add_argument("--beta", type=float, required=True, help="type II error for the up-weighted fraction")
    p.add_argument("--xi", type=float, default=None, help="common alternative mean (default z_{alpha/m})")
    p.add_argument("--weights-out", default=None, help="write the expanded weight vector here")
    _common(p)
    p.set_defaults(func=cmd_min_power)
    p = sub_d.add_parser("max-count", help="maximize the count given power 1 - beta", formatter_class=fmt)
    p.add_argument("--beta", type=float, required=True, help="type II error for the up-weighted fraction")
    p.add_argument("--delta", type=float, required=True, help="power floor for every other hypothesis")
    p.add_argument("--xi", type=float, default=None, help="common alternative mean (default z_{alpha/m})")
    p.add_argument("--weights-out", default=None, help="write the expanded weight vector here")
    _common(p)
    p.set_defaults(func=cmd_max_count)

    p = sub.add_parser("estimate", help="grouped data-driven weights", formatter_class=fmt)
    p.add_argument("--battery", required=True, help="TSV with columns id, p, [stat], group")
    p.add_argument("--model", choices=estimator.MODELS, default="normal", help="mixture model for the statistics")
    p.add_argument("--smooth", type=float, default=estimator.DEFAULT_SMOOTH, help="smoothing fraction gamma in [0, 1]")
    p.add_argument("--mom-variant", choices=estimator.VARIANTS, default="classic", help="chi-square estimator constant")
    p.add_argument("--alpha", type=float, default=0.05, help="familywise level")
    p.add_argument("--two-sided", action="store_true", help="statistics are two-sided")
    p.add_argument("--report", default=None, help="write the per-group report TSV here")
    p.add_argument("--out", default=None, help="weight TSV path (stdout when omitted)")
    p.set_defaults(func=cmd_estimate)

    p_s = sub.add_parser("simulate", help="synthetic studies and Monte Carlo", formatter_class=fmt)
    sub_s = p_s.add_subparsers(dest="kind", required=True)
    p = sub_s.add_parser("genome", help="one synthetic study, dumped per association test", formatter_class=fmt)
    _genome_flags(p)
    p.add_argument("--epsilon", type=float, default=0.05, help="up-weighted trace fraction")
    p.add_argument("--B", type=float, default=10.0, help="raw weight ratio")
    p.add_argument("--trace-out", default=None, help="also write the full trace here")
    _common(p, m_default=10_000)
    p.set_defaults(func=cmd_sim_genome)
    p = sub_s.add_parser("surface", help="discoveries over an (epsilon, B) grid", formatter_class=fmt)
    _genome_flags(p)
    p.add_argument("--epsilon-list", type=_floats, default=[0.01, 0.05, 0.1, 0.2], help="up-weighted fractions")
    p.add_argument("--B-max", type=int, default=50, help="B grid is 1..B_max")
    p.add_argument("--B-list", type=_floats, default=None, help="explicit B grid (overrides --B-max)")
    p.add_argument("--reps", type=int, default=100, help="replicates")
    p.add_argument("--procedure", choices=sorted(procedures.PROCEDURES), default="bonferroni", help="procedure")
    p.add_argument("--workers", type=int, default=1, help="threads")
    _common(p, m_default=10_000)
    p.set_defaults(func=cmd_sim_surface)
    p = sub_s.add_parser("fwer", help="familywise error under the global null", formatter_class=fmt)
    p.add_argument("--seed", type=int, required=True, help="random seed (required)")
    p.add_argument("--scheme", choices=simulate.WEIGHT_SCHEMES, default="unit", help="weight scheme")
    p.add_argument("--procedure", choices=sorted(procedures.PROCEDURES), default="bonferroni", help="procedure")
    p.add_argument("--reps", type=int, default=20_000, help="replicates (at least 1000)")
    p.add_argument("--lognormal-c", type=float, default=1.0, help="c in W = exp(c V - c^2/2)")
    p.add_argument("--workers", type=int, default=1, help="threads")
    _common(p)
    p.set_defaults(func=cmd_sim_fwer)

    p_e = sub.add_parser("example", help="worked examples", formatter_class=fmt)
    sub_e = p_e.add_subparsers(dest="kind", required=True)
    p = sub_e.add_parser("discontinuity", help="nearby mean distributions with very different weights", formatter_class=fmt)
    p.add_argument("--a", type=float, default=0.1, help="mass on the large mean")
    p.add_argument("--gamma", type=float, default=0.1, help="mass moved from 0 to the small mean")
    p.add_argument("--K", type=float, default=1000.0, help="weight ratio of the small to the large mean")
    p.add_argument("--c", type=float, default=0.1, help="normalizing constant")
    _common(p)
    p.set_defaults(func=cmd_discontinuity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"pweight: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
