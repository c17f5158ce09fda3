import argparse
import os
import sys
from os.path import exists

import numpy as np
import pandas as pd

sys.path.append("../..")
from spintypicality.cli import run
from spintypicality.config import preset, validate
from spintypicality.core import total_magnetization, up_probability
from spintypicality.experiments import (
    TimeGrid,
    averaged_trace,
    chebyshev_bound,
    cross_term_residual,
    decay_time,
    ensemble_trace,
    find_echo,
    loglog_slope,
    max_abs_deviation,
    pure_state_trace,
    rms_deviation,
    smooth,
)
from spintypicality.hamiltonian import AnisotropyKind, build_chain, build_ladder, build_star, local_second_moment
from spintypicality.output import emit_csv
from spintypicality.propagators import ExactPropagator, TrotterPropagator
from spintypicality.states import InitialStateSpec, StateKind, make_entangled

CRITERIA = [
    "analytic",
    "ising",
    "equivalence",
    "scaling",
    "effective",
    "phases",
    "contrast",
    "echo",
    "star",
    "trotter",
    "conservation",
    "chebyshev",
    "determinism",
]

parser = argparse.ArgumentParser(
    description="Long acceptance runs for spintypicality (10 to 14 spins).",
    epilog="Example usage: python acceptance.py echo star --threads 8",
)
parser.add_argument(
    "criteria",
    type=str,
    nargs="*",
    default=["all"],
    help="Optional argument: criteria to run. Available criteria are: " + ", ".join(CRITERIA) + ". Defaults to all.",
    choices=CRITERIA + ["all"],
)
parser.add_argument(
    "--threads",
    type=int,
    default=1,
    help="Optional argument: worker processes for the realization loops. Defaults to 1.",
)
parser.add_argument(
    "--seeds",
    type=int,
    default=20,
    help="Optional argument: seeds averaged by the statistical criteria. Defaults to 20.",
)
parser.add_argument(
    "--full",
    action=argparse.BooleanOptionalAction,
    help="Optional argument: also run the 14-spin fig3a preset (tens of minutes) and use it for the determinism check.",
)


def _row(criterion, quantity, value, low, high):
    passed = (low is None or value >= low) and (high is None or value <= high)
    return {"criterion": criterion, "quantity": quantity, "value": value, "low": low, "high": high, "passed": passed}


def _ladder_grid(t_max=60.0, n_samples=600):
    return TimeGrid(t_max, n_samples)


def _entangled(net, seed, grid, prop):
    return pure_state_trace(net, InitialStateSpec(StateKind.ENTANGLED, 0, seed), 0, grid, prop)


def analytic(args):
    net = build_chain(2, 1.0)
    grid = TimeGrid(20.0, 100)
    trace = ensemble_trace(net, 0, 0, grid, ExactPropagator(net))
    error = float(np.max(np.abs(trace.values - np.cos(grid.times / 2) ** 2)))
    return [_row("analytic", "max_abs_error", error, None, 1e-10)]


def ising(args):
    net = build_chain(8, 1.0, AnisotropyKind.ISING)
    grid = TimeGrid(20.0, 50)
    exact = ensemble_trace(net, 0, 0, grid, ExactPropagator(net))
    trotter = ensemble_trace(net, 0, 0, grid, TrotterPropagator(net, 0.02), n_jobs=args.threads)
    return [
        _row("ising", "exact_max_abs_error", float(np.max(np.abs(exact.values - 1.0))), None, 1e-10),
        _row("ising", "trotter_max_abs_error", float(np.max(np.abs(trotter.values - 1.0))), None, 1e-8),
    ]


def equivalence(args):
    net = build_ladder(10, 1.0, 0.1)
    grid = _ladder_grid()
    prop = ExactPropagator(net)
    ens = ensemble_trace(net, 0, 0, grid, prop)
    max_abs, rms = [], []
    for seed in range(args.seeds):
        pure = _entangled(net, seed, grid, prop)
        max_abs.append(max_abs_deviation(pure, ens))
        rms.append(rms_deviation(pure, ens))
    averaged, _ = averaged_trace(net, StateKind.ENTANGLED, 0, 0, grid, prop, 100, 1, n_jobs=args.threads)
    emit_csv([ens, averaged], "ris/equivalence.csv")
    below = float(np.mean(np.array(max_abs) < 2 * 3 * np.sqrt(2.0**-9)))
    return [
        _row("equivalence", "fraction_max_abs_below_0.27", below, 0.95, None),
        _row("equivalence", "mean_rms", float(np.mean(rms)), None, 0.05),
        _row("equivalence", "max_abs_n100", max_abs_deviation(averaged, ens), None, 0.03),
    ]


def _mean_residual(net, kind, n_realizations, seeds, grid, prop, ens, threads):
    residuals = []
    for seed in range(seeds):
        trace, _ = averaged_trace(net, kind, 0, 0, grid, prop, n_realizations, seed, n_jobs=threads)
        residuals.append(cross_term_residual(trace, ens).rms)
    return float(np.mean(residuals))


def scaling(args):
    grid = _ladder_grid()
    means = []
    for m_sites in (6, 8, 10):
        net = build_ladder(m_sites, 1.0, 0.1)
        prop = ExactPropagator(net)
        ens = ensemble_trace(net, 0, 0, grid, prop)
        means.append(_mean_residual(net, StateKind.ENTANGLED, 1, args.seeds, grid, prop, ens, args.threads))
        print("M = " + str(m_sites) + ": mean rms residual " + str(means[-1]))
    pd.DataFrame({"M": [6, 8, 10], "rms_residual": means}).to_csv("ris/scaling.csv", index=False)
    return [
        _row("scaling", "ratio_6_8", means[0] / means[1], 1.4, 2.8),
        _row("scaling", "ratio_8_10", means[1] / means[2], 1.4, 2.8),
    ]


def effective(args):
    net = build_ladder(10, 1.0, 0.1)
    grid = _ladder_grid()
    prop = ExactPropagator(net)
    ens = ensemble_trace(net, 0, 0, grid, prop)
    entangled = _mean_residual(net, StateKind.ENTANGLED, 1, args.seeds, grid, prop, ens, args.threads)
    product = _mean_residual(net, StateKind.PRODUCT, round(2**9 / 9), args.seeds, grid, prop, ens, args.threads)
    rows = [_row("effective", "product_over_entangled", product / entangled, 0.5, 2.0)]
    if args.full:
        run(validate(preset("fig3a")), "ris", threads=args.threads)
        frame = pd.read_csv("ris/fig3a.csv")
        gap = float(np.max(np.abs(frame["P_prod_630"] - frame["P_ent_1"])))
        rows.append(_row("effective", "fig3a_prod630_vs_ent1_max_abs", gap, None, 0.1))
    return rows


def phases(args):
    net = build_ladder(10, 1.0, 0.1)
    grid = _ladder_grid()
    prop = ExactPropagator(net)
    ens = ensemble_trace(net, 0, 0, grid, prop)
    entangled = _mean_residual(net, StateKind.ENTANGLED, 1, args.seeds, grid, prop, ens, args.threads)
    product = _mean_residual(net, StateKind.PRODUCT, 1, args.seeds, grid, prop, ens, args.threads)
    return [_row("phases", "product_over_entangled", product / entangled, 1.0, None)]


def contrast(args):
    m_sites = 12
    seeds = min(args.seeds, 5)
    ladder = build_ladder(m_sites, 1.0, 0.1)
    star_net = build_star(m_sites, 1.0, 0)
    # each network on its own decay scale: 60 / b_x for the ladder, 10 / sigma_0 for the star
    grids = [_ladder_grid(), TimeGrid(10.0 / np.sqrt(local_second_moment(m_sites, 1.0)), 400)]
    residuals = []
    for net, grid in zip((ladder, star_net), grids):
        prop = ExactPropagator(net)
        ens = ensemble_trace(net, 0, 0, grid, prop)
        residuals.append(_mean_residual(net, StateKind.PRODUCT, 1, seeds, grid, prop, ens, args.threads))
    print("Product residual: ladder " + str(residuals[0]) + ", star " + str(residuals[1]))
    return [_row("contrast", "star_over_ladder", residuals[1] / residuals[0], None, 1.0)]


def echo(args):
    net = build_ladder(14, 1.0, 0.1)
    grid = _ladder_grid()
    trace = _entangled(net, 0, grid, TrotterPropagator(net, 0.02))
    emit_csv([trace], "ris/echo.csv")
    report = find_echo(trace, decay_below=0.2, revival_above=0.4, t_min=5.0, t_max=60.0)
    if report is None:
        return [_row("echo", "revival_height", 0.0, 0.4, None)]
    print("Echo at t = " + str(report.revival_time) + " with P = " + str(report.revival_height))
    return [_row("echo", "revival_height", report.revival_height, 0.4, None)]


def star(args):
    m_sites = 12
    sigma_0 = np.sqrt(local_second_moment(m_sites, 1.0))
    grid = TimeGrid(10.0 / sigma_0, 400)
    net = build_star(m_sites, 1.0, 0)
    trace = _entangled(net, 0, grid, TrotterPropagator(net))
    emit_csv([trace], "ris/star.csv")
    smoothed = smooth(trace, window=5)
    decayed = np.flatnonzero(smoothed < 0.15)
    end = decayed[0] if len(decayed) else len(smoothed) - 1
    rise = float(np.max(np.diff(smoothed[: end + 1]), initial=0.0))
    late = (grid.times >= 2.0 / sigma_0) & (grid.times <= 10.0 / sigma_0)
    rows = [
        _row("star", "max_rise_before_decay", rise, None, 0.02),
        _row("star", "abs_at_window_end", float(abs(smoothed[late][-1])), None, 0.15),
        _row("star", "max_late", float(np.max(smoothed[late])), None, 0.3),
    ]
    ratios = []
    for seed in range(min(args.seeds, 10)):
        times = []
        for sigma in (1.0, 2.0):
            net = build_star(m_sites, sigma, seed)
            scaled = TimeGrid(10.0 / (sigma * sigma_0), 400)
            times.append(decay_time(_entangled(net, 0, scaled, TrotterPropagator(net))))
        ratios.append(times[0] / times[1])
    rows.append(_row("star", "decay_time_ratio", float(np.mean(ratios)), 2.0 * 0.85, 2.0 * 1.15))
    return rows


def trotter(args):
    net = build_ladder(8, 1.0, 0.1)
    psi0, _ = make_entangled(8, 0, 0)
    exact = up_probability(ExactPropagator(net).evolve(psi0, 10.0), 0)
    steps = [0.1, 0.05, 0.025]
    errors = [abs(up_probability(TrotterPropagator(net, dt).evolve(psi0, 10.0), 0) - exact) * 2 for dt in steps]
    pd.DataFrame({"dt": steps, "deviation": errors}).to_csv("ris/trotter.csv", index=False)
    return [_row("trotter", "loglog_slope", loglog_slope(steps, errors), 1.8, 2.2)]


def conservation(args):
    net = build_star(10, 1.0, 1)
    psi0, _ = make_entangled(10, 0, 3)
    prop = TrotterPropagator(net, 0.01)
    out = prop.evolve(psi0, 1000 * 0.01)
    return [
        _row("conservation", "norm_drift", abs(out.norm() - 1.0), None, 1e-10),
        _row("conservation", "magnetization_drift", abs(total_magnetization(out) - total_magnetization(psi0)), None, 1e-10),
    ]


def chebyshev(args):
    net = build_ladder(8, 1.0, 0.1)
    grid = TimeGrid(20.0, 2)
    prop = ExactPropagator(net)
    w_ens = ensemble_trace(net, 0, 0, grid, prop).w_values[-1]
    w = np.array([_entangled(net, seed, grid, prop).w_values[-1] for seed in range(200)])
    exceed = float(np.mean(np.abs(w - w_ens) >= 0.05))
    return [
        _row("chebyshev", "fraction_exceeding", exceed, None, chebyshev_bound(2.0**-7, 1, 0.05)),
        _row("chebyshev", "variance", float(np.var(w, ddof=1)), None, 2.0**-7),
    ]


def determinism(args):
    document = preset("fig3a")
    if not args.full:
        document["system"]["M"] = 10
        document["initial"]["n_realizations"] = 20
        document["propagator"] = {"kind": "exact"}
    checksums = []
    for threads in (1, 2, 8):
        manifest = run(validate(document), "ris/determinism_" + str(threads), threads=threads)
        checksums.append(manifest.checksums["fig3a.csv"])
    return [_row("determinism", "distinct_checksums", float(len(set(checksums))), 1.0, 1.0)]


if __name__ == "__main__":
    args = parser.parse_args()
    if not exists("ris"):
        os.makedirs("ris")
    criteria = CRITERIA if "all" in args.criteria else args.criteria
    rows = []
    for name in criteria:
        print("Processing " + name)
        rows += globals()[name](args)
    result = pd.DataFrame(rows)
    result.to_csv("ris/acceptance.csv", index=False)
    print(result.to_string(index=False))
    sys.exit(0 if result["passed"].all() else 1)
