"""Command-line front end: ``branchkit <subcommand> --model FILE ...``."""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import cf_density, coalescence, hs_transform, output, simulate, wmoments
from . import rng as rngmod
from .model import classify, extinction, mean_matrix, spectral
from .modelio import load_model

SUBCOMMANDS = ("spectral", "extinction", "wmoments", "density", "bounds", "simulate",
               "genealogy", "coalesce")


class ClassificationError(RuntimeError):
    pass


@dataclass
class RunConfig:
    model_path: str
    subcommand: str
    seed: int
    output_path: str | None = None
    threads: int = 1
    allow_degenerate: bool = False
    timing_path: str | None = None
    knobs: dict = field(default_factory=dict)


def parse_t_range(text: str) -> list[int]:
    """'1..10', '3', '1,2,5' or an empty range such as '1..0'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


class _Timer:
    def __init__(self):
        self.sections: dict[str, float] = {}

    def __call__(self, name):
        timer = self

        class _Section:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.sections[name] = timer.sections.get(name, 0.0) + time.perf_counter() - self.t0

        return _Section()


def _prepare(model, knobs, timer):
    spec = spectral(mean_matrix(model))
    q = extinction(model)
    order = knobs.get("order", 4)
    if "k" in knobs:
        order = max(order, 2 * knobs["k"])
    with timer("moments_of_w"):
        table = wmoments.w_moments(model, spec, order)
    return spec, q, table


def _densities(model, spec, q, table, knobs, timer):
    with timer("inverse_fourier"):
        return cf_density.density_set(model, table, spec.lam, q, z=knobs["z"], N=knobs["points"],
                                      L=knobs["rings"], M=knobs["grid_size"])


def run(config: RunConfig) -> str:
    """Execute one subcommand, write its artefacts and return a summary line."""
    model = load_model(config.model_path)
    cls = classify(model)
    if not config.allow_degenerate and not (cls.irreducible and cls.supercritical):
        raise ClassificationError(
            "model violates the standing assumption that the process is supercritical and its "
            f"mean matrix irreducible (irreducible={cls.irreducible}, "
            f"supercritical={cls.supercritical}); pass --allow-degenerate to override")
    kn = config.knobs
    out = config.output_path
    timer = _Timer()
    t_start = time.perf_counter()
    sub = config.subcommand

    if sub == "spectral":
        spec = spectral(mean_matrix(model))
        output.emit({"lambda": spec.lam, "u": spec.u, "nu": spec.nu,
                     "mean_matrix": mean_matrix(model)}, "json", out)
        summary = f"lambda = {spec.lam:.12g}"

    elif sub == "extinction":
        q = extinction(model, tol=kn.get("tol", 1e-12), max_iter=kn.get("max_iter", 10**6))
        output.emit({"q": q}, "json", out)
        summary = "q = " + ", ".join(f"{v:.6g}" for v in q)

    elif sub == "wmoments":
        spec, q, table = _prepare(model, kn, timer)
        rows = [(i + 1, n, table.moments[i, n]) for i in range(model.d)
                for n in range(table.max_order + 1)]
        output.emit(rows, "csv", out, header=("type", "n", "moment"))
        summary = f"moments through order {table.max_order}"

    elif sub == "density":
        spec, q, table = _prepare(model, kn, timer)
        j = kn["type"] - 1
        if not 0 <= j < model.d:
            raise ValueError(f"--type must lie in [1, {model.d}]")
        dens = _densities(model, spec, q, table, kn, timer)[j]
        keep = dens.x <= kn["x_max"]
        rows = zip(dens.x[keep], dens.values[keep])
        head = {"type": j + 1, "atom": dens.atom, "mass": dens.mass, "mean": dens.mean,
                "clipped_mass": dens.clipped_mass, "dx": dens.dx}
        output.emit(rows, "csv", out, header=("x", "density"), comment=head)
        summary = f"density of W^({j + 1}): mass {dens.mass:.4f}, mean {dens.mean:.4f}"

    elif sub == "bounds":
        spec, q, table = _prepare(model, kn, timer)
        consts = hs_transform.bound_constants(table, q, kn["epsilon"], kn["k"])
        with timer("harris_sevastyanov"):
            inputs = hs_transform.estimate_sup_moments(model, q, kn["reps"], config.seed,
                                                       config.threads)
        ts = list(range(1, kn["t_max"] + 1))
        curve = hs_transform.corollary_bounds(consts, inputs, ts)
        head = {"constants": vars(consts), "inputs": vars(inputs)}
        rows = zip(ts, curve.lower, curve.upper)
        output.emit(rows, "csv", out, header=("t", "lower", "upper"), comment=head)
        summary = f"bounds for t = 1..{kn['t_max']}"

    elif sub == "simulate":
        rows = []
        with timer("simulation"):
            for rep in range(kn["reps"]):
                g = rngmod.stream(config.seed, "simulate", rep)
                for state in simulate.run_population(model, kn["generations"], g):
                    rows.append((rep, state.generation, *state.counts.tolist(), int(state.capped)))
        header = ("rep", "generation", *[f"z{i + 1}" for i in range(model.d)], "capped")
        output.emit(rows, "csv", out, header=header)
        summary = f"{kn['reps']} trajectories of {kn['generations']} generations"

    elif sub == "genealogy":
        t = kn["t"]
        with timer("direct_simulation"):
            est = simulate.mrca_direct_estimate(model, t, t + kn["horizon"], kn["k"], kn["reps"],
                                                config.seed, config.threads)
        output.emit({"t": t, "T": t + kn["horizon"], "k": kn["k"], "p_hat": est.p_hat,
                     "std_err": est.std_err, "n_effective": est.n_effective,
                     "n_capped": est.n_capped}, "json", out)
        summary = f"P(X < {t}) ~ {est.p_hat:.4f} +- {est.std_err:.4f}"

    elif sub == "coalesce":
        k = kn["k"]
        ts = kn["t"]
        spec, q, table = _prepare(model, kn, timer)
        dens = _densities(model, spec, q, table, kn, timer)
        cor = har = None
        if kn["with_bounds"] and ts:
            consts = hs_transform.bound_constants(table, q, kn["epsilon"], k)
            with timer("harris_sevastyanov"):
                inputs = hs_transform.estimate_sup_moments(model, q, kn["bound_reps"], config.seed,
                                                           config.threads)
            cor = hs_transform.corollary_bounds(consts, inputs, ts)
            with timer("harmonic_moments"):
                har = coalescence.harmonic_bound_curve(model, ts, consts)
        rows = []
        for idx, t in enumerate(ts):
            with timer("simulation_to_t"):
                est = coalescence.theorem_estimate(model, dens, t, k, kn["reps"], config.seed,
                                                   config.threads)
            row = [t, est.p_hat, est.std_err]
            row += [cor.lower[idx], cor.upper[idx]] if cor is not None else [None, None]
            row += [har.lower[idx], har.upper[idx]] if har is not None else [None, None]
            if kn["with_oracle"] is not None:
                with timer("direct_simulation"):
                    d = simulate.mrca_direct_estimate(model, t, t + kn["with_oracle"], k,
                                                      kn["reps"], config.seed, config.threads)
                row += [d.p_hat, d.std_err]
            else:
                row += [None, None]
            rows.append(row)
        header = ("t", "p_hat", "std_err", "lower_corollary", "upper_corollary", "lower_harmonic",
                  "upper_harmonic", "oracle_p_hat", "oracle_se")
        output.emit(rows, "csv", out, header=header)
        summary = f"coalescence probabilities for {len(ts)} values of t"
    else:
        raise ValueError(f"unknown subcommand {sub!r}")

    timer.sections["total"] = time.perf_counter() - t_start
    if config.timing_path:
        output.write_text(output.json_text({"subcommand": sub, "model": model.name,
                                            "seconds": timer.sections}) + "\n",
                          config.timing_path)
    return summary


def _epsilon(text):
    return None if text.upper() == "AUTO" else float(text)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="branchkit", formatter_class=fmt,
                                     description=__doc__)
    common = argparse.ArgumentParser(add_help=False, formatter_class=fmt)
    common.add_argument("--model", required=True,
                        help="model JSON file, or a bundled model name "
                             "(slightly_supercritical, very_supercritical)")
    common.add_argument("--seed", type=int, default=rngmod.default_seed(),
                        help="master seed (env BRANCHKIT_SEED overrides the built-in default)")
    common.add_argument("--output", "-o", default=None, help="output path (stdout if omitted)")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--timing", default=None, help="write wall-clock timings as JSON here")
    common.add_argument("--allow-degenerate", action="store_true",
                        help="skip the irreducible + supercritical check")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help):
        return sub.add_parser(name, parents=[common], help=help, formatter_class=fmt)

    add("spectral", "Perron root and eigenvectors (u.1 = 1, u.nu = 1)")
    p = add("extinction", "extinction probabilities")
    p.add_argument("--tol", type=float, default=1e-12, help="sup-norm stopping tolerance")
    p.add_argument("--max-iter", type=int, default=10**6, help="iteration limit")
    p = add("wmoments", "moments E(W^n) of the martingale limit")
    p.add_argument("--order", type=int, default=4, help="highest moment order")

    def cf_knobs(p):
        p.add_argument("--z", type=float, default=cf_density.DEFAULT_Z, help="seed abscissa")
        p.add_argument("--points", type=int, default=cf_density.DEFAULT_N,
                       help="points per ring and sign")
        p.add_argument("--rings", type=int, default=None,
                       help="number of rings L (default: smallest L with lam^L z >= 100 "
                            "and |phi - q| < 1e-3 on the outer ring)")
        p.add_argument("--grid-size", type=int, default=cf_density.DEFAULT_M,
                       help="inversion grid size M (power of two)")

    p = add("density", "density of W^(j) on {W > 0} with its atom at 0")
    p.add_argument("--type", type=int, default=1, help="type j (1-based)")
    p.add_argument("--order", type=int, default=4, help="highest moment order")
    p.add_argument("--x-max", type=float, default=20.0, help="largest x written")
    cf_knobs(p)
    p = add("bounds", "bounds from the Harris-Sevastyanov transform")
    p.add_argument("--k", type=int, default=2, help="number of sampled individuals")
    p.add_argument("--epsilon", type=_epsilon, default="AUTO",
                   help="epsilon, or AUTO for half the admissible upper end")
    p.add_argument("--t-max", type=int, default=20, help="bounds for t = 1..t-max")
    p.add_argument("--reps", type=int, default=100_000, help="Monte Carlo replicates")
    p = add("simulate", "per-generation population counts")
    p.add_argument("--generations", type=int, default=10, help="generations T")
    p.add_argument("--reps", type=int, default=1, help="independent trajectories")
    p = add("genealogy", "direct genealogy simulation estimate")
    p.add_argument("--t", type=int, default=3, help="ancestor generation t")
    p.add_argument("--horizon", type=int, default=10, help="T = t + horizon")
    p.add_argument("--k", type=int, default=2, help="number of sampled individuals")
    p.add_argument("--reps", type=int, default=1000, help="replicates")
    p = add("coalesce", "limiting coalescence probability by t")
    p.add_argument("--k", type=int, default=2, help="number of sampled individuals")
    p.add_argument("--t", type=parse_t_range, default="1..10",
                   help="t values: '1..10', '3' or '1,2,5'")
    p.add_argument("--reps", type=int, default=1000, help="replicates")
    p.add_argument("--with-bounds", action="store_true", help="add both bound families")
    p.add_argument("--with-oracle", type=int, default=None, metavar="HORIZON",
                   help="also run direct genealogy with T = t + HORIZON")
    p.add_argument("--epsilon", type=_epsilon, default="AUTO",
                   help="epsilon, or AUTO for half the admissible upper end")
    p.add_argument("--bound-reps", type=int, default=100_000,
                   help="replicates for E(sup |Y_1|) and E(sup 1/|Y_1|)")
    p.add_argument("--order", type=int, default=4, help="highest moment order")
    cf_knobs(p)
    return parser


_COMMON = {"model", "seed", "output", "threads", "timing", "allow_degenerate", "subcommand"}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    knobs = {k: v for k, v in vars(args).items() if k not in _COMMON}
    return RunConfig(args.model, args.subcommand, args.seed, args.output, args.threads,
                     args.allow_degenerate, args.timing, knobs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = run(config_from_args(args))
    except Exception as exc:  # surfaced to the user, nonzero exit
        print(f"branchkit {args.subcommand}: error: {exc}", file=sys.stderr)
        return 1
    print(f"branchkit {args.subcommand}: {summary}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
