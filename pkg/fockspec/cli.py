import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import click
import numpy as np
import pandas as pd

from . import ConvergenceError, Writer, __version__
from . import bands as bands_mod
from . import bs
from . import efimov as efimov_mod
from . import friedrichs
from . import oracle as oracle_mod
from .model import ModelSpec, check_assumptions, extract_quadratic_data
from .torus import GridLadder, TorusGrid

logger = logging.getLogger("FockSpec.cli")
verbose_level = 2


def config_logger(verbose: int):
    root = logging.getLogger()
    if verbose == 0:
        root.setLevel(logging.ERROR)
    elif verbose == 1:
        root.setLevel(logging.WARNING)
    elif verbose == 2:
        root.setLevel(logging.INFO)
    elif verbose > 2:
        root.setLevel(logging.DEBUG)
    global verbose_level
    verbose_level = verbose


def resolve_workers(workers: int) -> int:
    """FOCKSPEC_THREADS overrides the flag when set"""
    env = os.environ.get("FOCKSPEC_THREADS")
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ValueError(f"FOCKSPEC_THREADS must be an integer, got '{env}'")
    if workers < 1:
        raise ValueError(f"worker count must be positive, got {workers}")
    return workers


def load_model(model_path: Optional[str], c: Optional[float], u0: Optional[float]) -> ModelSpec:
    model = ModelSpec.from_file(model_path) if model_path else ModelSpec.cubic()
    changes = {}
    if c is not None:
        changes["c"] = c
    if u0 is not None:
        changes["u0"] = u0
    return model.replace(**changes) if changes else model


def load_grid(n: int, offset: bool, grading: int, ladder: bool):
    if ladder:
        return GridLadder()
    return TorusGrid(n, offset=offset, grading_levels=grading, verbose=verbose_level > 2)


def model_options(func):
    func = click.option("--u0", type=click.FLOAT, default=None, help="Override the 0-sector energy")(func)
    func = click.option("--c", "shift", type=click.FLOAT, default=None, help="Override the shift c of u = eps + c")(func)
    func = click.option(
        "--model",
        "-m",
        "model_path",
        type=click.Path(exists=True, dir_okay=False, resolve_path=True),
        default=None,
        help="YAML model file, the nearest-neighbour model with v = 1 when omitted",
    )(func)
    return func


def grid_options(func):
    func = click.option("--ladder", is_flag=True, help="Richardson ladder of offset grids 16/24/32 instead")(func)
    func = click.option("--grading", type=click.INT, default=0, help="Dyadic refinement levels towards q = 0")(func)
    func = click.option("--offset/--no-offset", default=True, help="Shift nodes by half a cell off the origin")(func)
    func = click.option("--n", "n_per_axis", type=click.INT, default=8, help="Cells per axis")(func)
    return func


def output_options(func):
    func = click.option("--overwrite", is_flag=True, help="Replace an existing output file")(func)
    func = click.option(
        "--format", "fmt", type=click.Choice(Writer.formats), default="csv", help="Output format"
    )(func)
    func = click.option(
        "--output", "-o", type=click.Path(dir_okay=False), default=None, help="Data file, suffix follows the format"
    )(func)
    return func


def open_writer(command: str, output: Optional[str], fmt: str, overwrite: bool) -> Writer:
    path = Path(output) if output else Path(f"fockspec_{command.replace('-', '_')}")
    return Writer(path, fmt=fmt, command=command, overwrite=overwrite, verbose=verbose_level > 1)


def z_values(model: ModelSpec, z_list: Sequence[float], decades: Optional[Sequence[float]]) -> List[float]:
    """explicit z values, or m - 10^-k for k on a linear range"""
    if z_list:
        return sorted(float(z) for z in z_list)
    if decades is None:
        raise click.UsageError("pass --z at least once or --decades K_MIN K_MAX POINTS")
    k_min, k_max, points = decades
    if points < 2 or k_max <= k_min:
        raise ValueError(f"decades need k_min < k_max and at least 2 points, got {decades}")
    ks = np.linspace(k_min, k_max, int(points))
    return sorted(model.m - 10.0 ** (-ks))


@click.group(context_settings=dict(help_option_names=["-h", "--help"], obj={}))
@click.option(
    "-v",
    "--verbose",
    count=True,
    default=2,
    help="4 Levels (Error, Warning, Info, Debug)",
)
@click.version_option(__version__)
@click.pass_context
def cli(ctx, verbose: int):
    """FockSpec: spectral analysis of a lattice Hamiltonian on the cut Fock space

    Every command writes a data file and a '<stem>.manifest.json' beside it.
    """
    config_logger(verbose)


@cli.command(name="check-assumptions", short_help="Checks the standing hypotheses on a model")
@model_options
@grid_options
@output_options
@click.option("--samples", type=click.INT, default=100, help="Random samples per property")
@click.option("--seed", type=click.INT, default=0, help="Seed of the sampler")
@click.option("--radius", type=click.FLOAT, default=0.5, help="Neighbourhood radius of the minimum")
@click.option("--margin", type=click.FLOAT, default=1e-8, help="Required w - m outside the neighbourhood")
@click.option("--max-pair-nodes", type=click.INT, default=512, help="Node subsample of the uniqueness scan")
def check_assumptions_cmd(
    model_path, shift, u0, n_per_axis, offset, grading, ladder, output, fmt, overwrite, samples, seed, radius, margin, max_pair_nodes
):
    """Columns: clause, passed, detail"""
    model = load_model(model_path, shift, u0)
    grid = load_grid(n_per_axis, offset, grading, ladder)
    report = check_assumptions(
        model, grid, delta=radius, samples=samples, seed=seed, margin=margin, max_pair_nodes=max_pair_nodes
    )
    with open_writer("check-assumptions", output, fmt, overwrite) as writer:
        writer.set_model(model.to_config())
        writer["grid"] = grid.descriptor()
        writer["parameters"] = {
            "samples": samples,
            "seed": seed,
            "radius": radius,
            "margin": margin,
            "max_pair_nodes": max_pair_nodes,
        }
        writer["passed"] = report.passed
        writer.save_table(report.to_frame())
    for key, clause in report.clauses.items():
        (logger.info if clause.passed else logger.warning)(f"({key}) {clause.detail}")
    if not report.passed:
        failed = [key for key, clause in report.clauses.items() if not clause.passed]
        raise ValueError(f"model violates the hypotheses ({', '.join(failed)})")


@cli.command(short_help="Scans the Fredholm determinant below the fiber threshold")
@model_options
@grid_options
@output_options
@click.option("--p", "p", type=click.FLOAT, nargs=3, default=(0.0, 0.0, 0.0), help="Quasi-momentum of the fiber")
@click.option("--decades", type=click.FLOAT, nargs=3, default=(1.0, 6.0, 11), help="K_MIN K_MAX POINTS of m(p) - z = 10^-k")
@click.option("--constants", is_flag=True, help="Also estimate the threshold constants at p = 0")
@click.option("--k-range", type=click.INT, nargs=2, default=(4, 14), help="K_FIRST K_LAST of zeta = 2^-k for the constants")
def delta_scan(
    model_path, shift, u0, n_per_axis, offset, grading, ladder, output, fmt, overwrite, p, decades, constants, k_range
):
    """Columns: m_minus_z, z, delta, ratio_sqrt"""
    model = load_model(model_path, shift, u0)
    grid = load_grid(n_per_axis, offset, grading, ladder)
    p = np.asarray(p, dtype=float)
    fiber = friedrichs.fiber_minimum(model, p)
    k_min, k_max, points = decades
    x = 10.0 ** (-np.linspace(k_min, k_max, int(points)))
    values = [friedrichs.delta(model, grid, p, fiber.m_p - xi, fiber) for xi in x]
    frame = pd.DataFrame({"m_minus_z": x, "z": fiber.m_p - x, "delta": values})
    frame["ratio_sqrt"] = frame["delta"] / np.sqrt(frame["m_minus_z"])
    with open_writer("delta-scan", output, fmt, overwrite) as writer:
        writer.set_model(model.to_config())
        writer["grid"] = grid.descriptor()
        writer["parameters"] = {"p": p.tolist(), "decades": list(decades), "k_range": list(k_range)}
        writer["m_p"] = fiber.m_p
        if constants:
            slope = friedrichs.d_zeta_slope(model, grid, k_range=range(k_range[0], k_range[1] + 1))
            writer["d_zeta_slope"] = {
                "numeric": slope.numeric,
                "predicted": slope.predicted,
                "alternative": slope.alternative,
                "agrees_with": slope.agrees_with,
            }
            logger.info(f"D slope {slope.numeric:.6g} agrees with the {slope.agrees_with}")
        writer.save_table(frame)


@cli.command(short_help="Computes the essential spectrum from a fiber sweep")
@model_options
@grid_options
@output_options
@click.option("--p-res", "p_resolution", type=click.INT, default=9, help="Fibers per axis, odd keeps p = 0")
@click.option("--workers", type=click.INT, default=1, help="Threads, FOCKSPEC_THREADS overrides")
@click.option("--tol", type=click.FLOAT, default=None, help="Delta(p, m) above -tol counts as non-negative")
def bands(model_path, shift, u0, n_per_axis, offset, grading, ladder, output, fmt, overwrite, p_resolution, workers, tol):
    """Columns: p1, p2, p3, m_p, M_p, delta_at_m, z_p (empty without fiber eigenvalue)"""
    model = load_model(model_path, shift, u0)
    grid = load_grid(n_per_axis, offset, grading, ladder)
    workers = resolve_workers(workers)
    result = bands_mod.band_structure(
        model, grid, p_resolution=p_resolution, workers=workers, tol=tol, verbose=verbose_level > 1
    )
    with open_writer("bands", output, fmt, overwrite) as writer:
        writer.set_model(model.to_config())
        writer["grid"] = grid.descriptor()
        writer["parameters"] = {"p_resolution": p_resolution, "tol": result.tol, "workers": workers}
        writer["case"] = result.case
        writer["intervals"] = [list(interval) for interval in result.intervals]
        writer["tau_ess"] = result.tau_ess
        writer["upper_screen_passed"] = result.upper_screen_passed
        writer["sweep_error"] = result.sweep_error
        writer.save_table(bands_mod.profile_frame(result.reports))
    click.echo(f"case ({result.case}): {result.intervals}")


@cli.command(short_help="Finds the shift c with a threshold resonance")
@model_options
@grid_options
@output_options
def tune_resonance(model_path, shift, u0, n_per_axis, offset, grading, ladder, output, fmt, overwrite):
    """Columns: c_star, delta0m"""
    model = load_model(model_path, shift, u0)
    grid = load_grid(n_per_axis, offset, grading, ladder)
    c_star = friedrichs.tune_resonance(model, grid)
    residual = friedrichs.delta(model.replace(c=c_star), grid, np.zeros(3), model.m)
    with open_writer("tune-resonance", output, fmt, overwrite) as writer:
        writer.set_model(model.to_config())
        writer["grid"] = grid.descriptor()
        writer.save_table(pd.DataFrame([{"c_star": c_star, "delta0m": residual}]))
    click.echo(f"c* = {c_star:.10g}")


@cli.command(short_help="Classifies the threshold of the critical fiber")
@model_options
@grid_options
@output_options
@click.option("--tol", type=click.FLOAT, default=None, help="Tolerance on Delta(0, m) and v(0)")
def classify(model_path, shift, u0, n_per_axis, offset, grading, ladder, output, fmt, overwrite, tol):
    """Columns: kind, delta0m, v_at_0, tol, margin_delta, margin_v"""
    model = load_model(model_path, shift, u0)
    grid = load_grid(n_per_axis, offset, grading, ladder)
    result = friedrichs.classify_threshold(model, grid, tol)
    row = {
        "kind": result.kind,
        "delta0m": result.delta0m,
        "v_at_0": result.v_at_0,
        "tol": result.tol,
        "margin_delta": result.margin_delta,
        "margin_v": result.margin_v,
    }
    with open_writer("classify", output, fmt, overwrite) as writer:
        writer.set_model(model.to_config())
        writer["grid"] = grid.descriptor()
        writer.save_table(pd.DataFrame([row]))
    click.echo(result.kind)


@cli.command(short_help="Counts eigenvalues below z by the Birman-Schwinger matrix")
@model_options
@grid_options
@output_options
@click.option("--z", "z_list", type=click.FLOAT, multiple=True, help="Spectral parameter, repeatable")
@click.option("--decades", type=click.FLOAT, nargs=3, default=None, help="K_MIN K_MAX POINTS of m - z = 10^-k")
@click.option("--max-nodes", type=click.INT, default=bs.max_nodes_default, help="Guard on the grid size")
def count(model_path, shift, u0, n_per_axis, offset, grading, ladder, output, fmt, overwrite, z_list, decades, max_nodes):
    """Columns: z, count, residual_gap, grid_*"""
    model = load_model(model_path, shift, u0)
    grid = load_grid(n_per_axis, offset, grading, ladder)
    zs = z_values(model, z_list, decades)
    frame = bs.count_sweep(model, grid, zs, verbose=verbose_level > 1, max_nodes=max_nodes)
    with open_writer("count", output, fmt, overwrite) as writer:
        writer.set_model(model.to_config())
        writer["grid"] = grid.descriptor()
        writer["parameters"] = {"z": zs, "inertia_tol": bs.inertia_tol, "max_nodes": max_nodes}
        writer.save_table(frame)


@cli.command(short_help="Compares the Birman-Schwinger count with the brute-force matrix")
@model_options
@grid_options
@output_options
@click.option("--z", "z_list", type=click.FLOAT, multiple=True, help="Spectral parameter, repeatable")
@click.option("--decades", type=click.FLOAT, nargs=3, default=None, help="K_MIN K_MAX POINTS of m - z = 10^-k")
def oracle(model_path, shift, u0, n_per_axis, offset, grading, ladder, output, fmt, overwrite, z_list, decades):
    """Columns: z, bs, oracle, agree"""
    model = load_model(model_path, shift, u0)
    grid = load_grid(n_per_axis, offset, grading, ladder)
    zs = z_values(model, z_list, decades)
    pairs = bs.pair_matrix(model, grid)
    rows = []
    for z in zs:
        via_bs = bs.count_below(model, grid, z, pairs).count
        via_h = oracle_mod.count_below(model, grid, z).count
        rows.append({"z": z, "bs": via_bs, "oracle": via_h, "agree": via_bs == via_h})
    frame = pd.DataFrame(rows, columns=["z", "bs", "oracle", "agree"])
    with open_writer("oracle", output, fmt, overwrite) as writer:
        writer.set_model(model.to_config())
        writer["grid"] = grid.descriptor()
        writer["parameters"] = {"z": zs, "inertia_tol": bs.inertia_tol, "max_dim": oracle_mod.max_dim_default}
        writer.save_table(frame)
    if not frame["agree"].all():
        raise RuntimeError(f"counts disagree at z = {frame.loc[~frame['agree'], 'z'].tolist()}")


@cli.command(short_help="Hilbert-Schmidt norm of T11 under grading towards q = 0")
@model_options
@output_options
@click.option("--n", "n_per_axis", type=click.INT, default=6, help="Cells per axis of the coarse grid")
@click.option("--gradings", type=click.INT, multiple=True, default=(0, 2, 4, 6), help="Grading levels, repeatable")
@click.option("--offset/--no-offset", default=True)
@click.option("--z", type=click.FLOAT, default=None, help="Spectral parameter, the threshold m when omitted")
@click.option("--tune/--no-tune", default=False, help="Move c to the resonance of every grid first")
@click.option("--margin", type=click.FLOAT, default=1e-3, help="Offset of c above the tuned resonance")
def hs_norm(model_path, shift, u0, output, fmt, overwrite, n_per_axis, gradings, offset, z, tune, margin):
    """Columns: n, grading, nodes, c, z, hs_norm, drift"""
    model = load_model(model_path, shift, u0)
    frame = bs.hs_norm_profile(
        model,
        n=n_per_axis,
        gradings=gradings,
        z=z,
        offset=offset,
        margin=margin if tune else None,
        verbose=verbose_level > 2,
    )
    with open_writer("hs-norm", output, fmt, overwrite) as writer:
        writer.set_model(model.to_config())
        writer["parameters"] = {
            "n": n_per_axis,
            "gradings": list(gradings),
            "offset": offset,
            "z": float(frame["z"].iloc[0]),
            "tune": tune,
            "margin": margin if tune else None,
        }
        writer.save_table(frame)


@cli.command(short_help="Computes the asymptotic constant of the eigenvalue count")
@model_options
@output_options
@click.option("--s", "s", type=click.FLOAT, default=None, help="Mass ratio l2/l1, taken from the model when omitted")
@click.option("--mu", type=click.FLOAT, default=1.0, help="Level of the super-level sets")
@click.option("--l-max", type=click.INT, default=8, help="Highest harmonic")
@click.option("--r", "r_list", type=click.FLOAT, multiple=True, help="Interval lengths for the truncated-operator check")
def efimov(model_path, shift, u0, output, fmt, overwrite, s, mu, l_max, r_list):
    """Columns: ell, measure"""
    if s is None:
        params = efimov_mod.EfimovParams.from_quadratic(extract_quadratic_data(load_model(model_path, shift, u0)))
    else:
        params = efimov_mod.EfimovParams.from_s(s)
    estimate = efimov_mod.u_of_mu(params, mu=mu, l_max=l_max)
    refined = efimov_mod.u_of_mu(params, mu=mu, l_max=l_max + 4)
    convention = efimov_mod.fourier_check(params)
    with open_writer("efimov", output, fmt, overwrite) as writer:
        writer["parameters"] = {"s": params.s, "l0": params.l0, "mu": mu, "l_max": l_max}
        writer["y_star"] = estimate.y_star
        writer["U0"] = estimate.U0
        writer["U0_lower"] = estimate.U0_lower
        writer["U0_l_max_drift"] = abs(refined.U0 - estimate.U0)
        writer["convention"] = {"winner": convention.winner, "deviation": convention.deviation}
        if r_list:
            report = efimov_mod.sobolev_limit_check(params, mu=mu, r_list=r_list, l_max=l_max)
            writer["sobolev"] = report.frame.to_dict(orient="records")
            writer["sobolev_passed"] = report.passed
            writer["sobolev_gaps_shrinking"] = report.gaps_shrinking
        writer.save_table(estimate.to_frame())
    click.echo(f"y* = {estimate.y_star:.8g}, U0 = {estimate.U0:.8g} (lower bound {estimate.U0_lower:.8g})")


@cli.command(short_help="Fits the logarithmic growth of N(z) at the threshold")
@model_options
@grid_options
@output_options
@click.option("--decades", type=click.FLOAT, nargs=3, default=(4.0, 8.0, 9), help="K_MIN K_MAX POINTS of m - z = 10^-k")
@click.option("--tune/--no-tune", default=True, help="Move c to the resonance on the grid first")
@click.option("--margin", type=click.FLOAT, default=10.0, help="Resonance offset in units of the smallest cell")
@click.option("--tolerance", type=click.FLOAT, default=0.25, help="Accepted relative deviation from U0")
@click.option("--max-nodes", type=click.INT, default=bs.max_nodes_default, help="Guard on the grid size")
def asymptotics(
    model_path, shift, u0, n_per_axis, offset, grading, ladder, output, fmt, overwrite, decades, tune, margin, tolerance, max_nodes
):
    """Columns: z, count, residual_gap, m_minus_z, grid_*"""
    model = load_model(model_path, shift, u0)
    grid = load_grid(n_per_axis, offset, grading, ladder)
    if tune:
        c_star = friedrichs.tune_resonance(model, grid)
        model = model.replace(c=c_star + margin * grid.min_spacing)
    zs = z_values(model, (), decades)
    frame = bs.count_sweep(model, grid, zs, verbose=verbose_level > 1, max_nodes=max_nodes)
    frame["m_minus_z"] = model.m - frame["z"]
    fit = efimov_mod.fit_log_asymptotics(list(zip(frame["z"], frame["count"])), model.m)
    quad = extract_quadratic_data(model)
    U0 = efimov_mod.u_of_mu(efimov_mod.EfimovParams.from_quadratic(quad)).U0
    deviation = abs(fit.slope - U0) / U0 if U0 > 0 else float("inf")
    with open_writer("asymptotics", output, fmt, overwrite) as writer:
        writer.set_model(model.to_config())
        writer["grid"] = grid.descriptor()
        writer["parameters"] = {
            "decades": list(decades),
            "tune": tune,
            "margin": margin,
            "tolerance": tolerance,
            "inertia_tol": bs.inertia_tol,
            "max_nodes": max_nodes,
        }
        writer["slope"] = fit.slope
        writer["intercept"] = fit.intercept
        writer["fit_residual"] = fit.residual
        writer["U0"] = U0
        writer["relative_deviation"] = deviation
        writer["within_tolerance"] = deviation <= tolerance
        writer.save_table(frame)
    message = f"slope {fit.slope:.5g} against U0 = {U0:.5g} ({100 * deviation:.1f} % off)"
    if deviation <= tolerance:
        logger.info(message)
    else:
        logger.warning(message)


@cli.command(short_help="Tests the Weyl inequality on random symmetric matrices")
@output_options
@click.option("--samples", type=click.INT, default=200)
@click.option("--dim", type=click.INT, default=40)
@click.option("--seed", type=click.INT, default=7)
def weyl_check(output, fmt, overwrite, samples, dim, seed):
    """Columns: sample, lhs, rhs, l1, l2 (one row per violation)"""
    report = bs.weyl_check(samples, dim, seed)
    frame = pd.DataFrame(report.violations, columns=["sample", "lhs", "rhs", "l1", "l2"])
    with open_writer("weyl-check", output, fmt, overwrite) as writer:
        writer["parameters"] = {"samples": samples, "dim": dim, "seed": seed}
        writer["violations"] = len(report.violations)
        writer.save_table(frame)
    click.echo(f"{len(report.violations)} violations in {samples} samples")
    if not report.passed:
        raise RuntimeError("Weyl inequality violated")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """execute one subcommand, 0 on success, 2 on invalid input, 1 on numerical failure"""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="fockspec", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        logger.error("aborted")
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except (ValueError, TypeError, FileNotFoundError) as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return 2
    except (ConvergenceError, RuntimeError) as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return 1
    return result if isinstance(result, int) else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
