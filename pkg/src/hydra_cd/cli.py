"""Command-line interface for hydra-cd."""

import logging
from importlib.metadata import version
from pathlib import Path
from typing import Optional

import click
import numpy as np

from .config import ENV_PREFIX, build_default_map, load_config, load_environment, manifest_l_star, read_manifest
from .engine import Execution, RunConfig, run
from .errors import ConfigError, DivergenceError, HydraError
from .eso import SIGMA_MAX_ITER, SIGMA_TOL, compute_stepsize_info, price_of_distribution
from .generator import GeneratorSpec, gen_lasso_certified
from .loss import LossKind
from .matrix import (
    contiguous_partition,
    load_matrix_market,
    load_partition,
    load_vector,
    save_matrix_market,
    save_partition,
    save_vector,
)
from .problem import ProblemInstance
from .regularizer import RegKind, SeparableReg
from .report import (
    format_key_value,
    header_only_trace_csv,
    stepsize_report,
    write_curve_csv,
    write_key_value,
    write_stepsize_csv,
    write_trace_csv,
)

VERSION = version("hydra-cd")

LOSS_CHOICES = [k.value for k in LossKind]
REG_CHOICES = ["zero", "l1", "l2", "elastic_net", "box"]

# -------------------- HELPERS --------------------

def _configure_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def parse_list(value: Optional[str], label: str, cast=int) -> Optional[list]:
    if value is None or value.strip() == "":
        return None
    try:
        return [cast(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"{label} must be a comma-separated list, got '{value}'")


def resolve_beta(beta: str, A, partition, tau: int, kind: LossKind, tol: float, max_iter: int, seed: int):
    """(beta, provenance, StepsizeInfo or None). A number wins over double-beta1 over auto."""
    choice = beta.strip().lower()
    if choice not in ("auto", "double-beta1"):
        try:
            return float(choice), "user", None
        except ValueError:
            raise ConfigError(f"--beta must be 'auto', 'double-beta1' or a number, got '{beta}'") from None
    sigma_prime_mode = "doubling" if choice == "double-beta1" else "bound"
    info = compute_stepsize_info(
        A, partition, tau, kind,
        sigma_mode="power", sigma_prime_mode=sigma_prime_mode,
        tol=tol, max_iter=max_iter, seed=seed,
    )
    return info.beta, choice, info


def _partition_for(d: int, nodes: Optional[int], partition_file: Optional[str]):
    if partition_file:
        return load_partition(partition_file, c=nodes, d=d)
    return contiguous_partition(d, nodes or 1)


def _coordinate_values(scalar: Optional[float], path: Optional[str], d: int, label: str):
    if path:
        return load_vector(path, d)
    if scalar is None:
        raise ConfigError(f"{label} is required for this regularizer")
    return scalar


def build_regularizer(reg, d, lam, lam_file, lam2, lam2_file, box_lower, box_upper) -> SeparableReg:
    kind = RegKind.parse(reg)
    if kind is RegKind.ZERO:
        return SeparableReg.zero(d)
    if kind is RegKind.BOX:
        lower = -np.inf if box_lower is None else box_lower
        upper = np.inf if box_upper is None else box_upper
        return SeparableReg.uniform(kind, d, lower=lower, upper=upper)
    lam_v = _coordinate_values(lam, lam_file, d, "--lam")
    if kind is RegKind.ELASTIC_NET:
        lam2_v = _coordinate_values(lam2, lam2_file, d, "--lam2")
        return SeparableReg.uniform(kind, d, lam=lam_v, lam2=lam2_v)
    return SeparableReg.uniform(kind, d, lam=lam_v)


def seed_output(out: Path, seed: int, many: bool) -> Path:
    return out.with_name(f"{out.name}.seed{seed}") if many else out


# -------------------- CLI --------------------
@click.version_option(version=VERSION, package_name="hydra-cd")
@click.group(context_settings={"auto_envvar_prefix": ENV_PREFIX})
@click.option(
    "--config",
    "config_file",
    type=click.Path(exists=True, dir_okay=False),
    help="key=value file supplying defaults for any subcommand option",
)
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for per-evaluation detail")
@click.pass_context
def cli(ctx, config_file, verbose):
    """hydra-cd: distributed randomized coordinate descent on a simulated cluster."""
    _configure_logging(verbose)
    load_environment()
    if config_file:
        try:
            values = load_config(config_file)
        except HydraError as e:
            raise click.ClickException(str(e))
        commands = {name: [p.name for p in cmd.params] for name, cmd in cli.commands.items()}
        ctx.default_map = build_default_map(values, commands)


# -------------------- GENERATE --------------------

@cli.command()
@click.option("-o", "--out-dir", default="instance", show_default=True, type=click.Path(file_okay=False))
@click.option("-c", "--nodes", default=4, show_default=True, type=int, help="Number of blocks (nodes)")
@click.option("--local-rows", default=32, show_default=True, type=int, help="Rows per local block")
@click.option("--global-rows", default=8, show_default=True, type=int, help="Rows coupling all blocks")
@click.option("--block-size", default=16, show_default=True, type=int, help="Columns per block (s)")
@click.option("--nnz-local", default=4, show_default=True, type=int, help="Nonzeros per local row")
@click.option("--nnz-global", default=8, show_default=True, type=int, help="Nonzeros per global row")
@click.option("--lam", default=1.0, show_default=True, type=float, help="L1 weight")
@click.option("--l2-ratio", default=0.0, show_default=True, type=float, help="lam2_i = ratio * M_ii (elastic net)")
@click.option("--support", default=8, show_default=True, type=int, help="Nonzeros in the optimum x*")
@click.option("--seed", default=0, show_default=True, type=int)
def generate(out_dir, nodes, local_rows, global_rows, block_size, nnz_local, nnz_global, lam, l2_ratio, support, seed):
    """Generate a block-angular LASSO instance with a certified optimum.

    Examples:

        hydra-cd generate -o inst --nodes 4 --block-size 64 --support 16

        hydra-cd generate -o inst-en --l2-ratio 1.0 --seed 7
    """
    try:
        spec = GeneratorSpec(
            c=nodes, local_rows=local_rows, global_rows=global_rows, block_size=block_size,
            nnz_local=nnz_local, nnz_global=nnz_global, lam=lam, support=support,
            seed=seed, l2_ratio=l2_ratio,
        )
        click.echo("\nGenerating instance")
        click.echo(f"  Shape: {spec.n} x {spec.d} ({nodes} blocks of {block_size} columns)")
        click.echo(f"  Support: {support}")
        click.echo(f"  Seed: {seed}")

        inst = gen_lasso_certified(spec)
        report = inst.check_certificate()

        out = Path(out_dir)
        save_matrix_market(out / "A.mtx", inst.A)
        save_vector(out / "y.txt", inst.y)
        save_vector(out / "xstar.txt", inst.x_star)
        save_partition(out / "partition.txt", spec.partition())
        files = ["A.mtx", "y.txt", "xstar.txt", "partition.txt"]
        if inst.lam2 is not None:
            save_vector(out / "lam2.txt", inst.lam2)
            files.append("lam2.txt")
    except HydraError as e:
        raise click.ClickException(str(e))

    manifest = {
        "seed": seed,
        "attempt": inst.attempt,
        "n": spec.n,
        "d": spec.d,
        "c": spec.c,
        "local_rows": local_rows,
        "global_rows": global_rows,
        "block_size": block_size,
        "nnz_local": nnz_local,
        "nnz_global": nnz_global,
        "nnz": inst.A.nnz,
        "loss": LossKind.SQUARE,
        "reg": "elastic_net" if inst.lam2 is not None else "l1",
        "lam": lam,
        "l2_ratio": l2_ratio,
        "support": support,
        "L_star": inst.L_star,
        "support_residual": report.support_residual,
        "offsupport_excess": report.offsupport_excess,
        "certificate_passed": report.passed,
        "files": ",".join(files),
    }
    write_key_value(out / "manifest.txt", manifest)
    click.echo(f"  L*: {inst.L_star:.12g}")
    click.echo(f"\n✓ Saved to {out}\n")


# -------------------- ANALYZE --------------------

@cli.command()
@click.option("-m", "--matrix", required=True, type=click.Path(exists=True, dir_okay=False), help="Matrix Market file")
@click.option("--loss", default="square", show_default=True, type=click.Choice(LOSS_CHOICES))
@click.option("-c", "--nodes", type=int, help="Number of nodes (default: from --partition-file, else 1)")
@click.option("--partition-file", type=click.Path(exists=True, dir_okay=False))
@click.option("--tau", default=1, show_default=True, type=int, help="Coordinates updated per node per iteration")
@click.option("--sigma-mode", default="power", show_default=True, type=click.Choice(["power", "exact", "bound"]))
@click.option("--sigma-prime-mode", default="bound", show_default=True, type=click.Choice(["bound", "exact", "doubling"]))
@click.option("--tol", default=SIGMA_TOL, show_default=True, type=float, help="Power iteration tolerance")
@click.option("--max-iter", default=SIGMA_MAX_ITER, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--report", "report_file", type=click.Path(dir_okay=False), help="Write the key=value report here")
@click.option("--report-csv", type=click.Path(dir_okay=False), help="Write the stepsize constants as CSV")
@click.option("--curve-csv", type=click.Path(dir_okay=False), help="Write scaled beta versus sigma curves")
@click.option("--curve-d", type=int, help="d for the curves (default: columns of the matrix)")
@click.option("--curve-nodes", help="Comma-separated node counts (default: 1 and --nodes)")
@click.option("--curve-tau", help="Comma-separated tau values (default: --tau)")
@click.option("--curve-sigma", help="Comma-separated sigma values (default: 25 points from 1 to d)")
def analyze(
    matrix, loss, nodes, partition_file, tau, sigma_mode, sigma_prime_mode, tol, max_iter, seed,
    report_file, report_csv, curve_csv, curve_d, curve_nodes, curve_tau, curve_sigma,
):
    """Compute omega, omega', sigma, sigma' and the safe stepsize beta.

    Examples:

        hydra-cd analyze -m inst/A.mtx --partition-file inst/partition.txt --tau 8

        hydra-cd analyze -m inst/A.mtx --tau 10 --curve-csv curve.csv --curve-nodes 1,100
    """
    try:
        A = load_matrix_market(matrix)
        P = _partition_for(A.n_cols, nodes, partition_file)
        info = compute_stepsize_info(
            A, P, tau, LossKind.parse(loss),
            sigma_mode=sigma_mode, sigma_prime_mode=sigma_prime_mode,
            tol=tol, max_iter=max_iter, seed=seed,
        )
        report = stepsize_report(
            info,
            {"matrix": matrix, "n": A.n_rows, "d": A.n_cols, "nnz": A.nnz, "loss": loss, "seed": seed},
        )
        click.echo(format_key_value(report), nl=False)
        if report_file:
            write_key_value(report_file, report)
        if report_csv:
            write_stepsize_csv(report_csv, info, {"matrix": matrix, "seed": seed})

        if curve_csv:
            d = curve_d or A.n_cols
            cs = parse_list(curve_nodes, "--curve-nodes") or sorted({1, P.c})
            taus = parse_list(curve_tau, "--curve-tau") or [tau]
            sigmas = parse_list(curve_sigma, "--curve-sigma", float) or np.geomspace(1.0, d, 25).tolist()
            points = price_of_distribution(d, cs, taus, sigmas)
            write_curve_csv(curve_csv, points, {"d": d})
            click.echo(f"\n✓ Saved curves to {curve_csv}")
    except HydraError as e:
        raise click.ClickException(str(e))


# -------------------- SOLVE --------------------

@cli.command()
@click.option("-m", "--matrix", required=True, type=click.Path(exists=True, dir_okay=False), help="Matrix Market file")
@click.option("-y", "--labels", required=True, type=click.Path(exists=True, dir_okay=False), help="Targets or +/-1 labels")
@click.option("--loss", default="square", show_default=True, type=click.Choice(LOSS_CHOICES))
@click.option("--reg", default="l1", show_default=True, type=click.Choice(REG_CHOICES))
@click.option("--lam", type=float, help="Regularization weight")
@click.option("--lam-file", type=click.Path(exists=True, dir_okay=False), help="Per-coordinate weights")
@click.option("--lam2", type=float, help="Quadratic weight (elastic net)")
@click.option("--lam2-file", type=click.Path(exists=True, dir_okay=False), help="Per-coordinate quadratic weights")
@click.option("--box-lower", type=float)
@click.option("--box-upper", type=float)
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), help="Generator manifest supplying L*")
@click.option("-c", "--nodes", type=int, help="Number of nodes (default: from --partition-file, else 1)")
@click.option("--partition-file", type=click.Path(exists=True, dir_okay=False))
@click.option("--protocol", default="ra", show_default=True, type=click.Choice(["ra", "asl"]))
@click.option("--execution", default="lockstep", show_default=True, type=click.Choice(["lockstep", "threaded"]))
@click.option("--tau", default=1, show_default=True, type=int, help="Coordinates updated per node per iteration")
@click.option("--beta", default="auto", show_default=True, help="auto | double-beta1 | <number>")
@click.option("--sigma-tol", default=SIGMA_TOL, show_default=True, type=float)
@click.option("--iters", default=100, show_default=True, type=int, help="Iteration cap")
@click.option("--eval-every", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--seed-list", help="Comma-separated seeds; one trace per seed")
@click.option("-o", "--out", default="trace.csv", show_default=True, type=click.Path(dir_okay=False))
@click.option("--target-gap", type=float, help="Stop once L(x) - L* drops below this")
@click.option("--timing/--no-timing", default=None, help="Fill elapsed_s (default: on for threaded execution)")
def solve(
    matrix, labels, loss, reg, lam, lam_file, lam2, lam2_file, box_lower, box_upper, manifest,
    nodes, partition_file, protocol, execution, tau, beta, sigma_tol, iters, eval_every, seed,
    seed_list, out, target_gap, timing,
):
    """Run Hydra and write the loss trace as CSV.

    Examples:

        hydra-cd solve -m inst/A.mtx -y inst/y.txt --lam 1 --manifest inst/manifest.txt \\
  --partition-file inst/partition.txt --tau 8 --iters 2000 -o trace.csv

        hydra-cd solve -m inst/A.mtx -y inst/y.txt --lam 1 -c 4 --protocol asl --beta double-beta1 --tau 4
    """
    seeds = parse_list(seed_list, "--seed-list") or [seed]
    if timing is None:
        timing = execution == Execution.THREADED.value
    out = Path(out)

    try:
        A = load_matrix_market(matrix)
        y = load_vector(labels, A.n_rows)
        kind = LossKind.parse(loss)
        regularizer = build_regularizer(reg, A.n_cols, lam, lam_file, lam2, lam2_file, box_lower, box_upper)
        L_star = manifest_l_star(read_manifest(manifest)) if manifest else None
        problem = ProblemInstance(A, y, kind, regularizer, L_star=L_star).validate()
        P = _partition_for(A.n_cols, nodes, partition_file)
        beta_value, beta_source, info = resolve_beta(beta, A, P, tau, kind, sigma_tol, SIGMA_MAX_ITER, seed)
    except HydraError as e:
        raise click.ClickException(str(e))

    click.echo("\nSolving")
    click.echo(f"  Problem: {A.n_rows} x {A.n_cols}, nnz={A.nnz}, loss={kind.value}, reg={regularizer.describe()}")
    click.echo(f"  Nodes: {P.c} x {P.s} coordinates, tau={tau}, protocol={protocol}, execution={execution}")
    click.echo(f"  Beta: {beta_value:.6g} ({beta_source})")
    if info is not None:
        click.echo(f"  Sigma: {info.sigma:.6g} ({info.sigma_source.value}), omega'={info.omega_prime}")
    if L_star is not None:
        click.echo(f"  L*: {L_star:.12g}")

    for s in seeds:
        path = seed_output(out, s, len(seeds) > 1)
        try:
            config = RunConfig(
                tau=tau, beta=beta_value, protocol=protocol, execution=execution,
                beta_source=beta_source, t_max=iters, eval_every=eval_every,
                seed=s, target_gap=target_gap,
            )
            if iters == 0:
                provenance = {"seed": s, "beta": beta_value, "beta_source": beta_source, "protocol": protocol}
                if L_star is not None:
                    provenance["L_star"] = L_star
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(header_only_trace_csv(provenance), encoding="utf-8", newline="\n")
                click.echo(f"\n✓ Saved to {path}")
                continue
            trace = run(problem, P, config)
        except DivergenceError as e:
            if e.trace is not None:
                write_trace_csv(path, e.trace, timing)
            raise click.ClickException(f"{e} (partial trace in {path})")
        except HydraError as e:
            raise click.ClickException(str(e))

        write_trace_csv(path, trace, timing)
        last = trace.records[-1]
        gap = "" if last.gap is None else f", gap={last.gap:.3e}"
        click.echo(f"\n  seed={s}: k={last.iteration}, loss={last.loss:.12g}{gap}, msgs={last.messages}")
        click.echo(f"✓ Saved to {path}")
    click.echo("")


# -------------------- ENTRYPOINT --------------------
def main(args=None):
    """
    Entry point for console_scripts and testing.

    Args:
        args (list[str], optional): Command-line arguments to pass to Click CLI.
    """
    cli(args=args)


if __name__ == "__main__":
    main()
