# Three-Body Bose Gas Toolkit - Command Line
# Main entry point: one subcommand per computation, each writing a JSON report plus CSV side files
# Exit codes: 0 success, 1 configuration error, 2 violated precondition, 3 nonconvergence

import argparse
import logging
import os
import sys
import time

import numpy as np
import pandas as pd
from threadpoolctl import threadpool_limits

from diag import (LatticeBox, build_hamiltonian, discrete_scattering_energy, ground_state,
                  predicted_leading, universality_experiment)
from dyson import construct_U, scan_no_four_body, certify_dyson_inequality
from lowerbound import (TempleParameters, assemble_thermo_lower, beta_window, box_statistics,
                        grid_exponent, nu_exponent, optimize_exponent, poisson_distance,
                        temple_energy_table, temple_lower_bound, uniform_sampler, validate_window)
from potentials import load_potential_file, metric_matrix, validate_symmetry
from scattering import hard_sphere_energy, modified_scattering_energy, scattering_energy, soft_sphere_energy
from upperbound import (UpperParameters, analytic_box_energy, assemble_thermo_upper, box_upper_energy,
                        product_state_energy)
from utils import (BoseGasError, ConfigError, ParameterWindowError, build_report, load_config,
                   save_config, write_csv_tables, write_excel_workbook, write_json_report, write_pdf_summary)

logger = logging.getLogger(__name__)

COMMANDS = ("scatter", "dyson", "temple", "diag", "bounds", "sandwich")
MIN_CLI_SITES = 4


class ToolkitArgumentParser(argparse.ArgumentParser):
    """argparse that raises ConfigError instead of exiting, so bad usage maps to exit code 1."""

    def error(self, message):
        raise ConfigError(message)

# -------------------------------
# Shared helpers
# -------------------------------
def resolve_config(args):
    """Config file over defaults, then command-line flags over both."""
    config = load_config(args.config)
    runtime = config["runtime"]
    if args.mem_cap is not None:
        runtime["mem_cap_bytes"] = int(args.mem_cap)
    if args.threads is not None:
        runtime["threads"] = int(args.threads)
    if args.log_level is not None:
        runtime["log_level"] = args.log_level
    return config


def load_three_body(path, config, rng):
    """Load a potential file and run the symmetry check on three-body potentials."""
    V = load_potential_file(path)
    if V.is_three_body:
        sym = config["symmetry"]
        report = validate_symmetry(V, sample_count=int(sym["samples"]), tol=float(sym["rel_tol"]), rng=rng)
        return report.potential, report.to_dict()
    return V, None


def require_potential(args):
    if not args.potential:
        raise ConfigError(f"Command '{args.command}' needs --potential")
    if not os.path.exists(args.potential):
        raise ConfigError(f"Potential file not found: {args.potential}")
    return args.potential


def check_sites(sites):
    if sites < MIN_CLI_SITES:
        raise ParameterWindowError(f"--sites must be at least {MIN_CLI_SITES}, got {sites}")


def wall_references(V):
    """Closed-form scattering energies when V is a bounded wall."""
    profile = V.radial_profile
    if getattr(profile, "name", None) != "wall":
        return {}
    height, a = profile.params["height"], profile.params["radius"]
    factor = metric_matrix().det_M if V.kind == "radial_metric" else 1.0
    d = V.dimension
    return {
        "soft_sphere": factor * soft_sphere_energy(height, a, d),
        "hard_sphere": factor * hard_sphere_energy(a, d),
    }

# -------------------------------
# Commands
# -------------------------------
def cmd_scatter(args, config, rng):
    V, symmetry = load_three_body(require_potential(args), config, rng)
    if args.d is not None and args.d != V.dimension:
        raise ConfigError(f"--d {args.d} does not match the potential file (d = {V.dimension})")
    if V.is_three_body:
        estimate, _ = modified_scattering_energy(V, config["scattering"], rng=rng)
    else:
        estimate = scattering_energy(V, config["scattering"])
    results = {"potential": V.descriptor(), "estimate": estimate.to_dict(), "b": estimate.value,
               "uncertainty": estimate.uncertainty, "references": wall_references(V)}
    if symmetry is not None:
        results["symmetry"] = symmetry
    refs = results["references"]
    if refs:
        results["relative_to_hard_sphere"] = estimate.value / refs["hard_sphere"]
    sweep = pd.DataFrame({
        "R": list(estimate.radii),
        "b_R_coarse": list(estimate.b_values_coarse),
        "b_R_fine": list(estimate.b_values) + [np.nan] * (len(estimate.radii) - len(estimate.b_values)),
    })
    return results, {"radius_sweep": sweep}


def cmd_dyson(args, config, rng):
    V, symmetry = load_three_body(require_potential(args), config, rng)
    R0 = V.range_R0
    R1 = args.r1_ratio * R0
    U = construct_U(R1, 4.0 * R1, V.dimension)
    metric = metric_matrix() if V.is_three_body else None
    report = certify_dyson_inequality(V, U, metric=metric, config=config)
    scan = scan_no_four_body(rng, args.configs)
    results = {"potential": V.descriptor(), "U": U.to_dict(), "certificate": report.to_dict(),
               "no_four_body": scan, "pass": bool(report.passed and scan["violations"] == 0)}
    if symmetry is not None:
        results["symmetry"] = symmetry
    return results, {}


def _temple_params(args, config):
    ok, diagnostics = validate_window(args.alpha, args.beta)
    if not ok:
        raise ParameterWindowError("; ".join(diagnostics))
    return TempleParameters(rho=args.rho, b_M=args.b, alpha=args.alpha, beta=args.beta)


def cmd_temple(args, config, rng):
    params = _temple_params(args, config)
    n = args.n if args.n is not None else int(round(params.rho_ell3))
    report = temple_lower_bound(params, n, config)
    optimum = optimize_exponent()

    alphas = np.linspace(1.0 / 3.0, 3.0 / 5.0, 41)[1:-1]
    rows = []
    for alpha in alphas:
        lo, hi = beta_window(alpha)
        for beta in np.linspace(lo, hi, 21)[1:-1]:
            rows.append({"alpha": alpha, "beta": beta, "nu": nu_exponent(alpha, beta)})
    sensitivity = pd.DataFrame([{"c_err": float(k), "lower_bound": v}
                                for k, v in report.c_err_sensitivity.items()],
                               columns=["c_err", "lower_bound"])

    M = args.boxes
    N = max(int(round(params.rho_ell3 * M**3)), 1)
    stats = box_statistics(uniform_sampler, M, N, draws=args.draws, rng=rng)
    lam = stats.rho_ell3
    c_k = pd.DataFrame({"k": np.arange(len(stats.c_k)), "c_k": stats.c_k})
    c_k = c_k[c_k["c_k"] > 0]

    table = temple_energy_table(params, config)
    assembly = assemble_thermo_lower(params.rho, params.b_M, params.alpha, params.beta, table)
    results = {
        "parameters": params.to_dict(), "n": n, "temple": report.to_dict(), "nu": report.nu,
        "nu_at_parameters": nu_exponent(params.alpha, params.beta), "optimum": optimum.to_dict(),
        "grid_optimum": dict(zip(("alpha", "beta", "nu"), grid_exponent(101))),
        "box_statistics": {"M_boxes": M, "N": N, "draws": args.draws, "lambda": lam,
                           "poisson_distance": poisson_distance(stats.c_k, lam)},
        "assembly": assembly.to_dict(),
    }
    return results, {"nu_grid": pd.DataFrame(rows), "c_err_sensitivity": sensitivity, "c_k": c_k}


def cmd_diag(args, config, rng):
    check_sites(args.sites)
    V, symmetry = load_three_body(require_potential(args), config, rng)
    boundary = args.boundary or config["diag"]["boundary"]
    box = LatticeBox(args.sites, args.spacing, boundary)
    if args.potential2:
        V2, _ = load_three_body(args.potential2, config, rng)
        return {"universality": universality_experiment(V, V2, box, args.n, config)}, {}
    H = build_hamiltonian(box, args.n, V, config)
    result = ground_state(H, config=config, seed=args.seed)
    b_disc = discrete_scattering_energy(V, box.spacing)
    leading = predicted_leading(b_disc.value, box.side, args.n)
    results = {
        "box": box.to_dict(), "n": args.n, "dimension": H.dimension, "memory_bytes": H.memory_bytes,
        "ground_state": result.to_dict(), "E0": result.energy, "residual": result.residual,
        "b_M_disc": b_disc.to_dict(), "predicted_leading": leading,
        "ratio": result.energy / leading if leading > 0 else None,
    }
    if symmetry is not None:
        results["symmetry"] = symmetry
    return results, {}


def cmd_bounds(args, config, rng):
    V, symmetry = load_three_body(require_potential(args), config, rng)
    if args.b is None:
        estimate, _ = modified_scattering_energy(V, config["scattering"], rng=rng)
        b = estimate.value
    else:
        b = args.b
    params = TempleParameters(rho=args.rho, b_M=b, alpha=args.alpha, beta=args.beta)
    ok, diagnostics = validate_window(args.alpha, args.beta)
    if not ok:
        raise ParameterWindowError("; ".join(diagnostics))
    lower = assemble_thermo_lower(args.rho, b, args.alpha, args.beta, temple_energy_table(params, config))
    upper = assemble_thermo_upper(
        UpperParameters(rho=args.rho, b_M=b, alpha=args.alpha_upper, R0=V.range_R0), V, config)
    leading = args.rho**3 * b / 6.0
    results = {
        "b_M": b, "leading_density": leading, "lower": lower.to_dict(), "upper": upper.to_dict(),
        "e_lower": lower.e_lower, "e_upper": upper.e_upper,
        "sandwich": bool(lower.e_lower <= leading <= upper.e_upper),
    }
    if symmetry is not None:
        results["symmetry"] = symmetry
    return results, {}


def _box_lower_density(n, side, b_disc, config):
    """
    Temple bound for n particles in the box, divided by side^5, with alpha chosen so that
    a Y^-alpha equals the box side and beta at the middle of its window. Falls back to the
    positivity bound 0 when alpha leaves the window or the Temple condition fails.
    """
    rho = n / side**3
    Y = rho * b_disc**0.75
    a = b_disc**0.25
    if not 0 < Y < 1 or side <= a:
        return 0.0, "positivity", None
    alpha = np.log(side / a) / -np.log(Y)
    if not 1.0 / 3.0 < alpha < 3.0 / 5.0:
        return 0.0, "positivity", None
    lo, hi = beta_window(alpha)
    params = TempleParameters(rho=rho, b_M=b_disc, alpha=alpha, beta=0.5 * (lo + hi))
    if n > params.n_max:
        return 0.0, "positivity", None
    report = temple_lower_bound(params, n, config)
    if not report.valid:
        return 0.0, "positivity", report.to_dict()
    return report.lower_bound / side**5, "temple", report.to_dict()


def cmd_sandwich(args, config, rng):
    check_sites(args.sites)
    V, symmetry = load_three_body(require_potential(args), config, rng)
    neumann = LatticeBox(args.sites, args.spacing, "neumann")
    side = neumann.side
    b_disc = discrete_scattering_energy(V, neumann.spacing)
    E_N = ground_state(build_hamiltonian(neumann, args.n, V, config), config=config, seed=args.seed)
    E_D, route = box_upper_energy(neumann, args.n, V, b_disc.value, config)
    E_A, box_bound = analytic_box_energy(args.n, side, V, b_disc.value, config)
    e_lower, lower_route, temple = _box_lower_density(args.n, side, b_disc.value, config)
    e_neumann = E_N.energy / side**3
    e_upper = product_state_energy(E_A, side, 0.0, 1)
    e_diagonalized = product_state_energy(E_D, side, 0.0, 1)
    # copies of the Dirichlet box separated by corridors of width R0 tile space without cross terms
    e_tiled = product_state_energy(E_A, side, V.range_R0, 1, interaction_range=V.range_R0)
    # E0 is only known to its residual
    slack = E_N.residual / side**3
    flags = {
        "lower_le_neumann": bool(e_lower <= e_neumann + slack),
        "neumann_le_upper": bool(e_neumann <= e_upper + slack),
        "neumann_le_dirichlet": bool(E_N.energy <= E_D + E_N.residual),
        "dirichlet_le_analytic": bool(E_D <= E_A),
    }
    results = {
        "box": neumann.to_dict(), "n": args.n, "b_M_disc": b_disc.to_dict(),
        "E0_neumann": E_N.energy, "E0_dirichlet": E_D, "E_upper_analytic": E_A, "upper_route": route,
        "box_bound": box_bound.to_dict(),
        "e_lower": e_lower, "lower_route": lower_route, "temple": temple,
        "E0_density": e_neumann, "e_upper": e_upper, "e_upper_diagonalized": e_diagonalized,
        "e_upper_tiled": e_tiled, "flags": flags, "pass": all(flags.values()),
    }
    if symmetry is not None:
        results["symmetry"] = symmetry
    return results, {}


HANDLERS = {
    "scatter": cmd_scatter,
    "dyson": cmd_dyson,
    "temple": cmd_temple,
    "diag": cmd_diag,
    "bounds": cmd_bounds,
    "sandwich": cmd_sandwich,
}

# -------------------------------
# Parser
# -------------------------------
def build_parser():
    common = ToolkitArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON or TOML config file")
    common.add_argument("--out", default=None, help="Report path (default <output_dir>/<command>_report.json)")
    common.add_argument("--seed", type=int, default=0, help="Seed for every random generator (default: 0)")
    common.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    common.add_argument("--mem-cap", type=int, default=None, help="Memory cap for Hamiltonians in bytes")
    common.add_argument("--export", nargs="*", choices=["xlsx", "pdf"], default=[],
                        help="Additional exports next to the report")
    common.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--save-config", default=None, help="Also write the resolved config to this JSON file")

    parser = ToolkitArgumentParser(prog="bosegas", description="Three-body Bose gas toolkit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("scatter", parents=[common], help="Scattering energy of a potential")
    p.add_argument("--potential", required=True)
    p.add_argument("--d", type=int, default=None, help="Expected dimension of the potential")

    p = sub.add_parser("dyson", parents=[common], help="Dyson inequality certificate and cutoff scan")
    p.add_argument("--potential", required=True)
    p.add_argument("--r1-ratio", type=float, default=10.0, help="R1 / R0 (R2 = 4 R1)")
    p.add_argument("--configs", type=int, default=2000, help="Random configurations for the cutoff scan")

    p = sub.add_parser("temple", parents=[common], help="Temple lower bound and exponent optimum")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--b", type=float, default=1.0, help="Modified scattering energy b_M")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n", type=int, default=None, help="Particles in the box (default rho ell^3)")
    p.add_argument("--boxes", type=int, default=8, help="Boxes per side for occupation statistics")
    p.add_argument("--draws", type=int, default=20)

    p = sub.add_parser("diag", parents=[common], help="Exact diagonalization in a lattice box")
    p.add_argument("--potential", required=True)
    p.add_argument("--potential2", default=None, help="Second potential for a universality run")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--sites", type=int, default=4)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--boundary", choices=["neumann", "dirichlet", "periodic"], default=None)

    p = sub.add_parser("bounds", parents=[common], help="Thermodynamic lower and upper bounds")
    p.add_argument("--potential", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--b", type=float, default=None, help="b_M; computed from the potential when omitted")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.19)
    p.add_argument("--alpha-upper", type=float, default=1.0 / 75.0)

    p = sub.add_parser("sandwich", parents=[common], help="Lower bound <= E0 density <= upper bound")
    p.add_argument("--potential", required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--sites", type=int, default=4)
    p.add_argument("--spacing", type=float, default=1.0)
    return parser

# -------------------------------
# Main
# -------------------------------
def run(args):
    """Dispatch one command and write its report. Returns the report path."""
    config = resolve_config(args)
    if args.save_config and not save_config(config, args.save_config):
        raise ConfigError(f"Cannot write config to {args.save_config}")
    logging.basicConfig(level=config["runtime"]["log_level"],
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    out = args.out or os.path.join(config["runtime"]["output_dir"], f"{args.command}_report.json")
    stem = out[:-5] if out.endswith(".json") else out
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    rng = np.random.default_rng(args.seed)

    start = time.perf_counter()
    with threadpool_limits(limits=int(config["runtime"]["threads"])):
        results, tables = HANDLERS[args.command](args, config, rng)
    runtime = time.perf_counter() - start

    inputs = {k: v for k, v in vars(args).items() if k != "export"}
    inputs["config"] = config
    csv_files = write_csv_tables(tables, stem) if tables else {}
    report = build_report(args.command, inputs, results, seed=args.seed, csv_files=csv_files,
                          runtime_seconds=runtime)
    write_json_report(report, out)
    if "xlsx" in args.export:
        write_excel_workbook(report, tables, f"{stem}.xlsx")
    if "pdf" in args.export and write_pdf_summary(report, f"{stem}.pdf") is None:
        logger.warning("PDF summary could not be written")
    logger.info("Wrote %s in %.2f s", out, runtime)
    return out


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command not in COMMANDS:
            raise ConfigError(f"Choose one of: {', '.join(COMMANDS)}")
        run(args)
    except BoseGasError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
