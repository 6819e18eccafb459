"""Command-line front end: one experiment per run, CSV outputs only.

Usage: sgvms --config CONFIG.toml [--out DIR] [--seed N] [--threads N]
             [--reproducible]

The experiment is chosen by the config file; CLI flags override the matching
config values.  Every output embeds the effective configuration in its
header, so a result file documents exactly how to regenerate itself.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from . import analysis, fileio, sgfem
from .config import RunConfig, load_config, render_config, resolve_output_dir
from .deterministic import (
    GreensKernel,
    exact_solution,
    greens_double_integral,
    tau,
)
from .errors import ConfigurationError, UnsupportedConfigurationError
from .finescale import FineScaleOperator, SourceSpec, locality_metrics, render_grids


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sgvms",
        description="Stochastic Galerkin / VMS solver for the 1D advection-diffusion equation",
    )
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for sample loops (results are thread-count independent)")
    parser.add_argument("--reproducible", action="store_true", default=None,
                        help="force deterministic reductions (on by default via config)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.reproducible is not None:
            cfg.reproducible = True
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        out_dir = resolve_output_dir(cfg, args.out)
        run_experiment(cfg, out_dir)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def run_experiment(cfg: RunConfig, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = {
        "solve": cmd_solve,
        "greens-locality": cmd_greens_locality,
        "compare": cmd_compare,
        "convergence": cmd_convergence,
        "tau-table": cmd_tau_table,
        "mc-validate": cmd_mc_validate,
    }[cfg.experiment]
    written = handler(cfg, out_dir)
    for path in written:
        print(f"wrote {path}")
    return written


def _header(cfg: RunConfig, extra: list[str] | None = None) -> list[str]:
    return fileio.config_header_lines(render_config(cfg)) + (extra or [])


# -- solve -------------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out: Path) -> list[Path]:
    problem = cfg.make_problem()
    xi_real = np.asarray(cfg.effective_realization())
    fields: dict[str, sgfem.CoefficientField] = {}
    written: list[Path] = []
    for method in cfg.methods():
        fields[method] = sgfem.solve_problem(problem, method)
        path = out / f"solution_{method}.csv"
        fileio.write_field_csv(path, fields[method], cfg.kappa, extra_header=_header(cfg))
        written.append(path)

    nodes = problem.mesh.interior_nodes
    methods = list(fields)
    stats = {m: (fields[m].mean(), fields[m].variance()) for m in methods}
    for which, fname in ((0, "mean.csv"), (1, "variance.csv")):
        stat = "mean" if which == 0 else "variance"
        cols = ["node", "x"] + [f"{stat}_{m}" for m in methods]
        rows = []
        for i, x in enumerate(nodes):
            rows.append([i + 1, x] + [stats[m][which][i] for m in methods])
        path = out / fname
        fileio.write_csv(path, _header(cfg), cols, rows)
        written.append(path)

    # Realization at the configured xi, on all mesh nodes.
    cols = ["node", "x"] + [f"u_{m}" for m in methods]
    per_method = {m: fields[m].nodal_values(xi_real) for m in methods}
    exact_vals = None
    if cfg.q == 1 and len(cfg.regions) == 1:
        region = problem.beta.regions[0]
        beta_val = float(region.map(xi_real[0]))
        exact_vals = exact_solution(cfg.kappa, beta_val, problem.f_of_region(0),
                                    cfg.L, problem.mesh.nodes)
        cols.append("u_exact")
    rows = []
    for g, x in enumerate(problem.mesh.nodes):
        row = [g, x] + [per_method[m][g] for m in methods]
        if exact_vals is not None:
            row.append(exact_vals[g])
        rows.append(row)
    path = out / "realization.csv"
    fileio.write_csv(path, _header(cfg, [f"realization xi = {list(map(float, xi_real))}"]),
                     cols, rows)
    written.append(path)
    return written


# -- greens-locality ----------------------------------------------------------


def cmd_greens_locality(cfg: RunConfig, out: Path) -> list[Path]:
    if cfg.q != 1 or len(cfg.regions) != 1:
        raise UnsupportedConfigurationError(
            "greens-locality requires a single-region, q = 1 configuration"
        )
    problem = cfg.make_problem()
    op = FineScaleOperator(problem, n_quad=cfg.greens_n_quad)
    source = SourceSpec(x_s=cfg.greens_x_s, coeffs=np.asarray(cfg.greens_profile))
    x_grid, xi_grid = render_grids(problem.mesh, cfg.greens_points_per_element,
                                   cfg.greens_n_xi)
    g_field = op.greens_action(source, x_grid, xi_grid)
    gp_field = op.fine_action(source, x_grid, xi_grid)

    written = []
    for name, field in (("G_field.csv", g_field), ("Gprime_field.csv", gp_field)):
        header = _header(cfg, [
            "rows: x grid, columns: xi grid (first column is x)",
            "xi_grid = " + ";".join(fileio.fmt(v) for v in field.xi),
        ])
        rows = [[x] + list(field.values[i]) for i, x in enumerate(field.x)]
        path = out / name
        fileio.write_csv(path, header, None, rows)
        written.append(path)

    source_element = int(np.searchsorted(problem.mesh.nodes, cfg.greens_x_s, side="right") - 1)
    metrics = locality_metrics(gp_field, problem.mesh, source_element)

    rows = []
    for x_node, coeffs in zip(metrics.boundary_nodes, metrics.boundary_coarse_coeffs):
        for r, m in enumerate(problem.basis.indices):
            rows.append([x_node, r, " ".join(map(str, m)), coeffs[r]])
    path = out / "boundary_coeffs.csv"
    fileio.write_csv(path, _header(cfg), ["x_node", "rank", "multi_index", "coarse_coeff"], rows)
    written.append(path)

    rows = [[
        metrics.interior_max, metrics.exterior_max, metrics.ratio,
        *(v for pair in zip(metrics.boundary_nodes, metrics.boundary_field_max) for v in pair),
    ]]
    cols = ["interior_max", "exterior_max", "exterior_interior_ratio"]
    for i in range(len(metrics.boundary_nodes)):
        cols += [f"boundary_node_{i}", f"boundary_field_max_{i}"]
    path = out / "locality_metrics.csv"
    fileio.write_csv(path, _header(cfg), cols, rows)
    written.append(path)
    return written


# -- convergence --------------------------------------------------------------


def cmd_convergence(cfg: RunConfig, out: Path) -> list[Path]:
    ladder = cfg.ladder_obj()
    cap_bytes = cfg.memory_cap_gb * 2**30
    for n_el, p in ladder.steps:
        est = analysis.system_memory_estimate(n_el, p, cfg.q)
        if est > cap_bytes:
            raise ConfigurationError(
                f"ladder step (n_el={n_el}, p={p}) is estimated to need "
                f"{est / 2**30:.2f} GiB > cap {cfg.memory_cap_gb} GiB; raise "
                "convergence.memory_cap_gb to proceed"
            )
    problem = cfg.make_problem()
    fields = analysis.run_ladder(problem, ladder, method="galerkin")
    distances = analysis.ladder_distances(fields)

    rows = []
    for k, dist in enumerate(distances):
        n0, p0 = ladder.steps[k]
        n1, p1 = ladder.steps[k + 1]
        rows.append([k + 1, n0, p0, n1, p1, dist])
    path_d = out / "ladder_distances.csv"
    fileio.write_csv(path_d, _header(cfg),
                     ["step", "n_el_from", "p_from", "n_el_to", "p_to", "v_norm_distance"],
                     rows)
    path_r = out / "reference_solution.csv"
    fileio.write_field_csv(path_r, fields[-1], cfg.kappa, extra_header=_header(cfg))
    return [path_d, path_r]


# -- compare -------------------------------------------------------------------


def cmd_compare(cfg: RunConfig, out: Path) -> list[Path]:
    problem = cfg.make_problem()
    if cfg.compare_reference == "analytic":
        if cfg.q != 1 or len(cfg.regions) != 1:
            raise ConfigurationError(
                "compare.reference = 'analytic' requires a single-region q = 1 problem; "
                "run the convergence experiment and point compare.reference at its "
                "reference_solution.csv"
            )
        reference = analysis.analytic_reference_coeffs(problem)
        ref_field = sgfem.CoefficientField(basis=problem.basis, mesh=problem.mesh,
                                           coeffs=reference)
    else:
        ref_path = Path(cfg.compare_reference)
        if not ref_path.exists():
            raise ConfigurationError(
                f"reference file {ref_path} not found; run the convergence experiment "
                "first to produce reference_solution.csv"
            )
        loaded, _ = fileio.read_field_csv(ref_path)
        reference = analysis.restrict_reference(loaded, problem.basis, problem.mesh)
        ref_field = sgfem.CoefficientField(basis=problem.basis, mesh=problem.mesh,
                                           coeffs=reference)

    methods = cfg.methods()
    fields = {m: sgfem.solve_problem(problem, m) for m in methods}
    errors = {m: analysis.nodal_coefficient_errors(fields[m], reference) for m in methods}

    written = []
    nodes = problem.mesh.interior_nodes
    orders = problem.basis.total_orders()
    cols = ["node", "x", "rank", "multi_index", "order"] + [f"err_{m}" for m in methods]
    rows = []
    for i, x in enumerate(nodes):
        for r, m_idx in enumerate(problem.basis.indices):
            rows.append([i + 1, x, r, " ".join(map(str, m_idx)), int(orders[r])]
                        + [errors[m].errors[i, r] for m in methods])
    path = out / "coeff_errors.csv"
    fileio.write_csv(path, _header(cfg), cols, rows)
    written.append(path)

    ref_mean = ref_field.mean()
    ref_var = ref_field.variance()
    cols = ["node", "x", "mean_ref", "var_ref"]
    for m in methods:
        cols += [f"mean_err_{m}", f"var_err_{m}"]
    rows = []
    for i, x in enumerate(nodes):
        row = [i + 1, x, ref_mean[i], ref_var[i]]
        for m in methods:
            row += [abs(fields[m].mean()[i] - ref_mean[i]),
                    abs(fields[m].variance()[i] - ref_var[i])]
        rows.append(row)
    path = out / "stats_errors.csv"
    fileio.write_csv(path, _header(cfg), cols, rows)
    written.append(path)

    lines = ["maximum nodal gPC coefficient errors by total order", ""]
    per_order = {m: errors[m].per_order_max() for m in methods}
    for d in range(problem.basis.p + 1):
        parts = [f"order {d}:"]
        for m in methods:
            parts.append(f"{m} = {per_order[m][d]:.6e}")
        if "galerkin" in methods and "vms" in methods and per_order["vms"][d] > 0:
            parts.append(f"ratio = {per_order['galerkin'][d] / per_order['vms'][d]:.2f}")
        lines.append("  ".join(parts))
    lines.append("")
    for m in methods:
        lines.append(f"max over all coefficients ({m}): {errors[m].max_error():.6e}")
    if "galerkin" in methods and "vms" in methods and errors["vms"].max_error() > 0:
        ratio = errors["galerkin"].max_error() / errors["vms"].max_error()
        lines.append(f"overall max-error ratio galerkin/vms: {ratio:.2f}")
    path = out / "summary.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for hline in _header(cfg):
            fh.write(f"# {hline}\n")
        fh.write("\n".join(lines) + "\n")
    written.append(path)
    return written


# -- tau-table -----------------------------------------------------------------


def cmd_tau_table(cfg: RunConfig, out: Path) -> list[Path]:
    rows = []
    for h, beta, kappa in itertools.product(cfg.tau_h, cfg.tau_beta, cfg.tau_kappa):
        pe = h * beta / (2.0 * kappa)
        t_formula = tau(h, beta, kappa)
        kernel = GreensKernel(kappa=kappa, beta=beta, a=0.0, b=h)
        t_quad = greens_double_integral(kernel) / h
        rel = abs(t_formula - t_quad) / t_formula
        rows.append([h, beta, kappa, pe, t_formula, t_quad, rel])
    path = out / "tau.csv"
    fileio.write_csv(path, _header(cfg),
                     ["h", "beta", "kappa", "peclet", "tau", "tau_greens_quadrature",
                      "rel_difference"],
                     rows)
    return [path]


# -- mc-validate ---------------------------------------------------------------


def cmd_mc_validate(cfg: RunConfig, out: Path) -> list[Path]:
    problem = cfg.make_problem()
    mc = analysis.mc_reference(problem, cfg.mc_samples, cfg.seed)
    methods = cfg.methods()
    fields = {m: sgfem.solve_problem(problem, m) for m in methods}

    cols = ["node", "x", "mc_mean", "mc_std_error", "mc_variance"]
    for m in methods:
        cols += [f"mean_{m}", f"abs_diff_{m}", f"within_3se_{m}"]
    rows = []
    for i, x in enumerate(problem.mesh.interior_nodes):
        row = [i + 1, x, mc.mean[i], mc.std_error[i], mc.variance[i]]
        for m in methods:
            diff = abs(fields[m].mean()[i] - mc.mean[i])
            row += [fields[m].mean()[i], diff, diff <= 3.0 * mc.std_error[i]]
        rows.append(row)
    path = out / "mc_validation.csv"
    fileio.write_csv(path, _header(cfg, [f"samples = {cfg.mc_samples}", f"seed = {cfg.seed}"]),
                     cols, rows)
    return [path]


if __name__ == "__main__":
    sys.exit(main())
