"""Error metrics, convergence ladders, and statistical cross-checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .deterministic import exact_solution, solve_realization
from .errors import ConfigurationError, UnsupportedConfigurationError
from .fem import Mesh1D
from .gpc import GpcBasis, gauss_rule_01, legendre_01
from .problem import AdeProblem
from .sgfem import CoefficientField, assemble, solve

NESTING_TOL = 1e-10


@dataclass(frozen=True)
class DiscretizationLadder:
    """Ordered (n_el, p) pairs, each step refining in mesh or gPC order."""

    steps: tuple[tuple[int, int], ...]

    def __post_init__(self):
        steps = tuple((int(n), int(p)) for n, p in self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise ConfigurationError("ladder must have at least one step")
        for (n0, p0), (n1, p1) in zip(steps, steps[1:]):
            if n1 < n0 or p1 < p0 or (n1 == n0 and p1 == p0):
                raise ConfigurationError(
                    f"ladder must refine at each step: ({n0},{p0}) -> ({n1},{p1})"
                )


# Coarsest step matches the benchmark discretization; the last step is the
# converged reference.
PAPER_LADDER = DiscretizationLadder(steps=((20, 2), (40, 3), (80, 4), (160, 5), (320, 6)))


def _node_positions(coarse: Mesh1D, fine: Mesh1D) -> np.ndarray:
    """Indices of the coarse nodes inside the fine node array (meshes nested)."""
    idx = np.searchsorted(fine.nodes, coarse.nodes)
    idx = np.clip(idx, 0, fine.nodes.size - 1)
    left_ok = np.abs(fine.nodes[idx] - coarse.nodes) <= NESTING_TOL * max(1.0, coarse.L)
    idx_alt = np.clip(idx - 1, 0, fine.nodes.size - 1)
    alt_ok = np.abs(fine.nodes[idx_alt] - coarse.nodes) <= NESTING_TOL * max(1.0, coarse.L)
    if not np.all(left_ok | alt_ok):
        raise ConfigurationError("meshes are not nested; no common refinement")
    return np.where(left_ok, idx, idx_alt)


def embed_field(field: CoefficientField, basis: GpcBasis, mesh: Mesh1D) -> CoefficientField:
    """Represent a field exactly on a refining (mesh, basis) pair.

    Piecewise-linear interpolation onto the finer nested mesh and zero-padding
    into the larger gPC basis are both exact, so the embedded field equals the
    original as a function."""
    if basis.q != field.basis.q:
        raise ConfigurationError("cannot embed across different stochastic dimensions")
    if basis.p < field.basis.p:
        raise ConfigurationError("target basis must have p at least as large")
    _node_positions(field.mesh, mesh)  # nesting check
    full = np.zeros((field.mesh.n_el + 1, field.basis.size))
    full[1:-1] = field.coeffs
    interp = np.empty((mesh.n_interior, field.basis.size))
    for m in range(field.basis.size):
        interp[:, m] = np.interp(mesh.interior_nodes, field.mesh.nodes, full[:, m])
    coeffs = np.zeros((mesh.n_interior, basis.size))
    for r, idx in enumerate(field.basis.indices):
        coeffs[:, basis.rank(idx)] = interp[:, r]
    return CoefficientField(basis=basis, mesh=mesh, coeffs=coeffs)


def v_norm(field_a: CoefficientField, field_b: CoefficientField) -> float:
    """Energy norm sqrt(E[int |grad(a - b)|^2 dx]) of the difference.

    field_b must refine (or equal) field_a's discretization.  For orthonormal
    modes the expectation splits into a sum of H1 seminorms of the coefficient
    functions, each exact for piecewise linears."""
    a = embed_field(field_a, field_b.basis, field_b.mesh)
    diff = np.zeros((field_b.mesh.n_el + 1, field_b.basis.size))
    diff[1:-1] = a.coeffs - field_b.coeffs
    slopes = np.diff(diff, axis=0) / field_b.mesh.h[:, None]
    return float(np.sqrt(np.sum(slopes**2 * field_b.mesh.h[:, None])))


def restrict_reference(reference: CoefficientField, basis: GpcBasis, mesh: Mesh1D) -> np.ndarray:
    """Reference gPC coefficients restricted to a coarser (basis, mesh) pair."""
    if reference.basis.q != basis.q:
        raise ConfigurationError("reference has a different stochastic dimension")
    if reference.basis.p < basis.p:
        raise ConfigurationError("reference basis must contain the field's modes")
    pos = _node_positions(mesh, reference.mesh)[1:-1] - 1
    if np.any(pos < 0) or np.any(pos >= reference.mesh.n_interior):
        raise ConfigurationError("field nodes must be interior to the reference mesh")
    ranks = [reference.basis.rank(m) for m in basis.indices]
    return reference.coeffs[np.ix_(pos, ranks)]


def reference_on(field: CoefficientField, reference: CoefficientField) -> np.ndarray:
    return restrict_reference(reference, field.basis, field.mesh)


@dataclass(frozen=True)
class CoefficientErrors:
    """Absolute nodal gPC coefficient errors |u - reference| per (node, mode)."""

    basis: GpcBasis
    mesh: Mesh1D
    errors: np.ndarray

    def max_error(self) -> float:
        return float(np.max(self.errors))

    def per_order_max(self) -> dict[int, float]:
        orders = self.basis.total_orders()
        return {
            int(d): float(np.max(self.errors[:, orders == d]))
            for d in range(self.basis.p + 1)
        }


def nodal_coefficient_errors(
    field: CoefficientField, reference: CoefficientField | np.ndarray
) -> CoefficientErrors:
    """Errors of the nodal gPC coefficients against a refined or analytic reference."""
    if isinstance(reference, CoefficientField):
        ref = reference_on(field, reference)
    else:
        ref = np.asarray(reference, dtype=float)
        if ref.shape != field.coeffs.shape:
            raise ConfigurationError(
                f"reference array shape {ref.shape} does not match field {field.coeffs.shape}"
            )
    return CoefficientErrors(
        basis=field.basis, mesh=field.mesh, errors=np.abs(field.coeffs - ref)
    )


def analytic_reference_coeffs(problem: AdeProblem, n_quad: int = 64) -> np.ndarray:
    """Exact nodal gPC coefficients for the single-region, q = 1 problem.

    Uses the closed-form solution at each realization and projects onto the
    basis by Gauss quadrature: u_hat_m(x_i) = E[u(x_i, xi) phi_m(xi)]."""
    if problem.basis.q != 1 or len(problem.beta.regions) != 1:
        raise UnsupportedConfigurationError(
            "analytic reference requires a single region and q = 1"
        )
    region = problem.beta.regions[0]
    t, w = gauss_rule_01(n_quad)
    phi = legendre_01(problem.basis.p, t)  # (n, p+1)
    nodes = problem.mesh.interior_nodes
    f_val = problem.f_of_region(0)
    u = np.empty((t.size, nodes.size))
    for j, tj in enumerate(t):
        u[j] = exact_solution(problem.kappa, float(region.map(tj)), f_val,
                              problem.L, nodes)
    # coeffs[i, m] = sum_j w_j u_j(x_i) phi_m(t_j)
    return (u * w[:, None]).T @ phi


@dataclass(frozen=True)
class McReference:
    """Seeded Monte Carlo estimate of nodal mean/variance with standard errors."""

    mean: np.ndarray
    variance: np.ndarray
    std_error: np.ndarray
    n_samples: int
    seed: int


def mc_sample_points(q: int, n_samples: int, seed: int) -> np.ndarray:
    """Reproducible i.i.d. uniform draws; sample s depends only on (seed, s),
    so results are independent of execution order or thread count."""
    out = np.empty((n_samples, q))
    for s in range(n_samples):
        out[s] = np.random.default_rng((seed, s)).random(q)
    return out


def mc_reference(problem: AdeProblem, n_samples: int, seed: int,
                 stabilized: bool = True) -> McReference:
    """Per-node sample mean/variance of the realization solves (interior nodes)."""
    if n_samples < 2:
        raise ConfigurationError("Monte Carlo needs at least 2 samples")
    draws = mc_sample_points(problem.basis.q, n_samples, seed)
    acc = np.zeros(problem.mesh.n_interior)
    acc2 = np.zeros(problem.mesh.n_interior)
    for s in range(n_samples):
        u = solve_realization(problem, draws[s], stabilized=stabilized)[1:-1]
        acc += u
        acc2 += u * u
    mean = acc / n_samples
    variance = (acc2 - n_samples * mean**2) / (n_samples - 1)
    variance = np.maximum(variance, 0.0)
    return McReference(
        mean=mean, variance=variance,
        std_error=np.sqrt(variance / n_samples),
        n_samples=n_samples, seed=seed,
    )


def run_ladder(problem: AdeProblem, ladder: DiscretizationLadder,
               method: str = "galerkin", solver: str = "direct"):
    """Solve the problem on every ladder step; returns the list of fields."""
    fields = []
    for n_el, p in ladder.steps:
        prob = problem.with_mesh(Mesh1D.uniform(problem.L, n_el)).with_basis(
            GpcBasis(q=problem.basis.q, p=p)
        )
        fields.append(solve(assemble(prob, method), solver=solver))
    return fields


def ladder_distances(fields: Sequence[CoefficientField]) -> list[float]:
    """Energy-norm distance between successive ladder solutions."""
    return [v_norm(a, b) for a, b in zip(fields, fields[1:])]


def system_memory_estimate(n_el: int, p: int, q: int) -> int:
    """Crude bytes bound for the direct solve: size x bandwidth x 16."""
    from math import comb

    ns = comb(q + p, q)
    size = (n_el - 1) * ns
    bandwidth = 2 * ns
    return 16 * size * bandwidth
