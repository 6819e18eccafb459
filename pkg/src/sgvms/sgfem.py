"""Assembly and solution of the coupled stochastic Galerkin system.

Unknowns are gPC coefficients at interior mesh nodes, flattened node-major:
flat = node * N_s + rank(m) with ranks in graded-lex order.  Each element
couples only the gPC modes that differ in its region's active coordinate, so
the stochastic blocks are sparse; the physical coupling stays tridiagonal.

The "vms" method adds the residual-based stabilization produced by the
element Green's function model of the fine scales: a streamline-diffusion
block weighted by E[tau beta^2 Phi_m Phi_n] and a consistent right-hand-side
term weighted by E[tau beta f Phi_m].  For p = 0 and a deterministic
advection map this reduces to classical SUPG.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .deterministic import tau
from .errors import ConfigurationError, SolverError
from . import fem
from .fem import Mesh1D
from .gpc import (
    GpcBasis,
    StochasticQuadrature,
    active_coordinate_pairs,
    default_node_count,
    univariate_weighted_matrix,
    univariate_weighted_vector,
    weighted_gram,
)
from .problem import AdeProblem

METHODS = ("galerkin", "vms")


@dataclass
class CoefficientField:
    """gPC coefficients of a discrete stochastic field, one row per interior node."""

    basis: GpcBasis
    mesh: Mesh1D
    coeffs: np.ndarray
    solve_residual: float | None = None

    def __post_init__(self):
        expected = (self.mesh.n_interior, self.basis.size)
        if self.coeffs.shape != expected:
            raise ValueError(f"coefficient array must have shape {expected}, got {self.coeffs.shape}")

    def mean(self) -> np.ndarray:
        """E[u] at interior nodes: the zero-mode coefficients."""
        return self.coeffs[:, 0].copy()

    def variance(self) -> np.ndarray:
        """Var[u] at interior nodes: sum of squared non-zero-mode coefficients."""
        return np.sum(self.coeffs[:, 1:] ** 2, axis=1)

    def nodal_values(self, xi) -> np.ndarray:
        """Realization at all mesh nodes (boundary values are 0).

        xi may be a single point (q,) or a batch (npts, q); the result is
        (n_el+1,) or (npts, n_el+1) accordingly.
        """
        xi_arr = np.atleast_2d(np.asarray(xi, dtype=float))
        phi = self.basis.eval_all(xi_arr)            # (npts, Ns)
        interior = phi @ self.coeffs.T               # (npts, Nd)
        full = np.zeros((xi_arr.shape[0], self.mesh.n_el + 1))
        full[:, 1:-1] = interior
        return full[0] if np.asarray(xi).ndim == 1 else full

    def evaluate(self, x, xi) -> float | np.ndarray:
        """Piecewise-linear-in-x, polynomial-in-xi reconstruction."""
        vals = self.nodal_values(xi)
        if vals.ndim == 1:
            out = np.interp(np.asarray(x, dtype=float), self.mesh.nodes, vals)
        else:
            out = np.stack([np.interp(np.asarray(x, dtype=float), self.mesh.nodes, v) for v in vals])
        return out if np.ndim(out) else float(out)


@dataclass
class CoupledSystem:
    """Sparse coupled system with (node, mode) <-> flat row bookkeeping."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    basis: GpcBasis
    mesh: Mesh1D
    method: str

    @property
    def size(self) -> int:
        return self.rhs.size

    def flat_index(self, node: int, rank: int) -> int:
        """Row of interior node `node` (0-based) and gPC rank `rank`."""
        return node * self.basis.size + rank

    def node_and_rank(self, flat: int) -> tuple[int, int]:
        return divmod(flat, self.basis.size)


def _region_weights(problem: AdeProblem, region_index: int, h: float, method: str,
                    tensor_debug: bool = False):
    """Stochastic integrals of one region at element size h.

    Returns (W_beta, W_stab, load_stab) where W_* are (p+1)x(p+1) univariate
    matrices in the active coordinate and load_stab is the (p+1,) vector
    E[tau beta f phi_d]; the vms entries are None for plain Galerkin.

    With tensor_debug=True the same quantities are computed as full
    N_s x N_s / N_s-sized tensors by tensor-product quadrature over all q
    coordinates (slow; used to validate the factorized path).
    """
    region = problem.beta.regions[region_index]
    basis = problem.basis
    p = basis.p
    kappa = problem.kappa
    f_val = problem.f_of_region(region_index)

    n_beta = default_node_count(p, region.map_degree)
    # tau(xi) is smooth but not polynomial; keep a generous fixed rule.
    n_tau = max(p + 6, default_node_count(p, region.map_degree + 2), 16)

    def beta_w(t):
        vals = np.asarray(region.map(np.asarray(t, dtype=float)), dtype=float)
        if np.any(vals <= 0.0):
            raise ConfigurationError(
                f"advection map {region.map_name} is not positive on (0,1); "
                "the stabilization parameter is undefined"
            )
        return vals

    def tau_beta2_w(t):
        b = beta_w(t)
        return tau(h, b, kappa) * b * b

    def tau_beta_f_w(t):
        b = beta_w(t)
        return tau(h, b, kappa) * b * f_val

    if not tensor_debug:
        W_beta = univariate_weighted_matrix(beta_w, p, n_beta)
        if method == "vms":
            W_stab = univariate_weighted_matrix(tau_beta2_w, p, n_tau)
            load_stab = univariate_weighted_vector(tau_beta_f_w, p, n_tau)
        else:
            W_stab, load_stab = None, None
        return W_beta, W_stab, load_stab

    k = region.coordinate - 1
    quad = StochasticQuadrature.tensor_gauss(basis.q, max(n_beta, n_tau))
    W_beta = weighted_gram(basis, lambda xi: beta_w(xi[:, k]), quad)
    if method == "vms":
        W_stab = weighted_gram(basis, lambda xi: tau_beta2_w(xi[:, k]), quad)
        phi = basis.eval_all(quad.nodes)
        load_stab = phi.T @ (quad.weights * tau_beta_f_w(quad.nodes[:, k]))
    else:
        W_stab, load_stab = None, None
    return W_beta, W_stab, load_stab


def assemble(problem: AdeProblem, method: str = "vms",
             tensor_debug: bool = False) -> CoupledSystem:
    """Assemble the coupled stochastic Galerkin system ("galerkin" or "vms")."""
    if method not in METHODS:
        raise ConfigurationError(f"method must be one of {METHODS}, got {method!r}")
    basis = problem.basis
    mesh = problem.mesh
    ns = basis.size
    nd = mesh.n_interior
    size = nd * ns

    # Per-coordinate mode coupling pattern and the ranks of the pure modes
    # (d * e_k) that carry the load terms.
    pair_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}
    pure_rank_cache: dict[int, np.ndarray] = {}
    for k in {r.coordinate - 1 for r in problem.beta.regions}:
        pair_cache[k] = active_coordinate_pairs(basis, k)
        pure = np.zeros(basis.p + 1, dtype=int)
        for d in range(basis.p + 1):
            m = [0] * basis.q
            m[k] = d
            pure[d] = basis.rank(m)
        pure_rank_cache[k] = pure

    weight_cache: dict[tuple[int, float], tuple] = {}

    rows_acc: list[np.ndarray] = []
    cols_acc: list[np.ndarray] = []
    vals_acc: list[np.ndarray] = []
    rhs = np.zeros(size)
    mode_ranks = np.arange(ns)

    for e in range(mesh.n_el):
        h = float(mesh.h[e])
        ridx = int(problem.element_regions[e])
        region = problem.beta.regions[ridx]
        k = region.coordinate - 1
        key = (ridx, h)
        if key not in weight_cache:
            weight_cache[key] = _region_weights(problem, ridx, h, method, tensor_debug)
        W_beta, W_stab, load_stab = weight_cache[key]

        pr, pc, da, db = pair_cache[k]
        if tensor_debug:
            adv_vals = W_beta[pr, pc]
            stab_vals = W_stab[pr, pc] if method == "vms" else None
        else:
            adv_vals = W_beta[da, db]
            stab_vals = W_stab[da, db] if method == "vms" else None

        dof = (e - 1, e)  # interior indices of nodes e, e+1; -1 marks boundary
        for a in (0, 1):
            if dof[a] < 0 or dof[a] >= nd:
                continue
            base_r = dof[a] * ns
            # Right-hand side: deterministic source only loads the zero mode.
            rhs[base_r] += problem.f_of_element(e) * h / 2.0
            if method == "vms":
                if tensor_debug:
                    rhs[base_r + mode_ranks] += fem.LOAD_GRAD[a] * load_stab
                else:
                    rhs[base_r + pure_rank_cache[k]] += fem.LOAD_GRAD[a] * load_stab
            for b in (0, 1):
                if dof[b] < 0 or dof[b] >= nd:
                    continue
                base_c = dof[b] * ns
                # Diffusion: diagonal over modes by orthonormality.
                rows_acc.append(base_r + mode_ranks)
                cols_acc.append(base_c + mode_ranks)
                vals_acc.append(np.full(ns, problem.kappa / h * fem.GRAD_GRAD[a, b]))
                # Advection: active-coordinate mode coupling.
                rows_acc.append(base_r + pr)
                cols_acc.append(base_c + pc)
                vals_acc.append(fem.GRAD_TEST[a, b] / 2.0 * adv_vals)
                if method == "vms":
                    rows_acc.append(base_r + pr)
                    cols_acc.append(base_c + pc)
                    vals_acc.append(fem.GRAD_GRAD[a, b] / h * stab_vals)

    matrix = sp.coo_matrix(
        (np.concatenate(vals_acc), (np.concatenate(rows_acc), np.concatenate(cols_acc))),
        shape=(size, size),
    ).tocsr()
    if not np.all(np.isfinite(matrix.data)):
        raise SolverError("assembly produced non-finite matrix entries")
    return CoupledSystem(matrix=matrix, rhs=rhs, basis=basis, mesh=mesh, method=method)


def solve(system: CoupledSystem, solver: str = "direct",
          rtol: float = 1e-10) -> CoefficientField:
    """Solve the coupled system and report the relative residual on the result."""
    if solver == "direct":
        u = spla.spsolve(system.matrix, system.rhs)
    elif solver == "iterative":
        ilu = spla.spilu(system.matrix.tocsc(), drop_tol=1e-8, fill_factor=20)
        precond = spla.LinearOperator(system.matrix.shape, ilu.solve)
        u, info = spla.gmres(system.matrix, system.rhs, M=precond,
                             rtol=rtol, atol=0.0, maxiter=2000)
        if info != 0:
            res = np.linalg.norm(system.matrix @ u - system.rhs)
            raise SolverError(f"gmres did not converge (info={info}, residual={res:.3e})")
    else:
        raise ConfigurationError(f"solver must be 'direct' or 'iterative', got {solver!r}")

    rhs_norm = np.linalg.norm(system.rhs)
    residual = np.linalg.norm(system.matrix @ u - system.rhs)
    rel = residual / rhs_norm if rhs_norm > 0 else residual
    if not np.all(np.isfinite(u)):
        raise SolverError(f"solve produced non-finite values (residual {residual:.3e})")
    return CoefficientField(
        basis=system.basis, mesh=system.mesh,
        coeffs=u.reshape(system.mesh.n_interior, system.basis.size),
        solve_residual=float(rel),
    )


def solve_problem(problem: AdeProblem, method: str = "vms", solver: str = "direct") -> CoefficientField:
    return solve(assemble(problem, method), solver=solver)
