"""Explicit fine-scale stochastic Green's operator for the 1D problem.

With nodal Dirac functionals tensored with gPC modes, the fine-scale operator
is the Green's operator minus its interpolation through the coarse
functionals:

    G'(chi) = G(chi) - [G mu^T] M^{-1} [mu G(chi)],
    M[(i,m),(j,n)] = E[Phi_m g_xi(x_i, x_j) Phi_n],

where g_xi is the deterministic Green's function at the realization xi.  All
expectations use one fixed Gauss rule in xi, which makes the two annihilation
identities (G' applied to a dual functional vanishes; coarse gPC coefficients
of G'(chi) vanish at the nodes) hold to solver precision by construction.

Only the constant-in-x, single-random-variable configuration is supported:
multi-region advection would require a variable-coefficient global Green's
function, while the coupled solver covers that case through the element
Green's approximation instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .deterministic import GreensKernel
from .errors import SolverError, UnsupportedConfigurationError
from .fem import Mesh1D, h1_stiffness
from .gpc import GpcBasis, StochasticQuadrature, gauss_rule_01, legendre_01
from .problem import AdeProblem

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class SourceSpec:
    """Dirac source at x_s with a finite gPC profile sum_m coeffs[m] Phi_m."""

    x_s: float
    coeffs: np.ndarray

    def padded(self, size: int) -> np.ndarray:
        c = np.asarray(self.coeffs, dtype=float)
        if c.size > size:
            raise ValueError(f"profile has {c.size} coefficients but the basis only {size}")
        return np.concatenate([c, np.zeros(size - c.size)])


@dataclass
class GreensField:
    """Field values on an (x, xi) render grid, with optional exact nodal
    coarse-coefficient evaluation carried over from the producing operator."""

    x: np.ndarray
    xi: np.ndarray
    values: np.ndarray
    _nodal_coeffs: Callable[[int], np.ndarray] | None = None

    def coarse_coeffs_at(self, interior_node: int) -> np.ndarray:
        """E[Phi_m * field(x_node, .)] for all coarse modes, by Gauss quadrature."""
        if self._nodal_coeffs is None:
            raise ValueError("this field does not carry a nodal coefficient evaluator")
        return self._nodal_coeffs(interior_node)

    def column_at(self, x0: float) -> np.ndarray:
        """Field values over xi at the grid abscissa closest to x0."""
        j = int(np.argmin(np.abs(self.x - x0)))
        return self.values[j]


class FineScaleOperator:
    """Factored form of the fine-scale Green's operator on one basis/mesh."""

    def __init__(self, problem: AdeProblem, n_quad: int = 64):
        if problem.basis.q != 1 or len(problem.beta.regions) != 1:
            raise UnsupportedConfigurationError(
                "the explicit fine-scale operator requires a single region and q = 1"
            )
        self.basis = problem.basis
        self.mesh = problem.mesh
        self.kappa = problem.kappa
        self.beta_map = problem.beta.regions[0].map
        self.n_quad = n_quad

        self.quad_t, self.quad_w = gauss_rule_01(n_quad)
        self.phi_q = legendre_01(self.basis.p, self.quad_t)  # (nq, Ns)
        nodes = self.mesh.interior_nodes
        nd, ns = nodes.size, self.basis.size

        # Kernel matrices over interior nodes at each quadrature realization.
        self._kernels = [self._kernel(t) for t in self.quad_t]
        self._g_nodes = np.stack([k.eval_matrix(nodes, nodes) for k in self._kernels])

        m = np.zeros((nd * ns, nd * ns))
        for w, gw, phi in zip(self.quad_w, self._g_nodes, self.phi_q):
            m += w * np.kron(gw, np.outer(phi, phi))
        self.moment_matrix = m
        cond = np.linalg.cond(m)
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise SolverError(
                f"moment matrix condition estimate {cond:.3e} exceeds {CONDITION_LIMIT:.0e}; "
                "refine the xi quadrature"
            )
        self._lu = scipy.linalg.lu_factor(m)

    def _kernel(self, xi_value: float) -> GreensKernel:
        return GreensKernel(
            kappa=self.kappa, beta=float(self.beta_map(np.asarray(xi_value))),
            a=0.0, b=self.mesh.L,
        )

    def _profile_at(self, source: SourceSpec, t: np.ndarray) -> np.ndarray:
        c = source.padded(self.basis.size)
        return legendre_01(self.basis.p, t) @ _mode_profile(self.basis, c)

    # -- actions -----------------------------------------------------------

    def greens_action(self, source: SourceSpec, x_grid, xi_grid) -> GreensField:
        """G(chi)(x, xi) = g_xi(x, x_s) * profile(xi); the Dirac collapses the
        convolution."""
        x_grid = np.asarray(x_grid, dtype=float)
        xi_grid = np.asarray(xi_grid, dtype=float)
        prof = self._profile_at(source, xi_grid)
        values = np.empty((x_grid.size, xi_grid.size))
        for j, t in enumerate(xi_grid):
            values[:, j] = self._kernel(t).eval(x_grid, source.x_s) * prof[j]
        return GreensField(x=x_grid, xi=xi_grid, values=values)

    def dual_moments(self, source: SourceSpec) -> np.ndarray:
        """[mu G(chi)]_{(j,n)} = E[Phi_n g_xi(x_j, x_s) profile(xi)], flat layout."""
        nodes = self.mesh.interior_nodes
        prof_q = self._profile_at(source, self.quad_t)
        v = np.zeros(nodes.size * self.basis.size)
        for w, gw_k, phi, pr, kern in zip(
            self.quad_w, self._g_nodes, self.phi_q, prof_q, self._kernels
        ):
            g_col = kern.eval(nodes, source.x_s)
            v += w * pr * np.kron(g_col, phi)
        return v

    def fine_action(self, source: SourceSpec, x_grid, xi_grid) -> GreensField:
        """G'(chi) on the render grid, with exact nodal coefficient evaluation."""
        x_grid = np.asarray(x_grid, dtype=float)
        xi_grid = np.asarray(xi_grid, dtype=float)
        nodes = self.mesh.interior_nodes
        nd, ns = nodes.size, self.basis.size

        y = scipy.linalg.lu_solve(self._lu, self.dual_moments(source)).reshape(nd, ns)

        prof = self._profile_at(source, xi_grid)
        phi_render = legendre_01(self.basis.p, xi_grid)  # (nxi, Ns)
        values = np.empty((x_grid.size, xi_grid.size))
        for j, t in enumerate(xi_grid):
            kern = self._kernel(t)
            g_s = kern.eval(x_grid, source.x_s)
            g_n = kern.eval_matrix(x_grid, nodes)
            values[:, j] = g_s * prof[j] - g_n @ (y @ phi_render[j])

        def nodal_coeffs(i: int) -> np.ndarray:
            prof_q = self._profile_at(source, self.quad_t)
            out = np.zeros(ns)
            for w, gw, phi, pr, kern in zip(
                self.quad_w, self._g_nodes, self.phi_q, prof_q, self._kernels
            ):
                val = kern.eval(nodes[i], source.x_s) * pr - gw[i] @ (y @ phi)
                out += w * val * phi
            return out

        return GreensField(x=x_grid, xi=xi_grid, values=values, _nodal_coeffs=nodal_coeffs)

    def dual_source(self, interior_node: int, rank: int) -> SourceSpec:
        """The coarse dual functional mu_{i,m} expressed as a Dirac source."""
        coeffs = np.zeros(self.basis.size)
        coeffs[rank] = 1.0
        return SourceSpec(x_s=float(self.mesh.interior_nodes[interior_node]), coeffs=coeffs)


def _mode_profile(basis: GpcBasis, coeffs: np.ndarray) -> np.ndarray:
    """Map full-basis coefficients to univariate degree coefficients (q = 1)."""
    out = np.zeros(basis.p + 1)
    for r, m in enumerate(basis.indices):
        out[m[0]] += coeffs[r]
    return out


def render_grids(mesh: Mesh1D, points_per_element: int = 10, n_xi: int = 101):
    """Default evaluation grids: nodes plus uniform points in each element, and
    a uniform xi grid on [0, 1].  Render-only; accuracy-critical expectations
    use Gauss rules instead."""
    xs = [mesh.nodes]
    for e in range(mesh.n_el):
        xs.append(np.linspace(mesh.nodes[e], mesh.nodes[e + 1], points_per_element + 2)[1:-1])
    x_grid = np.unique(np.concatenate(xs))
    xi_grid = np.linspace(0.0, 1.0, n_xi)
    return x_grid, xi_grid


@dataclass(frozen=True)
class LocalityMetrics:
    interior_max: float
    exterior_max: float
    ratio: float
    boundary_nodes: tuple[float, ...]
    boundary_coarse_coeffs: tuple[np.ndarray, ...]
    boundary_field_max: tuple[float, ...]


def locality_metrics(field: GreensField, mesh: Mesh1D, source_element: int) -> LocalityMetrics:
    """Interior/exterior maxima of |field| relative to the source element, and
    the coarse gPC coefficients of the field at the element's boundary nodes."""
    x_lo, x_hi = mesh.nodes[source_element], mesh.nodes[source_element + 1]
    inside = (field.x >= x_lo) & (field.x <= x_hi)
    interior_max = float(np.max(np.abs(field.values[inside])))
    exterior_max = float(np.max(np.abs(field.values[~inside]))) if np.any(~inside) else 0.0

    boundary_nodes = []
    coeff_vectors = []
    field_maxima = []
    for g in (source_element, source_element + 1):
        if g == 0 or g == mesh.n_el:
            continue  # domain boundary carries no dual functional
        boundary_nodes.append(float(mesh.nodes[g]))
        coeff_vectors.append(field.coarse_coeffs_at(g - 1))
        field_maxima.append(float(np.max(np.abs(field.column_at(mesh.nodes[g])))))

    return LocalityMetrics(
        interior_max=interior_max,
        exterior_max=exterior_max,
        ratio=exterior_max / interior_max if interior_max > 0 else np.nan,
        boundary_nodes=tuple(boundary_nodes),
        boundary_coarse_coeffs=tuple(coeff_vectors),
        boundary_field_max=tuple(field_maxima),
    )


# -- coarse-scale projection diagnostics ------------------------------------


def project_coarse_modewise(v, dv_dx, basis: GpcBasis, mesh: Mesh1D,
                            quad: StochasticQuadrature, n_gauss_x: int = 8) -> np.ndarray:
    """Coarse projection of v(x, xi) computed one gPC mode at a time.

    Each coefficient function E[Phi_m v] is projected onto the hat space with
    the H1_0 inner product.  Returns nodal coefficients (n_interior, N_s).
    """
    loads = _projection_loads(dv_dx, basis, mesh, quad, n_gauss_x)
    stiff = h1_stiffness(mesh).toarray()
    return np.linalg.solve(stiff, loads)


def project_coarse_tensor(v, dv_dx, basis: GpcBasis, mesh: Mesh1D,
                          quad: StochasticQuadrature, n_gauss_x: int = 8) -> np.ndarray:
    """Coarse projection of v(x, xi) through the full tensor Gram matrix.

    The stochastic Gram factor E[Phi_m Phi_n] is evaluated by quadrature
    rather than assumed to be the identity, so this is an independent route
    to the same projection."""
    loads = _projection_loads(dv_dx, basis, mesh, quad, n_gauss_x)
    stiff = h1_stiffness(mesh).toarray()
    phi = basis.eval_all(quad.nodes)
    gram_s = phi.T @ (phi * quad.weights[:, None])
    full = np.kron(stiff, gram_s)
    sol = np.linalg.solve(full, loads.reshape(-1))
    return sol.reshape(mesh.n_interior, basis.size)


def _projection_loads(dv_dx, basis: GpcBasis, mesh: Mesh1D,
                      quad: StochasticQuadrature, n_gauss_x: int) -> np.ndarray:
    """loads[i, m] = E[Phi_m int Theta_i' dv/dx dx] by Gauss quadrature in x."""
    t, w = np.polynomial.legendre.leggauss(n_gauss_x)
    phi = basis.eval_all(quad.nodes)  # (nxi, Ns)
    loads = np.zeros((mesh.n_interior, basis.size))
    for e in range(mesh.n_el):
        x_lo, x_hi = mesh.nodes[e], mesh.nodes[e + 1]
        h = x_hi - x_lo
        xg = 0.5 * (x_hi + x_lo) + 0.5 * h * t
        wg = 0.5 * h * w
        # int_e dv/dx dx, then E[Phi_m .]: (Ns,)
        dint = np.zeros(basis.size)
        for xq, wq in zip(xg, wg):
            dv = np.asarray(dv_dx(xq, quad.nodes), dtype=float)  # (nxi,)
            dint += wq * (phi.T @ (quad.weights * dv))
        # Theta' = +1/h for the left node's hat, -1/h for the right node's.
        if e >= 1:
            loads[e - 1] += -dint / h
        if e + 1 <= mesh.n_interior:
            loads[e] += dint / h
    return loads
