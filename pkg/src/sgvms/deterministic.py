"""Deterministic building blocks at a frozen realization of the random inputs.

Everything here treats the advection speed as a plain number: the closed-form
solution of the constant-coefficient advection-diffusion two-point problem,
the Green's function of that operator on an interval, the SUPG/VMS
stabilization parameter tau, and the stabilized FEM solve of one realization.

All exponentials are evaluated in shifted form (arguments <= 0) so that
strongly advection-dominated cases (element Peclet numbers of 10^3 and more)
never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import SolverError
from .fem import Mesh1D
from .problem import AdeProblem

# Below this mesh Peclet number the coth expression loses digits to
# cancellation; the Taylor expansion is exact to machine precision there.
TAU_SERIES_THRESHOLD = 1e-4


def tau(h, beta, kappa):
    """Stabilization parameter tau = (h / 2 beta) (coth(Pe) - 1/Pe), Pe = h beta / 2 kappa.

    Equals the element-averaged double integral of the element Green's
    function, which is what makes the stabilized scheme nodally exact for
    constant coefficients.  Vectorized over any of the arguments.
    """
    h = np.asarray(h, dtype=float)
    beta = np.asarray(beta, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if np.any(h <= 0) or np.any(kappa <= 0) or np.any(beta <= 0):
        raise ValueError("tau requires h > 0, beta > 0, kappa > 0")
    pe = h * beta / (2.0 * kappa)
    pe_safe = np.maximum(pe, TAU_SERIES_THRESHOLD)  # keep 1/tanh well-defined
    direct = (h / (2.0 * beta)) * (1.0 / np.tanh(pe_safe) - 1.0 / pe_safe)
    series = (h / (2.0 * beta)) * (pe / 3.0 - pe**3 / 45.0 + 2.0 * pe**5 / 945.0)
    out = np.where(pe < TAU_SERIES_THRESHOLD, series, direct)
    return out if out.ndim else float(out)


def exact_solution(kappa: float, beta: float, f: float, L: float, x):
    """Closed-form solution of -kappa u'' + beta u' = f on (0, L), u(0)=u(L)=0.

    u(x) = (f/beta) (x - L (e^{beta x/kappa} - 1) / (e^{beta L/kappa} - 1)),
    with the exponential ratio factored so no intermediate overflows; the
    beta = 0 limit is the parabola f x (L - x) / (2 kappa).
    """
    x = np.asarray(x, dtype=float)
    if beta == 0.0:
        out = f * x * (L - x) / (2.0 * kappa)
    else:
        r = beta / kappa
        if beta > 0:
            ratio = np.exp(r * (x - L)) * np.expm1(-r * x) / np.expm1(-r * L)
        else:
            ratio = np.expm1(r * x) / np.expm1(r * L)
        out = (f / beta) * (x - L * ratio)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GreensKernel:
    """Green's function of -kappa g'' + beta g' = delta(x - x_src) on (a, b)
    with zero endpoint values.

    Continuous in x with a slope jump of -1/kappa across x = x_src.  Built
    from the homogeneous solutions {1, e^{beta x / kappa}} in expm1 form.
    """

    kappa: float
    beta: float
    a: float
    b: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"diffusivity must be positive, got {self.kappa}")
        if self.b <= self.a:
            raise ValueError(f"empty interval ({self.a}, {self.b})")

    def eval(self, x, x_src):
        """g(x, x_src), broadcasting over both arguments; 0 on the boundary."""
        x = np.asarray(x, dtype=float)
        x_src = np.asarray(x_src, dtype=float)
        eps = 1e-12 * (self.b - self.a)
        if np.any(x < self.a - eps) or np.any(x > self.b + eps):
            raise ValueError("field point outside the kernel interval")
        if np.any(x_src < self.a - eps) or np.any(x_src > self.b + eps):
            raise ValueError("source point outside the kernel interval")
        x = np.clip(x, self.a, self.b)
        x_src = np.clip(x_src, self.a, self.b)

        if self.beta == 0.0:
            scale = 1.0 / (self.kappa * (self.b - self.a))
            left = (x - self.a) * (self.b - x_src) * scale
            right = (x_src - self.a) * (self.b - x) * scale
            out = np.where(x <= x_src, left, right)
        elif self.beta < 0.0:
            # Mirror symmetry: reversing the advection direction reflects the
            # kernel about the interval midpoint.
            mirrored = GreensKernel(self.kappa, -self.beta, self.a, self.b)
            out = mirrored.eval(self.a + self.b - x, self.a + self.b - x_src)
        else:
            r = self.beta / self.kappa
            denom = self.beta * np.expm1(r * (self.a - self.b))
            # All exponents are <= 0 on the branch where they are used; the
            # clip only silences spurious overflow in the discarded branch.
            e_xs = np.expm1(np.minimum(r * (x - x_src), 0.0))
            e_xb = np.expm1(np.minimum(r * (x - self.b), 0.0))
            left = (
                np.expm1(r * (x_src - self.b))
                * (e_xs - np.expm1(r * (self.a - x_src)))
                / denom
            )
            right = -np.expm1(r * (self.a - x_src)) * e_xb / denom
            out = np.where(x <= x_src, left, right)
        return out if np.ndim(out) else float(out)

    def eval_matrix(self, x_points, src_points) -> np.ndarray:
        """Matrix g(x_i, x_src_j) for 1-D arrays of field and source points."""
        x = np.asarray(x_points, dtype=float)[:, None]
        s = np.asarray(src_points, dtype=float)[None, :]
        return self.eval(x, s)


def element_greens_kernel(kappa: float, beta: float, x_left: float, x_right: float) -> GreensKernel:
    """Green's function restricted to one element with zero endpoint values."""
    return GreensKernel(kappa=kappa, beta=beta, a=x_left, b=x_right)


def _graded_breakpoints(a: float, b: float, layer: float) -> np.ndarray:
    """Panel breakpoints geometrically refined toward both endpoints, starting
    at the boundary-layer scale `layer`."""
    width = b - a
    step = min(layer, width / 4.0)
    offsets = [0.0]
    while offsets[-1] + step < width / 2.0:
        offsets.append(offsets[-1] + step)
        step *= 2.0
    from_left = a + np.asarray(offsets)
    from_right = b - np.asarray(offsets)
    return np.unique(np.concatenate([from_left, from_right, [a, b]]))


def greens_double_integral(kernel: GreensKernel, n_gauss: int = 20) -> float:
    """Double integral of the kernel over its interval in both arguments.

    Composite Gauss quadrature on panels graded toward the endpoints (to
    resolve the boundary layers at high Peclet number); the inner integral is
    additionally split at the slope-jump line x = x_src.
    """
    a, b = kernel.a, kernel.b
    layer = kernel.kappa / abs(kernel.beta) if kernel.beta != 0.0 else (b - a)
    breaks = _graded_breakpoints(a, b, layer)
    t, w = np.polynomial.legendre.leggauss(n_gauss)

    def panel_nodes(points: np.ndarray):
        lo, hi = points[:-1], points[1:]
        mid = 0.5 * (lo + hi)[:, None]
        half = 0.5 * (hi - lo)[:, None]
        return (mid + half * t[None, :]).ravel(), (half * w[None, :]).ravel()

    x_src_nodes, x_src_weights = panel_nodes(breaks)
    total = 0.0
    for xs, ws in zip(x_src_nodes, x_src_weights):
        # The kernel has layers hugging x_src as well as the endpoints, so the
        # inner panels are graded toward all three.
        inner_breaks = np.unique(np.concatenate([
            _graded_breakpoints(a, xs, layer) if xs - a > 4 * np.finfo(float).eps else [a, xs],
            _graded_breakpoints(xs, b, layer) if b - xs > 4 * np.finfo(float).eps else [xs, b],
        ]))
        xn, wn = panel_nodes(inner_breaks)
        total += ws * float(np.sum(wn * kernel.eval(xn, xs)))
    return total


def greens_double_integral_adaptive(kernel: GreensKernel, epsrel: float = 1e-11) -> float:
    """Nested adaptive quadrature of the kernel; slow reference for the
    composite rule above."""

    def inner(x_src: float) -> float:
        val, _ = scipy.integrate.quad(
            lambda x: kernel.eval(x, x_src), kernel.a, kernel.b,
            points=[x_src], limit=400, epsabs=0.0, epsrel=epsrel,
        )
        return val

    val, _ = scipy.integrate.quad(
        inner, kernel.a, kernel.b, limit=400, epsabs=0.0, epsrel=epsrel
    )
    return val


def realization_coefficients(problem: AdeProblem, xi: Sequence[float], mesh: Mesh1D | None = None):
    """Per-element advection speeds and source values at a frozen realization."""
    prob = problem if mesh is None else problem.with_mesh(mesh)
    xi = np.asarray(xi, dtype=float)
    beta_el = np.empty(prob.mesh.n_el)
    f_el = np.empty(prob.mesh.n_el)
    for e in range(prob.mesh.n_el):
        region = prob.element_region(e)
        beta_el[e] = float(region.map(xi[region.coordinate - 1]))
        f_el[e] = prob.f_of_element(e)
    return prob.mesh, beta_el, f_el


def tridiagonal_system(mesh: Mesh1D, kappa: float, beta_el: np.ndarray,
                       tau_el: np.ndarray, f_el: np.ndarray):
    """Interior-node tridiagonal system of the (stabilized) deterministic FEM.

    Returns (banded, rhs) with `banded` in scipy.linalg.solve_banded (1, 1)
    layout.  tau_el = 0 gives the plain Galerkin scheme.
    """
    h = mesh.h
    n = mesh.n_interior
    stiff = kappa / h + tau_el * beta_el**2 / h  # diffusion + streamline term

    diag = (stiff[1:] - beta_el[1:] / 2.0) + (stiff[:-1] + beta_el[:-1] / 2.0)
    upper = -stiff[1:] + beta_el[1:] / 2.0            # couples node i -> i+1
    lower = -stiff[:-1] - beta_el[:-1] / 2.0          # couples node i -> i-1
    rhs = (f_el[1:] * h[1:] / 2.0 - tau_el[1:] * beta_el[1:] * f_el[1:]) + (
        f_el[:-1] * h[:-1] / 2.0 + tau_el[:-1] * beta_el[:-1] * f_el[:-1]
    )

    banded = np.zeros((3, n))
    banded[0, 1:] = upper[:-1]
    banded[1, :] = diag
    banded[2, :-1] = lower[1:]
    return banded, rhs


def solve_realization(problem: AdeProblem, xi: Sequence[float], stabilized: bool = True,
                      mesh: Mesh1D | None = None) -> np.ndarray:
    """FEM solution of the deterministic problem at frozen inputs xi.

    With stabilized=True every element uses the exact tau, which makes the
    solution nodally exact for region-wise constant coefficients.  Returns
    nodal values including the (zero) boundary nodes.
    """
    mesh_, beta_el, f_el = realization_coefficients(problem, xi, mesh)
    if stabilized:
        tau_el = tau(mesh_.h, beta_el, problem.kappa)
    else:
        tau_el = np.zeros(mesh_.n_el)
    banded, rhs = tridiagonal_system(mesh_, problem.kappa, beta_el, np.atleast_1d(tau_el), f_el)
    try:
        u = scipy.linalg.solve_banded((1, 1), banded, rhs)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - kappa>0 keeps this regular
        raise SolverError(f"deterministic solve failed: {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise SolverError("deterministic solve produced non-finite values")
    return np.concatenate(([0.0], u, [0.0]))
