"""Definition of the stochastic advection-diffusion problem.

The advection field beta(x, xi) is piecewise in x: each region of the domain
is driven by exactly one random coordinate through a scalar map, the default
being beta = 1 + xi_k^2.  Region boundaries must coincide with mesh nodes so
that every element sees a single (random) advection value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .fem import Mesh1D
from .gpc import GpcBasis

ALIGN_TOL = 1e-12

# Named maps usable from config files: name -> (callable on xi_k, polynomial
# degree for quadrature sizing; None marks a non-polynomial map).
BETA_MAPS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], int]] = {
    "one_plus_xi_squared": (lambda t: 1.0 + t * t, 2),
}


@dataclass(frozen=True)
class Region:
    """One advection region [x_min, x_max) driven by coordinate k (1-based)."""

    x_min: float
    x_max: float
    coordinate: int
    map: Callable[[np.ndarray], np.ndarray] = BETA_MAPS["one_plus_xi_squared"][0]
    map_degree: int = 2
    map_name: str = "one_plus_xi_squared"

    @classmethod
    def named(cls, x_min: float, x_max: float, coordinate: int, map_name: str) -> "Region":
        try:
            fn, deg = BETA_MAPS[map_name]
        except KeyError:
            raise ConfigurationError(
                f"unknown beta map {map_name!r}; known: {sorted(BETA_MAPS)}"
            )
        return cls(x_min, x_max, coordinate, map=fn, map_degree=deg, map_name=map_name)


@dataclass(frozen=True)
class BetaField:
    """Piecewise stochastic advection field over a partition of [0, L]."""

    regions: tuple[Region, ...]

    def __post_init__(self):
        regions = tuple(self.regions)
        object.__setattr__(self, "regions", regions)
        if not regions:
            raise ConfigurationError("beta field needs at least one region")
        if regions[0].x_min != 0.0:
            raise ConfigurationError("first region must start at x = 0")
        for a, b in zip(regions, regions[1:]):
            if abs(a.x_max - b.x_min) > ALIGN_TOL:
                raise ConfigurationError(
                    f"regions must partition the domain; gap/overlap at {a.x_max} vs {b.x_min}"
                )
        for r in regions:
            if r.x_max <= r.x_min:
                raise ConfigurationError(f"empty region [{r.x_min}, {r.x_max})")
            if r.coordinate < 1:
                raise ConfigurationError(f"region coordinate must be >= 1, got {r.coordinate}")

    @property
    def x_max(self) -> float:
        return self.regions[-1].x_max

    def min_coordinates(self) -> int:
        return max(r.coordinate for r in self.regions)

    def region_index_at(self, x: float) -> int:
        """Half-open convention: a boundary point belongs to the region on its right,
        except x = L which belongs to the last region."""
        if x < 0.0 or x > self.x_max:
            raise ValueError(f"x = {x} outside domain [0, {self.x_max}]")
        for i, r in enumerate(self.regions):
            if x < r.x_max:
                return i
        return len(self.regions) - 1

    def __call__(self, x: float, xi: Sequence[float]) -> float:
        r = self.regions[self.region_index_at(x)]
        return float(r.map(np.asarray(xi, dtype=float)[r.coordinate - 1]))


def constant_region(value: float, x_min: float, x_max: float, coordinate: int = 1) -> Region:
    """Region whose advection speed ignores the random input (degree-0 map)."""
    return Region(
        x_min, x_max, coordinate,
        map=lambda t, v=float(value): np.full_like(np.asarray(t, dtype=float), v),
        map_degree=0, map_name=f"constant({value})",
    )


def single_region_field(L: float = 1.0, map_name: str = "one_plus_xi_squared") -> BetaField:
    return BetaField(regions=(Region.named(0.0, L, 1, map_name),))


def equal_regions_field(L: float, q: int, map_name: str = "one_plus_xi_squared") -> BetaField:
    """q regions of equal width, region k driven by coordinate k."""
    bounds = L * np.arange(q + 1) / q
    return BetaField(regions=tuple(
        Region.named(bounds[k], bounds[k + 1], k + 1, map_name) for k in range(q)
    ))


@dataclass(frozen=True)
class AdeProblem:
    """Stochastic advection-diffusion problem on [0, L] with homogeneous
    Dirichlet boundary conditions.

    f is the deterministic source: a single constant or one constant per
    region.  The gPC basis fixes the stochastic discretization (q, p).
    """

    kappa: float
    beta: BetaField
    f: float | Sequence[float]
    basis: GpcBasis
    mesh: Mesh1D
    element_regions: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.kappa <= 0:
            raise ConfigurationError(f"diffusivity must be positive, got {self.kappa}")
        if abs(self.beta.x_max - self.mesh.L) > ALIGN_TOL * max(1.0, self.mesh.L):
            raise ConfigurationError(
                f"beta regions cover [0, {self.beta.x_max}] but the mesh ends at {self.mesh.L}"
            )
        if self.beta.min_coordinates() > self.basis.q:
            raise ConfigurationError(
                f"regions reference coordinate {self.beta.min_coordinates()} "
                f"but the basis has q = {self.basis.q}"
            )
        f_arr = np.atleast_1d(np.asarray(self.f, dtype=float))
        if f_arr.size not in (1, len(self.beta.regions)):
            raise ConfigurationError(
                f"f must be a constant or one value per region "
                f"({len(self.beta.regions)}), got {f_arr.size} values"
            )
        object.__setattr__(self, "element_regions", self._assign_elements())

    def _assign_elements(self) -> np.ndarray:
        """Map each element to its region; reject region boundaries that fall
        strictly inside an element."""
        bounds = [r.x_min for r in self.beta.regions] + [self.beta.x_max]
        scale = max(1.0, self.mesh.L)
        for b in bounds:
            if np.min(np.abs(self.mesh.nodes - b)) > ALIGN_TOL * scale:
                raise ConfigurationError(
                    f"region boundary {b} does not coincide with a mesh node"
                )
        out = np.empty(self.mesh.n_el, dtype=int)
        for e in range(self.mesh.n_el):
            mid = 0.5 * (self.mesh.nodes[e] + self.mesh.nodes[e + 1])
            out[e] = self.beta.region_index_at(mid)
        return out

    @property
    def L(self) -> float:
        return self.mesh.L

    def beta_at(self, x: float, xi: Sequence[float]) -> float:
        if x < 0.0 or x > self.L:
            raise ValueError(f"x = {x} outside domain [0, {self.L}]")
        return self.beta(x, xi)

    def element_region(self, e: int) -> Region:
        return self.beta.regions[self.element_regions[e]]

    def f_of_region(self, region_index: int) -> float:
        f_arr = np.atleast_1d(np.asarray(self.f, dtype=float))
        return float(f_arr[0] if f_arr.size == 1 else f_arr[region_index])

    def f_of_element(self, e: int) -> float:
        return self.f_of_region(self.element_regions[e])

    def with_mesh(self, mesh: Mesh1D) -> "AdeProblem":
        return AdeProblem(kappa=self.kappa, beta=self.beta, f=self.f,
                          basis=self.basis, mesh=mesh)

    def with_basis(self, basis: GpcBasis) -> "AdeProblem":
        return AdeProblem(kappa=self.kappa, beta=self.beta, f=self.f,
                          basis=basis, mesh=self.mesh)
