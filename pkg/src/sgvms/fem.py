"""1D mesh, piecewise-linear hat basis, and element-level FEM primitives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError


@dataclass(frozen=True)
class Mesh1D:
    """Strictly increasing node coordinates x_0 = 0 < ... < x_{n_el} = L."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ConfigurationError("mesh needs at least 2 elements (3 nodes)")
        if nodes[0] != 0.0:
            raise ConfigurationError(f"first node must be 0, got {nodes[0]}")
        if np.any(np.diff(nodes) <= 0.0):
            raise ConfigurationError("mesh nodes must be strictly increasing")

    @classmethod
    def uniform(cls, L: float, n_el: int) -> "Mesh1D":
        if n_el < 2:
            raise ConfigurationError(f"n_el must be >= 2, got {n_el}")
        if L <= 0:
            raise ConfigurationError(f"domain length must be positive, got {L}")
        return cls(nodes=L * np.arange(n_el + 1) / n_el)

    @property
    def L(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_el(self) -> int:
        return self.nodes.size - 1

    @property
    def n_interior(self) -> int:
        return self.n_el - 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def hat(self, i: int, x) -> np.ndarray:
        """Value of the hat function attached to global node i (0..n_el)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        xi = self.nodes[i]
        if i > 0:
            left = self.nodes[i - 1]
            mask = (x >= left) & (x <= xi)
            out = np.where(mask, (x - left) / (xi - left), out)
        if i < self.n_el:
            right = self.nodes[i + 1]
            mask = (x > xi) & (x <= right)
            out = np.where(mask, (right - x) / (right - xi), out)
        if i == 0:
            out = np.where(x == 0.0, 1.0, out)
        return out


# Dimensionless 2x2 stencils for linear elements; rows = test function,
# columns = trial function, local node 0 = left, 1 = right.
GRAD_GRAD = np.array([[1.0, -1.0], [-1.0, 1.0]])     # h * int N_i' N_j'
GRAD_TEST = np.array([[-1.0, 1.0], [-1.0, 1.0]])     # 2 * int N_j' N_i
LOAD_EVEN = np.array([1.0, 1.0])                      # (2/h) * int N_i
LOAD_GRAD = np.array([-1.0, 1.0])                     # h * N_i'


class LocalMatrices(NamedTuple):
    diffusion: np.ndarray
    advection: np.ndarray
    stabilization: np.ndarray
    load: np.ndarray
    stabilization_load: np.ndarray


def local_matrices(h: float, kappa: float, beta: float, tau: float, f: float = 0.0) -> LocalMatrices:
    """Element matrices of the stabilized advection-diffusion weak form.

    diffusion = (kappa/h) * [[1,-1],[-1,1]], advection = (beta/2) * [[-1,1],[-1,1]],
    stabilization = (tau beta^2 / h) * [[1,-1],[-1,1]].  Loads for constant f:
    (f h / 2) * [1,1] plus the residual-consistent term (tau beta f) * [-1,1].
    """
    if h <= 0:
        raise ConfigurationError(f"element size must be positive, got {h}")
    if kappa <= 0:
        raise ConfigurationError(f"diffusivity must be positive, got {kappa}")
    return LocalMatrices(
        diffusion=(kappa / h) * GRAD_GRAD,
        advection=(beta / 2.0) * GRAD_TEST,
        stabilization=(tau * beta * beta / h) * GRAD_GRAD,
        load=(f * h / 2.0) * LOAD_EVEN,
        stabilization_load=(tau * beta * f) * LOAD_GRAD,
    )


def h1_stiffness(mesh: Mesh1D) -> sp.csr_matrix:
    """Interior-node stiffness matrix int Theta_i' Theta_j' dx (the H1_0 Gram)."""
    h = mesh.h
    n = mesh.n_interior
    main = 1.0 / h[:-1] + 1.0 / h[1:]
    off = -1.0 / h[1:-1]
    return sp.diags([off, main, off], offsets=[-1, 0, 1], shape=(n, n), format="csr")
