"""Run configuration: TOML parsing, validation, and canonical serialization.

The canonical rendering writes every effective value (defaults included) in a
fixed order, so identical configurations always serialize to identical text.
The output directory is deliberately not part of the rendering: results do
not depend on where they are written.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .analysis import DiscretizationLadder
from .errors import ConfigurationError
from .fem import Mesh1D
from .gpc import GpcBasis
from .problem import AdeProblem, BETA_MAPS, BetaField, Region

EXPERIMENTS = ("solve", "greens-locality", "compare", "convergence", "tau-table", "mc-validate")
METHOD_CHOICES = ("galerkin", "vms", "both")
OUTPUT_DIR_ENV = "SGVMS_OUT"


@dataclass
class RegionSpec:
    x_min: float
    x_max: float
    coordinate: int
    map: str = "one_plus_xi_squared"


@dataclass
class RunConfig:
    experiment: str = "solve"
    method: str = "both"
    seed: int = 0
    reproducible: bool = True
    output_dir: str = "out"
    # problem
    L: float = 1.0
    kappa: float = 1e-3
    f: list[float] = dataclass_field(default_factory=lambda: [1.0])
    regions: list[RegionSpec] = dataclass_field(
        default_factory=lambda: [RegionSpec(0.0, 1.0, 1)]
    )
    # discretization
    n_el: int = 20
    p: int = 2
    # solve
    realization: list[float] | None = None
    # greens-locality
    greens_x_s: float = 0.125
    greens_profile: list[float] = dataclass_field(default_factory=lambda: [1.0, 1.0, 1.0])
    greens_points_per_element: int = 10
    greens_n_xi: int = 101
    greens_n_quad: int = 64
    # convergence
    ladder: list[list[int]] = dataclass_field(
        default_factory=lambda: [[20, 2], [40, 3], [80, 4], [160, 5], [320, 6]]
    )
    memory_cap_gb: float = 8.0
    # compare
    compare_reference: str = "analytic"
    # mc-validate
    mc_samples: int = 10000
    # tau-table grid (Cartesian product of the three lists)
    tau_h: list[float] = dataclass_field(default_factory=lambda: [0.05])
    tau_beta: list[float] = dataclass_field(default_factory=lambda: [1.0, 1.5])
    tau_kappa: list[float] = dataclass_field(default_factory=lambda: [1e-3])

    # -- derived helpers ----------------------------------------------------

    @property
    def q(self) -> int:
        return max(r.coordinate for r in self.regions)

    def effective_realization(self) -> list[float]:
        if self.realization is None:
            return [0.5] * self.q
        return list(self.realization)

    def methods(self) -> list[str]:
        return ["galerkin", "vms"] if self.method == "both" else [self.method]

    def beta_field(self) -> BetaField:
        return BetaField(regions=tuple(
            Region.named(r.x_min, r.x_max, r.coordinate, r.map) for r in self.regions
        ))

    def make_problem(self, n_el: int | None = None, p: int | None = None) -> AdeProblem:
        basis = GpcBasis(q=self.q, p=self.p if p is None else p)
        mesh = Mesh1D.uniform(self.L, self.n_el if n_el is None else n_el)
        f = self.f[0] if len(self.f) == 1 else self.f
        return AdeProblem(kappa=self.kappa, beta=self.beta_field(), f=f,
                          basis=basis, mesh=mesh)

    def ladder_obj(self) -> DiscretizationLadder:
        return DiscretizationLadder(steps=tuple((n, p) for n, p in self.ladder))


def _require(mapping: dict, allowed: set[str], context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{context}]: {sorted(unknown)}")


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return config_from_dict(data, source=str(path))


def config_from_text(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(str(exc)) from exc
    return config_from_dict(data, source="<text>")


def config_from_dict(data: dict, source: str = "<dict>") -> RunConfig:
    _require(data, {
        "experiment", "method", "seed", "reproducible", "output_dir",
        "problem", "discretization", "solve", "greens", "convergence",
        "compare", "mc", "tau_table",
    }, "top level")
    cfg = RunConfig()

    cfg.experiment = str(data.get("experiment", cfg.experiment))
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigurationError(
            f"{source}: experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}"
        )
    cfg.method = str(data.get("method", cfg.method))
    if cfg.method not in METHOD_CHOICES:
        raise ConfigurationError(
            f"{source}: method must be one of {METHOD_CHOICES}, got {cfg.method!r}"
        )
    cfg.seed = int(data.get("seed", cfg.seed))
    if not 0 <= cfg.seed < 2**64:
        raise ConfigurationError(f"{source}: seed must fit in an unsigned 64-bit integer")
    cfg.reproducible = bool(data.get("reproducible", cfg.reproducible))
    cfg.output_dir = str(data.get("output_dir", cfg.output_dir))

    prob = data.get("problem", {})
    _require(prob, {"L", "kappa", "f", "regions"}, "problem")
    cfg.L = float(prob.get("L", cfg.L))
    cfg.kappa = float(prob.get("kappa", cfg.kappa))
    f_val = prob.get("f", 1.0)
    cfg.f = [float(v) for v in f_val] if isinstance(f_val, list) else [float(f_val)]
    raw_regions = prob.get("regions", None)
    if raw_regions is not None:
        if not raw_regions:
            raise ConfigurationError(f"{source}: problem.regions must not be empty")
        specs = []
        for i, r in enumerate(raw_regions):
            _require(r, {"x_min", "x_max", "coordinate", "map"}, f"problem.regions[{i}]")
            try:
                specs.append(RegionSpec(
                    x_min=float(r["x_min"]), x_max=float(r["x_max"]),
                    coordinate=int(r["coordinate"]),
                    map=str(r.get("map", "one_plus_xi_squared")),
                ))
            except KeyError as exc:
                raise ConfigurationError(
                    f"{source}: problem.regions[{i}] is missing key {exc}"
                ) from exc
            if specs[-1].map not in BETA_MAPS:
                raise ConfigurationError(
                    f"{source}: problem.regions[{i}].map {specs[-1].map!r} unknown; "
                    f"known: {sorted(BETA_MAPS)}"
                )
        cfg.regions = specs

    disc = data.get("discretization", {})
    _require(disc, {"n_el", "p"}, "discretization")
    cfg.n_el = int(disc.get("n_el", cfg.n_el))
    cfg.p = int(disc.get("p", cfg.p))

    solve_sec = data.get("solve", {})
    _require(solve_sec, {"realization"}, "solve")
    if "realization" in solve_sec:
        cfg.realization = [float(v) for v in solve_sec["realization"]]

    greens = data.get("greens", {})
    _require(greens, {"x_s", "profile", "points_per_element", "n_xi", "n_quad"}, "greens")
    cfg.greens_x_s = float(greens.get("x_s", cfg.greens_x_s))
    cfg.greens_profile = [float(v) for v in greens.get("profile", cfg.greens_profile)]
    cfg.greens_points_per_element = int(greens.get("points_per_element",
                                                   cfg.greens_points_per_element))
    cfg.greens_n_xi = int(greens.get("n_xi", cfg.greens_n_xi))
    cfg.greens_n_quad = int(greens.get("n_quad", cfg.greens_n_quad))

    conv = data.get("convergence", {})
    _require(conv, {"ladder", "memory_cap_gb"}, "convergence")
    if "ladder" in conv:
        cfg.ladder = [[int(n), int(p)] for n, p in conv["ladder"]]
    cfg.memory_cap_gb = float(conv.get("memory_cap_gb", cfg.memory_cap_gb))

    comp = data.get("compare", {})
    _require(comp, {"reference"}, "compare")
    cfg.compare_reference = str(comp.get("reference", cfg.compare_reference))

    mc = data.get("mc", {})
    _require(mc, {"samples"}, "mc")
    cfg.mc_samples = int(mc.get("samples", cfg.mc_samples))

    tau_tbl = data.get("tau_table", {})
    _require(tau_tbl, {"h", "beta", "kappa"}, "tau_table")
    if "h" in tau_tbl:
        cfg.tau_h = [float(v) for v in tau_tbl["h"]]
    if "beta" in tau_tbl:
        cfg.tau_beta = [float(v) for v in tau_tbl["beta"]]
    if "kappa" in tau_tbl:
        cfg.tau_kappa = [float(v) for v in tau_tbl["kappa"]]

    validate_config(cfg, source)
    return cfg


def validate_config(cfg: RunConfig, source: str = "<config>") -> None:
    """Structural checks done before any compute; problem construction does the rest."""
    if cfg.kappa <= 0:
        raise ConfigurationError(f"{source}: problem.kappa must be positive")
    if cfg.n_el < 2:
        raise ConfigurationError(f"{source}: discretization.n_el must be >= 2")
    if cfg.p < 0:
        raise ConfigurationError(f"{source}: discretization.p must be >= 0")
    if cfg.realization is not None and len(cfg.realization) != cfg.q:
        raise ConfigurationError(
            f"{source}: solve.realization needs {cfg.q} coordinates, "
            f"got {len(cfg.realization)}"
        )
    if len(cfg.f) not in (1, len(cfg.regions)):
        raise ConfigurationError(
            f"{source}: problem.f must be one value or one per region"
        )
    if cfg.mc_samples < 2:
        raise ConfigurationError(f"{source}: mc.samples must be >= 2")
    for name, values in (("h", cfg.tau_h), ("beta", cfg.tau_beta), ("kappa", cfg.tau_kappa)):
        if not values or any(v <= 0 for v in values):
            raise ConfigurationError(f"{source}: tau_table.{name} must be positive")
    cfg.beta_field()  # region partition checks
    cfg.ladder_obj()


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _toml_list(values) -> str:
    return "[" + ", ".join(
        _toml_list(v) if isinstance(v, (list, tuple)) else _toml_scalar(v)
        for v in values
    ) + "]"


def render_config(cfg: RunConfig) -> str:
    """Canonical TOML serialization of the effective configuration."""
    lines = [
        f"experiment = {_toml_scalar(cfg.experiment)}",
        f"method = {_toml_scalar(cfg.method)}",
        f"seed = {cfg.seed}",
        f"reproducible = {_toml_scalar(cfg.reproducible)}",
        "",
        "[problem]",
        f"L = {_toml_scalar(cfg.L)}",
        f"kappa = {_toml_scalar(cfg.kappa)}",
        f"f = {_toml_list(cfg.f)}",
    ]
    for r in cfg.regions:
        lines += [
            "",
            "[[problem.regions]]",
            f"x_min = {_toml_scalar(r.x_min)}",
            f"x_max = {_toml_scalar(r.x_max)}",
            f"coordinate = {r.coordinate}",
            f"map = {_toml_scalar(r.map)}",
        ]
    lines += [
        "",
        "[discretization]",
        f"n_el = {cfg.n_el}",
        f"p = {cfg.p}",
        "",
        "[solve]",
        f"realization = {_toml_list(cfg.effective_realization())}",
        "",
        "[greens]",
        f"x_s = {_toml_scalar(cfg.greens_x_s)}",
        f"profile = {_toml_list(cfg.greens_profile)}",
        f"points_per_element = {cfg.greens_points_per_element}",
        f"n_xi = {cfg.greens_n_xi}",
        f"n_quad = {cfg.greens_n_quad}",
        "",
        "[convergence]",
        f"ladder = {_toml_list(cfg.ladder)}",
        f"memory_cap_gb = {_toml_scalar(cfg.memory_cap_gb)}",
        "",
        "[compare]",
        f"reference = {_toml_scalar(cfg.compare_reference)}",
        "",
        "[mc]",
        f"samples = {cfg.mc_samples}",
        "",
        "[tau_table]",
        f"h = {_toml_list(cfg.tau_h)}",
        f"beta = {_toml_list(cfg.tau_beta)}",
        f"kappa = {_toml_list(cfg.tau_kappa)}",
    ]
    return "\n".join(lines) + "\n"


def resolve_output_dir(cfg: RunConfig, cli_out: str | None) -> Path:
    """CLI flag beats the environment override, which beats the config value."""
    if cli_out:
        return Path(cli_out)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(cfg.output_dir)
