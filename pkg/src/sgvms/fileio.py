"""CSV output dialect and CoefficientField serialization.

Dialect: comma-separated values, '#'-prefixed header lines, floats printed
with 17 significant digits so files are byte-stable and round-trip exactly.
Every file produced by the CLI embeds the effective run configuration between
config markers; `extract_config_text` recovers it.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .fem import Mesh1D
from .gpc import GpcBasis
from .sgfem import CoefficientField

CONFIG_BEGIN = "=== config ==="
CONFIG_END = "=== end config ==="


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path, header_lines: Sequence[str], column_names: Sequence[str] | None,
              rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        if column_names is not None:
            fh.write(",".join(column_names) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def config_header_lines(config_text: str) -> list[str]:
    lines = [CONFIG_BEGIN]
    lines.extend(config_text.rstrip("\n").split("\n"))
    lines.append(CONFIG_END)
    return lines


def extract_config_text(path) -> str:
    """Recover the embedded effective configuration from an output file."""
    collected: list[str] = []
    inside = False
    with open(path) as fh:
        for raw in fh:
            if not raw.startswith("#"):
                break
            line = raw[1:].strip("\n")
            line = line[1:] if line.startswith(" ") else line
            if line == CONFIG_BEGIN:
                inside = True
                continue
            if line == CONFIG_END:
                return "\n".join(collected) + "\n"
            if inside:
                collected.append(line)
    raise ConfigurationError(f"no embedded config block found in {path}")


def write_field_csv(path, field: CoefficientField, kappa: float,
                    extra_header: Sequence[str] = ()) -> None:
    """One row per interior node, N_s columns, discretization in the header."""
    mesh = field.mesh
    uniform = np.allclose(np.diff(mesh.h), 0.0, atol=1e-14 * max(1.0, mesh.L))
    header = list(extra_header) + [
        f"q = {field.basis.q}",
        f"p = {field.basis.p}",
        f"n_el = {mesh.n_el}",
        f"L = {fmt(mesh.L)}",
        f"kappa = {fmt(kappa)}",
        "ordering = graded-lex",
        "layout = node-major",
        "multi_indices = " + ";".join(" ".join(map(str, m)) for m in field.basis.indices),
    ]
    if not uniform:
        header.append("nodes = " + ";".join(fmt(x) for x in mesh.nodes))
    write_csv(path, header, None, field.coeffs)


def read_field_csv(path) -> tuple[CoefficientField, dict]:
    """Inverse of write_field_csv; returns the field and the header metadata."""
    meta: dict[str, str] = {}
    rows: list[list[float]] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body and not body.startswith("==="):
                    key, _, val = body.partition("=")
                    meta.setdefault(key.strip(), val.strip())
                continue
            rows.append([float(v) for v in line.split(",")])
    for key in ("q", "p", "n_el", "L", "kappa"):
        if key not in meta:
            raise ConfigurationError(f"field file {path} is missing header key {key!r}")
    basis = GpcBasis(q=int(meta["q"]), p=int(meta["p"]))
    if "nodes" in meta:
        mesh = Mesh1D(nodes=np.array([float(v) for v in meta["nodes"].split(";")]))
    else:
        mesh = Mesh1D.uniform(L=float(meta["L"]), n_el=int(meta["n_el"]))
    coeffs = np.asarray(rows, dtype=float)
    field = CoefficientField(basis=basis, mesh=mesh, coeffs=coeffs)
    return field, {"kappa": float(meta["kappa"])}
