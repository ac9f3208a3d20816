"""Behavioral model of a 1T1R memristor crossbar.

Conductances live in a dense ``(rows, cols)`` array in siemens. Reads are
Ohm's law plus Kirchhoff summation on that array; programming follows an
affine gate-voltage transfer model with clamping at the gate window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np


class ReadVoltageError(ValueError):
    """Raised when a read would apply more than ``v_read`` to a cell."""


@dataclass(frozen=True)
class DeviceParams:
    v_set: float = 2.5
    v_reset: float = 1.7
    v_read: float = 0.2
    v_gate0: float = 1.0
    v_gate_max: float = 1.6
    v_gate_min: float = 0.7
    v_gate_reset: float = 5.0
    dvgate_per_dG: float = 1.02e4
    g_max_override: float | None = None
    wire_resistance: float = 0.3  # ohms between cells; not simulated

    def __post_init__(self):
        errors = self.violations()
        if errors:
            raise ValueError("; ".join(errors))

    def violations(self) -> list[str]:
        out = []
        if not self.v_gate_min < self.v_gate0 <= self.v_gate_max:
            out.append("gate window must satisfy v_gate_min < v_gate0 <= v_gate_max")
        if not self.v_read < self.v_reset < self.v_set:
            out.append("pulse amplitudes must satisfy v_read < v_reset < v_set")
        if self.dvgate_per_dG <= 0:
            out.append("dvgate_per_dG must be positive")
        if self.g_max_override is not None and self.g_max_override <= 0:
            out.append("g_max_override must be positive")
        return out

    @property
    def g_max(self) -> float:
        if self.g_max_override is not None:
            return self.g_max_override
        return (self.v_gate_max - self.v_gate0) / self.dvgate_per_dG

    def gate_for(self, target):
        """Set-pulse gate voltage requested for a target conductance (clamped)."""
        vg = self.v_gate0 + np.asarray(target, dtype=float) * self.dvgate_per_dG
        return np.clip(vg, self.v_gate_min, self.v_gate_max)

    def set_response(self, gate_volts):
        """Conductance left by a set pulse after a full reset."""
        g = (np.asarray(gate_volts, dtype=float) - self.v_gate0) / self.dvgate_per_dG
        return np.clip(g, 0.0, self.g_max)


@dataclass(frozen=True)
class NoiseModel:
    read_noise_rel: float = 0.0
    program_noise_abs: float = 0.0
    quantization_levels: int | None = None

    def __post_init__(self):
        if self.read_noise_rel < 0 or self.program_noise_abs < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if self.quantization_levels is not None and self.quantization_levels < 2:
            raise ValueError("quantization_levels must be >= 2")


class Partition(NamedTuple):
    row_start: int
    row_count: int
    col_start: int
    col_count: int

    @property
    def rows(self) -> slice:
        return slice(self.row_start, self.row_start + self.row_count)

    @property
    def cols(self) -> slice:
        return slice(self.col_start, self.col_start + self.col_count)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.row_count, self.col_count)

    def overlaps(self, other: Partition) -> bool:
        if 0 in self.shape or 0 in other.shape:
            return False
        return (
            self.row_start < other.row_start + other.row_count
            and other.row_start < self.row_start + self.row_count
            and self.col_start < other.col_start + other.col_count
            and other.col_start < self.col_start + self.col_count
        )

    def fits(self, rows: int, cols: int) -> bool:
        return (
            min(self) >= 0
            and self.row_start + self.row_count <= rows
            and self.col_start + self.col_count <= cols
        )


class MemristorCell(NamedTuple):
    conductance: float
    gate_on: bool


@dataclass
class ProgramReport:
    """Outcome of a programming operation over one partition.

    ``achieved`` holds the conductance of every cell in the partition after
    the operation. ``clamped`` flags masked cells whose target fell outside
    the programmable window. For write-and-verify, ``converged`` and
    ``iterations`` are filled per cell (unmasked cells count as converged
    with zero iterations).
    """

    partition: Partition
    mask: np.ndarray
    achieved: np.ndarray
    clamped: np.ndarray
    converged: np.ndarray | None = None
    iterations: np.ndarray | None = None
    weights_clamped: np.ndarray | None = None

    @property
    def n_programmed(self) -> int:
        return int(self.mask.sum())

    @property
    def n_clamped(self) -> int:
        return int(self.clamped.sum())

    @property
    def unconverged(self) -> list[tuple[int, int]]:
        if self.converged is None:
            return []
        return [tuple(map(int, ij)) for ij in np.argwhere(self.mask & ~self.converged)]


@dataclass
class Crossbar:
    rows: int = 128
    cols: int = 64
    params: DeviceParams = field(default_factory=DeviceParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    rng_seed: int = 0
    allow_oversize: bool = False

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError("crossbar dimensions must be non-negative")
        if not self.allow_oversize and (self.rows > 128 or self.cols > 64):
            raise ValueError(
                f"{self.rows}x{self.cols} exceeds the 128x64 reference array; "
                "set allow_oversize to build a larger one"
            )
        self.g = np.zeros((self.rows, self.cols))
        self.rng = np.random.default_rng(self.rng_seed)

    @property
    def full(self) -> Partition:
        return Partition(0, self.rows, 0, self.cols)

    def cell(self, row: int, col: int) -> MemristorCell:
        return MemristorCell(float(self.g[row, col]), True)

    def _check(self, part: Partition):
        if not part.fits(self.rows, self.cols):
            raise ValueError(f"partition {tuple(part)} does not fit {self.rows}x{self.cols}")

    def _finish_program(self, g):
        """Quantize, add programming noise and clamp freshly set conductances."""
        levels = self.noise.quantization_levels
        g_max = self.params.g_max
        if levels is not None:
            step = g_max / (levels - 1)
            g = np.round(g / step) * step
        if self.noise.program_noise_abs > 0:
            g = g + self.rng.normal(0.0, self.noise.program_noise_abs, size=g.shape)
        return np.clip(g, 0.0, g_max)

    def _read(self, g_block, volts):
        if self.noise.read_noise_rel > 0:
            shape = volts.shape[:-1] + g_block.shape
            g_block = g_block * (1.0 + self.noise.read_noise_rel * self.rng.standard_normal(shape))
            return np.einsum("...ij,...i->...j", g_block, volts)
        return volts @ g_block

    def _check_volts(self, volts, n):
        volts = np.asarray(volts, dtype=float)
        if volts.shape[-1] != n:
            raise ValueError(f"expected {n} voltages on the last axis, got {volts.shape[-1]}")
        limit = self.params.v_read * (1 + 1e-12)
        if volts.size and np.max(np.abs(volts)) > limit:
            raise ReadVoltageError(
                f"read voltage {np.max(np.abs(volts)):.4g} V exceeds v_read={self.params.v_read} V"
            )
        return volts


def init_array(xbar: Crossbar, gate_volts: float | None = None, spread: float | None = None):
    """Apply one set pulse with a common gate voltage to every cell.

    ``spread`` is the device-to-device standard deviation (siemens) of the
    resulting conductance; it defaults to the crossbar's programming noise.
    """
    p = xbar.params
    vg = p.v_gate0 if gate_volts is None else gate_volts
    g = np.full((xbar.rows, xbar.cols), float(p.set_response(vg)))
    sigma = xbar.noise.program_noise_abs if spread is None else spread
    if sigma > 0:
        g = g + xbar.rng.normal(0.0, sigma, size=g.shape)
    xbar.g[...] = np.clip(g, 0.0, p.g_max)


def read_mvm(xbar: Crossbar, part: Partition, row_volts):
    """Column currents for voltages on the partition's rows.

    ``row_volts`` may carry leading batch axes; the last axis indexes rows.
    Each sample sees an independent read-noise draw.
    """
    xbar._check(part)
    volts = xbar._check_volts(row_volts, part.row_count)
    return xbar._read(xbar.g[part.rows, part.cols], volts)


def read_mvm_transposed(xbar: Crossbar, part: Partition, col_volts):
    """Row currents for voltages driven onto the partition's columns."""
    xbar._check(part)
    volts = xbar._check_volts(col_volts, part.col_count)
    return xbar._read(xbar.g[part.rows, part.cols].T, volts)


def read_conductances(xbar: Crossbar, part: Partition | None = None) -> np.ndarray:
    part = xbar.full if part is None else part
    xbar._check(part)
    return xbar.g[part.rows, part.cols].copy()


def program_two_pulse(xbar: Crossbar, part: Partition, targets, mask=None) -> ProgramReport:
    """Reset then set every masked cell toward its target conductance.

    Targets outside ``[0, g_max]`` are clamped by the gate window and flagged
    in the report rather than rejected.
    """
    xbar._check(part)
    p = xbar.params
    targets = np.asarray(targets, dtype=float)
    if targets.shape != part.shape:
        raise ValueError(f"targets shape {targets.shape} != partition {part.shape}")
    mask = np.ones(part.shape, bool) if mask is None else np.asarray(mask, bool)
    if mask.shape != part.shape:
        raise ValueError(f"mask shape {mask.shape} != partition {part.shape}")

    block = xbar.g[part.rows, part.cols]
    clamped = mask & ((targets < 0) | (targets > p.g_max))
    if mask.any():
        # reset pulse (v_reset, gate v_gate_reset) fully erases the cell
        block[mask] = 0.0
        set_g = p.set_response(p.gate_for(targets[mask]))
        block[mask] = xbar._finish_program(set_g)
    return ProgramReport(part, mask, block.copy(), clamped)


def program_write_verify(
    xbar: Crossbar, part: Partition, targets, tolerance: float, max_iters: int = 10, mask=None
) -> ProgramReport:
    """Program-and-verify loop until every masked cell is within ``tolerance``."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    targets = np.asarray(targets, dtype=float)
    mask = np.ones(part.shape, bool) if mask is None else np.asarray(mask, bool)
    converged = ~mask
    iterations = np.zeros(part.shape, int)
    clamped = np.zeros(part.shape, bool)
    for _ in range(max_iters):
        todo = ~converged
        if not todo.any():
            break
        rep = program_two_pulse(xbar, part, targets, todo)
        clamped |= rep.clamped
        iterations[todo] += 1
        converged = converged | (todo & (np.abs(read_conductances(xbar, part) - targets) <= tolerance))
    return ProgramReport(
        part, mask, read_conductances(xbar, part), clamped, converged=converged, iterations=iterations
    )


# -- conductance-map files ---------------------------------------------------

MAP_MAGIC = "# conductance-map v1"


def save_map(path, values, units: str = "S", seed: int = 0):
    """Write a matrix as a conductance-map text file.

    Values use 17 significant digits so that reading back is bit-exact.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    rows, cols = values.shape
    lines = [MAP_MAGIC, f"rows {rows}", f"cols {cols}", f"units {units}", f"seed {seed}"]
    lines += [" ".join(f"{v:.16e}" for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n")


def load_map(path) -> tuple[np.ndarray, dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != MAP_MAGIC:
        raise ValueError(f"{path}: not a conductance-map file")
    header = {}
    for line in lines[1:5]:
        key, _, val = line.partition(" ")
        header[key] = val
    try:
        rows, cols = int(header["rows"]), int(header["cols"])
        header = {"rows": rows, "cols": cols, "units": header["units"], "seed": int(header["seed"])}
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header") from exc
    body = lines[5 : 5 + rows]
    values = np.array([[float(v) for v in line.split()] for line in body]).reshape(rows, cols)
    return values, header
