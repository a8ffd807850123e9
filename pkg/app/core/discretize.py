# app/core/discretize.py

"""
Interface-aligned Gauss-Legendre grids and the Nystrom matrix.

Every kernel interface is a panel boundary and Gauss-Legendre nodes are
interior to their panel, so assembly only ever evaluates k inside a single
continuity block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.polynomial.legendre import leggauss

from app.core.errors import DimensionMismatch, InvalidResolution
from app.core.landscape import GrowthFunction, KernelSpec, PatchPartition, kernel_matrix

MAX_GAUSS_ORDER = 16


@dataclass(frozen=True)
class Resolution:
    panels_per_patch: int = 4
    gauss_order: int = 4


@dataclass(frozen=True, eq=False)
class Grid:
    partition: PatchPartition
    nodes: np.ndarray
    weights: np.ndarray
    panel_of_node: np.ndarray
    patch_of_node: np.ndarray
    panels: np.ndarray  # (P, 2) panel endpoints
    gauss_order: int

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def rule(self) -> str:
        return f"gauss-legendre-{self.gauss_order}"


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    matrix: np.ndarray  # K[i, j] = k(x_i, y_j) * w_j
    kernel: KernelSpec

    @property
    def size(self) -> int:
        return self.grid.size


def build_grid(partition: PatchPartition, panels_per_patch: int, gauss_order: int) -> Grid:
    if not isinstance(panels_per_patch, int) or panels_per_patch < 1:
        raise InvalidResolution(f"panels_per_patch must be >= 1, got {panels_per_patch}")
    if not isinstance(gauss_order, int) or not 1 <= gauss_order <= MAX_GAUSS_ORDER:
        raise InvalidResolution(f"gauss_order must be in 1..{MAX_GAUSS_ORDER}, got {gauss_order}")

    ref_nodes, ref_weights = leggauss(gauss_order)
    nodes, weights, panel_of_node, patch_of_node, panels = [], [], [], [], []
    for patch, (lo, hi) in enumerate(partition.patches):
        cuts = np.linspace(lo, hi, panels_per_patch + 1)
        cuts[0], cuts[-1] = lo, hi
        for left, right in zip(cuts[:-1], cuts[1:]):
            mid, half = 0.5 * (left + right), 0.5 * (right - left)
            nodes.append(mid + half * ref_nodes)
            weights.append(half * ref_weights)
            panel_of_node.append(np.full(gauss_order, len(panels)))
            patch_of_node.append(np.full(gauss_order, patch))
            panels.append((left, right))

    grid = Grid(
        partition=partition,
        nodes=np.concatenate(nodes),
        weights=np.concatenate(weights),
        panel_of_node=np.concatenate(panel_of_node),
        patch_of_node=np.concatenate(patch_of_node),
        panels=np.asarray(panels, dtype=float),
        gauss_order=gauss_order,
    )
    ends = grid.panels[grid.panel_of_node]
    if np.any(grid.nodes <= ends[:, 0]) or np.any(grid.nodes >= ends[:, 1]):
        raise InvalidResolution("panels too narrow for the requested order: a node reached a panel endpoint")
    logger.debug(f"Built {grid.rule} grid with {grid.size} nodes on {len(panels)} panels")
    return grid


def assemble_operator(spec: KernelSpec, grid: Grid) -> DiscreteOperator:
    if grid.partition != spec.partition:
        raise DimensionMismatch("grid was built for a different partition than the kernel")
    matrix = kernel_matrix(spec, grid.nodes, grid.nodes) * grid.weights[None, :]
    matrix.setflags(write=False)
    logger.debug(f"Assembled {grid.size}x{grid.size} Nystrom matrix")
    return DiscreteOperator(grid=grid, matrix=matrix, kernel=spec)


def _check_vector(op: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (op.size,):
        raise DimensionMismatch(f"expected a vector of length {op.size}, got shape {u.shape}")
    return u


def apply_T(op: DiscreteOperator, g: GrowthFunction, u: np.ndarray) -> np.ndarray:
    """One generation: K @ F(u). Negative entries are not clamped; F vanishes there."""
    u = _check_vector(op, u)
    return op.matrix @ g(u)


def apply_T0(op: DiscreteOperator, r0: float, u: np.ndarray) -> np.ndarray:
    u = _check_vector(op, u)
    return r0 * (op.matrix @ u)


def integrate(grid: Grid, values: np.ndarray) -> float:
    return float(grid.weights @ values)


def weighted_l2(grid: Grid, values: np.ndarray) -> float:
    return float(np.sqrt(grid.weights @ np.square(values)))
