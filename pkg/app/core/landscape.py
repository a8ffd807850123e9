# app/core/landscape.py

"""
Patchy domain, piecewise dispersal kernels and growth maps.

The domain is the open interval (-a, a) cut by interface points into
patches. A kernel is one smooth formula per ordered patch pair, so it may
jump across interfaces but is never evaluated on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Mapping, Sequence

import numpy as np
from loguru import logger

from app.core.errors import InvalidSampleCount, PointOnInterface, PointOutsideDomain

# Irrational offset for validation lattices so samples avoid interface points.
_LATTICE_OFFSET = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PatchPartition:
    half_length: float
    interfaces: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "interfaces", tuple(float(p) for p in self.interfaces))
        if not self.half_length > 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        edges = self.edges
        if any(lo >= hi for lo, hi in zip(edges[:-1], edges[1:])):
            raise ValueError(
                f"interfaces must be strictly increasing inside (-{self.half_length}, {self.half_length}), "
                f"got {list(self.interfaces)}"
            )

    @property
    def edges(self) -> tuple[float, ...]:
        return (-self.half_length, *self.interfaces, self.half_length)

    @property
    def patch_count(self) -> int:
        return len(self.interfaces) + 1

    @property
    def length(self) -> float:
        """|Omega| = 2a."""
        return 2.0 * self.half_length

    @property
    def patches(self) -> list[tuple[float, float]]:
        edges = self.edges
        return list(zip(edges[:-1], edges[1:]))

    @property
    def patch_lengths(self) -> np.ndarray:
        return np.diff(np.asarray(self.edges))

    def patch_index(self, x: float) -> int:
        """Index of the open patch containing x."""
        if not -self.half_length < x < self.half_length:
            raise PointOutsideDomain(f"x={x} is outside (-{self.half_length}, {self.half_length})")
        if x in self.interfaces:
            raise PointOnInterface(f"x={x} is an interface point; use interior quadrature nodes")
        return int(np.searchsorted(self.interfaces, x))

    def patch_indices(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if np.any(np.abs(xs) >= self.half_length):
            bad = xs[np.abs(xs) >= self.half_length][0]
            raise PointOutsideDomain(f"x={bad} is outside (-{self.half_length}, {self.half_length})")
        if self.interfaces and np.any(np.isin(xs, self.interfaces)):
            bad = xs[np.isin(xs, self.interfaces)][0]
            raise PointOnInterface(f"x={bad} is an interface point; use interior quadrature nodes")
        return np.searchsorted(np.asarray(self.interfaces), xs)

    def scaled(self, half_length: float) -> PatchPartition:
        """Same patch layout stretched to a new half length."""
        factor = half_length / self.half_length
        return PatchPartition(half_length, tuple(p * factor for p in self.interfaces))


@dataclass(frozen=True)
class KernelPiece:
    """One smooth block formula: c, or c * exp(-b |x - y|)."""

    form: Literal["constant", "exponential"] = "constant"
    c: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.form not in ("constant", "exponential"):
            raise ValueError(f"unsupported kernel form {self.form!r}")
        if self.c < 0 or (self.form == "exponential" and self.c <= 0):
            raise ValueError(f"kernel coefficient must be positive, got c={self.c}")
        if self.b < 0:
            raise ValueError(f"kernel decay must be nonnegative, got b={self.b}")

    def evaluate(self, x, y):
        if self.form == "constant":
            return np.full(np.broadcast(x, y).shape, self.c, dtype=float)
        return self.c * np.exp(-self.b * np.abs(np.subtract(x, y)))


@dataclass(frozen=True)
class KernelSpec:
    partition: PatchPartition
    pieces: tuple[tuple[KernelPiece, ...], ...]
    delta: float
    lambda_bound: float

    def __post_init__(self):
        n = self.partition.patch_count
        if len(self.pieces) != n or any(len(row) != n for row in self.pieces):
            raise ValueError(f"kernel needs a {n}x{n} table of pieces")
        if not 0 < self.delta < self.lambda_bound:
            raise ValueError(f"need 0 < delta < Lambda, got delta={self.delta}, Lambda={self.lambda_bound}")

    @classmethod
    def from_pairs(
        cls,
        partition: PatchPartition,
        pieces: Mapping[tuple[int, int], KernelPiece],
        delta: float,
        lambda_bound: float,
    ) -> KernelSpec:
        n = partition.patch_count
        missing = [(i, j) for i in range(n) for j in range(n) if (i, j) not in pieces]
        if missing:
            raise ValueError(f"kernel pieces missing for patch pairs {missing}")
        table = tuple(tuple(pieces[(i, j)] for j in range(n)) for i in range(n))
        return cls(partition, table, delta, lambda_bound)

    @classmethod
    def constant(cls, partition: PatchPartition, c: float, delta: float, lambda_bound: float) -> KernelSpec:
        n = partition.patch_count
        piece = KernelPiece("constant", c)
        return cls(partition, tuple((piece,) * n for _ in range(n)), delta, lambda_bound)

    @property
    def is_block_constant(self) -> bool:
        return all(p.form == "constant" or p.b == 0 for row in self.pieces for p in row)

    def block_coefficients(self) -> np.ndarray:
        return np.array([[p.c for p in row] for row in self.pieces], dtype=float)

    def with_pieces(self, updates: Mapping[tuple[int, int], KernelPiece]) -> KernelSpec:
        table = [list(row) for row in self.pieces]
        for (i, j), piece in updates.items():
            table[i][j] = piece
        return replace(self, pieces=tuple(tuple(row) for row in table))


def eval_kernel(spec: KernelSpec, x: float, y: float) -> float:
    i = spec.partition.patch_index(x)
    j = spec.partition.patch_index(y)
    return float(spec.pieces[i][j].evaluate(x, y))


def kernel_matrix(spec: KernelSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """k(x_i, y_j) on a tensor lattice, filled one continuity block at a time."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    row_patch = spec.partition.patch_indices(xs)
    col_patch = spec.partition.patch_indices(ys)
    out = np.empty((xs.size, ys.size), dtype=float)
    n = spec.partition.patch_count
    for i in range(n):
        rows = np.flatnonzero(row_patch == i)
        if rows.size == 0:
            continue
        for j in range(n):
            cols = np.flatnonzero(col_patch == j)
            if cols.size == 0:
                continue
            out[np.ix_(rows, cols)] = spec.pieces[i][j].evaluate(xs[rows][:, None], ys[cols][None, :])
    return out


def kernel_mass(spec: KernelSpec, x: float, grid) -> float:
    """Quadrature value of the integral of k(x, .) over the domain."""
    spec.partition.patch_index(x)
    row = kernel_matrix(spec, np.array([x]), grid.nodes)[0] * grid.weights
    return float(row @ np.ones_like(row))


@dataclass(frozen=True)
class GrowthFunction:
    """
    Beverton-Holt growth, optionally with a constant influx c:

        F(u) = c + r0 * u / (1 + u / b)   for u >= 0,
        F(u) = 0                          for u < 0.
    """

    variant: Literal["beverton_holt", "beverton_holt_influx"]
    r0: float
    b: float
    c: float = 0.0

    def __post_init__(self):
        if self.variant not in ("beverton_holt", "beverton_holt_influx"):
            raise ValueError(f"unknown growth variant {self.variant!r}")
        if not self.r0 > 0 or not self.b > 0:
            raise ValueError(f"r0 and b must be positive, got r0={self.r0}, b={self.b}")
        if self.variant == "beverton_holt" and self.c != 0:
            raise ValueError("plain Beverton-Holt growth has no influx term")
        if self.variant == "beverton_holt_influx" and not self.c > 0:
            raise ValueError(f"influx c must be positive, got c={self.c}")

    @classmethod
    def beverton_holt(cls, r0: float, b: float) -> GrowthFunction:
        return cls("beverton_holt", r0, b)

    @classmethod
    def with_influx(cls, c: float, r0: float, b: float) -> GrowthFunction:
        return cls("beverton_holt_influx", r0, b, c)

    @property
    def bound(self) -> float:
        """M, the least upper bound of F."""
        return self.c + self.r0 * self.b

    @property
    def f0(self) -> float:
        return self.c

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        positive = np.maximum(u, 0.0)
        return np.where(u >= 0, self.c + self.r0 * positive / (1.0 + positive / self.b), 0.0)


def growth_eval(g: GrowthFunction, u: float) -> float:
    return float(g(u))


@dataclass(frozen=True)
class Scenario:
    partition: PatchPartition
    kernel: KernelSpec
    growth: GrowthFunction

    def with_parameter(self, parameter: str, value: float, pairs: Sequence[tuple[int, int]] = ()) -> Scenario:
        """A copy with one swept parameter replaced."""
        if parameter == "r0":
            return replace(self, growth=replace(self.growth, r0=value))
        if parameter == "domain_half_length":
            partition = self.partition.scaled(value)
            return replace(self, partition=partition, kernel=replace(self.kernel, partition=partition))
        if parameter in ("kernel_coefficient", "kernel_decay"):
            attr = "c" if parameter == "kernel_coefficient" else "b"
            updates = {}
            for i, j in pairs:
                piece = self.kernel.pieces[i][j]
                if attr == "b" and piece.form != "exponential":
                    raise ValueError(f"patch pair ({i}, {j}) is not an exponential piece")
                updates[(i, j)] = replace(piece, **{attr: value})
            return replace(self, kernel=self.kernel.with_pieces(updates))
        raise ValueError(f"unknown sweep parameter {parameter!r}")


@dataclass(frozen=True)
class PiecewiseProfile:
    """A step profile: values[k] holds on the k-th gap between breakpoints."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("a profile needs one value per subinterval")
        if any(lo >= hi for lo, hi in zip(self.breakpoints[:-1], self.breakpoints[1:])):
            raise ValueError("profile breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> PiecewiseProfile:
        return cls((), (float(value),))

    @property
    def is_nonnegative(self) -> bool:
        return min(self.values) >= 0

    def realize(self, nodes: np.ndarray) -> np.ndarray:
        # Quadrature nodes never sit on kernel interfaces; extra breakpoints
        # that coincide with a node take the value on their right.
        idx = np.searchsorted(np.asarray(self.breakpoints, dtype=float), nodes, side="right")
        return np.asarray(self.values, dtype=float)[idx]


def random_profile(partition: PatchPartition, rng: np.random.Generator, upper: float) -> PiecewiseProfile:
    """Random step profile in X: breaks at every interface plus up to 3 extra points, values in (0, upper]."""
    a = partition.half_length
    extra = rng.uniform(-a, a, size=int(rng.integers(0, 4)))
    breakpoints = tuple(sorted(set(partition.interfaces) | {float(p) for p in extra}))
    values = tuple(float(upper * (1.0 - rng.random())) for _ in range(len(breakpoints) + 1))
    return PiecewiseProfile(breakpoints, values)


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str
    witness: dict = field(default_factory=dict)
    advisory: bool = False


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed or c.advisory for c in self.checks)

    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]


def validation_points(partition: PatchPartition, sample_count: int) -> np.ndarray:
    a = partition.half_length
    lattice = -a + partition.length * (np.arange(sample_count) + _LATTICE_OFFSET) / sample_count
    midpoints = [(lo + hi) / 2.0 for lo, hi in partition.patches]
    points = np.unique(np.concatenate([lattice, midpoints]))
    return points[~np.isin(points, partition.interfaces)]


def _kernel_checks(spec: KernelSpec, sample_count: int) -> list[AssumptionCheck]:
    pts = validation_points(spec.partition, sample_count)
    values = kernel_matrix(spec, pts, pts)
    lo_i, lo_j = np.unravel_index(np.argmin(values), values.shape)
    hi_i, hi_j = np.unravel_index(np.argmax(values), values.shape)
    kmin, kmax = float(values[lo_i, lo_j]), float(values[hi_i, hi_j])

    lower = AssumptionCheck(
        "kernel_lower_bound",
        kmin > spec.delta,
        f"min sampled k = {kmin:.6g} vs declared delta = {spec.delta:.6g}",
        {"x": float(pts[lo_i]), "y": float(pts[lo_j]), "k": kmin},
    )
    upper = AssumptionCheck(
        "kernel_upper_bound",
        kmax <= spec.lambda_bound,
        f"max sampled k = {kmax:.6g} vs declared Lambda = {spec.lambda_bound:.6g}",
        {"x": float(pts[hi_i]), "y": float(pts[hi_j]), "k": kmax},
    )
    return [lower, upper]


def _growth_checks(g: GrowthFunction, sample_count: int) -> list[AssumptionCheck]:
    m = g.bound
    ladder = np.geomspace(10.0 * m * 1e-8, 10.0 * m, num=max(4 * sample_count, 8))
    f = g(ladder)
    checks = []

    steps = np.diff(f)
    k = int(np.argmin(steps))
    checks.append(
        AssumptionCheck(
            "growth_strictly_increasing",
            bool(np.all(steps > 0)) and float(g(0.0)) < f[0],
            "F sampled on a geometric ladder in (0, 10M]",
            {} if steps[k] > 0 else {"u": float(ladder[k]), "v": float(ladder[k + 1])},
        )
    )

    ratio = np.diff(f / ladder)
    k = int(np.argmax(ratio))
    checks.append(
        AssumptionCheck(
            "growth_ratio_decreasing",
            bool(np.all(ratio < 0)),
            "F(u)/u strictly decreasing on the ladder",
            {} if ratio[k] < 0 else {"v": float(ladder[k]), "u": float(ladder[k + 1])},
        )
    )

    probe = np.concatenate([-ladder[::-1], [0.0], ladder])
    fp = g(probe)
    k = int(np.argmax(np.maximum(fp - m, -fp)))
    checks.append(
        AssumptionCheck(
            "growth_bounded",
            bool(np.all((fp >= 0) & (fp <= m))),
            f"0 <= F <= M = {m:.6g}",
            {"u": float(probe[k]), "F": float(fp[k])},
        )
    )

    if g.r0 > 1:
        checks.append(AssumptionCheck("r0_above_one", True, f"r0 = {g.r0:.6g} > 1"))
    else:
        logger.warning(f"r0 = {g.r0} <= 1; only the mortality regime is admissible")
        checks.append(
            AssumptionCheck(
                "r0_above_one",
                False,
                f"r0 = {g.r0:.6g} <= 1 (mortality regime is still admissible)",
                {"r0": g.r0},
                advisory=True,
            )
        )
    return checks


def validate_assumptions(spec: KernelSpec, g: GrowthFunction, sample_count: int) -> AssumptionReport:
    """Samples the kernel bounds and the growth-map hypotheses; failures carry a witness."""
    if sample_count < 2:
        raise InvalidSampleCount(f"sample_count must be >= 2, got {sample_count}")
    report = AssumptionReport(tuple(_kernel_checks(spec, sample_count) + _growth_checks(g, sample_count)))
    for check in report.failures():
        logger.warning(f"Hypothesis check '{check.name}' failed: {check.detail} witness={check.witness}")
    return report
