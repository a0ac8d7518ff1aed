"""Uniform lattices, boolean masks, multi-indices, sampled jets, and sup norms.

Every lattice is an axis-aligned uniform grid with one spacing h shared by all
axes.  Coordinates are always produced as origin + k*h with a single multiply,
never by accumulation, so dyadic origins and spacings stay exact in binary
floating point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError, MaskMismatchError, NoNeighborError


def multi_indices(order: int, dim: int) -> list[tuple[int, ...]]:
    """All multi-indices with |alpha| <= order, graded then lexicographic."""
    if order < 0 or dim < 1:
        raise ValueError("order must be >= 0 and dim >= 1")
    out = []
    for total in range(order + 1):
        block = [
            alpha
            for alpha in itertools.product(range(total + 1), repeat=dim)
            if sum(alpha) == total
        ]
        out.extend(sorted(block))
    return out


def alpha_key(alpha: tuple[int, ...]) -> str:
    """Serialization key for a multi-index, e.g. (1, 0) -> "1,0"."""
    return ",".join(str(a) for a in alpha)


def parse_alpha_key(key: str) -> tuple[int, ...]:
    return tuple(int(part) for part in key.split(","))


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice: point k has coordinate origin[a] + k[a]*h on axis a."""

    origin: tuple[float, ...]
    h: float
    extents: tuple[int, ...]

    def __post_init__(self):
        if not (self.h > 0):
            raise ValueError("h must be positive")
        if len(self.origin) != len(self.extents):
            raise ValueError("origin and extents must agree in length")
        if len(self.extents) not in (1, 2):
            raise ValueError("only 1-D and 2-D lattices are supported")
        if any(n < 1 for n in self.extents):
            raise ValueError("extents must be positive")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        object.__setattr__(self, "h", float(self.h))

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def point_count(self) -> int:
        n = 1
        for e in self.extents:
            n *= e
        return n

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.arange(self.extents[axis]) * self.h

    def coord(self, index: tuple[int, ...]) -> tuple[float, ...]:
        return tuple(self.origin[a] + index[a] * self.h for a in range(self.dim))

    def coord_grids(self) -> tuple[np.ndarray, ...]:
        """Meshgrid of coordinates, one array per axis, "ij" indexing."""
        axes = [self.axis_coords(a) for a in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @staticmethod
    def cover(lo, hi, h: float) -> "GridSpec":
        """Smallest grid with origin lo reaching hi; (hi-lo)/h must be integral."""
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        extents = []
        for a in range(len(lo)):
            steps = (hi[a] - lo[a]) / h
            n = int(round(steps))
            if abs(steps - n) > 1e-9:
                raise ValueError(f"span on axis {a} is not a multiple of h")
            extents.append(n + 1)
        return GridSpec(lo, h, tuple(extents))


@dataclass(frozen=True, eq=False)
class GridMask:
    """A boolean membership array over a lattice."""

    grid: GridSpec
    member: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.member, dtype=bool)
        if arr.shape != self.grid.extents:
            raise MaskMismatchError(
                f"mask shape {arr.shape} does not match extents {self.grid.extents}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "member", arr)

    @property
    def count(self) -> int:
        return int(self.member.sum())

    def points(self) -> np.ndarray:
        """Coordinates of the masked lattice points, shape (count, dim)."""
        idx = np.nonzero(self.member)
        cols = [
            self.grid.origin[a] + idx[a].astype(np.float64) * self.grid.h
            for a in range(self.grid.dim)
        ]
        return np.stack(cols, axis=-1)

    def same_lattice(self, other: "GridMask") -> bool:
        return self.grid == other.grid


_CROSS = {1: ndimage.generate_binary_structure(1, 1),
          2: ndimage.generate_binary_structure(2, 1)}
_BOX = {1: ndimage.generate_binary_structure(1, 1),
        2: ndimage.generate_binary_structure(2, 2)}


def interior_of(mask: GridMask) -> GridMask:
    """Points whose 2*dim axis neighbors all lie in the mask.

    A neighbor falling off the lattice counts as absent, so lattice-edge
    points are never interior.
    """
    eroded = ndimage.binary_erosion(
        mask.member, structure=_CROSS[mask.grid.dim], border_value=0
    )
    return GridMask(mask.grid, eroded)


def closure_of(mask: GridMask) -> GridMask:
    """The mask dilated by the full 3^dim neighborhood.

    The box neighborhood (diagonals included) is what makes
    closure_of(interior_of(m)) recover a fat rectangle's corners.
    """
    dilated = ndimage.binary_dilation(mask.member, structure=_BOX[mask.grid.dim])
    return GridMask(mask.grid, dilated)


def boundary_of(mask: GridMask) -> GridMask:
    """closure_of(mask) minus interior_of(mask)."""
    return GridMask(
        mask.grid,
        closure_of(mask).member & ~interior_of(mask).member,
    )


def connected_component_count(mask: GridMask) -> int:
    """Number of 2*dim-connected components of the mask."""
    _, n = ndimage.label(mask.member, structure=_CROSS[mask.grid.dim])
    return int(n)


@dataclass(eq=False)
class SampledJet:
    """Partial-derivative samples on a masked lattice.

    components maps each multi-index alpha with |alpha| <= order to an array
    of samples over the full lattice; entries off the mask are not meaningful
    and are stored as 0.
    """

    order: int
    grid: GridSpec
    mask: GridMask
    components: dict[tuple[int, ...], np.ndarray]

    def __post_init__(self):
        if self.mask.grid != self.grid:
            raise MaskMismatchError("jet mask lives on a different lattice")
        expected = multi_indices(self.order, self.grid.dim)
        for alpha in expected:
            if alpha not in self.components:
                raise ValueError(f"missing component {alpha}")
        cleaned = {}
        for alpha in expected:
            arr = np.asarray(self.components[alpha], dtype=np.float64)
            if arr.shape != self.grid.extents:
                raise ValueError(f"component {alpha} has shape {arr.shape}")
            if not np.isfinite(arr[self.mask.member]).all():
                raise ValueError(f"component {alpha} is not finite on the mask")
            out = np.where(self.mask.member, arr, 0.0)
            out.setflags(write=False)
            cleaned[alpha] = out
        self.components = cleaned

    def component(self, alpha: tuple[int, ...]) -> np.ndarray:
        return self.components[tuple(alpha)]

    def alphas(self) -> list[tuple[int, ...]]:
        return multi_indices(self.order, self.grid.dim)


def jet_scale(jet: SampledJet, factor: float) -> SampledJet:
    return SampledJet(
        jet.order,
        jet.grid,
        jet.mask,
        {a: factor * arr for a, arr in jet.components.items()},
    )


def jet_add(a: SampledJet, b: SampledJet) -> SampledJet:
    if a.grid != b.grid or a.order != b.order:
        raise MaskMismatchError("jets must share lattice and order")
    if not np.array_equal(a.mask.member, b.mask.member):
        raise MaskMismatchError("jets must share the mask")
    return SampledJet(
        a.order,
        a.grid,
        a.mask,
        {al: a.components[al] + b.components[al] for al in a.components},
    )


def fd_partial(
    jet: SampledJet, alpha: tuple[int, ...], axis: int, index: tuple[int, ...]
) -> float:
    """Finite-difference estimate of the axis-partial of component alpha.

    Central second-order when both axis neighbors are masked, one-sided
    first-order toward the single available neighbor otherwise.
    """
    alpha = tuple(alpha)
    arr = jet.components[alpha]
    member = jet.mask.member
    if not member[index]:
        raise NoNeighborError(f"point {index} is not in the mask")
    lo = list(index)
    hi = list(index)
    lo[axis] -= 1
    hi[axis] += 1
    has_lo = lo[axis] >= 0 and member[tuple(lo)]
    has_hi = hi[axis] < jet.grid.extents[axis] and member[tuple(hi)]
    h = jet.grid.h
    if has_lo and has_hi:
        return float((arr[tuple(hi)] - arr[tuple(lo)]) / (2.0 * h))
    if has_hi:
        return float((arr[tuple(hi)] - arr[index]) / h)
    if has_lo:
        return float((arr[index] - arr[tuple(lo)]) / h)
    raise NoNeighborError(f"no axis-{axis} neighbor of {index} in the mask")


def sup_on_mask(values: np.ndarray, mask: GridMask) -> float:
    """max |values| over the masked points."""
    values = np.asarray(values)
    if values.shape != mask.grid.extents:
        raise MaskMismatchError("values do not match the lattice shape")
    if mask.count == 0:
        raise EmptyMaskError("sup over an empty mask")
    return float(np.max(np.abs(values[mask.member])))
