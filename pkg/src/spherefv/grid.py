"""Latitude-longitude web grid with optional cell-count reduction toward the poles.

Cells are spherical rectangles bounded by latitude and longitude arcs.  Bands
are uniform in phi.  With reduction enabled, a band's cell count halves when
its mid-latitude circle becomes short relative to the band's cell width; the
coarse cells at a reduction latitude are five-sided (their equator-side
boundary is split into two edges shared with two finer neighbors).

Edge conventions:
  * kind "lambda": phi = const, endpoints ordered by increasing lambda.
  * kind "phi":    lambda = const, endpoints ordered by increasing phi.
  * left_cell is the cell on the smaller-coordinate side (south for "lambda"
    edges, west for "phi" edges); it supplies the left Riemann state.
  * pole-adjacent bands get degenerate zero-length "lambda" edges with no
    right cell; they carry identically zero flux.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .geometry import TWO_PI, HALF_PI, SpherePoint

KIND_LAMBDA = 0  # phi = const (zonal)
KIND_PHI = 1     # lambda = const (meridional)

_KIND_NAMES = {KIND_LAMBDA: "lambda", KIND_PHI: "phi"}


class GridError(ValueError):
    """Raised for invalid grid construction parameters."""


def cell_area(lambda1: float, lambda2: float, phi1: float, phi2: float) -> float:
    """Exact area (lambda2 - lambda1) * (sin phi2 - sin phi1) of a grid cell."""
    if not lambda1 < lambda2:
        raise ValueError("require lambda1 < lambda2")
    if not phi1 < phi2:
        raise ValueError("require phi1 < phi2")
    return (lambda2 - lambda1) * (math.sin(phi2) - math.sin(phi1))


@dataclass(frozen=True)
class Band:
    """One latitude band: phi range, cell count and starting cell id."""

    phi1: float
    phi2: float
    n_cells: int
    cell0: int


@dataclass(frozen=True)
class Cell:
    """Read-only view of one grid cell."""

    id: int
    band_index: int
    cell_index: int
    lambda1: float
    lambda2: float
    phi1: float
    phi2: float
    area: float
    edges: Tuple[Tuple[int, int], ...]  # (edge_id, orientation sign)


@dataclass(frozen=True)
class Edge:
    """Read-only view of one grid edge."""

    id: int
    kind: str  # "lambda" (phi const) or "phi" (lambda const)
    p1: SpherePoint
    p2: SpherePoint
    midpoint: SpherePoint
    length: float
    left_cell: int
    right_cell: Optional[int]

    @property
    def degenerate(self) -> bool:
        return self.right_cell is None


class Grid:
    """Immutable web grid on the unit sphere.

    Cell and edge data live in dense numpy arrays (index = id); the ``cell``
    and ``edge`` methods build lightweight views for convenience.  Do not
    mutate the arrays after construction.
    """

    def __init__(self, bands, c_lam1, c_lam2, c_phi1, c_phi2, c_band,
                 c_index, cell_edges, e_kind, e_lam1, e_phi1, e_lam2,
                 e_phi2, e_left, e_right):
        self.bands: List[Band] = bands
        self.c_lam1 = c_lam1
        self.c_lam2 = c_lam2
        self.c_phi1 = c_phi1
        self.c_phi2 = c_phi2
        self.c_band = c_band
        self.c_index = c_index
        self.c_area = (c_lam2 - c_lam1) * (np.sin(c_phi2) - np.sin(c_phi1))
        self.cell_edges: List[Tuple[Tuple[int, int], ...]] = cell_edges

        self.e_kind = e_kind
        self.e_lam1 = e_lam1
        self.e_phi1 = e_phi1
        self.e_lam2 = e_lam2
        self.e_phi2 = e_phi2
        self.e_left = e_left
        self.e_right = e_right  # -1 marks a degenerate pole edge

        zonal = e_kind == KIND_LAMBDA
        self.e_deg = e_right < 0
        self.e_mlam = np.where(zonal, 0.5 * (e_lam1 + e_lam2), e_lam1)
        self.e_mphi = np.where(zonal, e_phi1, 0.5 * (e_phi1 + e_phi2))
        self.e_len = np.where(
            zonal, (e_lam2 - e_lam1) * np.cos(e_phi1), e_phi2 - e_phi1
        )
        self.e_len[self.e_deg] = 0.0  # pole sides are degenerate by definition

    # -- sizes ---------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return self.c_lam1.size

    @property
    def n_edges(self) -> int:
        return self.e_kind.size

    @property
    def total_area(self) -> float:
        return float(np.sum(self.c_area))

    # -- cell/edge views -----------------------------------------------

    def cell(self, cell_id: int) -> Cell:
        i = int(cell_id)
        return Cell(
            id=i,
            band_index=int(self.c_band[i]),
            cell_index=int(self.c_index[i]),
            lambda1=float(self.c_lam1[i]),
            lambda2=float(self.c_lam2[i]),
            phi1=float(self.c_phi1[i]),
            phi2=float(self.c_phi2[i]),
            area=float(self.c_area[i]),
            edges=self.cell_edges[i],
        )

    def edge(self, edge_id: int) -> Edge:
        i = int(edge_id)
        p1 = SpherePoint.from_angles(float(self.e_lam1[i]), float(self.e_phi1[i]))
        p2 = SpherePoint.from_angles(float(self.e_lam2[i]), float(self.e_phi2[i]))
        mid = SpherePoint.from_angles(float(self.e_mlam[i]), float(self.e_mphi[i]))
        right = int(self.e_right[i])
        return Edge(
            id=i,
            kind=_KIND_NAMES[int(self.e_kind[i])],
            p1=p1,
            p2=p2,
            midpoint=mid,
            length=float(self.e_len[i]),
            left_cell=int(self.e_left[i]),
            right_cell=None if right < 0 else right,
        )

    def cells(self):
        return (self.cell(i) for i in range(self.n_cells))

    def edges(self):
        return (self.edge(i) for i in range(self.n_edges))

    def edge_sign(self, edge_id: int, cell_id: int) -> int:
        """Orientation sign of an edge for one of its cells: +1 if the cell
        receives edge_flux as its outward value (it is the left cell), -1
        for the right cell."""
        if int(self.e_left[edge_id]) == int(cell_id):
            return 1
        if int(self.e_right[edge_id]) == int(cell_id):
            return -1
        raise ValueError(f"edge {edge_id} is not adjacent to cell {cell_id}")

    @property
    def cell_lam_center(self) -> np.ndarray:
        return 0.5 * (self.c_lam1 + self.c_lam2)

    @property
    def cell_phi_center(self) -> np.ndarray:
        return 0.5 * (self.c_phi1 + self.c_phi2)

    def cell_center_cartesian(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        lam = self.cell_lam_center
        phi = self.cell_phi_center
        cp = np.cos(phi)
        return cp * np.cos(lam), cp * np.sin(lam), np.sin(phi)


def _band_counts(n_lat: int, n_lon_equator: int, reduction: str,
                 threshold: float) -> List[int]:
    """Cell count per band (south to north), applying the halving rule."""
    dphi = math.pi / n_lat
    half = n_lat // 2
    counts_north = []
    count = n_lon_equator
    for k in range(half):
        phi_mid = (k + 0.5) * dphi
        # at most one halving per band: adjacent bands may differ by a
        # factor 2 only (the five-sided cells have exactly two fine
        # neighbors)
        if (reduction == "halving" and count > 4
                and math.cos(phi_mid) < threshold * (count / n_lon_equator)):
            if count % 2 != 0:
                raise GridError(
                    f"band {half + k}: cell count {count} cannot be halved; "
                    f"choose n_lon_equator with more factors of 2"
                )
            count //= 2
        counts_north.append(count)
    return counts_north[::-1] + counts_north


def build_grid(n_lat: int, n_lon_equator: int, reduction: str = "none",
               threshold: float = 0.9) -> Grid:
    """Build a web grid with n_lat uniform phi-bands.

    Args:
        n_lat: even number of latitude bands, >= 4.
        n_lon_equator: cells per band at the equator, >= 4.
        reduction: "none" for a plain tensor grid, or "halving" to halve a
            band's cell count whenever cos(phi_mid) < threshold * (count /
            n_lon_equator), evaluated moving from the equator to each pole.
        threshold: trigger ratio for "halving".  The default 0.9 keeps
            physical cell widths within a factor ~1.8 of the equatorial
            width while reducing early enough that the tan(phi)-scaled
            longitudinal wave speeds do not shrink the stable time step
            below its equatorial value.

    Raises:
        GridError: on invalid parameters, or when halving is requested for a
            band whose current count is odd.
    """
    if n_lat < 4 or n_lat % 2 != 0:
        raise GridError(f"n_lat must be an even integer >= 4, got {n_lat}")
    if n_lon_equator < 4:
        raise GridError(f"n_lon_equator must be >= 4, got {n_lon_equator}")
    if reduction not in ("none", "halving"):
        raise GridError(f"unknown reduction {reduction!r}")
    if not 0.0 < threshold:
        raise GridError(f"threshold must be positive, got {threshold}")

    dphi = math.pi / n_lat
    counts = _band_counts(n_lat, n_lon_equator, reduction, threshold)

    # band boundaries, with the equator and the poles snapped exactly
    levels = [-HALF_PI + k * dphi for k in range(n_lat + 1)]
    levels[0] = -HALF_PI
    levels[n_lat // 2] = 0.0
    levels[n_lat] = HALF_PI

    bands: List[Band] = []
    cell0 = 0
    for b in range(n_lat):
        bands.append(Band(phi1=levels[b], phi2=levels[b + 1],
                          n_cells=counts[b], cell0=cell0))
        cell0 += counts[b]
    n_cells = cell0

    c_lam1 = np.empty(n_cells)
    c_lam2 = np.empty(n_cells)
    c_phi1 = np.empty(n_cells)
    c_phi2 = np.empty(n_cells)
    c_band = np.empty(n_cells, dtype=np.int64)
    c_index = np.empty(n_cells, dtype=np.int64)
    for b, band in enumerate(bands):
        n = band.n_cells
        dlam = TWO_PI / n
        ids = band.cell0 + np.arange(n)
        c_lam1[ids] = np.arange(n) * dlam
        c_lam2[ids] = np.arange(1, n + 1) * dlam
        c_phi1[ids] = band.phi1
        c_phi2[ids] = band.phi2
        c_band[ids] = b
        c_index[ids] = np.arange(n)

    # edge arrays, built in a fixed deterministic order:
    # zonal edges interface by interface (south pole first), then meridional
    # edges band by band.
    e_kind: List[int] = []
    e_lam1: List[float] = []
    e_phi1: List[float] = []
    e_lam2: List[float] = []
    e_phi2: List[float] = []
    e_left: List[int] = []
    e_right: List[int] = []

    # per-cell edge slots: south list, east id, north list, west id
    south: List[List[Tuple[int, int]]] = [[] for _ in range(n_cells)]
    north: List[List[Tuple[int, int]]] = [[] for _ in range(n_cells)]
    east = np.full(n_cells, -1, dtype=np.int64)
    west = np.full(n_cells, -1, dtype=np.int64)

    def add_edge(kind, l1, p1, l2, p2, left, right) -> int:
        e_kind.append(kind)
        e_lam1.append(l1)
        e_phi1.append(p1)
        e_lam2.append(l2)
        e_phi2.append(p2)
        e_left.append(left)
        e_right.append(right)
        return len(e_kind) - 1

    # zonal edges at each phi level k = 0..n_lat
    for k in range(n_lat + 1):
        phi = levels[k]
        if k == 0:
            band = bands[0]
            dlam = TWO_PI / band.n_cells
            for j in range(band.n_cells):
                cid = band.cell0 + j
                eid = add_edge(KIND_LAMBDA, j * dlam, phi, (j + 1) * dlam, phi,
                               cid, -1)
                south[cid].append((eid, 1))
        elif k == n_lat:
            band = bands[-1]
            dlam = TWO_PI / band.n_cells
            for j in range(band.n_cells):
                cid = band.cell0 + j
                eid = add_edge(KIND_LAMBDA, j * dlam, phi, (j + 1) * dlam, phi,
                               cid, -1)
                north[cid].append((eid, 1))
        else:
            below, above = bands[k - 1], bands[k]
            n_fine = max(below.n_cells, above.n_cells)
            dlam = TWO_PI / n_fine
            rb = n_fine // below.n_cells  # 1 or 2
            ra = n_fine // above.n_cells
            for j in range(n_fine):
                cb = below.cell0 + j // rb
                ca = above.cell0 + j // ra
                eid = add_edge(KIND_LAMBDA, j * dlam, phi, (j + 1) * dlam, phi,
                               cb, ca)
                north[cb].append((eid, 1))   # below cell is the left cell
                south[ca].append((eid, -1))

    # meridional edges, band by band
    for b, band in enumerate(bands):
        n = band.n_cells
        dlam = TWO_PI / n
        for j in range(n):
            lam = j * dlam
            cw = band.cell0 + (j - 1) % n
            ce = band.cell0 + j
            eid = add_edge(KIND_PHI, lam, band.phi1, lam, band.phi2, cw, ce)
            east[cw] = eid
            west[ce] = eid

    cell_edges: List[Tuple[Tuple[int, int], ...]] = []
    for i in range(n_cells):
        # counterclockwise as seen from outside: south west->east, east,
        # north east->west, west
        entry = list(south[i])
        entry.append((int(east[i]), 1))
        entry.extend(reversed(north[i]))
        entry.append((int(west[i]), -1))
        cell_edges.append(tuple(entry))

    return Grid(
        bands=bands,
        c_lam1=c_lam1, c_lam2=c_lam2, c_phi1=c_phi1, c_phi2=c_phi2,
        c_band=c_band, c_index=c_index, cell_edges=cell_edges,
        e_kind=np.array(e_kind, dtype=np.int8),
        e_lam1=np.array(e_lam1), e_phi1=np.array(e_phi1),
        e_lam2=np.array(e_lam2), e_phi2=np.array(e_phi2),
        e_left=np.array(e_left, dtype=np.int64),
        e_right=np.array(e_right, dtype=np.int64),
    )


def validate_grid(grid: Grid) -> List[str]:
    """Check all grid invariants; returns a list of violations (empty = valid)."""
    v: List[str] = []

    area = (grid.c_lam2 - grid.c_lam1) * (np.sin(grid.c_phi2) - np.sin(grid.c_phi1))
    bad = np.nonzero(np.abs(area - grid.c_area) > 1e-14)[0]
    for i in bad:
        v.append(f"cell {i}: area {grid.c_area[i]!r} differs from formula {area[i]!r}")

    if abs(grid.total_area - 4.0 * math.pi) > 1e-10:
        v.append(f"total area {grid.total_area!r} differs from 4*pi")

    for b, band in enumerate(grid.bands):
        ids = band.cell0 + np.arange(band.n_cells)
        gaps = grid.c_lam1[ids[1:]] - grid.c_lam2[ids[:-1]]
        if np.any(np.abs(gaps) > 1e-12):
            v.append(f"band {b}: cells do not tile [0, 2*pi) in lambda")
        width = np.sum(grid.c_lam2[ids] - grid.c_lam1[ids])
        if abs(width - TWO_PI) > 1e-10:
            v.append(f"band {b}: lambda widths sum to {width!r}, not 2*pi")

    zonal = grid.e_kind == KIND_LAMBDA
    length = np.where(
        zonal,
        (grid.e_lam2 - grid.e_lam1) * np.cos(grid.e_phi1),
        grid.e_phi2 - grid.e_phi1,
    )
    bad = np.nonzero(np.abs(length - grid.e_len) > 1e-14)[0]
    for i in bad:
        v.append(f"edge {i}: stored length {grid.e_len[i]!r} differs from formula")

    # adjacency: each edge must appear in its cells' lists with the right signs
    seen = {}
    for cid, entry in enumerate(grid.cell_edges):
        for eid, sign in entry:
            seen.setdefault(eid, []).append((cid, sign))
    for eid in range(grid.n_edges):
        left = int(grid.e_left[eid])
        right = int(grid.e_right[eid])
        listed = dict(seen.get(eid, []))
        if right < 0:
            if list(listed) != [left]:
                v.append(f"edge {eid}: degenerate edge not owned solely by cell {left}")
            continue
        if set(listed) != {left, right}:
            v.append(f"edge {eid}: adjacency {sorted(listed)} != cells ({left}, {right})")
            continue
        if listed[left] != 1 or listed[right] != -1:
            v.append(f"edge {eid}: orientation signs not opposite (+left/-right)")

    # five-sided cells occur exactly where the equator-side band is finer
    for cid in range(grid.n_cells):
        b = int(grid.c_band[cid])
        band = grid.bands[b]
        south_of_equator = band.phi2 <= 0.0
        nb = b - 1 if not south_of_equator else b + 1
        finer_side = (
            0 <= nb < len(grid.bands)
            and grid.bands[nb].n_cells == 2 * band.n_cells
        )
        expected = 5 if finer_side else 4
        if len(grid.cell_edges[cid]) != expected:
            v.append(
                f"cell {cid}: {len(grid.cell_edges[cid])} edges, expected {expected}"
            )

    v.extend(_check_split_sides(grid))
    return v


def _check_split_sides(grid: Grid) -> List[str]:
    """Verify each coarse cell's split side spans its lambda extent."""
    v: List[str] = []
    per_cell_zonal: dict = {}
    for eid in range(grid.n_edges):
        if grid.e_kind[eid] != KIND_LAMBDA or grid.e_right[eid] < 0:
            continue
        for cid in (int(grid.e_left[eid]), int(grid.e_right[eid])):
            phi = grid.e_phi1[eid]
            key = (cid, round(float(phi), 12))
            per_cell_zonal.setdefault(key, []).append(eid)
    for (cid, _phi), eids in per_cell_zonal.items():
        if len(eids) == 1:
            continue
        lo = min(float(grid.e_lam1[e]) for e in eids)
        hi = max(float(grid.e_lam2[e]) for e in eids)
        if abs(lo - grid.c_lam1[cid]) > 1e-12 or abs(hi - grid.c_lam2[cid]) > 1e-12:
            v.append(f"cell {cid}: split side does not match cell lambda extent")
        covered = sum(float(grid.e_lam2[e] - grid.e_lam1[e]) for e in eids)
        if abs(covered - (grid.c_lam2[cid] - grid.c_lam1[cid])) > 1e-12:
            v.append(f"cell {cid}: split side leaves gaps in lambda")
    return v


def dump_cells_csv(grid: Grid, path: str) -> None:
    """Write `cell_id,band,lambda1,lambda2,phi1,phi2,area` rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("cell_id,band,lambda1,lambda2,phi1,phi2,area\n")
        for i in range(grid.n_cells):
            f.write(
                f"{i},{int(grid.c_band[i])},{grid.c_lam1[i]:.17g},"
                f"{grid.c_lam2[i]:.17g},{grid.c_phi1[i]:.17g},"
                f"{grid.c_phi2[i]:.17g},{grid.c_area[i]:.17g}\n"
            )


def dump_edges_csv(grid: Grid, path: str) -> None:
    """Write `edge_id,kind,l1,p1,l2,p2,left,right` rows (right empty if absent)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("edge_id,kind,l1,p1,l2,p2,left,right\n")
        for i in range(grid.n_edges):
            right = int(grid.e_right[i])
            f.write(
                f"{i},{_KIND_NAMES[int(grid.e_kind[i])]},{grid.e_lam1[i]:.17g},"
                f"{grid.e_phi1[i]:.17g},{grid.e_lam2[i]:.17g},{grid.e_phi2[i]:.17g},"
                f"{int(grid.e_left[i])},{'' if right < 0 else right}\n"
            )
