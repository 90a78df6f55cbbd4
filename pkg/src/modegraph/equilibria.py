"""Assignable stable equilibria and their regions of attraction.

All coordinates are exact rationals: equilibrium identity across modes and
open-box membership are too brittle in floating point (1/6 vs 0.1666...).
Floats passed in are converted to their exact binary value, so membership
tests on them are still strict inequalities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

Coords = tuple[Fraction, ...]
Witness = tuple[int, tuple[int, ...]]


class NotAnEquilibriumError(ValueError):
    """Coordinates are not of the form (2i-1)/(2k) for any admissible mode."""


def _as_fractions(x) -> Coords:
    return tuple(Fraction(c) for c in x)


def coords_key(coords: Coords) -> str:
    return ",".join(str(c) for c in coords)


@dataclass(frozen=True)
class EquilibriumNode:
    """A stable equilibrium point, deduplicated across the modes that assign it."""

    coords: Coords
    witnesses: frozenset[Witness]

    @property
    def key(self) -> str:
        return coords_key(self.coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def is_diagonal(self) -> bool:
        return len(set(self.coords)) == 1

    def witness_for_mode(self, k: int) -> tuple[int, ...] | None:
        for mode, indices in self.witnesses:
            if mode == k:
                return indices
        return None


@dataclass(frozen=True)
class RoaBox:
    """Open box ](i_j-1)/k, i_j/k[ per axis: the basin of one equilibrium under mode k."""

    mode: int
    indices: tuple[int, ...]
    lower: Coords
    upper: Coords

    def contains(self, point) -> bool:
        """Strict membership; accepts floats or rationals."""
        pt = _as_fractions(point)
        return all(lo < c < hi for c, lo, hi in zip(pt, self.lower, self.upper))

    def center(self) -> Coords:
        return tuple((lo + hi) / 2 for lo, hi in zip(self.lower, self.upper))


def equilibrium_coords(k: int, indices: tuple[int, ...]) -> Coords:
    return tuple(Fraction(2 * i - 1, 2 * k) for i in indices)


def stable_equilibria(k: int, n: int) -> list[EquilibriumNode]:
    """All k^n stable equilibria of mode k for n particles, exact rationals."""
    if k < 1 or n < 1:
        raise ValueError("mode and particle count must be at least 1")
    out = []
    for indices in itertools.product(range(1, k + 1), repeat=n):
        out.append(
            EquilibriumNode(
                coords=equilibrium_coords(k, indices),
                witnesses=frozenset({(k, indices)}),
            )
        )
    return out


def roa_box(k: int, indices: tuple[int, ...]) -> RoaBox:
    """Region of attraction of E_k(indices) under mode k."""
    if any(i < 1 or i > k for i in indices):
        raise ValueError(f"indices {indices} out of range for mode {k}")
    return RoaBox(
        mode=k,
        indices=tuple(indices),
        lower=tuple(Fraction(i - 1, k) for i in indices),
        upper=tuple(Fraction(i, k) for i in indices),
    )


def locate_roa(x, k: int) -> tuple[int, ...] | None:
    """Index tuple of the mode-k box strictly containing x, or None on a boundary."""
    if k < 1:
        raise ValueError("mode must be at least 1")
    indices = []
    for c in _as_fractions(x):
        v = c * k
        if v.denominator == 1:
            return None
        indices.append(int(v) + 1)
    return tuple(indices)


def canonical_node(coords, N: int) -> EquilibriumNode:
    """Collect every witness (k, indices), k <= N, that assigns these coordinates."""
    pt = _as_fractions(coords)
    witnesses = set()
    for k in range(1, N + 1):
        indices = []
        for c in pt:
            m = c * 2 * k
            if m.denominator != 1 or m.numerator % 2 == 0 or not 1 <= m.numerator <= 2 * k - 1:
                break
            indices.append((m.numerator + 1) // 2)
        else:
            witnesses.add((k, tuple(indices)))
    if not witnesses:
        raise NotAnEquilibriumError(
            f"{coords_key(pt)} is not a stable equilibrium of any mode k <= {N}"
        )
    return EquilibriumNode(coords=pt, witnesses=frozenset(witnesses))


@dataclass(frozen=True)
class Region:
    """Open axis-aligned box, optionally intersected with the strict ordering
    x_1 > x_2 > ... (the below-diagonal wedge used throughout the analysis)."""

    bounds: tuple[tuple[Fraction, Fraction], ...]
    below_diagonal: bool = False

    @staticmethod
    def box(n: int, lo=0, hi=1, below_diagonal: bool = False) -> "Region":
        b = ((Fraction(lo), Fraction(hi)),) * n
        return Region(bounds=b, below_diagonal=below_diagonal)

    def contains(self, point) -> bool:
        pt = _as_fractions(point)
        if len(pt) != len(self.bounds):
            raise ValueError("point dimension does not match region")
        if not all(lo < c < hi for c, (lo, hi) in zip(pt, self.bounds)):
            return False
        if self.below_diagonal:
            return all(pt[i] > pt[i + 1] for i in range(len(pt) - 1))
        return True

    def contains_closure(self, point) -> bool:
        pt = _as_fractions(point)
        if not all(lo <= c <= hi for c, (lo, hi) in zip(pt, self.bounds)):
            return False
        if self.below_diagonal:
            return all(pt[i] >= pt[i + 1] for i in range(len(pt) - 1))
        return True


def assignable_equilibria(N: int, n: int, region: Region | None = None) -> list[EquilibriumNode]:
    """Deduplicated union of E_k for k <= N, sorted by coordinates.

    Node identity is the reduced rational coordinate vector; witnesses from
    every contributing mode are merged.
    """
    if N < 1 or n < 1:
        raise ValueError("mode budget and particle count must be at least 1")
    merged: dict[Coords, set[Witness]] = {}
    for k in range(1, N + 1):
        for indices in itertools.product(range(1, k + 1), repeat=n):
            coords = equilibrium_coords(k, indices)
            if region is not None and not region.contains(coords):
                continue
            merged.setdefault(coords, set()).add((k, indices))
    return [
        EquilibriumNode(coords=c, witnesses=frozenset(w))
        for c, w in sorted(merged.items())
    ]
