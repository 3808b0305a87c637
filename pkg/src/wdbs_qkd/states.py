"""Measurement bases and the four BB84 polarization states."""
from __future__ import annotations

import enum


class Basis(enum.IntEnum):
    RECTILINEAR = 0
    DIAGONAL = 1

    @property
    def label(self) -> str:
        return "rectilinear" if self is Basis.RECTILINEAR else "diagonal"


class PolarizationState(enum.IntEnum):
    """H (0 deg), V (90 deg), D (45 deg), A (135 deg).

    The integer value is ``2 * basis + bit``, which the simulation kernels
    rely on for indexing.
    """

    H = 0
    V = 1
    D = 2
    A = 3

    @property
    def basis(self) -> Basis:
        return Basis(self.value // 2)

    @property
    def bit(self) -> int:
        return self.value % 2

    @classmethod
    def from_basis_bit(cls, basis: Basis, bit: int) -> "PolarizationState":
        if bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {bit!r}")
        return cls(2 * int(basis) + bit)

    @property
    def angle_deg(self) -> int:
        return (0, 90, 45, 135)[self.value]


ALL_STATES = tuple(PolarizationState)
