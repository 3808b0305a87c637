"""Closed-form attack statistics and the exhaustive branch enumeration."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DegenerateParametersError
from .protocol import measurement_outcome_prob, secret_key_fraction
from .states import Basis, PolarizationState


@dataclass(frozen=True)
class AttackParameters:
    """Bob's splitter port-1 probability at the two resend wavelengths.

    ``r1`` belongs to the laser used after a rectilinear result, ``r2`` to
    the diagonal one. The attack wants ``r1 > 0.5 > r2`` but every value in
    [0, 1] is accepted.
    """

    r1: float
    r2: float

    def __post_init__(self):
        for name in ("r1", "r2"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def degenerate(self) -> bool:
        s = self.r1 + self.r2
        return s == 0.0 or s == 2.0


def qber_eq2(p: AttackParameters) -> float:
    """Mean of the two per-basis sifted error rates under the attack.

    ``(1/4) * ((1 - r1) / (2 - r1 - r2) + r2 / (r1 + r2))``; the first term
    comes from diagonal Alice states, the second from rectilinear ones.
    """
    s = p.r1 + p.r2
    if s == 0.0 or s == 2.0:
        raise DegenerateParametersError(
            f"r1 + r2 = {s:g}: one basis never sifts, so its error rate is undefined"
        )
    return 0.25 * ((1.0 - p.r1) / (2.0 - s) + p.r2 / s)


def pooled_qber_closed_form(p: AttackParameters) -> float:
    """Error fraction over all sifted bits, ``(1 - r1 + r2) / 4``."""
    return 0.25 * (1.0 - p.r1 + p.r2)


def eve_basis_match_closed_form(p: AttackParameters) -> float:
    """Fraction of sifted bits where Eve measured in Alice's basis."""
    return 0.5 * (1.0 + p.r1 - p.r2)


class Category(enum.Enum):
    SIFTED_CORRECT = "sifted_correct"
    SIFTED_ERROR = "sifted_error"
    DISCARDED = "discarded"


@dataclass(frozen=True)
class TreeLeaf:
    alice_basis: Basis
    category: Category
    probability: float


def tree_probabilities(p: AttackParameters, alice_basis: Basis) -> list[TreeLeaf]:
    """Outcome distribution at Bob for one Alice basis, given that Bob clicked."""
    alice_basis = Basis(alice_basis)
    if alice_basis is Basis.RECTILINEAR:
        correct = 0.5 * p.r1 + 0.25 * p.r2
        error = 0.25 * p.r2
    else:
        correct = 0.5 * (1.0 - p.r2) + 0.25 * (1.0 - p.r1)
        error = 0.25 * (1.0 - p.r1)
    return [
        TreeLeaf(alice_basis, Category.SIFTED_CORRECT, correct),
        TreeLeaf(alice_basis, Category.SIFTED_ERROR, error),
        TreeLeaf(alice_basis, Category.DISCARDED, 1.0 - correct - error),
    ]


@dataclass(frozen=True)
class EnumerationResult:
    pooled_qber: float
    per_basis_qber: tuple[float, float]
    basis_averaged_qber: float
    sift_prob: float
    eve_basis_match_fraction: float
    sift_prob_by_basis: tuple[float, float]
    error_prob_by_basis: tuple[float, float]


def enumerate_attack(p: AttackParameters, eve_ratio: float = 0.5) -> EnumerationResult:
    """Exact expectation over every branch of the attack.

    Branches: Alice state (1/4 each), Eve's splitter port (``eve_ratio``),
    Eve's bit, Bob's port (``r1`` or ``r2`` by resend laser) and Bob's bit.
    Every probability is conditional on Eve and Bob both clicking.
    """
    sift = [0.0, 0.0]
    err = [0.0, 0.0]
    match = 0.0
    for alice, eve_basis, eve_bit, bob_basis, bob_bit in itertools.product(
        PolarizationState, Basis, (0, 1), Basis, (0, 1)
    ):
        w = 0.25
        w *= eve_ratio if eve_basis is Basis.RECTILINEAR else 1.0 - eve_ratio
        w *= measurement_outcome_prob(alice, eve_basis, eve_bit)
        r = p.r1 if eve_basis is Basis.RECTILINEAR else p.r2
        w *= r if bob_basis is Basis.RECTILINEAR else 1.0 - r
        w *= measurement_outcome_prob(PolarizationState.from_basis_bit(eve_basis, eve_bit), bob_basis, bob_bit)
        if w == 0.0 or bob_basis != alice.basis:
            continue
        sift[alice.basis] += w
        if bob_bit != alice.bit:
            err[alice.basis] += w
        if eve_basis == alice.basis:
            match += w
    total = sift[0] + sift[1]
    if sift[0] == 0.0 or sift[1] == 0.0:
        raise DegenerateParametersError(
            f"r1={p.r1:g}, r2={p.r2:g}: one basis never sifts, so its error rate is undefined"
        )
    per_basis = (err[0] / sift[0], err[1] / sift[1])
    return EnumerationResult(
        pooled_qber=(err[0] + err[1]) / total,
        per_basis_qber=per_basis,
        basis_averaged_qber=0.5 * (per_basis[0] + per_basis[1]),
        sift_prob=total,
        eve_basis_match_fraction=match / total,
        sift_prob_by_basis=(sift[0], sift[1]),
        error_prob_by_basis=(err[0], err[1]),
    )


@dataclass(frozen=True)
class SweepRow:
    r1: float
    r2: float
    err_eq2: float | None
    err_pooled: float | None
    eve_basis_match: float | None
    key_fraction: float | None
    degenerate: bool
    note: str = ""


def sweep_correlation(grid: Iterable[AttackParameters | Sequence[float]]) -> list[SweepRow]:
    """Closed-form table over ``grid``; bad cells are flagged rather than dropped."""
    rows = []
    for cell in grid:
        r1, r2 = (cell.r1, cell.r2) if isinstance(cell, AttackParameters) else map(float, cell)
        try:
            p = AttackParameters(r1, r2)
        except ValueError as exc:
            rows.append(SweepRow(r1, r2, None, None, None, None, True, str(exc)))
            continue
        pooled = pooled_qber_closed_form(p)
        match = eve_basis_match_closed_form(p)
        try:
            err = qber_eq2(p)
        except DegenerateParametersError as exc:
            rows.append(SweepRow(r1, r2, None, pooled, match, None, True, str(exc)))
            continue
        rows.append(SweepRow(r1, r2, err, pooled, match, secret_key_fraction(err), False))
    return rows
