"""Belief-function engine over a frame of exhaustive, exclusive hypotheses.

Masses live on the non-empty subsets of the frame (closed world: no mass on
the empty set), encoded as bitmasks over the frame order.  Combination uses
Dempster's conjunctive rule, which redistributes the conflict mass
proportionally; decisions use the pignistic probability.

Subset enumeration is exponential in the frame size, so frames are capped at
16 hypotheses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MASS_SUM_TOL = 1e-9
MAX_FRAME = 16


class EvidenceError(ValueError):
    """Malformed frame, mass or probability input."""


class TotalConflictError(EvidenceError):
    """Two sources place all their mass on disjoint subsets (kappa = 1)."""


@dataclass(frozen=True)
class Frame:
    """Ordered singleton hypotheses. The order fixes the bitmask encoding and
    breaks decision ties."""

    labels: tuple[str, ...]

    def __init__(self, labels: Iterable[str]):
        labels = tuple(labels)
        if len(labels) < 2:
            raise EvidenceError("frame needs at least 2 hypotheses")
        if len(set(labels)) != len(labels):
            raise EvidenceError("frame hypotheses must be distinct")
        if len(labels) > MAX_FRAME:
            raise EvidenceError(
                f"frame of {len(labels)} hypotheses exceeds the cap of "
                f"{MAX_FRAME} (subset enumeration grows exponentially)")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.labels)) - 1

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def mask_of(self, labels: Iterable[str]) -> int:
        mask = 0
        for lab in labels:
            mask |= 1 << self.index(lab)
        return mask

    def members(self, mask: int) -> tuple[str, ...]:
        return tuple(lab for i, lab in enumerate(self.labels) if mask >> i & 1)


@dataclass(frozen=True, eq=False)
class MassFunction:
    """Belief masses over the non-empty subsets of a frame.

    masses[k] is the mass of the subset whose bitmask is k; masses[0] (the
    empty set) must be zero and the total must be 1 within MASS_SUM_TOL.
    """

    frame: Frame
    masses: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.masses, dtype=float)
        size = 1 << len(self.frame)
        if m.shape != (size,):
            raise EvidenceError(f"mass vector must have length {size}")
        if m[0] != 0.0:
            raise EvidenceError("closed world: no mass on the empty set")
        if np.any(m < -1e-12):
            raise EvidenceError("negative mass")
        total = float(m.sum())
        if abs(total - 1.0) > MASS_SUM_TOL:
            raise EvidenceError(f"masses sum to {total!r}, not 1")
        m = np.where(m < 0.0, 0.0, m)
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    def mass(self, labels: Iterable[str]) -> float:
        return float(self.masses[self.frame.mask_of(labels)])

    def focal_sets(self) -> list[tuple[int, float]]:
        """(bitmask, mass) pairs with positive mass, ascending bitmask."""
        return [(k, float(v)) for k, v in enumerate(self.masses) if v > 0.0]


def vacuous(frame: Frame) -> MassFunction:
    """Total ignorance: all mass on the full frame."""
    m = np.zeros(1 << len(frame))
    m[frame.full_mask] = 1.0
    return MassFunction(frame, m)


def bba_from_probs(frame: Frame, probs: Sequence[float]) -> MassFunction:
    """Mass assignment from one-vs-all probabilities.

    Each hypothesis H with probability P contributes P/|frame| to {H} and
    (1-P)/|frame| to its complement; nothing else receives mass.  The result
    sums to 1 by construction.
    """
    probs = np.asarray(probs, dtype=float)
    n = len(frame)
    if probs.shape != (n,):
        raise EvidenceError(f"expected {n} probabilities, got {probs.shape}")
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise EvidenceError("probabilities must lie in [0, 1]")
    m = np.zeros(1 << n)
    full = frame.full_mask
    for i, p in enumerate(probs):
        m[1 << i] += p / n
        m[full ^ (1 << i)] += (1.0 - p) / n
    # Guard against accumulated rounding pushing the total off 1.
    m[0] = 0.0
    return MassFunction(frame, m)


def _pair_products(m1: MassFunction, m2: MassFunction):
    """Products m1(A)m2(B) grouped by A&B, accumulated in an order symmetric
    in the two arguments so that combination commutes exactly."""
    a1 = m1.masses
    a2 = m2.masses
    size = len(a1)
    out = np.zeros(size)
    for a in range(size):
        if a1[a] == 0.0 and a2[a] == 0.0:
            continue
        out[a] += a1[a] * a2[a]
        for b in range(a + 1, size):
            term = a1[a] * a2[b] + a1[b] * a2[a]
            if term != 0.0:
                out[a & b] += term
    return out


def conflict(m1: MassFunction, m2: MassFunction) -> float:
    """Conflict mass kappa: total product mass on disjoint subset pairs."""
    if m1.frame != m2.frame:
        raise EvidenceError("mass functions live on different frames")
    return float(_pair_products(m1, m2)[0])


def combine_dempster(m1: MassFunction, m2: MassFunction
                     ) -> tuple[MassFunction, float]:
    """Dempster's rule of combination. Returns the fused mass and kappa.

    Raises TotalConflictError when kappa = 1 (never a silent NaN).
    """
    if m1.frame != m2.frame:
        raise EvidenceError("mass functions live on different frames")
    prod = _pair_products(m1, m2)
    kappa = float(prod[0])
    if kappa >= 1.0 - 1e-12:
        raise TotalConflictError(
            f"total conflict (kappa = {kappa!r}); the sources are contradictory")
    prod[0] = 0.0
    fused = prod / (1.0 - kappa)
    return MassFunction(m1.frame, fused), kappa


class CombinedMass(NamedTuple):
    mass: MassFunction
    kappas: tuple[float, ...]


def combine_all(masses: Sequence[MassFunction],
                names: Sequence[str] | None = None) -> CombinedMass:
    """Left fold of Dempster's rule; associativity makes the result order
    independent up to rounding.  kappas holds the conflict of each fold step.

    On total conflict the error names the offending pair of sources.
    """
    if not masses:
        raise EvidenceError("nothing to combine")
    if names is not None and len(names) != len(masses):
        raise EvidenceError("names and masses must align")
    acc = masses[0]
    kappas: list[float] = []
    for step, m in enumerate(masses[1:], start=1):
        try:
            acc, kappa = combine_dempster(acc, m)
        except TotalConflictError as exc:
            if names is not None:
                raise TotalConflictError(
                    f"total conflict combining {names[step]!r} into the fold "
                    f"of {list(names[:step])!r}") from exc
            raise
        kappas.append(kappa)
    return CombinedMass(acc, tuple(kappas))


def pignistic(m: MassFunction) -> np.ndarray:
    """Pignistic probability per singleton (frame order): each focal set's
    mass split equally among its members.  Sums to 1."""
    n = len(m.frame)
    bet = np.zeros(n)
    for mask, value in m.focal_sets():
        size = bin(mask).count("1")
        share = value / size
        for i in range(n):
            if mask >> i & 1:
                bet[i] += share
    return bet


class Decision(NamedTuple):
    hypothesis: str
    tie: bool


def decide(m: MassFunction) -> Decision:
    """Hypothesis with the highest pignistic probability.

    Ties are broken by frame order and flagged.
    """
    bet = pignistic(m)
    best = int(np.argmax(bet))
    tie = bool(np.sum(np.isclose(bet, bet[best], rtol=0.0, atol=1e-12)) > 1)
    return Decision(m.frame.labels[best], tie)


def pairwise_conflict(
    bbas_by_source: dict[str, Sequence[MassFunction]],
) -> tuple[list[str], np.ndarray]:
    """Mean conflict between each pair of sources over a polygon set.

    Entry (s, t) is the mean of kappa(m_s, m_t) over polygons; the diagonal is
    the self-conflict of a source (generally positive, the rule is not
    idempotent).  The matrix is exactly symmetric.
    """
    sources = list(bbas_by_source.keys())
    counts = {len(v) for v in bbas_by_source.values()}
    if len(counts) != 1:
        raise EvidenceError("every source must provide one bba per polygon")
    n_polys = counts.pop()
    if n_polys == 0:
        raise EvidenceError("no polygons to compare")
    matrix = np.zeros((len(sources), len(sources)))
    for i, s in enumerate(sources):
        for j in range(i, len(sources)):
            t = sources[j]
            total = 0.0
            for ms, mt in zip(bbas_by_source[s], bbas_by_source[t]):
                total += conflict(ms, mt)
            matrix[i, j] = matrix[j, i] = total / n_polys
    return sources, matrix
