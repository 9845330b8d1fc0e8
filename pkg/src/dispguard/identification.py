"""Identification of attacked sensors from thresholded disparity errors.

With ``n + 1`` sensors (LiDAR ``0``, cameras ``1..n`` right to left) and the
leftmost camera ``n`` as reference, every pair ``i < j < n`` yields a bit
``e[i, j] = E[i, j, n] > theta[i, j, n]``. A triple's bit is the OR of its
three sensor states, so the error vector is a codeword of an OR-code over
the hidden state vector, and the state can be decoded whenever at most
``n - 2`` sensors are attacked.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Sequence, Set, Tuple

from dispguard.detection import DisparityError, ThresholdSet, detect, disparity_error
from dispguard.errors import ContractError
from dispguard.sensors import DisparityMap

Pair = Tuple[int, int]


def pairs_for(reference: int) -> List[Pair]:
    """All ``(i, j)`` with ``i < j < reference`` in lexicographic order."""
    return list(itertools.combinations(range(reference), 2))


@dataclass(frozen=True)
class SensorStateVector:
    states: Tuple[bool, ...]

    @classmethod
    def from_attacked(cls, attacked: Iterable[int], n: int) -> "SensorStateVector":
        hit = set(attacked)
        return cls(tuple(i in hit for i in range(n + 1)))

    @property
    def n(self) -> int:
        return len(self.states) - 1

    @property
    def attacked(self) -> FrozenSet[int]:
        return frozenset(i for i, s in enumerate(self.states) if s)

    def prefix(self, reference: int) -> "SensorStateVector":
        return SensorStateVector(self.states[:reference + 1])


@dataclass(frozen=True)
class ErrorStateVector:
    """Bits ``e[i, j]`` for the pairs of :func:`pairs_for` ``(reference)``."""

    states: Tuple[bool, ...]
    reference: int

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(bool(s) for s in self.states))
        if len(self.states) != len(pairs_for(self.reference)):
            raise ContractError(
                f"reference {self.reference} needs {len(pairs_for(self.reference))} "
                f"entries, got {len(self.states)}")

    @classmethod
    def from_mapping(cls, bits: Mapping[Pair, bool], reference: int) -> "ErrorStateVector":
        try:
            return cls(tuple(bits[p] for p in pairs_for(reference)), reference)
        except KeyError as exc:
            raise ContractError(f"missing error bit for pair {exc.args[0]}") from None

    def __getitem__(self, pair: Pair) -> bool:
        i, j = min(pair), max(pair)
        return self.states[pairs_for(self.reference).index((i, j))]

    def as_dict(self) -> Dict[Pair, bool]:
        return dict(zip(pairs_for(self.reference), self.states))

    def all_zero(self) -> bool:
        return not any(self.states)

    def all_one(self) -> bool:
        return all(self.states)

    def to_list(self) -> List[int]:
        return [int(s) for s in self.states]


@dataclass
class IdentificationResult:
    attacked: Set[int]
    resolved: bool
    levels: List[ErrorStateVector] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "attacked": sorted(self.attacked),
            "resolved": self.resolved,
            "levels": [{"reference": e.reference, "e": e.to_list()} for e in self.levels],
        }


def pairwise_errors(maps: Sequence[DisparityMap], reference: int) -> Dict[Pair, DisparityError]:
    """Disparity error of every pair of maps ``DM_{i,n}``, ``DM_{j,n}``."""
    if len(maps) != reference:
        raise ContractError(f"expected {reference} maps for reference {reference}, got {len(maps)}")
    return {(i, j): disparity_error(maps[i], maps[j], (i, j, reference))
            for i, j in pairs_for(reference)}


def threshold_errors(errors: Mapping[Pair, DisparityError], thresholds: ThresholdSet,
                     reference: int) -> ErrorStateVector:
    bits = {}
    for i, j in pairs_for(reference):
        if (i, j) not in errors:
            raise ContractError(f"missing disparity error for pair {(i, j)}")
        bits[(i, j)] = detect(errors[(i, j)], thresholds[(i, j, reference)])
    return ErrorStateVector.from_mapping(bits, reference)


def compute_error_state_vector(maps: Sequence[DisparityMap], thresholds: ThresholdSet,
                               reference: int | None = None) -> ErrorStateVector:
    """Threshold all pairwise errors of ``maps`` (``maps[i]`` is ``DM_{i,n}``)."""
    if reference is None:
        reference = len(maps)
    return threshold_errors(pairwise_errors(maps, reference), thresholds, reference)


def expected_error_vector(s: SensorStateVector) -> ErrorStateVector:
    """Noise-free code word: ``e[i, j] = s_i or s_j or s_n``."""
    n = s.n
    return ErrorStateVector(
        tuple(s.states[i] or s.states[j] or s.states[n] for i, j in pairs_for(n)), n)


def decode_from_zero(e: ErrorStateVector, i0: int, j0: int) -> SensorStateVector:
    """Decode the state from a zero bit ``e[i0, j0]``.

    That zero clears ``s_i0``, ``s_j0`` and the reference, after which each
    remaining ``s_i`` equals the bit of the pair ``{i, i0}``.
    """
    if e[(i0, j0)]:
        raise ContractError(f"e[{i0},{j0}] is 1; a zero entry is required")
    n = e.reference
    states = [False] * (n + 1)
    for i in range(n):
        k1, k2 = min(i, i0), max(i, i0)
        if k1 != k2 and e[(k1, k2)]:
            states[i] = True
    return SensorStateVector(tuple(states))


def infer_attacked(error_vector_at: Callable[[int], ErrorStateVector], n: int) -> IdentificationResult:
    """Recursive decoding over references ``n, n-1, ..., 3``.

    ``error_vector_at(m)`` returns the error vector of sensors ``0..m`` with
    camera ``m`` as reference. When every bit is one the reference must be
    attacked; it is dropped and the next camera becomes the reference.
    """
    if n < 3:
        raise ContractError("identification needs at least three cameras (n >= 3)")
    attacked: Set[int] = set()
    levels: List[ErrorStateVector] = []
    m = n
    while True:
        e = error_vector_at(m)
        if e.reference != m:
            raise ContractError(f"error vector for reference {e.reference}, expected {m}")
        levels.append(e)
        if e.all_zero():
            return IdentificationResult(attacked, True, levels)
        if not e.all_one():
            i0, j0 = next(p for p, bit in e.as_dict().items() if not bit)
            attacked |= decode_from_zero(e, i0, j0).attacked
            return IdentificationResult(attacked, True, levels)
        attacked.add(m)
        if m == 3:
            # base case: lower sensors are taken as clean under the n-2 bound
            return IdentificationResult(attacked, False, levels)
        m -= 1


def identify(data, thresholds: ThresholdSet) -> IdentificationResult:
    """Identify attacked sensors from per-sensor data.

    ``data`` must expose ``n`` and ``disparity_maps(reference)`` returning
    ``[DM_{0,ref}, ..., DM_{ref-1,ref}]`` on a common scale, regenerated for
    each reference.
    """
    return infer_attacked(
        lambda m: compute_error_state_vector(data.disparity_maps(m), thresholds, m), data.n)


def all_state_vectors(n: int, max_attacked: int) -> Iterable[SensorStateVector]:
    for bits in itertools.product((False, True), repeat=n + 1):
        if sum(bits) <= max_attacked:
            yield SensorStateVector(bits)


def brute_force_identify(e: ErrorStateVector, n: int, max_attacked: int) -> Set[SensorStateVector]:
    """Every state with at most ``max_attacked`` attacks that encodes to ``e``."""
    if e.reference != n:
        raise ContractError("error vector reference must equal n")
    return {s for s in all_state_vectors(n, max_attacked) if expected_error_vector(s) == e}


def brute_force_transcript(levels: Sequence[ErrorStateVector], n: int,
                           max_attacked: int) -> Set[SensorStateVector]:
    """States consistent with every recorded level of a decoding run."""
    return {s for s in all_state_vectors(n, max_attacked)
            if all(expected_error_vector(s.prefix(e.reference)) == e for e in levels)}
