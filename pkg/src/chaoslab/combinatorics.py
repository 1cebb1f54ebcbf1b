"""Diagram counts for fourth cumulants of Hermite chaos components.

``upsilon(q1, q)`` is the number of perfect matchings of four rows of ``q``
labeled nodes with no edge inside a row and exactly ``q1`` edges between
rows 1 and 2. It is checked against explicit enumeration for small ``q``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from scipy.special import gammaln

ENUMERATION_MAX_Q = 4


def _check_pair(q1: int, q: int) -> None:
    if q < 1:
        raise ValueError(f"q must be positive, got {q}")
    if not 0 <= q1 <= q:
        raise ValueError(f"need 0 <= q1 <= q, got q1={q1}, q={q}")


def upsilon(q1: int, q: int) -> int:
    """Exact ``C(q, q1)**4 * (q1!)**2 * (2q - 2q1)!``."""
    _check_pair(q1, q)
    return math.comb(q, q1) ** 4 * math.factorial(q1) ** 2 * math.factorial(2 * (q - q1))


def upsilon_log(q1: int, q: int) -> float:
    """Natural log of :func:`upsilon` via log-gamma."""
    _check_pair(q1, q)
    log_binom = gammaln(q + 1) - gammaln(q1 + 1) - gammaln(q - q1 + 1)
    return float(4 * log_binom + 2 * gammaln(q1 + 1) + gammaln(2 * (q - q1) + 1))


def upsilon_identity(q1: int, q: int) -> bool:
    """Check ``upsilon / (q!)**2 == C(q,q1)**2 * C(2(q-q1), q-q1)`` exactly."""
    _check_pair(q1, q)
    lhs, rem = divmod(upsilon(q1, q), math.factorial(q) ** 2)
    return rem == 0 and lhs == math.comb(q, q1) ** 2 * math.comb(2 * (q - q1), q - q1)


def _matchings_from(row_of, unmatched, hist, e12, e34, q):
    """Depth-first enumeration; ``hist[k]`` counts completed matchings with k edges 1-2.

    Returns the number of completed matchings whose 3-4 edge count differs
    from their 1-2 edge count (must be zero).
    """
    if not unmatched:
        hist[e12] += 1
        return int(e12 != e34)
    first = unmatched[0]
    rest = unmatched[1:]
    bad = 0
    r = row_of[first]
    for i, other in enumerate(rest):
        s = row_of[other]
        if s == r:
            continue
        pair = (min(r, s), max(r, s))
        bad += _matchings_from(
            row_of, rest[:i] + rest[i + 1:], hist,
            e12 + (pair == (0, 1)), e34 + (pair == (2, 3)), q,
        )
    return bad


def enumerate_matching_histogram(q: int, workers: int = 1) -> list[int]:
    """Count flat-edge-free perfect matchings of four rows of ``q`` nodes.

    Entry ``k`` of the result is the number with exactly ``k`` edges between
    rows 1 and 2. Work is split over the partner of the first node; counts
    are summed in a fixed order, so the result is independent of ``workers``.
    """
    if not 1 <= q <= ENUMERATION_MAX_Q:
        raise ValueError(f"enumeration is limited to 1 <= q <= {ENUMERATION_MAX_Q}, got q={q}")
    row_of = [i // q for i in range(4 * q)]
    nodes = tuple(range(4 * q))
    first, rest = nodes[0], nodes[1:]
    branches = [i for i, other in enumerate(rest) if row_of[other] != row_of[first]]

    def run(i):
        hist = [0] * (q + 1)
        other = rest[i]
        pair = (row_of[first], row_of[other])
        bad = _matchings_from(row_of, rest[:i] + rest[i + 1:], hist, int(pair == (0, 1)), 0, q)
        return hist, bad

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, branches))
    else:
        results = [run(i) for i in branches]
    total = [0] * (q + 1)
    for hist, bad in results:
        if bad:
            raise AssertionError(f"{bad} matchings with unequal 1-2 and 3-4 edge counts at q={q}")
        total = [a + b for a, b in zip(total, hist)]
    return total


def enumerate_matchings(q: int, q1: int, workers: int = 1) -> int:
    """Exhaustive count of matchings with exactly ``q1`` edges between rows 1 and 2."""
    _check_pair(q1, q)
    return enumerate_matching_histogram(q, workers)[q1]


@dataclass
class DiagramCount:
    q: int
    counts: dict[int, int]
    oracle_counts: dict[int, int] | None = field(default=None)

    def consistent(self) -> bool:
        return self.oracle_counts is None or self.oracle_counts == self.counts


def diagram_count(q: int, with_oracle: bool = False, workers: int = 1) -> DiagramCount:
    counts = {q1: upsilon(q1, q) for q1 in range(q + 1)}
    oracle = None
    if with_oracle:
        oracle = dict(enumerate(enumerate_matching_histogram(q, workers)))
    return DiagramCount(q, counts, oracle)


@dataclass(frozen=True)
class MaxProfile:
    q: int
    argmax: int
    log_max: float
    ratio: float


def upsilon_max_profile(q: int) -> MaxProfile:
    """Locate ``max_{0 <= q1 < q} upsilon(q1, q)``.

    ``ratio`` compares the maximum with ``(q!)**2 * 3**(2q) / q``. Exact
    integers are used up to ``q = 30``, log-gamma beyond.
    """
    if q < 3:
        raise ValueError(f"q must be >= 3, got {q}")
    if q <= 30:
        vals = [upsilon(q1, q) for q1 in range(q)]
        best = max(range(q), key=vals.__getitem__)
        log_max = math.log(vals[best])
    else:
        logs = [upsilon_log(q1, q) for q1 in range(q)]
        best = max(range(q), key=logs.__getitem__)
        log_max = logs[best]
    log_ref = 2 * float(gammaln(q + 1)) + 2 * q * math.log(3) - math.log(q)
    return MaxProfile(q, best, log_max, math.exp(log_max - log_ref))


def offdiag_count(p: int, q: int, p1: int) -> int:
    """Exact ``C(p,p1)^2 (p1!)^2 C(q,q-p+p1)^2 ((q-p+p1)!)^2 (2(p-p1))!`` for ``p > q``."""
    if not p > q >= 1:
        raise ValueError(f"need p > q >= 1, got p={p}, q={q}")
    if not p - q <= p1 <= p - 1:
        raise ValueError(f"need {p - q} <= p1 <= {p - 1}, got p1={p1}")
    r = q - p + p1
    return (
        math.comb(p, p1) ** 2 * math.factorial(p1) ** 2
        * math.comb(q, r) ** 2 * math.factorial(r) ** 2
        * math.factorial(2 * (p - p1))
    )


def offdiag_dominance(p: int, q: int, p1: int) -> bool:
    """``C(q,q-p+p1)^2 ((q-p+p1)!)^2 <= C(p,p1)^2 (p1!)^2``, checked exactly."""
    offdiag_count(p, q, p1)
    r = q - p + p1
    return math.comb(q, r) ** 2 * math.factorial(r) ** 2 <= math.comb(p, p1) ** 2 * math.factorial(p1) ** 2
