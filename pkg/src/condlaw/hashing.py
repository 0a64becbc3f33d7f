"""Circular hash tables with forward probing.

n balls hash to uniform cells of a table with m > n cells; a ball
finding its cell occupied walks forward (wrapping at m) to the first
free cell.  The displacement of a ball is the number of cells walked.
Occupied runs split the table into blocks, each a maximal run of
occupied cells plus the free cell that ends it; conditioned on the
table, blocks behave like independent smaller tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import _kernels
from .distributions import FiniteLaw, tree_function

ENUMERATION_BUDGET = 10**9
MULTISET_MAX_N = 12


@dataclass(frozen=True)
class HashSequence:
    """An address sequence on a circular table; addresses are 1-based."""

    table_size: int
    addresses: tuple[int, ...]

    def __post_init__(self):
        m = self.table_size
        if m < 1:
            raise ValueError("table size must be positive")
        if len(self.addresses) >= m:
            raise ValueError("need strictly fewer balls than cells")
        for a in self.addresses:
            if not 1 <= a <= m:
                raise ValueError(f"address {a} outside 1..{m}")

    @property
    def n_balls(self) -> int:
        return len(self.addresses)


@dataclass(frozen=True)
class InsertionResult:
    sequence: HashSequence
    displacements: np.ndarray
    final_cells: np.ndarray
    occupancy: np.ndarray
    total: int


def insert_all(seq: HashSequence) -> InsertionResult:
    """Insert every ball in order; returns per-ball displacements,
    final cells (1-based), the occupancy map and the total."""
    disp, final, occ, total = _kernels.insert_displacements(
        seq.table_size, np.asarray(seq.addresses, dtype=np.int64)
    )
    return InsertionResult(seq, disp, final, occ, int(total))


@dataclass(frozen=True)
class DisplacementProfile:
    """Cell-count profile on a full-but-one table (m = n + 1).

    z[i] counts balls hashing to cell i (1-based; z[0] unused),
    sigma[i] is the running sum, and h[i] the number of probe visits
    to cell i; the total displacement is sum(h) - n.
    """

    sequence: HashSequence
    z: np.ndarray
    sigma: np.ndarray
    h: np.ndarray
    total: int


def displacement_profile(seq: HashSequence) -> DisplacementProfile:
    m, n = seq.table_size, seq.n_balls
    if m != n + 1:
        raise ValueError("profile formula applies to m = n + 1 only")
    z = np.zeros(m + 1, dtype=np.int64)
    for a in seq.addresses:
        z[a] += 1
    h, total = _h_from_counts(z, m, n)
    sigma = np.concatenate([[0], np.cumsum(z[1:])])
    return DisplacementProfile(seq, z, sigma, h, total)


def displacement_via_profile(seq: HashSequence) -> int:
    return displacement_profile(seq).total


def _h_from_counts(z, m, n):
    # Probe visits per cell.  With w_i = sigma_i - i (sigma_0 = 0) the
    # table's unique empty cell e is the first minimiser of w over
    # 1..m; unrolling the circle right after e makes every probe run
    # linear, and cell i receives w_i - w_e visits, plus one for i > e.
    w = np.empty(m + 1, dtype=np.int64)
    w[0] = 0
    sigma = 0
    for i in range(1, m + 1):
        sigma += z[i]
        w[i] = sigma - i
    e = int(np.argmin(w[1:])) + 1
    h = np.zeros(m + 1, dtype=np.int64)
    h[1 : e + 1] = w[1 : e + 1] - w[e]
    h[e + 1 :] = w[e + 1 :] - w[e] + 1
    return h, int(h.sum()) - n


@dataclass(frozen=True)
class Block:
    """A maximal occupied run plus its terminating free cell."""

    cells: tuple[int, ...]
    ball_count: int
    displacement: int

    @property
    def length(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class BlockDecomposition:
    table_size: int
    n_balls: int
    blocks: tuple[Block, ...]

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(b.length for b in self.blocks)

    @property
    def displacements(self) -> tuple[int, ...]:
        return tuple(b.displacement for b in self.blocks)

    @property
    def total(self) -> int:
        return sum(b.displacement for b in self.blocks)

    def multiset_key(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(zip(self.lengths, self.displacements)))


def block_decompose(seq: HashSequence) -> BlockDecomposition:
    """Split the table into blocks, walking circularly from the cell
    after the first free cell; each block ends at its free cell."""
    res = insert_all(seq)
    m = seq.table_size
    occ = res.occupancy
    empties = np.flatnonzero(~occ)
    start = int(empties[0]) + 1
    cell_block = np.full(m, -1, dtype=np.int64)
    blocks_cells = []
    current = []
    for step in range(m):
        cell = (start + step) % m
        current.append(cell + 1)
        cell_block[cell] = len(blocks_cells)
        if not occ[cell]:
            blocks_cells.append(tuple(current))
            current = []
    counts = np.zeros(len(blocks_cells), dtype=np.int64)
    disp = np.zeros(len(blocks_cells), dtype=np.int64)
    for cell, d in zip(res.final_cells, res.displacements):
        b = cell_block[int(cell) - 1]
        counts[b] += 1
        disp[b] += int(d)
    blocks = tuple(
        Block(cells=c, ball_count=int(counts[i]), displacement=int(disp[i]))
        for i, c in enumerate(blocks_cells)
    )
    deco = BlockDecomposition(table_size=m, n_balls=seq.n_balls, blocks=blocks)
    assert sum(deco.lengths) == m and deco.total == res.total
    return deco


@dataclass(frozen=True)
class DisplacementCounts:
    """Exact tally of total displacement over all m^n address
    sequences on a table of m = n + 1 cells."""

    n: int
    counts: np.ndarray
    total_sequences: int
    method: str

    def probs(self) -> np.ndarray:
        return self.counts / self.total_sequences

    def tail_count(self, y: int) -> int:
        y = max(int(y), 0)
        return int(self.counts[y:].sum()) if y < len(self.counts) else 0

    def mean(self) -> Fraction:
        d = np.arange(len(self.counts))
        return Fraction(int(np.dot(d, self.counts)), self.total_sequences)

    def to_finite_law(self) -> FiniteLaw:
        return FiniteLaw(
            values=tuple(range(len(self.counts))),
            probs=tuple(self.counts / self.total_sequences),
        )


def enumerate_all(n: int, method: str = "auto") -> DisplacementCounts:
    """Exact displacement counts for n balls on n + 1 cells.

    method "odometer" visits every one of the (n+1)^n sequences;
    "multiset" visits one representative per address multiset and
    weights it by the multinomial count (valid because the total is
    permutation invariant).  "auto" picks the odometer up to n = 6.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if method == "auto":
        method = "odometer" if n <= 6 else "multiset"
    if method == "odometer":
        if (n + 1) ** n > ENUMERATION_BUDGET:
            raise ValueError(f"odometer budget exceeded: (n+1)^n > {ENUMERATION_BUDGET:.0e}")
        counts, visited = _kernels.enumerate_displacement_counts(n)
        counts = np.array(counts, copy=True)
        if visited != (n + 1) ** n:
            raise RuntimeError("odometer did not visit (n+1)^n sequences")
    elif method == "multiset":
        if n > MULTISET_MAX_N:
            raise ValueError(f"multiset enumeration capped at n = {MULTISET_MAX_N}")
        counts = _multiset_counts(n)
    else:
        raise ValueError(f"unknown method {method!r}")
    total = (n + 1) ** n
    if int(counts.sum()) != total:
        raise RuntimeError("enumeration counts do not sum to (n+1)^n")
    return DisplacementCounts(n=n, counts=counts, total_sequences=total, method=method)


def _multiset_counts(n: int) -> np.ndarray:
    m = n + 1
    counts = np.zeros(n * (n - 1) // 2 + 1, dtype=object)
    z = np.zeros(m + 1, dtype=np.int64)
    fact = [math.factorial(j) for j in range(n + 1)]

    def rec(cell: int, remaining: int, weight_denom: int):
        if cell == m:
            z[m] = remaining
            _, d = _h_from_counts(z, m, n)
            counts[d] += fact[n] // (weight_denom * fact[remaining])
            z[m] = 0
            return
        for c in range(remaining + 1):
            z[cell] = c
            rec(cell + 1, remaining - c, weight_denom * fact[c])
        z[cell] = 0

    rec(1, n, 1)
    return counts.astype(np.int64)


@lru_cache(maxsize=64)
def displacement_counts_cached(n: int) -> DisplacementCounts:
    return enumerate_all(n)


def sample_pair_xy(lam: float, count: int, rng: np.random.Generator, progeny_cap: int | None = None):
    """Draw (block length, in-block displacement) pairs: length is
    Borel(lam), displacement that of length - 1 balls on length cells."""
    mu = tree_function(lam).mu
    cap = _kernels.PROGENY_CAP_DEFAULT if progeny_cap is None else progeny_cap
    x, y, truncated = _kernels.sample_pair_batch(mu, count, cap, rng)
    if truncated:
        raise RuntimeError(f"{truncated} draws hit the progeny cap {cap}")
    return x, y


def n_y_threshold(y: float) -> int:
    """Smallest n with n(n-1)/2 >= y (no table smaller can reach
    displacement y)."""
    if y <= 0:
        return 1
    n = int(math.ceil(math.sqrt(2.0 * y + 0.25) + 0.5))
    while n * (n - 1) // 2 >= y:
        n -= 1
    return n + 1


def adversarial_sequence(m: int, k: int) -> HashSequence:
    """Length-m sequence (1,1,2,2,...,k,k,k+1,...,m-k) on m + 1 cells;
    its total displacement is exactly k(m-k)."""
    if not 0 <= 2 * k <= m:
        raise ValueError("need 0 <= k <= m/2")
    addresses = []
    for a in range(1, k + 1):
        addresses.extend((a, a))
    addresses.extend(range(k + 1, m - k + 1))
    return HashSequence(table_size=m + 1, addresses=tuple(addresses))


def permutation_count(m: int, k: int) -> int:
    """Distinct reorderings of the adversarial sequence: m!/2^k."""
    if not 0 <= 2 * k <= m:
        raise ValueError("need 0 <= k <= m/2")
    return math.factorial(m) // 2**k


def block_weight(x: int) -> Fraction:
    """Relative weight x^(x-1)/x! of block length x under any Borel
    summand law once the total length is conditioned on (the parameter
    cancels)."""
    if x < 1:
        raise ValueError("block length must be >= 1")
    return Fraction(x ** (x - 1), math.factorial(x))


def block_displacement_law_exact(x: int) -> dict[int, Fraction]:
    """Exact law of the in-block displacement for block length x."""
    counts = displacement_counts_cached(x - 1)
    return {
        d: Fraction(int(c), counts.total_sequences)
        for d, c in enumerate(counts.counts)
        if c > 0
    }


def block_statistics_law(m: int, n: int) -> dict[tuple[tuple[int, int], ...], Fraction]:
    """Exact law of the block (length, displacement) multiset over all
    m^n equally likely address sequences.

    Enumerates address multisets (compositions of n over the m cells)
    with multinomial weights; valid because the block statistics are
    determined by the multiset alone.
    """
    if not 0 <= n < m:
        raise ValueError("need 0 <= n < m")
    if m**n > 10**8:
        raise ValueError("table too large for exact block-law enumeration")
    fact = [math.factorial(j) for j in range(n + 1)]
    law: dict[tuple[tuple[int, int], ...], Fraction] = {}
    denom = m**n
    z = [0] * m

    def rec(cell: int, remaining: int, weight_denom: int):
        if cell == m - 1:
            z[cell] = remaining
            weight = fact[n] // (weight_denom * fact[remaining])
            addresses = tuple(
                c + 1 for c in range(m) for _ in range(z[c])
            )
            deco = block_decompose(HashSequence(table_size=m, addresses=addresses))
            key = deco.multiset_key()
            law[key] = law.get(key, Fraction(0)) + Fraction(weight, denom)
            z[cell] = 0
            return
        for c in range(remaining + 1):
            z[cell] = c
            rec(cell + 1, remaining - c, weight_denom * fact[c])
        z[cell] = 0

    rec(0, n, 1)
    assert sum(law.values()) == 1
    return law


class DisplacementGivenLength:
    """Y given X = x is the total displacement of x - 1 balls on x
    cells: exact enumerated laws up to the enumeration cap, compiled
    sampling for any length."""

    exact = True

    def __init__(self, enum_cap: int = MULTISET_MAX_N + 1):
        self.enum_cap = enum_cap

    def law(self, x: int) -> FiniteLaw:
        if x - 1 > self.enum_cap - 1:
            raise ValueError(f"exact displacement law needs length <= {self.enum_cap}")
        return displacement_counts_cached(x - 1).to_finite_law()

    def sample_given(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return _kernels.sample_displacements_for_sizes(
            np.asarray(x, dtype=np.int64), rng
        ).astype(np.float64)


def hashing_pair_model(lam: float):
    """Block model of the full-table decomposition: X is Borel(lam)
    block length, Y the in-block displacement."""
    from .conditional import PairModel
    from .distributions import borel

    return PairModel(x_law=borel(lam), y_given_x=DisplacementGivenLength(), label="hashing")


def conditioned_block_pair_law(m: int, n: int) -> dict[tuple[tuple[int, int], ...], Fraction]:
    """Law of the multiset of N = m - n independent (length,
    displacement) pairs conditioned on total length m, with length
    weights x^(x-1)/x! and the exact in-block displacement law.

    This is the pair-model side of the block correspondence; it must
    coincide exactly with block_statistics_law(m, n).
    """
    if not 0 <= n < m:
        raise ValueError("need 0 <= n < m")
    n_blocks = m - n
    x_max = m - (n_blocks - 1)
    items: list[tuple[int, int, Fraction]] = []
    for x in range(1, x_max + 1):
        for d, p in block_displacement_law_exact(x).items():
            items.append((x, d, block_weight(x) * p))
    fact = [math.factorial(j) for j in range(n_blocks + 1)]
    raw: dict[tuple[tuple[int, int], ...], Fraction] = {}

    def rec(idx: int, slots: int, sum_left: int, weight: Fraction, chosen: list):
        if slots == 0:
            if sum_left == 0:
                key = tuple(sorted(chosen))
                raw[key] = raw.get(key, Fraction(0)) + weight
            return
        if idx == len(items) or sum_left < slots:
            return
        x, d, w = items[idx]
        max_c = min(slots, sum_left // x)
        for c in range(max_c + 1):
            rec(
                idx + 1,
                slots - c,
                sum_left - c * x,
                weight * w**c / fact[c],
                chosen + [(x, d)] * c,
            )

    rec(0, n_blocks, m, Fraction(fact[n_blocks]), [])
    total = sum(raw.values())
    return {k: v / total for k, v in raw.items()}
