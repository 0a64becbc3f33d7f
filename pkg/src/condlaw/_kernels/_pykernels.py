"""Pure-Python reference kernels.

Every routine that consumes randomness does so exclusively through
single next-double uniforms drawn from a numpy Generator, in the same
order as the compiled backend, so both backends produce identical
output from the same seed.  The compiled module is a line-for-line
mirror of this one.
"""

import math

import numpy as np

PROGENY_CAP_DEFAULT = 10_000_000


def backend_name():
    return "python"


def _poisson_small(rng, mu):
    # CDF inversion from one uniform; adequate for mu <= 1 offspring laws.
    u = rng.random()
    p = math.exp(-mu)
    c = p
    k = 0
    while u > c:
        k += 1
        p *= mu / k
        c += p
        if p <= 0.0 or k > 10000:
            break
    return k


def _uniform_address(rng, m):
    a = int(rng.random() * m) + 1
    return m if a > m else a


def _progeny(rng, mu, cap):
    # Total progeny of a branching process with Poisson(mu) offspring,
    # one offspring draw per individual.  Returns (size, truncated).
    alive = 1
    total = 0
    while alive > 0:
        total += 1
        if total > cap:
            return cap, True
        alive += _poisson_small(rng, mu) - 1
    return total, False


def _block_displacement(rng, x, table):
    # Insert x - 1 balls into a circular table of x cells, uniform
    # addresses, forward probing.  table must be zeroed over [0, x);
    # it is re-zeroed before returning.
    total = 0
    for _ in range(x - 1):
        a = _uniform_address(rng, x)
        pos = a - 1
        while table[pos]:
            pos += 1
            if pos == x:
                pos = 0
            total += 1
        table[pos] = 1
    for j in range(x):
        table[j] = 0
    return total


def sample_borel_batch(mu, count, cap, rng):
    """Borel-distributed batch via branching-process totals.

    Returns (values int64 array, number of capped draws).
    """
    out = np.empty(count, dtype=np.int64)
    truncated = 0
    for i in range(count):
        x, t = _progeny(rng, mu, cap)
        out[i] = x
        if t:
            truncated += 1
    return out, truncated


def sample_displacements_for_sizes(sizes, rng):
    """For each size x draw the total displacement of x - 1 balls in a
    circular table of x cells."""
    sizes = np.asarray(sizes, dtype=np.int64)
    out = np.empty(sizes.shape[0], dtype=np.int64)
    cap = 1024
    table = bytearray(cap)
    for i in range(sizes.shape[0]):
        x = int(sizes[i])
        if x > cap:
            cap = max(2 * cap, x)
            table = bytearray(cap)
        out[i] = _block_displacement(rng, x, table)
    return out


def sample_pair_batch(mu, count, cap, rng):
    """Draw (size, displacement) pairs: size from the branching-process
    total, then the displacement of size - 1 balls in a size-cell table.

    Draws interleave per pair.  Returns (x, y, truncated_count).
    """
    x_out = np.empty(count, dtype=np.int64)
    y_out = np.empty(count, dtype=np.int64)
    truncated = 0
    bufcap = 1024
    table = bytearray(bufcap)
    for i in range(count):
        x, t = _progeny(rng, mu, cap)
        if t:
            truncated += 1
        if x > bufcap:
            bufcap = max(2 * bufcap, x)
            table = bytearray(bufcap)
        x_out[i] = x
        y_out[i] = _block_displacement(rng, x, table)
    return x_out, y_out, truncated


def insert_displacements(m, addresses):
    """Insert all addresses (1-based) into a circular table of m cells.

    Returns (per-ball displacements, per-ball final cells 1-based,
    occupancy bool array, total displacement).
    """
    addresses = np.asarray(addresses, dtype=np.int64)
    n = addresses.shape[0]
    disp = np.empty(n, dtype=np.int64)
    final = np.empty(n, dtype=np.int64)
    occ = bytearray(m)
    total = 0
    for j in range(n):
        pos = int(addresses[j]) - 1
        d = 0
        while occ[pos]:
            pos += 1
            if pos == m:
                pos = 0
            d += 1
        occ[pos] = 1
        disp[j] = d
        final[j] = pos + 1
        total += d
    return disp, final, np.frombuffer(bytes(occ), dtype=np.uint8).astype(bool), total


def enumerate_displacement_counts(n):
    """Visit every address sequence of length n on a table of n + 1
    cells and tally total displacements.

    Returns (counts indexed by displacement, number of sequences visited).
    """
    m = n + 1
    counts = np.zeros(n * (n - 1) // 2 + 1, dtype=np.int64)
    if n == 0:
        counts[0] = 1
        return counts, 1
    a = [1] * n
    z = [0] * (m + 1)
    z[1] = n
    visited = 0
    while True:
        # Displacement from the address multiset, one O(m) pass.  With
        # w_i = sigma_i - i the empty cell is the first minimiser of w
        # over 1..m; unrolling the circle there gives the total as
        # sum(w) - m*min(w) - argmin(w) + 1.
        sigma = z[1]
        w = sigma - 1
        wsum = w
        wmin = w
        e = 1
        for i in range(2, m + 1):
            sigma += z[i]
            w = sigma - i
            wsum += w
            if w < wmin:
                wmin = w
                e = i
        counts[wsum - m * wmin - e + 1] += 1
        visited += 1
        # odometer step
        j = n - 1
        while j >= 0 and a[j] == m:
            z[m] -= 1
            z[1] += 1
            a[j] = 1
            j -= 1
        if j < 0:
            break
        z[a[j]] -= 1
        a[j] += 1
        z[a[j]] += 1
    return counts, visited
