from functools import lru_cache

import numpy as np
from numba import njit, prange

from spintypicality.errors import DomainError

# Purpose ids of the seeded substreams.
NETWORK_STREAM = 0
PHASE_STREAM = 1

SEED_LIMIT = 2**64


def check_seed(seed):
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise DomainError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < SEED_LIMIT:
        raise DomainError(f"seed must lie in [0, 2^64), got {seed}")
    return int(seed)


def substream(seed, *key):
    """
    Returns an independent generator for the substream ``key`` of ``seed``.

    The stream is a PCG64 generator seeded through ``numpy.random.SeedSequence``
    with ``spawn_key=key``, so it is platform independent and two different
    keys never share a stream.

    Parameters
    ----------
    seed : int
        64-bit user seed
    key : int
        Substream path, starting with a purpose id (``NETWORK_STREAM`` or
        ``PHASE_STREAM``)

    Returns
    -------
    numpy.random.Generator
    """
    sequence = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(master_seed, index):
    """Seed of realization ``index`` drawn from the phase substream of ``master_seed``."""
    sequence = np.random.SeedSequence(check_seed(master_seed), spawn_key=(PHASE_STREAM, int(index)))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@lru_cache(maxsize=32)
def popcounts(m_sites):
    """Number of up spins of every basis config of ``m_sites`` spins."""
    index = np.arange(1 << m_sites, dtype=np.int64)
    counts = np.zeros(1 << m_sites, dtype=np.int64)
    for k in range(m_sites):
        counts += (index >> k) & 1
    counts.setflags(write=False)
    return counts


def insert_bit(values, position, bit):
    """Inserts ``bit`` at ``position`` of every integer in ``values``, shifting higher bits up."""
    values = np.asarray(values, dtype=np.int64)
    low = values & ((1 << position) - 1)
    return ((values >> position) << (position + 1)) | (int(bit) << position) | low


def background_configs(m_sites, site):
    """
    Basis configs with ``site`` up, ordered by background index.

    The background index enumerates the remaining ``m_sites - 1`` spins in
    ascending site order, skipping ``site``.
    """
    return insert_bit(np.arange(1 << (m_sites - 1), dtype=np.int64), site, 1)


@njit(parallel=True, cache=True)
def apply_couplings(psi, out, sites_i, sites_j, ising, flip):
    # Gather formulation: each output amplitude is written by one worker only.
    for idx in prange(psi.shape[0]):
        s = np.int64(idx)
        acc = 0j
        for k in range(sites_i.shape[0]):
            up_i = (s >> sites_i[k]) & 1
            up_j = (s >> sites_j[k]) & 1
            if up_i == up_j:
                acc += 0.25 * ising[k] * psi[s]
            else:
                acc -= 0.25 * ising[k] * psi[s]
                partner = s ^ ((1 << sites_i[k]) | (1 << sites_j[k]))
                acc += 0.5 * flip[k] * psi[partner]
        out[s] = acc
    return out


@njit(parallel=True, cache=True)
def apply_gate_sequence(state, gates, sites_i, sites_j, reverse):
    """
    Applies two-site gates in place, in list order or reversed.

    Each gate is a 4x4 matrix in the basis (up-up, up-down, down-up, down-down)
    of sites (i, j). The embeddings of a gate touch disjoint index quadruples.
    """
    n_gates = gates.shape[0]
    n_embed = state.shape[0] >> 2
    for step in range(n_gates):
        g = n_gates - 1 - step if reverse else step
        i = sites_i[g]
        j = sites_j[g]
        lo = min(i, j)
        hi = max(i, j)
        mask_i = 1 << i
        mask_j = 1 << j
        gate = gates[g]
        for idx in prange(n_embed):
            e = np.int64(idx)
            base = ((e >> lo) << (lo + 1)) | (e & ((1 << lo) - 1))
            base = ((base >> hi) << (hi + 1)) | (base & ((1 << hi) - 1))
            s11 = base | mask_i | mask_j
            s10 = base | mask_i
            s01 = base | mask_j
            a0 = state[s11]
            a1 = state[s10]
            a2 = state[s01]
            a3 = state[base]
            state[s11] = gate[0, 0] * a0 + gate[0, 1] * a1 + gate[0, 2] * a2 + gate[0, 3] * a3
            state[s10] = gate[1, 0] * a0 + gate[1, 1] * a1 + gate[1, 2] * a2 + gate[1, 3] * a3
            state[s01] = gate[2, 0] * a0 + gate[2, 1] * a1 + gate[2, 2] * a2 + gate[2, 3] * a3
            state[base] = gate[3, 0] * a0 + gate[3, 1] * a1 + gate[3, 2] * a2 + gate[3, 3] * a3
    return state
