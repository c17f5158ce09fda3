import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import combinations
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import sparse

from spintypicality.core import StateVector, as_amplitudes, check_site
from spintypicality.errors import CapabilityError, ConfigError, DimensionError
from spintypicality.helpers import NETWORK_STREAM, apply_couplings, substream

logger = logging.getLogger(__name__)

TOPOLOGIES = ("chain", "ladder", "star", "custom")
MAX_DENSE_SITES = 12


class AnisotropyKind(Enum):
    """Ratio between the Ising coefficient a and the flip-flop coefficient b."""

    ISING = "ising"
    XY = "xy"
    ISOTROPIC = "isotropic"
    DIPOLAR = "dipolar"

    def coefficients(self, b):
        """(a, b) of a coupling of magnitude ``b`` under this anisotropy."""
        if self is AnisotropyKind.ISING:
            return float(b), 0.0
        if self is AnisotropyKind.XY:
            return 0.0, float(b)
        if self is AnisotropyKind.ISOTROPIC:
            return float(b), float(b)
        return -2.0 * b, float(b)


@dataclass(frozen=True)
class Coupling:
    i: int
    j: int
    a: float
    b: float

    def __post_init__(self):
        if not 0 <= self.i < self.j:
            raise ConfigError(f"coupling sites must satisfy 0 <= i < j, got ({self.i}, {self.j})")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ConfigError(f"coupling ({self.i}, {self.j}) has non-finite coefficients")


@dataclass(frozen=True)
class CouplingNetwork:
    """
    Pairwise spin-spin couplings of M sites.

    The network stands for the Hamiltonian
    H = sum_{i<j} [a_ij Iz_i Iz_j + b_ij/2 (I+_i I-_j + I-_i I+_j)],
    Hermitian by construction since a and b are real. Couplings are kept
    sorted by (i, j); that order is also the Trotter term order.
    """

    m_sites: int
    couplings: tuple = ()
    label: str = "custom"
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.m_sites < 1:
            raise ConfigError(f"a network needs at least one site, got M = {self.m_sites}")
        if self.label not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {self.label!r}")
        ordered = tuple(sorted(self.couplings, key=lambda c: (c.i, c.j)))
        seen = set()
        for c in ordered:
            if c.j >= self.m_sites:
                raise ConfigError(f"coupling ({c.i}, {c.j}) out of range for {self.m_sites} sites")
            if (c.i, c.j) in seen:
                raise ConfigError(f"duplicate coupling ({c.i}, {c.j})")
            seen.add((c.i, c.j))
        object.__setattr__(self, "couplings", ordered)

    @property
    def dim(self):
        return 1 << self.m_sites

    @cached_property
    def arrays(self):
        """(sites_i, sites_j, a, b) as contiguous numpy arrays."""
        sites_i = np.array([c.i for c in self.couplings], dtype=np.int64)
        sites_j = np.array([c.j for c in self.couplings], dtype=np.int64)
        ising = np.array([c.a for c in self.couplings], dtype=np.float64)
        flip = np.array([c.b for c in self.couplings], dtype=np.float64)
        return sites_i, sites_j, ising, flip

    @property
    def b_max(self):
        """Largest of |b| and |a|/2 over all couplings, 0 for an empty network."""
        return max((max(abs(c.b), abs(c.a) / 2.0) for c in self.couplings), default=0.0)

    def __len__(self):
        return len(self.couplings)


def build_chain(m_sites, b, kind=AnisotropyKind.XY):
    """Open nearest-neighbour chain with bonds (k, k+1)."""
    if m_sites < 1:
        raise ConfigError(f"a chain needs M >= 1, got {m_sites}")
    kind = AnisotropyKind(kind)
    a_k, b_k = kind.coefficients(b)
    bonds = [Coupling(k, k + 1, a_k, b_k) for k in range(m_sites - 1)]
    return CouplingNetwork(m_sites, tuple(bonds), "chain", {"b": float(b), "anisotropy": kind.value})


def build_ladder(m_sites, b_x, b_y):
    """
    XY ladder of two open legs of M/2 sites.

    Leg one holds sites 0..M/2-1, leg two sites M/2..M-1, and rung k joins
    site k with site k + M/2.

    Parameters
    ----------
    m_sites : int
        Even number of sites, at least 4
    b_x : float
        Flip-flop coupling along the legs
    b_y : float
        Flip-flop coupling along the rungs

    Returns
    -------
    CouplingNetwork
    """
    if m_sites < 4 or m_sites % 2:
        raise ConfigError(f"a ladder needs an even M >= 4, got {m_sites}")
    half = m_sites // 2
    bonds = []
    for k in range(half - 1):
        bonds.append(Coupling(k, k + 1, 0.0, float(b_x)))
        bonds.append(Coupling(half + k, half + k + 1, 0.0, float(b_x)))
    for k in range(half):
        bonds.append(Coupling(k, k + half, 0.0, float(b_y)))
    logger.debug("ladder with %d sites and %d bonds", m_sites, len(bonds))
    return CouplingNetwork(m_sites, tuple(bonds), "ladder", {"b_x": float(b_x), "b_y": float(b_y)})


def build_star(m_sites, sigma, seed):
    """
    Fully connected dipolar cluster with Gaussian couplings.

    Every pair gets b_ij ~ Normal(0, sigma^2), drawn in (i, j) order from the
    network substream of ``seed``, and a_ij = -2 b_ij.
    """
    if m_sites < 2:
        raise ConfigError(f"a star needs M >= 2, got {m_sites}")
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    pairs = list(combinations(range(m_sites), 2))
    draws = substream(seed, NETWORK_STREAM).normal(0.0, sigma, size=len(pairs))
    bonds = tuple(Coupling(i, j, -2.0 * float(b), float(b)) for (i, j), b in zip(pairs, draws))
    return CouplingNetwork(
        m_sites, bonds, "star", {"sigma": float(sigma), "seed": int(seed), "substream": [NETWORK_STREAM], "draws": len(pairs)}
    )


def local_second_moment(m_sites, sigma):
    """sigma_0^2 = 9/4 (M - 1) sigma^2 of a site in the dipolar star."""
    if m_sites < 2:
        raise ConfigError(f"the local second moment needs M >= 2, got {m_sites}")
    return 2.25 * (m_sites - 1) * sigma**2


def hamiltonian_second_moment(m_sites, sigma):
    """M/2 sigma_0^2, the scale on which star cross terms decay."""
    return 0.5 * m_sites * local_second_moment(m_sites, sigma)


def apply_hamiltonian(net, psi):
    """
    H psi, computed matrix-free.

    Parameters
    ----------
    net : CouplingNetwork
    psi : StateVector or array-like
        Any vector of dimension 2^M, normalized or not

    Returns
    -------
    numpy.ndarray: the complex vector H psi (not a state)
    """
    amplitudes = np.ascontiguousarray(as_amplitudes(psi), dtype=np.complex128)
    if amplitudes.shape != (net.dim,):
        raise DimensionError(f"vector of shape {amplitudes.shape} does not match {net.m_sites} sites")
    out = np.empty_like(amplitudes)
    return apply_couplings(amplitudes, out, *net.arrays)


def energy_expectation(net, psi):
    return float(np.vdot(psi.amplitudes, apply_hamiltonian(net, psi)).real)


def sector_hamiltonian(net, configs):
    """
    H restricted to the basis configs ``configs``.

    ``configs`` must be sorted and closed under flip-flops, such as a whole
    magnetization sector or the full basis. Rows and columns follow the order
    of ``configs``.

    Returns
    -------
    scipy.sparse.csr_matrix: real symmetric matrix
    """
    configs = np.asarray(configs, dtype=np.int64)
    size = configs.shape[0]
    diagonal = np.zeros(size)
    rows, cols, values = [], [], []
    positions = np.arange(size)
    for c in net.couplings:
        up_i = (configs >> c.i) & 1
        up_j = (configs >> c.j) & 1
        aligned = up_i == up_j
        diagonal += np.where(aligned, 0.25 * c.a, -0.25 * c.a)
        if c.b == 0.0:
            continue
        source = positions[~aligned]
        partners = configs[~aligned] ^ ((1 << c.i) | (1 << c.j))
        target = np.searchsorted(configs, partners)
        if np.any(target >= size) or np.any(configs[np.minimum(target, size - 1)] != partners):
            raise DimensionError("config list is not closed under the flip-flop terms")
        rows.append(target)
        cols.append(source)
        values.append(np.full(source.shape[0], 0.5 * c.b))
    rows.append(positions)
    cols.append(positions)
    values.append(diagonal)
    matrix = sparse.coo_matrix(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    return matrix.tocsr()


def hamiltonian_matrix(net, max_sites=MAX_DENSE_SITES):
    """Dense real H over the full 2^M basis, refused above ``max_sites``."""
    if net.m_sites > max_sites:
        raise CapabilityError(
            f"dense Hamiltonian of {net.m_sites} sites exceeds the cap of {max_sites}; "
            "use the Trotter propagator instead"
        )
    return sector_hamiltonian(net, np.arange(net.dim, dtype=np.int64)).toarray()


def load_edge_list(path):
    """
    Reads a custom network from an edge-list file.

    The first line is ``M <int>``; every further line holds ``i j a b``.
    Pairs given as j < i are stored as (j, i).
    """
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        header = handle.readline().split()
    if len(header) != 2 or header[0] != "M":
        raise ConfigError(f"{path}: first line must be 'M <int>'")
    try:
        m_sites = int(header[1])
    except ValueError:
        raise ConfigError(f"{path}: invalid site count {header[1]!r}")
    try:
        edges = pd.read_csv(
            path, sep=r"\s+", skiprows=1, header=None, names=["i", "j", "a", "b"], comment="#",
            float_precision="round_trip",
        )
    except pd.errors.EmptyDataError:
        edges = pd.DataFrame(columns=["i", "j", "a", "b"])
    if edges.isna().any().any():
        raise ConfigError(f"{path}: every edge line needs four fields 'i j a b'")
    couplings = []
    for line, row in enumerate(edges.itertuples(index=False), start=2):
        if float(row.i) != int(row.i) or float(row.j) != int(row.j):
            raise ConfigError(f"{path}:{line}: site indices must be integers")
        i, j = sorted((int(row.i), int(row.j)))
        try:
            check_site(i, m_sites)
            check_site(j, m_sites)
        except IndexError as error:
            raise ConfigError(f"{path}:{line}: {error}")
        if i == j:
            raise ConfigError(f"{path}:{line}: self coupling on site {i}")
        couplings.append(Coupling(i, j, float(row.a), float(row.b)))
    net = CouplingNetwork(m_sites, tuple(couplings), "custom", {"source": str(path)})
    logger.info("loaded %d couplings over %d sites from %s", len(net), m_sites, path)
    return net


def save_edge_list(net, path):
    lines = [f"M {net.m_sites}"]
    lines += [f"{c.i} {c.j} {c.a!r} {c.b!r}" for c in net.couplings]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
