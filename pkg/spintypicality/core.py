import logging

import numpy as np

from spintypicality.errors import DimensionError, DomainError, SiteIndexError
from spintypicality.helpers import popcounts

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-10
PROBABILITY_TOLERANCE = 1e-12


def check_site(site, m_sites):
    """Returns ``site`` as an int, raising ``SiteIndexError`` unless 0 <= site < m_sites."""
    if isinstance(site, (bool, np.bool_)) or not isinstance(site, (int, np.integer)):
        raise SiteIndexError(f"site index must be an integer, got {site!r}")
    if not 0 <= site < m_sites:
        raise SiteIndexError(f"site {site} out of range for {m_sites} sites")
    return int(site)


def basis_config(index, m_sites):
    """Spin values (1 = up) of basis config ``index``, site 0 first."""
    if not 0 <= index < (1 << m_sites):
        raise SiteIndexError(f"basis index {index} out of range for {m_sites} sites")
    return tuple((index >> k) & 1 for k in range(m_sites))


def config_index(bits):
    """Inverse of ``basis_config``."""
    index = 0
    for k, bit in enumerate(bits):
        if bit not in (0, 1):
            raise DomainError(f"spin value at site {k} must be 0 or 1, got {bit!r}")
        index |= bit << k
    return index


class StateVector:
    """
    Pure state of M spin-1/2 sites stored as 2^M complex amplitudes.

    Amplitude ``b`` belongs to the Zeeman basis config whose bit k is the spin of
    site k (1 = up, little-endian). The constructor asserts unit norm within
    ``NORM_TOLERANCE``; it never repairs it. Use ``renormalize`` explicitly.

    Parameters
    ----------
    amplitudes : array-like
        Complex amplitudes, length a power of two
    copy : bool, optional
        Copy the input array (default is True)
    """

    __slots__ = ("amplitudes", "m_sites")

    def __init__(self, amplitudes, copy=True):
        if copy:
            amplitudes = np.array(amplitudes, dtype=np.complex128, order="C")
        else:
            amplitudes = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        if amplitudes.ndim != 1:
            raise DimensionError("amplitudes must be a flat array")
        dim = amplitudes.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise DimensionError(f"state dimension {dim} is not a power of two >= 2")
        norm = float(np.sqrt(np.sum(np.abs(amplitudes) ** 2)))
        if abs(norm - 1.0) >= NORM_TOLERANCE:
            raise DomainError(f"state is not normalized (norm = {norm!r})")
        self.amplitudes = amplitudes
        self.m_sites = dim.bit_length() - 1

    @property
    def dim(self):
        return self.amplitudes.shape[0]

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def copy(self):
        return StateVector(self.amplitudes, copy=True)

    def __repr__(self):
        return f"StateVector(m_sites={self.m_sites})"


def as_amplitudes(psi):
    if isinstance(psi, StateVector):
        return psi.amplitudes
    return np.asarray(psi, dtype=np.complex128)


def renormalize(amplitudes):
    """Builds a ``StateVector`` from any nonzero amplitude array by dividing out its norm."""
    amplitudes = np.asarray(as_amplitudes(amplitudes), dtype=np.complex128)
    norm = np.sqrt(np.sum(np.abs(amplitudes) ** 2))
    if norm == 0.0:
        raise DomainError("cannot renormalize the zero vector")
    return StateVector(amplitudes / norm, copy=False)


def up_probability(psi, site):
    """
    Probability that ``site`` is up in state ``psi``.

    The amplitude array is viewed as (high bits, site bit, low bits) so the
    sum runs over a strided slice with numpy's pairwise summation, which fixes
    the reduction order.

    Parameters
    ----------
    psi : StateVector
    site : int

    Returns
    -------
    float: probability in [0, 1]
    """
    site = check_site(site, psi.m_sites)
    blocks = psi.amplitudes.reshape(-1, 2, 1 << site)
    return float(np.sum(np.abs(blocks[:, 1, :]) ** 2))


def down_probability(psi, site):
    return 1.0 - up_probability(psi, site)


def polarization_from_w(w):
    """Maps the up probability W to the polarization P = 2(W - 1/2)."""
    if not -PROBABILITY_TOLERANCE <= w <= 1.0 + PROBABILITY_TOLERANCE:
        raise DomainError(f"probability {w!r} outside [0, 1]")
    return 2.0 * (w - 0.5)


def total_magnetization(psi):
    """Expectation of the total z spin, sum_b |psi_b|^2 (popcount(b) - M/2)."""
    weights = np.abs(psi.amplitudes) ** 2
    return float(np.sum(weights * (popcounts(psi.m_sites) - 0.5 * psi.m_sites)))


def inner_product(a, b):
    """<a|b>, conjugate-linear in ``a``."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))
