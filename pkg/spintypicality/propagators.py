import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from spintypicality.core import StateVector
from spintypicality.errors import CapabilityError, DimensionError, DomainError
from spintypicality.hamiltonian import hamiltonian_matrix, sector_hamiltonian
from spintypicality.helpers import apply_gate_sequence, popcounts

logger = logging.getLogger(__name__)

MAX_EXACT_SITES = 12
DEFAULT_DT_FACTOR = 0.02
MAX_FRACTIONAL_PLANS = 16


@dataclass(frozen=True)
class SpectralDecomposition:
    """H = V diag(E) V^dagger with eigenvectors as the columns of V."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class SectorBlock:
    popcount: int
    configs: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class SectorDecomposition:
    """Eigensystems of H inside every magnetization sector."""

    m_sites: int
    blocks: tuple


@dataclass(frozen=True)
class TrotterPlan:
    """
    Second-order symmetric splitting of one time step ``dt``.

    ``gates`` holds the half-step gate of every coupling in (i, j) order. A
    step applies them forward and then in reverse.
    """

    dt: float
    sites_i: np.ndarray
    sites_j: np.ndarray
    gates: np.ndarray

    def step(self, amplitudes):
        apply_gate_sequence(amplitudes, self.gates, self.sites_i, self.sites_j, False)
        apply_gate_sequence(amplitudes, self.gates, self.sites_i, self.sites_j, True)
        return amplitudes


def _check_cap(net, max_sites):
    if net.m_sites > max_sites:
        raise CapabilityError(
            f"exact diagonalization of {net.m_sites} sites exceeds the cap of {max_sites}; "
            "use the Trotter propagator (propagator.kind = 'trotter') instead"
        )


def exact_diagonalize(net, max_sites=MAX_EXACT_SITES):
    """
    Full Hermitian eigendecomposition of the dense Hamiltonian.

    Parameters
    ----------
    net : CouplingNetwork
    max_sites : int, optional
        Largest M accepted (default is 12)

    Returns
    -------
    SpectralDecomposition
    """
    _check_cap(net, max_sites)
    eigenvalues, eigenvectors = linalg.eigh(hamiltonian_matrix(net, max_sites))
    logger.debug("diagonalized %d x %d Hamiltonian", net.dim, net.dim)
    return SpectralDecomposition(eigenvalues, eigenvectors)


def exact_diagonalize_sectors(net, max_sites=MAX_EXACT_SITES):
    """Eigendecomposition of H block by block over the popcount sectors."""
    _check_cap(net, max_sites)
    counts = popcounts(net.m_sites)
    blocks = []
    for k in range(net.m_sites + 1):
        configs = np.flatnonzero(counts == k).astype(np.int64)
        eigenvalues, eigenvectors = linalg.eigh(sector_hamiltonian(net, configs).toarray())
        blocks.append(SectorBlock(k, configs, eigenvalues, eigenvectors))
    logger.debug("diagonalized %d sectors, largest %d", len(blocks), max(b.configs.size for b in blocks))
    return SectorDecomposition(net.m_sites, tuple(blocks))


def _check_dims(dim, psi0):
    if psi0.dim != dim:
        raise DimensionError(f"state of dimension {psi0.dim} does not match propagator dimension {dim}")


def evolve_exact(dec, psi0, t):
    """V exp(-i E t) V^dagger psi0."""
    _check_dims(dec.dim, psi0)
    coefficients = dec.eigenvectors.conj().T @ psi0.amplitudes
    return StateVector(dec.eigenvectors @ (np.exp(-1j * dec.eigenvalues * t) * coefficients), copy=False)


def pair_gate(a, b, dt):
    """
    exp(-i H_pair dt) of one coupling in the basis (up-up, up-down, down-up, down-down).

    H_pair = a Iz Iz + b/2 (I+ I- + I- I+), so the aligned corners pick up
    exp(-i a dt/4) and the anti-aligned block is
    exp(+i a dt/4) [cos(b dt/2) 1 - i sin(b dt/2) X].
    """
    outer = np.exp(-0.25j * a * dt)
    inner = np.exp(0.25j * a * dt)
    cos, sin = math.cos(0.5 * b * dt), math.sin(0.5 * b * dt)
    gate = np.zeros((4, 4), dtype=np.complex128)
    gate[0, 0] = gate[3, 3] = outer
    gate[1, 1] = gate[2, 2] = inner * cos
    gate[1, 2] = gate[2, 1] = -1j * inner * sin
    return gate


def make_trotter_plan(net, dt):
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    sites_i, sites_j, ising, flip = net.arrays
    gates = np.empty((len(net), 4, 4), dtype=np.complex128)
    for k in range(len(net)):
        gates[k] = pair_gate(ising[k], flip[k], 0.5 * dt)
    return TrotterPlan(float(dt), sites_i, sites_j, gates)


def split_steps(duration, dt):
    """Number of whole steps of ``dt`` in ``duration`` and the fractional remainder."""
    n_full = int(math.floor(duration / dt + 1e-9))
    remainder = duration - n_full * dt
    if abs(remainder) <= 1e-12 * max(1.0, duration):
        remainder = 0.0
    return n_full, remainder


def count_fractional_steps(times, dt):
    """Fractional steps taken by one continuous Trotter evolution through ``times``."""
    current, count = 0.0, 0
    for t in times:
        _, remainder = split_steps(float(t) - current, dt)
        count += remainder > 0
        current = float(t)
    return count


def default_dt(net):
    """0.02 / b_max, or 0.02 for a network without couplings."""
    b_max = net.b_max
    return DEFAULT_DT_FACTOR / b_max if b_max > 0 else DEFAULT_DT_FACTOR


class ExactPropagator:
    """
    Spectral propagator for small networks.

    The decomposition is computed on first use, so a propagator that only
    serves the sector-blocked oracle never builds the full matrix.
    """

    kind = "exact"

    def __init__(self, net, max_sites=MAX_EXACT_SITES):
        _check_cap(net, max_sites)
        self.network = net
        self.max_sites = max_sites

    @cached_property
    def decomposition(self):
        return exact_diagonalize(self.network, self.max_sites)

    @cached_property
    def sectors(self):
        return exact_diagonalize_sectors(self.network, self.max_sites)

    def prepare(self):
        """Computes the decomposition now, before the propagator is shipped to workers."""
        return self.decomposition

    def evolve(self, psi0, t):
        return evolve_exact(self.decomposition, psi0, t)

    def evolve_along(self, psi0, times):
        dec = self.decomposition
        _check_dims(dec.dim, psi0)
        coefficients = dec.eigenvectors.conj().T @ psi0.amplitudes
        for t in times:
            yield t, StateVector(dec.eigenvectors @ (np.exp(-1j * dec.eigenvalues * t) * coefficients), copy=False)

    def describe(self, times=None):
        return {"kind": self.kind, "max_sites": self.max_sites}


class TrotterPropagator:
    """
    Second-order Trotter-Suzuki propagator.

    Times are reached with whole steps of ``dt`` followed by one fractional
    step when the interval is not a multiple of ``dt``.
    """

    kind = "trotter"

    def __init__(self, net, dt=None):
        self.network = net
        self.dt = default_dt(net) if dt is None else float(dt)
        self.plan = make_trotter_plan(net, self.dt)
        self._fractional = {}
        self.fractional_steps = 0

    def _advance(self, amplitudes, duration):
        if duration < 0:
            raise DomainError(f"Trotter evolution only runs forward in time, got {duration}")
        n_full, remainder = split_steps(duration, self.dt)
        for _ in range(n_full):
            self.plan.step(amplitudes)
        if remainder > 0:
            key = round(remainder, 15)
            if key not in self._fractional:
                if len(self._fractional) >= MAX_FRACTIONAL_PLANS:
                    self._fractional.clear()
                self._fractional[key] = make_trotter_plan(self.network, remainder)
            self._fractional[key].step(amplitudes)
            self.fractional_steps += 1
        return amplitudes

    def prepare(self):
        return self.plan

    def evolve(self, psi0, t):
        _check_dims(self.network.dim, psi0)
        amplitudes = psi0.amplitudes.copy()
        return StateVector(self._advance(amplitudes, t), copy=False)

    def evolve_along(self, psi0, times):
        _check_dims(self.network.dim, psi0)
        amplitudes = psi0.amplitudes.copy()
        current = 0.0
        for t in times:
            self._advance(amplitudes, t - current)
            current = t
            yield t, StateVector(amplitudes, copy=True)

    def describe(self, times=None):
        settings = {"kind": self.kind, "dt": self.dt, "order": 2, "term_order": "sorted (i, j)"}
        if times is not None:
            settings["fractional_steps"] = count_fractional_steps(times, self.dt)
        return settings


def evolve_trotter(net, psi0, t, dt):
    """Evolves ``psi0`` to time ``t`` with ceil(t/dt) symmetric second-order steps."""
    return TrotterPropagator(net, dt).evolve(psi0, t)


def make_propagator(net, kind="exact", dt=None, max_exact_sites=MAX_EXACT_SITES):
    if kind == "exact":
        return ExactPropagator(net, max_exact_sites)
    if kind == "trotter":
        return TrotterPropagator(net, dt)
    raise DomainError(f"unknown propagator {kind!r}, expected 'exact' or 'trotter'")
