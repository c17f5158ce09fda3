from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from spintypicality.core import StateVector, check_site
from spintypicality.errors import ConfigError, DomainError
from spintypicality.helpers import PHASE_STREAM, background_configs, check_seed, substream


class StateKind(Enum):
    BASIS_MEMBER = "basis"
    ENTANGLED = "entangled"
    PRODUCT = "product"


@dataclass(frozen=True)
class InitialStateSpec:
    """
    Which initial state to prepare.

    Parameters
    ----------
    kind : StateKind
    excited_site : int, optional
        Site n held up at t = 0 (default is 0)
    phase_seed : int, optional
        Seed of the phase substream (entangled and product kinds)
    background_index : int, optional
        Ensemble member i (basis kind only)
    """

    kind: StateKind
    excited_site: int = 0
    phase_seed: int = 0
    background_index: int = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StateKind(self.kind))
        if self.kind is StateKind.BASIS_MEMBER and self.background_index is None:
            raise ConfigError("a basis-member state needs a background index")


@dataclass(frozen=True)
class PhaseRecord:
    """Enough to replay a phase draw: ``substream(seed, *substream_key)`` and ``count`` uniforms."""

    seed: int
    substream_key: tuple = field(default=(PHASE_STREAM,))
    count: int = 0

    def replay(self):
        return substream(self.seed, *self.substream_key).uniform(0.0, 2.0 * np.pi, size=self.count)

    def to_dict(self):
        return {"seed": self.seed, "substream": list(self.substream_key), "count": self.count}


def _check_sizes(m_sites, site):
    if m_sites < 1:
        raise ConfigError(f"need at least one site, got M = {m_sites}")
    return check_site(site, m_sites)


def make_basis_member(m_sites, site, index):
    """
    Ensemble member ``index``: site n up, the other M - 1 spins given by the
    binary expansion of ``index`` in ascending site order.
    """
    site = _check_sizes(m_sites, site)
    if not 0 <= index < (1 << (m_sites - 1)):
        raise DomainError(f"background index {index} out of range for {m_sites} sites")
    amplitudes = np.zeros(1 << m_sites, dtype=np.complex128)
    amplitudes[background_configs(m_sites, site)[index]] = 1.0
    return StateVector(amplitudes, copy=False)


def make_entangled(m_sites, site, seed, substream_key=(PHASE_STREAM,)):
    """
    Random-phase superposition of all ensemble members.

    Every config with site n up gets amplitude exp(-i phi_i) / sqrt(2^(M-1)),
    with 2^(M-1) independent phases uniform on [0, 2 pi).

    Returns
    -------
    (StateVector, PhaseRecord)
    """
    site = _check_sizes(m_sites, site)
    seed = check_seed(seed)
    size = 1 << (m_sites - 1)
    record = PhaseRecord(seed, tuple(substream_key), size)
    amplitudes = np.zeros(1 << m_sites, dtype=np.complex128)
    amplitudes[background_configs(m_sites, site)] = np.exp(-1j * record.replay()) / np.sqrt(size)
    return StateVector(amplitudes, copy=False), record


def make_product(m_sites, site, seed, substream_key=(PHASE_STREAM,)):
    """
    Site n up and every other site in (|down> + exp(-i phi_l)|up>) / sqrt(2).

    Expanded, config b carries the phase sum of phi_l over its up background
    sites, so only M - 1 phases are independent.

    Returns
    -------
    (StateVector, PhaseRecord)
    """
    site = _check_sizes(m_sites, site)
    seed = check_seed(seed)
    record = PhaseRecord(seed, tuple(substream_key), m_sites - 1)
    phases = record.replay()
    configs = background_configs(m_sites, site)
    others = [l for l in range(m_sites) if l != site]
    phase_sum = np.zeros(configs.shape[0])
    for phase, l in zip(phases, others):
        phase_sum += phase * ((configs >> l) & 1)
    amplitudes = np.zeros(1 << m_sites, dtype=np.complex128)
    amplitudes[configs] = np.exp(-1j * phase_sum) / np.sqrt(configs.shape[0])
    return StateVector(amplitudes, copy=False), record


def make_initial_state(m_sites, spec):
    """Builds the state described by ``spec``; the record is None for basis members."""
    if spec.kind is StateKind.BASIS_MEMBER:
        return make_basis_member(m_sites, spec.excited_site, spec.background_index), None
    if spec.kind is StateKind.ENTANGLED:
        return make_entangled(m_sites, spec.excited_site, spec.phase_seed)
    return make_product(m_sites, spec.excited_site, spec.phase_seed)
