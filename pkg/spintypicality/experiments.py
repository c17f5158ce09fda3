import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from spintypicality.core import check_site, up_probability
from spintypicality.errors import CapabilityError, DimensionError, DomainError
from spintypicality.helpers import PHASE_STREAM, check_seed, derive_seed
from spintypicality.propagators import MAX_EXACT_SITES
from spintypicality.states import InitialStateSpec, StateKind, make_basis_member, make_initial_state

logger = logging.getLogger(__name__)

MAX_ORACLE_SITES_TROTTER = 14
RANGE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Sample times t_k = k t_max / (n_samples - 1), k = 0 .. n_samples - 1."""

    t_max: float
    n_samples: int

    def __post_init__(self):
        if self.n_samples < 2:
            raise DomainError(f"a time grid needs at least 2 samples, got {self.n_samples}")
        if not self.t_max > 0:
            raise DomainError(f"t_max must be positive, got {self.t_max}")

    @property
    def times(self):
        return np.arange(self.n_samples) * self.t_max / (self.n_samples - 1)


@dataclass
class PolarizationTrace:
    grid: TimeGrid
    values: np.ndarray
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n_samples,):
            raise DimensionError(f"{self.values.shape[0]} values for a grid of {self.grid.n_samples} samples")
        if np.any(np.abs(self.values) > 1.0 + RANGE_TOLERANCE):
            raise DomainError(f"polarization of trace {self.label!r} leaves [-1, 1]")

    @property
    def times(self):
        return self.grid.times

    @property
    def w_values(self):
        return 0.5 * (self.values + 1.0)


@dataclass
class ConvergenceStats:
    """
    Realization statistics of an averaged trace.

    ``mean`` and ``variance`` are per-time values of W; deviations from the
    reference trace are in P units (twice the W deviation).
    """

    mean: np.ndarray
    variance: np.ndarray
    n_realizations: int
    effective_samples: int
    rms_deviation: float = None
    max_abs_deviation: float = None

    @property
    def standard_error(self):
        return np.sqrt(self.variance / self.n_realizations)

    @property
    def rms_deviation_w(self):
        return None if self.rms_deviation is None else 0.5 * self.rms_deviation


@dataclass
class ResidualTrace:
    """Cross-term residual (P_pure - P_ens) / 2, in W units."""

    grid: TimeGrid
    values: np.ndarray
    max_abs: float
    rms: float
    label: str = "residual"

    @property
    def times(self):
        return self.grid.times


@dataclass(frozen=True)
class EchoReport:
    decay_time: float
    minimum: float
    revival_time: float
    revival_height: float


def _parallel_rows(task, chunks, n_jobs):
    # joblib keeps the submission order, so the stacked rows never depend on n_jobs.
    results = Parallel(n_jobs=n_jobs)(delayed(task)(chunk) for chunk in chunks if len(chunk))
    return np.vstack(results)


def _chunks(count, n_jobs):
    return np.array_split(np.arange(count), max(1, min(int(n_jobs), count)))


def _sample_w(propagator, psi0, observed_site, times):
    return np.array([up_probability(psi, observed_site) for _, psi in propagator.evolve_along(psi0, times)])


class _MemberTask:
    def __init__(self, propagator, m_sites, site, observed_site, times):
        self.propagator = propagator
        self.m_sites = m_sites
        self.site = site
        self.observed_site = observed_site
        self.times = times

    def __call__(self, indices):
        return np.array(
            [
                _sample_w(self.propagator, make_basis_member(self.m_sites, self.site, int(i)), self.observed_site, self.times)
                for i in indices
            ]
        )


class _RealizationTask:
    def __init__(self, propagator, m_sites, kind, site, observed_site, seeds, times):
        self.propagator = propagator
        self.m_sites = m_sites
        self.kind = kind
        self.site = site
        self.observed_site = observed_site
        self.seeds = seeds
        self.times = times

    def __call__(self, indices):
        rows = []
        for r in indices:
            spec = InitialStateSpec(self.kind, self.site, self.seeds[r])
            psi0, _ = make_initial_state(self.m_sites, spec)
            rows.append(_sample_w(self.propagator, psi0, self.observed_site, self.times))
        return np.array(rows)


def _sector_oracle_w(sectors, site, observed_site, times):
    """Ensemble W(t) from per-sector eigensystems, one sector at a time."""
    w = np.zeros(times.shape[0])
    for block in sectors.blocks:
        start = ((block.configs >> site) & 1) == 1
        final = ((block.configs >> observed_site) & 1) == 1
        if not (start.any() and final.any()):
            continue
        v_start = block.eigenvectors[start, :]
        v_final = block.eigenvectors[final, :]
        for k, t in enumerate(times):
            amplitudes = (v_final * np.exp(-1j * block.eigenvalues * t)) @ v_start.conj().T
            w[k] += np.sum(np.abs(amplitudes) ** 2)
    return w / (1 << (sectors.m_sites - 1))


def ensemble_trace(net, site, observed_site, grid, propagator, blocked=True, n_jobs=1):
    """
    Brute-force ensemble polarization P_{n'n}(t).

    Evolves every one of the 2^(M-1) basis members with site n up, weights
    them uniformly and records the mean up probability of site n'. With the
    exact propagator the members are evolved inside their magnetization
    sectors unless ``blocked`` is False.

    Parameters
    ----------
    net : CouplingNetwork
    site : int
        Excited site n
    observed_site : int
        Observed site n'
    grid : TimeGrid
    propagator : ExactPropagator or TrotterPropagator
    blocked : bool, optional
        Use the sector-blocked exact oracle (default is True)
    n_jobs : int, optional
        Worker processes for the member loop (default is 1)

    Returns
    -------
    PolarizationTrace
    """
    m_sites = net.m_sites
    site = check_site(site, m_sites)
    observed_site = check_site(observed_site, m_sites)
    if propagator.kind == "trotter":
        if m_sites > MAX_ORACLE_SITES_TROTTER:
            raise CapabilityError(
                f"brute-force oracle of {m_sites} sites exceeds the cap of {MAX_ORACLE_SITES_TROTTER}; "
                "use a pure-state trace instead"
            )
        if m_sites > MAX_EXACT_SITES:
            message = f"brute-force oracle evolves {1 << (m_sites - 1)} members with the Trotter propagator"
            logger.warning(message)
            warnings.warn(message, RuntimeWarning)
    times = grid.times
    members = 1 << (m_sites - 1)
    use_sectors = blocked and propagator.kind == "exact"
    if use_sectors:
        w = _sector_oracle_w(propagator.sectors, site, observed_site, times)
    else:
        if n_jobs > 1:
            propagator.prepare()
        task = _MemberTask(propagator, m_sites, site, observed_site, times)
        w = _parallel_rows(task, _chunks(members, n_jobs), n_jobs).mean(axis=0)
    logger.info("ensemble trace over %d members (%s)", members, "sector blocked" if use_sectors else "member loop")
    metadata = {
        "state_kind": "ensemble",
        "excited_site": site,
        "observed_site": observed_site,
        "members": members,
        "blocked": use_sectors,
        "propagator": propagator.describe(grid.times),
    }
    return PolarizationTrace(grid, 2.0 * (w - 0.5), "P_ens", metadata)


def pure_state_trace(net, spec, observed_site, grid, propagator):
    """
    Polarization of site n' from one pure initial state, P = 2 (W - 1/2).

    The state is evolved once along the grid and read at every sample time.
    """
    observed_site = check_site(observed_site, net.m_sites)
    psi0, record = make_initial_state(net.m_sites, spec)
    w = _sample_w(propagator, psi0, observed_site, grid.times)
    metadata = {
        "state_kind": spec.kind.value,
        "excited_site": spec.excited_site,
        "observed_site": observed_site,
        "n_realizations": 1,
        "phases": record.to_dict() if record else None,
        "propagator": propagator.describe(grid.times),
    }
    return PolarizationTrace(grid, 2.0 * (w - 0.5), "P_pure", metadata)


def averaged_trace(
    net, kind, site, observed_site, grid, propagator, n_realizations, master_seed, n_jobs=1, reference=None
):
    """
    Mean polarization over ``n_realizations`` independently seeded pure states.

    Realization r uses the seed ``derive_seed(master_seed, r)``, so the result
    depends only on ``master_seed``. Rows are reduced in realization order.

    Parameters
    ----------
    net : CouplingNetwork
    kind : StateKind
        ENTANGLED or PRODUCT
    site, observed_site : int
    grid : TimeGrid
    propagator : ExactPropagator or TrotterPropagator
    n_realizations : int
    master_seed : int
    n_jobs : int, optional
        Worker processes (default is 1)
    reference : PolarizationTrace, optional
        Trace the deviations in the stats are measured against

    Returns
    -------
    (PolarizationTrace, ConvergenceStats)
    """
    kind = StateKind(kind)
    if kind is StateKind.BASIS_MEMBER:
        raise DomainError("averaging runs over random-phase states only")
    if n_realizations < 1:
        raise DomainError(f"need at least one realization, got {n_realizations}")
    site = check_site(site, net.m_sites)
    observed_site = check_site(observed_site, net.m_sites)
    master_seed = check_seed(master_seed)
    seeds = [derive_seed(master_seed, r) for r in range(n_realizations)]
    if n_jobs > 1:
        propagator.prepare()
    task = _RealizationTask(propagator, net.m_sites, kind, site, observed_site, seeds, grid.times)
    rows = _parallel_rows(task, _chunks(n_realizations, n_jobs), n_jobs)
    mean = rows.mean(axis=0)
    variance = rows.var(axis=0, ddof=1) if n_realizations > 1 else np.zeros_like(mean)
    phases = (1 << (net.m_sites - 1)) if kind is StateKind.ENTANGLED else net.m_sites - 1
    metadata = {
        "state_kind": kind.value,
        "excited_site": site,
        "observed_site": observed_site,
        "n_realizations": n_realizations,
        "master_seed": master_seed,
        "realization_seeds": seeds,
        "substream": [PHASE_STREAM],
        "phases_per_realization": phases,
        "propagator": propagator.describe(grid.times),
    }
    trace = PolarizationTrace(grid, 2.0 * (mean - 0.5), f"P_{kind.value}_{n_realizations}", metadata)
    stats = ConvergenceStats(mean, variance, n_realizations, effective_samples(kind, net.m_sites, n_realizations))
    if reference is not None:
        stats.rms_deviation = rms_deviation(trace, reference)
        stats.max_abs_deviation = max_abs_deviation(trace, reference)
    logger.info("averaged %d %s realizations", n_realizations, kind.value)
    return trace, stats


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise DimensionError(f"grid mismatch: {a.grid} vs {b.grid}")


def cross_term_residual(pure, ens):
    """(P_pure - P_ens) / 2, which equals the summed cross terms in W units."""
    _check_same_grid(pure, ens)
    values = 0.5 * (pure.values - ens.values)
    return ResidualTrace(pure.grid, values, float(np.max(np.abs(values))), float(np.sqrt(np.mean(values**2))))


def chebyshev_bound(p_max, n_realizations, eps):
    """
    Upper bound on Pr[|<W> - W_ens| >= eps].

    The variance of one realization is at most max{p_i}, so Chebyshev's
    inequality gives min(1, p_max / (N eps^2)).
    """
    if not 0 < p_max <= 1:
        raise DomainError(f"p_max must lie in (0, 1], got {p_max}")
    if n_realizations < 1:
        raise DomainError(f"need at least one realization, got {n_realizations}")
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    return min(1.0, p_max / (n_realizations * eps**2))


def effective_samples(kind, m_sites, n_realizations):
    """Independent phases sampled: N 2^(M-1) for entangled states, N (M-1) for product states."""
    if m_sites < 2:
        raise DomainError(f"effective samples need M >= 2, got {m_sites}")
    kind = StateKind(kind)
    if kind is StateKind.ENTANGLED:
        return n_realizations * (1 << (m_sites - 1))
    if kind is StateKind.PRODUCT:
        return n_realizations * (m_sites - 1)
    raise DomainError("basis members carry no random phases")


def _values(trace):
    return trace.values if isinstance(trace, PolarizationTrace) else np.asarray(trace, dtype=np.float64)


def rms_deviation(a, b):
    return float(np.sqrt(np.mean((_values(a) - _values(b)) ** 2)))


def max_abs_deviation(a, b):
    return float(np.max(np.abs(_values(a) - _values(b))))


def smooth(values, window=5):
    """Centered moving average, shrinking the window at the edges."""
    return pd.Series(_values(values)).rolling(window, center=True, min_periods=1).mean().to_numpy()


def decay_time(trace, level=np.exp(-1.0)):
    """First time the trace falls below ``level``, linearly interpolated; None if it never does."""
    values, times = trace.values, trace.times
    below = np.flatnonzero(values < level)
    if below.size == 0:
        return None
    k = below[0]
    if k == 0:
        return float(times[0])
    fraction = (values[k - 1] - level) / (values[k - 1] - values[k])
    return float(times[k - 1] + fraction * (times[k] - times[k - 1]))


def find_echo(trace, decay_below=0.2, revival_above=0.4, t_min=0.0, t_max=None):
    """
    Searches a trace for a mesoscopic echo.

    An echo is a maximum above ``revival_above`` inside [t_min, t_max] that
    comes after the trace first fell below ``decay_below``.

    Returns
    -------
    EchoReport or None
    """
    values, times = trace.values, trace.times
    t_max = times[-1] if t_max is None else t_max
    below = np.flatnonzero(values < decay_below)
    if below.size == 0:
        return None
    start = below[0]
    window = np.flatnonzero((times >= t_min) & (times <= t_max) & (np.arange(times.size) > start))
    if window.size == 0:
        return None
    peak = window[np.argmax(values[window])]
    if values[peak] <= revival_above:
        return None
    return EchoReport(float(times[start]), float(np.min(values[start:peak + 1])), float(times[peak]), float(values[peak]))


def loglog_slope(x, y):
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)), 1)[0])
