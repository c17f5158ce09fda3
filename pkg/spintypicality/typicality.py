import logging

from sklearn.base import BaseEstimator

from spintypicality.experiments import averaged_trace, ensemble_trace
from spintypicality.propagators import MAX_EXACT_SITES, make_propagator
from spintypicality.states import StateKind

logger = logging.getLogger(__name__)


class _DynamicsEstimator(BaseEstimator):
    def _propagator(self, network):
        return make_propagator(network, self.propagator, self.dt, self.max_exact_sites)

    def _run(self, network, grid, **kwargs):
        raise NotImplementedError

    def fit(self, network, grid, **kwargs):
        """
        Computes the local polarization trace of ``network`` on ``grid``.

        Args
        ----------
        network : CouplingNetwork
            Coupling network to evolve
        grid : TimeGrid
            Sample times
        reference : PolarizationTrace, optional
            Trace the convergence statistics are measured against
            (PureStateDynamics only)

        Returns
        -------
         self
        """
        logger.debug("%s on %d sites, %d samples", type(self).__name__, network.m_sites, grid.n_samples)
        package_logger = logging.getLogger("spintypicality")
        level = package_logger.level
        if self.verbose:
            package_logger.setLevel(logging.DEBUG)
        try:
            self._run(network, grid, **kwargs)
        finally:
            package_logger.setLevel(level)
        return self

    def fit_transform(self, network, grid, **kwargs):
        """
        Computes and returns the local polarization trace

        Returns
        -------
         PolarizationTrace
        """
        return self.fit(network, grid, **kwargs).trace_

    def get_trace(self):
        """
        Returns the trace computed by the last fit, None before fitting

        Returns:
        PolarizationTrace: polarization trace
        """
        return getattr(self, "trace_", None)


class PureStateDynamics(_DynamicsEstimator):
    """
    Ensemble polarization dynamics estimated from random-phase pure states.

    A single entangled state with 2^(M-1) independent phases already
    reproduces the infinite-temperature ensemble up to cross terms of order
    2^(-(M-1)/2); product states need about 2^(M-1)/(M-1) realizations for the
    same accuracy.
    """

    def __init__(
        self,
        kind="entangled",
        n_realizations=1,
        excited_site=0,
        observed_site=None,
        propagator="trotter",
        dt=None,
        master_seed=0,
        max_exact_sites=MAX_EXACT_SITES,
        n_jobs=1,
        verbose=False,
    ):
        """
        Parameters
        ----------
        kind : str, optional
            Initial state family, 'entangled' or 'product' (default is 'entangled')
        n_realizations : int, optional
            Number of independently seeded states averaged (default is 1)
        excited_site : int, optional
            Site n polarized at t = 0 (default is 0)
        observed_site : int, optional
            Site n' whose polarization is recorded (default is the excited site)
        propagator : str, optional
            'exact' or 'trotter' (default is 'trotter')
        dt : float, optional
            Trotter step (default is 0.02 / b_max)
        master_seed : int, optional
            Seed all realization seeds are derived from (default is 0)
        max_exact_sites : int, optional
            Largest M the exact propagator accepts (default is 12)
        n_jobs : int, optional
            Worker processes for the realizations (default is 1)
        verbose : bool, optional
            Logs the progress at DEBUG level (default is False)
        """
        self.kind = kind
        self.n_realizations = n_realizations
        self.excited_site = excited_site
        self.observed_site = observed_site
        self.propagator = propagator
        self.dt = dt
        self.master_seed = master_seed
        self.max_exact_sites = max_exact_sites
        self.n_jobs = n_jobs
        self.verbose = verbose

    def _run(self, network, grid, reference=None):
        observed = self.excited_site if self.observed_site is None else self.observed_site
        self.trace_, self.stats_ = averaged_trace(
            network,
            StateKind(self.kind),
            self.excited_site,
            observed,
            grid,
            self._propagator(network),
            self.n_realizations,
            self.master_seed,
            n_jobs=self.n_jobs,
            reference=reference,
        )

    def get_stats(self):
        """
        Returns the realization statistics of the last fit

        Returns:
        ConvergenceStats: per-time mean and variance of W
        """
        return getattr(self, "stats_", None)


class EnsembleDynamics(_DynamicsEstimator):
    """Brute-force infinite-temperature ensemble, one evolution per basis member."""

    def __init__(
        self,
        excited_site=0,
        observed_site=None,
        propagator="exact",
        dt=None,
        blocked=True,
        max_exact_sites=MAX_EXACT_SITES,
        n_jobs=1,
        verbose=False,
    ):
        """
        Parameters
        ----------
        excited_site : int, optional
            Site n polarized at t = 0 (default is 0)
        observed_site : int, optional
            Site n' whose polarization is recorded (default is the excited site)
        propagator : str, optional
            'exact' or 'trotter' (default is 'exact')
        dt : float, optional
            Trotter step (default is 0.02 / b_max)
        blocked : bool, optional
            Evolve members inside their magnetization sectors with the exact
            propagator (default is True)
        max_exact_sites : int, optional
            Largest M the exact propagator accepts (default is 12)
        n_jobs : int, optional
            Worker processes for the member loop (default is 1)
        verbose : bool, optional
            Logs the progress at DEBUG level (default is False)
        """
        self.excited_site = excited_site
        self.observed_site = observed_site
        self.propagator = propagator
        self.dt = dt
        self.blocked = blocked
        self.max_exact_sites = max_exact_sites
        self.n_jobs = n_jobs
        self.verbose = verbose

    def _run(self, network, grid):
        observed = self.excited_site if self.observed_site is None else self.observed_site
        self.trace_ = ensemble_trace(
            network,
            self.excited_site,
            observed,
            grid,
            self._propagator(network),
            blocked=self.blocked,
            n_jobs=self.n_jobs,
        )
