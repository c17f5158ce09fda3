import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np
import pandas as pd
import scipy
import sklearn

from spintypicality import __version__
from spintypicality.config import PRESETS, load_config, preset, validate, with_master_seed
from spintypicality.errors import CapabilityError, ConfigError, OutputError, SpinError
from spintypicality.experiments import cross_term_residual
from spintypicality.output import checksum, emit_csv, emit_svg_plot, read_csv_traces, write_manifest
from spintypicality.typicality import EnsembleDynamics, PureStateDynamics

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPABILITY = 3
EXIT_OUTPUT = 4


@dataclass
class RunManifest:
    """Everything needed to repeat a run and check its outputs."""

    config: dict
    estimators: dict = field(default_factory=dict)
    random_draws: list = field(default_factory=list)
    propagator: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    versions: dict = field(default_factory=dict)
    threads: int = 1
    wall_clock_seconds: float = 0.0
    checksums: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def versions():
    return {
        "spintypicality": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "scikit-learn": sklearn.__version__,
        "numba": numba.__version__,
    }


def _set_threads(threads):
    if threads < 1:
        raise ConfigError(f"--threads must be at least 1, got {threads}", [f"threads: {threads} out of range"])
    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))


class _Runner:
    """Executes one validated configuration and records what it consumed."""

    def __init__(self, config, threads):
        self.config = config
        self.threads = threads
        self.network = config.system.build_network()
        self.grid = config.grid.to_grid()
        self.manifest = RunManifest(config.to_dict(), threads=threads)
        if "seed" in self.network.metadata:
            self.manifest.random_draws.append({"purpose": "network", **self.network.metadata})

    def _pure(self, kind, n_realizations, label, reference=None):
        cfg = self.config
        estimator = PureStateDynamics(
            kind=kind,
            n_realizations=n_realizations,
            excited_site=cfg.initial.site,
            observed_site=cfg.observed_site,
            propagator=cfg.propagator.kind,
            dt=cfg.propagator.dt,
            master_seed=cfg.initial.master_seed,
            n_jobs=self.threads,
        )
        trace = estimator.fit_transform(self.network, self.grid, reference=reference)
        trace.label = label
        stats = estimator.get_stats()
        self.manifest.estimators[label] = estimator.get_params()
        self.manifest.propagator = trace.metadata["propagator"]
        self.manifest.random_draws.append(
            {
                "purpose": "phases",
                "trace": label,
                "master_seed": trace.metadata["master_seed"],
                "seeds": trace.metadata["realization_seeds"],
                "substream": trace.metadata["substream"],
                "count_per_seed": trace.metadata["phases_per_realization"],
            }
        )
        self.manifest.statistics[label] = {
            "n_realizations": stats.n_realizations,
            "effective_samples": stats.effective_samples,
            "rms_deviation": stats.rms_deviation,
            "max_abs_deviation": stats.max_abs_deviation,
        }
        return trace

    def _oracle(self):
        cfg = self.config
        estimator = EnsembleDynamics(
            excited_site=cfg.initial.site,
            observed_site=cfg.observed_site,
            propagator=cfg.propagator.kind,
            dt=cfg.propagator.dt,
            n_jobs=self.threads,
        )
        trace = estimator.fit_transform(self.network, self.grid)
        self.manifest.estimators[trace.label] = estimator.get_params()
        self.manifest.propagator = trace.metadata["propagator"]
        return trace

    def traces(self):
        cfg = self.config
        kind, n_realizations = cfg.initial.kind, cfg.initial.n_realizations
        if cfg.mode == "pure":
            return [self._pure(kind, 1, "P_pure")]
        if cfg.mode == "averaged":
            return [self._pure(kind, n_realizations, f"P_{kind}_{n_realizations}")]
        if cfg.mode == "oracle":
            return [self._oracle()]
        if cfg.mode == "compare":
            ens = self._oracle()
            pure = self._pure(kind, n_realizations, "P_pure", reference=ens)
            residual = cross_term_residual(pure, ens)
            self.manifest.statistics["residual"] = {"max_abs": residual.max_abs, "rms": residual.rms, "units": "W"}
            return [ens, pure, residual]
        ens = self._oracle() if cfg.initial.include_oracle else None
        series = [
            self._pure("entangled", 1, "P_ent_1", reference=ens),
            self._pure("product", 1, "P_prod_1", reference=ens),
        ]
        # N = 1 is already the P_prod_1 column
        if n_realizations > 1:
            series.append(self._pure("product", n_realizations, f"P_prod_{n_realizations}", reference=ens))
        return series + [ens] if ens is not None else series


def run(config, out_dir=".", threads=1):
    """
    Runs a validated configuration and writes its artifacts.

    Args
    ----------
    config : RunConfig
        Output of ``validate``
    out_dir : str, optional
        Directory the output paths are resolved against (default is '.')
    threads : int, optional
        Worker processes and numba threads (default is 1)

    Returns
    -------
     RunManifest: the manifest written next to the outputs
    """
    _set_threads(threads)
    start = time.perf_counter()
    out_dir = Path(out_dir)
    runner = _Runner(config, threads)
    logger.info("%s run: %d-site %s, %d samples", config.mode, config.system.m_sites, config.system.topology, config.grid.n_samples)
    series = runner.traces()
    manifest = runner.manifest
    csv_path = emit_csv(series, out_dir / config.output.csv)
    manifest.checksums[config.output.csv] = checksum(csv_path)
    if config.output.svg:
        plotted = [trace for trace in series if trace.label != "residual"]
        svg_path = emit_svg_plot(plotted, out_dir / config.output.svg, config.system.time_unit)
        manifest.checksums[config.output.svg] = checksum(svg_path)
    manifest.versions = versions()
    manifest.wall_clock_seconds = time.perf_counter() - start
    write_manifest(manifest.to_dict(), out_dir / config.output.manifest)
    return manifest


def _document(args):
    if args.preset:
        document, base_dir = preset(args.preset), None
    else:
        document, base_dir = load_config(args.config), Path(args.config).parent
    if args.seed is not None:
        document = with_master_seed(document, args.seed)
    return validate(document, base_dir)


def _cmd_run(args):
    manifest = run(_document(args), args.out_dir, args.threads)
    logger.info("finished in %.1f s", manifest.wall_clock_seconds)


def _cmd_validate(args):
    print(json.dumps(_document(args).to_dict(), indent=2, sort_keys=True))


def _cmd_presets(args):
    for name, document in PRESETS.items():
        system = document["system"]
        print(f"{name}\t{document['mode']}: {system['topology']} M={system['M']}")


def _cmd_plot(args):
    series = read_csv_traces(args.csv)
    out = args.out or str(Path(args.csv).with_suffix(".svg"))
    emit_svg_plot([t for t in series if t.label != "residual"] or series, out, args.time_unit)


def _parser():
    parser = argparse.ArgumentParser(
        prog="spintypicality",
        description="Local spin polarization dynamics from random-phase pure states and the brute-force ensemble.",
        epilog="Example usage: spintypicality run --preset fig3a --out-dir ris --threads 8",
    )
    parser.add_argument("--verbose", action="store_true", help="Optional argument: log at DEBUG level.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("run", "execute a configuration"), ("validate", "print the resolved configuration")):
        cmd = sub.add_parser(name, help=help_text)
        source = cmd.add_mutually_exclusive_group(required=True)
        source.add_argument("--config", type=str, help="JSON configuration file.")
        source.add_argument("--preset", type=str, choices=sorted(PRESETS), help="Built-in configuration.")
        cmd.add_argument("--seed", type=int, help="Optional argument: overrides initial.master_seed.")
        if name == "run":
            cmd.add_argument("--out-dir", type=str, default=".", help="Directory for the outputs (default: current).")
            cmd.add_argument("--threads", type=int, default=1, help="Worker processes and numba threads (default: 1).")
            cmd.set_defaults(handler=_cmd_run)
        else:
            cmd.set_defaults(handler=_cmd_validate)

    cmd = sub.add_parser("presets", help="list the built-in configurations")
    cmd.set_defaults(handler=_cmd_presets)

    cmd = sub.add_parser("plot", help="render an SVG from a CSV written by run")
    cmd.add_argument("csv", type=str, help="CSV written by run.")
    cmd.add_argument("--out", type=str, help="SVG path (default: the CSV path with .svg).")
    cmd.add_argument("--time-unit", type=str, default="1/b_x", help="Time axis unit (default: 1/b_x).")
    cmd.set_defaults(handler=_cmd_plot)
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.captureWarnings(True)
    try:
        args.handler(args)
    except ConfigError as error:
        logger.error("%s", error)
        for entry in error.errors:
            logger.error("  %s", entry)
        return EXIT_CONFIG
    except CapabilityError as error:
        logger.error("%s", error)
        return EXIT_CAPABILITY
    except (OutputError, OSError) as error:
        logger.error("%s", error)
        return EXIT_OUTPUT
    except SpinError as error:
        logger.error("%s", error)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
