"""Design-based tests of sample-selection models under informative sampling.

Dict-friendly wrappers around the compiled _core module; configs are plain
dicts mirroring the JSON config file format.
"""

import json as _json

from infosamp._core import (  # noqa: F401
    ConfigError,
    DataError,
    GenerationError,
    NumericError,
    evidence_threshold,
    version,
)
from infosamp import _core

__all__ = [
    "ConfigError",
    "DataError",
    "GenerationError",
    "NumericError",
    "default_config",
    "evidence_threshold",
    "fit",
    "run_calibration",
    "run_experiment",
    "simulate",
    "test",
    "version",
]

__version__ = version()


def _dump(config):
    return "" if config is None else _json.dumps(config)


def default_config():
    """The simulation-study defaults as a dict (M=200, N=500, n=50)."""
    return _json.loads(_core.default_config_json())


def run_experiment(config=None):
    """Run the Monte Carlo rejection-rate study; returns table rows + diagnostics."""
    return _json.loads(_core.run_suite_json(_dump(config), False))


def run_calibration(config=None):
    """Run the null-generated design calibration study."""
    return _json.loads(_core.run_suite_json(_dump(config), True))


def simulate(out_dir, config=None, replicate=0):
    """Write one population and one PPS sample as CSVs; returns their paths."""
    return _json.loads(_core.simulate_csv(_dump(config), str(out_dir), replicate))


def fit(sample_csv, config=None, experiment=""):
    """Selection-model (gamma) and outcome-model (beta) fits from a sample CSV."""
    return _json.loads(_core.fit_json(str(sample_csv), _dump(config), experiment))


def test(sample_csv, config=None, experiment="", alpha=0.05):
    """FBST, LR and PS test reports for one sample CSV."""
    return _json.loads(_core.test_json(str(sample_csv), _dump(config), experiment, alpha))
