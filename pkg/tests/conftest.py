import time
from dataclasses import dataclass

import pytest

from balancesim.runner import RunResult, build_manifest, run_experiment


@dataclass
class TimedRun:
    result: RunResult
    seconds: float


def _timed(manifest, root, **kw) -> TimedRun:
    start = time.perf_counter()
    result = run_experiment(manifest, root, **kw)
    return TimedRun(result, time.perf_counter() - start)


@pytest.fixture(scope="session")
def rule_sweep_m3(tmp_path_factory):
    """All six kind x mechanism settings, 64 inits x 10 simulations, rule agent."""
    return _timed(build_manifest(m=3, n=10, T=10, backend="rule"), tmp_path_factory.mktemp("sweep3"), charts=False)


@pytest.fixture(scope="session")
def rule_sweep_large(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweep_large")
    return {
        m: _timed(build_manifest(m=m, n=10, T=10, backend="rule", seed=1), root, charts=False)
        for m in (6, 10)
    }
