"""Shared Monte Carlo fixtures for the acceptance-scale ensembles.

All the statistical tests consume the same handful of frozen ensembles,
so they are built once per session and shared.  Every draw inside the
simulator is a pure function of (seed, path index, step index), which
makes each fixture bit-reproducible across runs, machines and thread
counts; the numbers asserted downstream were measured once from these
exact configurations and cannot drift.

Escape radii are deliberately asymmetric between drift signs in d = 2:
the outward member pays transport time ~ r_escape^2 per escaping path,
while the cheap inward member can afford the large radius that keeps
exclusion bias out of its conditioned mean (see check_mean_duality's
censoring advisory for the quantitative rule).  Build cost is a few
minutes of single-core time, dominated by the d = 2 outward member.
"""

import os
import time
import warnings

# Must happen before numba's first import (which the simulate kernels do
# lazily): give the pool more threads than this box has cores so the
# thread-invariance tests exercise a genuine fan-out.
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import pytest

from fpduality.model import ProcessSpec, SimConfig
from fpduality.rng import derive_stream_seed
from fpduality.simulate import CensoringBiasWarning, run_ensemble

MASTER_SEED = 20260825

SPEC_D1 = ProcessSpec(
    d=1, diffusion=1.0, drift_strength=1.0, drift_sign=1,
    target_radius=0.0, start_radius=1.0,
)
SPEC_D2 = ProcessSpec(
    d=2, diffusion=1.0, drift_strength=4.0, drift_sign=1,
    target_radius=1.0, start_radius=2.0,
)
SPEC_D3 = ProcessSpec(
    d=3, diffusion=1.0, drift_strength=1.0, drift_sign=1,
    target_radius=1.0, start_radius=2.0,
)
SPEC_D4 = ProcessSpec(
    d=4, diffusion=1.0, drift_strength=1.0, drift_sign=1,
    target_radius=1.0, start_radius=2.0,
)
# deliberately wrong |v| for the negative-control KS comparison
SPEC_D3_V2 = ProcessSpec(
    d=3, diffusion=1.0, drift_strength=2.0, drift_sign=-1,
    target_radius=1.0, start_radius=2.0,
)

ACCEPTANCE_CONFIGS = {
    "d1_plus": (SPEC_D1, "plus", 100_000, 1e-3, 200.0, 12.0),
    "d1_minus": (SPEC_D1.with_sign(-1), "minus", 100_000, 1e-3, 200.0, 12.0),
    "d2_plus": (SPEC_D2, "plus", 100_000, 1e-3, 200.0, 20.0),
    "d2_minus": (SPEC_D2.with_sign(-1), "minus", 100_000, 1e-3, 2000.0, 60.0),
    "d3_plus": (SPEC_D3, "plus", 100_000, 1e-3, 100.0, 10.0),
    "d3_minus": (SPEC_D3.with_sign(-1), "minus", 100_000, 1e-3, 100.0, 10.0),
    "d4_plus": (SPEC_D4, "plus", 100_000, 1e-3, 40.0, 8.0),
    "d4_minus": (SPEC_D4.with_sign(-1), "minus", 100_000, 1e-3, 40.0, 8.0),
    "d3_mismatch": (SPEC_D3_V2, "mismatch", 40_000, 1e-3, 100.0, 10.0),
}


def acceptance_sim_config(name):
    spec, label, n_paths, dt, t_max, r_escape = ACCEPTANCE_CONFIGS[name]
    config = SimConfig(
        n_paths=n_paths,
        dt=dt,
        t_max=t_max,
        r_escape=r_escape,
        seed=derive_stream_seed(MASTER_SEED, label),
    )
    return spec, config


@pytest.fixture(scope="session")
def mc_build_seconds():
    """Wall-clock build time per ensemble, filled in as fixtures build."""
    return {}


def _build(name, mc_build_seconds):
    spec, config = acceptance_sim_config(name)
    start = time.perf_counter()
    with warnings.catch_warnings():
        # d >= 3 outward configs warn that the censoring bound is not
        # attainable; that is expected and covered by its own test.
        warnings.simplefilter("ignore", CensoringBiasWarning)
        ens = run_ensemble(spec, config)
    mc_build_seconds[name] = time.perf_counter() - start
    return ens


@pytest.fixture(scope="session")
def ens_d1_plus(mc_build_seconds):
    return _build("d1_plus", mc_build_seconds)


@pytest.fixture(scope="session")
def ens_d1_minus(mc_build_seconds):
    return _build("d1_minus", mc_build_seconds)


@pytest.fixture(scope="session")
def ens_d2_plus(mc_build_seconds):
    return _build("d2_plus", mc_build_seconds)


@pytest.fixture(scope="session")
def ens_d2_minus(mc_build_seconds):
    return _build("d2_minus", mc_build_seconds)


@pytest.fixture(scope="session")
def ens_d3_plus(mc_build_seconds):
    return _build("d3_plus", mc_build_seconds)


@pytest.fixture(scope="session")
def ens_d3_minus(mc_build_seconds):
    return _build("d3_minus", mc_build_seconds)


@pytest.fixture(scope="session")
def ens_d4_plus(mc_build_seconds):
    return _build("d4_plus", mc_build_seconds)


@pytest.fixture(scope="session")
def ens_d4_minus(mc_build_seconds):
    return _build("d4_minus", mc_build_seconds)


@pytest.fixture(scope="session")
def ens_d3_mismatch(mc_build_seconds):
    return _build("d3_mismatch", mc_build_seconds)
