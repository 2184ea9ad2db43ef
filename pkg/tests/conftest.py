import pytest

from predmod import ModelSpec, constant_shift, default_world, epe_modified, epe_unmodified

PROBE = (0.5,)
N_TRAIN = 500
REPS = 4000
SEED = 123


@pytest.fixture(scope="session")
def world():
    return default_world()


@pytest.fixture(scope="session")
def linear_spec():
    return ModelSpec()


@pytest.fixture(scope="session")
def unmod_report(world, linear_spec):
    return epe_unmodified(world, linear_spec, N_TRAIN, PROBE, REPS, SEED)


@pytest.fixture(scope="session")
def shift_report(world, linear_spec):
    return epe_modified(world, linear_spec, constant_shift(0.1), N_TRAIN, PROBE, REPS, SEED)
