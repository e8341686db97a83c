import pathlib

import pytest

import volwatch as vw

ARTIFACTS = pathlib.Path(__file__).parent / "_artifacts"


@pytest.fixture(scope="session")
def artifacts_dir() -> pathlib.Path:
    ARTIFACTS.mkdir(exist_ok=True)
    return ARTIFACTS


@pytest.fixture(scope="session")
def gaussian() -> vw.InnovationDist:
    return vw.InnovationDist.standard_normal()


@pytest.fixture(scope="session")
def theta_stationary() -> vw.GarchParams:
    return vw.GarchParams(omega=0.10, alpha=0.18, beta=0.80)


@pytest.fixture(scope="session")
def theta_explosive() -> vw.GarchParams:
    return vw.GarchParams(omega=0.10, alpha=0.30, beta=0.80)
