"""Shared fixtures: one moderately sized problem reused across test modules."""

import numpy as np
import pytest

from degenstab.fredholm_transform import TransformSystem, assemble
from degenstab.kernel_builder import DecayConfig, KernelData, build_kernel
from degenstab.spectral_basis import DegenerateParams, EigenMode, build_modes


@pytest.fixture(scope="session")
def params05() -> DegenerateParams:
    return DegenerateParams(0.5)


@pytest.fixture(scope="session")
def cfg05() -> DecayConfig:
    return DecayConfig(5.0)


@pytest.fixture(scope="session")
def modes05(params05) -> list[EigenMode]:
    return build_modes(params05, 64)


@pytest.fixture(scope="session")
def kernel05(modes05, params05, cfg05) -> KernelData:
    return build_kernel(modes05, params05, cfg05)


@pytest.fixture(scope="session")
def sys05(kernel05, modes05) -> TransformSystem:
    return assemble(kernel05, modes05)


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
