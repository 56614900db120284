"""Pytest configuration and fixtures for ksymp tests."""

from pathlib import Path

import numpy as np
import pytest

MODELS_DIR = Path(__file__).resolve().parent.parent / "models"


@pytest.fixture
def models_dir():
    """Directory holding the shipped model files."""
    return MODELS_DIR


@pytest.fixture
def harmonic():
    """Scalar field with quadratic potential, k=2, n=1."""
    from ksymp import FieldModel, as_expr

    return FieldModel.from_text(
        2,
        1,
        "0.5*(v1_1^2 + v1_2^2) - q1^2",
        name="harmonic",
        hamiltonian=as_expr("0.5*(p1_1^2 + p2_1^2) + q1^2"),
    )


@pytest.fixture
def free_field():
    """Free scalar field, k=2, n=1."""
    from ksymp import FieldModel

    return FieldModel.from_text(2, 1, "0.5*(v1_1^2 + v1_2^2)", name="free")


@pytest.fixture
def oscillator():
    """Harmonic oscillator, k=1."""
    from ksymp import FieldModel

    return FieldModel.from_text(1, 1, "0.5*v1_1^2 - 0.5*q1^2", name="oscillator")


@pytest.fixture
def product():
    """L = v1_1*v2_2, a regular-looking but rank-2 Hessian, k=2, n=2."""
    from ksymp import FieldModel

    return FieldModel.from_text(2, 2, "v1_1*v2_2", name="product")


@pytest.fixture
def half_v11_squared():
    """Almost-regular L = v1_1^2/2 on k=2, n=1."""
    from ksymp import FieldModel, as_expr

    return FieldModel.from_text(
        2,
        1,
        "0.5*v1_1^2",
        name="half_v11_squared",
        hamiltonian=as_expr("0.5*p1_1^2"),
        constraints=(as_expr("p2_1"),),
    )


@pytest.fixture
def linear():
    """L = v1_1 on k=2, n=1; the Legendre map is constant."""
    from ksymp import FieldModel, as_expr

    return FieldModel.from_text(
        2,
        1,
        "v1_1",
        name="linear",
        hamiltonian=as_expr("0"),
        constraints=(as_expr("p1_1 - 1"), as_expr("p2_1")),
    )


@pytest.fixture
def quartic():
    """L = v^4/4, k=1: p = v^3."""
    from ksymp import FieldModel

    return FieldModel.from_text(1, 1, "0.25*v1_1^4", name="quartic")


@pytest.fixture
def secondary():
    """Singular mechanics model with secondary constraints, k=1, n=2."""
    from ksymp import FieldModel

    return FieldModel.from_text(1, 2, "0.5*v1_1^2 + q1*q2", name="secondary")


@pytest.fixture
def rng():
    """Seeded generator for random points."""
    return np.random.default_rng(1234)


@pytest.fixture
def default_options():
    """Default ToolkitOptions."""
    from ksymp import ToolkitOptions

    return ToolkitOptions()


@pytest.fixture
def unit_grid():
    """[0, 1]^2 with step 0.01."""
    from ksymp import Grid

    return Grid.parse("t1=0:1:0.01,t2=0:1:0.01")
