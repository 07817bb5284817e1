"""Shared fixture populations used across the suite."""

import pytest

from imputebounds import (
    CategoricalDomain,
    CellSelector,
    FinitePopulation,
    OutcomeDomain,
)

X1 = (CategoricalDomain("g", ("a",)),)
W2 = (CategoricalDomain("m", ("o", "p")),)


def build_mnar_pop():
    """Binary-outcome population at a single x cell: half the outcomes are
    missing, observed mean 0.7, missing mean 0.9, so the true mean is 0.80
    and the assumption-free interval is [0.35, 0.85]."""
    return FinitePopulation.from_cells({
        (1.0, "a", None, 1): 0.35,
        (0.0, "a", None, 1): 0.15,
        (1.0, "a", None, 0): 0.45,
        (0.0, "a", None, 0): 0.05,
    }, outcome=OutcomeDomain.binary_01(), x_domains=X1)


def build_covariate_pop():
    """Covariate-missing population whose (xi, omega=o) cell reproduces the
    worked bound instance: observed cell 0.3/0.1, missing strata 0.2/0.2."""
    return FinitePopulation.from_cells({
        (1.0, "a", "o", 1): 0.3,
        (0.0, "a", "o", 1): 0.1,
        (1.0, "a", "p", 1): 0.1,
        (0.0, "a", "p", 1): 0.1,
        (1.0, "a", "o", 0): 0.1,
        (1.0, "a", "p", 0): 0.1,
        (0.0, "a", "o", 0): 0.15,
        (0.0, "a", "p", 0): 0.05,
    }, outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
        regime="covariate")


def build_eco_pop():
    """Ecological polar case: w is never observed. Long means at o and p are
    0.6 and 0.2; the short mean is 0.4."""
    return FinitePopulation.from_cells({
        (1.0, "a", "o", 0): 0.30,
        (0.0, "a", "o", 0): 0.20,
        (1.0, "a", "p", 0): 0.10,
        (0.0, "a", "p", 0): 0.40,
    }, outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
        regime="covariate")


def build_routing_pop_and_q():
    """Covariate population plus an explicit Q tuned so the imputed-in mass
    at omega=o is 0.1 with routed mean 0.4, against an observed cell of mass
    0.3 with mean 0.8: limit share 0.75 and limit value 0.70."""
    pop = FinitePopulation.from_cells({
        (1.0, "a", "o", 1): 0.24,
        (0.0, "a", "o", 1): 0.06,
        (1.0, "a", "p", 1): 0.15,
        (0.0, "a", "p", 1): 0.15,
        (1.0, "a", "o", 0): 0.10,
        (1.0, "a", "p", 0): 0.15,
        (0.0, "a", "o", 0): 0.10,
        (0.0, "a", "p", 0): 0.05,
    }, outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
        regime="covariate")
    q = {
        (1.0, ("a",)): {("o",): 0.16, ("p",): 0.84},
        (0.0, ("a",)): {("o",): 0.40, ("p",): 0.60},
    }
    return pop, q


@pytest.fixture
def mnar_pop():
    return build_mnar_pop()


@pytest.fixture
def covariate_pop():
    return build_covariate_pop()


@pytest.fixture
def eco_pop():
    return build_eco_pop()


@pytest.fixture
def sel_a():
    return CellSelector("a")


@pytest.fixture
def sel_ao():
    return CellSelector("a", "o")


@pytest.fixture
def sel_ap():
    return CellSelector("a", "p")
