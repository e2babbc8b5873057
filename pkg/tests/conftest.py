import pathlib

import pytest

from relaysec.alphabet import MiEvaluator
from relaysec.channel import load_scenario

SCENARIO = pathlib.Path(__file__).resolve().parents[1] / "scenarios" / "two_antenna_three_eve.json"


@pytest.fixture(scope="session")
def scenario():
    return load_scenario(SCENARIO)


@pytest.fixture(scope="session")
def scenario_path():
    return SCENARIO


@pytest.fixture(scope="session")
def mi(scenario):
    return MiEvaluator(scenario.alphabet, quadrature_order=64)


def subset_scenario(sc, idx):
    """Scenario restricted to the given eavesdropper indices."""
    from relaysec.channel import UncertaintyRadii
    ch = sc.channels
    ch2 = type(ch)(g=ch.g, h0=ch.h0, h=ch.h, z0=ch.z0[idx], z=ch.z[idx])
    return type(sc)(channels=ch2, power=sc.power,
                    radii=UncertaintyRadii.zero(len(idx)),
                    alphabet=sc.alphabet, solver=sc.solver)
