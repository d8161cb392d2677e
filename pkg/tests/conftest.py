from __future__ import annotations

import pathlib

import pytest

from causaloid import parse_scenario, run_pipeline

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"

SCENARIO_NAMES = (
    "classical_bit",
    "classical_trit",
    "qubit_channel",
    "qutrit_channel",
    "adjacent_gates",
    "spacelike_bits",
    "polariser_chain",
    "classical_chain3",
)


def scenario_path(name: str) -> str:
    return str(SCENARIO_DIR / f"{name}.json")


@pytest.fixture(scope="session")
def scenarios():
    """Lazy parsed-scenario cache shared by the whole run."""
    cache: dict = {}

    def get(name: str):
        if name not in cache:
            cache[name] = parse_scenario(scenario_path(name))
        return cache[name]

    return get


@pytest.fixture(scope="session")
def pipelines(scenarios):
    """Lazy pipeline-report cache shared by the whole run."""
    cache: dict = {}

    def get(name: str):
        if name not in cache:
            cache[name] = run_pipeline(scenarios(name))
        return cache[name]

    return get
