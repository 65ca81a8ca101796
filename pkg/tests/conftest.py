import json
import os

import pytest

from stoverify.system import load_system

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def fixture_path(name: str) -> str:
    return os.path.abspath(os.path.join(FIXTURES, name))


def fixture_doc(name: str) -> dict:
    with open(fixture_path(name), "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def det1d():
    return load_system(fixture_path("det1d.json"))


@pytest.fixture(scope="session")
def brownian1d():
    return load_system(fixture_path("brownian1d.json"))


@pytest.fixture(scope="session")
def brownian1d_wide():
    return load_system(fixture_path("brownian1d_wide.json"))


@pytest.fixture(scope="session")
def brownian2mode():
    return load_system(fixture_path("brownian2mode.json"))


@pytest.fixture(scope="session")
def planar2mode():
    return load_system(fixture_path("planar2mode.json"))


@pytest.fixture(scope="session")
def planar2mode_t1():
    return load_system(fixture_path("planar2mode_t1.json"))
