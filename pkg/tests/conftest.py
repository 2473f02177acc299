import importlib.resources

import pytest

from cateff.parser import parse_bundle


def theory_text(name: str) -> str:
    res = importlib.resources.files("cateff") / "theories" / f"{name}.ceff"
    return res.read_text(encoding="utf-8")


def theory_path(name: str) -> str:
    return str(importlib.resources.files("cateff") / "theories" / f"{name}.ceff")


@pytest.fixture(scope="session")
def session_bundle():
    return parse_bundle(theory_text("session"), "session.ceff")


@pytest.fixture(scope="session")
def pair_bundle():
    return parse_bundle(theory_text("pair_handler"), "pair_handler.ceff")


@pytest.fixture(scope="session")
def mutstore_bundle():
    return parse_bundle(theory_text("mutstore"), "mutstore.ceff")


@pytest.fixture(scope="session")
def widened_bundle():
    return parse_bundle(theory_text("widened"), "widened.ceff")
