from __future__ import annotations

import os
from pathlib import Path

import pytest

from ncaudit.tabular import DEFAULT_FILES, recipe_adult, recipe_compas, recipe_german

DATA_DIR = Path(os.environ.get("NCAUDIT_DATA", Path(__file__).resolve().parents[1] / "data" / "raw"))


def data_file(name: str) -> Path:
    path = DATA_DIR / DEFAULT_FILES[name]
    if not path.exists():
        pytest.skip(f"dataset file {path} not available")
    return path


@pytest.fixture(scope="session")
def compas():
    return recipe_compas(data_file("compas"), "binary")


@pytest.fixture(scope="session")
def compas_decile():
    return recipe_compas(data_file("compas"), "decile")


@pytest.fixture(scope="session")
def adult():
    return recipe_adult(data_file("adult"))


@pytest.fixture(scope="session")
def german():
    return recipe_german(data_file("german"))
