import json
from pathlib import Path

import pytest

from mismac import spec_from_config

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "mismac" / "configs"


def load_config(name):
    with open(CONFIG_DIR / name, encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def std_config():
    return load_config("standard.json")


@pytest.fixture(scope="session")
def cog_config():
    return load_config("cognitive.json")


@pytest.fixture(scope="session")
def std_spec(std_config):
    return spec_from_config(std_config)


@pytest.fixture(scope="session")
def cog_spec(cog_config):
    return spec_from_config(cog_config)
