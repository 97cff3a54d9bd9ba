import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


def load_fixture(name: str):
    from rewlab.lang import parse

    return parse((FIXTURES / name).read_text())


@pytest.fixture(scope="session")
def webserver_a():
    return load_fixture("webserver_a.pgcl")


@pytest.fixture(scope="session")
def webserver_b():
    return load_fixture("webserver_b.pgcl")
