import pytest

from artifact.cli import Runner, bundled_model_path, check_fixtures, parse_model

_CACHE = {}


def run_bundled(name):
    """Run a bundled model once per session and share the Runner."""
    if name not in _CACHE:
        spec = parse_model(bundled_model_path(name + ".model"))
        runner = Runner(spec)
        runner.run()
        check_fixtures(runner)
        _CACHE[name] = runner
    return _CACHE[name]


@pytest.fixture(scope="session")
def model_b():
    return run_bundled("B")


@pytest.fixture(scope="session")
def model_n():
    return run_bundled("N")


@pytest.fixture(scope="session")
def model_lc():
    return run_bundled("LC")
