import pytest


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", default=False)
    parser.addoption("--replicates", action="store", type=int, default=20)


def pytest_generate_tests(metafunc):
    # Only parametrize tests that ask for the option as a fixture.
    option_value = metafunc.config.option.replicates
    if 'replicates' in metafunc.fixturenames and option_value is not None:
        metafunc.parametrize("replicates", [option_value], scope='module')


def pytest_collection_modifyitems(config, items):
    if config.getoption("--full"):
        return

    skip = pytest.mark.skip(reason="needs --full")

    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: replicate studies and long chains, run with --full")
