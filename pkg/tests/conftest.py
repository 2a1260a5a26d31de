import pytest

from geoculture.pipeline import table_keys
from geoculture.synth import EffectConfig, SynthConfig, generate_city


def small_config(**overrides) -> SynthConfig:
    base = dict(seed=7, ward_count=20, group_sizes=(6, 7, 3, 4), venues_per_ward=(8, 14),
                transitions_per_year=900,
                effect=EffectConfig(base_rate=8.0, group_shift=(2.0, 0.0, 3.0, -1.0),
                                    time_trend=(0.0, 1.0, 2.0), noise_sd=1.0))
    base.update(overrides)
    return SynthConfig(**base)


@pytest.fixture(scope="session")
def small_city():
    return generate_city(small_config())


@pytest.fixture(scope="session")
def small_files(small_city):
    return small_city.files()


@pytest.fixture(scope="session")
def small_inputs(small_files):
    return {k: small_files[f"{k}.csv"] for k in table_keys()}


@pytest.fixture
def city_dir(tmp_path, small_city):
    d = tmp_path / "city"
    small_city.write(d)
    return d


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
