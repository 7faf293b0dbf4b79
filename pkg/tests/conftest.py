import os
from pathlib import Path

import pytest

from peakmix.io import read_frequencies, read_peaks, read_profile

DATA = Path(__file__).resolve().parents[1] / "data"

# Optional external tables (Butler-2003-derived allele frequencies); the
# pinned evidence and deconvolution numbers depend on them and the tests
# that assert those values skip when the tables are not supplied.
EVETT_FREQS_ENV = "PEAKMIX_EVETT_FREQS"
PERLIN_FREQS_ENV = "PEAKMIX_PERLIN_FREQS"


@pytest.fixture(scope="session")
def evett_ds():
    return read_peaks(DATA / "evett_peaks.csv")


@pytest.fixture(scope="session")
def perlin_ds():
    return read_peaks(DATA / "perlin_peaks.csv")


@pytest.fixture(scope="session")
def evett_major():
    return read_profile(DATA / "evett_major.csv")


@pytest.fixture(scope="session")
def perlin_major():
    return read_profile(DATA / "perlin_major.csv")


@pytest.fixture(scope="session")
def perlin_minor():
    return read_profile(DATA / "perlin_minor.csv")


@pytest.fixture(scope="session")
def evett_freqs_synth():
    return read_frequencies(DATA / "evett_freqs_synthetic.csv")


@pytest.fixture(scope="session")
def perlin_freqs_synth():
    return read_frequencies(DATA / "perlin_freqs_synthetic.csv")


def _external_freqs(env_var):
    path = os.environ.get(env_var)
    if not path:
        pytest.skip(f"set {env_var} to a Butler-2003-derived frequency CSV to run this test")
    return read_frequencies(path)


@pytest.fixture(scope="session")
def evett_freqs_ext():
    return _external_freqs(EVETT_FREQS_ENV)


@pytest.fixture(scope="session")
def perlin_freqs_ext():
    return _external_freqs(PERLIN_FREQS_ENV)
