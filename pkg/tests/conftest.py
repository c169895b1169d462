import os

import pytest
from hypothesis import HealthCheck, settings

from sslc.ledger import AccountId, generate_chain
from sslc.proof_system import setup
from sslc.query_engine import Finalize, Predicate, QuerySpec

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ALICE = AccountId.from_label("alice")


@pytest.fixture(scope="session")
def alice():
    return ALICE


@pytest.fixture(scope="session")
def small_chain():
    return generate_chain(seed=11, num_blocks=4, txs_per_block=32, relevant_per_block=3, account=ALICE)


@pytest.fixture(scope="session")
def avg_spec():
    return QuerySpec(ALICE, Predicate.ACCOUNT_TOUCH, Finalize.AVERAGE)


@pytest.fixture(scope="session")
def native_params():
    return setup(4, 6, "native")


@pytest.fixture(scope="session")
def plonky2_backend():
    """Worker binary, built on first use."""
    from sslc.proof_system import plonky2

    if not plonky2.available():
        plonky2.build_binary()
    return plonky2


@pytest.fixture(scope="session")
def p2_small(plonky2_backend):
    """Smallest useful succinct shape: 4-tx batches over 8-leaf trees."""
    return setup(4, 3, "plonky2")


@pytest.fixture(scope="session")
def p2_chain():
    return generate_chain(seed=5, num_blocks=2, txs_per_block=8, relevant_per_block=3, account=ALICE)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
