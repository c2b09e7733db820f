import numpy as np
import pytest

import martinbench as mb
from martinbench import fixtures as fx


@pytest.fixture(scope="session")
def srw():
    return fx.srw_f2()


@pytest.fixture(scope="session")
def ball4(srw):
    return mb.Ball.enumerate(srw.group, 4)


@pytest.fixture(scope="session")
def op4(srw, ball4):
    op = mb.build_truncated_operator(srw, 1, ball4)
    op.real_spectrum = True
    return op


@pytest.fixture(scope="session")
def ball8(srw):
    return mb.Ball.enumerate(srw.group, 8)


@pytest.fixture(scope="session")
def op8(srw, ball8):
    op = mb.build_truncated_operator(srw, 1, ball8)
    op.real_spectrum = True
    return op


@pytest.fixture(scope="session")
def toy_op(srw):
    """68-atom truncation for exact potential-theory identities."""
    op = mb.build_truncated_operator(srw, 1, 2)
    op.real_spectrum = True
    return op
