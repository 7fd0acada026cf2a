import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from weightzoo.data import SyntheticSpec, gen_synthetic  # noqa: E402
from weightzoo.nn import base_cnn  # noqa: E402
from weightzoo.zoo import build_zoo  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

TINY = SyntheticSpec(samples_per_class=40, test_samples_per_class=20, image_size=8)


@pytest.fixture(scope="session")
def tiny_data():
    return gen_synthetic(TINY)


@pytest.fixture(scope="session")
def tiny_zoo(tmp_path_factory, tiny_data):
    """24 briefly trained 8x8 CNNs; enough structure for plumbing tests."""
    train, test = tiny_data
    out = tmp_path_factory.mktemp("tiny_zoo")
    return build_zoo(base_cnn((8, 8, 1)), train, test, count=24, sweep_seed=9, epochs=3, out_dir=out)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
