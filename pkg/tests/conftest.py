import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cifar_dir(tmp_path_factory):
    """A directory of correctly sized CIFAR-10 binary batches holding seeded random content."""
    from oracles import write_cifar_batch

    d = tmp_path_factory.mktemp("cifar")
    r = np.random.default_rng(99)
    for name in [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]:
        labels = r.integers(0, 10, 10_000).astype(np.uint8)
        imgs = r.integers(0, 256, (10_000, 3, 32, 32)).astype(np.uint8)
        write_cifar_batch(d / name, labels, imgs)
    return d


def pytest_terminal_summary(terminalreporter):
    import re

    from acceptance_log import RESULTS, record, verdict

    for rep in terminalreporter.stats.get("failed", []):
        m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", rep.nodeid)
        if m and all(s != "FAIL" for s, _ in RESULTS.get(int(m.group(1)), [])):
            record(int(m.group(1)), "FAIL", f"{rep.nodeid.split('::')[-1]} raised before reporting")
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        parts = RESULTS[n]
        detail = "; ".join(f"{d} [{s}]" if len(parts) > 1 else d for s, d in parts)
        terminalreporter.write_line(f"criterion {n}: {verdict(parts)}  {detail}")
