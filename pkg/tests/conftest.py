import numpy as np
import pytest

from owcsim.geometry import Coverage
from owcsim.protocol import build_graph, generate_frame, normalize_distribution


def random_instance(rng, max_n=10, max_m=2, max_l=4):
    """Random CSA graph with N <= max_n devices, M <= max_m APs, L <= max_l slots."""
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    L = int(rng.integers(1, max_l + 1))
    support = rng.random((n, m)) < rng.uniform(0.3, 1.0)
    cov = Coverage(gains=support.astype(float), incidence_deg=np.zeros((n, m)), fov=45.0)
    weights = {d: float(rng.random()) + 0.05 for d in range(1, L + 1)}
    frame = generate_frame(n, float(rng.uniform(0.2, 1.0)), normalize_distribution(weights), L,
                           rng)
    return build_graph(frame, cov), support


@pytest.fixture
def instance_rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
