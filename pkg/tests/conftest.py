import numpy as np
import pytest

from dagossip import TrialConfig, new_network


def make_net(n, seed=0, validation=False, **kw):
    return new_network(TrialConfig(n=n, seed=seed, validation=validation, **kw))


def set_clusters(net, groups, leader="first"):
    """Install clusters directly.  ``groups`` are node-index lists; the leader is
    the first listed node (or the largest ID with ``leader="max_id"``)."""
    for g in groups:
        g = np.asarray(g)
        lead = g[np.argmax(net.ids[g])] if leader == "max_id" else g[0]
        net.follow[g] = lead
    return net


def sizes_by_root(net):
    return sorted(net.cluster_sizes().tolist())


@pytest.fixture
def net16():
    return make_net(16, seed=3)


# -- acceptance report -------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    def _record(line):
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
