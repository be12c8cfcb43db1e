import numpy as np
import pytest

from loadshed import caseio
from loadshed.netmodel import ANGLE_LIMIT, DecisionState, PowerNetwork


def four_bus():
    """Small meshed test network: one generator feeding three loads over five lines."""
    return PowerNetwork(
        from_bus=np.array([0, 0, 1, 1, 2]),
        to_bus=np.array([1, 2, 2, 3, 3]),
        admittance=np.array([10.0, 5.0, 8.0, 4.0, 6.0]),
        injection=np.array([0.9, -0.3, -0.2, -0.4]),
        name="four_bus",
    )


def random_network(rng, n, extra_lines=3):
    """Connected random network with admittances >= 1 and balanced injections."""
    f, t = [], []
    for j in range(1, n):
        f.append(int(rng.integers(0, j)))
        t.append(j)
    for _ in range(extra_lines):
        a, b = rng.choice(n, size=2, replace=False)
        f.append(int(a))
        t.append(int(b))
    m = len(f)
    P = rng.uniform(-1.0, 1.0, n)
    P -= P.mean()
    return PowerNetwork(np.array(f), np.array(t), rng.uniform(1.0, 20.0, m), P)


def random_z(net, rng):
    """Feasible shed vector: random generator cuts matched by random load cuts."""
    L, U = net.z_lower, net.z_upper
    z = np.zeros(net.n)
    gen = ~net.load_mask
    z[gen] = L[gen] * rng.uniform(0.0, 1.0, gen.sum())
    need = -z[gen].sum()
    loads = np.flatnonzero(net.load_mask & (U > L))
    rng.shuffle(loads)
    for i in loads:
        take = min(need, U[i] * rng.uniform(0.0, 1.0))
        z[i] = take
        need -= take
    for i in loads:
        take = min(need, U[i] - z[i])
        z[i] += take
        need -= take
    return z


def random_theta(net, rng, fill=None):
    th = rng.standard_normal(net.n)
    peak = np.max(np.abs(th[net.from_bus] - th[net.to_bus]), initial=0.0)
    fill = rng.uniform(0.05, 0.999) if fill is None else fill
    if peak > 0:
        th *= fill * ANGLE_LIMIT / peak
    return th


def random_state(net, rng, K=None):
    K = int(rng.integers(0, net.m + 1)) if K is None else K
    gamma = np.ones(net.m)
    gamma[rng.choice(net.m, size=K, replace=False)] = 0.0
    return DecisionState(gamma, random_z(net, rng), random_theta(net, rng))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def toy():
    return caseio.build_network(caseio.load_case("toy2bus"))


@pytest.fixture(scope="session")
def ieee14():
    return caseio.build_network(caseio.load_case("ieee14"))


@pytest.fixture(scope="session")
def ieee118():
    return caseio.build_network(caseio.load_case("ieee118"))


@pytest.fixture(scope="session")
def fourbus():
    return four_bus()


# one line per acceptance criterion, echoed again at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
