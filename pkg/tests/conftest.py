import pytest

from tripod_mzi.kernel import KernelConfig, solve

# Values from an independent solve: scipy.special.j0, LAPACK eigh, 200-node
# grids with a 128-point inner rule (agrees with a 160/96 solve to 1e-12).
REFERENCE_LAMBDAS = (0.995432199278, 0.778316379358, 8.446751923e-3, 3.0314830869e-4)
REFERENCE_PHI0_SQ = (0.557457106662, 0.375336142985, 0.003114804546, 0.032769992025)


@pytest.fixture(scope="session")
def default_solution():
    """``(write kernel, full-cycle kernel, basis)`` at L = 10, T_W = 5.5."""
    return solve(KernelConfig())


@pytest.fixture(scope="session")
def default_basis(default_solution):
    return default_solution[2]


@pytest.fixture(scope="session")
def small_solution():
    return solve(KernelConfig(t_w=3.0, l=4.0, n_t=48, n_z=48, n_inner=48))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
