import numpy as np
import pytest

from isacpack import _pykernels, kernels
from isacpack.signal_model import ReducedInstance


def random_instance(rng, M, N, eps=None, P=1.0, rank=None, ortho=False):
    """Reduced instance with descending random gains and ``||s0||^2 = P``."""
    rank = N if rank is None else rank
    sigma = np.sort(rng.uniform(0.3, 3.0, rank))[::-1]
    V = np.linalg.qr(rng.standard_normal((N, N)))[0] if ortho else np.eye(N)
    s0 = rng.standard_normal(N)
    s0 *= np.sqrt(P) / np.linalg.norm(s0)
    eps = rng.uniform(0.1, 0.6) if eps is None else eps
    return ReducedInstance(M=M, N=N, P=P, eps=eps, sigma=sigma, V=V, s0=s0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BACKENDS = {"python": _pykernels}
if kernels.BACKEND == "cython":
    from isacpack import _kernels

    BACKENDS["cython"] = _kernels


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    mod = BACKENDS[request.param]
    monkeypatch.setattr(kernels, "lagrangian_value_grad", mod.lagrangian_value_grad)
    monkeypatch.setattr(kernels, "pair_sq_distances", mod.pair_sq_distances)
    return request.param


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
