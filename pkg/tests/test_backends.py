import numpy as np
import pytest

from swarmkin import _backend, abm, limits
from swarmkin.core import InteractionKernel, ModelParams
from swarmkin.recipes import handset_population

needs_compiled = pytest.mark.skipif(_backend.compiled_kernels is None, reason="compiled kernels not built")


@needs_compiled
@pytest.mark.parametrize("kernel", ["global", "tophat:0.2", "tophat:0.05", "shrinking:0.5"])
def test_abm_backends_are_bit_identical(kernel):
    p = ModelParams(0.3, 1.0, 12, kernel=InteractionKernel.from_string(kernel), seed=21)
    a = abm.run(p, 5000, backend="python")
    b = abm.run(p, 5000, backend="cython")
    assert np.array_equal(a.series.u, b.series.u)
    assert np.array_equal(a.final_state.positions, b.final_state.positions)
    assert np.array_equal(a.final_state.velocities, b.final_state.velocities)
    assert a.n_switches == b.n_switches


@needs_compiled
@pytest.mark.parametrize("trailing", [False, True])
def test_window_counts_backends_agree(trailing):
    pop = handset_population()
    rng = np.random.default_rng(0)
    upos = rng.random((50, 300))
    uvel = rng.random((50, 300))
    args = (0.03, 0.2, trailing, pop.cdf, pop.plus_prob, upos, uvel)
    c1, s1 = _backend.python_kernels.window_counts(*args)
    c2, s2 = _backend.compiled_kernels.window_counts(*args)
    assert np.array_equal(c1, c2) and np.array_equal(s1, s2)


@needs_compiled
def test_limits_backends_agree():
    pop = handset_population()
    k = InteractionKernel.tophat(0.2)
    a = limits.mc_QN(pop, k, 500, 0.3, 200, backend="python")
    b = limits.mc_QN(pop, k, 500, 0.3, 200, backend="cython")
    assert a == b


def test_backend_selection():
    assert _backend.BACKEND in ("cython", "python")
    assert _backend.get_kernels("python") is _backend.python_kernels
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")
