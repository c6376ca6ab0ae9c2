"""Backend parity: numba kernels against the pure-numpy build.

Both backends consume the same counter-based draws and apply the same
per-trajectory arithmetic in the same order, so outputs must match
bit for bit, not just to tolerance.
"""

import numpy as np
import pytest

from wignermc import backend
from wignermc.backward import run_backward
from wignermc.forward import run_forward
from wignermc.model import field_params
from wignermc.sampling import make_sampler

numba = pytest.importorskip("numba")

SEED = 77


@pytest.fixture(scope="module")
def fp(fields, consts):
    return field_params(fields, consts)


def both(fn):
    with backend.use("numpy"):
        a = fn(backend.active())
    with backend.use("numba"):
        b = fn(backend.active())
    return a, b


def test_uniform_draws_identical(rng):
    streams = rng.integers(0, 2**63, size=500, dtype=np.uint64)
    pos = rng.integers(0, 2**20, size=500, dtype=np.uint64)
    a, b = both(lambda k: k.uniforms(SEED, streams, pos))
    assert np.array_equal(a, b)


def test_propagate_batch_identical(fp, rng):
    durations = rng.uniform(-1.5, 1.5, size=200)
    durations[0] = 0.0
    start = rng.normal(size=(200, 4))

    def run(kernels):
        states = start.copy()
        kernels.propagate_batch(states, durations, 1.0 / 64, fp)
        return states

    a, b = both(run)
    assert np.array_equal(a, b)


def test_forward_walk_identical(fp, stencil, rng):
    start = rng.normal(size=(400, 4))
    offs = stencil.offsets()
    signs = stencil.signs()
    cum = stencil.cumulative()

    def run(kernels):
        states = start.copy()
        out = kernels.forward_walk(states, 2.0, 0.6, 1.0 / 32, fp, offs,
                                   signs, cum, stencil.abs_total, SEED,
                                   9, 4, 64)
        return (states,) + out

    (sa, wa, ca, fa), (sb, wb, cb, fb) = both(run)
    # Draws, event counts, weights and branching are bit-identical.  States
    # pass through exp(1) flight times, where numpy's vectorised log1p is
    # allowed 1 ulp against scalar libm, so states agree only to roundoff.
    assert np.array_equal(wa, wb)
    assert np.array_equal(ca, cb)
    assert np.array_equal(fa, fb)
    np.testing.assert_allclose(sa, sb, rtol=1e-12, atol=1e-13)
    assert ca.sum() > 0  # walks actually scattered


def test_backward_walk_identical(fp, stencil, rng):
    start = rng.normal(size=(400, 4))
    offs = stencil.offsets()
    signs = stencil.signs()
    cum = stencil.cumulative()

    def run(kernels):
        states = start.copy()
        w = kernels.backward_walk(states, 2, 0.8, 0.6, 1.0 / 32, fp, offs,
                                  signs, cum, stencil.abs_total, SEED, 9, 4)
        return states, w

    (sa, wa), (sb, wb) = both(run)
    assert np.array_equal(sa, sb)
    assert np.array_equal(wa, wb)


def test_forward_driver_identical(fields, consts, stencil, gauss_f0):
    from wignermc.model import Observable
    from wignermc.trajectory import IntegratorSettings

    def run(_):
        res = run_forward(
            gauss_f0, Observable("mean_x"), fields, consts, stencil,
            final_time=0.6, n_traj=4000, seed=SEED,
            settings=IntegratorSettings(step_count_per_unit_time=32))
        return res.estimate, res.stderr, res.event_histogram

    (ea, sa, ha), (eb, sb, hb) = both(run)
    assert np.array_equal(ha, hb)
    assert ea == pytest.approx(eb, rel=1e-12)
    assert sa == pytest.approx(sb, rel=1e-12)


def test_backward_driver_identical(fields, consts, stencil, gauss_f0):
    from wignermc.model import Observable
    from wignermc.trajectory import IntegratorSettings

    def run(_):
        res = run_backward(
            2, gauss_f0, Observable("mean_x"), fields, consts, stencil,
            final_time=0.5, n_traj=3000, seed=SEED,
            settings=IntegratorSettings(step_count_per_unit_time=32))
        return res.total, tuple(t.estimate for t in res.terms)

    # no log1p on the backward path: parity is exact
    a, b = both(run)
    assert a == b


def test_sampler_draws_identical(gauss_f0):
    def run(_):
        sampler = make_sampler("abs_f0", gauss_f0)
        return sampler.draw(2000, SEED, stream0=123)

    (sa, da, fa), (sb, db, fb) = both(run)
    assert np.array_equal(sa, sb)
    assert np.array_equal(da, db)
    assert np.array_equal(fa, fb)


def test_set_workers_contract():
    with backend.use("numpy"):
        assert backend.set_workers(8) == 1
    with backend.use("numba"):
        applied = backend.set_workers(4)
        assert 1 <= applied <= 4
        # determinism does not depend on the thread count
    with pytest.raises(Exception, match="at least 1"):
        backend.set_workers(0)


def test_env_selection(monkeypatch):
    monkeypatch.setenv(backend.ENV_VAR, "numpy")
    assert backend._choose() == "numpy"
    monkeypatch.setenv(backend.ENV_VAR, "auto")
    assert backend._choose() == "numba"
    monkeypatch.setenv(backend.ENV_VAR, "bogus")
    with pytest.raises(Exception, match="WIGNERMC_BACKEND"):
        backend._load(backend._choose())
