"""Start samplers: moments, density bookkeeping, rejection correctness."""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from wignermc.errors import ConfigError
from wignermc.model import (GaussianPacket, Observable, PhaseSpacePoint,
                            PhysicalConstants, TwoPacketSurrogate)
from wignermc.quadrature import integrate
from wignermc.sampling import (abs_mass, default_density, make_sampler,
                               _abs_norm)

CONSTS = PhysicalConstants()
SEED = 9001
N = 40_000


def surrogate(phase=math.pi / 2):
    return TwoPacketSurrogate(center=PhaseSpacePoint(0.1, 0.0, -0.2, 0.3),
                              sigma_p=0.4, sigma_x=0.5, separation=1.5,
                              sep_axis="x", phase=phase)


class TestGaussianDirect:
    def test_moments(self, gauss_f0):
        sampler = make_sampler("abs_f0", gauss_f0)
        states, dens, f0v = sampler.draw(N, SEED, stream0=0)
        c = gauss_f0.center.as_array()
        w = np.array([gauss_f0.sigma_p] * 2 + [gauss_f0.sigma_x] * 2)
        err = 4.0 * w / math.sqrt(N)
        np.testing.assert_allclose(states.mean(axis=0), c, atol=err.max())
        np.testing.assert_allclose(states.std(axis=0), w, rtol=0.05)

    def test_density_is_f0(self, gauss_f0):
        sampler = make_sampler("abs_f0", gauss_f0)
        states, dens, f0v = sampler.draw(200, SEED, stream0=0)
        np.testing.assert_array_equal(dens, f0v)
        np.testing.assert_allclose(dens, gauss_f0.values(states), rtol=1e-13)

    def test_deterministic_and_batch_invariant(self, gauss_f0):
        sampler = make_sampler("abs_f0", gauss_f0)
        a = sampler.draw(100, SEED, stream0=0)[0]
        b = sampler.draw(100, SEED, stream0=0)[0]
        np.testing.assert_array_equal(a, b)
        # particle i owns its streams, so a shorter batch is a prefix
        head = sampler.draw(10, SEED, stream0=0)[0]
        np.testing.assert_array_equal(a[:10], head)


class TestMixtureRejection:
    def test_abs_mass_exceeds_one(self):
        # |f0| integrates to > 1 whenever f0 dips negative anywhere
        z = abs_mass(surrogate(phase=math.pi))
        assert z > 1.0

    def test_abs_mass_against_adaptive_quadrature(self):
        # |f0| factorises: bystander Gaussians integrate to 1, leaving a 2D
        # profile in the (separation, conjugate) plane.  scipy's adaptive
        # rule resolves its kinks independently of the package quadrature.
        f0 = surrogate()
        c = f0.center.as_array()
        peak = (1.0 / (f0.sigma_p * math.sqrt(2 * math.pi))
                * 1.0 / (f0.sigma_x * math.sqrt(2 * math.pi)))

        def profile(u, a):
            return abs(f0.values(np.array([[u, c[1], a, c[3]]]))[0]) / peak

        want, _ = dblquad(profile,
                          c[2] - 0.75 - 8 * f0.sigma_x,
                          c[2] + 0.75 + 8 * f0.sigma_x,
                          c[0] - 8 * f0.sigma_p, c[0] + 8 * f0.sigma_p,
                          epsabs=1e-8, epsrel=1e-8)
        assert abs_mass(f0) == pytest.approx(want, rel=1e-6)

    def test_sampled_moments_match_abs_density(self):
        f0 = surrogate()
        z = abs_mass(f0)
        box = f0.support_box()
        spec = [(4, 10), (4, 10), (12, 10), (4, 10)]

        def absf(s):
            return np.abs(f0.values(s))

        want_x = integrate(lambda s: absf(s) * s[:, 2], box, spec) / z
        want_px = integrate(lambda s: absf(s) * s[:, 0], box, spec) / z
        sampler = make_sampler("abs_f0", f0)
        states, dens, f0v = sampler.draw(N, SEED, stream0=0)
        assert states[:, 2].mean() == pytest.approx(
            want_x, abs=4 * states[:, 2].std() / math.sqrt(N))
        assert states[:, 0].mean() == pytest.approx(
            want_px, abs=4 * states[:, 0].std() / math.sqrt(N))

    def test_density_bookkeeping(self):
        f0 = surrogate()
        sampler = make_sampler("abs_f0", f0)
        states, dens, f0v = sampler.draw(500, SEED, stream0=0)
        np.testing.assert_allclose(f0v, f0.values(states), rtol=1e-12)
        np.testing.assert_allclose(dens, np.abs(f0v) / abs_mass(f0),
                                   rtol=1e-12)

    def test_signs_present(self):
        # phase pi makes the midpoint region negative; draws from |f0|
        # must report both signs in f0v
        sampler = make_sampler("abs_f0", surrogate(phase=math.pi))
        _, _, f0v = sampler.draw(2000, SEED, stream0=0)
        assert np.any(f0v > 0) and np.any(f0v < 0)


class TestAbsObservableDensity:
    @pytest.mark.parametrize("kind", ["mean_x", "kinetic_energy",
                                      "constant_one"])
    def test_gaussian_norm_against_quadrature(self, gauss_f0, kind):
        # splitting the box at x = 0 removes the |x| kink, so a plain
        # 20-node rule is exact on each half and the reference is sharp
        obs = Observable(kind)
        box = gauss_f0.support_box()

        def f(s):
            return np.abs(gauss_f0.values(s) * obs.values(s, CONSTS))

        if kind == "mean_x":
            left, right = box.copy(), box.copy()
            left[2, 1] = 0.0
            right[2, 0] = 0.0
            want = integrate(f, left, 36) + integrate(f, right, 36)
        else:
            want = integrate(f, box, 36)
        got = _abs_norm(gauss_f0, obs, CONSTS, box)
        assert got == pytest.approx(want, rel=1e-10)

    @pytest.mark.parametrize("kind,split_axis", [
        ("mean_px", 0), ("mean_y", 3), ("kinetic_energy", None),
    ])
    def test_surrogate_norm_against_quadrature(self, kind, split_axis):
        # both sides integrate over the same 5-sigma box, so truncation
        # cancels; the reference splits the |coordinate| kink at zero and
        # leans on composite panels for the bracket's own zero curves,
        # which resolves to ~3e-4
        f0 = surrogate()
        obs = Observable(kind)
        box = f0.support_box(5.0)
        spec = [(10, 6), 24, (10, 6), 24]

        def f(s):
            return np.abs(f0.values(s) * obs.values(s, CONSTS))

        if split_axis is not None and box[split_axis, 0] < 0 < box[split_axis, 1]:
            left, right = box.copy(), box.copy()
            left[split_axis, 1] = 0.0
            right[split_axis, 0] = 0.0
            want = integrate(f, left, spec) + integrate(f, right, spec)
        else:
            want = integrate(f, box, spec)
        got = _abs_norm(f0, obs, CONSTS, box)
        assert got == pytest.approx(want, rel=2e-3)

    def test_weighted_moments(self, gauss_f0):
        # under |f0*A| with A = kinetic energy, <x> shifts toward where
        # the weight is; verify the first moment against quadrature
        obs = Observable("kinetic_energy")
        box = gauss_f0.support_box()
        sampler = make_sampler("abs_f0_times_abs_A", gauss_f0, obs, CONSTS,
                               box)

        def weighted(s):
            return np.abs(gauss_f0.values(s) * obs.values(s, CONSTS))

        z = integrate(weighted, box, [(6, 10)] * 4)
        want = integrate(lambda s: weighted(s) * s[:, 0], box,
                         [(6, 10)] * 4) / z
        states, dens, f0v = sampler.draw(N, SEED, stream0=0)
        se = states[:, 0].std() / math.sqrt(N)
        assert states[:, 0].mean() == pytest.approx(want, abs=4 * se)
        np.testing.assert_allclose(
            dens, np.abs(f0v * obs.values(states, CONSTS)) / z, rtol=1e-8)

    def test_indicator_cell_confines_draws(self, gauss_f0):
        cell = ((0.0, 2.0), (-2.0, 2.0), (-1.0, 1.0), (-2.0, 2.0))
        obs = Observable("indicator_cell", cell=cell)
        sampler = make_sampler("abs_f0_times_abs_A", gauss_f0, obs, CONSTS)
        states, dens, _ = sampler.draw(3000, SEED, stream0=0)
        for axis, (lo, hi) in enumerate(cell):
            assert states[:, axis].min() >= lo
            assert states[:, axis].max() <= hi
        assert np.all(dens > 0.0)


class TestFixedPoint:
    def test_point_mass(self, gauss_f0):
        pt = PhaseSpacePoint(0.3, -0.1, 0.2, 0.0)
        sampler = make_sampler("fixed_point", gauss_f0, point=pt)
        states, dens, f0v = sampler.draw(17, SEED, stream0=0)
        np.testing.assert_array_equal(states, np.tile(pt.as_array(), (17, 1)))
        np.testing.assert_array_equal(dens, np.ones(17))
        assert f0v[0] == pytest.approx(gauss_f0.evaluate(pt))

    def test_cannot_weight_by_observable(self, gauss_f0):
        with pytest.raises(ConfigError):
            make_sampler("fixed_point", gauss_f0)


class TestErrors:
    def test_unknown_density(self, gauss_f0):
        with pytest.raises(ConfigError, match="unknown sampling density"):
            make_sampler("uniform", gauss_f0)

    def test_missing_observable(self, gauss_f0):
        with pytest.raises(ConfigError):
            make_sampler("abs_f0_times_abs_A", gauss_f0)

    def test_disjoint_indicator_cell(self, gauss_f0):
        cell = ((50.0, 51.0),) + ((-60.0, 60.0),) * 3
        obs = Observable("indicator_cell", cell=cell)
        with pytest.raises(ConfigError):
            make_sampler("abs_f0_times_abs_A", gauss_f0, obs, CONSTS,
                         box=gauss_f0.support_box())


def test_default_density_partition():
    assert default_density(Observable("constant_one")) == "abs_f0_times_abs_A"
    assert default_density(Observable("kinetic_energy")) == "abs_f0_times_abs_A"
    assert default_density(Observable("mean_x")) == "abs_f0"
