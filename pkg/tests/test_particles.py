# vim: ts=4 et sw=4 sts=4 :

import math
import os
import unittest

import numpy as np
import scipy.stats

from patchcir import analytic, geometry, particles
from patchcir.types import ChannelParams, FusionTx, ParameterError, SimulationError

SLOW_TESTS = os.environ.get("PATCHCIR_SLOW_TESTS", "") == "1"


def nearChannel(**changes):
    values = {"rx_radius": 10.0, "distance": 12.0, "diffusion": 79.4, "degradation": 0.0}
    values.update(changes)
    return ChannelParams(**values)


def smallConfig(**changes):
    values = {"time_step": 1e-3, "horizon": 0.2, "realizations": 10, "particles": 50, "seed": 7}
    values.update(changes)
    return particles.SimConfig(**values)


def syntheticRecords():
    return particles.HitRecords(
        times=[0.12, 0.22, 0.31, 0.33], patches=[0, 1, 0, 2], realizations=[0, 0, 1, 1],
        points=np.zeros((4, 3)), molecules=10, realization_count=2, horizon=0.4
    )


class SimConfigTest(unittest.TestCase):

    def testDefaults(self):
        cfg = particles.SimConfig()
        self.assertEqual(cfg.getPlacement(), "random")
        self.assertEqual(cfg.getStepCount(), 50000)
        self.assertFalse(cfg.isFullyAbsorbing())
        self.assertEqual(cfg.toDict()["tx_direction"], [math.pi / 2, 0.0])

    def testValidation(self):
        for changes in (
                {"time_step": 0.0}, {"vesicle_time_step": -1.0}, {"horizon": 1e-5},
                {"realizations": 0}, {"particles": 0}, {"placement": "bogus"}, {"workers": 0}
        ):
            with self.assertRaises(SimulationError, msg=str(changes)):
                smallConfig(**changes)

    def testSimulatorValidation(self):
        params = nearChannel()
        with self.assertRaises(SimulationError):
            particles.ParticleSimulator(params, None, smallConfig())

        layout = geometry.layoutFibonacci(5.0, 3, 0.1)
        with self.assertRaises(SimulationError):
            particles.ParticleSimulator(params, layout, smallConfig())

        tx = FusionTx(5.0, 9.0, 30.0, 10, 2)
        with self.assertRaises(ParameterError):
            particles.ParticleSimulator(params, None, smallConfig(fully_absorbing=True), tx)


class PointTxTest(unittest.TestCase):

    def setUp(self):
        self.m_params = nearChannel()
        self.m_layout = geometry.layoutFibonacci(10.0, 11, 0.2)

    def testDeterminism(self):
        first = particles.simulatePointTx(self.m_params, self.m_layout, smallConfig(), bins=20)
        second = particles.simulatePointTx(self.m_params, self.m_layout, smallConfig(), bins=20)
        threaded = particles.simulatePointTx(self.m_params, self.m_layout, smallConfig(workers=2), bins=20)

        self.assertGreater(first.getRecords().getCount(), 0)
        for other in (second, threaded):
            np.testing.assert_array_equal(first.getRecords().getTimes(), other.getRecords().getTimes())
            np.testing.assert_array_equal(first.getRecords().getPatches(), other.getRecords().getPatches())
            np.testing.assert_array_equal(
                first.getRecords().getRealizations(), other.getRecords().getRealizations()
            )
            np.testing.assert_array_equal(first.getCir().getRate(), other.getCir().getRate())

        changed = particles.simulatePointTx(self.m_params, self.m_layout, smallConfig(seed=8), bins=20)
        self.assertFalse(np.array_equal(first.getTxDirections(), changed.getTxDirections()))

    def testHitsLieOnPatches(self):
        result = particles.simulatePointTx(self.m_params, self.m_layout, smallConfig(), bins=20)
        records = result.getRecords()
        points = records.getPoints()

        np.testing.assert_allclose(np.linalg.norm(points, axis=1), 10.0, rtol=1e-12)
        np.testing.assert_array_equal(self.m_layout.findPatches(points), records.getPatches())
        self.assertTrue(np.all(records.getPatches() >= 0))
        self.assertTrue(np.all(records.getTimes() <= 0.2 + 1e-12))
        self.assertTrue(np.all((records.getRealizations() >= 0) & (records.getRealizations() < 10)))

        provenance = result.getCir().getProvenance()
        self.assertEqual(provenance["model"], "PTAR")
        self.assertTrue(result.getCir().isSimulated())

    def testFixedPlacement(self):
        cfg = smallConfig(placement="fixed", tx_direction=(math.pi / 2, 0.0), realizations=3)
        result = particles.simulatePointTx(self.m_params, self.m_layout, cfg, bins=10)
        np.testing.assert_allclose(result.getTxDirections(), np.tile([1.0, 0.0, 0.0], (3, 1)), atol=1e-15)

    def testRandomDirectionsAreUniform(self):
        cfg = smallConfig(realizations=1000, particles=1, horizon=1e-3)
        result = particles.simulatePointTx(self.m_params, self.m_layout, cfg, bins=1)
        directions = result.getTxDirections()

        np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0, rtol=1e-12)
        octants = (directions[:, 0] > 0) * 4 + (directions[:, 1] > 0) * 2 + (directions[:, 2] > 0)
        counts = np.bincount(octants, minlength=8)
        self.assertGreater(scipy.stats.chisquare(counts).pvalue, 1e-4)

    def testFullyAbsorbing(self):
        cfg = smallConfig(time_step=1e-4, horizon=0.5, realizations=2, particles=1000, fully_absorbing=True)
        result = particles.simulatePointTx(self.m_params, None, cfg, bins=10)
        records = result.getRecords()

        self.assertTrue(np.all(records.getPatches() == -1))
        self.assertEqual(result.getCir().getProvenance()["model"], "PTFR")
        # discrete steps miss some crossings, so the simulation may only fall short
        expected = analytic.HAbsorbing(0.5, self.m_params)
        self.assertAlmostEqual(expected, 0.685, delta=1e-3)
        self.assertAlmostEqual(records.getAbsorbedFraction(), expected, delta=0.05)

    def testDegradationRemovesMolecules(self):
        cfg = smallConfig(fully_absorbing=True, horizon=0.5, particles=200, realizations=2)
        stable = particles.simulatePointTx(self.m_params, None, cfg).getRecords()
        decaying = particles.simulatePointTx(self.m_params.withDegradation(5.0), None, cfg).getRecords()
        self.assertLess(decaying.getAbsorbedFraction(), stable.getAbsorbedFraction())


class FusionTxTest(unittest.TestCase):

    def testSmallRun(self):
        params = nearChannel(distance=20.0)
        tx = FusionTx(2.0, 9.0, 30.0, 10, 2)
        cfg = smallConfig(horizon=0.5, realizations=4, vesicle_time_step=1e-4, fully_absorbing=True)
        result = particles.simulateMfTx(params, None, tx, cfg, bins=10)

        self.assertEqual(result.getRecords().getMoleculesPerRealization(), 20)
        self.assertEqual(result.getCir().getProvenance()["model"], "MTAR")

        release = result.getReleaseTimes()
        self.assertGreater(len(release), 0)
        self.assertLessEqual(len(release), 40)
        self.assertTrue(np.all((release > 0) & (release <= 0.5 + 1e-12)))
        # the mean first passage to the membrane is 4 / 54 + 2 / 90 s
        self.assertGreater(release.mean(), 0.03)
        self.assertLess(release.mean(), 0.3)

        hits = result.getRecords().getTimes()
        if len(hits):
            self.assertGreater(hits.min(), release.min())


class RecordsTest(unittest.TestCase):

    def testToCir(self):
        cir = syntheticRecords().toCir(4)
        np.testing.assert_allclose(cir.getTimes(), [0.05, 0.15, 0.25, 0.35])
        np.testing.assert_allclose(cir.getRate(), [0.0, 0.5, 0.5, 1.0])
        np.testing.assert_allclose(cir.getCumulative(), [0.0, 0.05, 0.1, 0.2])
        self.assertIsNone(cir.getAsymptote())
        self.assertEqual(cir.getProvenance()["bins"], 4)

    def testAbsorbedFraction(self):
        self.assertAlmostEqual(syntheticRecords().getAbsorbedFraction(), 0.2)

    def testNormalCi(self):
        ci = particles.estimateCi(syntheticRecords(), times=[0.25, 0.4])
        np.testing.assert_allclose(ci.getMean(), [0.1, 0.2])
        np.testing.assert_allclose(ci.getStdErr(), [0.1, 0.0], atol=1e-15)
        self.assertEqual(ci.getMethod(), "normal")

    def testBootstrapCi(self):
        rng = np.random.default_rng(3)
        realization_count, molecules = 50, 20
        owners = np.repeat(np.arange(realization_count), molecules)
        keep = rng.random(len(owners)) < 0.4
        times = rng.uniform(0.0, 1.0, len(owners))[keep]
        records = particles.HitRecords(
            times, np.zeros(len(times)), owners[keep], np.zeros((len(times), 3)),
            molecules, realization_count, 1.0
        )

        normal = particles.estimateCi(records, times=[0.5, 1.0])
        bootstrap = particles.estimateCi(records, times=[0.5, 1.0], method="bootstrap", seed=5)
        np.testing.assert_allclose(bootstrap.getMean(), normal.getMean())
        np.testing.assert_allclose(bootstrap.getStdErr(), normal.getStdErr(), rtol=0.2)

        binned = particles.estimateCi(records, bins=5)
        self.assertEqual(len(binned.getTimes()), 5)

    def testCiErrors(self):
        single = particles.HitRecords([0.1], [0], [0], np.zeros((1, 3)), 10, 1, 1.0)
        with self.assertRaises(SimulationError):
            particles.estimateCi(single, bins=4)
        with self.assertRaises(SimulationError):
            particles.estimateCi(syntheticRecords(), bins=4, method="jackknife")


@unittest.skipUnless(SLOW_TESTS, "set PATCHCIR_SLOW_TESTS=1 to run the long particle simulations")
class AgreementTest(unittest.TestCase):
    """Simulated cumulative absorption against the closed-form curves at the
    reference channel."""

    CHECKPOINTS = np.linspace(0.1, 2.0, 20)
    # relative allowance for the boundary bias of the discrete walk
    BIAS = 0.02

    def setUp(self):
        self.m_params = ChannelParams(10.0, 20.0, 79.4, 0.8)

    def _compare(self, layout, expected, time_step=1e-4):
        cfg = particles.SimConfig(
            time_step=time_step, horizon=2.0, realizations=200, particles=1000, seed=11,
            fully_absorbing=layout is None, workers=4
        )
        records = particles.simulatePointTx(self.m_params, layout, cfg).getRecords()
        ci = particles.estimateCi(records, times=self.CHECKPOINTS)
        return ci.getMean() - expected, ci.getStdErr()

    def _assertAgreement(self, deviation, stderr, expected):
        bound = 3 * stderr + self.BIAS * expected
        self.assertTrue(np.all(np.abs(deviation) <= bound), msg=str(np.abs(deviation) - bound))

    def testPatchCounts(self):
        for count in (1, 11, 25):
            layout = geometry.layoutFibonacci(10.0, count, 0.05)
            expected = analytic.cirPointAp(self.CHECKPOINTS, layout, self.m_params).getCumulative()
            self._assertAgreement(*self._compare(layout, expected), expected)

    def testFullyAbsorbing(self):
        expected = analytic.HAbsorbing(self.CHECKPOINTS, self.m_params)
        self._assertAgreement(*self._compare(None, expected), expected)

    def testTimeStepConvergence(self):
        layout = geometry.layoutFibonacci(10.0, 11, 0.05)
        expected = analytic.cirPointAp(self.CHECKPOINTS, layout, self.m_params).getCumulative()
        errors = [
            float(np.mean(np.abs(self._compare(layout, expected, step)[0])))
            for step in (1e-3, 3e-4, 1e-4)
        ]
        self.assertGreater(errors[0], errors[1])
        self.assertGreater(errors[1], errors[2])


if __name__ == '__main__':
    unittest.main()
