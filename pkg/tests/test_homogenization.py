# vim: ts=4 et sw=4 sts=4 :

import math
import unittest

import numpy as np

from patchcir import analytic, geometry, homogenization
from patchcir.homogenization import CapacitanceFormula
from patchcir.types import ChannelParams, HomogenizationError, LayoutError

RX_RADIUS = 10.0


def referenceParams(**changes):
    values = {"rx_radius": 10.0, "distance": 20.0, "diffusion": 79.4, "degradation": 0.8}
    values.update(changes)
    return ChannelParams(**values)


class KernelTest(unittest.TestCase):

    def testInteractionKernel(self):
        d = 1.5
        expected = 1 / d + 0.5 * math.log(d) - 0.5 * math.log(2 + d)
        self.assertAlmostEqual(float(homogenization.interactionKernel(d)), expected, places=14)

    def testAntipodalKernel(self):
        self.assertAlmostEqual(float(homogenization.interactionKernel(2.0)), 0.5 - 0.5 * math.log(2), places=14)


class CapacitanceTest(unittest.TestCase):

    def testSinglePatch(self):
        radius = 2 * RX_RADIUS * math.sqrt(0.05)
        cap = homogenization.capacitanceSingle(RX_RADIUS, radius)
        self.assertEqual(cap.getFormula(), CapacitanceFormula.SingleAp)
        self.assertAlmostEqual(cap.getValue(), 1.8899, delta=5e-4)

        rate = homogenization.effectiveRate(cap, 79.4, RX_RADIUS)
        self.assertAlmostEqual(rate.getRate(), 1.8503, delta=5e-4)
        self.assertIs(rate.getCapacitance(), cap)

    def testThreeFibonacciPatches(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 3, 0.05)
        cap = homogenization.capacitanceFor(layout)
        self.assertEqual(cap.getFormula(), CapacitanceFormula.Identical)
        self.assertAlmostEqual(cap.getValue(), 2.782, delta=2e-3)

    def testGeneralReducesToIdentical(self):
        rng = np.random.default_rng(2024)
        for seed in range(100):
            count = int(rng.integers(2, 50))
            coverage = float(rng.uniform(0.02, 0.15))
            layout = geometry.layoutRandom(RX_RADIUS, count, coverage, seed)
            general = homogenization.capacitanceGeneral(layout).getValue()
            identical = homogenization.capacitanceIdentical(layout).getValue()
            self.assertLessEqual(abs(general - identical) / identical, 1e-12)

    def testIdenticalNeedsEqualRadii(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 2, 0.03, coverages=[0.01, 0.02])
        with self.assertRaises(LayoutError):
            homogenization.capacitanceIdentical(layout)
        self.assertEqual(homogenization.capacitanceFor(layout).getFormula(), CapacitanceFormula.General)

    def testGrowsWithPatchCount(self):
        values = [
            homogenization.capacitanceFor(geometry.layoutFibonacci(RX_RADIUS, count, 0.05)).getValue()
            for count in (1, 3, 5, 9, 15, 25)
        ]
        self.assertTrue(all(b > a for a, b in zip(values, values[1:])))
        self.assertLess(values[-1], RX_RADIUS)

    def testMeanFieldAgreesWithIdentical(self):
        params = referenceParams()
        for count in (11, 25, 51, 101, 201):
            layout = geometry.layoutFibonacci(RX_RADIUS, count, 0.15)
            kappa = layout.getRadii()[0] / RX_RADIUS
            identical = homogenization.capacitanceIdentical(layout)
            mean = homogenization.capacitanceMeanField(RX_RADIUS, count, kappa)

            h_identical = analytic.HUniformInf(
                homogenization.effectiveRate(identical, 79.4, RX_RADIUS).getRate(), params
            )
            h_mean = analytic.HUniformInf(homogenization.effectiveRate(mean, 79.4, RX_RADIUS).getRate(), params)
            self.assertLessEqual(abs(h_mean - h_identical) / h_identical, 0.03)

    def testOutOfRange(self):
        with self.assertRaises(HomogenizationError):
            homogenization.Capacitance(12.0, CapacitanceFormula.General, 0.1, RX_RADIUS)
        with self.assertRaises(HomogenizationError):
            homogenization.Capacitance(-1.0, CapacitanceFormula.General, 0.1, RX_RADIUS)
        with self.assertRaises(HomogenizationError):
            homogenization.capacitanceMeanField(RX_RADIUS, 5, 1.5)

    def testDiagnostics(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 3, 0.04, coverages=[0.01, 0.02, 0.01])
        cap = homogenization.capacitanceGeneral(layout)
        info = cap.toDict()
        self.assertEqual(info["formula"], "general")
        self.assertEqual(len(info["m"]), 3)
        self.assertAlmostEqual(info["m"][0], 2 / math.pi)


class LayoutMetricTest(unittest.TestCase):

    def testSinglePatch(self):
        self.assertEqual(homogenization.layoutMetricS(geometry.layoutFibonacci(RX_RADIUS, 1, 0.05)), 0.0)

    def testEvenPlacementMinimizes(self):
        region = geometry.regionForFraction(0.4)
        for spread in (1, 5):
            for count in (5, 9, 15, 25, 49):
                coverages = homogenization.drawPatchCoverages(count, 0.05, spread, seed=1)
                even = geometry.layoutFibonacci(RX_RADIUS, count, 0.05, coverages)
                restricted = geometry.layoutRegion(RX_RADIUS, count, 0.05, region, coverages=coverages)
                s_random = np.mean([
                    homogenization.layoutMetricS(geometry.layoutRandom(RX_RADIUS, count, 0.05, seed, coverages))
                    for seed in range(1, 6)
                ])
                s_even = homogenization.layoutMetricS(even)
                self.assertLess(s_even, s_random)
                self.assertLess(s_even, homogenization.layoutMetricS(restricted))

    def testRotationInvariant(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 9, 0.05)
        # rigid rotation about the polar axis
        rotated = geometry.layoutExplicit(
            RX_RADIUS, [(ap.getTheta(), (ap.getPhi() + 0.7) % (2 * math.pi), ap.getRadius()) for ap in layout]
        )
        self.assertAlmostEqual(
            homogenization.layoutMetricS(layout), homogenization.layoutMetricS(rotated), places=10
        )


class CoverageDrawTest(unittest.TestCase):

    def testSplit(self):
        coverages = homogenization.drawPatchCoverages(10, 0.1, 10, seed=3)
        self.assertEqual(len(coverages), 10)
        self.assertAlmostEqual(float(np.sum(coverages)), 0.1, places=14)
        np.testing.assert_array_equal(
            coverages, homogenization.drawPatchCoverages(10, 0.1, 10, seed=3)
        )

    def testUnitSpreadIsEqual(self):
        np.testing.assert_allclose(homogenization.drawPatchCoverages(4, 0.08, 1, seed=1), 0.02)

    def testBadSpread(self):
        with self.assertRaises(HomogenizationError):
            homogenization.drawPatchCoverages(4, 0.08, 0, seed=1)


class PermutationTest(unittest.TestCase):

    def testIdenticalRadii(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 5, 0.05)
        self.assertAlmostEqual(homogenization.permutationSpread(layout), 0.0, places=12)

    def testUnequalRadii(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 4, 0.05, coverages=[0.005, 0.01, 0.015, 0.02])
        self.assertGreater(homogenization.permutationSpread(layout), 0.0)


class DeltaHTest(unittest.TestCase):

    def _curve(self, params, counts=(1, 3, 5, 9, 15, 25), coverage=0.05):
        rx_radius = params.getRxRadius()
        single = geometry.layoutFibonacci(rx_radius, 1, coverage)
        return [
            homogenization.deltaH(geometry.layoutFibonacci(rx_radius, count, coverage), single, params)
            for count in counts
        ]

    def testThreePatches(self):
        self.assertAlmostEqual(self._curve(referenceParams(), counts=(3,))[0], 0.548, delta=2e-3)

    def testSinglePatchIsZero(self):
        self.assertAlmostEqual(self._curve(referenceParams(), counts=(1,))[0], 0.0, places=12)

    def testMatchesAsymptoteRatio(self):
        params = referenceParams()
        single = geometry.layoutFibonacci(RX_RADIUS, 1, 0.05)
        layout = geometry.layoutFibonacci(RX_RADIUS, 9, 0.05)
        rates = [
            homogenization.effectiveRate(homogenization.capacitanceFor(current), 79.4, RX_RADIUS).getRate()
            for current in (layout, single)
        ]
        ratio = analytic.HUniformInf(rates[0], params) / analytic.HUniformInf(rates[1], params)
        self.assertAlmostEqual(homogenization.deltaH(layout, single, params), ratio - 1, places=10)

    def testConcaveIncrease(self):
        counts = (1, 3, 5, 9, 15, 25)
        curve = self._curve(referenceParams(), counts)
        slopes = np.diff(curve) / np.diff(counts)
        self.assertTrue(np.all(slopes > 0))
        self.assertTrue(np.all(np.diff(slopes) < 0))

    def testLargerRxAndSlowerDiffusion(self):
        base = self._curve(referenceParams(), counts=(9,))[0]
        self.assertGreater(self._curve(referenceParams(rx_radius=12.0), counts=(9,))[0], base)
        self.assertGreater(self._curve(referenceParams(diffusion=60.0), counts=(9,))[0], base)

    def testMismatchedCoverage(self):
        params = referenceParams()
        with self.assertRaises(HomogenizationError):
            homogenization.deltaH(
                geometry.layoutFibonacci(RX_RADIUS, 3, 0.05), geometry.layoutFibonacci(RX_RADIUS, 1, 0.1), params
            )


if __name__ == '__main__':
    unittest.main()
