# vim: ts=4 et sw=4 sts=4 :

import math
import os
import tempfile
import unittest

import numpy as np

from patchcir import geometry
from patchcir.types import LayoutError
from patchcir.utils import sphericalToUnit

RX_RADIUS = 10.0


class FibonacciTest(unittest.TestCase):

    def testCoverageAndRadii(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 11, 0.05)
        self.assertEqual(layout.getPatchCount(), 11)
        self.assertAlmostEqual(layout.getCoverage(), 0.05, places=12)
        self.assertTrue(layout.hasIdenticalRadii())
        self.assertAlmostEqual(layout.getRadii()[0], 2 * RX_RADIUS * math.sqrt(0.05 / 11), places=12)

    def testAngles(self):
        for count in (1, 2, 5, 49, 201):
            layout = geometry.layoutFibonacci(RX_RADIUS, count, 0.1)
            for ap in layout:
                self.assertTrue(0 <= ap.getTheta() <= math.pi)
                self.assertTrue(0 <= ap.getPhi() < 2 * math.pi)

    def testSinglePatchOnEquator(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 1, 0.05)
        ap = layout.getPatches()[0]
        self.assertAlmostEqual(ap.getTheta(), math.pi / 2)
        self.assertAlmostEqual(ap.getPhi(), 0.0)

    def testCentersOnSphere(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 25, 0.1)
        np.testing.assert_allclose(np.linalg.norm(layout.getCenters(), axis=1), RX_RADIUS)

    def testPerPatchCoverages(self):
        coverages = [0.01, 0.02, 0.03]
        layout = geometry.layoutFibonacci(RX_RADIUS, 3, None, coverages)
        self.assertAlmostEqual(layout.getCoverage(), 0.06, places=12)
        self.assertFalse(layout.hasIdenticalRadii())

        with self.assertRaises(LayoutError):
            geometry.layoutFibonacci(RX_RADIUS, 4, None, coverages)


class ValidationTest(unittest.TestCase):

    def testOverlap(self):
        with self.assertRaises(LayoutError) as ctx:
            geometry.layoutExplicit(RX_RADIUS, [(1.0, 0.0, 2.0), (1.05, 0.0, 2.0), (2.5, 3.0, 1.0)])
        self.assertEqual(ctx.exception.getPair(), (0, 1))

    def testBadPatches(self):
        for spec in ((-0.1, 0.0, 1.0), (1.0, 2 * math.pi, 1.0), (1.0, 0.0, 0.0), (1.0, 0.0, RX_RADIUS)):
            with self.assertRaises(LayoutError):
                geometry.layoutExplicit(RX_RADIUS, [spec])

        with self.assertRaises(LayoutError):
            geometry.layoutExplicit(RX_RADIUS, [])
        with self.assertRaises(LayoutError):
            geometry.layoutFibonacci(RX_RADIUS, 0, 0.05)

    def testHighCoverageWarns(self):
        with self.assertLogs("geometry", level="WARNING"):
            geometry.layoutFibonacci(RX_RADIUS, 3, 0.25)


class FindPatchesTest(unittest.TestCase):

    def testCentersAndGaps(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 5, 0.05)
        np.testing.assert_array_equal(layout.findPatches(layout.getCenters()), np.arange(5))

        # the point opposite to a single patch is never covered
        single = geometry.layoutExplicit(RX_RADIUS, [(0.3, 1.0, 1.5)])
        opposite = -sphericalToUnit(0.3, 1.0) * RX_RADIUS
        np.testing.assert_array_equal(single.findPatches(opposite), [-1])

    def testRim(self):
        layout = geometry.layoutExplicit(RX_RADIUS, [(0.0, 0.0, 2.0)])
        # chord distance to the north pole of 1.9 and 2.1 um
        inside = sphericalToUnit(2 * math.asin(1.9 / (2 * RX_RADIUS)), 0.5) * RX_RADIUS
        outside = sphericalToUnit(2 * math.asin(2.1 / (2 * RX_RADIUS)), 0.5) * RX_RADIUS
        np.testing.assert_array_equal(layout.findPatches([inside, outside]), [0, -1])

    def testEmpty(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 3, 0.05)
        self.assertEqual(len(layout.findPatches(np.zeros((0, 3)))), 0)


class RandomLayoutTest(unittest.TestCase):

    def testDeterministic(self):
        first = geometry.layoutRandom(RX_RADIUS, 13, 0.1, seed=7)
        second = geometry.layoutRandom(RX_RADIUS, 13, 0.1, seed=7)
        third = geometry.layoutRandom(RX_RADIUS, 13, 0.1, seed=8)
        np.testing.assert_array_equal(first.getCenters(), second.getCenters())
        self.assertFalse(np.array_equal(first.getCenters(), third.getCenters()))

    def testUniformPolarAngle(self):
        cos_theta = np.concatenate([
            geometry.layoutRandom(RX_RADIUS, 13, 0.1, seed=seed).getUnitVectors()[:, 2]
            for seed in range(1000)
        ])
        sigma = math.sqrt(1 / 3 / len(cos_theta))
        self.assertLess(abs(np.mean(cos_theta)), 4 * sigma)

    def testInfeasible(self):
        with self.assertRaises(LayoutError):
            geometry.layoutRandom(RX_RADIUS, 50, 0.9, seed=1, max_attempts=50)


class RegionTest(unittest.TestCase):

    def testFractionCap(self):
        region = geometry.regionForFraction(0.4)
        self.assertAlmostEqual(region[0], math.acos(-0.2))
        self.assertAlmostEqual(geometry.regionFraction(region), 0.4, places=12)

        layout = geometry.layoutRegion(RX_RADIUS, 11, 0.05, region)
        for ap in layout:
            self.assertGreaterEqual(ap.getTheta(), region[0] - 1e-12)

    def testDocumentedBandFolds(self):
        z_lo, z_hi = geometry.regionCosInterval(geometry.DOCUMENTED_REGION)
        self.assertEqual(z_lo, -1.0)
        self.assertAlmostEqual(geometry.regionFraction(geometry.DOCUMENTED_REGION), 0.0269, delta=2e-4)

        # too small for a coverage of 0.05
        with self.assertRaises(LayoutError):
            geometry.layoutRegion(RX_RADIUS, 5, 0.05, geometry.DOCUMENTED_REGION)

    def testAzimuthSpan(self):
        layout = geometry.layoutRegion(RX_RADIUS, 7, 0.02, (0.5, 2.5), (1.0, 2.0))
        for ap in layout:
            self.assertTrue(1.0 <= ap.getPhi() <= 2.0)

        with self.assertRaises(LayoutError):
            geometry.layoutRegion(RX_RADIUS, 7, 0.02, (0.5, 2.5), (1.0, 1.0))

    def testBadFraction(self):
        with self.assertRaises(LayoutError):
            geometry.regionForFraction(0.0)


class TransformTest(unittest.TestCase):

    def testPermutation(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 4, 0.05)
        permuted = layout.permuted([3, 2, 1, 0])
        np.testing.assert_array_equal(permuted.getCenters(), layout.getCenters()[::-1])

    def testSaveLoad(self):
        layout = geometry.layoutFibonacci(RX_RADIUS, 2, 0.04, coverages=[0.01, 0.03])
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "layout.csv")
            geometry.saveLayout(layout, path)
            with open(path) as fd:
                self.assertTrue(fd.readline().startswith("# patch.cir layout v1"))
            loaded = geometry.loadLayout(path)

        self.assertEqual(loaded.getRxRadius(), RX_RADIUS)
        for orig, restored in zip(layout, loaded):
            self.assertEqual(
                (restored.getTheta(), restored.getPhi(), restored.getRadius()),
                (orig.getTheta(), orig.getPhi(), orig.getRadius())
            )

    def testLoadWithoutHeader(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "layout.csv")
            with open(path, 'w') as fd:
                fd.write("theta_rad,phi_rad,radius_um\n0.5,0.0,1.0\n")
            with self.assertRaises(LayoutError):
                geometry.loadLayout(path)


if __name__ == '__main__':
    unittest.main()
