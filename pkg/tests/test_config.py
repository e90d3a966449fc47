# vim: ts=4 et sw=4 sts=4 :

import math
import os
import tempfile
import unittest
from unittest import mock

from patchcir.comms import DetectorKind
from patchcir.config import ConfigError, ExperimentConfig, LayoutKind
from patchcir.types import ModelTag


class ConfigTestBase(unittest.TestCase):

    def setUp(self):
        patcher = mock.patch.object(
            ExperimentConfig, "getDefaultPath", return_value="/nonexistent/patch-cir.ini"
        )
        patcher.start()
        self.addCleanup(patcher.stop)

    def _config(self, *overrides, path=None):
        config = ExperimentConfig(path, overrides)
        config.getConfig()
        return config

    def _writeIni(self, text):
        fd, path = tempfile.mkstemp(suffix=".ini")
        with os.fdopen(fd, 'w') as ini:
            ini.write(text)
        self.addCleanup(os.unlink, path)
        return path


class DefaultsTest(ConfigTestBase):

    def testReferenceChannel(self):
        params = self._config().getChannelParams()
        self.assertEqual(params.getRxRadius(), 10.0)
        self.assertEqual(params.getDistance(), 20.0)
        self.assertEqual(params.getDiffusion(), 79.4)
        self.assertEqual(params.getDegradation(), 0.8)

    def testTransmitters(self):
        config = self._config()
        self.assertEqual(config.getPointTx().getMoleculeCount(), 1000)
        tx = config.getFusionTx()
        self.assertEqual(tx.getMoleculeCount(), 1000)
        self.assertEqual(tx.getTxRadius(), 5.0)

    def testLayout(self):
        config = self._config()
        self.assertEqual(config.getConfig()["layout"]["kind"], LayoutKind.Fibonacci)
        layout = config.getLayout()
        self.assertEqual(layout.getPatchCount(), 11)
        self.assertAlmostEqual(layout.getCoverage(), 0.05, places=12)
        self.assertEqual(config.getLayout(patches=3, coverage=0.1).getPatchCount(), 3)

    def testDerivedObjects(self):
        config = self._config()
        grid = config.getTimeGrid()
        self.assertEqual(len(grid), 400)
        self.assertAlmostEqual(grid[0], 1e-3)
        self.assertAlmostEqual(grid[-1], 10.0)

        self.assertEqual(config.getQuadratureSpec().getRelTol(), 1e-8)
        sim = config.getSimConfig(realizations=3)
        self.assertEqual(sim.getRealizations(), 3)
        self.assertEqual(sim.getTxDirection(), (math.pi / 2, 0.0))
        self.assertEqual(config.getProtocolSpec().getBitInterval(), 0.8)
        self.assertIsNone(config.getConfig()["protocol"]["threshold"])

    def testSweep(self):
        sweep = self._config().getConfig()["sweep"]
        self.assertEqual(sweep["models"], [ModelTag.PTFR, ModelTag.PTAR, ModelTag.MTAR])
        self.assertEqual(sweep["patch_counts"], [1, 3, 5, 9, 15, 25])
        self.assertEqual(sweep["rx_radii"], [8.0, 10.0, 12.0])

    def testToDict(self):
        resolved = self._config("layout.patches=13").toDict()
        self.assertEqual(resolved["layout"]["patches"], "13")
        self.assertEqual(set(resolved), set(ExperimentConfig.DEFAULTS))


class OverrideTest(ConfigTestBase):

    def testOverrides(self):
        config = self._config("layout.patches=13", " channel.degradation = 0 ", "sweep.models=ptar")
        self.assertEqual(config.getConfig()["layout"]["patches"], 13)
        self.assertEqual(config.getChannelParams().getDegradation(), 0.0)
        self.assertEqual(config.getConfig()["sweep"]["models"], [ModelTag.PTAR])

    def testBadOverrides(self):
        for override in (
                "layout.patches", "patches=3", "bogus.key=1", "layout.bogus=1",
                "layout.patches=many", "layout.coverage=1.5", "channel.distance=5",
                "channel.diffusion=nan", "grid.t_max=1e-4", "layout.kind=hexagonal",
                "protocol.p1=1", "sweep.coverages=0.1,abc", "sweep.patch_counts=0",
                "layout.kind=explicit", "simulation.placement=center"
        ):
            with self.assertRaises(ConfigError, msg=override):
                self._config(override)

    def testBooleans(self):
        for value, expected in (("yes", True), ("On", True), ("1", True), ("off", False), ("false", False)):
            sim = self._config("simulation.fully_absorbing=" + value).getConfig()["simulation"]
            self.assertEqual(sim["fully_absorbing"], expected)

        with self.assertRaises(ConfigError):
            self._config("simulation.fully_absorbing=maybe")

    def testDetector(self):
        config = self._config()
        policy = config.getDetectorPolicy()
        self.assertEqual(policy.getKind(), DetectorKind.AverageOptimal)
        self.assertIsNone(policy.getThreshold())

        policy = self._config("protocol.detector=fixed", "protocol.threshold=7").getDetectorPolicy()
        self.assertEqual(policy.getKind(), DetectorKind.Fixed)
        self.assertEqual(policy.getThreshold(), 7)

        for overrides in (("protocol.detector=fixed",), ("protocol.detector=majority",)):
            with self.assertRaises(ConfigError, msg=overrides):
                self._config(*overrides)

    def testParticleOracle(self):
        self.assertFalse(self._config().getConfig()["sweep"]["particle_oracle"])
        self.assertTrue(self._config("sweep.particle_oracle=yes").getConfig()["sweep"]["particle_oracle"])
        with self.assertRaises(ConfigError):
            self._config("sweep.particle_oracle=sometimes")

    def testPatchList(self):
        config = self._config("layout.kind=explicit", "layout.patch_list=0:0:1; 3.14159:0:2")
        layout = config.getLayout()
        self.assertEqual(layout.getPatchCount(), 2)
        self.assertEqual(list(layout.getRadii()), [1.0, 2.0])

        with self.assertRaises(ConfigError):
            self._config("layout.kind=explicit", "layout.patch_list=0:0")


class FileTest(ConfigTestBase):

    def testIniFile(self):
        path = self._writeIni("[channel]\ndegradation = 0.4\n\n[layout]\npatches = 5\n")
        config = self._config("layout.patches=7", path=path)
        self.assertEqual(config.getPath(), path)
        self.assertEqual(config.getChannelParams().getDegradation(), 0.4)
        # overrides win over the file
        self.assertEqual(config.getConfig()["layout"]["patches"], 7)

    def testUnknownEntries(self):
        path = self._writeIni("[channel]\nradius = 3\n")
        with self.assertRaises(ConfigError):
            self._config(path=path)

        path = self._writeIni("[network]\nhost = example\n")
        with self.assertRaises(ConfigError):
            self._config(path=path)

    def testMalformedFile(self):
        path = self._writeIni("no section header\n")
        with self.assertRaises(ConfigError):
            self._config(path=path)

    def testMissingFile(self):
        with self.assertRaises(ConfigError):
            self._config(path="/nonexistent/experiment.ini")

    def testDefaultPath(self):
        path = self._writeIni("[tx]\nmolecules = 42\n")
        with mock.patch.object(ExperimentConfig, "getDefaultPath", return_value=path):
            config = self._config()
        self.assertEqual(config.getPointTx().getMoleculeCount(), 42)
        self.assertEqual(config.getPath(), path)


class OutputDirectoryTest(ConfigTestBase):

    def testPrecedence(self):
        config = self._config("output.directory=from-config")
        with mock.patch.dict(os.environ, {"PATCHCIR_OUTPUT": "from-env"}):
            self.assertEqual(config.getOutputDirectory("from-cli"), "from-cli")
            self.assertEqual(config.getOutputDirectory(), "from-env")

        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(config.getOutputDirectory(), "from-config")


if __name__ == '__main__':
    unittest.main()
