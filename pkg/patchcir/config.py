# vim: ts=4 et sw=4 sts=4 :

import configparser
import logging
import math
import os
from enum import Enum

import patchcir.geometry as geometry
import patchcir.utils
from patchcir.comms import DetectorKind, DetectorPolicy, ProtocolSpec
from patchcir.numerics import QuadratureSpec
from patchcir.particles import SimConfig
from patchcir.types import ChannelParams, FusionTx, ModelTag, PointTx

logger = logging.getLogger("config")


class ConfigError(Exception):

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)


class LayoutKind(Enum):

    Fibonacci = "fibonacci"
    Random = "random"
    Region = "region"
    Explicit = "explicit"
    File = "file"


class ExperimentConfig:
    """Experiment parameters from built-in defaults (the reference channel), an
    optional INI file and `section.key=value` overrides, in that order of
    precedence.

    Lengths are in um, times in s, diffusion coefficients in um^2/s.
    """

    DEFAULT_BASENAME = "patch-cir.ini"

    # an empty string marks an optional setting without default
    DEFAULTS = {
        "channel": {
            "rx_radius": "10",
            "distance": "20",
            "diffusion": "79.4",
            "degradation": "0.8"
        },
        "tx": {
            "molecules": "1000",
            "tx_radius": "5",
            "vesicle_diffusion": "9",
            "fusion_rate": "30",
            "vesicles": "200",
            "molecules_per_vesicle": "5"
        },
        "layout": {
            "kind": "fibonacci",
            "patches": "11",
            "coverage": "0.05",
            "seed": "1",
            "theta_min": "0",
            "theta_max": str(math.pi),
            "phi_min": "0",
            "phi_max": str(2 * math.pi),
            "patch_list": "",
            "path": ""
        },
        "grid": {
            "t_min": "1e-3",
            "t_max": "10",
            "points": "400",
            "spacing": "log"
        },
        "numerics": {
            "n_max": "100",
            "root_tol": "1e-10",
            "rel_tol": "1e-8",
            "abs_tol": "1e-13",
            "max_subdivisions": "200"
        },
        "simulation": {
            "time_step": "1e-4",
            "vesicle_time_step": "1e-5",
            "horizon": "5",
            "realizations": "200",
            "particles": "1000",
            "seed": "1",
            "placement": "random",
            "tx_theta": str(math.pi / 2),
            "tx_phi": "0",
            "workers": "1",
            "fully_absorbing": "false",
            "bins": "100",
            "ci_method": "normal",
            "transmitter": "point"
        },
        "protocol": {
            "bits": "10",
            "bit_interval": "0.8",
            "p1": "0.5",
            "threshold": "",
            "detector": "average-optimal",
            "ber_mode": "exact",
            "draws": "100000",
            "seed": "1"
        },
        "sweep": {
            "coverages": "0.05,0.1,0.15,0.2,0.25,0.3",
            "patch_counts": "1,3,5,9,15,25",
            "bit_intervals": "0.2,0.4,0.6,0.8,1.0,1.2,1.6,2.0",
            "models": "PTFR,PTAR,MTAR",
            "size_spreads": "1,5,10",
            "seeds": "1,2,3,4,5",
            "rx_radii": "8,10,12",
            "diffusions": "60,79.4,100",
            "region_fraction": "0.4",
            "particle_oracle": "false"
        },
        "output": {
            "directory": "results"
        }
    }

    def __init__(self, path=None, overrides=None):
        self.m_path = path
        self.m_overrides = list(overrides) if overrides else []
        self.m_config = dict()

    @classmethod
    def getDefaultPath(cls):
        return os.path.expanduser("~/.config/{}".format(cls.DEFAULT_BASENAME))

    def getPath(self):
        return self.m_path

    def _readConfig(self):
        self.m_parser = configparser.RawConfigParser()
        self.m_parser.read_dict(self.DEFAULTS)

        path = self.m_path
        if not path and os.path.exists(self.getDefaultPath()):
            path = self.getDefaultPath()

        if path:
            if not os.path.exists(path):
                raise ConfigError("configuration file {} does not exist".format(path))
            user = configparser.RawConfigParser()
            try:
                user.read(path)
            except configparser.Error as e:
                raise ConfigError("{}: {}".format(path, e))
            self._merge(user, path)
            self.m_path = path
            logger.info("read configuration from {}".format(path))

        for override in self.m_overrides:
            self._applyOverride(override)

    def _checkKey(self, section, key, origin):
        if section not in self.DEFAULTS:
            raise ConfigError("{}: unknown section [{}]".format(origin, section))
        if key not in self.DEFAULTS[section]:
            raise ConfigError("{}: unknown setting [{}]->{}".format(origin, section, key))

    def _merge(self, user, origin):
        for section in user.sections():
            for key, value in user[section].items():
                self._checkKey(section, key, origin)
                self.m_parser.set(section, key, value)

    def _applyOverride(self, override):
        name, sep, value = override.partition('=')
        section, dot, key = name.strip().partition('.')
        if not sep or not dot:
            raise ConfigError("invalid override '{}', expected section.key=value".format(override))
        self._checkKey(section, key, "--set")
        self.m_parser.set(section, key, value.strip())

    def _raiseBadValue(self, section, key, value, expected):
        raise ConfigError("invalid setting [{}]->{} = '{}': expected {}".format(section, key, value, expected))

    def _getFloat(self, section, key, minimum=None, exclusive=True, unit=""):
        value = self.m_parser.get(section, key)
        try:
            ret = float(value)
        except ValueError:
            self._raiseBadValue(section, key, value, "a number {}".format(unit).strip())

        if not math.isfinite(ret):
            self._raiseBadValue(section, key, value, "a finite number")
        if minimum is not None:
            if (exclusive and ret <= minimum) or (not exclusive and ret < minimum):
                self._raiseBadValue(
                    section, key, value,
                    "a number {} {} {}".format(">" if exclusive else ">=", minimum, unit).strip()
                )
        return ret

    def _getInt(self, section, key, minimum=None):
        value = self.m_parser.get(section, key)
        try:
            ret = int(value)
        except ValueError:
            self._raiseBadValue(section, key, value, "an integer")
        if minimum is not None and ret < minimum:
            self._raiseBadValue(section, key, value, "an integer >= {}".format(minimum))
        return ret

    def _getChoice(self, section, key, choices):
        value = self.m_parser.get(section, key).strip().lower()
        if value not in choices:
            self._raiseBadValue(section, key, value, "one of {}".format(', '.join(choices)))
        return value

    def _parseBoolean(self, setting, value):

        value = value.lower().strip()

        if value in ("true", "yes", "1", "on"):
            return True
        elif value in ("false", "no", "0", "off"):
            return False

        raise ConfigError(f"Invalid setting {setting}={value}. Expected boolean string like true/false")

    def _parseConfig(self):
        self._parseChannel()
        self._parseTx()
        self._parseLayout()
        self._parseGrid()
        self._parseNumerics()
        self._parseSimulation()
        self._parseProtocol()
        self._parseSweep()
        self._parseOutput()

    def _parseChannel(self):
        section = "channel"
        ret = {
            "rx_radius": self._getFloat(section, "rx_radius", 0, unit="um"),
            "distance": self._getFloat(section, "distance", 0, unit="um"),
            "diffusion": self._getFloat(section, "diffusion", 0, unit="um^2/s"),
            "degradation": self._getFloat(section, "degradation", 0, exclusive=False, unit="1/s")
        }
        if ret["distance"] <= ret["rx_radius"]:
            raise ConfigError("[channel] distance must exceed rx_radius")
        self.m_config[section] = ret

    def _parseTx(self):
        section = "tx"
        self.m_config[section] = {
            "molecules": self._getInt(section, "molecules", 1),
            "tx_radius": self._getFloat(section, "tx_radius", 0, unit="um"),
            "vesicle_diffusion": self._getFloat(section, "vesicle_diffusion", 0, unit="um^2/s"),
            "fusion_rate": self._getFloat(section, "fusion_rate", 0, unit="um/s"),
            "vesicles": self._getInt(section, "vesicles", 1),
            "molecules_per_vesicle": self._getInt(section, "molecules_per_vesicle", 1)
        }

    def _parsePatchList(self, value):
        """Parses 'theta:phi:radius; ...' into (theta, phi, radius) tuples."""
        ret = []
        for entry in value.split(';'):
            entry = entry.strip()
            if not entry:
                continue
            parts = entry.split(':')
            if len(parts) != 3:
                self._raiseBadValue("layout", "patch_list", entry, "theta:phi:radius")
            try:
                ret.append(tuple(float(p) for p in parts))
            except ValueError:
                self._raiseBadValue("layout", "patch_list", entry, "numbers")
        return ret

    def _parseLayout(self):
        section = "layout"
        kind = self._getChoice(section, "kind", [e.value for e in LayoutKind])
        ret = {
            "kind": LayoutKind(kind),
            "patches": self._getInt(section, "patches", 1),
            "coverage": self._getFloat(section, "coverage", 0),
            "seed": self._getInt(section, "seed", 0),
            "theta_range": (
                self._getFloat(section, "theta_min"), self._getFloat(section, "theta_max")
            ),
            "phi_range": (
                self._getFloat(section, "phi_min"), self._getFloat(section, "phi_max")
            ),
            "patch_list": self._parsePatchList(self.m_parser.get(section, "patch_list")),
            "path": self.m_parser.get(section, "path").strip()
        }

        if not ret["coverage"] < 1:
            raise ConfigError("[layout] coverage must lie in (0, 1)")
        if ret["kind"] == LayoutKind.Explicit and not ret["patch_list"]:
            raise ConfigError("[layout] kind = explicit needs a patch_list")
        if ret["kind"] == LayoutKind.File and not ret["path"]:
            raise ConfigError("[layout] kind = file needs a path")

        self.m_config[section] = ret

    def _parseGrid(self):
        section = "grid"
        ret = {
            "t_min": self._getFloat(section, "t_min", 0, unit="s"),
            "t_max": self._getFloat(section, "t_max", 0, unit="s"),
            "points": self._getInt(section, "points", 2),
            "spacing": self._getChoice(section, "spacing", ("log", "linear"))
        }
        if ret["t_max"] <= ret["t_min"]:
            raise ConfigError("[grid] t_max must exceed t_min")
        self.m_config[section] = ret

    def _parseNumerics(self):
        section = "numerics"
        self.m_config[section] = {
            "n_max": self._getInt(section, "n_max", 1),
            "root_tol": self._getFloat(section, "root_tol", 0),
            "rel_tol": self._getFloat(section, "rel_tol", 0),
            "abs_tol": self._getFloat(section, "abs_tol", 0),
            "max_subdivisions": self._getInt(section, "max_subdivisions", 1)
        }

    def _parseSimulation(self):
        section = "simulation"
        self.m_config[section] = {
            "time_step": self._getFloat(section, "time_step", 0, unit="s"),
            "vesicle_time_step": self._getFloat(section, "vesicle_time_step", 0, unit="s"),
            "horizon": self._getFloat(section, "horizon", 0, unit="s"),
            "realizations": self._getInt(section, "realizations", 1),
            "particles": self._getInt(section, "particles", 1),
            "seed": self._getInt(section, "seed", 0),
            "placement": self._getChoice(section, "placement", SimConfig.PLACEMENTS),
            "tx_direction": (
                self._getFloat(section, "tx_theta"), self._getFloat(section, "tx_phi")
            ),
            "workers": self._getInt(section, "workers", 1),
            "fully_absorbing": self._parseBoolean(
                "fully_absorbing", self.m_parser.get(section, "fully_absorbing")
            ),
            "bins": self._getInt(section, "bins", 1),
            "ci_method": self._getChoice(section, "ci_method", ("normal", "bootstrap")),
            "transmitter": self._getChoice(section, "transmitter", ("point", "fusion"))
        }

    def _parseProtocol(self):
        section = "protocol"
        threshold = self.m_parser.get(section, "threshold").strip()
        ret = {
            "bits": self._getInt(section, "bits", 1),
            "bit_interval": self._getFloat(section, "bit_interval", 0, unit="s"),
            "p1": self._getFloat(section, "p1", 0),
            "threshold": self._getInt(section, "threshold", 0) if threshold else None,
            "detector": DetectorKind(self._getChoice(section, "detector", [e.value for e in DetectorKind])),
            "ber_mode": self._getChoice(section, "ber_mode", ("exact", "montecarlo")),
            "draws": self._getInt(section, "draws", 1),
            "seed": self._getInt(section, "seed", 0)
        }
        if not ret["p1"] < 1:
            raise ConfigError("[protocol] p1 must lie in (0, 1)")
        if ret["detector"] == DetectorKind.Fixed and ret["threshold"] is None:
            raise ConfigError("[protocol] detector = fixed needs a threshold")
        self.m_config[section] = ret

    def _parseSweep(self):
        section = "sweep"
        get = self.m_parser.get
        try:
            models = [ModelTag(m.strip().upper()) for m in get(section, "models").split(',') if m.strip()]
            ret = {
                "coverages": patchcir.utils.parseFloatList(get(section, "coverages")),
                "patch_counts": patchcir.utils.parseIntList(get(section, "patch_counts")),
                "bit_intervals": patchcir.utils.parseFloatList(get(section, "bit_intervals")),
                "models": models,
                "size_spreads": patchcir.utils.parseIntList(get(section, "size_spreads")),
                "seeds": patchcir.utils.parseIntList(get(section, "seeds")),
                "rx_radii": patchcir.utils.parseFloatList(get(section, "rx_radii")),
                "diffusions": patchcir.utils.parseFloatList(get(section, "diffusions")),
                "region_fraction": self._getFloat(section, "region_fraction", 0),
                "particle_oracle": self._parseBoolean(
                    "particle_oracle", get(section, "particle_oracle")
                )
            }
        except ValueError as e:
            raise ConfigError("invalid [sweep] list: {}".format(e))

        if not ret["region_fraction"] <= 1:
            raise ConfigError("[sweep] region_fraction must lie in (0, 1]")
        if any(c <= 0 or c >= 1 for c in ret["coverages"]):
            raise ConfigError("[sweep] coverages must lie in (0, 1)")
        if any(n < 1 for n in ret["patch_counts"] + ret["size_spreads"]):
            raise ConfigError("[sweep] patch counts and size spreads must be >= 1")

        self.m_config[section] = ret

    def _parseOutput(self):
        self.m_config["output"] = {"directory": self.m_parser.get("output", "directory").strip()}

    def getConfig(self):

        if self.m_config:
            return self.m_config

        self._readConfig()
        self._parseConfig()
        return self.m_config

    def getChannelParams(self):
        return ChannelParams(**self.getConfig()["channel"])

    def getPointTx(self):
        return PointTx(self.getConfig()["tx"]["molecules"])

    def getFusionTx(self):
        tx = self.getConfig()["tx"]
        return FusionTx(
            tx["tx_radius"], tx["vesicle_diffusion"], tx["fusion_rate"],
            tx["vesicles"], tx["molecules_per_vesicle"]
        )

    def getLayout(self, patches=None, coverage=None, rx_radius=None):
        """Builds the configured layout; the arguments override the
        configured patch count, coverage and RX radius."""
        conf = self.getConfig()["layout"]
        kind = conf["kind"]
        rx_radius = rx_radius if rx_radius else self.getConfig()["channel"]["rx_radius"]
        patches = patches if patches else conf["patches"]
        coverage = coverage if coverage else conf["coverage"]

        if kind == LayoutKind.Fibonacci:
            return geometry.layoutFibonacci(rx_radius, patches, coverage)
        elif kind == LayoutKind.Random:
            return geometry.layoutRandom(rx_radius, patches, coverage, conf["seed"])
        elif kind == LayoutKind.Region:
            return geometry.layoutRegion(rx_radius, patches, coverage, conf["theta_range"], conf["phi_range"])
        elif kind == LayoutKind.Explicit:
            return geometry.layoutExplicit(rx_radius, conf["patch_list"])

        return geometry.loadLayout(conf["path"])

    def getTimeGrid(self):
        grid = self.getConfig()["grid"]
        return patchcir.utils.timeGrid(grid["t_min"], grid["t_max"], grid["points"], grid["spacing"])

    def getQuadratureSpec(self):
        num = self.getConfig()["numerics"]
        return QuadratureSpec(num["rel_tol"], num["abs_tol"], num["max_subdivisions"])

    def getSimConfig(self, **changes):
        sim = dict(self.getConfig()["simulation"])
        sim.update(changes)
        return SimConfig(
            time_step=sim["time_step"], horizon=sim["horizon"], realizations=sim["realizations"],
            particles=sim["particles"], seed=sim["seed"], placement=sim["placement"],
            tx_direction=sim["tx_direction"], vesicle_time_step=sim["vesicle_time_step"],
            workers=sim["workers"], fully_absorbing=sim["fully_absorbing"]
        )

    def getProtocolSpec(self):
        proto = self.getConfig()["protocol"]
        return ProtocolSpec(proto["bits"], proto["bit_interval"], proto["p1"])

    def getDetectorPolicy(self):
        proto = self.getConfig()["protocol"]
        return DetectorPolicy(proto["detector"], proto["threshold"])

    def getOutputDirectory(self, override=None):
        if override:
            return override
        env = os.environ.get("PATCHCIR_OUTPUT", None)
        if env:
            return env
        return self.getConfig()["output"]["directory"]

    def toDict(self):
        """The resolved configuration as plain strings, for manifests."""
        self.getConfig()
        return {section: dict(self.m_parser[section]) for section in self.DEFAULTS}
