# vim: ts=4 et sw=4 sts=4 :

# a collection of simple data structures and error types used across
# patch.cir. Lengths are in micrometres, times in seconds, diffusion
# coefficients in um^2/s and surface reaction rates in um/s.

import math
from enum import Enum

import numpy as np


class ParameterError(ValueError):
    """Invalid physical parameter combination."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)


class NumericsError(Exception):

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)


class SolverError(NumericsError):

    def __init__(self, index, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.m_index = index

    def getIndex(self):
        """Returns the 1-based index of the eigenvalue that failed."""
        return self.m_index


class AccuracyError(NumericsError):

    def __init__(self, achieved, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.m_achieved = achieved

    def getAchieved(self):
        return self.m_achieved


class LayoutError(Exception):

    def __init__(self, *args, pair=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.m_pair = pair

    def getPair(self):
        """Returns the (i, j) patch index pair that overlaps, if any."""
        return self.m_pair


class HomogenizationError(Exception):

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)


class ProtocolError(Exception):

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)


class SimulationError(Exception):

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)


class ModelTag(Enum):
    """The three TX/RX combinations that are compared."""

    PTFR = "PTFR"
    PTAR = "PTAR"
    MTAR = "MTAR"


class Provenance(Enum):

    Analytic = "analytic"
    Simulated = "simulated"


class ChannelParams:
    """Geometry and medium of the diffusion channel.

    The derived quantities epsilon, beta, gamma(w), zeta(w) and varpi(w) used
    throughout the closed-form CIR expressions are provided as getters.
    """

    def __init__(self, rx_radius, distance, diffusion, degradation=0.0):
        self.m_rx_radius = float(rx_radius)
        self.m_distance = float(distance)
        self.m_diffusion = float(diffusion)
        self.m_degradation = float(degradation)

        if not self.m_rx_radius > 0:
            raise ParameterError("RX radius must be positive, got {} um".format(rx_radius))
        if not self.m_distance > self.m_rx_radius:
            raise ParameterError(
                "TX distance {} um must exceed the RX radius {} um".format(distance, rx_radius)
            )
        if not self.m_diffusion > 0:
            raise ParameterError("diffusion coefficient must be positive, got {} um^2/s".format(diffusion))
        if not self.m_degradation >= 0:
            raise ParameterError("degradation rate must be >= 0, got {} 1/s".format(degradation))

    def getRxRadius(self):
        return self.m_rx_radius

    def getDistance(self):
        return self.m_distance

    def getDiffusion(self):
        return self.m_diffusion

    def getDegradation(self):
        return self.m_degradation

    def getGap(self):
        """Distance between the TX point and the RX surface."""
        return self.m_distance - self.m_rx_radius

    def getEpsilon(self):
        return self.getGap() / math.sqrt(4 * self.m_diffusion)

    def getBeta(self):
        return self.getGap() * math.sqrt(self.m_degradation / self.m_diffusion)

    def getGamma(self, rate):
        return (rate * self.m_rx_radius + self.m_diffusion) / (self.m_diffusion * self.m_rx_radius)

    def getZeta(self, rate):
        return self.getGamma(rate) ** 2 * self.m_diffusion - self.m_degradation

    def getVarpi(self, rate):
        return self.getGamma(rate) * math.sqrt(self.m_diffusion)

    def withDegradation(self, degradation):
        return ChannelParams(self.m_rx_radius, self.m_distance, self.m_diffusion, degradation)

    def withDiffusion(self, diffusion):
        return ChannelParams(self.m_rx_radius, self.m_distance, diffusion, self.m_degradation)

    def withRxRadius(self, rx_radius):
        return ChannelParams(rx_radius, self.m_distance, self.m_diffusion, self.m_degradation)

    def checkFusionGeometry(self, tx_radius):
        if not tx_radius + self.m_rx_radius < 0.9 * self.m_distance:
            raise ParameterError(
                "TX radius {} um plus RX radius {} um must stay below 0.9 times the distance {} um".format(
                    tx_radius, self.m_rx_radius, self.m_distance
                )
            )

    def toDict(self):
        return {
            "rx_radius": self.m_rx_radius,
            "distance": self.m_distance,
            "diffusion": self.m_diffusion,
            "degradation": self.m_degradation
        }

    def __repr__(self):
        return "ChannelParams(r_R={}, r_0={}, D={}, k_d={})".format(
            self.m_rx_radius, self.m_distance, self.m_diffusion, self.m_degradation
        )


class PointTx:
    """Point transmitter releasing all molecules at once."""

    def __init__(self, molecules):
        if int(molecules) < 1:
            raise ParameterError("a point TX needs at least one molecule")
        self.m_molecules = int(molecules)

    def isPoint(self):
        return True

    def getMoleculeCount(self):
        return self.m_molecules

    def toDict(self):
        return {"kind": "point", "molecules": self.m_molecules}


class FusionTx:
    """Membrane fusion transmitter.

    Vesicles start at the TX center, diffuse inside the TX sphere and fuse
    irreversibly with its membrane, each releasing a fixed number of
    molecules.
    """

    def __init__(self, tx_radius, vesicle_diffusion, fusion_rate, vesicles, molecules_per_vesicle):
        self.m_tx_radius = float(tx_radius)
        self.m_vesicle_diffusion = float(vesicle_diffusion)
        self.m_fusion_rate = float(fusion_rate)
        self.m_vesicles = int(vesicles)
        self.m_molecules_per_vesicle = int(molecules_per_vesicle)

        for label, val in (
            ("TX radius", self.m_tx_radius),
            ("vesicle diffusion coefficient", self.m_vesicle_diffusion),
            ("fusion rate", self.m_fusion_rate)
        ):
            if not val > 0:
                raise ParameterError("{} must be positive, got {}".format(label, val))

        if self.m_vesicles < 1 or self.m_molecules_per_vesicle < 1:
            raise ParameterError("vesicle and per-vesicle molecule counts must be >= 1")

    def isPoint(self):
        return False

    def getTxRadius(self):
        return self.m_tx_radius

    def getVesicleDiffusion(self):
        return self.m_vesicle_diffusion

    def getFusionRate(self):
        return self.m_fusion_rate

    def getVesicleCount(self):
        return self.m_vesicles

    def getMoleculesPerVesicle(self):
        return self.m_molecules_per_vesicle

    def getMoleculeCount(self):
        return self.m_vesicles * self.m_molecules_per_vesicle

    def getFusionProbability(self, time_step):
        """Per-contact fusion probability of the discretized membrane
        reaction, clamped to 1."""
        prob = self.m_fusion_rate * math.sqrt(math.pi * time_step / self.m_vesicle_diffusion)
        return min(prob, 1.0)

    def toDict(self):
        return {
            "kind": "fusion",
            "tx_radius": self.m_tx_radius,
            "vesicle_diffusion": self.m_vesicle_diffusion,
            "fusion_rate": self.m_fusion_rate,
            "vesicles": self.m_vesicles,
            "molecules_per_vesicle": self.m_molecules_per_vesicle
        }


class CirSeries:
    """Sampled channel impulse response.

    Holds the hitting rate h(t) and the cumulative absorbed fraction H(t) on
    a time grid plus the asymptotic fraction and a provenance dictionary
    describing how the curves were produced.
    """

    def __init__(self, times, rate, cumulative, asymptote, provenance):
        self.m_times = np.asarray(times, dtype=float)
        self.m_rate = np.asarray(rate, dtype=float)
        self.m_cumulative = np.asarray(cumulative, dtype=float)
        self.m_asymptote = asymptote
        self.m_provenance = dict(provenance)

        if not (self.m_times.shape == self.m_rate.shape == self.m_cumulative.shape):
            raise ValueError("CIR time grid and curves differ in shape")

    def getTimes(self):
        return self.m_times

    def getRate(self):
        return self.m_rate

    def getCumulative(self):
        return self.m_cumulative

    def getAsymptote(self):
        return self.m_asymptote

    def getProvenance(self):
        return self.m_provenance

    def isSimulated(self):
        return self.m_provenance.get("source") == Provenance.Simulated.value

    def getPeak(self):
        """Returns (time, rate) of the largest sampled hitting rate."""
        idx = int(np.argmax(self.m_rate))
        return self.m_times[idx], self.m_rate[idx]
