# vim: ts=4 et sw=4 sts=4 :

# boundary homogenization of a patchy RX: the "capacitance" G_p for the four
# asymptotic regimes, the resulting uniform effective surface rate w_e and
# the layout comparison metrics S and Delta H.

import itertools
import logging
import math
from enum import Enum

import numpy as np

from patchcir.geometry import pairwiseDistances
from patchcir.types import HomogenizationError, LayoutError

logger = logging.getLogger("homogenization")


class CapacitanceFormula(Enum):

    General = "general"
    Identical = "identical"
    MeanField = "mean-field"
    SingleAp = "single-ap"


class Capacitance:

    def __init__(self, value, formula, kappa, rx_radius, diagnostics=None):
        self.m_value = float(value)
        self.m_formula = formula
        self.m_kappa = float(kappa)
        self.m_rx_radius = float(rx_radius)
        self.m_diagnostics = diagnostics if diagnostics else dict()

        if not (0 < self.m_value < self.m_rx_radius and math.isfinite(self.m_value)):
            raise HomogenizationError(
                "capacitance {:.4g} um from the {} formula is outside (0, r_R = {} um); "
                "the asymptotic expansion is not valid here, use a smaller coverage".format(
                    self.m_value, formula.value, self.m_rx_radius
                )
            )

    def getValue(self):
        """G_p in um."""
        return self.m_value

    def getFormula(self):
        return self.m_formula

    def getKappa(self):
        return self.m_kappa

    def getRxRadius(self):
        return self.m_rx_radius

    def getDiagnostics(self):
        return self.m_diagnostics

    def toDict(self):
        ret = {
            "capacitance_um": self.m_value,
            "formula": self.m_formula.value,
            "kappa": self.m_kappa
        }
        for key, val in self.m_diagnostics.items():
            ret[key] = val.tolist() if isinstance(val, np.ndarray) else val
        return ret


class EffectiveRate:

    def __init__(self, rate, capacitance):
        self.m_rate = float(rate)
        self.m_capacitance = capacitance

    def getRate(self):
        """w_e in um/s."""
        return self.m_rate

    def getCapacitance(self):
        return self.m_capacitance


def interactionKernel(distance):
    """F(d) = 1/d + ln(d)/2 - ln(2 + d)/2 for the normalized center
    distance d of two patches."""
    distance = np.asarray(distance, dtype=float)
    return 1.0 / distance + 0.5 * np.log(distance) - 0.5 * np.log(2.0 + distance)


def _pairSum(layout, weights):
    """sum_{i<j} weights_i weights_j F(l'_i, l'_j)"""
    if layout.getPatchCount() < 2:
        return 0.0

    dist = pairwiseDistances(layout.getUnitVectors())
    i, j = np.triu_indices(layout.getPatchCount(), k=1)
    return float(np.sum(weights[i] * weights[j] * interactionKernel(dist[i, j])))


def _weights(layout):
    rx_radius = layout.getRxRadius()
    radii = layout.getRadii()
    kappa = radii[0] / rx_radius
    return kappa, 2 * radii / (rx_radius * kappa * math.pi)


def capacitanceGeneral(layout):
    """G_p for patches of arbitrary sizes and positions.

    The O(kappa^2 ln(kappa/2)) remainder is dropped. kappa is taken from the
    first patch of the layout.
    """
    rx_radius = layout.getRxRadius()
    radii = layout.getRadii()
    count = layout.getPatchCount()

    kappa, m = _weights(layout)
    m_bar = float(np.mean(m))
    s = m / 2 * (np.log(4 * radii / (rx_radius * kappa)) - 1.5)
    sum_m2 = float(np.sum(m ** 2))
    vartheta = sum_m2 ** 2 / (count * m_bar) - float(np.sum(m ** 3))
    pairs = _pairSum(layout, m)
    log_half = math.log(kappa / 2)

    bracket = (
        1
        + kappa / (2 * count * m_bar) * log_half * sum_m2
        + kappa / (count * m_bar) * (float(np.sum(m * s)) + 2 * pairs)
        + (kappa * log_half) ** 2 * vartheta / (4 * count * m_bar)
    )
    inverse = 2 / (count * m_bar * kappa * rx_radius) * bracket

    diagnostics = {
        "m": m,
        "m_bar": m_bar,
        "s": s,
        "vartheta": vartheta,
        "pair_sum": pairs
    }

    return Capacitance(1 / inverse, CapacitanceFormula.General, kappa, rx_radius, diagnostics)


def capacitanceIdentical(layout):
    """G_p for equally sized patches at arbitrary positions."""
    if not layout.hasIdenticalRadii():
        raise LayoutError("the identical-size capacitance needs equal patch radii")

    rx_radius = layout.getRxRadius()
    count = layout.getPatchCount()
    kappa = layout.getRadii()[0] / rx_radius
    pairs = _pairSum(layout, np.ones(count))

    bracket = 1 + kappa / math.pi * (math.log(2 * kappa) - 1.5 + 4 / count * pairs)
    inverse = math.pi / (count * kappa * rx_radius) * bracket

    return Capacitance(
        1 / inverse, CapacitanceFormula.Identical, kappa, rx_radius,
        {"pair_sum": pairs}
    )


def capacitanceMeanField(rx_radius, patch_count, kappa):
    """Mean-field G_p for many equal patches spread evenly; independent of
    the exact patch positions."""
    if int(patch_count) < 1 or not 0 < kappa < 1:
        raise HomogenizationError("mean-field capacitance needs N_p >= 1 and kappa in (0, 1)")

    n = float(patch_count)
    inverse = (
        1
        + math.pi / (n * kappa)
        + (0.5 * math.log(kappa * math.sqrt(n)) + math.log(2) - 1.5) / n
        - 2 * n ** -0.5
        + n ** -1.5
    ) / rx_radius

    return Capacitance(1 / inverse, CapacitanceFormula.MeanField, kappa, rx_radius)


def capacitanceSingle(rx_radius, radius):
    """Higher-order G_p of a single patch of radius `radius`; the
    O(kappa^3 ln kappa) remainder is dropped."""
    kappa = radius / rx_radius
    if not 0 < kappa < 1:
        raise HomogenizationError("patch radius must lie in (0, r_R)")

    bracket = (
        1
        + kappa / math.pi * (math.log(2 * kappa) - 1.5)
        - kappa ** 2 / math.pi ** 2 * (math.pi ** 2 + 21) / 36
    )
    inverse = math.pi / (kappa * rx_radius) * bracket

    return Capacitance(1 / inverse, CapacitanceFormula.SingleAp, kappa, rx_radius)


def capacitanceFor(layout):
    """Picks the most specific formula for a layout: the single patch
    expansion, the identical-size one, or the general one."""
    if layout.getPatchCount() == 1:
        ap = layout.getPatches()[0]
        return capacitanceSingle(layout.getRxRadius(), ap.getRadius())
    elif layout.hasIdenticalRadii():
        return capacitanceIdentical(layout)

    return capacitanceGeneral(layout)


def effectiveRate(capacitance, diffusion, rx_radius):
    """Uniform surface rate w_e = D G_p / (r_R (r_R - G_p)) matching the
    steady-state diffusion current of the patchy RX."""
    value = capacitance.getValue()
    if not 0 < value < rx_radius:
        raise HomogenizationError(
            "capacitance {} um outside (0, r_R); homogenization invalid".format(value)
        )
    return EffectiveRate(diffusion * value / (rx_radius * (rx_radius - value)), capacitance)


def layoutMetricS(layout):
    """S = sum_{i<j} m_i m_j F(l'_i, l'_j), the only location dependent part
    of G_p; smaller S means a larger capacitance."""
    if layout.getPatchCount() < 2:
        return 0.0
    _, m = _weights(layout)
    return _pairSum(layout, m)


def permutationSpread(layout, max_orders=24):
    """Relative spread of the general-formula G_p over reorderings of the
    patch list.

    kappa is defined by the first patch, so for unequal sizes only the
    vartheta term changes with the order.
    """
    count = layout.getPatchCount()
    orders = itertools.islice(itertools.permutations(range(count)), max_orders)
    # always include every patch once in the leading position
    leads = [[i] + [j for j in range(count) if j != i] for i in range(count)]
    values = [
        capacitanceGeneral(layout.permuted(order)).getValue()
        for order in itertools.chain(orders, leads)
    ]
    return (max(values) - min(values)) / min(values)


def drawPatchCoverages(patch_count, coverage, spread, seed):
    """Splits `coverage` over `patch_count` patches in proportion to random
    integers drawn uniformly from 1..spread."""
    if int(spread) < 1:
        raise HomogenizationError("size spread must be >= 1")
    rng = np.random.default_rng(seed)
    weights = rng.integers(1, int(spread) + 1, size=int(patch_count))
    return coverage * weights / np.sum(weights)


def deltaH(layout, single_layout, params):
    """Relative increase of the asymptotic absorbed fraction of `layout`
    over the single-patch layout with the same coverage."""
    if abs(layout.getCoverage() - single_layout.getCoverage()) > 1e-9 or \
            layout.getRxRadius() != single_layout.getRxRadius():
        raise HomogenizationError("delta H compares layouts of equal coverage and RX radius")

    diffusion = params.getDiffusion()
    rx_radius = params.getRxRadius()
    root = math.sqrt(params.getDegradation() / diffusion)

    w_n = effectiveRate(capacitanceFor(layout), diffusion, rx_radius).getRate()
    w_1 = effectiveRate(capacitanceFor(single_layout), diffusion, rx_radius).getRate()

    zeta_n, zeta_1 = params.getZeta(w_n), params.getZeta(w_1)
    if zeta_n == 0 or zeta_1 == 0:
        raise HomogenizationError("zeta(w_e) vanishes, delta H undefined")

    num = w_n * zeta_1 * (params.getGamma(w_n) - root)
    den = w_1 * zeta_n * (params.getGamma(w_1) - root)
    return num / den - 1
