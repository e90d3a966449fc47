# vim: ts=4 et sw=4 sts=4 :

# ON/OFF keying over the molecular channel: Poisson counts with ISI,
# threshold detection, exact and Monte Carlo average bit error rates and the
# per-history and average optimal decision thresholds.

import logging
import math
from enum import Enum

import numpy as np
import scipy.stats

from patchcir.types import ProtocolError

logger = logging.getLogger("comms")

# exact enumeration of 2^(Q-1) histories is capped here
MAX_EXACT_BITS = 20


class ProtocolSpec:

    def __init__(self, bits=10, bit_interval=0.8, p1=0.5):
        self.m_bits = int(bits)
        self.m_bit_interval = float(bit_interval)
        self.m_p1 = float(p1)

        if self.m_bits < 1:
            raise ProtocolError("at least one bit per frame is needed")
        if not self.m_bit_interval > 0:
            raise ProtocolError("bit interval must be positive, got {} s".format(bit_interval))
        if not 0 < self.m_p1 < 1:
            raise ProtocolError("P1 must lie in (0, 1), got {}".format(p1))

    def getBits(self):
        return self.m_bits

    def getBitInterval(self):
        return self.m_bit_interval

    def getP1(self):
        return self.m_p1

    def getP0(self):
        return 1.0 - self.m_p1

    def withBitInterval(self, bit_interval):
        return ProtocolSpec(self.m_bits, bit_interval, self.m_p1)

    def toDict(self):
        return {"bits": self.m_bits, "bit_interval": self.m_bit_interval, "p1": self.m_p1}


class ChannelIncrements:
    """Absorbed fraction per bit interval lag, dH_k = H((k+1) T_b) - H(k T_b)
    for k = 0..Q-1, and the number of molecules N_T released per 1 bit."""

    def __init__(self, increments, molecules):
        self.m_increments = np.asarray(increments, dtype=float)
        self.m_molecules = int(molecules)

        if self.m_molecules < 1:
            raise ProtocolError("molecule count must be >= 1")
        if np.any(self.m_increments < 0):
            raise ProtocolError("absorbed fraction increments must be >= 0")

    def getIncrements(self):
        return self.m_increments

    def getMolecules(self):
        return self.m_molecules

    def getLags(self):
        return len(self.m_increments)

    def getMeans(self):
        """Expected count contribution N_T dH_k of a 1 sent k intervals
        ago."""
        return self.m_molecules * self.m_increments

    def getMaxMean(self):
        return float(np.sum(self.getMeans()))


def channelIncrements(cumulative, spec, molecules, asymptote=None, tol=1e-9):
    """Samples the cumulative absorbed fraction `cumulative(t)` at multiples
    of the bit interval.

    Tiny negative increments from quadrature noise (above -tol) are clipped
    to zero.
    """
    grid = spec.getBitInterval() * np.arange(1, spec.getBits() + 1)
    values = np.concatenate(([0.0], np.asarray(cumulative(grid), dtype=float)))
    increments = np.diff(values)

    if np.any(increments < -tol):
        raise ProtocolError("cumulative absorbed fraction decreases between bit intervals")
    increments = np.maximum(increments, 0.0)

    if asymptote is not None and np.sum(increments) > asymptote + tol:
        raise ProtocolError("increments sum {} exceeds the asymptote {}".format(np.sum(increments), asymptote))

    return ChannelIncrements(increments, molecules)


def _checkHistory(history, inc):
    history = np.asarray(history, dtype=np.int64)
    if np.any((history != 0) & (history != 1)):
        raise ProtocolError("bit histories hold only 0 and 1")
    if len(history) > inc.getLags():
        raise ProtocolError("history of {} bits exceeds the {} known lags".format(len(history), inc.getLags()))
    return history


def poissonMean(q, history, inc):
    """Expected count in slot q for the bits b_1..b_q given in `history`."""
    history = _checkHistory(history, inc)
    if len(history) != int(q):
        raise ProtocolError("history length {} differs from q = {}".format(len(history), q))
    # b_g contributes with lag q - g
    lags = q - np.arange(1, q + 1)
    return float(np.sum(history * inc.getMeans()[lags]))


def _conditionalMeans(q, previous, inc):
    """(chi_1, chi_0): expected counts with b_q = 1 and b_q = 0."""
    previous = _checkHistory(previous, inc)
    if len(previous) != int(q) - 1:
        raise ProtocolError("history of {} bits does not precede bit q = {}".format(len(previous), q))
    chi0 = poissonMean(q, np.append(previous, 0), inc)
    return chi0 + inc.getMeans()[0], chi0


def missProbability(threshold, mean):
    """Pr(N < threshold) for N ~ Poisson(mean); broadcasts."""
    threshold = np.asarray(threshold, dtype=float)
    mean = np.asarray(mean, dtype=float)
    safe = np.where(mean > 0, mean, 1.0)
    ret = scipy.stats.poisson.cdf(threshold - 1, safe)
    return np.where(mean > 0, ret, (threshold >= 1).astype(float))


def falseAlarmProbability(threshold, mean):
    """Pr(N >= threshold) for N ~ Poisson(mean); broadcasts."""
    threshold = np.asarray(threshold, dtype=float)
    mean = np.asarray(mean, dtype=float)
    safe = np.where(mean > 0, mean, 1.0)
    ret = scipy.stats.poisson.sf(threshold - 1, safe)
    return np.where(mean > 0, ret, (threshold <= 0).astype(float))


def _errorProbability(threshold, chi1, chi0, spec):
    return (
        spec.getP1() * missProbability(threshold, chi1)
        + spec.getP0() * falseAlarmProbability(threshold, chi0)
    )


def berGivenHistory(q, previous, threshold, inc, spec):
    """Error probability of bit q for the preceding bits b_1..b_{q-1}."""
    if int(threshold) < 0:
        raise ProtocolError("thresholds are non-negative integers")
    chi1, chi0 = _conditionalMeans(q, previous, inc)
    return float(_errorProbability(int(threshold), chi1, chi0, spec))


def thresholdLimit(max_mean):
    """Largest threshold worth scanning for counts with mean up to
    max_mean."""
    return int(math.ceil(max_mean + 10 * math.sqrt(max_mean))) + 1


def thresholdFormula(q, previous, inc, spec):
    """Closed-form likelihood ratio threshold; None when chi_0 = 0."""
    chi1, chi0 = _conditionalMeans(q, previous, inc)
    if chi1 <= chi0:
        raise ProtocolError("channel is uninformative: chi_1 <= chi_0")
    if chi0 <= 0:
        return None
    value = (math.log(spec.getP0() / spec.getP1()) + chi1 - chi0) / math.log(chi1 / chi0)
    return max(0, int(math.ceil(value)))


def optimalThreshold(q, previous, inc, spec):
    """Per-history optimal threshold Psi*, found by an exhaustive scan; the
    closed form is evaluated alongside and disagreements are logged."""
    chi1, chi0 = _conditionalMeans(q, previous, inc)
    if chi1 <= chi0:
        raise ProtocolError("channel is uninformative: chi_1 <= chi_0")

    candidates = np.arange(thresholdLimit(chi1) + 1)
    errors = _errorProbability(candidates, chi1, chi0, spec)
    best = int(np.argmin(errors))

    formula = thresholdFormula(q, previous, inc, spec)
    if formula is not None and formula != best:
        gap = float(_errorProbability(formula, chi1, chi0, spec) - errors[best])
        if gap > 0:
            logger.warning("threshold formula gives {} instead of {} (error gap {:.3e})".format(
                formula, best, gap)
            )

    return best


def _historyMeans(q, inc):
    """chi_0 for all 2^(q-1) histories preceding bit q."""
    means = inc.getMeans()
    ret = np.zeros(1)
    for lag in range(1, int(q)):
        ret = np.concatenate((ret, ret + means[lag]))
    return ret


def _checkLags(inc, spec):
    if inc.getLags() < spec.getBits():
        raise ProtocolError("{} bits per frame need {} channel increments, got {}".format(
            spec.getBits(), spec.getBits(), inc.getLags())
        )


def _checkExact(spec):
    if spec.getBits() > MAX_EXACT_BITS:
        raise ProtocolError(
            "exact enumeration is limited to {} bits, use the Monte Carlo mode".format(MAX_EXACT_BITS)
        )


def berCurve(inc, thresholds, spec):
    """Exact average BER for each threshold in `thresholds`; histories are
    weighted uniformly."""
    _checkExact(spec)
    _checkLags(inc, spec)
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=np.int64))
    if np.any(thresholds < 0):
        raise ProtocolError("thresholds are non-negative integers")

    head = inc.getMeans()[0]
    total = np.zeros(len(thresholds))
    for q in range(1, spec.getBits() + 1):
        chi0 = _historyMeans(q, inc)
        errors = _errorProbability(thresholds[:, None], chi0[None, :] + head, chi0[None, :], spec)
        total += errors.mean(axis=1)

    return total / spec.getBits()


def averageBer(inc, threshold, spec, mode="exact", draws=100000, seed=1):
    """Average BER over a frame of Q bits at a fixed threshold."""
    if mode == "exact":
        return float(berCurve(inc, [int(threshold)], spec)[0])
    elif mode == "montecarlo":
        return monteCarloBer(inc, threshold, spec, draws, seed)[0]

    raise ProtocolError("unknown BER mode '{}'".format(mode))


def monteCarloBer(inc, threshold, spec, draws=100000, seed=1):
    """Seeded Monte Carlo estimate of the average BER.

    Like the exact average, the bits preceding slot q are equally likely
    0 or 1 while the bit b_q itself is 1 with probability P1. Each draw
    scores every slot of the frame.

    :return: (estimate, standard error)
    """
    _checkLags(inc, spec)
    rng = np.random.default_rng(seed)
    bits = spec.getBits()
    history = (rng.random((int(draws), bits)) < 0.5).astype(np.int64)
    current = (rng.random((int(draws), bits)) < spec.getP1()).astype(np.int64)

    means = inc.getMeans()[:bits]
    # slot q collects b_g * N_T dH_{q-g} from the bits g < q
    lag = np.arange(bits)[:, None] - np.arange(bits)[None, :]
    kernel = np.where(lag >= 1, means[np.clip(lag, 0, None)], 0.0)
    chi = history @ kernel.T + current * means[0]

    counts = rng.poisson(chi)
    errors = ((counts >= int(threshold)).astype(np.int64) != current).mean(axis=1)
    return float(errors.mean()), float(errors.std(ddof=1) / math.sqrt(len(errors)))


def averageOptimalThreshold(inc, spec, method="exhaustive"):
    """Threshold minimizing the exact average BER; ties go to the smaller
    threshold.

    :param method: "exhaustive" scans [0, Psi_max]; "golden" narrows the
                   range by an integer golden section search and scans the
                   remaining neighborhood.
    :return: (threshold, average BER)
    """
    limit = thresholdLimit(inc.getMaxMean())

    if method == "exhaustive":
        curve = berCurve(inc, np.arange(limit + 1), spec)
        best = int(np.argmin(curve))
        return best, float(curve[best])
    elif method != "golden":
        raise ProtocolError("unknown threshold search '{}'".format(method))

    cache = {}

    def ber(psi):
        if psi not in cache:
            cache[psi] = float(berCurve(inc, [psi], spec)[0])
        return cache[psi]

    inv = (math.sqrt(5) - 1) / 2
    lo, hi = 0, limit
    while hi - lo > 8:
        left = hi - int(round(inv * (hi - lo)))
        right = lo + int(round(inv * (hi - lo)))
        if left >= right:
            break
        if ber(left) <= ber(right):
            hi = right
        else:
            lo = left

    window = range(max(0, lo - 3), min(limit, hi + 3) + 1)
    best = min(window, key=lambda psi: (ber(psi), psi))
    return best, ber(best)


class DetectorKind(Enum):

    Fixed = "fixed"
    PerHistory = "per-history"
    AverageOptimal = "average-optimal"


class DetectorPolicy:

    def __init__(self, kind, threshold=None):
        self.m_kind = kind
        self.m_threshold = threshold

        if kind == DetectorKind.Fixed and (threshold is None or int(threshold) < 0):
            raise ProtocolError("a fixed detector needs a threshold >= 0")

    def getKind(self):
        return self.m_kind

    def getThreshold(self):
        return self.m_threshold

    def averageBer(self, inc, spec):
        """Exact average BER under this detector."""
        if self.m_kind == DetectorKind.Fixed:
            return averageBer(inc, self.m_threshold, spec)
        elif self.m_kind == DetectorKind.AverageOptimal:
            return averageOptimalThreshold(inc, spec)[1]

        _checkExact(spec)
        _checkLags(inc, spec)
        head = inc.getMeans()[0]
        thresholds = np.arange(thresholdLimit(inc.getMaxMean()) + 1)
        total = 0.0
        for q in range(1, spec.getBits() + 1):
            chi0 = _historyMeans(q, inc)
            errors = _errorProbability(thresholds[:, None], chi0[None, :] + head, chi0[None, :], spec)
            total += errors.min(axis=0).mean()
        return total / spec.getBits()


def berVersusBitInterval(cumulative, spec, molecules, bit_intervals, asymptote=None):
    """Average optimal threshold and its BER for each bit interval.

    :return: list of (T_b, threshold, average BER)
    """
    ret = []
    for interval in bit_intervals:
        current = spec.withBitInterval(interval)
        inc = channelIncrements(cumulative, current, molecules, asymptote)
        threshold, ber = averageOptimalThreshold(inc, current)
        logger.debug("T_b = {} s: threshold {}, BER {:.3e}".format(interval, threshold, ber))
        ret.append((float(interval), threshold, ber))
    return ret
