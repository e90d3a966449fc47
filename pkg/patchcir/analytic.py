# vim: ts=4 et sw=4 sts=4 :

# closed-form channel impulse responses: the uniform-rate RX, the patchy RX
# reached through its effective rate, uniform release from a spherical shell,
# the membrane fusion TX and the fully absorbing RX baseline.
#
# All time arguments accept scalars or arrays. Values at t <= 0 are the
# t -> 0+ limits, i.e. zero.

import logging
import math

import numpy as np
import scipy.special

from patchcir.homogenization import capacitanceFor, effectiveRate
from patchcir.numerics import (
    QuadratureResult, QuadratureSpec, cachedEigenvalues, expErfc, integrate, integrateVector
)
from patchcir.types import AccuracyError, CirSeries, ParameterError, Provenance

logger = logging.getLogger("analytic")

# relative distance between varpi(w) and sqrt(k_d) below which the rate is
# moved off the removable zeta(w) = 0 singularity
ZETA_GUARD = 1e-6
# the truncated release series is trusted once exp(-a_N t) < exp(-36)
RELEASE_VALIDITY_EXPONENT = 36.0
# mode sums below this multiple of the rounding error of their terms are
# cancellation noise and reported as zero
MODE_SUM_FLOOR = 1e3 * np.finfo(float).eps


def _times(t):
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    return arr, np.ndim(t) == 0


def _result(values, scalar):
    return float(values[0]) if scalar else values


def _checkRate(w):
    if not w >= 0 or not math.isfinite(w):
        raise ParameterError("surface reaction rate must be finite and >= 0, got {} um/s".format(w))


def _guardRate(w, p):
    """Returns w, or a rate shifted by a relative ZETA_GUARD if zeta(w)
    (almost) vanishes."""
    root = math.sqrt(p.getDegradation())
    varpi = p.getVarpi(w)

    if root == 0 or abs(varpi - root) > ZETA_GUARD * root:
        return w

    diffusion = p.getDiffusion()
    gamma = root * (1 + 2 * ZETA_GUARD) / math.sqrt(diffusion)
    shifted = gamma * diffusion - diffusion / p.getRxRadius()
    logger.debug("zeta({}) ~ 0, evaluating at w = {}".format(w, shifted))
    return shifted


def _decayingErfc(t, y, root, p):
    """exp(root * y / sqrt(D) + root^2 t - k_d t) * erfc(y / sqrt(4 D t) +
    root sqrt(t)), evaluated through erfcx; y, root >= 0."""
    diffusion = p.getDiffusion()
    arg = y / np.sqrt(4 * diffusion * t) + root * np.sqrt(t)
    return np.exp(-y ** 2 / (4 * diffusion * t) - p.getDegradation() * t) * scipy.special.erfcx(arg)


def _growingErfc(t, y, root, p):
    """exp(-root * y / sqrt(D)) * erfc(y / sqrt(4 D t) - root sqrt(t))"""
    diffusion = p.getDiffusion()
    arg = y / np.sqrt(4 * diffusion * t) - root * np.sqrt(t)
    return expErfc(-root * y / math.sqrt(diffusion), arg)


###
# uniform surface reaction rate
###

def hUniform(t, w, p):
    """Hitting rate at an RX with uniform surface reaction rate w for a
    point TX at distance r_0."""
    _checkRate(w)
    t, scalar = _times(t)
    ret = np.zeros(t.shape)

    pos = t > 0
    if w == 0 or not np.any(pos):
        return _result(ret, scalar)

    tt = t[pos]
    diffusion, degradation = p.getDiffusion(), p.getDegradation()
    eps = p.getEpsilon()

    first = np.exp(-eps ** 2 / tt - degradation * tt) / np.sqrt(math.pi * diffusion * tt)
    second = p.getGamma(w) * _decayingErfc(tt, p.getGap(), p.getVarpi(w), p)

    ret[pos] = p.getRxRadius() * w / p.getDistance() * (first - second)
    return _result(ret, scalar)


def HUniform(t, w, p):
    """Fraction of molecules absorbed by time t at an RX with uniform
    surface reaction rate w."""
    _checkRate(w)
    t, scalar = _times(t)
    ret = np.zeros(t.shape)

    pos = t > 0
    if w == 0 or not np.any(pos):
        return _result(ret, scalar)

    tt = t[pos]
    rx_radius, distance = p.getRxRadius(), p.getDistance()
    diffusion, gap = p.getDiffusion(), p.getGap()
    edge = p.getEpsilon() / np.sqrt(tt)

    if p.getDegradation() == 0:
        gamma = p.getGamma(w)
        captured = scipy.special.erfc(edge) - _decayingErfc(tt, gap, p.getVarpi(w), p)
        ret[pos] = rx_radius * w / (distance * gamma * diffusion) * captured
        return _result(ret, scalar)

    w = _guardRate(w, p)
    varpi, root = p.getVarpi(w), math.sqrt(p.getDegradation())

    plus = _growingErfc(tt, gap, root, p)
    minus = _decayingErfc(tt, gap, root, p)
    mixed = _decayingErfc(tt, gap, varpi, p)

    core = (
        plus / (varpi + root)
        + minus / (varpi - root)
        - 2 * varpi * mixed / ((varpi - root) * (varpi + root))
    ) / (2 * math.sqrt(diffusion))

    ret[pos] = rx_radius * w / distance * core
    return _result(ret, scalar)


def HUniformLiteral(t, w, p):
    """HUniform written with the alpha_1, alpha_2, psi_1 and psi_2 terms of
    the textbook derivation; needs k_d > 0 and zeta(w) != 0.

    Kept as an independent cross-check of the rearranged HUniform.
    """
    _checkRate(w)
    degradation = p.getDegradation()
    if degradation <= 0:
        raise ParameterError("the literal form divides by sqrt(k_d), use HUniform for k_d = 0")

    t, scalar = _times(t)
    ret = np.zeros(t.shape)
    pos = t > 0
    tt = t[pos]

    diffusion, gap, beta = p.getDiffusion(), p.getGap(), p.getBeta()
    gamma, zeta = p.getGamma(w), p.getZeta(w)
    root = math.sqrt(degradation)
    edge = p.getEpsilon() / np.sqrt(tt)

    plus = expErfc(-beta, edge - root * np.sqrt(tt))
    minus = _decayingErfc(tt, gap, root, p)

    alpha1 = (plus - minus) / (2 * math.sqrt(degradation * diffusion))
    psi1 = 2 * gamma * _decayingErfc(tt, gap, p.getVarpi(w), p)
    ratio = gamma ** 2 * math.sqrt(diffusion / degradation)
    psi2 = (ratio - gamma) * (math.exp(-beta) - plus) - (ratio + gamma) * (math.exp(-beta) - minus)
    alpha2 = (psi1 - psi2) / (2 * zeta) - gamma * math.exp(-beta) / zeta

    ret[pos] = p.getRxRadius() * w / p.getDistance() * (alpha1 - alpha2)
    return _result(ret, scalar)


def HUniformInf(w, p):
    """Asymptotic absorbed fraction for a uniform rate w; finite at
    zeta(w) = 0."""
    _checkRate(w)
    diffusion = p.getDiffusion()
    den = p.getGamma(w) * diffusion + math.sqrt(p.getDegradation() * diffusion)
    return p.getRxRadius() * w * math.exp(-p.getBeta()) / (p.getDistance() * den)


###
# fully absorbing RX
###

def hAbsorbing(t, p):
    t, scalar = _times(t)
    ret = np.zeros(t.shape)
    pos = t > 0
    tt = t[pos]

    gap, diffusion = p.getGap(), p.getDiffusion()
    ret[pos] = (
        p.getRxRadius() / p.getDistance()
        * gap / np.sqrt(4 * math.pi * diffusion * tt ** 3)
        * np.exp(-gap ** 2 / (4 * diffusion * tt) - p.getDegradation() * tt)
    )
    return _result(ret, scalar)


def HAbsorbing(t, p):
    t, scalar = _times(t)
    ret = np.zeros(t.shape)
    pos = t > 0
    tt = t[pos]

    root = math.sqrt(p.getDegradation())
    plus = _growingErfc(tt, p.getGap(), root, p)
    minus = _decayingErfc(tt, p.getGap(), root, p)
    ret[pos] = p.getRxRadius() / (2 * p.getDistance()) * (plus + minus)
    return _result(ret, scalar)


def HAbsorbingInf(p):
    return p.getRxRadius() / p.getDistance() * math.exp(-p.getBeta())


###
# uniform release from a shell of radius r_T
###

def _shellGaps(p, tx_radius):
    p.checkFusionGeometry(tx_radius)
    near = p.getDistance() - tx_radius - p.getRxRadius()
    far = p.getDistance() + tx_radius - p.getRxRadius()
    return near, far


def hShell(t, w, p, tx_radius):
    """Hitting rate for molecules released uniformly over a spherical shell
    of radius tx_radius centered at distance r_0."""
    _checkRate(w)
    near, far = _shellGaps(p, tx_radius)
    t, scalar = _times(t)
    ret = np.zeros(t.shape)

    pos = t > 0
    if w == 0 or not np.any(pos):
        return _result(ret, scalar)

    tt = t[pos]
    varpi = p.getVarpi(w)
    diff = _decayingErfc(tt, near, varpi, p) - _decayingErfc(tt, far, varpi, p)
    ret[pos] = p.getRxRadius() * w / (2 * tx_radius * p.getDistance()) * diff
    return _result(ret, scalar)


def _shellPotential(t, y, w, p):
    """Time integral of the shell kernel for gap y, up to terms that are
    independent of y."""
    diffusion = p.getDiffusion()
    varpi = p.getVarpi(w)
    mixed = _decayingErfc(t, y, varpi, p)

    if p.getDegradation() == 0:
        gamma = p.getGamma(w)
        scaled = y / np.sqrt(4 * diffusion * t)
        tail = scipy.special.erfc(scaled)
        return (
            2 * np.sqrt(t / (math.pi * diffusion)) * np.exp(-scaled ** 2)
            - y / diffusion * tail
            - tail / (gamma * diffusion)
            + mixed / (gamma * diffusion)
        ) / gamma

    root = math.sqrt(p.getDegradation())
    plus = _growingErfc(t, y, root, p)
    minus = _decayingErfc(t, y, root, p)
    return (
        mixed / p.getZeta(w)
        + plus / (2 * root * (varpi + root))
        - minus / (2 * root * (varpi - root))
    )


def HShell(t, w, p, tx_radius):
    """Fraction of shell-released molecules absorbed by time t."""
    _checkRate(w)
    near, far = _shellGaps(p, tx_radius)
    t, scalar = _times(t)
    ret = np.zeros(t.shape)

    pos = t > 0
    if w == 0 or not np.any(pos):
        return _result(ret, scalar)

    w = _guardRate(w, p)
    tt = t[pos]
    diff = _shellPotential(tt, near, w, p) - _shellPotential(tt, far, w, p)
    ret[pos] = p.getRxRadius() * w / (2 * tx_radius * p.getDistance()) * diff
    return _result(ret, scalar)


def HShellInf(w, p, tx_radius):
    """Asymptotic absorbed fraction of shell-released molecules."""
    _checkRate(w)
    near, _ = _shellGaps(p, tx_radius)
    diffusion = p.getDiffusion()
    root = math.sqrt(p.getDegradation())

    if root == 0:
        ratio = 2 * tx_radius / math.sqrt(diffusion)
    else:
        scaled = root / math.sqrt(diffusion)
        ratio = math.exp(-near * scaled) * -math.expm1(-2 * tx_radius * scaled) / root

    return p.getRxRadius() * w * ratio / (2 * tx_radius * p.getDistance() * (p.getVarpi(w) + root))


###
# membrane fusion release
###

class ReleaseProfile:
    """Truncated eigenfunction series of the molecule release rate f_r(t) of
    a membrane fusion TX.

    f_r(t) = sum_n c_n exp(-a_n t) with a_n = D_v lambda_n^2. The truncated
    series is only used from getOnsetTime() on. Whatever it does not
    account for by then is released at the onset as one lump, see
    getUnresolvedMass(), so the total release stays exactly 1.
    """

    def __init__(self, tx, eigenvalues):
        self.m_tx = tx
        self.m_eigenvalues = eigenvalues

        radius = tx.getTxRadius()
        roots = eigenvalues.getRoots()
        x = roots * radius
        self.m_coefficients = (
            4 * radius ** 2 * tx.getFusionRate() * roots ** 3 * scipy.special.spherical_jn(0, x)
            / (2 * x - np.sin(2 * x))
        )
        self.m_decays = tx.getVesicleDiffusion() * roots ** 2
        self.m_tail_mass = 1.0 - float(np.sum(self.m_coefficients / self.m_decays))
        self.m_onset = RELEASE_VALIDITY_EXPONENT / self.m_decays[-1]
        self.m_unresolved = 1.0 - float(self._seriesSurvival(np.array([self.m_onset]))[0])

        logger.debug("release series with {} modes, onset {:.3e} s, unresolved mass {:.3e}".format(
            len(roots), self.m_onset, self.m_unresolved)
        )

    def getTx(self):
        return self.m_tx

    def getEigenvalues(self):
        return self.m_eigenvalues

    def getCoefficients(self):
        return self.m_coefficients

    def getDecayRates(self):
        return self.m_decays

    def getCount(self):
        return len(self.m_decays)

    def getTailMass(self):
        """1 - sum_n c_n / a_n, the release mass carried by the dropped
        modes."""
        return self.m_tail_mass

    def getOnsetTime(self):
        """Time from which the truncated series is resolved."""
        return self.m_onset

    def getUnresolvedMass(self):
        """Release mass before the onset time, where the truncated series
        cannot resolve the timing."""
        return self.m_unresolved

    def _seriesSurvival(self, t):
        return np.exp(-np.outer(t, self.m_decays)) @ (self.m_coefficients / self.m_decays)

    def rate(self, t):
        """Continuous part of the release rate, zero before the onset."""
        t, scalar = _times(t)
        ret = np.zeros(t.shape)
        late = t >= self.m_onset
        ret[late] = np.exp(-np.outer(t[late], self.m_decays)) @ self.m_coefficients
        return _result(ret, scalar)

    def survival(self, t):
        """Fraction of molecules not yet released by time t."""
        t, scalar = _times(t)
        ret = np.ones(t.shape)
        late = t >= self.m_onset
        ret[late] = self._seriesSurvival(t[late])
        return _result(ret, scalar)

    def released(self, t):
        return 1.0 - np.asarray(self.survival(t))

    def tailBound(self, t):
        """Estimate of |f_r - truncated series| at t from the first dropped
        mode and the geometric decay of the following ones."""
        t, scalar = _times(t)
        radius = self.m_tx.getTxRadius()
        spacing = math.pi / radius
        last = self.m_eigenvalues.getRoots()[-1]
        nxt = last + spacing
        x = nxt * radius
        magnitude = 4 * radius ** 2 * self.m_tx.getFusionRate() * nxt ** 3 / (x * (2 * x - 1))
        diffusion = self.m_tx.getVesicleDiffusion()

        ret = np.full(t.shape, np.inf)
        pos = t > 0
        tt = t[pos]
        ratio = np.exp(-diffusion * tt * (2 * nxt * spacing + spacing ** 2))
        ret[pos] = magnitude * np.exp(-diffusion * nxt ** 2 * tt) / (1 - ratio)
        return _result(ret, scalar)

    def getAccuracy(self):
        """Achieved accuracy of the truncated release: the larger of the
        unresolved mass and the tail estimate at the onset relative to the
        peak of the series."""
        grid = np.linspace(self.m_onset, self.m_onset + 10.0 / self.m_decays[0], 200)
        scale = max(float(np.max(np.abs(self.rate(grid)))), 1e-300)
        bound = float(self.tailBound(self.m_onset)) / scale
        return max(abs(self.m_unresolved), bound)

    def checkAccuracy(self, tol):
        """Raises AccuracyError if getAccuracy() exceeds tol, otherwise
        returns it."""
        achieved = self.getAccuracy()
        if achieved > tol:
            raise AccuracyError(
                achieved,
                "release series with N_max = {} reaches {:.2e} relative accuracy, {:.1e} requested".format(
                    self.getCount(), achieved, tol
                )
            )
        return achieved


def releaseProfile(tx, n_max=100, root_tol=1e-10):
    eig = cachedEigenvalues(
        tx.getTxRadius(), tx.getVesicleDiffusion(), tx.getFusionRate(), int(n_max), root_tol
    )
    return ReleaseProfile(tx, eig)


def releaseRateMf(t, tx, n_max=100, root_tol=1e-10):
    return releaseProfile(tx, n_max, root_tol).rate(t)


def releaseSurvival(t, tx, n_max=100, root_tol=1e-10):
    return releaseProfile(tx, n_max, root_tol).survival(t)


def _modeBreaks(lower, upper, decays):
    picks = (decays[0], decays[len(decays) // 10], decays[len(decays) // 2], decays[-1])
    return [lower + min((upper - lower) / 2, 10.0 / a) for a in picks]


def sigma1(t, y, w, p, profile, spec=None):
    """Mode integrals c_n int_onset^t exp(-a_n u) E(t - u) du of the release
    series against the shell term

        E(tau) = exp(varpi y / sqrt(D) + zeta tau) erfc(varpi sqrt(tau) + y / sqrt(4 D tau))

    for the gap y. Returns a QuadratureResult holding one value per mode.
    All modes share one adaptive partition, so summing them does not add
    quadrature error.
    """
    coeffs, decays = profile.getCoefficients(), profile.getDecayRates()
    onset = profile.getOnsetTime()
    varpi = p.getVarpi(w)

    if t <= onset:
        return QuadratureResult(np.zeros(decays.shape), 0.0, True)

    def integrand(u):
        tau = t - u
        if tau <= 0:
            return np.zeros(decays.shape)
        return coeffs * np.exp(-decays * u) * _decayingErfc(tau, y, varpi, p)

    return integrateVector(integrand, onset, float(t), spec, _modeBreaks(onset, t, decays))


def _sumModes(values):
    total = float(np.sum(values))
    if abs(total) <= MODE_SUM_FLOOR * float(np.sum(np.abs(values))):
        return 0.0
    return total


def _hitSeries(t, w, p, profile, spec):
    """Hitting rate of the membrane fusion TX summed mode by mode; also
    returns whether every quadrature converged."""
    tx_radius = profile.getTx().getTxRadius()
    near, far = _shellGaps(p, tx_radius)
    onset = profile.getOnsetTime()
    scale = p.getRxRadius() * w / (2 * tx_radius * p.getDistance())
    t, scalar = _times(t)
    ret = np.zeros(t.shape)
    converged = True

    if w == 0:
        return _result(ret, scalar), converged

    for idx, ti in enumerate(t):
        if ti <= onset:
            continue
        inner = sigma1(ti, near, w, p, profile, spec)
        outer = sigma1(ti, far, w, p, profile, spec)
        converged = converged and inner.isConverged() and outer.isConverged()
        modes = _sumModes(np.concatenate((inner.getValue(), -outer.getValue())))
        ret[idx] = scale * modes + profile.getUnresolvedMass() * hShell(ti - onset, w, p, tx_radius)

    if not converged:
        logger.warning("release mode integrals did not reach the requested tolerance")

    return _result(ret, scalar), converged


def _modeSeries(t, kernel, profile, spec):
    """sum_n c_n int_onset^t exp(-a_n u) kernel(t - u) du plus the
    unresolved mass released at the onset, for each t; also returns whether
    every quadrature converged."""
    t, scalar = _times(t)
    coeffs, decays = profile.getCoefficients(), profile.getDecayRates()
    onset = profile.getOnsetTime()
    ret = np.zeros(t.shape)
    converged = True

    for idx, ti in enumerate(t):
        if ti <= onset:
            continue

        def integrand(u, ti=ti):
            return coeffs * np.exp(-decays * u) * kernel(ti - u)

        res = integrateVector(integrand, onset, float(ti), spec, _modeBreaks(onset, ti, decays))
        converged = converged and res.isConverged()
        ret[idx] = _sumModes(res.getValue()) + profile.getUnresolvedMass() * kernel(ti - onset)

    if not converged:
        logger.warning("release mode integrals did not reach the requested tolerance")

    return _result(ret, scalar), converged


def hMf(t, w, p, profile, spec=None):
    """Hitting rate for a membrane fusion TX, summed mode by mode."""
    _checkRate(w)
    p.checkFusionGeometry(profile.getTx().getTxRadius())
    return _hitSeries(t, w, p, profile, spec)[0]


def HMf(t, w, p, profile, spec=None):
    """Absorbed fraction by time t for a membrane fusion TX."""
    tx_radius = profile.getTx().getTxRadius()
    p.checkFusionGeometry(tx_radius)
    return _modeSeries(t, lambda tau: HShell(tau, w, p, tx_radius), profile, spec)[0]


def HMfInf(w, p, tx_radius):
    """Every vesicle eventually fuses, so the asymptote equals the one of
    the shell release."""
    return HShellInf(w, p, tx_radius)


def hMfConvolution(t, w, p, profile, spec=None):
    """Hitting rate for a membrane fusion TX as the direct time convolution
    of the release rate with the shell hitting rate."""
    tx_radius = profile.getTx().getTxRadius()
    p.checkFusionGeometry(tx_radius)
    onset = profile.getOnsetTime()
    t, scalar = _times(t)
    ret = np.zeros(t.shape)

    for idx, ti in enumerate(t):
        if ti <= onset:
            continue

        def integrand(u, ti=ti):
            return profile.rate(u) * hShell(ti - u, w, p, tx_radius)

        res = integrate(integrand, onset, float(ti), spec)
        if not res.isConverged():
            logger.warning("convolution at t = {} s not converged".format(ti))
        ret[idx] = res.getValue() + profile.getUnresolvedMass() * hShell(ti - onset, w, p, tx_radius)

    return _result(ret, scalar)


###
# CirSeries builders
###

def cirPointAp(times, layout, p, capacitance=None):
    """CIR of a point TX and a patchy RX through the effective uniform
    rate."""
    capacitance = capacitance if capacitance else capacitanceFor(layout)
    rate = effectiveRate(capacitance, p.getDiffusion(), p.getRxRadius()).getRate()
    times = np.asarray(times, dtype=float)

    provenance = {
        "source": Provenance.Analytic.value,
        "model": "PTAR",
        "effective_rate": rate,
        "capacitance": capacitance.getValue(),
        "capacitance_formula": capacitance.getFormula().value,
        "patches": layout.getPatchCount(),
        "coverage": layout.getCoverage()
    }

    return CirSeries(
        times, hUniform(times, rate, p), HUniform(times, rate, p), HUniformInf(rate, p), provenance
    )


def cirMfAp(times, layout, p, tx, n_max=100, root_tol=1e-10, spec=None, capacitance=None):
    """CIR of a membrane fusion TX and a patchy RX.

    Raises AccuracyError if N_max modes cannot resolve the release to the
    relative tolerance of `spec`.
    """
    p.checkFusionGeometry(tx.getTxRadius())
    spec = spec if spec else QuadratureSpec()
    capacitance = capacitance if capacitance else capacitanceFor(layout)
    rate = effectiveRate(capacitance, p.getDiffusion(), p.getRxRadius()).getRate()
    profile = releaseProfile(tx, n_max, root_tol)
    accuracy = profile.checkAccuracy(spec.getRelTol())
    times = np.asarray(times, dtype=float)
    tx_radius = tx.getTxRadius()

    hit, hit_ok = _hitSeries(times, rate, p, profile, spec)
    cumulative, cum_ok = _modeSeries(times, lambda tau: HShell(tau, rate, p, tx_radius), profile, spec)

    provenance = {
        "source": Provenance.Analytic.value,
        "model": "MTAR",
        "effective_rate": rate,
        "capacitance": capacitance.getValue(),
        "capacitance_formula": capacitance.getFormula().value,
        "patches": layout.getPatchCount(),
        "coverage": layout.getCoverage(),
        "n_max": profile.getCount(),
        "tail_mass": profile.getTailMass(),
        "onset_time": profile.getOnsetTime(),
        "release_accuracy": accuracy,
        "max_root_residual": profile.getEigenvalues().getMaxResidual(),
        "quadrature": spec.toDict(),
        "quadrature_converged": bool(hit_ok and cum_ok)
    }

    return CirSeries(times, hit, cumulative, HMfInf(rate, p, tx_radius), provenance)


def cirPtfr(times, p, molecules=None):
    """CIR of a point TX and a fully absorbing RX, as fractions."""
    times = np.asarray(times, dtype=float)
    provenance = {"source": Provenance.Analytic.value, "model": "PTFR"}
    if molecules is not None:
        provenance["molecules"] = int(molecules)

    return CirSeries(times, hAbsorbing(times, p), HAbsorbing(times, p), HAbsorbingInf(p), provenance)
