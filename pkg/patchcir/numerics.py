# vim: ts=4 et sw=4 sts=4 :

# numerically stable special functions, fusion eigenvalue root finding and
# adaptive quadrature used by the closed-form channel expressions.

import functools
import logging
import math

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.special

from patchcir.types import NumericsError, ParameterError, SolverError

logger = logging.getLogger("numerics")


def _finiteArray(*values):
    arrays = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in values])
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NumericsError("non-finite argument passed to special function")
    return arrays


def _unwrap(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def erfcStable(x):
    """Complementary error function for scalars or arrays.

    Large positive arguments underflow to 0, large negative ones saturate
    at 2.
    """
    x, = _finiteArray(x)
    return _unwrap(scipy.special.erfc(x))


def expErfc(a, b):
    """Evaluates exp(a) * erfc(b) without intermediate overflow.

    For b > 0 the product is rewritten as exp(a - b^2) * erfcx(b) using the
    scaled complementary error function.
    """
    a, b = _finiteArray(a, b)
    ret = np.empty(a.shape)

    pos = b > 0
    ret[pos] = np.exp(a[pos] - b[pos] ** 2) * scipy.special.erfcx(b[pos])
    neg = ~pos
    ret[neg] = np.exp(a[neg]) * scipy.special.erfc(b[neg])

    return _unwrap(ret)


class QuadratureSpec:
    """Tolerances for the adaptive quadrature."""

    def __init__(self, rel_tol=1e-8, abs_tol=1e-13, max_subdivisions=200):
        if not (rel_tol > 0 and abs_tol > 0):
            raise ParameterError("quadrature tolerances must be positive")
        if int(max_subdivisions) < 1:
            raise ParameterError("max_subdivisions must be >= 1")
        self.m_rel_tol = float(rel_tol)
        self.m_abs_tol = float(abs_tol)
        self.m_max_subdivisions = int(max_subdivisions)

    def getRelTol(self):
        return self.m_rel_tol

    def getAbsTol(self):
        return self.m_abs_tol

    def getMaxSubdivisions(self):
        return self.m_max_subdivisions

    def toDict(self):
        return {
            "rel_tol": self.m_rel_tol,
            "abs_tol": self.m_abs_tol,
            "max_subdivisions": self.m_max_subdivisions
        }


class QuadratureResult:

    def __init__(self, value, error, converged):
        self.m_value = value
        self.m_error = error
        self.m_converged = converged

    def getValue(self):
        return self.m_value

    def getError(self):
        """The absolute error estimate reported by the integrator."""
        return self.m_error

    def isConverged(self):
        return self.m_converged

    def __float__(self):
        return float(self.m_value)


def integrate(func, lower, upper, spec=None, points=None):
    """Adaptively integrates the scalar function `func` over [lower, upper].

    :param points: optional interior break points where the integrand
                   changes character (e.g. a sharply decaying exponential).
    :return: a QuadratureResult. If the subdivision limit is exhausted the
             best estimate is returned with isConverged() == False instead of
             raising.
    """
    spec = spec if spec else QuadratureSpec()

    if upper == lower:
        return QuadratureResult(0.0, 0.0, True)

    if points is not None:
        points = [p for p in points if lower < p < upper]
        if not points:
            points = None

    # with full_output the call returns a 4-tuple carrying a message
    # instead of emitting an IntegrationWarning
    ret = scipy.integrate.quad(
        func, lower, upper,
        epsabs=spec.getAbsTol(),
        epsrel=spec.getRelTol(),
        limit=spec.getMaxSubdivisions(),
        points=points,
        full_output=1
    )

    value, error = ret[0], ret[1]
    converged = len(ret) == 3

    if not converged:
        logger.debug("quadrature over [{}, {}] not converged: {}".format(lower, upper, ret[3]))

    return QuadratureResult(value, error, converged)


def integrateVector(func, lower, upper, spec=None, points=None):
    """Adaptively integrates the array valued function `func` over [lower,
    upper], refining on the largest component error.

    :return: a QuadratureResult whose value is an array shaped like the
             integrand's output.
    """
    spec = spec if spec else QuadratureSpec()

    if points is not None:
        points = sorted(p for p in set(points) if lower < p < upper)
        if not points:
            points = None

    if upper == lower:
        shape = np.shape(func(lower))
        return QuadratureResult(np.zeros(shape), 0.0, True)

    value, error, info = scipy.integrate.quad_vec(
        func, lower, upper,
        epsabs=spec.getAbsTol(),
        epsrel=spec.getRelTol(),
        norm='max',
        limit=spec.getMaxSubdivisions() * 50,
        points=points,
        full_output=True
    )

    if not info.success:
        logger.debug("vector quadrature over [{}, {}] not converged: {}".format(
            lower, upper, info.message)
        )

    return QuadratureResult(np.asarray(value), float(error), bool(info.success))


class EigenvalueSet:
    """The fusion eigenvalues lambda_n of the vesicle release problem."""

    def __init__(self, roots, residuals, tolerance):
        self.m_roots = np.asarray(roots, dtype=float)
        self.m_residuals = np.asarray(residuals, dtype=float)
        self.m_tolerance = tolerance

    def getRoots(self):
        return self.m_roots

    def getResiduals(self):
        return self.m_residuals

    def getCount(self):
        """The truncation count N_max."""
        return len(self.m_roots)

    def getTolerance(self):
        return self.m_tolerance

    def getMaxResidual(self):
        return float(np.max(self.m_residuals)) if len(self.m_residuals) else 0.0


def _robinFunction(x, ratio):
    # x * j0'(x) + ratio * j0(x): vanishes at the eigenvalues, equals
    # `ratio` at x = 0
    return np.cos(x) - (1.0 - ratio) * np.sinc(x / math.pi)


def fusionResidual(roots, tx_radius, vesicle_diffusion, fusion_rate):
    """|D_v lambda j0'(lambda r_T) + k_f j0(lambda r_T)| for each root."""
    x = np.asarray(roots) * tx_radius
    lhs = vesicle_diffusion * np.asarray(roots) * scipy.special.spherical_jn(0, x, derivative=True)
    rhs = fusion_rate * scipy.special.spherical_jn(0, x)
    return np.abs(lhs + rhs)


def solveEigenvalues(tx_radius, vesicle_diffusion, fusion_rate, n_max=100, tol=1e-10):
    """Solves -D_v lambda j0'(lambda r_T) = k_f j0(lambda r_T) for the first
    n_max positive roots.

    The n-th root lies in ((n-1) pi / r_T, n pi / r_T) and is refined there
    with Brent's method.
    """
    for label, val in (
        ("TX radius", tx_radius),
        ("vesicle diffusion coefficient", vesicle_diffusion),
        ("fusion rate", fusion_rate)
    ):
        if not val > 0:
            raise ParameterError("{} must be positive, got {}".format(label, val))

    if int(n_max) < 1:
        raise ParameterError("n_max must be >= 1")

    ratio = fusion_rate * tx_radius / vesicle_diffusion
    scaled = []

    for n in range(1, int(n_max) + 1):
        lo, hi = (n - 1) * math.pi, n * math.pi
        f_lo, f_hi = _robinFunction(lo, ratio), _robinFunction(hi, ratio)
        if not f_lo * f_hi < 0:
            raise SolverError(n, "eigenvalue bracket {} shows no sign change".format(n))

        x = scipy.optimize.brentq(
            _robinFunction, lo, hi, args=(ratio,),
            xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500
        )
        scaled.append(x)

    roots = np.array(scaled) / tx_radius
    residuals = fusionResidual(roots, tx_radius, vesicle_diffusion, fusion_rate)

    bad = np.nonzero(residuals > tol)[0]
    if len(bad):
        n = int(bad[0]) + 1
        raise SolverError(n, "eigenvalue {} residual {:.3e} above tolerance {:.1e}".format(
            n, residuals[bad[0]], tol)
        )

    logger.debug("solved {} fusion eigenvalues, max residual {:.2e}".format(
        len(roots), float(np.max(residuals)))
    )

    return EigenvalueSet(roots, residuals, tol)


@functools.lru_cache(maxsize=32)
def cachedEigenvalues(tx_radius, vesicle_diffusion, fusion_rate, n_max, tol):
    return solveEigenvalues(tx_radius, vesicle_diffusion, fusion_rate, n_max, tol)
