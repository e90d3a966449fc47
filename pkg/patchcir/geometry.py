# vim: ts=4 et sw=4 sts=4 :

# absorbing patch layouts on the RX sphere: explicit, Fibonacci lattice,
# random and region restricted placements plus their text serialization.

import logging
import math

import numpy as np

from patchcir.types import LayoutError
from patchcir.utils import sphericalToUnit

logger = logging.getLogger("geometry")

# beyond this coverage the homogenized formulas drift away from simulation
COVERAGE_VALIDITY_LIMIT = 0.2

GOLDEN_RATIO = (1 + math.sqrt(5)) / 2

# the polar band quoted for the region experiment, in radians
DOCUMENTED_REGION = (2.812, 3.471)

LAYOUT_SCHEMA = "patch.cir layout v1"


class Ap:
    """A single absorbing patch: a disc of radius `radius` centered at the
    polar angle `theta` and azimuth `phi` on the RX surface."""

    def __init__(self, theta, phi, radius):
        self.m_theta = float(theta)
        self.m_phi = float(phi)
        self.m_radius = float(radius)

    def getTheta(self):
        return self.m_theta

    def getPhi(self):
        return self.m_phi

    def getRadius(self):
        return self.m_radius

    def getUnitVector(self):
        return sphericalToUnit(self.m_theta, self.m_phi)

    def __repr__(self):
        return "Ap(theta={:.6f}, phi={:.6f}, a={:.6f})".format(self.m_theta, self.m_phi, self.m_radius)


class ApLayout:
    """An immutable, validated set of non-overlapping patches."""

    def __init__(self, rx_radius, patches):
        self.m_rx_radius = float(rx_radius)
        self.m_patches = tuple(patches)

        if not self.m_rx_radius > 0:
            raise LayoutError("RX radius must be positive")
        if not self.m_patches:
            raise LayoutError("a layout needs at least one patch")

        for idx, ap in enumerate(self.m_patches):
            self._checkPatch(idx, ap)

        self.m_radii = np.array([ap.getRadius() for ap in self.m_patches])
        self.m_units = np.array([ap.getUnitVector() for ap in self.m_patches])
        self.m_centers = self.m_units * self.m_rx_radius

        self._checkOverlap()

        self.m_coverage = float(np.sum(self.m_radii ** 2) / (4 * self.m_rx_radius ** 2))

        if self.m_coverage > COVERAGE_VALIDITY_LIMIT:
            logger.warning(
                "coverage {:.3f} exceeds {} where the homogenized CIR loses accuracy".format(
                    self.m_coverage, COVERAGE_VALIDITY_LIMIT
                )
            )

    def _checkPatch(self, idx, ap):
        if not 0 <= ap.getTheta() <= math.pi:
            raise LayoutError("patch {}: polar angle {} outside [0, pi]".format(idx, ap.getTheta()))
        if not 0 <= ap.getPhi() < 2 * math.pi:
            raise LayoutError("patch {}: azimuth {} outside [0, 2pi)".format(idx, ap.getPhi()))
        if not 0 < ap.getRadius() < self.m_rx_radius:
            raise LayoutError("patch {}: radius {} um outside (0, r_R)".format(idx, ap.getRadius()))

    def _checkOverlap(self):
        if len(self.m_patches) < 2:
            return

        dist = pairwiseDistances(self.m_centers)
        limit = self.m_radii[:, None] + self.m_radii[None, :]
        upper = np.triu(np.ones(dist.shape, dtype=bool), k=1)
        bad = np.argwhere(upper & (dist < limit))

        if len(bad):
            i, j = (int(v) for v in bad[0])
            raise LayoutError(
                "patches {} and {} overlap: center distance {:.4f} um < {:.4f} um".format(
                    i, j, dist[i, j], limit[i, j]
                ),
                pair=(i, j)
            )

    def getRxRadius(self):
        return self.m_rx_radius

    def getPatches(self):
        return self.m_patches

    def getPatchCount(self):
        return len(self.m_patches)

    def getRadii(self):
        return self.m_radii

    def getCenters(self):
        """Patch center points in um, shape (N_p, 3)."""
        return self.m_centers

    def getUnitVectors(self):
        """Patch centers normalized to the unit sphere."""
        return self.m_units

    def getCoverage(self):
        return self.m_coverage

    def hasIdenticalRadii(self):
        return bool(np.all(self.m_radii == self.m_radii[0]))

    def findPatches(self, points):
        """Maps points on the RX surface to the index of the patch that
        contains them or -1.

        :param points: array of shape (M, 3) in um.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        ret = np.full(len(points), -1, dtype=np.int64)
        if not len(points):
            return ret

        dist = np.linalg.norm(points[:, None, :] - self.m_centers[None, :, :], axis=2)
        inside = dist <= self.m_radii[None, :]
        hit = inside.any(axis=1)
        ret[hit] = np.argmax(inside[hit], axis=1)
        return ret

    def permuted(self, order):
        return ApLayout(self.m_rx_radius, [self.m_patches[i] for i in order])

    def __len__(self):
        return len(self.m_patches)

    def __iter__(self):
        return iter(self.m_patches)


def pairwiseDistances(points):
    diff = points[:, None, :] - points[None, :, :]
    return np.linalg.norm(diff, axis=2)


def _wrapAzimuth(phi):
    phi = np.mod(phi, 2 * math.pi)
    phi[phi >= 2 * math.pi] = 0.0
    return phi


def _patchRadii(rx_radius, patch_count, coverage, coverages):
    if coverages is None:
        if not coverage > 0:
            raise LayoutError("coverage must be positive")
        return np.full(patch_count, 2 * rx_radius * math.sqrt(coverage / patch_count))

    coverages = np.asarray(coverages, dtype=float)
    if len(coverages) != patch_count:
        raise LayoutError("expected {} per-patch coverages, got {}".format(patch_count, len(coverages)))
    if np.any(coverages <= 0):
        raise LayoutError("per-patch coverages must be positive")
    return 2 * rx_radius * np.sqrt(coverages)


def _checkCount(patch_count):
    if int(patch_count) < 1:
        raise LayoutError("at least one patch is required")
    return int(patch_count)


def layoutFibonacci(rx_radius, patch_count, coverage, coverages=None):
    """Evenly spreads equal patches over the sphere on a Fibonacci lattice.

    Patch i (1-based) sits at theta_i = pi/2 - asin(2(i - B - 1)/N_p) and
    phi_i = 4 pi (i - B - 1)/(1 + sqrt 5) mod 2pi with B = (N_p - 1)/2. Odd
    patch counts make B integral, even ones are accepted as well.

    :param coverages: optional per-patch area fractions replacing the equal
                      split of `coverage`.
    """
    count = _checkCount(patch_count)
    idx = np.arange(1, count + 1, dtype=float)
    offset = idx - (count - 1) / 2 - 1

    theta = math.pi / 2 - np.arcsin(2 * offset / count)
    phi = _wrapAzimuth(4 * math.pi * offset / (1 + math.sqrt(5)))
    radii = _patchRadii(rx_radius, count, coverage, coverages)

    patches = [Ap(t, p, a) for t, p, a in zip(theta, phi, radii)]
    return ApLayout(rx_radius, patches)


def layoutRandom(rx_radius, patch_count, coverage, seed, coverages=None, max_attempts=10000):
    """Places patches uniformly at random (cos theta and phi uniform),
    rejecting candidates that overlap patches placed before."""
    count = _checkCount(patch_count)
    radii = _patchRadii(rx_radius, count, coverage, coverages)
    rng = np.random.default_rng(seed)

    centers = []
    patches = []

    for idx, radius in enumerate(radii):
        for _ in range(max_attempts):
            cos_theta = rng.uniform(-1.0, 1.0)
            phi = rng.uniform(0.0, 2 * math.pi)
            theta = math.acos(cos_theta)
            center = sphericalToUnit(theta, phi) * rx_radius

            if centers:
                dist = np.linalg.norm(np.array(centers) - center, axis=1)
                if np.any(dist < radii[:idx] + radius):
                    continue

            centers.append(center)
            patches.append(Ap(theta, phi, radius))
            break
        else:
            raise LayoutError(
                "no room for patch {} after {} attempts; use a smaller coverage or fewer patches".format(
                    idx, max_attempts
                )
            )

    return ApLayout(rx_radius, patches)


def _foldPolar(theta):
    # angles beyond the poles continue over them
    if theta > math.pi:
        return 2 * math.pi - theta
    if theta < 0:
        return -theta
    return theta


def regionCosInterval(theta_range):
    """Returns the (z_lo, z_hi) interval of cos(theta) covered by a polar
    angle band.

    Bounds beyond [0, pi] are folded over the pole they cross, so the band
    then extends up to that pole.
    """
    lo, hi = sorted(float(v) for v in theta_range)

    if hi > math.pi:
        lo = min(lo, _foldPolar(hi))
        hi = math.pi
    if lo < 0:
        hi = max(hi, _foldPolar(lo))
        lo = 0.0

    return math.cos(hi), math.cos(lo)


def regionFraction(theta_range, phi_range=(0, 2 * math.pi)):
    """Fraction of the sphere surface inside the region."""
    z_lo, z_hi = regionCosInterval(theta_range)
    span = min(phi_range[1] - phi_range[0], 2 * math.pi)
    return (z_hi - z_lo) / 2 * span / (2 * math.pi)


def regionForFraction(fraction):
    """A polar cap around the south pole holding `fraction` of the surface."""
    if not 0 < fraction <= 1:
        raise LayoutError("region fraction must be in (0, 1]")
    return (math.acos(-1 + 2 * fraction), math.pi)


def layoutRegion(rx_radius, patch_count, coverage, theta_range=(0, math.pi),
                 phi_range=(0, 2 * math.pi), coverages=None):
    """Evenly spreads patches inside an angular region.

    A Fibonacci lattice is remapped onto the region's cos(theta) interval
    and azimuth span; only the patch centers are required to lie inside.
    """
    count = _checkCount(patch_count)
    phi_lo, phi_hi = (float(v) for v in phi_range)
    span = phi_hi - phi_lo

    if not 0 < span <= 2 * math.pi:
        raise LayoutError("azimuth range {} is empty or exceeds 2pi".format(phi_range))

    z_lo, z_hi = regionCosInterval(theta_range)
    fraction = regionFraction(theta_range, phi_range)
    radii = _patchRadii(rx_radius, count, coverage, coverages)
    requested = float(np.sum(radii ** 2) / (4 * rx_radius ** 2))

    if fraction < requested:
        raise LayoutError(
            "region holds {:.4f} of the surface, less than the coverage {:.4f}".format(fraction, requested)
        )

    idx = np.arange(1, count + 1, dtype=float)
    offset = idx - (count - 1) / 2 - 1

    z = z_lo + (z_hi - z_lo) * (2 * idx - 1) / (2 * count)
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    frac = np.mod(2 * offset / (1 + math.sqrt(5)), 1.0)
    phi = _wrapAzimuth(phi_lo + span * frac)

    patches = [Ap(t, p, a) for t, p, a in zip(theta, phi, radii)]
    return ApLayout(rx_radius, patches)


def layoutExplicit(rx_radius, patches):
    """Builds a layout from (theta, phi, radius) tuples."""
    return ApLayout(rx_radius, [Ap(*spec) for spec in patches])


def saveLayout(layout, path):
    """Writes one patch per line with theta, phi in rad and radius in um.
    Values are written with repr() so loading restores them exactly."""
    with open(path, 'w') as fd:
        fd.write("# {} rx_radius_um={!r}\n".format(LAYOUT_SCHEMA, layout.getRxRadius()))
        fd.write("theta_rad,phi_rad,radius_um\n")
        for ap in layout:
            fd.write("{!r},{!r},{!r}\n".format(ap.getTheta(), ap.getPhi(), ap.getRadius()))


def loadLayout(path):
    rx_radius = None
    specs = []

    with open(path, 'r') as fd:
        for line in fd:
            line = line.strip()
            if not line:
                continue
            if line.startswith('#'):
                for part in line[1:].split():
                    if part.startswith("rx_radius_um="):
                        rx_radius = float(part.split('=', 1)[1])
                continue
            if line.startswith("theta_rad"):
                continue
            try:
                theta, phi, radius = (float(v) for v in line.split(','))
            except ValueError:
                raise LayoutError("{}: malformed patch record '{}'".format(path, line))
            specs.append((theta, phi, radius))

    if rx_radius is None:
        raise LayoutError("{}: missing rx_radius_um header".format(path))

    return layoutExplicit(rx_radius, specs)
