# vim: ts=4 et sw=4 sts=4 :

import hashlib
import math

import numpy as np


def sphericalToUnit(theta, phi):
    """Unit vector for polar angle theta and azimuth phi."""
    sin_theta = math.sin(theta)
    return np.array([sin_theta * math.cos(phi), sin_theta * math.sin(phi), math.cos(theta)])


def timeGrid(t_min, t_max, points, spacing="log"):
    """Experiment time grid in seconds; logarithmic spacing resolves the
    early CIR peak."""
    if not 0 < t_min < t_max:
        raise ValueError("time grid needs 0 < t_min < t_max")
    if int(points) < 2:
        raise ValueError("time grid needs at least two points")

    if spacing == "log":
        return np.geomspace(t_min, t_max, int(points))
    elif spacing == "linear":
        return np.linspace(t_min, t_max, int(points))

    raise ValueError("unknown time grid spacing '{}'".format(spacing))


def fileChecksum(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as fd:
        for chunk in iter(lambda: fd.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


def parseFloatList(value):
    """Parses '0.05, 0.1,0.15' into a list of floats."""
    return [float(part) for part in value.split(',') if part.strip()]


def parseIntList(value):
    """Parses '1,3,5' or a range '1-11:2' into a list of ints."""
    ret = []
    for part in value.split(','):
        part = part.strip()
        if not part:
            continue
        if '-' in part[1:]:
            span, _, step = part.partition(':')
            lo, hi = span.split('-', 1)
            ret.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
        else:
            ret.append(int(part))
    return ret


def getExceptionContext(ex):
    import sys
    import traceback

    _, _, tb = sys.exc_info()
    if tb is None:
        return str(ex)
    fn, ln, _, _ = traceback.extract_tb(tb)[-1]
    return "{}:{}: {}".format(fn, ln, str(ex))
