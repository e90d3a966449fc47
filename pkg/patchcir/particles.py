# vim: ts=4 et sw=4 sts=4 :

# Brownian particle based simulation of point and membrane fusion TXs in
# front of a patchy (or fully absorbing) spherical RX centered at the origin.
#
# Every realization owns a counter based random stream derived from the
# configured seed. Random numbers are always drawn in fixed blocks for all
# entities, so the output does not depend on how realizations are grouped
# into batches or distributed over worker threads.

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from patchcir.types import CirSeries, Provenance, SimulationError
from patchcir.utils import sphericalToUnit

logger = logging.getLogger("particles")

# number of time steps drawn per random block
BLOCK_STEPS = 64
# realizations advanced together in one vectorized batch
BATCH_REALIZATIONS = 8


class SimConfig:

    PLACEMENTS = ("random", "fixed")

    def __init__(
            self, time_step=1e-4, horizon=5.0, realizations=200, particles=1000, seed=1,
            placement="random", tx_direction=(math.pi / 2, 0.0), vesicle_time_step=1e-5,
            workers=1, fully_absorbing=False
    ):
        self.m_time_step = float(time_step)
        self.m_horizon = float(horizon)
        self.m_realizations = int(realizations)
        self.m_particles = int(particles)
        self.m_seed = int(seed)
        self.m_placement = placement
        self.m_tx_direction = tuple(float(v) for v in tx_direction)
        self.m_vesicle_time_step = float(vesicle_time_step)
        self.m_workers = int(workers)
        self.m_fully_absorbing = bool(fully_absorbing)

        if not (self.m_time_step > 0 and self.m_vesicle_time_step > 0):
            raise SimulationError("time steps must be positive")
        if not self.m_horizon >= self.m_time_step:
            raise SimulationError("horizon {} s is shorter than one time step".format(horizon))
        if self.m_realizations < 1 or self.m_particles < 1:
            raise SimulationError("realizations and particles must be >= 1")
        if self.m_placement not in self.PLACEMENTS:
            raise SimulationError("unknown TX placement '{}'".format(placement))
        if self.m_workers < 1:
            raise SimulationError("workers must be >= 1")

    def getTimeStep(self):
        return self.m_time_step

    def getHorizon(self):
        return self.m_horizon

    def getRealizations(self):
        return self.m_realizations

    def getParticles(self):
        return self.m_particles

    def getSeed(self):
        return self.m_seed

    def getPlacement(self):
        return self.m_placement

    def getTxDirection(self):
        return self.m_tx_direction

    def getVesicleTimeStep(self):
        return self.m_vesicle_time_step

    def getWorkers(self):
        return self.m_workers

    def isFullyAbsorbing(self):
        return self.m_fully_absorbing

    def getStepCount(self):
        return int(math.ceil(self.m_horizon / self.m_time_step - 1e-9))

    def toDict(self):
        return {
            "time_step": self.m_time_step,
            "horizon": self.m_horizon,
            "realizations": self.m_realizations,
            "particles": self.m_particles,
            "seed": self.m_seed,
            "placement": self.m_placement,
            "tx_direction": list(self.m_tx_direction),
            "vesicle_time_step": self.m_vesicle_time_step,
            "workers": self.m_workers,
            "fully_absorbing": self.m_fully_absorbing
        }


class HitRecords:
    """Raw absorption events of a simulation run.

    The patch index is -1 for hits on a fully absorbing RX.
    """

    def __init__(self, times, patches, realizations, points, molecules, realization_count, horizon):
        self.m_times = np.asarray(times, dtype=float)
        self.m_patches = np.asarray(patches, dtype=np.int64)
        self.m_realizations = np.asarray(realizations, dtype=np.int64)
        self.m_points = np.asarray(points, dtype=float).reshape(-1, 3)
        self.m_molecules = int(molecules)
        self.m_realization_count = int(realization_count)
        self.m_horizon = float(horizon)

    def getTimes(self):
        return self.m_times

    def getPatches(self):
        return self.m_patches

    def getRealizations(self):
        return self.m_realizations

    def getPoints(self):
        """Hit coordinates on the RX surface in um."""
        return self.m_points

    def getMoleculesPerRealization(self):
        return self.m_molecules

    def getRealizationCount(self):
        return self.m_realization_count

    def getHorizon(self):
        return self.m_horizon

    def getCount(self):
        return len(self.m_times)

    def getAbsorbedFraction(self):
        return self.getCount() / (self.m_molecules * self.m_realization_count)

    def binEdges(self, bins):
        return np.linspace(0.0, self.m_horizon, int(bins) + 1)

    def perRealizationCumulative(self, times):
        """Absorbed fraction by each of `times`, per realization; shape
        (realizations, len(times))."""
        times = np.asarray(times, dtype=float)
        ret = np.zeros((self.m_realization_count, len(times)))
        for idx in range(self.m_realization_count):
            hits = np.sort(self.m_times[self.m_realizations == idx])
            ret[idx] = np.searchsorted(hits, times, side='right')
        return ret / self.m_molecules

    def perRealizationRate(self, bins):
        """Hit rate per bin and realization; shape (realizations, bins)."""
        edges = self.binEdges(bins)
        width = np.diff(edges)
        ret = np.zeros((self.m_realization_count, len(width)))
        for idx in range(self.m_realization_count):
            counts, _ = np.histogram(self.m_times[self.m_realizations == idx], bins=edges)
            ret[idx] = counts / (self.m_molecules * width)
        return ret

    def toCir(self, bins, provenance=None):
        """Histograms the hits into a CirSeries sampled at the bin
        centers."""
        edges = self.binEdges(bins)
        centers = 0.5 * (edges[1:] + edges[:-1])
        total = self.m_molecules * self.m_realization_count

        counts, _ = np.histogram(self.m_times, bins=edges)
        rate = counts / (total * np.diff(edges))
        cumulative = np.searchsorted(np.sort(self.m_times), centers, side='right') / total

        prov = {"source": Provenance.Simulated.value}
        prov.update(provenance if provenance else {})
        prov["bins"] = int(bins)
        return CirSeries(centers, rate, cumulative, None, prov)


class CiEstimate:

    def __init__(self, times, mean, stderr, method):
        self.m_times = np.asarray(times)
        self.m_mean = np.asarray(mean)
        self.m_stderr = np.asarray(stderr)
        self.m_method = method

    def getTimes(self):
        return self.m_times

    def getMean(self):
        return self.m_mean

    def getStdErr(self):
        return self.m_stderr

    def getMethod(self):
        return self.m_method


def estimateCi(records, bins=None, times=None, method="normal", resamples=1000, seed=0):
    """Per-bin mean and standard error over realizations.

    With `times` the cumulative absorbed fraction at those times is
    estimated, otherwise the binned hitting rate.

    :param method: "normal" for the sample standard error, "bootstrap" for
                   a seeded resampling of realizations.
    """
    if records.getRealizationCount() < 2:
        raise SimulationError("confidence estimates need at least two realizations")

    if times is not None:
        samples = records.perRealizationCumulative(times)
        at = np.asarray(times, dtype=float)
    else:
        bins = int(bins) if bins else 100
        samples = records.perRealizationRate(bins)
        edges = records.binEdges(bins)
        at = 0.5 * (edges[1:] + edges[:-1])

    count = len(samples)
    mean = samples.mean(axis=0)

    if method == "normal":
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(count)
    elif method == "bootstrap":
        rng = np.random.default_rng(seed)
        picks = rng.integers(0, count, size=(int(resamples), count))
        means = samples[picks].mean(axis=1)
        stderr = means.std(axis=0, ddof=1)
    else:
        raise SimulationError("unknown confidence method '{}'".format(method))

    return CiEstimate(at, mean, stderr, method)


class SimulationResult:

    def __init__(self, cir_bins, records, directions, release_times=None, provenance=None):
        self.m_records = records
        self.m_directions = np.asarray(directions)
        self.m_release_times = None if release_times is None else np.asarray(release_times)
        self.m_provenance = provenance if provenance else {}
        self.m_cir = records.toCir(cir_bins, self.m_provenance)

    def getCir(self):
        return self.m_cir

    def getRecords(self):
        return self.m_records

    def getTxDirections(self):
        """Unit vectors of the TX center per realization."""
        return self.m_directions

    def getReleaseTimes(self):
        """Vesicle fusion times of all realizations (MF TX only)."""
        return self.m_release_times


def _streams(seed, first, count):
    """Returns per realization (placement, vesicle, motion, decay)
    generators for realizations [first, first + count)."""
    children = np.random.SeedSequence(seed).spawn(first + count)[first:]
    return [
        [np.random.Generator(np.random.Philox(ss)) for ss in child.spawn(4)]
        for child in children
    ]


def _entrySegment(start, end, radius):
    """Point where the segment start -> end first crosses the sphere of
    `radius` from outside, projected onto the sphere."""
    delta = end - start
    a = np.einsum('ij,ij->i', delta, delta)
    b = 2 * np.einsum('ij,ij->i', start, delta)
    c = np.einsum('ij,ij->i', start, start) - radius ** 2
    disc = np.sqrt(np.maximum(b ** 2 - 4 * a * c, 0.0))
    frac = np.clip((-b - disc) / (2 * a), 0.0, 1.0)
    point = start + frac[:, None] * delta
    return point * (radius / np.linalg.norm(point, axis=1))[:, None]


def _exitSegment(start, end, radius):
    """Point where the segment start -> end leaves the sphere of `radius`
    from inside, projected onto the sphere."""
    delta = end - start
    a = np.einsum('ij,ij->i', delta, delta)
    b = 2 * np.einsum('ij,ij->i', start, delta)
    c = np.einsum('ij,ij->i', start, start) - radius ** 2
    disc = np.sqrt(np.maximum(b ** 2 - 4 * a * c, 0.0))
    frac = np.clip((-b + disc) / (2 * a), 0.0, 1.0)
    point = start + frac[:, None] * delta
    return point * (radius / np.linalg.norm(point, axis=1))[:, None]


class ParticleSimulator:
    """Runs the realizations of one experiment.

    :param tx: None for a point TX releasing cfg.getParticles() molecules,
               otherwise a FusionTx.
    :param layout: the patch layout; may be None if the configuration asks
                   for a fully absorbing RX.
    """

    def __init__(self, params, layout, cfg, tx=None):
        self.m_params = params
        self.m_layout = layout
        self.m_cfg = cfg
        self.m_tx = tx

        if layout is None and not cfg.isFullyAbsorbing():
            raise SimulationError("a patch layout is required unless the RX is fully absorbing")
        if layout is not None and layout.getRxRadius() != params.getRxRadius():
            raise SimulationError("layout RX radius differs from the channel RX radius")
        if tx is not None:
            params.checkFusionGeometry(tx.getTxRadius())

    def getMoleculesPerRealization(self):
        if self.m_tx is None:
            return self.m_cfg.getParticles()
        return self.m_tx.getMoleculeCount()

    def run(self, bins=100):
        cfg = self.m_cfg
        total = cfg.getRealizations()
        batches = [
            (first, min(BATCH_REALIZATIONS, total - first))
            for first in range(0, total, BATCH_REALIZATIONS)
        ]

        logger.info("simulating {} realizations x {} molecules, dt = {} s, {} workers".format(
            total, self.getMoleculesPerRealization(), cfg.getTimeStep(), cfg.getWorkers())
        )

        if cfg.getWorkers() == 1:
            parts = [self._runBatch(first, count) for first, count in batches]
        else:
            with ThreadPoolExecutor(max_workers=cfg.getWorkers()) as pool:
                parts = list(pool.map(lambda b: self._runBatch(*b), batches))

        times = np.concatenate([p["times"] for p in parts])
        patches = np.concatenate([p["patches"] for p in parts])
        owners = np.concatenate([p["realizations"] for p in parts])
        points = np.concatenate([p["points"] for p in parts])
        directions = np.concatenate([p["directions"] for p in parts])
        release = None
        if self.m_tx is not None:
            release = np.concatenate([p["release"] for p in parts])

        records = HitRecords(
            times, patches, owners, points, self.getMoleculesPerRealization(), total, cfg.getHorizon()
        )

        provenance = {
            "model": "PTFR" if cfg.isFullyAbsorbing() else ("PTAR" if self.m_tx is None else "MTAR"),
            "seed": cfg.getSeed(),
            "realizations": total,
            "time_step": cfg.getTimeStep()
        }

        logger.info("absorbed fraction {:.4f}".format(records.getAbsorbedFraction()))
        return SimulationResult(bins, records, directions, release, provenance)

    def _txDirection(self, rng):
        if self.m_cfg.getPlacement() == "fixed":
            return sphericalToUnit(*self.m_cfg.getTxDirection())
        vec = rng.standard_normal(3)
        return vec / np.linalg.norm(vec)

    def _runBatch(self, first, count):
        streams = _streams(self.m_cfg.getSeed(), first, count)
        distance = self.m_params.getDistance()
        dt = self.m_cfg.getTimeStep()

        directions = np.array([self._txDirection(s[0]) for s in streams])
        starts, activations, releases = [], [], []

        for idx, stream in enumerate(streams):
            center = directions[idx] * distance
            if self.m_tx is None:
                molecules = self.m_cfg.getParticles()
                starts.append(np.tile(center, (molecules, 1)))
                activations.append(np.zeros(molecules, dtype=np.int64))
                continue

            fused, times, points = self._releaseVesicles(stream[1])
            releases.append(times[fused])
            eta = self.m_tx.getMoleculesPerVesicle()
            # vesicles that never fuse keep their molecules until the horizon
            steps = np.full(len(times), np.iinfo(np.int64).max, dtype=np.int64)
            steps[fused] = np.ceil(times[fused] / dt - 1e-9).astype(np.int64)
            starts.append(np.repeat(center + points, eta, axis=0))
            activations.append(np.repeat(steps, eta))

        ret = self._runMolecules(first, streams, starts, activations)
        ret["directions"] = directions
        ret["release"] = np.concatenate(releases) if releases else np.zeros(0)

        logger.debug("batch of realizations {}..{} done, {} hits".format(
            first, first + count - 1, len(ret["times"]))
        )
        return ret

    def _releaseVesicles(self, rng):
        """Diffuses the vesicles of one realization inside the TX until
        they fuse with the membrane.

        :return: (fused mask, fusion times, fusion points relative to the
                 TX center)
        """
        tx = self.m_tx
        count = tx.getVesicleCount()
        radius = tx.getTxRadius()
        dt = self.m_cfg.getVesicleTimeStep()
        sigma = math.sqrt(2 * tx.getVesicleDiffusion() * dt)
        fuse_prob = tx.getFusionProbability(dt)
        total_steps = int(math.ceil(self.m_cfg.getHorizon() / dt - 1e-9))

        pos = np.zeros((count, 3))
        fused = np.zeros(count, dtype=bool)
        times = np.full(count, np.inf)
        points = np.zeros((count, 3))

        for block in range(0, total_steps, BLOCK_STEPS):
            steps = min(BLOCK_STEPS, total_steps - block)
            noise = rng.standard_normal((steps, count, 3)) * sigma
            trials = rng.random((steps, count))

            for j in range(steps):
                live = ~fused
                end = pos + noise[j]
                out = live & (np.einsum('ij,ij->i', end, end) >= radius ** 2)
                if np.any(out):
                    crossing = _exitSegment(pos[out], end[out], radius)
                    fuse = trials[j][out] < fuse_prob
                    idx = np.nonzero(out)[0]
                    done = idx[fuse]
                    fused[done] = True
                    times[done] = (block + j + 1) * dt
                    points[done] = crossing[fuse]
                    # reflected vesicles stay where the step started
                    end[idx[~fuse]] = pos[idx[~fuse]]
                pos[live] = end[live]

            if fused.all():
                break

        return fused, times, points

    def _runMolecules(self, first, streams, starts, activations):
        params = self.m_params
        cfg = self.m_cfg
        rx_radius = params.getRxRadius()
        dt = cfg.getTimeStep()
        sigma = math.sqrt(2 * params.getDiffusion() * dt)
        decay_prob = -math.expm1(-params.getDegradation() * dt)
        total_steps = cfg.getStepCount()

        sizes = [len(s) for s in starts]
        owner = np.repeat(np.arange(first, first + len(starts)), sizes)
        pos = np.concatenate(starts)
        activation = np.concatenate(activations)
        alive = np.ones(len(pos), dtype=bool)

        hit_times, hit_patches, hit_owner, hit_points = [], [], [], []

        for block in range(0, total_steps, BLOCK_STEPS):
            steps = min(BLOCK_STEPS, total_steps - block)
            noise = np.concatenate(
                [s[2].standard_normal((steps, size, 3)) for s, size in zip(streams, sizes)], axis=1
            ) * sigma
            decay = None
            if decay_prob > 0:
                decay = np.concatenate(
                    [s[3].random((steps, size)) for s, size in zip(streams, sizes)], axis=1
                )

            for j in range(steps):
                step = block + j
                moving = alive & (activation <= step)
                if decay is not None:
                    gone = moving & (decay[j] < decay_prob)
                    alive[gone] = False
                    moving &= ~gone
                if not np.any(moving):
                    continue

                idx = np.nonzero(moving)[0]
                start = pos[idx]
                end = start + noise[j][idx]
                inside = np.einsum('ij,ij->i', end, end) < rx_radius ** 2

                if np.any(inside):
                    entered = idx[inside]
                    crossing = _entrySegment(start[inside], end[inside], rx_radius)
                    if cfg.isFullyAbsorbing():
                        patches = np.full(len(entered), -1, dtype=np.int64)
                        absorbed = np.ones(len(entered), dtype=bool)
                    else:
                        patches = self.m_layout.findPatches(crossing)
                        absorbed = patches >= 0

                    caught = entered[absorbed]
                    alive[caught] = False
                    hit_times.append(np.full(len(caught), (step + 1) * dt))
                    hit_patches.append(patches[absorbed])
                    hit_owner.append(owner[caught])
                    hit_points.append(crossing[absorbed])

                    end[inside] = start[inside]

                pos[idx] = end

            if not np.any(alive):
                break

        if hit_times:
            return {
                "times": np.concatenate(hit_times),
                "patches": np.concatenate(hit_patches),
                "realizations": np.concatenate(hit_owner),
                "points": np.concatenate(hit_points)
            }

        return {
            "times": np.zeros(0),
            "patches": np.zeros(0, dtype=np.int64),
            "realizations": np.zeros(0, dtype=np.int64),
            "points": np.zeros((0, 3))
        }


def simulatePointTx(params, layout, cfg, bins=100):
    return ParticleSimulator(params, layout, cfg).run(bins)


def simulateMfTx(params, layout, tx, cfg, bins=100):
    return ParticleSimulator(params, layout, cfg, tx).run(bins)
