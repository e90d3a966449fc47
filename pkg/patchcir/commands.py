# vim: ts=4 et sw=4 sts=4 :

# the named experiments of the command line interface. Every handler writes
# its CSV tables and plot scripts below the output directory and registers
# them with the run manifest.

import logging
import os
from enum import Enum

import numpy as np

import patchcir.export as export
import patchcir.geometry as geometry
from patchcir import analytic, comms, homogenization
from patchcir.models import ChannelModel
from patchcir.particles import ParticleSimulator, estimateCi
from patchcir.terminal import printTable, printWarning
from patchcir.types import HomogenizationError, LayoutError, ModelTag


class Command(Enum):
    """All supported experiments and their command line labels."""
    Layout = "layout"
    Cir = "cir"
    Asymptotic = "asymptotic"
    CompareDistributions = "compare-distributions"
    Ber = "ber"
    Simulate = "simulate"


# the first format placeholder will receive the actual command name
USAGE = {
    Command.Layout: "{}: builds the configured patch layout, saves it and prints G_p, w_e and S",
    Command.Cir: "{}: writes h(t) and H(t) of the configured models, plus H(t) for each N_p of the sweep",
    Command.Asymptotic: "{}: expected asymptotic absorbed molecules versus coverage and N_p, delta H curves and an optional particle oracle",
    Command.CompareDistributions: "{}: compares even, random and region restricted patch placements by S and H",
    Command.Ber: "{}: average BER versus decision threshold and versus bit interval for the configured models",
    Command.Simulate: "{}: particle simulation of the configured setup with the analytic curve for comparison"
}


def getUsage(cmd):
    return USAGE[cmd].format(cmd.value)


class CommandRunner:
    """Executes experiments for a parsed ExperimentConfig."""

    def __init__(self, config, output_dir, manifest):
        self.m_config = config
        self.m_output_dir = output_dir
        self.m_manifest = manifest
        self.m_logger = logging.getLogger("commands")

    def _path(self, name):
        return os.path.join(self.m_output_dir, name)

    def _register(self, path):
        self.m_manifest.addOutput(path)
        return path

    def _writeTable(self, name, kind, columns, rows, metadata=None, plot=None):
        path = self._register(export.writeTable(self._path(name), kind, columns, rows, metadata))
        if plot:
            export.writePlotScript(path, **plot)
        return path

    def run(self, cmd):
        # call a member function _handle<Command>()
        camel = ''.join(part.capitalize() for part in cmd.value.split('-'))
        memfunc = "_handle{}".format(camel)
        handle_func = getattr(self, memfunc)

        self.m_logger.debug("Running command {} ({})".format(cmd.value, memfunc))
        os.makedirs(self.m_output_dir, exist_ok=True)
        ret = handle_func()
        self.m_logger.info("{} wrote {} files".format(cmd.value, len(self.m_manifest.getOutputs())))
        return ret

    def _models(self, tags=None, layout=None):
        conf = self.m_config
        params = conf.getChannelParams()
        layout = layout if layout else conf.getLayout()
        numerics = conf.getConfig()["numerics"]
        ret = []
        for tag in (tags if tags else conf.getConfig()["sweep"]["models"]):
            tx = conf.getFusionTx() if tag == ModelTag.MTAR else None
            ret.append(ChannelModel(
                tag, params, layout, tx, numerics["n_max"], numerics["root_tol"], conf.getQuadratureSpec()
            ))
        return ret

    def _moleculesFor(self, model):
        return model.getMoleculeCount(self.m_config.getConfig()["tx"]["molecules"])

    def _handleLayout(self):
        conf = self.m_config
        layout = conf.getLayout()
        params = conf.getChannelParams()

        path = self._register(self._path("layout.csv"))
        geometry.saveLayout(layout, path)

        cap = homogenization.capacitanceFor(layout)
        rate = homogenization.effectiveRate(cap, params.getDiffusion(), params.getRxRadius())
        summary = [
            ("patches", layout.getPatchCount()),
            ("coverage", layout.getCoverage()),
            ("capacitance_um", cap.getValue()),
            ("formula", cap.getFormula().value),
            ("effective_rate_um_per_s", rate.getRate()),
            ("metric_s", homogenization.layoutMetricS(layout)),
            ("asymptotic_fraction", analytic.HUniformInf(rate.getRate(), params))
        ]
        if not layout.hasIdenticalRadii():
            summary.append(("permutation_spread", homogenization.permutationSpread(layout)))

        self._writeTable("layout_summary.csv", "summary", ("quantity", "value"), summary)
        printTable(("quantity", "value"), summary)
        return summary

    def _handleCir(self):
        conf = self.m_config
        times = conf.getTimeGrid()
        params = conf.getChannelParams()
        logx = conf.getConfig()["grid"]["spacing"] == "log"

        for model in self._models():
            series = model.cir(times)
            name = "cir_{}.csv".format(model.getTag().value.lower())
            path = self._register(export.writeCir(
                self._path(name), series, {"molecules": self._moleculesFor(model)}
            ))
            export.writePlotScript(
                path, "{} CIR".format(model.getTag().value), "t [s]", "h(t) [1/s]",
                [(1, 2, "h(t)")], logx=logx
            )
            peak_time, peak_rate = series.getPeak()
            self.m_logger.info("{}: peak {:.5g} 1/s at {:.4g} s, H_inf = {:.5g}".format(
                model.getTag().value, peak_rate, peak_time, series.getAsymptote())
            )

        counts = conf.getConfig()["sweep"]["patch_counts"]
        coverage = conf.getConfig()["layout"]["coverage"]
        columns, curves = ["time_s"], [times]
        for count in counts:
            try:
                layout = geometry.layoutFibonacci(params.getRxRadius(), count, coverage)
                series = analytic.cirPointAp(times, layout, params)
            except (LayoutError, HomogenizationError) as e:
                printWarning("skipping N_p = {}: {}".format(count, e))
                continue
            columns.append("cumulative_np{}".format(count))
            curves.append(series.getCumulative())

        self._writeTable(
            "cir_ptar_patches.csv", "sweep", columns, list(zip(*curves)), {"coverage": coverage},
            plot={
                "title": "PTAR absorbed fraction, coverage {}".format(coverage),
                "xlabel": "t [s]", "ylabel": "H(t)",
                "series": [(1, i + 1, columns[i]) for i in range(1, len(columns))],
                "logx": logx
            }
        )

    def _effectiveRate(self, params, layout):
        cap = homogenization.capacitanceFor(layout)
        return homogenization.effectiveRate(cap, params.getDiffusion(), params.getRxRadius()).getRate()

    def _asymptoticRow(self, params, layout, molecules):
        return molecules * analytic.HUniformInf(self._effectiveRate(params, layout), params)

    def _oracleRow(self, params, layout, molecules):
        """Simulated absorbed molecules by the simulation horizon with their
        standard error, and the analytic value at the same time."""
        conf = self.m_config
        cfg = conf.getSimConfig()
        horizon = cfg.getHorizon()
        records = ParticleSimulator(params, layout, cfg).run().getRecords()
        method = conf.getConfig()["simulation"]["ci_method"]
        ci = estimateCi(records, times=[horizon], method=method, seed=cfg.getSeed())
        return (
            molecules * float(ci.getMean()[0]),
            molecules * float(ci.getStdErr()[0]),
            molecules * float(analytic.HUniform(horizon, self._effectiveRate(params, layout), params))
        )

    def _handleAsymptotic(self):
        conf = self.m_config
        params = conf.getChannelParams()
        sweep = conf.getConfig()["sweep"]
        molecules = conf.getConfig()["tx"]["molecules"]
        patches = conf.getConfig()["layout"]["patches"]
        absorbing = molecules * analytic.HAbsorbingInf(params)

        oracle = sweep["particle_oracle"]
        if oracle and conf.getSimConfig().isFullyAbsorbing():
            printWarning("particle oracle disabled, the simulation is configured fully absorbing")
            oracle = False
        elif oracle and conf.getSimConfig().getRealizations() < 2:
            printWarning("particle oracle disabled, standard errors need at least two realizations")
            oracle = False

        rows = []
        for coverage in sweep["coverages"]:
            try:
                layout = geometry.layoutFibonacci(params.getRxRadius(), patches, coverage)
                row = (coverage, self._asymptoticRow(params, layout, molecules), absorbing)
            except (LayoutError, HomogenizationError) as e:
                printWarning("skipping coverage {}: {}".format(coverage, e))
                continue
            if oracle:
                row += self._oracleRow(params, layout, molecules)
                self.m_logger.info("coverage {}: simulated {:.2f} +- {:.2f}, analytic {:.2f}".format(
                    coverage, row[3], row[4], row[5])
                )
            rows.append(row)

        columns = ["coverage", "absorbed_ptar", "absorbed_ptfr"]
        series = [(1, 2, "PTAR"), (1, 3, "PTFR")]
        metadata = {"patches": patches, "molecules": molecules}
        if oracle:
            columns += ["simulated_at_horizon", "simulated_stderr", "analytic_at_horizon"]
            series += [(1, "4:5", "simulation", "yerrorbars"), (1, 6, "PTAR at horizon")]
            metadata["horizon"] = conf.getSimConfig().getHorizon()
            metadata["realizations"] = conf.getSimConfig().getRealizations()

        self._writeTable(
            "asymptotic_coverage.csv", "asymptotic", columns, rows, metadata,
            plot={
                "title": "expected absorbed molecules, N_p = {}".format(patches),
                "xlabel": "coverage", "ylabel": "N H_inf",
                "series": series
            }
        )

        rows = []
        for coverage in sweep["coverages"]:
            for count in sweep["patch_counts"]:
                try:
                    layout = geometry.layoutFibonacci(params.getRxRadius(), count, coverage)
                    identical = self._asymptoticRow(params, layout, molecules)
                    kappa = layout.getRadii()[0] / params.getRxRadius()
                    mean = homogenization.capacitanceMeanField(params.getRxRadius(), count, kappa)
                    rate = homogenization.effectiveRate(mean, params.getDiffusion(), params.getRxRadius())
                    mean_field = molecules * analytic.HUniformInf(rate.getRate(), params)
                except (LayoutError, HomogenizationError) as e:
                    printWarning("skipping N_p = {}, coverage {}: {}".format(count, coverage, e))
                    continue
                rows.append((count, coverage, identical, mean_field, abs(mean_field - identical) / identical))

        self._writeTable(
            "asymptotic_patches.csv", "asymptotic",
            ("patches", "coverage", "absorbed_identical", "absorbed_mean_field", "relative_gap"), rows,
            {"molecules": molecules}
        )

        rows = []
        coverage = conf.getConfig()["layout"]["coverage"]
        for rx_radius in sweep["rx_radii"]:
            for diffusion in sweep["diffusions"]:
                try:
                    current = params.withRxRadius(rx_radius).withDiffusion(diffusion)
                    single = geometry.layoutFibonacci(rx_radius, 1, coverage)
                    for count in sweep["patch_counts"]:
                        layout = geometry.layoutFibonacci(rx_radius, count, coverage)
                        rows.append((count, rx_radius, diffusion, homogenization.deltaH(layout, single, current)))
                except (LayoutError, HomogenizationError, ValueError) as e:
                    printWarning("skipping r_R = {}, D = {}: {}".format(rx_radius, diffusion, e))

        self._writeTable(
            "delta_h.csv", "delta_h", ("patches", "rx_radius_um", "diffusion_um2_per_s", "delta_h"), rows,
            {"coverage": coverage}
        )

    def _distributionLayouts(self, count, coverages, seed):
        conf = self.m_config
        rx_radius = conf.getChannelParams().getRxRadius()
        coverage = float(np.sum(coverages))
        region = geometry.regionForFraction(conf.getConfig()["sweep"]["region_fraction"])

        even = geometry.layoutFibonacci(rx_radius, count, coverage, coverages)
        random = geometry.layoutRandom(rx_radius, count, coverage, seed, coverages)
        restricted = geometry.layoutRegion(rx_radius, count, coverage, region, coverages=coverages)
        return even, random, restricted

    def _handleCompareDistributions(self):
        conf = self.m_config
        params = conf.getChannelParams()
        sweep = conf.getConfig()["sweep"]
        coverage = conf.getConfig()["layout"]["coverage"]
        molecules = conf.getConfig()["tx"]["molecules"]

        rows = []
        for count in sweep["patch_counts"]:
            if count < 2:
                continue
            for spread in sweep["size_spreads"]:
                coverages = homogenization.drawPatchCoverages(count, coverage, spread, sweep["seeds"][0])
                try:
                    even, _, restricted = self._distributionLayouts(count, coverages, sweep["seeds"][0])
                    randoms = [
                        geometry.layoutRandom(params.getRxRadius(), count, coverage, seed, coverages)
                        for seed in sweep["seeds"]
                    ]
                except LayoutError as e:
                    printWarning("skipping N_p = {}, spread {}: {}".format(count, spread, e))
                    continue

                s_even = homogenization.layoutMetricS(even)
                s_random = float(np.mean([homogenization.layoutMetricS(layout) for layout in randoms]))
                s_region = homogenization.layoutMetricS(restricted)
                absorbed = [
                    self._asymptoticRow(params, layout, molecules) for layout in (even, randoms[0], restricted)
                ]
                rows.append((count, spread, s_even, s_random, s_region, s_random - s_even, *absorbed))

        self._writeTable(
            "distributions.csv", "distributions",
            ("patches", "size_spread", "s_even", "s_random", "s_region", "delta_s",
             "absorbed_even", "absorbed_random", "absorbed_region"),
            rows, {"coverage": coverage, "region_fraction": sweep["region_fraction"]},
            plot={
                "title": "location metric S", "xlabel": "N_p", "ylabel": "S",
                "series": [(1, 3, "even"), (1, 4, "random"), (1, 5, "region")]
            }
        )

        times = conf.getTimeGrid()
        count = conf.getConfig()["layout"]["patches"]
        coverages = np.full(count, coverage / count)
        even, random, restricted = self._distributionLayouts(count, coverages, sweep["seeds"][0])
        curves = [analytic.cirPointAp(times, layout, params).getCumulative() for layout in (even, random, restricted)]
        self._writeTable(
            "distributions_cir.csv", "sweep", ("time_s", "cumulative_even", "cumulative_random", "cumulative_region"),
            list(zip(times, *curves)), {"patches": count, "coverage": coverage}
        )
        return rows

    def _handleBer(self):
        conf = self.m_config
        spec = conf.getProtocolSpec()
        proto = conf.getConfig()["protocol"]
        sweep = conf.getConfig()["sweep"]
        models = self._models()

        increments = []
        for model in models:
            molecules = self._moleculesFor(model)
            increments.append(comms.channelIncrements(model.cumulative, spec, molecules, model.asymptote()))

        limit = max(comms.thresholdLimit(inc.getMaxMean()) for inc in increments)
        thresholds = np.arange(limit + 1)
        curves = []
        for inc in increments:
            if proto["ber_mode"] == "exact":
                curves.append(comms.berCurve(inc, thresholds, spec))
            else:
                curves.append([
                    comms.monteCarloBer(inc, psi, spec, proto["draws"], proto["seed"])[0] for psi in thresholds
                ])

        tags = [model.getTag().value for model in models]
        self._writeTable(
            "ber_threshold.csv", "ber", ["threshold"] + ["ber_" + tag.lower() for tag in tags],
            list(zip(thresholds, *curves)), {"bit_interval": spec.getBitInterval(), "mode": proto["ber_mode"]},
            plot={
                "title": "average BER, T_b = {} s".format(spec.getBitInterval()),
                "xlabel": "threshold", "ylabel": "average BER",
                "series": [(1, i + 2, tag) for i, tag in enumerate(tags)], "logy": True
            }
        )

        detector = conf.getDetectorPolicy()
        summary = []
        for tag, inc in zip(tags, increments):
            best, ber = comms.averageOptimalThreshold(inc, spec)
            summary.append((tag, best, ber, detector.averageBer(inc, spec)))

        label = detector.getKind().value.replace('-', '_')
        columns = ("model", "optimal_threshold", "ber_optimal", "ber_" + label)
        self._writeTable(
            "ber_summary.csv", "ber", columns, summary,
            {"detector": detector.getKind().value, "threshold": detector.getThreshold()}
        )
        printTable(columns, summary)

        rows = {}
        for model, tag in zip(models, tags):
            result = comms.berVersusBitInterval(
                model.cumulative, spec, self._moleculesFor(model), sweep["bit_intervals"], model.asymptote()
            )
            for interval, threshold, ber in result:
                rows.setdefault(interval, []).extend([threshold, ber])

        columns = ["bit_interval_s"]
        for tag in tags:
            columns.extend(["threshold_" + tag.lower(), "ber_" + tag.lower()])
        self._writeTable(
            "ber_interval.csv", "ber", columns,
            [(interval, *values) for interval, values in sorted(rows.items())], {"bits": spec.getBits()},
            plot={
                "title": "average BER at the average optimal threshold", "xlabel": "T_b [s]",
                "ylabel": "average BER",
                "series": [(1, 3 + 2 * i, tag) for i, tag in enumerate(tags)], "logy": True
            }
        )
        return summary

    def _handleSimulate(self):
        conf = self.m_config
        sim = conf.getConfig()["simulation"]
        params = conf.getChannelParams()
        cfg = conf.getSimConfig()
        fusion = sim["transmitter"] == "fusion"
        tx = conf.getFusionTx() if fusion else None
        layout = None if cfg.isFullyAbsorbing() else conf.getLayout()

        simulator = ParticleSimulator(params, layout, cfg, tx)
        result = simulator.run(sim["bins"])
        records = result.getRecords()

        self._register(export.writeHits(self._path("hits.csv"), records, cfg.toDict()))
        self._register(export.writeCir(self._path("cir_simulated.csv"), result.getCir()))

        times = result.getCir().getTimes()
        if cfg.isFullyAbsorbing():
            tag = ModelTag.PTFR
        else:
            tag = ModelTag.MTAR if fusion else ModelTag.PTAR
        model = self._models([tag], layout)[0]
        path = self._register(export.writeCir(self._path("cir_analytic.csv"), model.cir(times)))

        if records.getRealizationCount() > 1:
            ci = estimateCi(records, times=times, method=sim["ci_method"], seed=sim["seed"])
            self._writeTable(
                "cumulative_ci.csv", "ci", ("time_s", "mean", "standard_error", "analytic"),
                list(zip(times, ci.getMean(), ci.getStdErr(), model.cumulative(times))),
                {"method": ci.getMethod()},
                plot={
                    "title": "{} absorbed fraction".format(tag.value), "xlabel": "t [s]", "ylabel": "H(t)",
                    "series": [(1, 2, "simulation"), (1, 4, "analytic")]
                }
            )

        if fusion:
            release = np.sort(result.getReleaseTimes())
            numerics = conf.getConfig()["numerics"]
            profile = analytic.releaseProfile(tx, numerics["n_max"], numerics["root_tol"])
            count = conf.getFusionTx().getVesicleCount() * records.getRealizationCount()
            empirical = np.searchsorted(release, times, side='right') / count
            self._writeTable(
                "release.csv", "release", ("time_s", "released_simulated", "released_analytic"),
                list(zip(times, empirical, profile.released(times)))
            )

        self.m_logger.info("simulated absorbed fraction {:.4f}, analytic {:.4f} at {} s".format(
            records.getAbsorbedFraction(), float(model.cumulative(cfg.getHorizon())), cfg.getHorizon())
        )
        return path

