# vim: ts=4 et sw=4 sts=4 :

# result files: versioned CSV tables, gnuplot scripts that plot them and
# the JSON run manifest written next to them.

import csv
import json
import logging
import os
import platform
import time

import numpy as np

import patchcir
from patchcir.utils import fileChecksum

logger = logging.getLogger("export")

CSV_SCHEMA_VERSION = 1


def _formatValue(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def writeTable(path, kind, columns, rows, metadata=None):
    """Writes a CSV file whose first line names the schema `kind` and its
    version, followed by '# key=value' metadata lines and the column
    header."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(path, 'w', newline='') as fd:
        fd.write("# patch.cir {} v{}\n".format(kind, CSV_SCHEMA_VERSION))
        for key in sorted(metadata if metadata else {}):
            fd.write("# {}={}\n".format(key, _formatValue(metadata[key])))
        writer = csv.writer(fd, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_formatValue(v) for v in row])

    logger.debug("wrote {} ({} rows)".format(path, len(rows)))
    return path


def _parseCell(value):
    try:
        return float(value)
    except ValueError:
        return value


def readTable(path):
    """Reads a table written by writeTable().

    :return: (kind, metadata dict of strings, column names, data). The data
             is a float array, or an object array if some cells are text.
    """
    kind, metadata, lines = None, {}, []
    with open(path) as fd:
        for line in fd:
            if line.startswith("# patch.cir "):
                kind = line.split()[2]
            elif line.startswith("# ") and '=' in line:
                key, _, value = line[2:].rstrip('\n').partition('=')
                metadata[key] = value
            else:
                lines.append(line)

    reader = csv.reader(lines)
    columns = next(reader)
    rows = [[_parseCell(v) for v in row] for row in reader if row]
    numeric = all(isinstance(v, float) for row in rows for v in row)
    data = np.array(rows, dtype=float if numeric else object)
    return kind, metadata, columns, data


def writeCir(path, series, metadata=None):
    meta = dict(series.getProvenance())
    if series.getAsymptote() is not None:
        meta["asymptote"] = series.getAsymptote()
    meta.update(metadata if metadata else {})
    rows = zip(series.getTimes(), series.getRate(), series.getCumulative())
    return writeTable(
        path, "cir", ("time_s", "hitting_rate_per_s", "cumulative_fraction"), list(rows),
        {k: (json.dumps(v, sort_keys=True) if isinstance(v, dict) else v) for k, v in meta.items()}
    )


def writeHits(path, records, metadata=None):
    rows = zip(records.getTimes(), records.getPatches(), records.getRealizations())
    meta = {
        "molecules_per_realization": records.getMoleculesPerRealization(),
        "realizations": records.getRealizationCount(),
        "horizon_s": records.getHorizon()
    }
    meta.update(metadata if metadata else {})
    return writeTable(path, "hits", ("absorption_time_s", "patch_index", "realization"), list(rows), meta)


def writePlotScript(csv_path, title, xlabel, ylabel, series, logx=False, logy=False):
    """Writes a gnuplot script next to `csv_path` plotting the given
    columns.

    :param series: list of (x column, y column, legend) with 1-based
                   column numbers. An optional fourth entry replaces the
                   default "lines" style, e.g. "yerrorbars" with a "y:dy"
                   column spec.
    """
    script = os.path.splitext(csv_path)[0] + ".gp"
    data = os.path.basename(csv_path)
    image = os.path.splitext(data)[0] + ".png"

    lines = [
        "# generated by patch.cir {}".format(patchcir.__version__),
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,600",
        "set output '{}'".format(image),
        "set title '{}'".format(title),
        "set xlabel '{}'".format(xlabel),
        "set ylabel '{}'".format(ylabel),
        "set grid"
    ]
    if logx:
        lines.append("set logscale x")
    if logy:
        lines.append("set logscale y")

    plots = []
    for entry in series:
        x, y, legend = entry[:3]
        style = entry[3] if len(entry) > 3 else "lines"
        plots.append("'{}' using {}:{} with {} title '{}'".format(data, x, y, style, legend))
    lines.append("plot " + ", \\\n     ".join(plots))

    with open(script, 'w') as fd:
        fd.write('\n'.join(lines) + '\n')

    return script


class RunManifest:
    """Records what a command produced: the resolved configuration, the code
    version, a checksum per output file and the wall time."""

    BASENAME = "manifest.json"

    def __init__(self, command, config):
        self.m_command = command
        self.m_config = config
        self.m_outputs = []
        self.m_start = time.monotonic()

    def addOutput(self, path):
        self.m_outputs.append(path)

    def getOutputs(self):
        return self.m_outputs

    def toDict(self):
        return {
            "command": self.m_command,
            "version": patchcir.__version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "config": self.m_config,
            "outputs": {
                os.path.basename(path): fileChecksum(path) for path in self.m_outputs
            },
            "wall_time_s": time.monotonic() - self.m_start
        }

    def write(self, directory):
        path = os.path.join(directory, self.BASENAME)
        os.makedirs(directory, exist_ok=True)
        with open(path, 'w') as fd:
            json.dump(self.toDict(), fd, indent=2, sort_keys=True)
            fd.write('\n')
        logger.info("wrote run manifest {}".format(path))
        return path
