# vim: ts=4 et sw=4 sts=4 :
import logging
import sys

LOG_FORMAT = '%(asctime)s %(name)14s %(levelname)8s: %(message)s'


class LogManager:
    """Manages the application wide logging module settings."""

    def __init__(self):
        self.m_handlers = []

    def setDefaultLogLevel(self, level):
        level = self._getLogLevel(level)
        logging.root.setLevel(level)

    def addLogfile(self, path):
        handler = logging.FileHandler(path)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logging.root.addHandler(handler)
        self.m_handlers.append(handler)

    def addConsoleHandler(self, stream=None):
        """Sends log records to stderr; used when no logfile is given."""
        handler = logging.StreamHandler(stream if stream else sys.stderr)
        handler.setFormatter(logging.Formatter('%(name)s: %(levelname)s: %(message)s'))
        logging.root.addHandler(handler)
        self.m_handlers.append(handler)

    def removeHandlers(self):
        for handler in self.m_handlers:
            logging.root.removeHandler(handler)
            handler.close()
        self.m_handlers = []

    def applyLogLevels(self, settings):
        """Applies per logger levels given as `name=LEVEL` pairs.

        :param str settings: e.g. "analytic=DEBUG,particles=WARNING"
        """

        problems = []

        for entry in filter(None, (s.strip() for s in settings.split(','))):
            name, sep, level = entry.partition('=')
            if not sep or not name or '=' in level:
                problems.append("malformed logger level entry: '{}'".format(entry))
                continue

            try:
                logging.getLogger(name).setLevel(self._getLogLevel(level))
            except ValueError as e:
                problems.append("{}: {}".format(entry, e))

        if problems:
            raise ValueError('\n'.join(problems))

    @classmethod
    def _getLogLevel(cls, value):
        """Maps a level name like 'debug' to the numeric logging level.
        Numeric levels are passed through unchanged."""
        if not isinstance(value, str):
            return value
        level = getattr(logging, value.strip().upper(), None)
        if not isinstance(level, int):
            raise ValueError("unknown log level '{}'".format(value))
        return level
