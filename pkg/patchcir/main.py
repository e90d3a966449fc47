# vim: ts=4 et sw=4 sts=4 :

import argparse
import logging
import os
import sys

import patchcir.commands
import patchcir.config
import patchcir.export
import patchcir.logmanager
from patchcir.terminal import print_colored, printe, printError
from patchcir.types import NumericsError
from patchcir.utils import getExceptionContext

EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICS = 3


class PatchCir:
    """Main application class: parses the command line, sets up logging and
    configuration and runs one experiment."""

    def __init__(self):
        self.m_log_manager = patchcir.logmanager.LogManager()
        self.m_logger = logging.getLogger("main")
        self.setupArgparse()

    def setupArgparse(self):
        commands = patchcir.commands.Command
        epilog = '\n'.join(patchcir.commands.getUsage(cmd) for cmd in commands)

        self.m_parser = argparse.ArgumentParser(
            description="Channel impulse response and error rate experiments for a spherical receiver "
                        "covered by absorbing patches",
            epilog=epilog,
            formatter_class=argparse.RawDescriptionHelpFormatter
        )
        self.m_parser.add_argument(
            "command", choices=[cmd.value for cmd in commands],
            help="The experiment to run"
        )
        self.m_parser.add_argument(
            "--config",
            type=str,
            help="Path of the INI experiment configuration. Defaults to ~/.config/{} if it exists.".format(
                patchcir.config.ExperimentConfig.DEFAULT_BASENAME
            ),
            default=None
        )
        self.m_parser.add_argument(
            "--set", type=str, action="append", default=[], metavar="SECTION.KEY=VALUE",
            help="Overrides a single configuration setting, e.g. 'layout.patches=13'. Can be repeated."
        )
        self.m_parser.add_argument(
            "--output", type=str, default=None,
            help="Output directory. Can also be set through the environment variable PATCHCIR_OUTPUT, "
                 "which this switch takes precedence over."
        )
        self.m_parser.add_argument(
            "--logfile", type=str,
            help="Output logging messages into the given file instead of stderr",
            default=None
        )
        self.m_parser.add_argument(
            "--loglevel", type=str,
            help="Sets the default loglevel",
            choices=("debug", "info", "warning", "error", "critical"),
            default="warning"
        )
        self.m_parser.add_argument(
            "--loglevel-set",
            type=str,
            help="Sets per-logger loglevels. Expects a comma separated string like 'main=debug,particles=info'. "
                 "Can also be set through the environment variable LOGLEVEL_SET which takes precedence over this "
                 "command line switch.",
            default=""
        )

    def parseArgs(self, argv=None):
        self.m_args = self.m_parser.parse_args(argv)

        log_manager = self.m_log_manager

        if self.m_args.logfile:
            log_manager.addLogfile(self.m_args.logfile)
        else:
            log_manager.addConsoleHandler()
        log_manager.setDefaultLogLevel(self.m_args.loglevel)

        loglevel_set = os.environ.get("LOGLEVEL_SET", None)
        if not loglevel_set:
            loglevel_set = self.m_args.loglevel_set

        try:
            log_manager.applyLogLevels(loglevel_set)
        except ValueError as e:
            printe("Bad LOGLEVEL_SET or --loglevel-set setting(s):\n{}".format(str(e)))

    def execute(self):
        cmd = patchcir.commands.Command(self.m_args.command)
        config = patchcir.config.ExperimentConfig(self.m_args.config, self.m_args.set)
        config.getConfig()

        output_dir = config.getOutputDirectory(self.m_args.output)
        manifest = patchcir.export.RunManifest(cmd.value, config.toDict())
        runner = patchcir.commands.CommandRunner(config, output_dir, manifest)

        self.m_logger.info("running {} into {}".format(cmd.value, output_dir))
        runner.run(cmd)
        path = manifest.write(output_dir)
        print_colored("{} finished, manifest in {}".format(cmd.value, path), color='green')

    def run(self, argv=None):
        self.parseArgs(argv)

        try:
            self.execute()
            return EXIT_SUCCESS
        except patchcir.config.ConfigError as e:
            printError("Configuration error: {}".format(e))
            return EXIT_CONFIG
        except NumericsError as e:
            printError("Numerical failure: {}".format(e))
            self.m_logger.debug(getExceptionContext(e))
            return EXIT_NUMERICS
        except Exception as e:
            printError("{} failed: {}".format(self.m_args.command, e))
            self.m_logger.debug(getExceptionContext(e))
            return EXIT_FAILURE
        finally:
            self.m_log_manager.removeHandlers()


def main():
    sys.exit(PatchCir().run())


if __name__ == "__main__":
    main()
