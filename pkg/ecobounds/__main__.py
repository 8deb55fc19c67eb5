# ecobounds - treatment effect bounds for covariates unobserved in the study
# Copyright (C) 2026 CZ.NIC, z.s.p.o. <http://www.nic.cz>
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

import argparse
import logging
import os
import sys

from ecobounds import __version__
from ecobounds.commands import COMMANDS
from ecobounds.commands.config import RunConfig
from ecobounds.reporting import ErrorReporter
from ecobounds.state import current_state
from ecobounds.utils.tables import dumps


def get_arg_parser():
    """ Returns argument parser

    :return: instance of ArgumentParser
    """
    parser = argparse.ArgumentParser(prog="ecobounds")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-d", "--debug", action="store_true")
    parser.add_argument(
        "-l",
        "--log-file",
        default=None,
        help="file where the logs will we appended",
        required=False,
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker budget (default $ECOBOUNDS_THREADS, then 1)",
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True, help="run configuration (JSON)")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", default=None, help="output directory (overrides the config)")
    common.add_argument(
        "--force",
        action="store_true",
        help="write into an output directory made by another config",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    for name, handler in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=(handler.__doc__ or "").strip() or None)
    return parser


def main(argv=None):
    parser = get_arg_parser()
    args = parser.parse_args(argv)

    # setup logging
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.WARNING)
    logger = logging.getLogger("ecobounds")

    if args.log_file:
        file_handler = logging.FileHandler(args.log_file)
        logging.getLogger().addHandler(file_handler)

    logger.debug("Version %s", __version__)

    # try to include sentry (if installed)
    try:
        import sentry_sdk

        try:
            dsn = os.environ["SENTRY_DSN"]
            sentry_sdk.init(dsn=dsn)
            current_state.set_sentry(True)
        except (KeyError, sentry_sdk.utils.BadDsn):
            pass
    except ImportError:
        pass

    current_state.set_threads(args.threads)

    reporter = ErrorReporter(out_dir=args.out)
    config = []
    code = reporter(lambda: config.append(RunConfig.from_file(args.config, seed=args.seed, out=args.out)))
    if code:
        if args.out is None:
            sys.stderr.write(dumps(reporter.record))
        return code
    config = config[0]
    current_state.set_fingerprint(config.fingerprint)

    handler = COMMANDS[args.command](config, force=args.force)
    reporter = ErrorReporter(out_dir=config.out, config=config.raw)
    code = reporter(handler.run)
    if code:
        sys.stderr.write("%s: %s\n" % (reporter.record["error"], reporter.record["message"]))
    return code


if __name__ == "__main__":
    sys.exit(main())
