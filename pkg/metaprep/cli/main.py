import argparse
import logging
import sys
from typing import List, Optional

from metaprep import __version__
from metaprep.errors import CheckpointError, ConfigError, EmptyLogError, \
    NonFiniteError
from metaprep.cli.commands import cmd_finetune, cmd_pretrain, cmd_report
from metaprep.cli.experiment import cmd_experiment
from metaprep.cli.gradcheck import SCALES, cmd_gradcheck

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - [%(name)s] - %(message)s'
# exit status per failure kind
EXIT_CODES = (
    (ConfigError, 1),
    (CheckpointError, 1),
    (EmptyLogError, 1),
    (NonFiniteError, 2),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='metaprep',
        description="Meta-learning multi-task pre-training at desk scale")
    parser.add_argument('--version', action='version',
                        version=f"%(prog)s {__version__}")
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest='command', required=True)

    pretrain = sub.add_parser('pretrain', help="run meta pre-training")
    pretrain.add_argument('--config', required=True)
    pretrain.add_argument('--out')
    pretrain.add_argument('--seed', type=int)
    pretrain.add_argument('--stop-after', type=int,
                          help="stop after this many meta-test steps")
    pretrain.add_argument('--no-resume', action='store_true')
    pretrain.add_argument('--progress', action='store_true')

    finetune = sub.add_parser('finetune',
                              help="fine-tune a checkpoint on the "
                                   "downstream tasks")
    finetune.add_argument('--config', required=True)
    finetune.add_argument('--checkpoint', required=True)
    finetune.add_argument('--out')
    finetune.add_argument('--seed', type=int)

    gradcheck = sub.add_parser('gradcheck',
                               help="verify gradients and meta-gradients")
    gradcheck.add_argument('--scale', choices=SCALES, default='full')
    gradcheck.add_argument('--out')
    gradcheck.add_argument('--corrupt-gradient', type=float, default=0.0,
                           help=argparse.SUPPRESS)

    report = sub.add_parser('report', help="write accuracy series tables")
    report.add_argument('--out', required=True,
                        help="run directory holding metrics.jsonl")
    report.add_argument('--plot', action='store_true')

    experiment = sub.add_parser('experiment',
                                help="depth sweep and warm-start study")
    experiment.add_argument('--config', required=True)
    experiment.add_argument('--out')
    experiment.add_argument('--seed', type=int)
    experiment.add_argument('--which', choices=['all', 'depth', 'warm'],
                            default='all')
    experiment.add_argument('--progress', action='store_true')
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if args.command == 'pretrain':
        return cmd_pretrain(args.config, args.out, args.seed,
                            not args.no_resume, args.stop_after,
                            args.progress)
    if args.command == 'finetune':
        return cmd_finetune(args.config, args.checkpoint, args.out,
                            args.seed)
    if args.command == 'gradcheck':
        return cmd_gradcheck(args.scale, args.out, args.corrupt_gradient)
    if args.command == 'report':
        return cmd_report(args.out, args.plot)
    return cmd_experiment(args.config, args.out, args.seed, args.which,
                          args.progress)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    try:
        return dispatch(args)
    except tuple(kind for kind, _ in EXIT_CODES) as e:
        code = next(c for kind, c in EXIT_CODES if isinstance(e, kind))
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return code
