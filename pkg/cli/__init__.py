"""Command-line entry point.

    python run.py [--config PATH] [--seed N] [--out DIR] <command> [options]

The config file is --config, else $CADENZA_CONFIG, else built-in defaults;
.env is loaded first so it can set CADENZA_CONFIG.
"""
import argparse
import logging

from dotenv import load_dotenv

from shared.errors import CadenzaError
from shared.log import configure_logging

from . import commands
from .config import load_run_config

logger = logging.getLogger(__name__)


def _global_options(parser, suppress=False):
    default = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    parser.add_argument('--config', default=default(None), help='run configuration file')
    parser.add_argument('--seed', type=int, default=default(None), help='override every seed in the config')
    parser.add_argument('--out', default=default(None), help='output directory (paths.out_dir)')
    parser.add_argument('--log-level', default=default('INFO'), help='DEBUG, INFO, WARNING or ERROR')
    parser.add_argument('--log-file', default=default(None), help='also append logs to this file')


def build_parser():
    parser = argparse.ArgumentParser(prog='cadenza', description='Masked-reconstruction pre-training for music.')
    _global_options(parser)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('extract', parents=[common], help='compute MCFE feature caches for a manifest')
    p.add_argument('--manifest')
    p.add_argument('--workers', type=int, default=1)
    p.set_defaults(handler=commands.cmd_extract)

    p = sub.add_parser('pretrain', parents=[common], help='masked-reconstruction pre-training')
    p.add_argument('--manifest')
    p.add_argument('--steps', type=int, help='override pretrain.total_steps')
    p.add_argument('--resume', help='continue from a checkpoint written by pretrain')
    p.add_argument('--mask-log', action='store_true', help='write every mask plan to masks.jsonl')
    p.set_defaults(handler=commands.cmd_pretrain)

    for name, handler, help_text in (
        ('finetune', commands.cmd_finetune, 'grid-search finetuning on the train/valid splits'),
        ('evaluate', commands.cmd_evaluate, 'k-fold genre accuracy or per-tag AUC report'),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument('--manifest')
        p.add_argument('--checkpoint', help='pre-trained or finetuned checkpoint; omit for random init')
        p.add_argument('--task', choices=sorted(commands.TASK_KINDS))
        if name == 'evaluate':
            p.add_argument('--folds', type=int, default=10)
        p.set_defaults(handler=handler)

    p = sub.add_parser('synth', parents=[common], help='write a seeded synthetic corpus and manifest')
    p.add_argument('--mode', choices=('genre', 'tags'), default='genre')
    p.add_argument('--classes', type=int, default=3)
    p.add_argument('--per-class', type=int, default=20)
    p.add_argument('--pretrain-clips', type=int, default=0)
    p.add_argument('--min-seconds', type=float, default=10.0)
    p.add_argument('--max-seconds', type=float, default=35.0)
    p.set_defaults(handler=commands.cmd_synth)

    p = sub.add_parser('mask-demo', parents=[common], help='report masking statistics')
    p.add_argument('--n-frames', type=int, default=1000)
    p.add_argument('--plans', type=int, default=10_000)
    p.set_defaults(handler=commands.cmd_mask_demo)

    p = sub.add_parser('embed', parents=[common], help='dump mean-pooled clip representations')
    p.add_argument('--manifest')
    p.add_argument('--checkpoint')
    p.add_argument('--splits', nargs='*')
    p.set_defaults(handler=commands.cmd_embed)
    return parser


def main(argv=None):
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_file)
    try:
        run = load_run_config(args.config).with_overrides(
            seed=args.seed, steps=getattr(args, 'steps', None), out_dir=args.out
        )
        return args.handler(args, run)
    except CadenzaError as e:
        logger.error(f'{type(e).__name__}: {e}')
        return 2
