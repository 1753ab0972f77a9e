################################################################################
# Copyright (c) 2021-2025, National Research Foundation (SARAO)
#
# Licensed under the BSD 3-Clause License (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy
# of the License at
#
#   https://opensource.org/licenses/BSD-3-Clause
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
################################################################################

"""Command-line interface: train, run ablations and inspect trained models.

Typical use::

  gatedts train --dataset data/JapaneseVowels --out runs/jv --variant gated
  gatedts ablate --dataset data/JapaneseVowels --dataset data/synth --out runs/ablation --jobs 6
  gatedts inspect --checkpoint runs/jv/best.ckpt --dataset data/JapaneseVowels --sample-id 3 --out runs/jv/inspect

Exit status is 0 on success, 1 for usage errors, 2 for data errors (unreadable
or inconsistent dataset, config or checkpoint) and 3 for numeric failures
during training.

"""

import os
import sys
import csv
import json
import logging
import argparse
from concurrent.futures import ProcessPoolExecutor

from .config import VARIANTS, ConfigError, RunConfig
from .dataset import DatasetError, load_dataset
from .model import BadModelFile
from .optim import NumericError
from .tensor import DimensionError
from .functional import ParameterError, DegenerateAttentionError
from .gtn import GatedTransformer
from .training import train
from .interpret import export_attention, export_embeddings, export_gate_stats, gate_stats

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    """Command line or run config is unusable."""


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '%s: error: %s\n' % (self.prog, message))


def _makedirs(path):
    if not os.path.isdir(path):
        os.makedirs(path)


def _write_json(path, obj):
    with open(path, 'w') as json_file:
        json.dump(obj, json_file, sort_keys=True, indent=2)
        json_file.write('\n')


def _run(command, *args):
    """Run command, mapping exceptions onto exit codes."""
    try:
        return command(*args)
    except (DatasetError, BadModelFile, ConfigError, DimensionError, ParameterError) as exc:
        logger.error('%s', exc)
        return EXIT_DATA
    except (NumericError, DegenerateAttentionError) as exc:
        logger.error('Numeric failure: %s', exc)
        return EXIT_NUMERIC

# --------------------------------------------------------------------------------------------------
# --- Commands
# --------------------------------------------------------------------------------------------------


def cmd_train(config):
    """Train one model and write config.json, log.csv, best.ckpt and report.json.

    Parameters
    ----------
    config : :class:`gatedts.RunConfig` object
        Validated run config with dataset path and output directory

    Returns
    -------
    status : int
        Exit status (0 on success)

    Raises
    ------
    DatasetError, ConfigError
        If the dataset cannot be loaded or disagrees with the config
    NumericError
        If training diverges

    """
    dataset = load_dataset(config.dataset)
    config = config.fill_from_dataset(dataset)
    model_config, train_config = config.model_config(), config.train_config()
    _makedirs(config.out)
    config.tofile(os.path.join(config.out, 'config.json'))
    model = GatedTransformer(model_config, seed=train_config.seed)
    log = train(model, dataset, train_config, os.path.join(config.out, 'best.ckpt'))
    log.to_csv(os.path.join(config.out, 'log.csv'))
    report = {'test_accuracy': log.report_test_accuracy, 'epoch': log.best_train_loss_epoch,
              'variant': model_config.variant}
    _write_json(os.path.join(config.out, 'report.json'), report)
    logger.info('Run %s: %s variant reached test accuracy %s at best training loss (epoch %d)',
                config.out, model_config.variant, log.report_test_accuracy, log.best_train_loss_epoch)
    return EXIT_OK


def _ablation_cell(fields):
    """Train one (dataset, variant) cell of the ablation table in a worker."""
    config = RunConfig.fromdict(fields)
    status = _run(cmd_train, config)
    if status != EXIT_OK:
        return status, None
    with open(os.path.join(config.out, 'report.json')) as json_file:
        return status, json.load(json_file)['test_accuracy']


def ablation_table(config, datasets, jobs=1):
    """Train every variant on every dataset and collect test accuracies.

    Parameters
    ----------
    config : :class:`gatedts.RunConfig` object
        Shared run config (its dataset and variant are overridden per cell)
    datasets : sequence of string
        Dataset directories
    jobs : int, optional
        Number of worker processes

    Returns
    -------
    table : list of (string, list of float or None)
        Dataset name and test accuracy per variant (None for failed cells)
    status : int
        Exit status of the worst failing cell (0 if all succeeded)

    """
    cells = []
    for path in datasets:
        name = os.path.basename(os.path.normpath(path))
        for variant in VARIANTS:
            out = os.path.join(config.out, name, variant)
            cells.append(config.update({'dataset': path, 'variant': variant, 'out': out}).todict())
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_ablation_cell, cells))
    else:
        results = [_ablation_cell(cell) for cell in cells]
    table, worst = [], EXIT_OK
    for n, path in enumerate(datasets):
        row = []
        for m, variant in enumerate(VARIANTS):
            status, accuracy = results[n * len(VARIANTS) + m]
            if status != EXIT_OK:
                logger.warning('Variant %s failed on %s with exit status %d', variant, path, status)
                worst = max(worst, status)
            row.append(accuracy)
        table.append((os.path.basename(os.path.normpath(path)), row))
    return table, worst


def cmd_ablate(config, datasets, jobs=1):
    """Run all six variants per dataset and write ablation.csv (datasets x variants)."""
    _makedirs(config.out)
    config.tofile(os.path.join(config.out, 'config.json'))
    table, status = ablation_table(config, datasets, jobs)
    with open(os.path.join(config.out, 'ablation.csv'), 'w') as csv_file:
        writer = csv.writer(csv_file, lineterminator='\n')
        writer.writerow(('dataset',) + VARIANTS)
        for name, row in table:
            writer.writerow([name] + ['' if acc is None else '%.17g' % (acc,) for acc in row])
    logger.info('Wrote ablation table of %d dataset(s) to %s', len(table), config.out)
    return status


def cmd_inspect(checkpoint, dataset_path, sample_id, out, split='test'):
    """Export attention maps, distance matrices, gate weights and embeddings.

    Parameters
    ----------
    checkpoint : string
        Checkpoint file written by training
    dataset_path : string
        Dataset directory compatible with the checkpoint
    sample_id : int
        Index of series in `split` whose attention maps are exported
    out : string
        Output directory
    split : {'train', 'test'}, optional
        Split supplying the series

    Raises
    ------
    ConfigError
        If the checkpoint does not suit the dataset
    DatasetError
        If the sample id is out of range

    """
    model = GatedTransformer.load(checkpoint)
    dataset = load_dataset(dataset_path)
    config = model.config
    if (config.n_channels, config.n_classes) != (dataset.n_channels, dataset.n_classes) or \
            dataset.max_len > config.max_len:
        raise ConfigError('Checkpoint (C=%d, K=%d, max_len=%d) does not suit dataset %r (C=%d, K=%d, max_len=%d)'
                          % (config.n_channels, config.n_classes, config.max_len, dataset.name,
                             dataset.n_channels, dataset.n_classes, dataset.max_len))
    samples = dataset.split(split)
    if not 0 <= sample_id < len(samples):
        raise DatasetError('Unknown sample id %d: valid ids in %s split are 0 to %d'
                           % (sample_id, split, len(samples) - 1))
    _makedirs(out)
    export_attention(model, samples[sample_id], os.path.join(out, 'sample_%05d' % (sample_id,)), sample_id)
    if config.variant == 'gated':
        export_gate_stats(gate_stats(model, samples), out)
    export_embeddings(model, samples, out)
    return EXIT_OK

# --------------------------------------------------------------------------------------------------
# --- Command line
# --------------------------------------------------------------------------------------------------


def _add_run_options(parser, multiple_datasets=False):
    if multiple_datasets:
        parser.add_argument('--dataset', action='append', help='Dataset directory (repeat for more datasets)')
    else:
        parser.add_argument('--dataset', help='Dataset directory')
    parser.add_argument('--out', help='Output directory')
    parser.add_argument('--config', help='Flat JSON run config (command-line options take precedence)')
    parser.add_argument('--variant', choices=VARIANTS, help='Ablation variant [gated]')
    parser.add_argument('--seed', type=int, help='Seed of all random streams [0]')
    parser.add_argument('--epochs', type=int, dest='max_epochs', help='Maximum number of epochs [500]')
    parser.add_argument('--lr', type=float, help='Initial Adagrad learning rate [0.0001]')
    parser.add_argument('--dropout', type=float, dest='dropout_p', help='Dropout probability [0.2]')
    parser.add_argument('--batch-size', type=int, help='Batch size [16]')


def parse_cmd_line(argv=None):
    """Parse the command-line arguments.

    Returns
    -------
    args : argparse.Namespace
        Command-line arguments

    """
    parser = _ArgumentParser(prog='gatedts', description='Gated transformer networks for '
                             'multivariate time-series classification.')
    parser.add_argument('-v', '--verbose', action='store_true', help='Log debug messages')
    subparsers = parser.add_subparsers(dest='command', parser_class=_ArgumentParser)
    subparsers.required = True
    train_parser = subparsers.add_parser('train', help='Train one model')
    _add_run_options(train_parser)
    ablate_parser = subparsers.add_parser('ablate', help='Train all six variants per dataset')
    _add_run_options(ablate_parser, multiple_datasets=True)
    ablate_parser.add_argument('--jobs', type=int, default=1, help='Number of worker processes [%(default)s]')
    inspect_parser = subparsers.add_parser('inspect', help='Export interpretability artefacts')
    inspect_parser.add_argument('--checkpoint', required=True, help='Checkpoint file')
    inspect_parser.add_argument('--dataset', required=True, help='Dataset directory')
    inspect_parser.add_argument('--sample-id', type=int, default=0, help='Series index [%(default)s]')
    inspect_parser.add_argument('--split', choices=('train', 'test'), default='test',
                                help='Split supplying the series [%(default)s]')
    inspect_parser.add_argument('--out', required=True, help='Output directory')
    return parser.parse_args(argv)


def run_config_from_args(args):
    """Build validated run config from config file and command-line overrides.

    Raises
    ------
    _UsageError
        If the config is invalid or lacks a dataset or output directory

    """
    try:
        config = RunConfig.fromfile(args.config) if args.config else RunConfig()
        dataset = args.dataset[0] if isinstance(args.dataset, list) else args.dataset
        overrides = dict((name, getattr(args, name)) for name in
                         ('out', 'variant', 'seed', 'max_epochs', 'lr', 'dropout_p', 'batch_size'))
        overrides['dataset'] = dataset
        config = config.update(overrides)
    except ConfigError as exc:
        raise _UsageError(str(exc))
    if config.dataset is None:
        raise _UsageError('No dataset given (use --dataset or the config file)')
    if config.out is None:
        raise _UsageError('No output directory given (use --out or the config file)')
    return config


def main(argv=None):
    """Entry point of the `gatedts` command, returning the exit status."""
    try:
        args = parse_cmd_line(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    if args.command == 'inspect':
        return _run(cmd_inspect, args.checkpoint, args.dataset, args.sample_id, args.out, args.split)
    try:
        config = run_config_from_args(args)
    except _UsageError as exc:
        logger.error('%s', exc)
        return EXIT_USAGE
    if args.command == 'train':
        return _run(cmd_train, config)
    datasets = args.dataset or [config.dataset]
    if args.jobs < 1:
        logger.error('Number of jobs should be at least 1, not %d', args.jobs)
        return EXIT_USAGE
    return _run(cmd_ablate, config, datasets, args.jobs)


if __name__ == '__main__':
    sys.exit(main())
