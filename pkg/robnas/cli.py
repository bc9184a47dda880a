"""
Command line interface::

    robnas [-v|-q] [--config FILE] [--seed N] [--bench PATH] [--output DIR] [--jobs N] [--dataset NAME] COMMAND ...

Commands:

``space-report``
    Census of the search space (``--assert`` fails unless it finds 15625 genotypes in 6466
    classes; ``--json`` for JSON instead of ``key=value`` lines).
``correlate``
    NTK-scores of an architecture subset and their Spearman coefficients with every benchmark
    metric (CSV).
``search``
    Query-budgeted search runs, mean metrics of the found architectures (CSV).
``bound``
    Generalization bound terms (JSON).
``attack-demo``
    Clean and attacked accuracy of an initialized network (JSON).
``train-demo``
    Online or recipe training; per-step or per-epoch losses (CSV).
``ingest-check``
    Counts of a benchmark file (JSON).
``analyze``
    Sparsity, operator and metric-correlation tables of the benchmark (JSON).

Only results go to stdout; logs go to stderr. Every run also writes its resolved config and
artifacts to the output directory. Exit status: 0 on success, 1 on usage errors, and
:attr:`RobnasError.exit_code <robnas.errors.RobnasError.exit_code>` otherwise (2 invalid
input, 3 missing data, 4 numerical failure).

.. autofunction:: main
"""

import argparse
import io
import json
import logging
import sys
from typing import Any, List, Optional

from robnas import Experiment
from robnas.algo.cellspace import CLASS_COUNT, SPACE_SIZE
from robnas.data.bench import ROBUST_MEAN
from robnas.data.search import Algorithm, RunReport
from robnas.data.training import TrainMode
from robnas.errors import RobnasError, ValidationError
from robnas.readers import container

log = logging.getLogger('robnas.cli')


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def _emit_json(data: Any) -> None:
    _emit(json.dumps(data, indent=2) + '\n')


def _artifact(experiment: Experiment, name: str, text: str) -> None:
    path = experiment.output_path(name)
    path.write_text(text, encoding='utf-8')
    log.info("Wrote %s", path)


def _csv(writer) -> str:
    stream = io.StringIO()
    writer(stream)
    return stream.getvalue()


# Commands
# --------

def space_report(experiment: Experiment, args) -> int:
    report = experiment.space_report()
    if args.json:
        _emit_json(report)
    else:
        lines = [f"total={report['total']} classes={report['classes']}"]
        lines += [f"class_size={size} count={count}" for size, count in report['class_sizes'].items()]
        _emit('\n'.join(lines) + '\n')

    if args.check and (report['total'] != SPACE_SIZE or report['classes'] != CLASS_COUNT):
        raise ValidationError(f"Census mismatch: {report['total']} genotypes in {report['classes']} classes, "
                              f"expected {SPACE_SIZE} in {CLASS_COUNT}")
    return 0


def correlate(experiment: Experiment, args) -> int:
    scores = experiment.ntk_scores(experiment.correlation_subset(), jobs=args.jobs)
    names = list(next(iter(scores.values())))
    lines = [','.join(('genotype', *names))]
    for genotype, values in scores.items():
        lines.append(','.join((str(genotype), *(f'{values[name]:.6g}' for name in names))))
    _artifact(experiment, 'scores.csv', '\n'.join(lines) + '\n')

    selections = {name: experiment.score_selection(scores, name).to_dict() for name in names}
    _artifact(experiment, 'selection.json', json.dumps(selections, indent=2) + '\n')

    table = _csv(experiment.correlate(scores).to_csv)
    _artifact(experiment, 'correlation.csv', table)
    _emit(table)
    return 0


def search(experiment: Experiment, args) -> int:
    if args.algorithm == 'all':
        algorithms = list(Algorithm)
    else:
        algorithms = None if args.algorithm is None else [Algorithm(args.algorithm)]
    reports = experiment.search(algorithms, jobs=args.jobs)
    if args.optimal:
        reports.append(experiment.optimal())

    table = _csv(lambda stream: RunReport.write_csv(reports, stream))
    _artifact(experiment, 'search.csv', table)
    _artifact(experiment, 'search.json', json.dumps([report.to_dict() for report in reports], indent=2) + '\n')
    _emit(table)
    return 0


def bound(experiment: Experiment, args) -> int:
    report = experiment.bound(save_kernels=args.save_kernels)
    _artifact(experiment, 'bound.json', json.dumps(report, indent=2) + '\n')
    _emit_json(report)
    return 0


def attack_demo(experiment: Experiment, args) -> int:
    report = experiment.attack_demo(radius=args.radius, presets=args.presets)
    _artifact(experiment, 'attack.json', json.dumps(report, indent=2) + '\n')
    _emit_json(report)
    return 0


def train_demo(experiment: Experiment, args) -> int:
    weights, record = experiment.train_demo()
    table = _csv(record.to_csv)
    _artifact(experiment, 'history.csv', table)
    if args.save_weights:
        container.save_weights(args.save_weights, weights)
        log.info("Saved weights to %s", args.save_weights)
    _emit(table)
    return 0


def ingest_check(experiment: Experiment, args) -> int:
    _emit_json(experiment.ingest_check())
    return 0


def analyze(experiment: Experiment, args) -> int:
    report = experiment.analyze(metric=args.metric, k=args.top)
    _artifact(experiment, 'analysis.json', json.dumps(report, indent=2) + '\n')
    _emit_json(report)
    return 0


# Parser
# ------

def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog='robnas', description='Train-free robust architecture search toolkit')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='warnings and errors only')
    parser.add_argument('--config', help='experiment config, TOML or JSON')
    parser.add_argument('--seed', type=int, dest='seed')
    parser.add_argument('--bench', dest='bench_path', help='benchmark file, or synthetic:<landscape>')
    parser.add_argument('--output', dest='output_dir', help='artifact directory')
    parser.add_argument('--dataset', dest='dataset')
    parser.add_argument('--jobs', type=int, default=1, help='worker processes')

    commands = parser.add_subparsers(dest='command', metavar='COMMAND', parser_class=Parser)
    commands.required = True

    command = commands.add_parser('space-report', help='search space census')
    command.add_argument('--assert', dest='check', action='store_true', help='fail unless counts match')
    command.add_argument('--json', action='store_true')
    command.set_defaults(handler=space_report)

    command = commands.add_parser('correlate', help='NTK-score / benchmark metric correlations')
    command.add_argument('--subset', type=int, dest='correlate.subset_size')
    command.add_argument('--samples', type=int, dest='kernels.samples')
    command.add_argument('--aggregation', dest='kernels.aggregation')
    command.set_defaults(handler=correlate)

    command = commands.add_parser('search', help='query-budgeted search runs')
    command.add_argument('--algorithm', choices=[*(a.value for a in Algorithm), 'all'])
    command.add_argument('--budget', type=int, dest='search.budget')
    command.add_argument('--runs', type=int, dest='search.runs')
    command.add_argument('--metric', dest='search.objective_metric')
    command.add_argument('--optimal', action='store_true', help='add the exhaustive optimum row')
    command.set_defaults(handler=search)

    command = commands.add_parser('bound', help='generalization bound terms')
    command.add_argument('--kernels', dest='bound.kernels_path', help='kernel container to read')
    command.add_argument('--save-kernels', help='write computed kernels to this container')
    command.add_argument('--radius', type=float, dest='bound.radius')
    command.add_argument('--beta', type=float, dest='kernels.beta')
    command.set_defaults(handler=bound)

    command = commands.add_parser('attack-demo', help='accuracy under attack of an initialized network')
    command.add_argument('--radius', type=float)
    command.add_argument('--presets', action='store_true', help='also every benchmark evaluation attack')
    command.set_defaults(handler=attack_demo)

    command = commands.add_parser('train-demo', help='online or recipe training run')
    command.add_argument('--mode', choices=[m.value for m in TrainMode], dest='training.mode')
    command.add_argument('--iterations', type=int, dest='training.iterations')
    command.add_argument('--epochs', type=int, dest='training.epochs')
    command.add_argument('--save-weights', help='write trained weights to this container')
    command.set_defaults(handler=train_demo)

    command = commands.add_parser('ingest-check', help='counts of a benchmark file')
    command.add_argument('path', nargs='?', help='benchmark file (the configured one by default)')
    command.set_defaults(handler=ingest_check)

    command = commands.add_parser('analyze', help='benchmark statistics')
    command.add_argument('--metric', default=ROBUST_MEAN)
    command.add_argument('--top', type=int, default=10)
    command.set_defaults(handler=analyze)

    return parser


def _experiment(args) -> Experiment:
    overrides = {name: value for name, value in vars(args).items() if '.' in name}
    for name in ('seed', 'bench_path', 'output_dir', 'dataset'):
        overrides[name] = getattr(args, name)
    if getattr(args, 'path', None):
        overrides['bench_path'] = args.path
    if args.config:
        return Experiment.from_file(args.config, **overrides)
    return Experiment.from_dict({}, **overrides)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Runs the command line with ``argv`` (``sys.argv[1:]`` by default), returning the exit status.
    """

    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s', force=True)

    if args.jobs < 1:
        log.error("--jobs must be positive, got %d", args.jobs)
        return 1

    try:
        experiment = _experiment(args)
        experiment.write_config()
        return args.handler(experiment, args)
    except RobnasError as e:
        log.error("%s", e)
        return e.exit_code
