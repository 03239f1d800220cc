import argparse
import logging
import statistics
import sys
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from stress_transfer import settings
from stress_transfer.config import CliConfig
from stress_transfer.container import load_model, read_container, save_model
from stress_transfer.evaluation import (compare_reports, evaluate, render_matrix, render_report,
                                        render_user_table)
from stress_transfer.exceptions import InvalidArgumentError, StressTransferError, WindowingError
from stress_transfer.items import WindowedDataset
from stress_transfer.live import KeySource, LiveSession, TerminalKeySource
from stress_transfer.model import (StressNet, TrainReport, build_base_model, cross_validate, predict_dataset,
                                   render_train_report, train)
from stress_transfer.pipelines import atomic_write_text, load_session_csv, write_session_csv
from stress_transfer.synth import synth_corpus
from stress_transfer.transfer import (AdaptationSpec, PersonalModel, adapt_head, baseline_on_target,
                                      cross_user_matrix, finetune, save_personal_model, split_user_data)
from stress_transfer.windowing import class_balance_report, concat_datasets, segment_windows


_logger = logging.getLogger(__name__)

BENCHMARK_RUNS = 3
OVERRIDE_FLAGS = ('seed', 'window', 'stride', 'epochs', 'lr', 'batch', 'speed')


def _session_paths(path: Path) -> list[Path]:
    if path.is_dir():
        paths = sorted(path.glob('*.csv'))
        if not paths:
            raise InvalidArgumentError(f'no session CSV files in {path}')
        return paths
    if not path.exists():
        raise InvalidArgumentError(f'data path {path} does not exist')
    return [path]


def _windows(path: Path, window_len: int, stride: int, keep_unlabeled: bool = False) -> WindowedDataset:
    return segment_windows(load_session_csv(path), window_len, stride, keep_unlabeled=keep_unlabeled)


def _check_window(model: StressNet, cfg: CliConfig) -> None:
    if model.window_len != cfg.window:
        _logger.warning(f'Model expects {model.window_len}-sample windows, ignoring --window {cfg.window}')


def cmd_synth(cfg: CliConfig, args: argparse.Namespace) -> int:
    out_dir = args.out or cfg.data_dir
    print(f'Generating {cfg.base_subjects} base subjects and {cfg.target_subjects} target users')
    base, targets = synth_corpus(cfg.base_subjects, cfg.target_subjects, cfg.seed)

    for group, sessions in (('base', base), ('target', targets)):
        for session in sessions:
            write_session_csv(session, out_dir / group / f'{session.subject_id}.csv')
        labels = np.concatenate([s.labels for s in sessions])
        print(f'\t{group}: {len(sessions)} sessions, {len(labels)} samples, '
              f'{class_balance_report(labels).describe()}')

    print(f'\tWrote sessions to {out_dir}')
    return 0


def cmd_train(cfg: CliConfig, args: argparse.Namespace) -> int:
    paths = _session_paths(args.data or cfg.data_dir / 'base')
    datasets = [_windows(p, cfg.window, cfg.stride) for p in paths]
    pooled = concat_datasets(datasets, subject_id='base')
    print(f'\t{len(pooled)} windows from {len(paths)} sessions: {class_balance_report(pooled).describe()}')

    factory = partial(build_base_model, hidden_width=cfg.hidden_width)
    report = TrainReport()
    if not args.no_cv:
        print(f'Running {cfg.folds}-fold cross-validation')
        cv_report = cross_validate(pooled, cfg.train_config(progress=True), k=cfg.folds,
                                   model_factory=factory)
        report.fold_accuracies = cv_report.fold_accuracies
        print(f'\tMean CV accuracy: {100 * cv_report.mean_cv_accuracy:.1f}%')

    print('Training base model on all windows')
    model = factory(cfg.window, cfg.seed)
    final_report = train(model, pooled, cfg.train_config(progress=True))
    report.epoch_losses = final_report.epoch_losses
    report.epoch_accuracies = final_report.epoch_accuracies
    print(f'\tTraining took {final_report.wall_time_s:.1f}s')

    out = args.out or cfg.model_dir / 'base.strscnn'
    save_model(model, model.norm_stats, out)
    report_path = cfg.report_dir / 'train_report.csv'
    atomic_write_text(report_path, render_train_report(report))
    print(f'\tSaved model to {out} and report to {report_path}')
    return 0


def _run_finetune(
        base: StressNet,
        user_data: WindowedDataset,
        cfg: CliConfig,
        user_id: str,
        progress: bool = True,
        ) -> tuple[PersonalModel, TrainReport]:
    spec = AdaptationSpec(hidden_width=cfg.hidden_width, finetune_config=cfg.finetune_config(progress), seed=cfg.seed)
    return finetune(adapt_head(base, spec), user_data, spec.finetune_config, user_id=user_id)


def _finetune_and_report(base: StressNet, user_data: WindowedDataset, cfg: CliConfig, user_id: str,
                         benchmark: bool = False) -> PersonalModel:
    _, test_set = split_user_data(user_data, seed=cfg.seed)
    before = baseline_on_target(base, test_set)
    print(f'\tBase model on {user_id}: accuracy {100 * before.accuracy:.1f}%, F1 {before.f1:.3f}')

    personal, report = _run_finetune(base, user_data, cfg, user_id)
    if report.holdout is None:
        print(f'\tNot enough windows to hold out a test split for {user_id}')
    else:
        after = report.holdout
        print(f'\tPersonalised model on {user_id}: accuracy {100 * after.accuracy:.1f}%, F1 {after.f1:.3f}')
        print(f'\t{compare_reports(before, after).describe()}')
    print(f'\tFine-tuning took {report.wall_time_s:.2f}s')

    if benchmark:
        times = [report.wall_time_s]
        for _ in range(BENCHMARK_RUNS - 1):
            times.append(_run_finetune(base, user_data, cfg, user_id, progress=False)[1].wall_time_s)
        print(f'\tFine-tune wall time over {BENCHMARK_RUNS} runs: '
              f'{", ".join(f"{t:.2f}s" for t in times)}; median {statistics.median(times):.2f}s')
    return personal


def cmd_finetune(cfg: CliConfig, args: argparse.Namespace) -> int:
    base, _ = load_model(args.base or cfg.model_dir / 'base.strscnn')
    _check_window(base, cfg)
    user_path = _session_paths(args.user)[0]
    user_data = _windows(user_path, base.window_len, cfg.stride)

    personal = _finetune_and_report(base, user_data, cfg, user_path.stem, benchmark=args.benchmark)
    out = args.out or cfg.model_dir / f'personal_{user_path.stem}.strscnn'
    save_personal_model(personal, out)
    print(f'\tSaved personalised model to {out}')
    return 0


def cmd_eval(cfg: CliConfig, args: argparse.Namespace) -> int:
    model, _ = load_model(args.model)
    paths = [p for path in args.data for p in _session_paths(path)]
    reports = []
    for path in paths:
        dataset = _windows(path, model.window_len, cfg.stride)
        if args.holdout:
            dataset = split_user_data(dataset, seed=cfg.seed)[1]
        report = evaluate(model, dataset)
        reports.append(report)
        print(f'{path.stem}:')
        print(render_report(report).text)

    if len(reports) == 1:
        rendered = render_report(reports[0])
    else:
        rendered = render_user_table(reports, users=[p.stem for p in paths])
        print(rendered.text)
    if args.out:
        atomic_write_text(args.out, rendered.csv)
        print(f'\tSaved report to {args.out}')
    return 0


def cmd_crosseval(cfg: CliConfig, args: argparse.Namespace) -> int:
    models = [read_container(path)[0] for path in args.models]
    paths = [p for path in args.data for p in _session_paths(path)]
    datasets = [_windows(p, models[0].window_len, cfg.stride) for p in paths]

    matrix = cross_user_matrix(models, datasets, seed=cfg.seed, progress=True)
    rendered = render_matrix(matrix)
    print(rendered.text)

    out = args.out or cfg.report_dir / 'cross_user.csv'
    atomic_write_text(out, rendered.csv)
    print(f'\tSaved matrix to {out}')
    return 0


def cmd_predict(cfg: CliConfig, args: argparse.Namespace) -> int:
    model, _ = load_model(args.model)
    dataset = _windows(_session_paths(args.session)[0], model.window_len, cfg.stride, keep_unlabeled=True)
    predictions, probs = predict_dataset(model, dataset)

    df = pd.DataFrame({
        'start_ms': dataset.start_ms,
        'label': predictions,
        'p_relaxed': probs[:, settings.RELAXED],
        'p_stressed': probs[:, settings.STRESSED],
        'recorded_label': dataset.labels,
        })
    text = df.to_csv(index=False, float_format='%.6f', lineterminator='\n')
    if args.out:
        atomic_write_text(args.out, text)
        print(f'\tWrote {len(df)} predictions to {args.out}')
    else:
        sys.stdout.write(text)
    return 0


def cmd_live(
        cfg: CliConfig,
        args: argparse.Namespace,
        key_source: KeySource | None = None,
        ask: Callable[[str], str] = input,
        ) -> int:
    model, _ = load_model(args.model)
    source_path = _session_paths(args.session)[0]
    source = load_session_csv(source_path)
    if len(source) < model.window_len:
        raise WindowingError(f'session {source_path} is shorter than one {model.window_len}-sample window')
    out = args.out or cfg.data_dir / 'live' / f'{source_path.stem}_labelled.csv'

    print(f'Replaying {source_path} at {cfg.speed:g}x; keys: s = stressed, r = relaxed, u = unlabeled, q = quit')
    terminal = key_source is None
    keys = TerminalKeySource() if terminal else key_source
    session = LiveSession(model, source, out, keys, speed=cfg.speed, stride=cfg.stride)
    if terminal:
        with keys:
            result = session.run()
    else:
        result = session.run()

    print(f'\t{result.emitted} samples written to {out}, {result.labelled} labelled')
    if result.labelled == 0:
        return 0

    answer = ask('Fine-tune on the labelled data now? [y/N] ')
    if answer.strip().lower() not in ('y', 'yes'):
        return 0

    # base layers come from the model used for the replay
    user_data = _windows(out, model.window_len, cfg.stride)
    personal = _finetune_and_report(model, user_data, cfg, source_path.stem)
    personal_path = cfg.model_dir / f'personal_{source_path.stem}.strscnn'
    save_personal_model(personal, personal_path)
    print(f'\tSaved personalised model to {personal_path}')
    return 0


COMMANDS = {
    'synth': cmd_synth,
    'train': cmd_train,
    'finetune': cmd_finetune,
    'eval': cmd_eval,
    'crosseval': cmd_crosseval,
    'predict': cmd_predict,
    'live': cmd_live,
    }


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, default=None,
                        help=f'INI configuration file, defaults to {settings.CONFIG_FILE} when present')
    common.add_argument('-l', '--log_level', type=str, default=settings.LOG_LEVEL.lower(),
                        choices=('debug', 'info', 'warning', 'error', 'critical'), help='log level to debug')
    common.add_argument('--seed', type=int, help='random seed')
    common.add_argument('--window', type=int, help='window length in samples')
    common.add_argument('--stride', type=int, help='window stride in samples')
    common.add_argument('--epochs', type=int, help='training epochs')
    common.add_argument('--lr', type=float, help='base learning rate')
    common.add_argument('--batch', type=int, help='mini-batch size')
    common.add_argument('--speed', type=float, help='live replay speed multiplier')

    parser = argparse.ArgumentParser(
        prog='stress-transfer',
        description='Train a 1D CNN stress classifier and personalise it with transfer learning')
    subparsers = parser.add_subparsers(dest='command', required=True)

    synth = subparsers.add_parser('synth', parents=[common], help='generate the synthetic corpus')
    synth.add_argument('-o', '--out', type=Path, help='output directory, defaults to data_dir')

    train_cmd = subparsers.add_parser('train', parents=[common], help='cross-validate and train the base model')
    train_cmd.add_argument('-d', '--data', type=Path, help='session CSV or directory, defaults to data_dir/base')
    train_cmd.add_argument('-o', '--out', type=Path, help='model file, defaults to model_dir/base.strscnn')
    train_cmd.add_argument('--no_cv', action='store_true', help='if included, skip cross-validation')

    finetune_cmd = subparsers.add_parser('finetune', parents=[common], help='personalise the base model for a user')
    finetune_cmd.add_argument('-b', '--base', type=Path, help='base model, defaults to model_dir/base.strscnn')
    finetune_cmd.add_argument('-u', '--user', type=Path, required=True, help='user session CSV')
    finetune_cmd.add_argument('-o', '--out', type=Path, help='personalised model file')
    finetune_cmd.add_argument('--benchmark', action='store_true',
                              help=f'if included, time {BENCHMARK_RUNS} fine-tunes and report the median')

    eval_cmd = subparsers.add_parser('eval', parents=[common], help='evaluate a model on session data')
    eval_cmd.add_argument('-m', '--model', type=Path, required=True, help='model file')
    eval_cmd.add_argument('-d', '--data', type=Path, nargs='+', required=True, help='session CSVs or directories')
    eval_cmd.add_argument('--holdout', action='store_true', help='if included, evaluate the held-out split only')
    eval_cmd.add_argument('-o', '--out', type=Path, help='CSV report file')

    cross = subparsers.add_parser('crosseval', parents=[common], help='evaluate every model on every user')
    cross.add_argument('-m', '--models', type=Path, nargs='+', required=True, help='model files')
    cross.add_argument('-d', '--data', type=Path, nargs='+', required=True, help='user session CSVs')
    cross.add_argument('-o', '--out', type=Path, help='CSV matrix file, defaults to report_dir/cross_user.csv')

    predict_cmd = subparsers.add_parser('predict', parents=[common], help='classify every window of a session')
    predict_cmd.add_argument('-m', '--model', type=Path, required=True, help='model file')
    predict_cmd.add_argument('-s', '--session', type=Path, required=True, help='session CSV')
    predict_cmd.add_argument('-o', '--out', type=Path, help='CSV file, standard output when omitted')

    live = subparsers.add_parser('live', parents=[common], help='replay a session and label it from the keyboard')
    live.add_argument('-m', '--model', type=Path, required=True, help='model file')
    live.add_argument('-s', '--session', type=Path, required=True, help='session CSV to replay')
    live.add_argument('-o', '--out', type=Path, help='labelled session CSV, overwritten by each run')

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=settings.LOG_FORMAT)

    try:
        cfg = CliConfig.load(args.config, {flag: getattr(args, flag) for flag in OVERRIDE_FLAGS})
        print('# effective configuration', file=sys.stderr)
        print(cfg.render(), file=sys.stderr, end='')
        return COMMANDS[args.command](cfg, args)
    except StressTransferError as e:
        print(f'error: {e}', file=sys.stderr)
        return 1
    except OSError as e:
        print(f'error: {e}', file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
