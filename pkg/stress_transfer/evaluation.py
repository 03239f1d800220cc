import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from stress_transfer import settings
from stress_transfer.exceptions import InvalidArgumentError
from stress_transfer.items import WindowedDataset
from stress_transfer.model import StressNet, predict_dataset


_logger = logging.getLogger(__name__)

POSITIVE_CLASS = settings.STRESSED


class RenderedTable(NamedTuple):
    text: str
    csv: str


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # [actual, predicted]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (settings.CLASS_COUNT, settings.CLASS_COUNT):
            raise InvalidArgumentError(f'confusion counts must be {settings.CLASS_COUNT}x{settings.CLASS_COUNT}')
        if np.any(counts < 0):
            raise InvalidArgumentError('confusion counts must be non-negative')
        object.__setattr__(self, 'counts', counts)

    @classmethod
    def from_labels(cls, y_true, y_pred) -> 'ConfusionMatrix':
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.shape != y_pred.shape:
            raise InvalidArgumentError(f'{len(y_true)} labels but {len(y_pred)} predictions')
        valid = (0 <= y_true) & (y_true < settings.CLASS_COUNT)
        if not valid.all():
            raise InvalidArgumentError('evaluation needs labelled windows only')
        counts = np.zeros((settings.CLASS_COUNT, settings.CLASS_COUNT), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    __hash__ = None

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def tp(self) -> int:
        return int(self.counts[POSITIVE_CLASS, POSITIVE_CLASS])

    @property
    def fp(self) -> int:
        return int(self.counts[1 - POSITIVE_CLASS, POSITIVE_CLASS])

    @property
    def fn(self) -> int:
        return int(self.counts[POSITIVE_CLASS, 1 - POSITIVE_CLASS])

    @property
    def tn(self) -> int:
        return int(self.counts[1 - POSITIVE_CLASS, 1 - POSITIVE_CLASS])

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.counts,
            index=[f'actual {name}' for name in settings.CLASS_NAMES],
            columns=[f'predicted {name}' for name in settings.CLASS_NAMES],
            )


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator > 0 else 0.


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: tuple[float, ...]  # per class
    recall: tuple[float, ...]
    f1: float  # positive class is stressed
    confusion: ConfusionMatrix
    n: int

    @classmethod
    def from_confusion(cls, confusion: ConfusionMatrix) -> 'EvalReport':
        counts = confusion.counts
        n = confusion.total
        if n == 0:
            raise InvalidArgumentError('cannot report on zero evaluated windows')

        precision = tuple(_ratio(int(counts[c, c]), int(counts[:, c].sum())) for c in range(len(counts)))
        recall = tuple(_ratio(int(counts[c, c]), int(counts[c, :].sum())) for c in range(len(counts)))
        p, r = precision[POSITIVE_CLASS], recall[POSITIVE_CLASS]
        return cls(
            accuracy=_ratio(int(np.trace(counts)), n),
            precision=precision,
            recall=recall,
            f1=2 * p * r / (p + r) if p + r > 0 else 0.,
            confusion=confusion,
            n=n,
            )


def report_from_predictions(y_true, y_pred) -> EvalReport:
    return EvalReport.from_confusion(ConfusionMatrix.from_labels(y_true, y_pred))


def evaluate(model: StressNet, dataset: WindowedDataset) -> EvalReport:
    '''Window-level metrics of `model` on a raw or model-normalised dataset.'''
    if len(dataset) == 0:
        raise InvalidArgumentError(f'dataset {dataset.subject_id!r} is empty')
    predictions, _ = predict_dataset(model, dataset)
    report = report_from_predictions(dataset.labels, predictions)
    _logger.info(f'{dataset.subject_id}: accuracy {report.accuracy:.4f}, F1 {report.f1:.4f} on {report.n} windows')
    return report


def _pct(value: float) -> str:
    return f'{100 * value:.1f}'


def _csv(df: pd.DataFrame, index: bool) -> str:
    return df.to_csv(index=index, lineterminator='\n')


def render_report(report: EvalReport) -> RenderedTable:
    '''
    Metrics table followed by the confusion matrix. CSV columns are
    `metric,value`; percentages carry one decimal, F1 three.
    '''
    metrics = [('ACCURACY', _pct(report.accuracy))]
    for c, name in enumerate(settings.CLASS_NAMES):
        metrics.append((f'PRECISION {name.upper()}', _pct(report.precision[c])))
        metrics.append((f'RECALL {name.upper()}', _pct(report.recall[c])))
    metrics.append(('F1-SCORE', f'{report.f1:.3f}'))
    metrics.append(('WINDOWS', str(report.n)))
    confusion = [(f'{actual} as {predicted}', str(int(report.confusion.counts[i, j])))
                 for i, actual in enumerate(settings.CLASS_NAMES)
                 for j, predicted in enumerate(settings.CLASS_NAMES)]

    # the text form shows the confusion counts as a matrix instead
    text = (pd.DataFrame(metrics).to_string(index=False, header=False) + '\n\n'
            + report.confusion.frame().to_string() + '\n')
    return RenderedTable(text, _csv(pd.DataFrame(metrics + confusion, columns=['metric', 'value']), index=False))


def render_user_table(reports: Sequence[EvalReport], users: Sequence[str] | None = None) -> RenderedTable:
    '''ACCURACY and F1-SCORE rows, one column per user.'''
    users = list(users) if users is not None else [f'USER {i + 1}' for i in range(len(reports))]
    if len(users) != len(reports):
        raise InvalidArgumentError(f'{len(reports)} reports but {len(users)} user names')

    df = pd.DataFrame(
        [[_pct(r.accuracy) for r in reports], [f'{r.f1:.3f}' for r in reports]],
        index=['ACCURACY', 'F1-SCORE'],
        columns=users,
        )
    text = df.copy()
    text.loc['ACCURACY'] = [f'{v}%' for v in df.loc['ACCURACY']]
    return RenderedTable(text.to_string() + '\n', _csv(df, index=True))


def render_matrix(
        matrix: np.ndarray,
        users: Sequence[str] | None = None,
        models: Sequence[str] | None = None,
        ) -> RenderedTable:
    '''Cross-user accuracies: row i is user i's data, column j is model j, in percent.'''
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    n_users, n_models = matrix.shape
    users = list(users) if users is not None else [f'USER {i + 1} DATA' for i in range(n_users)]
    models = list(models) if models is not None else [f'MODEL {j + 1}' for j in range(n_models)]

    df = pd.DataFrame([[_pct(v) for v in row] for row in matrix], index=users, columns=models)
    return RenderedTable(df.to_string() + '\n', _csv(df, index=True))


@dataclass(frozen=True)
class ReportComparison:
    accuracy_before: float
    accuracy_after: float
    f1_before: float
    f1_after: float

    @property
    def accuracy_delta_points(self) -> float:
        return 100 * (self.accuracy_after - self.accuracy_before)

    @property
    def f1_delta(self) -> float:
        return self.f1_after - self.f1_before

    def describe(self) -> str:
        return (f'accuracy {_pct(self.accuracy_before)}% -> {_pct(self.accuracy_after)}% '
                f'({self.accuracy_delta_points:+.1f} points), '
                f'F1 {self.f1_before:.3f} -> {self.f1_after:.3f} ({self.f1_delta:+.3f})')


def compare_reports(before: EvalReport, after: EvalReport) -> ReportComparison:
    return ReportComparison(before.accuracy, after.accuracy, before.f1, after.f1)
