"""Writers for reports, forecasts, sparsity patterns and heatmaps.

Every file goes through an ArtifactWriter, which keeps track of what it wrote so that a
failing command can remove its partial outputs.
"""
import json
import logging
from pathlib import Path
from types import TracebackType
from typing import Any, Optional, Sequence, Type, Union

import numpy as np
import pandas as pd

from varcast.evaluation import CvResult, EvaluationReport
from varcast.models.series import TimeIndex
from varcast.models.varx import SparsityPattern

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


class ArtifactWriter:
    """Writes files into one output directory and remembers them.

    Used as a context manager, every file written inside the block is deleted if the block
    raises.

    Instance Attributes:
        out_dir: The output directory.
        written: The files written so far, in order.
    """

    out_dir: Path
    written: list[Path]

    def __init__(self, out_dir: Union[str, Path]) -> None:
        self.out_dir = Path(out_dir)
        self.written = []

    def __enter__(self) -> 'ArtifactWriter':
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type: Optional[Type[BaseException]],
                 exc_value: Optional[BaseException],
                 traceback: Optional[TracebackType]) -> bool:
        if exc_type is not None:
            self.cleanup()
        return False

    def path(self, name: str) -> Path:
        """Return the path of a file called name directly inside the output directory."""
        if not name or Path(name).name != name or name in {'.', '..'}:
            raise ValueError(f'invalid artifact name ("{name}")')
        return self.out_dir / name

    def track(self, path: Path) -> Path:
        """Record a file written into the output directory by other code."""
        if path not in self.written:
            self.written.append(path)
        logger.debug('wrote %s', path)
        return path

    def write_frame(self, name: str, frame: pd.DataFrame, index: bool = False) -> Path:
        """Write frame as CSV with full float precision."""
        path = self.path(name)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=index, float_format=FLOAT_FORMAT)
        return self.track(path)

    def write_json(self, name: str, record: Any) -> Path:
        """Write record as indented JSON with sorted keys."""
        path = self.path(name)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(record, indent=2, sort_keys=True) + '\n', encoding='utf-8')
        return self.track(path)

    def write_heatmap(self, name: str, matrix: np.ndarray, row_labels: Sequence[str],
                      column_labels: Sequence[str], title: str) -> Path:
        """Write a heatmap of matrix as a reproducible SVG."""
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt

        path = self.path(name)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with matplotlib.rc_context({'svg.hashsalt': 'varcast', 'svg.fonttype': 'none'}):
            width = max(4.0, 0.4 * len(column_labels) + 2.0)
            height = max(3.0, 0.4 * len(row_labels) + 1.5)
            fig, ax = plt.subplots(figsize=(width, height))
            try:
                image = ax.imshow(matrix, cmap='Greys', aspect='auto', vmin=0.0)
                ax.set_xticks(range(len(column_labels)))
                ax.set_xticklabels(column_labels, rotation=90, fontsize=7)
                ax.set_yticks(range(len(row_labels)))
                ax.set_yticklabels(row_labels, fontsize=7)
                ax.set_title(title)
                fig.colorbar(image, ax=ax)
                fig.tight_layout()
                fig.savefig(path, format='svg', metadata={'Date': None})
            finally:
                plt.close(fig)
        return self.track(path)

    def cleanup(self) -> None:
        """Delete every file written so far."""
        for path in reversed(self.written):
            try:
                path.unlink()
            except FileNotFoundError:
                pass
        if self.written:
            logger.info('removed %d partial output files from %s', len(self.written), self.out_dir)
        self.written = []


def _cv_frame(cv: CvResult) -> pd.DataFrame:
    return pd.DataFrame({
        'lambda': cv.grid,
        'mse': cv.scores,
        'selected': [lam == cv.selected_lambda for lam in cv.grid],
    })


def write_cv(writer: ArtifactWriter, cv: CvResult, name: str = 'cv.csv') -> Path:
    """Write the score of every penalty of a cross-validation run."""
    return writer.write_frame(name, _cv_frame(cv))


def write_report(writer: ArtifactWriter, report: EvaluationReport) -> list[Path]:
    """Write report.csv, report.json, lambdas.csv and one forecasts_<variant>.csv per variant."""
    paths = [writer.write_frame('report.csv', report.to_frame(), index=True)]

    lambdas = []
    variants = {}
    for variant, outcome in report.outcomes.items():
        frame = _cv_frame(outcome.cv)
        frame.insert(0, 'variant', variant.value)
        lambdas.append(frame)
        variants[variant.value] = {
            'description': variant.description,
            'selected_lambda': outcome.cv.selected_lambda,
            'grid': list(outcome.cv.grid),
            'cv_mse': list(outcome.cv.scores),
            'nonzero': int(np.count_nonzero(outcome.model.stacked())),
            'spectral_radius': outcome.model.spectral_radius(),
            'mean_rmse': report.mean_rmse(variant),
        }

        predictions = outcome.predictions.to_long().rename(columns={'series': 'region',
                                                                    'value': 'predicted'})
        predictions.insert(2, 'actual', outcome.actuals.to_long()['value'])
        paths.append(writer.write_frame(f'forecasts_{variant.value}.csv',
                                        predictions[['week', 'region', 'actual', 'predicted']]))

    paths.append(writer.write_frame('lambdas.csv', pd.concat(lambdas, ignore_index=True)))
    paths.append(writer.write_json('report.json', {
        'config': report.config,
        'scale': report.config.get('scale'),
        'regions': list(report.regions),
        'rmse': report.per_region_rmse,
        'variants': variants,
    }))
    return paths


def write_sparsity(writer: ArtifactWriter, pattern: SparsityPattern,
                   svg: bool = False) -> list[Path]:
    """Write one CSV (and optionally one SVG heatmap) per Θ and β lag."""
    paths = []
    blocks = [('theta', i + 1, matrix, pattern.response_labels)
              for i, matrix in enumerate(pattern.theta)]
    blocks += [('beta', j + 1, matrix, pattern.exogenous_labels)
               for j, matrix in enumerate(pattern.beta)]
    for kind, lag, matrix, columns in blocks:
        frame = pd.DataFrame(matrix, index=pd.Index(pattern.response_labels, name='region'),
                             columns=list(columns))
        paths.append(writer.write_frame(f'{kind}_lag{lag}.csv', frame, index=True))
        if svg:
            paths.append(writer.write_heatmap(f'{kind}_lag{lag}.svg', matrix,
                                              pattern.response_labels, columns,
                                              f'|{kind}| at lag {lag}'))
    return paths


def write_forecast(writer: ArtifactWriter, labels: Sequence[str], forecasts: np.ndarray,
                   index: TimeIndex, levels: Optional[np.ndarray] = None) -> Path:
    """Write forecast.csv with one row per forecast week and region.

    forecasts holds the differenced forecasts (k x h) of the weeks in index; levels, when
    given, holds the same forecasts on the raw scale.
    """
    rows = []
    for step in range(forecasts.shape[1]):
        for i, label in enumerate(labels):
            row = {
                'week': index.week_ending(step).isoformat(),
                'horizon': step + 1,
                'region': label,
                'forecast': forecasts[i, step],
            }
            if levels is not None:
                row['level'] = levels[i, step]
            rows.append(row)
    return writer.write_frame('forecast.csv', pd.DataFrame(rows))
