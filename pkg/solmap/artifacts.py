"""
Run outputs: CSV tables, gnuplot data files and the run manifest.

All files of a run are written by one ArtifactWriter on the calling thread.
Numbers are printed with 17 significant digits and nothing time-dependent is
recorded, so identical configurations give byte-identical outputs.
"""
import csv
import hashlib
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, Union

import numpy as np

from .conf import lab_settings
from .function_core import CylFn

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return f'{value:.{lab_settings.SIGNIFICANT_DIGITS}g}'
    if isinstance(value, (complex, np.complexfloating)):
        return f'{format_value(value.real)}{"+" if value.imag >= 0 else "-"}{format_value(abs(value.imag))}j'
    if value is None:
        return ''
    return str(value)


def config_hash(config: Mapping[str, Any]) -> str:
    """sha256 over the sorted key=value rendering of a configuration."""
    text = '\n'.join(f'{key}={format_value(config[key])}' for key in sorted(config))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


class ArtifactWriter:
    """Write the files of one run into `directory`.

    Example:

            writer = ArtifactWriter('out', 'bvp', config)
            writer.table('solution', ('s', 'y'), rows)
            writer.record('newton.steps', 4)
            writer.finish()
    """

    def __init__(self, directory: Union[str, Path], command: str, config: Mapping[str, Any]):
        self.directory = Path(directory)
        self.command = command
        self.config = dict(config)
        self.entries: dict[str, str] = {}
        self.files: list[str] = []
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        self.files.append(name)
        return self.directory / name

    def table(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """RFC 4180 CSV with a header row."""
        path = self._path(f'{name}.csv')
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\r\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
        logger.debug('wrote %s', path)
        return path

    def records(self, name: str, rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> Path:
        return self.table(name, columns, ([row.get(c) for c in columns] for row in rows))

    def field(self, name: str, y: CylFn, column: str = 'y') -> None:
        """A 2-D field as CSV plus a gnuplot block file (one block per time row)."""
        self.table(name, ('t', 'eta', column), y.csv_rows())
        path = self._path(f'{name}.dat')
        times, thetas = y.grid.times, y.grid.thetas
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(f'# t eta {column}\n')
            for k, t in enumerate(times):
                for m, eta in enumerate(thetas):
                    f.write(f'{format_value(t)} {format_value(eta)} {format_value(y.values[k, m])}\n')
                f.write('\n')

    def record(self, key: str, value: Any) -> None:
        self.entries[key] = format_value(value)

    def record_all(self, prefix: str, values: Mapping[str, Any]) -> None:
        for key, value in values.items():
            self.record(f'{prefix}.{key}' if prefix else key, value)

    def finish(self, exit_code: int = 0) -> Path:
        """Write manifest.txt: sorted key=value lines."""
        entries = dict(self.entries)
        entries['command'] = self.command
        entries['config_hash'] = config_hash(self.config)
        entries['exit_code'] = str(exit_code)
        entries['files'] = ','.join(sorted(set(self.files)))
        for key, value in self.config.items():
            entries[f'config.{key}'] = format_value(value)
        path = self.directory / 'manifest.txt'
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            for key in sorted(entries):
                f.write(f'{key}={entries[key]}\n')
        return path
