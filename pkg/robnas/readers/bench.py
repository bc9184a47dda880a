"""
Reading and writing benchmark files.

Two formats are understood:

* ``jsonl`` (canonical): one JSON object per line with keys ``genotype``, ``dataset``, ``seed`` and
  ``metrics``; files may be gzip-compressed (``*.jsonl.gz``);
* ``csv``: a header starting with :data:`CSV_HEADER`, any further columns are additional metrics
  (an empty cell means "absent for this record").

Any schema violation is reported as :class:`ParseError <robnas.errors.ParseError>` with the line
number. Writing a store back produces the canonical form, so for a file written by
:func:`write_bench` reading and writing again gives the same bytes.

The released benchmark data may need an adapter producing one of these formats; this module
does not guess other layouts.

.. autofunction:: ingest
.. autofunction:: read_bench
.. autofunction:: write_bench
"""

import csv
import json
import logging
from pathlib import Path
from typing import Dict, Iterator, Optional, TextIO, Tuple, Union

from robnas.algo.cellspace import parse_genotype
from robnas.data.bench import METRICS, BenchRecord, BenchStore
from robnas.errors import ParseError, ValidationError
from robnas.readers.file_reader import BaseReader, open_reader

log = logging.getLogger(__name__)

FORMATS = ('jsonl', 'csv')

#: Required leading columns of a CSV benchmark file
CSV_HEADER = ('genotype', 'dataset', 'seed', *METRICS)

JSON_KEYS = ('genotype', 'dataset', 'seed', 'metrics')


def ingest(path: Union[str, Path], format: Optional[str] = None) -> BenchStore:  # pylint: disable=redefined-builtin
    """
    Reads benchmark file into a :class:`BenchStore <robnas.data.bench.BenchStore>`.

    Args:
        path: ``*.jsonl``, ``*.jsonl.gz`` or ``*.csv`` file
        format: ``jsonl`` or ``csv``; guessed from the file name by default

    Raises:
        NotFoundError: when the file doesn't exist
        ParseError: on a schema violation or a duplicate record (with the line number)
    """
    path = Path(path)
    if format is None:
        format = 'csv' if '.csv' in path.suffixes else 'jsonl'
    with open_reader(path) as source:
        store = read_bench(source, format)
    log.info("Ingested %d records (%s) from %s", len(store), ', '.join(d.value for d in store.datasets), path)
    return store


def read_bench(source: BaseReader, format: str = 'jsonl') -> BenchStore:  # pylint: disable=redefined-builtin
    """
    Reads benchmark records from a line reader.
    """

    if format not in FORMATS:
        raise ValidationError(f"Unknown benchmark format {format!r}, expected one of {', '.join(FORMATS)}")

    seen: Dict[tuple, int] = {}
    records = []
    for num, record in (_jsonl_records(source) if format == 'jsonl' else _csv_records(source)):
        if record.key in seen:
            genotype, dataset, seed = record.key
            raise ParseError(f"Duplicate record {genotype} / {dataset.value} / seed {seed} "
                             f"(first at line {seen[record.key]})", line_no=num)
        seen[record.key] = num
        records.append(record)

    return BenchStore(records)


def _record(num: int, genotype, dataset, seed, metrics) -> BenchRecord:
    if not isinstance(genotype, str):
        raise ParseError(f"Genotype should be a string, got {genotype!r}", line_no=num)
    try:
        return BenchRecord(parse_genotype(genotype), dataset, seed, metrics)
    except ValidationError as e:
        raise ParseError(str(e), line_no=num) from None


def _jsonl_records(source: BaseReader) -> Iterator[Tuple[int, BenchRecord]]:
    for num, line in source:
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"Invalid JSON: {e.msg}", line_no=num) from None

        if not isinstance(data, dict):
            raise ParseError(f"Expected JSON object, got {type(data).__name__}", line_no=num)
        missing = [key for key in JSON_KEYS if key not in data]
        if missing:
            raise ParseError(f"Missing keys: {', '.join(missing)}", line_no=num)
        unknown = [key for key in data if key not in JSON_KEYS]
        if unknown:
            raise ParseError(f"Unknown keys: {', '.join(unknown)}", line_no=num)
        if not isinstance(data['metrics'], dict):
            raise ParseError("metrics should be an object", line_no=num)

        yield num, _record(num, data['genotype'], data['dataset'], data['seed'], data['metrics'])


def _csv_records(source: BaseReader) -> Iterator[Tuple[int, BenchRecord]]:
    header: Optional[Tuple[str, ...]] = None
    for num, line in source:
        row = next(csv.reader([line]))
        if header is None:
            if tuple(row[:len(CSV_HEADER)]) != CSV_HEADER:
                raise ParseError(f"CSV header should start with {','.join(CSV_HEADER)}", line_no=num)
            header = tuple(row)
            continue

        if len(row) != len(header):
            raise ParseError(f"Expected {len(header)} columns, got {len(row)}", line_no=num)

        genotype, dataset, seed, *values = row
        try:
            seed = int(seed)
        except ValueError:
            raise ParseError(f"Seed should be an integer, got {seed!r}", line_no=num) from None

        metrics = {}
        for name, value in zip(header[3:], values):
            if value == '' and name not in METRICS:
                continue
            try:
                metrics[name] = float(value)
            except ValueError:
                raise ParseError(f"Accuracy {name} should be a number, got {value!r}", line_no=num) from None

        yield num, _record(num, genotype, dataset, seed, metrics)


def write_bench(store: BenchStore, stream: TextIO, format: str = 'jsonl'):  # pylint: disable=redefined-builtin
    """
    Writes the store in canonical form, records in store order.
    """

    if format == 'jsonl':
        for record in store:
            data = {'genotype': str(record.genotype), 'dataset': record.dataset.value, 'seed': record.seed,
                    'metrics': dict(record.metrics)}
            stream.write(json.dumps(data) + '\n')
    elif format == 'csv':
        extra = [name for name in dict.fromkeys(name for record in store for name in record.metrics)
                 if name not in METRICS]
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow((*CSV_HEADER, *extra))
        for record in store:
            writer.writerow((str(record.genotype), record.dataset.value, record.seed,
                             *(record.metrics.get(name, '') for name in (*METRICS, *extra))))
    else:
        raise ValidationError(f"Unknown benchmark format {format!r}, expected one of {', '.join(FORMATS)}")
