"""
.. autoclass:: BaseReader
    :members:

.. autoclass:: FileReader
.. autoclass:: GzipReader
"""

import gzip
import io
from pathlib import Path
from typing import Iterator, TextIO, Tuple, Union

from robnas.errors import NotFoundError


class BaseReader:
    """
    Common base for :class:`FileReader` and :class:`GzipReader`. In fact, it is a very thin wrapper
    around ``IO``-alike object, to read it line by line and:

    * strip lines transparently
    * ignore BOM (byte-order mark) at the beginning
    * skip empty lines
    * yield line with its number (1-based), so parse errors can point at it::

        for num, line in reader:
            record = json.loads(line)

    Any text stream (``io.StringIO`` in tests) can be wrapped directly: ``BaseReader(stream)``.
    """

    def __init__(self, obj: TextIO):
        self.line_no = 0
        self.io = obj
        self.iter = filter(lambda l: l[1] != '', self.readlines())

    def __iter__(self):
        return self

    def __next__(self) -> Tuple[int, str]:
        return self.iter.__next__()

    def readlines(self) -> Iterator[Tuple[int, str]]:
        ln = self.io.readline()
        while ln != '':
            self.line_no += 1
            if self.line_no == 1:
                ln = ln.lstrip('\ufeff')
            yield (self.line_no, ln.strip())
            ln = self.io.readline()

    def close(self):
        self.io.close()

    def __enter__(self):
        return self

    def __exit__(self, *_):
        self.close()


class FileReader(BaseReader):
    """
    Reader implementation for simple filesystem file.

    Raises:
        NotFoundError: if the file doesn't exist
    """

    def __init__(self, path: Union[str, Path], encoding: str = 'utf-8'):
        self.path = Path(path)
        super().__init__(self._open(self.path, encoding))

    def _open(self, path: Path, encoding: str) -> TextIO:  # pylint: disable=no-self-use
        if not path.is_file():
            raise NotFoundError(f"File not found: {path}")
        return open(path, 'r', encoding=encoding)


class GzipReader(FileReader):
    """
    Reader implementation for gzip-compressed file (the full benchmark is distributed as
    ``*.jsonl.gz``).
    """

    def _open(self, path: Path, encoding: str) -> TextIO:  # pylint: disable=no-self-use
        if not path.is_file():
            raise NotFoundError(f"File not found: {path}")
        return io.TextIOWrapper(gzip.open(path, 'rb'), encoding=encoding)


def open_reader(path: Union[str, Path]) -> FileReader:
    """
    :class:`GzipReader` for ``*.gz`` paths, :class:`FileReader` for everything else.
    """
    path = Path(path)
    return GzipReader(path) if path.suffix == '.gz' else FileReader(path)
