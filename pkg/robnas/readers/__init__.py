from .file_reader import FileReader
from .bench import ingest, write_bench
from .config import read_config
from .container import load_kernels, load_samples, load_weights

__all__ = [
    "FileReader",
    "ingest",
    "write_bench",
    "read_config",
    "load_kernels",
    "load_samples",
    "load_weights",
]
