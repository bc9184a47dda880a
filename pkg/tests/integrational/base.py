import os
import time
from collections import Counter
from contextlib import contextmanager

from robnas.experiment import DATA_ENV

stats = Counter()


def bench_path():
    # Real-data reports are skipped without a benchmark file
    return os.environ.get(DATA_ENV)


def section(title):
    print()
    print(title)
    print('=' * len(title))


@contextmanager
def timed(label):
    # Seconds land in the yielded dict when the block ends
    elapsed = {}
    start = time.monotonic()
    yield elapsed
    elapsed['seconds'] = time.monotonic() - start
    print(f"  {label}: {elapsed['seconds']:.2f}s")


def report(name, ok, details=None, pending=False):
    stats['total'] += 1
    if pending:
        stats['pending'] += 1
        print(f"*{name}: pending{f' ({details})' if details else ''}")
        return

    stats['ok' if ok else 'fail'] += 1
    print(f"{name}: {'OK' if ok else 'FAIL'}{f' ({details})' if details else ''}")


def summary():
    res = f"{stats['total']} checks: {stats['ok']} OK, {stats['pending']} pending, {stats['fail']} fails"

    print()
    print("------------")
    print(res)
