"""Order-preserving process-pool map; results never depend on the worker count."""
import os
from concurrent.futures import ProcessPoolExecutor


def default_workers() -> int:
    env = os.environ.get("VIADEL_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def pmap(func, items, workers=None, chunksize=1):
    items = list(items)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=chunksize))
