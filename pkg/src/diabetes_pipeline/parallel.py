"""Worker-count resolution and an order-preserving parallel map."""

import os

WORKERS_ENV = "DIABETES_PIPELINE_WORKERS"


def resolve_workers(n_jobs=None):
    """Explicit argument, else the environment variable, else 1."""
    if n_jobs is None:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            n_jobs = int(raw)
        except ValueError:
            n_jobs = 1
    return max(1, int(n_jobs))


def parallel_map(fn, items, n_jobs=None):
    items = list(items)
    n_jobs = min(resolve_workers(n_jobs), max(1, len(items)))
    if n_jobs == 1:
        return [fn(item) for item in items]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(item) for item in items)
