import os
from concurrent.futures import ThreadPoolExecutor


def lab_threads() -> int:
    try:
        return max(1, int(os.environ.get("LAB_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """``map`` over at most LAB_THREADS threads; results keep input order."""
    items = list(items)
    n = lab_threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
