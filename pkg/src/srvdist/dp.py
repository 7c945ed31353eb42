"""Windowed dynamic-programming matcher.

Same objective and edge weights as the exact matcher, restricted to jumps of
at most ``window`` intervals in each curve.  Horizontal and vertical unit steps
are only available along the grid boundary, so the search space is a subset of
the exact one and the resulting distance is an over-estimate.
"""

from __future__ import annotations

from functools import partial

from .curves import Curve, SrvFunction, resample_uniform
from .exact import MatchingPath, run_longest_path

DEFAULT_WINDOW = 6


def dp_match(q1: SrvFunction, q2: SrvFunction, window: int = DEFAULT_WINDOW) -> MatchingPath:
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    return run_longest_path(q1, q2, window=window, hv_anywhere=False, prune=True)


def dp_distance(c1: Curve, c2: Curve, n_resample: int | None = None, window: int = DEFAULT_WINDOW,
                with_rotation: bool = True, seeds: int = 8, **opts):
    """Shape distance with the windowed matcher.

    ``n_resample`` resamples both curves uniformly in arc length first; the
    default keeps the given sampling, so the over-estimate property against
    the exact matcher on the same vertices holds.
    """
    from .quotient import shape_distance

    if n_resample is not None:
        c1 = resample_uniform(c1, n_resample)
        c2 = resample_uniform(c2, n_resample)
    return shape_distance(c1, c2, method="dp", window=window, rotation=with_rotation,
                          seeds=seeds, **opts)


def windowed_matcher(window: int = DEFAULT_WINDOW):
    return partial(dp_match, window=window)
