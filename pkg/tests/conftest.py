import os

import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile(
    "default", max_examples=25, deadline=None)
hypothesis.settings.register_profile(
    "thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


class SolveCache:
    """Continuation solves are the expensive step shared by many tests;
    solve each (m, k) once per session, warm-starting along the k ladder."""

    def __init__(self):
        self._store = {}

    def solved(self, m: int, k: int):
        from dpwlawson.solver import SolveOptions, continuation_solve, pack_unknowns

        key = (m, k)
        if key not in self._store:
            opts = SolveOptions()
            # warm start from the largest solved k below (larger t)
            starts = [kk for (mm, kk) in self._store if mm == m and kk < k]
            if starts:
                k0 = max(starts)
                prev = self._store[(m, k0)].params
                res = continuation_solve(m, k, opts,
                                         start=(prev.t, pack_unknowns(prev)))
            else:
                res = continuation_solve(m, k, opts)
            self._store[key] = res
        return self._store[key]


@pytest.fixture(scope="session")
def solve_cache():
    return SolveCache()
