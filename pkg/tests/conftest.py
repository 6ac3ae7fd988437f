"""Session fixtures for the heavy model-problem solves.

The grid-continuation ladder at R = 4 and the enlarged R = 6 run are the
most expensive computations in the suite.  The solver tests and the
acceptance gate consume the same solves, so the bundle is built once per
session and its total wall time recorded for the runtime budget check.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from slaglab import solver as sv

LADDER = (0.25, 0.125, 0.0625)


@pytest.fixture(scope="session")
def model_bundle():
    t0 = time.perf_counter()
    fields, reports = {}, {}
    prev = None
    for h in LADDER:
        kw = {}
        if prev is not None:
            kw["mask0"] = sv.dyadic_refine_mask(reports[prev].mask)
            kw["v0"] = sv.dyadic_refine(fields[prev].values)
        fields[h], reports[h] = sv.solve_model(4.0, h, tol=1e-6, **kw)
        prev = h

    # R = 6 at the middle spacing, seeded by zero-padding the R = 4 run
    base = fields[0.125]
    g6 = sv.Grid3.centered(6.0, 0.125)
    v0 = np.zeros(g6.dims)
    m0 = np.zeros(g6.dims, np.uint8)
    off = [(a - b) // 2 for a, b in zip(g6.dims, base.grid.dims)]
    inner = tuple(slice(o, o + d) for o, d in zip(off, base.grid.dims))
    v0[inner] = base.values
    m0[inner] = reports[0.125].mask
    fields["R6"], reports["R6"] = sv.solve_model(6.0, 0.125, mask0=m0, v0=v0)

    return {
        "fields": fields,
        "reports": reports,
        "inner": inner,
        "seconds": time.perf_counter() - t0,
    }
