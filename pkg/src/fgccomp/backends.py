"""Segment-mean kernels with a numba fast path and a pure-numpy fallback.

The grouped neighbor means and their backward scatter are the only hot
loops in the package; everything else is dense BLAS work. The backend is
picked once at import time from the FGCCOMP_BACKEND environment variable:

  auto   (default) compile with numba when importable, else numpy
  numba  require numba, raise if it is missing
  numpy  force the vectorized numpy path

Both paths implement the same contract: row i of the output is the mean
of ``values[idx[offsets[i]:offsets[i+1]]]`` with a max{1, count}
denominator, so empty segments yield zero rows. Results must agree to
float round-off; ``scripts/bench_kernels.py`` compares their speed.
"""

import os

import numpy as np

_CHOICE = os.environ.get("FGCCOMP_BACKEND", "auto").lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(f"FGCCOMP_BACKEND must be auto|numba|numpy, got {_CHOICE!r}")


def segment_mean_numpy(values, idx, offsets):
    n = offsets.shape[0] - 1
    out = np.zeros((n, values.shape[1]), dtype=values.dtype)
    if idx.size:
        counts = np.diff(offsets)
        rows = np.repeat(np.arange(n), counts)
        np.add.at(out, rows, values[idx])
        nz = counts > 0
        # reciprocal-multiply, matching the numba kernel bit for bit
        out[nz] *= (1.0 / counts[nz])[:, None]
    return out


def segment_mean_backward_numpy(gout, idx, offsets, n_values):
    gin = np.zeros((n_values, gout.shape[1]), dtype=gout.dtype)
    if idx.size:
        counts = np.diff(offsets)
        rows = np.repeat(np.arange(offsets.shape[0] - 1), counts)
        np.add.at(gin, idx, gout[rows] * (1.0 / counts[rows])[:, None])
    return gin


try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

if _CHOICE == "numba" and not HAS_NUMBA:
    raise ImportError("FGCCOMP_BACKEND=numba but numba is not importable")

if HAS_NUMBA:

    @numba.njit(cache=True)
    def _segment_mean_njit(values, idx, offsets, out):
        n = offsets.shape[0] - 1
        d = values.shape[1]
        for i in range(n):
            lo = offsets[i]
            hi = offsets[i + 1]
            if hi == lo:
                continue
            for k in range(lo, hi):
                j = idx[k]
                for c in range(d):
                    out[i, c] += values[j, c]
            inv = 1.0 / (hi - lo)
            for c in range(d):
                out[i, c] *= inv
        return out

    @numba.njit(cache=True)
    def _segment_mean_backward_njit(gout, idx, offsets, gin):
        n = offsets.shape[0] - 1
        d = gout.shape[1]
        for i in range(n):
            lo = offsets[i]
            hi = offsets[i + 1]
            if hi == lo:
                continue
            inv = 1.0 / (hi - lo)
            for k in range(lo, hi):
                j = idx[k]
                for c in range(d):
                    gin[j, c] += gout[i, c] * inv
        return gin

    def segment_mean_numba(values, idx, offsets):
        out = np.zeros((offsets.shape[0] - 1, values.shape[1]), dtype=values.dtype)
        return _segment_mean_njit(np.ascontiguousarray(values), idx, offsets, out)

    def segment_mean_backward_numba(gout, idx, offsets, n_values):
        gin = np.zeros((n_values, gout.shape[1]), dtype=gout.dtype)
        return _segment_mean_backward_njit(np.ascontiguousarray(gout), idx, offsets, gin)

if HAS_NUMBA and _CHOICE != "numpy":
    segment_mean = segment_mean_numba
    segment_mean_backward = segment_mean_backward_numba
    BACKEND = "numba"
else:
    segment_mean = segment_mean_numpy
    segment_mean_backward = segment_mean_backward_numpy
    BACKEND = "numpy"
