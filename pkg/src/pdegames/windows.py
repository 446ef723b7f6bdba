"""Fast min/max filters over arbitrary boolean footprints.

The half-space node sets of the curvature game are large (thousands of
offsets), so the per-slot reductions are done row by row: each footprint
row decomposes into runs of consecutive offsets, and a run of width W is
reduced in O(1) per element with the two-pass block prefix/suffix trick.
Out-of-range rows and columns take the nearest edge value (constant
continuation of the field).
"""

from __future__ import annotations

import numpy as np


def slide_extreme(block: np.ndarray, width: int, minimum: bool) -> np.ndarray:
    """Windowed min/max along axis 1: out[:, j] = op(block[:, j .. j+width-1]).

    Output has block.shape[1] - width + 1 columns.
    """
    m, n = block.shape
    if width == 1:
        return block.copy()
    n_out = n - width + 1
    op = np.fmin if minimum else np.fmax
    fill = np.inf if minimum else -np.inf
    nb = -(-n // width)
    padded = np.full((m, nb * width), fill)
    padded[:, :n] = block
    blocks = padded.reshape(m, nb, width)
    prefix = (np.minimum if minimum else np.maximum).accumulate(blocks, axis=2) \
        .reshape(m, nb * width)
    suffix = (np.minimum if minimum else np.maximum).accumulate(
        blocks[:, :, ::-1], axis=2)[:, :, ::-1].reshape(m, nb * width)
    j = np.arange(n_out)
    return op(suffix[:, j], prefix[:, j + width - 1])


def footprint_runs(mask: np.ndarray) -> list[tuple[int, int, int]]:
    """(row_offset, col_start, col_end) runs of a centered boolean footprint.

    The footprint array has odd sides and its center is the origin offset.
    """
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    ky = (mask.shape[0] - 1) // 2
    kx = (mask.shape[1] - 1) // 2
    runs = []
    for r in range(mask.shape[0]):
        row = mask[r]
        if not row.any():
            continue
        idx = np.flatnonzero(row)
        breaks = np.nonzero(np.diff(idx) > 1)[0]
        starts = np.concatenate([[0], breaks + 1])
        ends = np.concatenate([breaks, [len(idx) - 1]])
        for s, e in zip(starts, ends):
            runs.append((r - ky, int(idx[s]) - kx, int(idx[e]) - kx))
    return runs


def masked_filter(arr: np.ndarray, runs, minimum: bool, mode: str = "edge") -> np.ndarray:
    """out[x] = op over footprint offsets o of arr[x + o].

    ``arr`` is (nx,) or (nx, ny); ``runs`` comes from footprint_runs (for a
    1D array the row offsets must all be zero).  mode "edge" clamps
    out-of-range offsets to the nearest value (constant continuation of the
    field); mode "drop" excludes them from the reduction.
    """
    one_d = arr.ndim == 1
    a2 = arr[None, :] if one_d else arr
    nx, ny = a2.shape
    fill = np.inf if minimum else -np.inf
    fill_op = np.fmin if minimum else np.fmax
    out = np.full_like(a2, fill, dtype=float)
    rows_idx = np.arange(nx)
    for dy, a, b in runs:
        if one_d and dy != 0:
            raise ValueError("1D filters take single-row footprints")
        if mode == "edge":
            src = a2[np.clip(rows_idx + dy, 0, nx - 1), :]
        else:
            shifted = rows_idx + dy
            valid = (shifted >= 0) & (shifted < nx)
            src = np.full_like(a2, fill, dtype=float)
            src[valid] = a2[shifted[valid], :]
        lpad = max(0, -a)
        rpad = max(0, b)
        if mode == "edge":
            padded = np.pad(src, ((0, 0), (lpad, rpad)), mode="edge")
        else:
            padded = np.pad(src, ((0, 0), (lpad, rpad)), mode="constant",
                            constant_values=fill)
        width = b - a + 1
        start = a + lpad
        red = slide_extreme(padded, width, minimum)
        out = fill_op(out, red[:, start:start + ny])
    return out[0] if one_d else out


def masked_filter_reference(arr: np.ndarray, mask: np.ndarray, minimum: bool) -> np.ndarray:
    """Brute-force check implementation (clamped indexing)."""
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    one_d = arr.ndim == 1
    a2 = arr[None, :] if one_d else arr
    nx, ny = a2.shape
    ky = (mask.shape[0] - 1) // 2
    kx = (mask.shape[1] - 1) // 2
    out = np.empty_like(a2, dtype=float)
    for i in range(nx):
        for j in range(ny):
            vals = []
            for r in range(mask.shape[0]):
                for c in range(mask.shape[1]):
                    if mask[r, c]:
                        ii = min(max(i + r - ky, 0), nx - 1)
                        jj = min(max(j + c - kx, 0), ny - 1)
                        vals.append(a2[ii, jj])
            out[i, j] = min(vals) if minimum else max(vals)
    return out[0] if one_d else out
