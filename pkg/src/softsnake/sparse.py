"""Compressed sparse row matrices.

Small on purpose: CSR storage, coo/dense conversion, transpose,
matmul, matvec, and Matrix Market text output. The matvec goes through
the selected kernel backend; transpose and matmul are compiled with
numba when it is importable and otherwise run as plain python (only the
offline dump path cares about their speed).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

try:
    from numba import njit as _njit
    _HAS_NUMBA = True
except ImportError:
    _HAS_NUMBA = False

    def _njit(*a, **k):
        def deco(f):
            return f
        return deco if not (len(a) == 1 and callable(a[0])) else a[0]


@_njit(cache=True)
def _transpose_impl(indptr, indices, data, n_rows, n_cols):
    nnz = indices.shape[0]
    t_indptr = np.zeros(n_cols + 1, np.int64)
    for k in range(nnz):
        t_indptr[indices[k] + 1] += 1
    for c in range(n_cols):
        t_indptr[c + 1] += t_indptr[c]
    t_indices = np.empty(nnz, np.int32)
    t_data = np.empty(nnz, np.float64)
    cursor = t_indptr[:-1].copy()
    for r in range(n_rows):
        for k in range(indptr[r], indptr[r + 1]):
            c = indices[k]
            dst = cursor[c]
            t_indices[dst] = r
            t_data[dst] = data[k]
            cursor[c] = dst + 1
    return t_indptr, t_indices, t_data


@_njit(cache=True)
def _matmul_impl(ap, aj, ax, bp, bj, bx, n_row, n_col):
    # two-pass row-merge product (symbolic count, then numeric fill)
    mask = np.full(n_col, -1, np.int64)
    cp = np.zeros(n_row + 1, np.int64)
    for i in range(n_row):
        row_nnz = 0
        for ka in range(ap[i], ap[i + 1]):
            j = aj[ka]
            for kb in range(bp[j], bp[j + 1]):
                c = bj[kb]
                if mask[c] != i:
                    mask[c] = i
                    row_nnz += 1
        cp[i + 1] = cp[i] + row_nnz
    nnz = cp[n_row]
    cj = np.empty(nnz, np.int32)
    cx = np.empty(nnz, np.float64)
    accum = np.zeros(n_col, np.float64)
    marker = np.full(n_col, -1, np.int64)
    for i in range(n_row):
        head = cp[i]
        count = 0
        for ka in range(ap[i], ap[i + 1]):
            j = aj[ka]
            va = ax[ka]
            for kb in range(bp[j], bp[j + 1]):
                c = bj[kb]
                if marker[c] != i:
                    marker[c] = i
                    cj[head + count] = c
                    accum[c] = va * bx[kb]
                    count += 1
                else:
                    accum[c] += va * bx[kb]
        # sort the row's columns (insertion sort; rows are short)
        for a in range(1, count):
            col = cj[head + a]
            b = a - 1
            while b >= 0 and cj[head + b] > col:
                cj[head + b + 1] = cj[head + b]
                b -= 1
            cj[head + b + 1] = col
        for a in range(count):
            cx[head + a] = accum[cj[head + a]]
    return cp, cj, cx


@dataclass
class CsrMatrix:
    """CSR sparse matrix: row_offsets, col_indices, values, rows, cols."""

    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    rows: int
    cols: int

    @property
    def nnz(self) -> int:
        return int(self.col_indices.shape[0])

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "CsrMatrix":
        rows = np.asarray(rows, np.int64)
        cols = np.asarray(cols, np.int64)
        vals = np.asarray(vals, np.float64)
        n_rows, n_cols = shape
        if rows.size:
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
            first = np.ones(rows.size, dtype=bool)
            first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(first)
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
        indptr = np.zeros(n_rows + 1, np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(indptr, cols.astype(np.int32), vals, n_rows, n_cols)

    @classmethod
    def from_dense(cls, M) -> "CsrMatrix":
        M = np.asarray(M, np.float64)
        r, c = np.nonzero(M)
        return cls.from_coo(r, c, M[r, c], M.shape)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols))
        for i in range(self.rows):
            sl = slice(self.row_offsets[i], self.row_offsets[i + 1])
            out[i, self.col_indices[sl]] = self.values[sl]
        return out

    def transpose(self) -> "CsrMatrix":
        tp, ti, tv = _transpose_impl(self.row_offsets, self.col_indices,
                                     self.values, self.rows, self.cols)
        return CsrMatrix(tp, ti, tv, self.cols, self.rows)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return spmv(self, x)

    def __matmul__(self, other: "CsrMatrix") -> "CsrMatrix":
        if self.cols != other.rows:
            raise ValueError("dimension mismatch")
        cp, cj, cx = _matmul_impl(self.row_offsets, self.col_indices, self.values,
                                  other.row_offsets, other.col_indices, other.values,
                                  self.rows, other.cols)
        return CsrMatrix(cp, cj, cx, self.rows, other.cols)

    def add(self, other: "CsrMatrix") -> "CsrMatrix":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")
        r = np.concatenate([np.repeat(np.arange(self.rows), np.diff(self.row_offsets)),
                            np.repeat(np.arange(other.rows), np.diff(other.row_offsets))])
        c = np.concatenate([self.col_indices, other.col_indices])
        v = np.concatenate([self.values, other.values])
        return CsrMatrix.from_coo(r, c, v, (self.rows, self.cols))

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.rows, self.cols))
        for i in range(min(self.rows, self.cols)):
            sl = slice(self.row_offsets[i], self.row_offsets[i + 1])
            hit = np.searchsorted(self.col_indices[sl], i)
            base = self.row_offsets[i]
            if hit < sl.stop - sl.start and self.col_indices[base + hit] == i:
                d[i] = self.values[base + hit]
        return d


def spmv(A: CsrMatrix, x: np.ndarray, out: np.ndarray | None = None,
         backend=None) -> np.ndarray:
    """y = A @ x. Empty rows yield zeros; cost O(nnz)."""
    if out is None:
        out = np.empty(A.rows)
    be = backend if backend is not None else kernels.active
    be.csr_spmv(A.row_offsets, A.col_indices, A.values, x, out)
    return out


def mmwrite(path, A: CsrMatrix) -> None:
    """Matrix Market coordinate text (1-based, real general)."""
    with open(path, "w") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        f.write(f"{A.rows} {A.cols} {A.nnz}\n")
        for i in range(A.rows):
            for k in range(A.row_offsets[i], A.row_offsets[i + 1]):
                f.write(f"{i + 1} {A.col_indices[k] + 1} {A.values[k]:.17g}\n")


def mmwrite_dense(path, v: np.ndarray) -> None:
    """Matrix Market array text for a dense vector."""
    v = np.asarray(v, np.float64).ravel()
    with open(path, "w") as f:
        f.write("%%MatrixMarket matrix array real general\n")
        f.write(f"{v.size} 1\n")
        for x in v:
            f.write(f"{x:.17g}\n")
