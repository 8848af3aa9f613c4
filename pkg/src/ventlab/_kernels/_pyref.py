"""Pure Python/numpy reference implementations of the hot kernels.

Selected automatically when the compiled extension is unavailable (see
``ventlab._kernels``).  Semantics are identical to ``_accel``; speed is
adequate for tests and small meshes only.
"""

import heapq

import numpy as np

IMPLEMENTATION = "python"


def csr_matvec(indptr, indices, data, x):
    n = len(indptr) - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=n)


def ic_symbolic(n, indptr, indices, level):
    """Level-of-fill pattern of the incomplete Cholesky factor.

    Returns (L_indptr, L_indices): lower triangle including the
    diagonal, columns sorted ascending per row.
    """
    upper = [None] * n  # per row: sorted list of (col > row, fill level)
    out_indptr = np.zeros(n + 1, dtype=np.int64)
    out_cols = []
    for i in range(n):
        lev = {i: 0}
        for j in indices[indptr[i] : indptr[i + 1]]:
            lev[int(j)] = 0
        heap = [j for j in lev if j < i]
        heapq.heapify(heap)
        done = set()
        while heap:
            k = heapq.heappop(heap)
            if k in done:
                continue
            done.add(k)
            lk = lev[k]
            for j, lkj in upper[k]:
                lnew = lk + lkj + 1
                if lnew <= level and lnew < lev.get(j, level + 1):
                    if j not in lev and j < i:
                        heapq.heappush(heap, j)
                    lev[j] = lnew
        row = sorted(j for j in lev if j <= i)
        out_cols.extend(row)
        out_indptr[i + 1] = out_indptr[i] + len(row)
        upper[i] = sorted((j, l) for j, l in lev.items() if j > i)
    return out_indptr, np.array(out_cols, dtype=np.int32)


def ic_numeric(indptr, indices, data, L_indptr, L_indices, shift):
    """Numeric incomplete Cholesky on a fixed pattern.

    Returns (L_data, fail_row); fail_row is -1 on success, else the row
    whose pivot came out nonpositive.
    """
    n = len(indptr) - 1
    L_data = np.zeros(len(L_indices))
    for i in range(n):
        lo, hi = int(L_indptr[i]), int(L_indptr[i + 1])
        cols = L_indices[lo:hi]
        vals = np.zeros(hi - lo)
        # seed with A(i, j at j <= i); both column lists are sorted
        pa, pl = int(indptr[i]), 0
        enda = int(indptr[i + 1])
        while pa < enda and pl < len(cols):
            ca = indices[pa]
            if ca > i:
                break
            cl = cols[pl]
            if ca == cl:
                vals[pl] = data[pa]
                pa += 1
                pl += 1
            elif ca < cl:
                pa += 1
            else:
                pl += 1
        vals[-1] += shift
        for idx in range(hi - lo - 1):
            j = int(cols[idx])
            jlo, jhi = int(L_indptr[j]), int(L_indptr[j + 1])
            s = 0.0
            p, q = lo, jlo
            while p < lo + idx and q < jhi - 1:
                cp, cq = L_indices[p], L_indices[q]
                if cp == cq:
                    s += L_data[p] * L_data[q]
                    p += 1
                    q += 1
                elif cp < cq:
                    p += 1
                else:
                    q += 1
            vals[idx] = (vals[idx] - s) / L_data[jhi - 1]
            L_data[lo + idx] = vals[idx]
        d = vals[-1] - float(vals[:-1] @ vals[:-1])
        if d <= 0.0:
            return L_data, i
        L_data[hi - 1] = np.sqrt(d)
    return L_data, -1


def solve_lower(L_indptr, L_indices, L_data, b):
    """Forward substitution L x = b (diagonal stored last per row)."""
    n = len(L_indptr) - 1
    x = np.array(b, dtype=float)
    for i in range(n):
        lo, hi = int(L_indptr[i]), int(L_indptr[i + 1])
        if hi - lo > 1:
            x[i] -= L_data[lo : hi - 1] @ x[L_indices[lo : hi - 1]]
        x[i] /= L_data[hi - 1]
    return x


def solve_lower_transpose(L_indptr, L_indices, L_data, b):
    """Backward substitution L^T x = b."""
    n = len(L_indptr) - 1
    x = np.array(b, dtype=float)
    for i in range(n - 1, -1, -1):
        lo, hi = int(L_indptr[i]), int(L_indptr[i + 1])
        x[i] /= L_data[hi - 1]
        if hi - lo > 1:
            x[L_indices[lo : hi - 1]] -= L_data[lo : hi - 1] * x[i]
    return x
