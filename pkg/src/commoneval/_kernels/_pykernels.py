"""Pure-Python kernels, used when the compiled extension is unavailable.

Same operations in the same order as ``_ckernels.pyx``.
"""

import math

import numpy as np


def familiarity_matrix(items, offsets, item_cat_ptr, item_cat_idx, cat_sizes, gamma, persist):
    items = np.asarray(items).tolist()
    offsets = np.asarray(offsets).tolist()
    ptr = np.asarray(item_cat_ptr).tolist()
    idx = np.asarray(item_cat_idx).tolist()
    sizes = [float(s) for s in np.asarray(cat_sizes).tolist()]
    gamma = float(gamma)
    n_users = len(offsets) - 1
    out = [[0.0] * len(sizes) for _ in range(n_users)]
    for u in range(n_users):
        start, stop = offsets[u], offsets[u + 1]
        tail = 0.0
        if not persist:
            tail = 1.0
            for _ in range(start, stop):
                tail = tail * gamma
        row = out[u]
        g = 1.0
        for pos in range(start, stop):
            item = items[pos]
            for p in range(ptr[item], ptr[item + 1]):
                c = idx[p]
                row[c] = row[c] + (g - tail) / sizes[c]
            g = g * gamma
    return np.array(out, dtype=np.float64).reshape(n_users, len(sizes))


def log_column_sums(values):
    values = np.asarray(values, dtype=np.float64)
    cols = values.T.tolist()
    out = []
    for col in cols:
        acc = 0.0
        for v in col:
            if v <= 0.0:
                acc = -math.inf
                break
            acc = acc + math.log(v)
        out.append(acc)
    return np.array(out, dtype=np.float64)
