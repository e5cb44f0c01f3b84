"""Compiled inner loops shared by the protocol, decoder and sim modules."""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def place_replicas(degrees, uniforms, n_slots):
    """Partial Fisher-Yates shuffle: one uniform d-subset of range(n_slots) per device.

    Consumes exactly ``degrees.sum()`` uniforms, in device order.
    """
    total = 0
    for a in range(degrees.size):
        total += degrees[a]
    out = np.empty(total, np.int64)
    perm = np.arange(n_slots)
    swaps = np.empty(n_slots, np.int64)
    pos = 0
    for a in range(degrees.size):
        d = degrees[a]
        for t in range(d):
            r = t + int(uniforms[pos] * (n_slots - t))
            if r >= n_slots:
                r = n_slots - 1
            swaps[t] = r
            tmp = perm[t]
            perm[t] = perm[r]
            perm[r] = tmp
            out[pos] = perm[t]
            pos += 1
        for t in range(d - 1, -1, -1):
            r = swaps[t]
            tmp = perm[t]
            perm[t] = perm[r]
            perm[r] = tmp
    return out


@njit(cache=True, nogil=True)
def peel_frame(active, rep_ptr, rep_slots, cov_ptr, cov_ap, n_aps, n_slots,
               count, ssum, decoded, queue, nxt, newdev, per_iter):
    """Synchronous peeling decoder on the implicit graph of one frame.

    Slot node id is ``ap * n_slots + slot``.  Edges are (active device,
    replica slot, covering AP).  Work buffers are supplied by the caller and
    overwritten.  Returns (decoded count, iterations); ``decoded`` flags the
    decoded active positions, ``newdev[:count]`` lists them in decoding order
    and ``per_iter[:iterations]`` splits that list by iteration.
    """
    n_nodes = n_aps * n_slots
    n_act = active.size
    for s in range(n_nodes):
        count[s] = 0
        ssum[s] = 0
    for a in range(n_act):
        decoded[a] = False
        i = active[a]
        for r in range(rep_ptr[a], rep_ptr[a + 1]):
            k = rep_slots[r]
            for c in range(cov_ptr[i], cov_ptr[i + 1]):
                s = cov_ap[c] * n_slots + k
                count[s] += 1
                ssum[s] += a
    nq = 0
    for s in range(n_nodes):
        if count[s] == 1:
            queue[nq] = s
            nq += 1
    total = 0
    iterations = 0
    while nq > 0:
        nnew = 0
        for q in range(nq):
            s = queue[q]
            if count[s] == 1:
                a = ssum[s]
                if not decoded[a]:
                    decoded[a] = True
                    newdev[total + nnew] = a
                    nnew += 1
        if nnew == 0:
            break
        per_iter[iterations] = nnew
        iterations += 1
        nn = 0
        for t in range(total, total + nnew):
            a = newdev[t]
            i = active[a]
            for r in range(rep_ptr[a], rep_ptr[a + 1]):
                k = rep_slots[r]
                for c in range(cov_ptr[i], cov_ptr[i + 1]):
                    s = cov_ap[c] * n_slots + k
                    count[s] -= 1
                    ssum[s] -= a
                    if count[s] == 1:
                        nxt[nn] = s
                        nn += 1
        total += nnew
        for q in range(nn):
            queue[q] = nxt[q]
        nq = nn
    return total, iterations


@njit(cache=True, nogil=True)
def decode_classes(active, rep_ptr, rep_slots, cov_ptrs, cov_ap, n_aps, n_slots):
    """Decoded-device count of one frame under each coverage class.

    ``cov_ptrs`` has one CSR pointer row per class, indexing the shared
    ``cov_ap`` array.
    """
    n_classes = cov_ptrs.shape[0]
    n_nodes = n_aps * n_slots
    count = np.empty(n_nodes, np.int64)
    ssum = np.empty(n_nodes, np.int64)
    queue = np.empty(n_nodes, np.int64)
    nxt = np.empty(n_nodes, np.int64)
    decoded = np.empty(max(active.size, 1), np.bool_)
    newdev = np.empty(max(active.size, 1), np.int64)
    per_iter = np.empty(max(active.size, 1) + 1, np.int64)
    out = np.zeros(n_classes, np.int64)
    if active.size == 0:
        return out
    for c in range(n_classes):
        total, _ = peel_frame(active, rep_ptr, rep_slots, cov_ptrs[c], cov_ap,
                              n_aps, n_slots, count, ssum, decoded, queue, nxt,
                              newdev, per_iter)
        out[c] = total
    return out
