"""Hot numeric kernels: elementary-cycle enumeration, fixed-step RK4
integration, and batched per-sample indicator evaluation.

Each kernel exists in two forms: a numba ``@njit`` build (default when
numba imports) and an uncompiled numpy/Python build.  Set

    CIRCNET_DISABLE_NUMBA=1

to force the fallback path; ``BACKEND`` reports which one is active.
``benchmarks/bench_kernels.py`` times the two paths against each other.

Kernels return status codes instead of raising; the wrapping modules
translate them into exceptions.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("CIRCNET_DISABLE_NUMBA", "").strip().lower()
    return flag not in {"1", "true", "yes", "on"}


NUMBA_ENABLED = False
if _numba_requested():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

BACKEND = "numba" if NUMBA_ENABLED else "numpy"


def find_cycles_python(indptr, indices, n_v, max_cycles):
    """Enumerate the elementary directed cycles of a digraph in CSR form.

    Johnson's algorithm, written iteratively: stage s considers the
    subgraph induced on vertices >= s, locates the strongly connected
    component holding the least vertex of any nontrivial component
    (iterative Tarjan), and enumerates every cycle through that vertex
    with the blocked-set search.

    Parameters are 0-indexed:  ``indices[indptr[v]:indptr[v+1]]`` are the
    ascending heads of v's out-arcs.

    Returns ``(verts, offsets, status)``: cycle k is the vertex sequence
    ``verts[offsets[k]:offsets[k+1]]`` (closing arc implied), emitted in
    lexicographic order of the rotation that starts at the smallest
    vertex.  ``status`` is 0, or 1 if a further cycle would overflow
    ``max_cycles`` (output arrays then hold the first ``max_cycles``).
    """
    verts_buf = np.empty(256, np.int64)
    offs_buf = np.empty(64, np.int64)
    offs_buf[0] = 0
    n_out = 0
    n_cyc = 0

    comp = np.empty(n_v, np.int64)
    comp_size = np.empty(n_v, np.int64)
    idx = np.empty(n_v, np.int64)
    low = np.empty(n_v, np.int64)
    onstk = np.empty(n_v, np.uint8)
    tstk = np.empty(n_v, np.int64)
    dfs_v = np.empty(n_v, np.int64)
    dfs_e = np.empty(n_v, np.int64)

    blocked = np.empty(n_v, np.uint8)
    bmat = np.empty((n_v, n_v), np.uint8)
    path = np.empty(n_v, np.int64)
    eptr = np.empty(n_v, np.int64)
    fflag = np.empty(n_v, np.uint8)
    ustack = np.empty(n_v * n_v + 1, np.int64)

    s = 0
    while s < n_v:
        # --- Tarjan on the subgraph induced on {s .. n_v-1} ---
        ncomp = 0
        for v in range(n_v):
            comp[v] = -1
            comp_size[v] = 0
            idx[v] = -1
            onstk[v] = 0
        counter = 0
        sp = 0
        for root in range(s, n_v):
            if idx[root] != -1:
                continue
            dp = 0
            dfs_v[0] = root
            dfs_e[0] = indptr[root]
            idx[root] = counter
            low[root] = counter
            counter += 1
            tstk[sp] = root
            sp += 1
            onstk[root] = 1
            while dp >= 0:
                v = dfs_v[dp]
                descended = False
                while dfs_e[dp] < indptr[v + 1]:
                    w = indices[dfs_e[dp]]
                    dfs_e[dp] += 1
                    if w < s:
                        continue
                    if idx[w] == -1:
                        dp += 1
                        dfs_v[dp] = w
                        dfs_e[dp] = indptr[w]
                        idx[w] = counter
                        low[w] = counter
                        counter += 1
                        tstk[sp] = w
                        sp += 1
                        onstk[w] = 1
                        descended = True
                        break
                    elif onstk[w] == 1:
                        if idx[w] < low[v]:
                            low[v] = idx[w]
                if descended:
                    continue
                if low[v] == idx[v]:
                    while True:
                        u = tstk[sp - 1]
                        sp -= 1
                        onstk[u] = 0
                        comp[u] = ncomp
                        comp_size[ncomp] += 1
                        if u == v:
                            break
                    ncomp += 1
                dp -= 1
                if dp >= 0:
                    parent = dfs_v[dp]
                    if low[v] < low[parent]:
                        low[parent] = low[v]

        # least vertex lying in a nontrivial component
        start = -1
        for v in range(s, n_v):
            if comp[v] >= 0 and comp_size[comp[v]] >= 2:
                start = v
                break
        if start < 0:
            break
        scc_id = comp[start]

        # --- blocked-set search for all cycles through `start` ---
        for v in range(n_v):
            blocked[v] = 0
            fflag[v] = 0
            for w in range(n_v):
                bmat[v, w] = 0
        depth = 0
        path[0] = start
        blocked[start] = 1
        eptr[0] = indptr[start]
        while depth >= 0:
            v = path[depth]
            descended = False
            while eptr[depth] < indptr[v + 1]:
                w = indices[eptr[depth]]
                eptr[depth] += 1
                if comp[w] != scc_id:
                    continue
                if w == start:
                    if n_cyc == max_cycles:
                        return verts_buf[:n_out], offs_buf[: n_cyc + 1], 1
                    need = depth + 1
                    while n_out + need > verts_buf.shape[0]:
                        bigger = np.empty(verts_buf.shape[0] * 2, np.int64)
                        bigger[:n_out] = verts_buf[:n_out]
                        verts_buf = bigger
                    for p in range(need):
                        verts_buf[n_out + p] = path[p]
                    n_out += need
                    if n_cyc + 2 > offs_buf.shape[0]:
                        bigger2 = np.empty(offs_buf.shape[0] * 2, np.int64)
                        bigger2[: n_cyc + 1] = offs_buf[: n_cyc + 1]
                        offs_buf = bigger2
                    offs_buf[n_cyc + 1] = n_out
                    n_cyc += 1
                    fflag[depth] = 1
                elif blocked[w] == 0:
                    depth += 1
                    path[depth] = w
                    blocked[w] = 1
                    eptr[depth] = indptr[w]
                    fflag[depth] = 0
                    descended = True
                    break
            if descended:
                continue
            child_found = fflag[depth]
            if child_found == 1:
                # unblock v and everything transitively waiting on it
                nu = 0
                ustack[nu] = v
                nu += 1
                while nu > 0:
                    nu -= 1
                    u = ustack[nu]
                    if blocked[u] == 1:
                        blocked[u] = 0
                        for x in range(n_v):
                            if bmat[u, x] == 1:
                                bmat[u, x] = 0
                                ustack[nu] = x
                                nu += 1
            else:
                for ei in range(indptr[v], indptr[v + 1]):
                    w = indices[ei]
                    if comp[w] == scc_id:
                        bmat[w, v] = 1
            depth -= 1
            if depth >= 0 and child_found == 1:
                fflag[depth] = 1

        s = start + 1

    return verts_buf[:n_out], offs_buf[: n_cyc + 1], 0


def rk4_integrate_python(theta_nodes, theta_mids, h, m0):
    """Classical fixed-step RK4 for a source term that depends on time
    only, so k2 == k3 and one step is Simpson's rule over [t_n, t_n+1].

    ``theta_nodes[i]`` is dm/dt at grid node i, ``theta_mids[i]`` at the
    midpoint of step i.  Returns the (n_nodes, n_state) trajectory.
    """
    n = theta_nodes.shape[0]
    k = theta_nodes.shape[1]
    out = np.empty((n, k), np.float64)
    for j in range(k):
        out[0, j] = m0[j]
    for i in range(n - 1):
        for j in range(k):
            inc = (h / 6.0) * (
                theta_nodes[i, j] + 4.0 * theta_mids[i, j] + theta_nodes[i + 1, j]
            )
            out[i + 1, j] = out[i, j] + inc
    return out


def rk4_integrate_numpy(theta_nodes, theta_mids, h, m0):
    """Vectorized twin of :func:`rk4_integrate_python` (bit-identical:
    cumsum accumulates left to right exactly like the loop)."""
    inc = (h / 6.0) * (theta_nodes[:-1] + 4.0 * theta_mids + theta_nodes[1:])
    first = np.asarray(m0, dtype=np.float64).reshape(1, -1)
    return np.cumsum(np.concatenate((first, inc), axis=0), axis=0)


def ensemble_rows_python(samples, eps, max_cycles):
    """Per-sample indicator rows for a stack of matrices.

    Row layout: the 13 scalar indicators in canonical order
    (lambda_ga, lambda_gr, lambda_ha, lambda_hr, lambda_aa, lambda_ar,
    lambda_c, lambda_y, lambda_s, lambda_d, theta_s, theta_f, theta_d)
    followed by the n_v components of theta_a.  Undefined quantities are
    NaN.  Returns ``(rows, bad)`` where ``bad`` is -1 on success or the
    index of the sample whose cycle count overflowed ``max_cycles``.
    """
    n_s = samples.shape[0]
    n_v = samples.shape[1]
    rows = np.empty((n_s, 13 + n_v), np.float64)
    indptr = np.empty(n_v + 1, np.int64)
    indices = np.empty(n_v * n_v, np.int64)
    usage = np.empty((n_v, n_v), np.int64)

    for si in range(n_s):
        g = samples[si]
        na = 0
        for i in range(n_v):
            indptr[i] = na
            for j in range(n_v):
                if i != j and g[i, j] > eps:
                    indices[na] = j
                    na += 1
        indptr[n_v] = na

        verts, offs, status = _find_cycles(indptr, indices, n_v, max_cycles)
        if status != 0:
            return rows, si
        n_cyc = offs.shape[0] - 1

        for i in range(n_v):
            for j in range(n_v):
                usage[i, j] = 0
        gr = 0.0
        hr = 0.0
        ar = 0.0
        for c in range(n_cyc):
            a = offs[c]
            b = offs[c + 1]
            length = b - a
            logsum = 0.0
            invsum = 0.0
            wsum = 0.0
            for p in range(a, b):
                u = verts[p]
                vnext = verts[a] if p == b - 1 else verts[p + 1]
                w = g[u, vnext]
                logsum += np.log(w)
                invsum += 1.0 / w
                wsum += w
                usage[u, vnext] += 1
            gr += np.exp(logsum / length)
            hr += length / invsum
            ar += wsum / length

        qsum = 0.0
        ssum = 0.0
        for i in range(n_v):
            for j in range(n_v):
                if i != j and g[i, j] > eps:
                    if usage[i, j] == 0:
                        qsum += g[i, j]
                    elif usage[i, j] >= 2:
                        ssum += g[i, j]

        if n_cyc > 0:
            if qsum == 0.0:
                ga = 1.0
                ha = 1.0
                aa = 1.0
            else:
                ga = gr / (gr + qsum)
                ha = hr / (hr + qsum)
                aa = ar / (ar + qsum)
        elif na > 0:
            ga = 0.0
            ha = 0.0
            aa = 0.0
        else:
            ga = np.nan
            ha = np.nan
            aa = np.nan

        up = 0.0
        lo = 0.0
        trace = 0.0
        tf = 0.0
        for i in range(n_v):
            trace += g[i, i]
            for j in range(n_v):
                if i < j:
                    up += g[i, j]
                elif i > j:
                    lo += g[i, j]
                if i != j:
                    tf += g[i, j]
        lam_d = np.nan if lo == 0.0 else up / lo

        if n_v > 1:
            mu = trace / n_v
            acc = 0.0
            for i in range(n_v):
                d = g[i, i] - mu
                acc += d * d
            th_d = np.sqrt(acc / (n_v - 1))
        else:
            th_d = np.nan

        rows[si, 0] = ga
        rows[si, 1] = gr
        rows[si, 2] = ha
        rows[si, 3] = hr
        rows[si, 4] = aa
        rows[si, 5] = ar
        rows[si, 6] = 2.0 * na / n_v
        rows[si, 7] = n_cyc
        rows[si, 8] = ssum
        rows[si, 9] = lam_d
        rows[si, 10] = trace
        rows[si, 11] = tf
        rows[si, 12] = th_d
        for k in range(n_v):
            cin = 0.0
            cout = 0.0
            for i in range(n_v):
                if i != k:
                    cin += g[i, k]
                    cout += g[k, i]
            rows[si, 13 + k] = cin - cout

    return rows, -1


if NUMBA_ENABLED:
    find_cycles = njit(cache=True)(find_cycles_python)
    _find_cycles = find_cycles  # callee of the ensemble kernel
    rk4_integrate = njit(cache=True)(rk4_integrate_python)
    ensemble_rows = njit(cache=True)(ensemble_rows_python)
else:
    find_cycles = find_cycles_python
    _find_cycles = find_cycles_python
    rk4_integrate = rk4_integrate_numpy
    ensemble_rows = ensemble_rows_python


def warm_up() -> None:
    """Trigger JIT compilation of all kernels on a toy problem."""
    indptr = np.array([0, 1, 2], np.int64)
    indices = np.array([1, 0], np.int64)
    find_cycles(indptr, indices, 2, 10)
    nodes = np.zeros((3, 2), np.float64)
    mids = np.zeros((2, 2), np.float64)
    rk4_integrate(nodes, mids, 0.5, np.zeros(2, np.float64))
    ensemble_rows(np.zeros((1, 2, 2), np.float64), 1e-12, 10)
