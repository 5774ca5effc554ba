# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops; see ``_pykernels`` for the contracts."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

cdef enum:
    LA = 0
    LB = 1
    LC = 2
    LD = 3
    LE = 4
    LF = 5
    LG = 6
    LH = 7
    LI = 8
    EMPTY = 255


def greedy_tile(Py_ssize_t rows, Py_ssize_t cols, square_order, dimer_order,
                long n2, long n3, long n4):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] arr = np.full((rows, cols), EMPTY, dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] cells = arr
    cdef const cnp.int64_t[::1] sq = np.ascontiguousarray(square_order, dtype=np.int64)
    cdef const cnp.int64_t[::1] dm = np.ascontiguousarray(dimer_order, dtype=np.int64)
    cdef Py_ssize_t k, r, c, idx
    cdef Py_ssize_t w = cols - 1
    cdef Py_ssize_t nv = (rows - 1) * cols
    cdef long placed = 0
    cdef long left2 = n2, left3 = n3
    for k in range(sq.shape[0]):
        if placed >= n4:
            break
        idx = sq[k]
        r = idx // w
        c = idx % w
        if (cells[r, c] == EMPTY and cells[r, c + 1] == EMPTY
                and cells[r + 1, c] == EMPTY and cells[r + 1, c + 1] == EMPTY):
            cells[r, c] = LF
            cells[r + 1, c] = LG
            cells[r, c + 1] = LH
            cells[r + 1, c + 1] = LI
            placed += 1
    for k in range(dm.shape[0]):
        if left2 <= 0 and left3 <= 0:
            break
        idx = dm[k]
        if idx < nv:
            if left2 <= 0:
                continue
            r = idx // cols
            c = idx % cols
            if cells[r, c] == EMPTY and cells[r + 1, c] == EMPTY:
                cells[r, c] = LB
                cells[r + 1, c] = LC
                left2 -= 1
        else:
            if left3 <= 0:
                continue
            idx -= nv
            r = idx // w
            c = idx % w
            if cells[r, c] == EMPTY and cells[r, c + 1] == EMPTY:
                cells[r, c] = LD
                cells[r, c + 1] = LE
                left3 -= 1
    for r in range(rows):
        for c in range(cols):
            if cells[r, c] == EMPTY:
                cells[r, c] = LA
    return arr


cdef inline bint _fits(cnp.uint8_t[::1] cells, Py_ssize_t p, int kind,
                       Py_ssize_t rows, Py_ssize_t cols) noexcept nogil:
    cdef Py_ssize_t r = p // cols
    cdef Py_ssize_t c = p % cols
    if kind == 0:
        return True
    if kind == 1:
        return r + 1 < rows
    if kind == 2:
        return c + 1 < cols and cells[p + 1] == EMPTY
    return r + 1 < rows and c + 1 < cols and cells[p + 1] == EMPTY


cdef inline void _place(cnp.uint8_t[::1] cells, Py_ssize_t p, int kind,
                        Py_ssize_t cols, bint fill) noexcept nogil:
    if kind == 0:
        cells[p] = LA if fill else EMPTY
    elif kind == 1:
        cells[p] = LB if fill else EMPTY
        cells[p + cols] = LC if fill else EMPTY
    elif kind == 2:
        cells[p] = LD if fill else EMPTY
        cells[p + 1] = LE if fill else EMPTY
    else:
        cells[p] = LF if fill else EMPTY
        cells[p + 1] = LH if fill else EMPTY
        cells[p + cols] = LG if fill else EMPTY
        cells[p + cols + 1] = LI if fill else EMPTY


def sequential_tile(Py_ssize_t rows, Py_ssize_t cols, long n2, long n3, long n4, uniforms):
    cdef Py_ssize_t area = rows * cols
    cdef long n1 = area - 2 * n2 - 2 * n3 - 4 * n4
    if n1 < 0:
        return None
    cdef const double[::1] uni = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n_uniform = uni.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] arr = np.full(area, EMPTY, dtype=np.uint8)
    cdef cnp.uint8_t[::1] cells = arr
    # stack frames: position, kind placed, bitmask of untried kinds
    cdef cnp.int64_t[::1] st_pos = np.empty(area, dtype=np.int64)
    cdef cnp.int32_t[::1] st_kind = np.empty(area, dtype=np.int32)
    cdef cnp.int32_t[::1] st_mask = np.empty(area, dtype=np.int32)
    cdef Py_ssize_t depth = 0
    cdef long left[4]
    left[0] = n1
    left[1] = n2
    left[2] = n3
    left[3] = n4
    cdef Py_ssize_t pos = 0, draws = 0
    cdef int k, kind, mask
    cdef double total, x
    while True:
        while pos < area and cells[pos] != EMPTY:
            pos += 1
        if pos == area:
            return arr.reshape(rows, cols)
        mask = 0
        for k in range(4):
            if left[k] > 0 and _fits(cells, pos, k, rows, cols):
                mask |= 1 << k
        while mask == 0:
            if depth == 0 or draws >= n_uniform:
                return None
            depth -= 1
            pos = st_pos[depth]
            kind = st_kind[depth]
            mask = st_mask[depth]
            _place(cells, pos, kind, cols, False)
            left[kind] += 1
        if draws >= n_uniform:
            return None
        total = 0.0
        for k in range(4):
            if mask & (1 << k):
                total += left[k]
        x = uni[draws] * total
        draws += 1
        kind = -1
        for k in range(4):
            if mask & (1 << k):
                kind = k
                x -= left[k]
                if x < 0:
                    break
        mask &= ~(1 << kind)
        _place(cells, pos, kind, cols, True)
        left[kind] -= 1
        st_pos[depth] = pos
        st_kind[depth] = kind
        st_mask[depth] = mask
        depth += 1


def forward_backward(alpha0, emit, fbN, fbB, fbF, coef, end):
    cdef const double[:, ::1] e = np.ascontiguousarray(emit, dtype=np.float64)
    cdef const double[::1] pn = np.ascontiguousarray(fbN, dtype=np.float64)
    cdef const double[::1] pb = np.ascontiguousarray(fbB, dtype=np.float64)
    cdef const double[::1] pf = np.ascontiguousarray(fbF, dtype=np.float64)
    cdef cnp.ndarray cf = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t K = e.shape[0], S = e.shape[1]
    # sparse transition structure: entries with any nonzero coefficient
    nz = np.nonzero(np.any(cf != 0.0, axis=0))
    cdef const cnp.int64_t[::1] src = np.ascontiguousarray(nz[0], dtype=np.int64)
    cdef const cnp.int64_t[::1] dst = np.ascontiguousarray(nz[1], dtype=np.int64)
    cdef const double[:, ::1] cv = np.ascontiguousarray(cf[:, nz[0], nz[1]].T)
    cdef Py_ssize_t nnz = src.shape[0]
    cdef cnp.ndarray[double, ndim=2] alpha_arr = np.empty((K, S))
    cdef cnp.ndarray[double, ndim=2] beta_arr = np.empty((K, S))
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef const double[::1] a0 = np.ascontiguousarray(alpha0, dtype=np.float64)
    cdef const double[::1] b0 = np.ascontiguousarray(end, dtype=np.float64)
    cdef double[::1] work = np.empty(S)
    cdef double[::1] tmp = np.empty(S)
    cdef Py_ssize_t n, i, z
    cdef double s, t
    s = 0.0
    for i in range(S):
        s += a0[i]
    for i in range(S):
        alpha[0, i] = a0[i] / s
    for n in range(1, K):
        for i in range(S):
            work[i] = 0.0
            tmp[i] = alpha[n - 1, i] * e[n - 1, i]
        for z in range(nnz):
            t = cv[z, 0] * pn[n] + cv[z, 1] * pb[n] + cv[z, 2] * pf[n] + cv[z, 3]
            work[dst[z]] += tmp[src[z]] * t
        s = 0.0
        for i in range(S):
            s += work[i]
        if s <= 0.0:
            raise FloatingPointError(f"forward recursion vanished at column {n}")
        for i in range(S):
            alpha[n, i] = work[i] / s
    s = 0.0
    for i in range(S):
        s += b0[i]
    for i in range(S):
        beta[K - 1, i] = b0[i] / s
    for n in range(K - 2, -1, -1):
        for i in range(S):
            work[i] = 0.0
            tmp[i] = e[n + 1, i] * beta[n + 1, i]
        for z in range(nnz):
            t = cv[z, 0] * pn[n + 1] + cv[z, 1] * pb[n + 1] + cv[z, 2] * pf[n + 1] + cv[z, 3]
            work[src[z]] += t * tmp[dst[z]]
        s = 0.0
        for i in range(S):
            s += work[i]
        if s <= 0.0:
            raise FloatingPointError(f"backward recursion vanished at column {n}")
        for i in range(S):
            beta[n, i] = work[i] / s
    return alpha_arr, beta_arr


cdef inline double _clip_llr(double num, double den, double cap) noexcept nogil:
    if num <= 0.0 and den <= 0.0:
        return 0.0
    if den <= 0.0:
        return cap
    if num <= 0.0:
        return -cap
    cdef double v = log(num) - log(den)
    if v > cap:
        return cap
    if v < -cap:
        return -cap
    return v


def conv_bcjr(next_state, out_bits, code_llr, input_llr, bint terminated, double cap):
    cdef const cnp.int64_t[:, ::1] ns = np.ascontiguousarray(next_state, dtype=np.int64)
    cdef const cnp.int64_t[:, :, ::1] ob = np.ascontiguousarray(out_bits, dtype=np.int64)
    cdef const double[:, ::1] cl = np.ascontiguousarray(code_llr, dtype=np.float64)
    cdef const double[::1] ul = np.ascontiguousarray(input_llr, dtype=np.float64)
    cdef Py_ssize_t T = cl.shape[0], n_out = cl.shape[1], S = ns.shape[1]
    cdef Py_ssize_t t, s, b, j, nxt
    cdef cnp.ndarray[double, ndim=3] gamma_arr = np.empty((T, 2, S))
    cdef double[:, :, ::1] gamma = gamma_arr
    cdef double[:, ::1] alpha = np.zeros((T + 1, S))
    cdef double[:, ::1] beta = np.zeros((T + 1, S))
    cdef cnp.ndarray[double, ndim=1] pu_arr = np.empty(T)
    cdef cnp.ndarray[double, ndim=2] pc_arr = np.empty((T, n_out))
    cdef double[::1] post_u = pu_arr
    cdef double[:, ::1] post_c = pc_arr
    cdef double p0[16]
    cdef double p1[16]
    cdef double q0, q1, g, tot, v, num, den
    cdef double numc[16]
    cdef double denc[16]
    if n_out > 16:
        raise ValueError("at most 16 outputs per stage")
    for t in range(T):
        for j in range(n_out):
            p0[j] = 1.0 / (1.0 + exp(cl[t, j]))
            p1[j] = 1.0 / (1.0 + exp(-cl[t, j]))
        q0 = 1.0 / (1.0 + exp(ul[t]))
        q1 = 1.0 / (1.0 + exp(-ul[t]))
        for b in range(2):
            for s in range(S):
                g = q1 if b == 1 else q0
                for j in range(n_out):
                    g *= p1[j] if ob[b, s, j] == 1 else p0[j]
                gamma[t, b, s] = g
    alpha[0, 0] = 1.0
    for t in range(T):
        for s in range(S):
            for b in range(2):
                alpha[t + 1, ns[b, s]] += alpha[t, s] * gamma[t, b, s]
        tot = 0.0
        for s in range(S):
            tot += alpha[t + 1, s]
        if tot > 0.0:
            for s in range(S):
                alpha[t + 1, s] /= tot
        else:
            for s in range(S):
                alpha[t + 1, s] = 1.0 / S
    if terminated:
        beta[T, 0] = 1.0
    else:
        for s in range(S):
            beta[T, s] = 1.0 / S
    for t in range(T - 1, -1, -1):
        tot = 0.0
        for s in range(S):
            v = gamma[t, 0, s] * beta[t + 1, ns[0, s]] + gamma[t, 1, s] * beta[t + 1, ns[1, s]]
            beta[t, s] = v
            tot += v
        if tot > 0.0:
            for s in range(S):
                beta[t, s] /= tot
        else:
            for s in range(S):
                beta[t, s] = 1.0 / S
    for t in range(T):
        num = 0.0
        den = 0.0
        for j in range(n_out):
            numc[j] = 0.0
            denc[j] = 0.0
        for b in range(2):
            for s in range(S):
                v = alpha[t, s] * gamma[t, b, s] * beta[t + 1, ns[b, s]]
                if b == 1:
                    num += v
                else:
                    den += v
                for j in range(n_out):
                    if ob[b, s, j] == 1:
                        numc[j] += v
                    else:
                        denc[j] += v
        post_u[t] = _clip_llr(num, den, cap)
        for j in range(n_out):
            post_c[t, j] = _clip_llr(numc[j], denc[j], cap)
    return pu_arr, pc_arr
