"""Pure-Python/NumPy versions of the hot loops.

Signatures match the compiled ``_ckernels`` module one for one; callers get
whichever is available through :mod:`tdmr.kernels`.
"""
import numpy as np

_A, _B, _C, _D, _E, _F, _G, _H, _I = range(9)
_EMPTY = 255


def greedy_tile(rows, cols, square_order, dimer_order, n2, n3, n4):
    """Random sequential placement: 2x2 grains, then 2x1/1x2, then 1x1 fill.

    ``square_order`` is a permutation of the (rows-1)*(cols-1) candidate
    top-left corners; ``dimer_order`` a permutation of the vertical
    candidates ((rows-1)*cols, first) followed by the horizontal ones.
    """
    cells = np.full((rows, cols), _EMPTY, dtype=np.uint8)
    placed = 0
    w = cols - 1
    for idx in square_order:
        if placed >= n4:
            break
        r, c = divmod(int(idx), w)
        if (cells[r, c] == _EMPTY and cells[r, c + 1] == _EMPTY
                and cells[r + 1, c] == _EMPTY and cells[r + 1, c + 1] == _EMPTY):
            cells[r, c], cells[r + 1, c], cells[r, c + 1], cells[r + 1, c + 1] = _F, _G, _H, _I
            placed += 1
    nv = (rows - 1) * cols
    left2, left3 = n2, n3
    for idx in dimer_order:
        if left2 <= 0 and left3 <= 0:
            break
        idx = int(idx)
        if idx < nv:
            if left2 <= 0:
                continue
            r, c = divmod(idx, cols)
            if cells[r, c] == _EMPTY and cells[r + 1, c] == _EMPTY:
                cells[r, c], cells[r + 1, c] = _B, _C
                left2 -= 1
        else:
            if left3 <= 0:
                continue
            r, c = divmod(idx - nv, w)
            if cells[r, c] == _EMPTY and cells[r, c + 1] == _EMPTY:
                cells[r, c], cells[r, c + 1] = _D, _E
                left3 -= 1
    cells[cells == _EMPTY] = _A
    return cells


def sequential_tile(rows, cols, n2, n3, n4, uniforms):
    """Raster-order tiling with exact grain quotas and backtracking.

    At the first empty cell a grain type that fits is drawn with probability
    proportional to its remaining quota.  Dead ends backtrack; returns None
    once the supply of uniforms (one per decision) runs out.
    """
    area = rows * cols
    n1 = area - 2 * n2 - 2 * n3 - 4 * n4
    if n1 < 0:
        return None
    left = [n1, n2, n3, n4]
    cells = np.full(area, _EMPTY, dtype=np.uint8)
    stack = []  # (position, grain type placed, types still untried)
    pos = 0
    draws = 0
    n_uniform = len(uniforms)

    def fits(p, kind):
        r, c = divmod(p, cols)
        if kind == 0:
            return True
        if kind == 1:
            return r + 1 < rows
        if kind == 2:
            return c + 1 < cols and cells[p + 1] == _EMPTY
        return r + 1 < rows and c + 1 < cols and cells[p + 1] == _EMPTY

    def place(p, kind, fill):
        if kind == 0:
            cells[p] = _A if fill else _EMPTY
        elif kind == 1:
            cells[p], cells[p + cols] = (_B, _C) if fill else (_EMPTY, _EMPTY)
        elif kind == 2:
            cells[p], cells[p + 1] = (_D, _E) if fill else (_EMPTY, _EMPTY)
        else:
            vals = (_F, _H, _G, _I) if fill else (_EMPTY,) * 4
            cells[p], cells[p + 1], cells[p + cols], cells[p + cols + 1] = vals

    def choose(candidates):
        nonlocal draws
        total = sum(left[k] for k in candidates)
        x = uniforms[draws] * total
        draws += 1
        for k in candidates:
            x -= left[k]
            if x < 0:
                return k
        return candidates[-1]

    while True:
        while pos < area and cells[pos] != _EMPTY:
            pos += 1
        if pos == area:
            return cells.reshape(rows, cols)
        options = [k for k in range(4) if left[k] > 0 and fits(pos, k)]
        while not options:
            if not stack or draws >= n_uniform:
                return None
            pos, kind, options = stack.pop()
            place(pos, kind, False)
            left[kind] += 1
        if draws >= n_uniform:
            return None
        kind = choose(options)
        options = [k for k in options if k != kind]
        place(pos, kind, True)
        left[kind] -= 1
        stack.append((pos, kind, options))


def _transition(coef, pn, pb, pf):
    return coef[0] * pn + coef[1] * pb + coef[2] * pf + coef[3]


def forward_backward(alpha0, emit, fbN, fbB, fbF, coef, end):
    """Scaled forward-backward over one two-row pass.

    ``coef`` is (4, S, S): the transition matrices multiplying pN, pB, pF
    and 1.  The transition into column n uses feedback entry n.  Returns
    ``alpha[n]`` (state probability at column n given outputs left of n)
    and ``beta[n]`` (likelihood of outputs right of n), each scaled to sum
    to one per column; ``emit[n]`` is the column-n output factor.
    """
    K, S = emit.shape
    alpha = np.empty((K, S))
    beta = np.empty((K, S))
    a = np.asarray(alpha0, dtype=float)
    alpha[0] = a / a.sum()
    for n in range(1, K):
        T = _transition(coef, fbN[n], fbB[n], fbF[n])
        a = (alpha[n - 1] * emit[n - 1]) @ T
        s = a.sum()
        if s <= 0.0:
            raise FloatingPointError(f"forward recursion vanished at column {n}")
        alpha[n] = a / s
    b = np.asarray(end, dtype=float)
    beta[K - 1] = b / b.sum()
    for n in range(K - 2, -1, -1):
        T = _transition(coef, fbN[n + 1], fbB[n + 1], fbF[n + 1])
        b = T @ (emit[n + 1] * beta[n + 1])
        s = b.sum()
        if s <= 0.0:
            raise FloatingPointError(f"backward recursion vanished at column {n}")
        beta[n] = b / s
    return alpha, beta


def _llr(num, den, cap):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(num) - np.log(den)
    out = np.where(np.isnan(out), 0.0, out)
    return np.clip(out, -cap, cap)


def _bit_probs(llr):
    """(P(bit=0), P(bit=1)) for LLR = log P(1)/P(0)."""
    return 1.0 / (1.0 + np.exp(llr)), 1.0 / (1.0 + np.exp(-llr))


def conv_bcjr(next_state, out_bits, code_llr, input_llr, terminated, cap):
    """Probability-domain BCJR on a rate-1/n binary convolutional trellis.

    ``next_state[b, s]`` and ``out_bits[b, s, j]`` describe the encoder for
    input bit b in state s (state 0 at the start).  ``code_llr`` is (T, n),
    ``input_llr`` is (T,).  Returns posterior LLRs of the inputs (T,) and of
    the code bits (T, n), clipped to +-cap.
    """
    next_state = np.asarray(next_state)
    out_bits = np.asarray(out_bits)
    T, n_out = code_llr.shape
    S = next_state.shape[1]
    c0, c1 = _bit_probs(code_llr)
    u0, u1 = _bit_probs(input_llr)
    # gamma[t, b, s]
    gamma = np.empty((T, 2, S))
    for b, ub in ((0, u0), (1, u1)):
        g = np.repeat(ub[:, None], S, axis=1)
        for j in range(n_out):
            bits = out_bits[b, :, j]
            g = g * np.where(bits[None, :] == 1, c1[:, j:j + 1], c0[:, j:j + 1])
        gamma[:, b, :] = g

    alpha = np.zeros((T + 1, S))
    alpha[0, 0] = 1.0
    for t in range(T):
        a = np.zeros(S)
        for b in (0, 1):
            np.add.at(a, next_state[b], alpha[t] * gamma[t, b])
        s = a.sum()
        alpha[t + 1] = a / s if s > 0 else np.full(S, 1.0 / S)
    beta = np.zeros((T + 1, S))
    if terminated:
        beta[T, 0] = 1.0
    else:
        beta[T] = 1.0 / S
    for t in range(T - 1, -1, -1):
        b_ = gamma[t, 0] * beta[t + 1][next_state[0]] + gamma[t, 1] * beta[t + 1][next_state[1]]
        s = b_.sum()
        beta[t] = b_ / s if s > 0 else np.full(S, 1.0 / S)

    # joint[t, b, s] = alpha_t(s) gamma_t(b, s) beta_{t+1}(next(b, s))
    joint = np.empty((T, 2, S))
    for b in (0, 1):
        joint[:, b, :] = alpha[:T] * gamma[:, b, :] * beta[1:, next_state[b]]
    post_u = _llr(joint[:, 1, :].sum(1), joint[:, 0, :].sum(1), cap)
    post_c = np.empty((T, n_out))
    for j in range(n_out):
        m1 = out_bits[:, :, j] == 1
        num = (joint * m1[None]).sum((1, 2))
        den = (joint * ~m1[None]).sum((1, 2))
        post_c[:, j] = _llr(num, den, cap)
    return post_u, post_c
