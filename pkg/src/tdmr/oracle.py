"""Brute-force references for tests: exact posteriors on tiny instances."""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from . import trellis
from .grains import A, B, C, D, E, F, G, H, I, GrainDistribution, grain_violations, last_written_index

MAX_ENUMERATION = 2 ** 24


@dataclass(frozen=True, eq=False)
class TinyInstance:
    dist: GrainDistribution
    written: np.ndarray  # (rows, cols) +-1
    apriori: np.ndarray | None = None  # (rows, cols) LLRs, log P(+1)/P(-1)

    def __post_init__(self):
        rows, cols = self.written.shape
        if rows > 4 or cols > 8:
            raise ValueError(f"tiny instances are at most 4x8, got {rows}x{cols}")


def enumerate_tilings(rows: int, cols: int, limit: int = MAX_ENUMERATION) -> list[np.ndarray]:
    """Every tiling of a rows x cols rectangle by the four grain types."""
    cells = np.full((rows, cols), -1, dtype=np.int64)
    found: list[np.ndarray] = []
    shapes = (
        ((0, 0, A),),
        ((0, 0, B), (1, 0, C)),
        ((0, 0, D), (0, 1, E)),
        ((0, 0, F), (1, 0, G), (0, 1, H), (1, 1, I)),
    )

    def fill(pos: int):
        while pos < rows * cols and cells.flat[pos] >= 0:
            pos += 1
        if pos == rows * cols:
            found.append(cells.copy())
            if len(found) > limit:
                raise ValueError("tiling enumeration exceeds the budget")
            return
        r, c = divmod(pos, cols)
        for shape in shapes:
            spots = [(r + dr, c + dc, lab) for dr, dc, lab in shape]
            if all(rr < rows and cc < cols and cells[rr, cc] < 0 for rr, cc, _ in spots):
                for rr, cc, lab in spots:
                    cells[rr, cc] = lab
                fill(pos + 1)
                for rr, cc, _ in spots:
                    cells[rr, cc] = -1

    fill(0)
    for t in found:
        assert grain_violations(t.astype(np.uint8)) == 0
    return found


@functools.lru_cache(maxsize=16)
def _tiling_stack(rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    """All tilings stacked as (N, rows, cols) with their last-written indices (N, rows*cols)."""
    cells = np.array(enumerate_tilings(rows, cols), dtype=np.uint8)
    last = np.array([last_written_index(t).ravel() for t in cells])
    cells.flags.writeable = last.flags.writeable = False
    return cells, last


@functools.lru_cache(maxsize=64)
def _tiling_weights(rows: int, cols: int, dist: GrainDistribution) -> np.ndarray:
    w = np.array([tiling_weight(t, dist) for t in _tiling_stack(rows, cols)[0]])
    w.flags.writeable = False
    return w


_TYPE = {A: 0, B: 1, D: 2, F: 3}


def tiling_weight(cells: np.ndarray, dist: GrainDistribution) -> float:
    """Prior weight of a tiling under the column-scan grain process.

    Columns are scanned left to right and each column top to bottom.  A cell
    not already covered starts a grain of type t with probability p_t
    normalized over the types that fit: a vertical grain does not fit when
    the cell below is covered by a grain arriving from the left.  The edge
    of the image is not consulted, so the weight of a tiling confined to the
    image is the probability of that tiling under the unconstrained scan.
    """
    probs = dist.as_array()
    rows, cols = cells.shape
    weight = 1.0
    for n in range(cols):
        for m in range(rows):
            lab = cells[m, n]
            if lab not in _TYPE:
                continue
            blocked = m + 1 < rows and cells[m + 1, n] in (E, H, I)
            norm = probs[0] + probs[2] if blocked else 1.0
            weight *= probs[_TYPE[lab]] / norm
    return weight


def _prior_plus(apriori: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.asarray(apriori, dtype=float)))


def exact_bit_posteriors(instance: TinyInstance, method: str = "factorized") -> np.ndarray:
    """P(u = +1 | written image) for every cell.

    ``method="full"`` enumerates every input assignment for every tiling
    (images of at most 16 cells); ``"factorized"`` sums the inputs out
    analytically, since only the last-written input of each grain reaches
    the medium.
    """
    y = np.asarray(instance.written)
    rows, cols = y.shape
    prior = _prior_plus(np.zeros((rows, cols)) if instance.apriori is None else instance.apriori)
    if method not in ("full", "factorized"):
        raise ValueError(f"unknown method {method!r}")
    if method == "full" and rows * cols > 16:
        raise ValueError("instance too large for full enumeration")
    tilings, lasts = _tiling_stack(rows, cols)
    weights = _tiling_weights(rows, cols, instance.dist)
    if method == "full":
        n = rows * cols
        num = np.zeros((rows, cols))
        total = 0.0
        u = np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int64)  # (2^n, n)
        p_u = np.prod(np.where(u > 0, prior.ravel(), 1.0 - prior.ravel()), axis=1)
        for w, last in zip(weights, lasts):
            if w == 0.0:
                continue
            match = np.all(u[:, last] == y.ravel(), axis=1)
            mass = w * p_u * match
            total += mass.sum()
            num += ((u > 0) * mass[:, None]).sum(axis=0).reshape(rows, cols)
        return num / total
    flat_y = y.ravel()
    flat_prior = prior.ravel()
    # a tiling explains y only if every cell shows its grain's last-written value
    ok = (weights > 0) & np.all(flat_y[lasts] == flat_y, axis=1)
    is_last = lasts[ok] == np.arange(rows * cols)
    p_written = np.where(flat_y > 0, flat_prior, 1.0 - flat_prior)
    mass = weights[ok] * np.prod(np.where(is_last, p_written, 1.0), axis=1)
    total = mass.sum()
    if total == 0.0:
        raise ValueError("written image is impossible under every tiling")
    post = np.where(is_last, (flat_y > 0).astype(float), flat_prior)
    return np.clip((mass @ post).reshape(rows, cols) / total, 0.0, 1.0)


def _capped_log_ratio(num: float, den: float, cap: float) -> float:
    if num <= 0.0 and den <= 0.0:
        return 0.0
    if den <= 0.0:
        return cap
    if num <= 0.0:
        return -cap
    return float(np.clip(np.log(num / den), -cap, cap))


def reference_detect(written: np.ndarray, apriori: np.ndarray | None, dist: GrainDistribution,
                     cap: float = 100.0) -> tuple[np.ndarray, np.ndarray]:
    """Straight-line detector: explicit gamma, alpha, beta, lambda and feedback.

    Uses the scalar trellis functions only and returns (posterior, extrinsic)
    bit LLRs.  Deliberately slow, for images of a few columns.
    """
    y = np.asarray(written)
    rows, cols = y.shape
    apriori = np.zeros((rows, cols)) if apriori is None else np.asarray(apriori, dtype=float)
    states = trellis.enumerate_states()
    ns = len(states)
    w = trellis.stage_weights()
    crossing = trellis.crosses_bottom()
    exit_ok = trellis.boundary_exit()
    aa = trellis.state_index("AA")
    out = np.zeros((rows, cols))
    ext = np.zeros((rows, cols))
    fb = [trellis.FeedbackProbs(0.0, 0.0)] * cols
    for m in range(0, rows, 2):
        last = m + 2 == rows
        window = np.concatenate([y[m:m + 2], -np.ones((2, 1))], axis=1)

        def trans(i, j, n):
            if last and crossing[j]:
                return 0.0
            return trellis.transition_probability(states[i], states[j], dist, fb[n])

        def apr(u, n):
            p = 1.0
            for k in range(2):
                pp = 1.0 / (1.0 + np.exp(-apriori[m + k, n]))
                p *= pp if u[k] > 0 else 1.0 - pp
            return p

        inputs = [(-1, -1), (-1, 1), (1, -1), (1, 1)]

        def like(n, i, u):
            yk = (window[0, n], window[1, n], window[0, n + 1], window[1, n + 1])
            return trellis.output_probability(yk, u, states[i]) * w[i]

        def gamma(n, i, u):
            return like(n, i, u) * apr(u, n)

        alpha = np.zeros((cols, ns))
        for j in range(ns):
            alpha[0, j] = trans(aa, j, 0)
        for n in range(1, cols):
            for j in range(ns):
                alpha[n, j] = sum(alpha[n - 1, i] * sum(gamma(n - 1, i, u) for u in inputs) * trans(i, j, n)
                                  for i in range(ns))
            alpha[n] /= alpha[n].sum()
        beta = np.zeros((cols, ns))
        beta[cols - 1] = exit_ok
        for n in range(cols - 2, -1, -1):
            for i in range(ns):
                beta[n, i] = sum(trans(i, j, n + 1) * sum(gamma(n + 1, j, u) for u in inputs) * beta[n + 1, j]
                                 for j in range(ns))
            beta[n] /= beta[n].sum()
        new_fb = []
        for n in range(cols):
            # lambda without the a-priori of the bits being decided
            lam = {u: np.array([alpha[n, i] * like(n, i, u) * beta[n, i] for i in range(ns)])
                   for u in inputs}
            pp = 1.0 / (1.0 + np.exp(-apriori[m:m + 2, n]))
            for k in range(2):
                other = 1 - k
                num = den = 0.0
                for u, v in lam.items():
                    w_other = pp[other] if u[other] > 0 else 1.0 - pp[other]
                    if u[k] > 0:
                        num += v.sum() * w_other
                    else:
                        den += v.sum() * w_other
                ext[m + k, n] = _capped_log_ratio(num, den, cap)
                out[m + k, n] = np.clip(ext[m + k, n] + apriori[m + k, n], -cap, cap)
            per_state = sum(lam[u] * apr(u, n) for u in inputs)
            probs = []
            for lab in (B, F):
                sel = sum(per_state[i] for i, s in enumerate(states) if s[1] == lab)
                llr = _capped_log_ratio(sel, per_state.sum() - sel, cap)
                probs.append(np.exp(llr) / (1.0 + np.exp(llr)))
            new_fb.append(trellis.FeedbackProbs(probs[0], probs[1]))
        fb = new_fb
    return out, ext


def exact_codeword_posteriors(code, code_llr: np.ndarray, input_llr: np.ndarray | None = None,
                              terminated: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """P(bit = 1) for inputs and code bits, enumerating every input word.

    ``code`` is a :class:`tdmr.codec.ConvCode`; ``code_llr`` has shape
    (T, n_out) and ``input_llr`` shape (T,).  With ``terminated`` the last
    ``code.memory`` inputs are fixed to the flush bits that return the
    encoder to state zero.
    """
    code_llr = np.asarray(code_llr, dtype=float)
    T = code_llr.shape[0]
    n_free = T - code.memory if terminated else T
    if n_free > 16:
        raise ValueError("at most 16 free input bits")
    input_llr = np.zeros(T) if input_llr is None else np.asarray(input_llr, dtype=float)
    weights, inputs, outputs = [], [], []
    for word in itertools.product((0, 1), repeat=n_free):
        u, c = code.encode_trellis(np.array(word, dtype=np.int64), terminate=terminated)
        x_u = 2 * u - 1
        x_c = 2 * c.reshape(T, -1) - 1
        logw = 0.5 * (np.sum(x_c * code_llr) + np.sum(x_u * input_llr))
        weights.append(logw)
        inputs.append(u)
        outputs.append(c.reshape(T, -1))
    logw = np.array(weights)
    p = np.exp(logw - logw.max())
    p /= p.sum()
    inputs = np.array(inputs)
    outputs = np.array(outputs)
    return p @ inputs, np.tensordot(p, outputs, axes=1)
