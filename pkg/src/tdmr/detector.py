"""Two-row forward-backward detector with soft grain-state feedback."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import kernels, trellis
from .grains import B, F, GrainDistribution, WrittenImage

LLR_CAP = 100.0
_FB_ORDER = (trellis.FEEDBACK_NEITHER, trellis.FEEDBACK_B, trellis.FEEDBACK_F, trellis.FEEDBACK_ONE)


def clip_llr(llr, cap: float = LLR_CAP) -> np.ndarray:
    return np.clip(np.nan_to_num(np.asarray(llr, dtype=float), nan=0.0), -cap, cap)


def bit_probabilities(llr) -> tuple[np.ndarray, np.ndarray]:
    """P(bit = -1), P(bit = +1) for LLR = log P(+1)/P(-1)."""
    llr = np.asarray(llr, dtype=float)
    return 1.0 / (1.0 + np.exp(llr)), 1.0 / (1.0 + np.exp(-llr))


@dataclass(frozen=True, eq=False)
class DetectorTables:
    """Numeric trellis tables for one grain distribution; shared read-only."""

    dist: GrainDistribution
    coef: np.ndarray  # (4, 39, 39): multiplies pN, pB, pF, 1
    coef_last: np.ndarray  # same with bottom-crossing states removed
    outputs: np.ndarray  # (16, 4, 39) output table times stage weights
    exit: np.ndarray  # (39,)
    start: int = field(default_factory=lambda: trellis.state_index("AA"))
    bottom_b: np.ndarray = field(default_factory=lambda: np.array(
        [s[1] == B for s in trellis.enumerate_states()]))
    bottom_f: np.ndarray = field(default_factory=lambda: np.array(
        [s[1] == F for s in trellis.enumerate_states()]))

    @classmethod
    def build(cls, dist: GrainDistribution) -> "DetectorTables":
        mats = trellis.transition_matrices(dist)
        coef = np.stack([mats[k] for k in _FB_ORDER])
        coef_last = coef.copy()
        coef_last[:, :, trellis.crosses_bottom()] = 0.0
        outputs = trellis.output_table() * trellis.stage_weights()[None, None, :]
        return cls(dist, coef, coef_last, outputs, trellis.boundary_exit())


@dataclass
class PassResult:
    posterior: np.ndarray  # (2, cols) bit LLRs including the a-priori term
    extrinsic: np.ndarray  # (2, cols)
    state_posterior: np.ndarray  # (cols, 39) P(S_n = s | window outputs)
    feedback_b: np.ndarray  # (cols,) P(bottom cell is a B subgrain)
    feedback_f: np.ndarray


def compute_feedback(state_posterior: np.ndarray, states_b=None, states_f=None,
                     cap: float = LLR_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Per-column P(X=B), P(X=F) from per-column state probabilities.

    The state sets default to the states whose bottom subgrain is B (resp.
    F), i.e. grains that continue into the next pass.  Probabilities go
    through a clipped log-ratio and back, as the LLR exchange does.
    """
    lam = np.asarray(state_posterior, dtype=float)
    if states_b is None:
        states_b = [s[1] == B for s in trellis.enumerate_states()]
    if states_f is None:
        states_f = [s[1] == F for s in trellis.enumerate_states()]
    total = lam.sum(axis=-1)
    out = []
    for mask in (np.asarray(states_b, bool), np.asarray(states_f, bool)):
        num = lam[..., mask].sum(axis=-1)
        den = total - num
        with np.errstate(divide="ignore", invalid="ignore"):
            llr = np.log(num) - np.log(den)
        llr = np.clip(np.nan_to_num(llr, nan=0.0), -cap, cap)
        out.append(1.0 / (1.0 + np.exp(-llr)))
    return out[0], out[1]


def _y_indices(y2: np.ndarray) -> np.ndarray:
    """Output-pattern index per column for a (2, cols) +-1 window."""
    ext = np.concatenate([y2, -np.ones((2, 1), dtype=y2.dtype)], axis=1)
    bits = (ext > 0).astype(np.int64)
    return 8 * bits[0, :-1] + 4 * bits[1, :-1] + 2 * bits[0, 1:] + bits[1, 1:]


def detector_pass(y2: np.ndarray, apriori: np.ndarray, fb_b: np.ndarray, fb_f: np.ndarray,
                  tables: DetectorTables, last: bool = False, cap: float = LLR_CAP) -> PassResult:
    """Forward-backward over rows (m, m+1).

    ``y2`` holds the read-back values of the two rows; the column to the
    right of the window is the -1 frame.  ``fb_b[n]``/``fb_f[n]`` are the
    feedback probabilities for the cell above column n.  ``last`` marks the
    bottom pair, whose grains may not extend below the image.
    """
    y2 = np.asarray(y2)
    cols = y2.shape[1]
    apriori = clip_llr(apriori, cap)
    q0, q1 = bit_probabilities(apriori)  # (2, cols) each
    # pa[n, u]: a-priori of the input pair, u = 2*u0 + u1 with bit 1 meaning +1
    pa = np.stack([q0[0] * q0[1], q0[0] * q1[1], q1[0] * q0[1], q1[0] * q1[1]], axis=1)
    pout = tables.outputs[_y_indices(y2)]  # (cols, 4, 39)
    emit = np.einsum("nu,nus->ns", pa, pout)
    fb_b = np.asarray(fb_b, dtype=float)
    fb_f = np.asarray(fb_f, dtype=float)
    fb_n = np.clip(1.0 - fb_b - fb_f, 0.0, 1.0)
    coef = tables.coef_last if last else tables.coef
    alpha0 = (coef[0, tables.start] * fb_n[0] + coef[1, tables.start] * fb_b[0]
              + coef[2, tables.start] * fb_f[0] + coef[3, tables.start])
    try:
        alpha, beta = kernels.forward_backward(alpha0, emit, fb_n, fb_b, fb_f, coef, tables.exit)
    except FloatingPointError as exc:
        raise ValueError(f"written rows are inconsistent with the grain model: {exc}") from None

    state_post = alpha * emit * beta
    state_post /= state_post.sum(axis=1, keepdims=True)
    # m[n, u] = sum_s alpha * P(y | u, s) * beta, without the a-priori of u
    m = np.einsum("ns,nus,ns->nu", alpha, pout, beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        ext0 = (np.log(m[:, 2] * q0[1] + m[:, 3] * q1[1])
                - np.log(m[:, 0] * q0[1] + m[:, 1] * q1[1]))
        ext1 = (np.log(m[:, 1] * q0[0] + m[:, 3] * q1[0])
                - np.log(m[:, 0] * q0[0] + m[:, 2] * q1[0]))
    extrinsic = clip_llr(np.stack([ext0, ext1]), cap)
    posterior = clip_llr(extrinsic + apriori, cap)
    pb, pf = compute_feedback(state_post, tables.bottom_b, tables.bottom_f, cap)
    return PassResult(posterior, extrinsic, state_post, pb, pf)


@dataclass
class DetectionResult:
    posterior: np.ndarray  # (rows, cols)
    extrinsic: np.ndarray
    feedback_b: np.ndarray  # (rows // 2, cols): feedback emitted by each pass
    feedback_f: np.ndarray

    def feedback_csv(self) -> str:
        buf = io.StringIO()
        buf.write("pass,column,p_b,p_f\n")
        for j in range(self.feedback_b.shape[0]):
            for n in range(self.feedback_b.shape[1]):
                buf.write(f"{j},{n},{self.feedback_b[j, n]:.6g},{self.feedback_f[j, n]:.6g}\n")
        return buf.getvalue()


def detect_image(written: WrittenImage | np.ndarray, apriori, tables: DetectorTables | GrainDistribution,
                 cap: float = LLR_CAP) -> DetectionResult:
    """Run the two-row detector over consecutive row pairs, top to bottom."""
    values = written.values if isinstance(written, WrittenImage) else np.asarray(written)
    if isinstance(tables, GrainDistribution):
        tables = DetectorTables.build(tables)
    rows, cols = values.shape
    if rows % 2:
        raise ValueError("image must have an even number of rows")
    apriori = np.zeros((rows, cols)) if apriori is None else np.asarray(apriori, dtype=float)
    if apriori.shape != (rows, cols):
        raise ValueError(f"a-priori shape {apriori.shape} does not match image {(rows, cols)}")
    posterior = np.empty((rows, cols))
    extrinsic = np.empty((rows, cols))
    n_pass = rows // 2
    fbb_out = np.empty((n_pass, cols))
    fbf_out = np.empty((n_pass, cols))
    fb_b = np.zeros(cols)
    fb_f = np.zeros(cols)
    for j in range(n_pass):
        r = 2 * j
        res = detector_pass(values[r:r + 2], apriori[r:r + 2], fb_b, fb_f, tables,
                            last=(j == n_pass - 1), cap=cap)
        posterior[r:r + 2] = res.posterior
        extrinsic[r:r + 2] = res.extrinsic
        fb_b, fb_f = res.feedback_b, res.feedback_f
        fbb_out[j], fbf_out[j] = fb_b, fb_f
    return DetectionResult(posterior, extrinsic, fbb_out, fbf_out)
