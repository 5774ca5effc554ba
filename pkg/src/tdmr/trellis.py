"""The 39-state two-row grain trellis.

A state is the pair of subgrain labels (top, bottom) in one column of the
two-row detection window.  Transition probabilities between adjacent columns
are products of grain-type probabilities and one factor for the feedback
pixel above the new column; the output table gives the probability of the
four read-back bits of a 2x2 block given the two input bits of its left
column and the left column's state.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grains import LABELS, A, B, C, D, E, F, G, H, I, GrainDistribution

_OPEN = frozenset({A, B, D, E, F, H})  # labels allowed below an unconstrained cell
_RIGHT_OPEN = frozenset({A, B, C, D, F, G})

_BELOW = {A: _OPEN, B: {C}, C: _OPEN, D: _OPEN, E: _OPEN, F: {G}, G: _OPEN, H: {I}, I: _OPEN}
_RIGHT = {A: _RIGHT_OPEN, B: _RIGHT_OPEN, C: _RIGHT_OPEN, D: {E}, E: _RIGHT_OPEN,
          F: {H}, G: {I}, H: _RIGHT_OPEN, I: _RIGHT_OPEN}

# horizontal continuations: left label -> forced right label
_CONTINUES = {D: E, F: H, G: I}
# labels that start a new grain, with their grain-type index (0..3 -> p1..p4)
_STARTS = {A: 0, B: 1, D: 2, F: 3}
_VERTICAL_PARTNER = {B: C, F: G}

FEEDBACK_NEITHER, FEEDBACK_B, FEEDBACK_F, FEEDBACK_ONE = "N", "B", "F", "1"
_FB_TEXT = {FEEDBACK_NEITHER: "P(~B,~F)", FEEDBACK_B: "P(B)", FEEDBACK_F: "P(F)", FEEDBACK_ONE: ""}


def allowed_below(label: int) -> frozenset[int]:
    return frozenset(_BELOW[label])


def allowed_right(label: int) -> frozenset[int]:
    return frozenset(_RIGHT[label])


def label_of(name: str) -> int:
    return LABELS.index(name)


def state_name(state: tuple[int, int]) -> str:
    return LABELS[state[0]] + LABELS[state[1]]


@lru_cache(maxsize=None)
def enumerate_states() -> tuple[tuple[int, int], ...]:
    return tuple((top, bot) for top in range(9) for bot in sorted(_BELOW[top]))


def state_index(name: str) -> int:
    return [state_name(s) for s in enumerate_states()].index(name)


@dataclass(frozen=True)
class FeedbackProbs:
    """Soft estimate of the already-detected cell X above the next column."""

    pB: float = 0.0
    pF: float = 0.0

    def __post_init__(self):
        if self.pB < 0 or self.pF < 0 or self.pB + self.pF > 1 + 1e-12:
            raise ValueError(f"invalid feedback probabilities {self}")

    @property
    def pNeither(self) -> float:
        return max(0.0, 1.0 - self.pB - self.pF)


@dataclass(frozen=True)
class Factor:
    """Symbolic transition factor: p1^e1 p2^e2 p3^e3 p4^e4 times a feedback term.

    ``one_row`` marks a new top grain whose cell below is already taken, so
    only the one-row types can start there; their probabilities are then
    renormalized by (p1 + p3).
    """

    exponents: tuple[int, int, int, int]
    feedback: str
    one_row: bool = False

    def evaluate(self, probs: np.ndarray, fb: FeedbackProbs) -> float:
        fbv = {FEEDBACK_NEITHER: fb.pNeither, FEEDBACK_B: fb.pB,
               FEEDBACK_F: fb.pF, FEEDBACK_ONE: 1.0}[self.feedback]
        value = float(np.prod(probs ** np.array(self.exponents))) * fbv
        if self.one_row:
            value /= probs[0] + probs[2]
        return value

    def __str__(self) -> str:
        terms = []
        for k, e in enumerate(self.exponents):
            terms += [f"P{k + 1}"] * e
        if self.feedback != FEEDBACK_ONE:
            terms.append(_FB_TEXT[self.feedback])
        text = "*".join(terms) if terms else "1"
        return text + "/(P1+P3)" if self.one_row else text


def _top_options(prev_top: int):
    """(label, grain type started or None, feedback factor) for the new top cell."""
    if prev_top in _CONTINUES:
        return [(_CONTINUES[prev_top], None, FEEDBACK_ONE)]
    opts = [(lab, k, FEEDBACK_NEITHER) for lab, k in _STARTS.items()]
    opts.append((C, None, FEEDBACK_B))
    opts.append((G, None, FEEDBACK_F))
    return opts


def transition_factor(prev: tuple[int, int], nxt: tuple[int, int]) -> Factor | None:
    """Symbolic P(next | prev), or None where the transition is impossible."""
    states = enumerate_states()
    if prev not in states or nxt not in states:
        raise ValueError(f"invalid state {prev} or {nxt}")
    exps = [0, 0, 0, 0]
    for top, started, fb in _top_options(prev[0]):
        if top != nxt[0]:
            continue
        if started is not None:
            exps[started] += 1
        if top in _VERTICAL_PARTNER:
            bottom_ok = prev[1] not in _CONTINUES and nxt[1] == _VERTICAL_PARTNER[top]
        elif prev[1] in _CONTINUES:
            bottom_ok = nxt[1] == _CONTINUES[prev[1]]
        else:
            bottom_ok = nxt[1] in _STARTS
            if bottom_ok:
                exps[_STARTS[nxt[1]]] += 1
        if not bottom_ok or nxt[1] not in _BELOW[top]:
            return None
        one_row = started is not None and prev[1] in _CONTINUES
        return Factor(tuple(exps), fb, one_row)
    return None


def transition_probability(prev, nxt, dist: GrainDistribution, fb: FeedbackProbs) -> float:
    factor = transition_factor(prev, nxt)
    return 0.0 if factor is None else factor.evaluate(dist.as_array(), fb)


@lru_cache(maxsize=None)
def symbolic_transition_table() -> tuple[tuple[Factor | None, ...], ...]:
    states = enumerate_states()
    return tuple(tuple(transition_factor(p, n) for n in states) for p in states)


def transition_matrices(dist: GrainDistribution) -> dict[str, np.ndarray]:
    """Numeric 39x39 matrices split by feedback term.

    For feedback (pB, pF) the transition matrix is
    ``pN*T["N"] + pB*T["B"] + pF*T["F"] + T["1"]``.
    """
    probs = dist.as_array()
    unit = FeedbackProbs(0.0, 0.0)
    out = {k: np.zeros((39, 39)) for k in (FEEDBACK_NEITHER, FEEDBACK_B, FEEDBACK_F, FEEDBACK_ONE)}
    for i, row in enumerate(symbolic_transition_table()):
        for j, factor in enumerate(row):
            if factor is not None:
                bare = Factor(factor.exponents, FEEDBACK_ONE, factor.one_row)
                out[factor.feedback][i, j] = bare.evaluate(probs, unit)
    return out


def boundary_exit() -> np.ndarray:
    """1 for states that may be followed by the right-hand frame of A grains."""
    return np.array([0.0 if (s[0] in _CONTINUES or s[1] in _CONTINUES) else 1.0
                     for s in enumerate_states()])


def crosses_bottom() -> np.ndarray:
    """States whose bottom subgrain belongs to a grain extending below the window."""
    return np.array([s[1] in (B, F, H) for s in enumerate_states()])


# Determining input of each cell of the 2x2 output block, per subgrain label.
# Variables: u0=(m,n), u1=(m+1,n), v0=(m,n+1), v1=(m+1,n+1), w0=(m+2,n), w1=(m+2,n+1)
_TOP_SOURCE = {A: "u0", C: "u0", E: "u0", I: "u0", B: "u1", H: "u1", D: "v0", F: "v1", G: "v0"}
_BOTTOM_SOURCE = {A: "u1", C: "u1", E: "u1", I: "u1", B: "w0", H: "w0", D: "v1", F: "w1", G: "v1"}
_TOP_RIGHT_SOURCE = {D: "v0", F: "v1", G: "v0"}
_BOTTOM_RIGHT_SOURCE = {D: "v1", F: "w1", G: "v1"}


def y_index(y) -> int:
    """Index 0..15 of a +-1 output pattern (y0, y1, y2, y3), y0 most significant."""
    return sum((1 << (3 - k)) for k, v in enumerate(y) if v > 0)


def u_index(u) -> int:
    return sum((1 << (1 - k)) for k, v in enumerate(u) if v > 0)


def _pattern(index: int, width: int) -> tuple[int, ...]:
    return tuple(1 if (index >> (width - 1 - k)) & 1 else -1 for k in range(width))


@lru_cache(maxsize=None)
def output_table() -> np.ndarray:
    """P(y | u, previous state) as a (16, 4, 39) array.

    Built by enumerating the bits not in ``u`` that can reach the block (the
    inputs at column n+1 and row m+2, plus free bits for column-(n+1)
    outputs not tied to the previous state's grains), each uniform.
    """
    table = np.zeros((16, 4, 39))
    hidden = ("v0", "v1", "w0", "w1", "z2", "z3")
    for si, (top, bot) in enumerate(enumerate_states()):
        sources = (_TOP_SOURCE[top], _BOTTOM_SOURCE[bot],
                   _TOP_RIGHT_SOURCE.get(top, "z2"), _BOTTOM_RIGHT_SOURCE.get(bot, "z3"))
        for ui in range(4):
            u = _pattern(ui, 2)
            for bits in itertools.product((-1, 1), repeat=len(hidden)):
                env = dict(zip(hidden, bits), u0=u[0], u1=u[1])
                y = tuple(env[s] for s in sources)
                table[y_index(y), ui, si] += 1.0 / 2 ** len(hidden)
    return table


def output_probability(y, u, prev: tuple[int, int]) -> float:
    return float(output_table()[y_index(y), u_index(u), enumerate_states().index(prev)])


def stage_weights() -> np.ndarray:
    """Per-state correction applied with the output table inside the detector.

    The table treats the two column-(n+1) outputs under a 2x2 grain as one
    free bit shared by both cells, while every other state spends one free
    bit per such cell.  Halving the FG entry makes the product over stages
    proportional to the exact likelihood of the window.
    """
    w = np.ones(39)
    w[state_index("FG")] = 0.5
    return w


def dump_tables(dist: GrainDistribution | None = None) -> str:
    """Text dump of the symbolic transition table and nonzero output entries."""
    names = [state_name(s) for s in enumerate_states()]
    lines = ["# transitions: prev -> next : factor"]
    for i, row in enumerate(symbolic_transition_table()):
        for j, factor in enumerate(row):
            if factor is not None:
                extra = ""
                if dist is not None:
                    extra = f" = {factor.evaluate(dist.as_array(), FeedbackProbs()):.6g} (no feedback)"
                lines.append(f"{names[i]} -> {names[j]} : {factor}{extra}")
    lines.append("# outputs: prev u0u1 y0y1y2y3 : probability")
    table = output_table()
    for si, name in enumerate(names):
        for ui in range(4):
            for yi in range(16):
                if table[yi, ui, si] > 0:
                    u = "".join("+" if b > 0 else "-" for b in _pattern(ui, 2))
                    y = "".join("+" if b > 0 else "-" for b in _pattern(yi, 4))
                    lines.append(f"{name} {u} {y} : {table[yi, ui, si]:g}")
    return "\n".join(lines) + "\n"
