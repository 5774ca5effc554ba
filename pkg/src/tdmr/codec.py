"""Serially concatenated convolutional code with random rate adaptation.

Chain: outer non-recursive code [1+X, 1+X+X^3] (terminated) -> interleaver
pi1 -> inner recursive systematic code [1, (1+X+X^3)/(1+X)] (unterminated)
-> interleaver pi2 -> random puncturing or repetition to the target length.
LLRs are log P(bit=1)/P(bit=0); bit 1 is written as +1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

LLR_CAP = 100.0
USER_BITS = 32768
NON_ITERATIVE, ITERATIVE = "non-iterative", "iterative"


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


@dataclass(frozen=True)
class ConvCodeSpec:
    """Rate-1/n binary convolutional code in rational form.

    Each output is ``numerators[j] / denominator`` applied to the input,
    polynomials given as integer bit masks (bit k is the X^k coefficient).
    A denominator of 1 gives a feed-forward code; a numerator equal to the
    denominator is a systematic output.
    """

    numerators: tuple[int, ...]
    denominator: int = 1
    memory: int = 3

    def __post_init__(self):
        if not self.denominator & 1:
            raise ValueError("denominator must have a constant term")
        top = max(self.numerators + (self.denominator,)).bit_length() - 1
        if top > self.memory:
            raise ValueError(f"polynomial degree {top} exceeds memory {self.memory}")

    @property
    def recursive(self) -> bool:
        return self.denominator != 1

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    @property
    def n_out(self) -> int:
        return len(self.numerators)

    def _step(self, state: int, bit: int) -> tuple[int, tuple[int, ...]]:
        # state bit k-1 holds w_{t-k}
        past = state << 1
        w = bit ^ _parity(self.denominator & past)
        reg = past | w
        outs = tuple(_parity(g & reg) for g in self.numerators)
        return reg & (self.n_states - 1), outs

    def trellis(self) -> tuple[np.ndarray, np.ndarray]:
        """``next_state[b, s]`` and ``out_bits[b, s, j]``."""
        S = self.n_states
        nxt = np.empty((2, S), dtype=np.int64)
        out = np.empty((2, S, self.n_out), dtype=np.int64)
        for b in range(2):
            for s in range(S):
                nxt[b, s], out[b, s] = self._step(s, b)
        return nxt, out

    def flush_bit(self, state: int) -> int:
        """Input that shifts a zero into the register."""
        return _parity(self.denominator & (state << 1))

    def encode_trellis(self, bits, terminate: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Encode; returns (inputs incl. any flush bits, code bits flattened per stage)."""
        nxt, out = self._tables
        state = 0
        inputs = [int(b) for b in np.asarray(bits).ravel()]
        coded = []
        for b in inputs:
            coded.append(out[b, state])
            state = nxt[b, state]
        if terminate:
            for _ in range(self.memory):
                b = self.flush_bit(state)
                inputs.append(b)
                coded.append(out[b, state])
                state = nxt[b, state]
        u = np.array(inputs, dtype=np.int64)
        c = np.array(coded, dtype=np.int64).reshape(-1) if coded else np.zeros(0, np.int64)
        return u, c

    @property
    def _tables(self):
        cache = _TRELLIS_CACHE.get(self)
        if cache is None:
            cache = _TRELLIS_CACHE[self] = self.trellis()
        return cache


_TRELLIS_CACHE: dict[ConvCodeSpec, tuple[np.ndarray, np.ndarray]] = {}

OUTER_CODE = ConvCodeSpec(numerators=(0b0011, 0b1011))
INNER_CODE = ConvCodeSpec(numerators=(0b0011, 0b1011), denominator=0b0011)


def outer_impulse(user) -> tuple[np.ndarray, np.ndarray]:
    """The two output streams of the outer encoder, without termination."""
    _, c = OUTER_CODE.encode_trellis(user)
    c = c.reshape(-1, 2)
    return c[:, 0].copy(), c[:, 1].copy()


@dataclass(frozen=True, eq=False)
class Interleaver:
    permutation: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        perm = np.asarray(self.permutation)
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("interleaver is not a permutation")

    @classmethod
    def from_seed(cls, n: int, seed: int) -> "Interleaver":
        return cls(np.random.default_rng(seed).permutation(n), seed)

    def __len__(self) -> int:
        return self.permutation.size

    def interleave(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.permutation]

    def deinterleave(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        out = np.empty_like(y)
        out[self.permutation] = y
        return out


@dataclass(frozen=True, eq=False)
class RateAdapter:
    """Random puncturing or repetition from ``n_in`` to ``n_out`` positions.

    ``source[j]`` is the input position carried by output j.  Puncturing
    keeps a sorted random subset; repetition sends every input floor or ceil
    of n_out/n_in times and shuffles the copies.
    """

    n_in: int
    source: np.ndarray
    seed: int | None = None

    @classmethod
    def from_seed(cls, n_in: int, n_out: int, seed: int) -> "RateAdapter":
        if n_out <= 0:
            raise ValueError("output length must be positive")
        rng = np.random.default_rng(seed)
        if n_out <= n_in:
            src = np.sort(rng.choice(n_in, size=n_out, replace=False))
        else:
            base, extra = divmod(n_out, n_in)
            counts = np.full(n_in, base)
            counts[rng.choice(n_in, size=extra, replace=False)] += 1
            src = rng.permutation(np.repeat(np.arange(n_in), counts))
        return cls(n_in, src.astype(np.int64), seed)

    @property
    def n_out(self) -> int:
        return self.source.size

    def copies(self) -> np.ndarray:
        return np.bincount(self.source, minlength=self.n_in)

    def adapt(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.source]

    def combine(self, llr: np.ndarray) -> np.ndarray:
        """Adjoint in the LLR domain: deleted positions get 0, copies are summed."""
        return np.bincount(self.source, weights=np.asarray(llr, dtype=float), minlength=self.n_in)

    def extrinsic(self, posterior_in: np.ndarray, llr_out: np.ndarray) -> np.ndarray:
        """Per-copy extrinsic: input posterior minus that copy's own observation."""
        return np.asarray(posterior_in)[self.source] - np.asarray(llr_out)


@dataclass(frozen=True)
class DecoderSchedule:
    mode: str
    inner_iters: int
    outer_iters: int

    def __post_init__(self):
        if self.mode == NON_ITERATIVE:
            if (self.inner_iters, self.outer_iters) != (30, 1):
                raise ValueError("non-iterative mode runs 30 decoder iterations and one detector pass")
        elif self.mode == ITERATIVE:
            if self.inner_iters != 8 or not 1 <= self.outer_iters <= 30:
                raise ValueError("iterative mode runs 8 decoder iterations per outer iteration, at most 30 outer")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def for_mode(cls, mode: str) -> "DecoderSchedule":
        return cls(mode, 30, 1) if mode == NON_ITERATIVE else cls(mode, 8, 30)


@dataclass(frozen=True, eq=False)
class Codec:
    rate: float
    user_len: int
    pi1: Interleaver
    pi2: Interleaver
    adapter: RateAdapter
    outer: ConvCodeSpec = OUTER_CODE
    inner: ConvCodeSpec = INNER_CODE

    @classmethod
    def build(cls, rate: float, seed: int = 0, user_len: int = USER_BITS,
              output_len: int | None = None) -> "Codec":
        """Codec for target rate ``rate``; ``output_len`` defaults to round(user_len / rate)."""
        if not 0.0 < rate < 1.0:
            raise ValueError(f"rate must lie in (0, 1), got {rate}")
        n_outer = OUTER_CODE.n_out * (user_len + OUTER_CODE.memory)
        n_inner = INNER_CODE.n_out * n_outer
        n_out = round(user_len / rate) if output_len is None else int(output_len)
        ss = np.random.SeedSequence(seed).spawn(3)
        return cls(rate, user_len,
                   Interleaver.from_seed(n_outer, ss[0]),
                   Interleaver.from_seed(n_inner, ss[1]),
                   RateAdapter.from_seed(n_inner, n_out, ss[2]))

    @property
    def output_len(self) -> int:
        return self.adapter.n_out

    @property
    def effective_rate(self) -> float:
        return self.user_len / self.output_len

    def encode_stages(self, user) -> dict[str, np.ndarray]:
        user = np.asarray(user, dtype=np.int64).ravel()
        if user.size != self.user_len:
            raise ValueError(f"expected {self.user_len} user bits, got {user.size}")
        _, outer = self.outer.encode_trellis(user, terminate=True)
        _, inner = self.inner.encode_trellis(self.pi1.interleave(outer))
        coded = self.adapter.adapt(self.pi2.interleave(inner))
        return {"outer": outer, "inner": inner, "coded": coded}

    def encode(self, user) -> np.ndarray:
        """Coded bits (0/1) of length ``output_len``."""
        return self.encode_stages(user)["coded"]


def map_decode(code: ConvCodeSpec, channel_llr, apriori_llr=None, terminated: bool = False,
               cap: float = LLR_CAP) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Exact APP decoding of one convolutional code.

    ``channel_llr`` has one row per trellis stage and one column per output.
    Returns (input posterior, input extrinsic, code-bit posterior, code-bit
    extrinsic); extrinsics subtract the corresponding inputs.
    """
    nxt, out = code._tables
    ch = np.clip(np.asarray(channel_llr, dtype=float).reshape(-1, code.n_out), -cap, cap)
    T = ch.shape[0]
    apr = np.zeros(T) if apriori_llr is None else np.clip(np.asarray(apriori_llr, dtype=float), -cap, cap)
    post_u, post_c = kernels.conv_bcjr(nxt, out, ch, apr, terminated, cap)
    post_u = np.asarray(post_u)
    post_c = np.asarray(post_c)
    return (post_u, np.clip(post_u - apr, -cap, cap), post_c, np.clip(post_c - ch, -cap, cap))


@dataclass
class DecodeResult:
    bits: np.ndarray  # user-bit decisions, 0/1
    iterations: int
    feedback: np.ndarray  # per coded bit extrinsic LLR for the detector
    outer_extrinsic: np.ndarray  # carried into the next call
    errors: int | None = None


def sccc_decode(channel_llr, schedule: DecoderSchedule | int, codec: Codec, known=None,
                outer_extrinsic=None, cap: float = LLR_CAP) -> DecodeResult:
    """Iterate inner and outer MAP decoders.

    ``channel_llr`` holds one LLR per coded bit.  ``schedule`` (or a plain
    count) sets the number of inner/outer exchanges.  With ``known`` user
    bits, decoding stops as soon as the decisions match them.
    ``outer_extrinsic`` resumes from a previous call's outer messages.
    """
    iters = schedule.inner_iters if isinstance(schedule, DecoderSchedule) else int(schedule)
    ch_out = np.clip(np.asarray(channel_llr, dtype=float), -cap, cap)
    if ch_out.size != codec.output_len:
        raise ValueError(f"expected {codec.output_len} channel LLRs, got {ch_out.size}")
    ch_inner = np.clip(codec.pi2.deinterleave(codec.adapter.combine(ch_out)), -cap, cap)
    n_outer = len(codec.pi1)
    outer_ext = np.zeros(n_outer) if outer_extrinsic is None else np.asarray(outer_extrinsic, dtype=float)
    known = None if known is None else np.asarray(known).ravel()
    bits = np.zeros(codec.user_len, dtype=np.int8)
    post_c_inner = ch_inner.copy()
    errors = None
    done = 0
    for it in range(iters):
        apr = codec.pi1.interleave(outer_ext)
        _, ext_u, post_c_inner, _ = map_decode(codec.inner, ch_inner, apr, False, cap)
        outer_in = codec.pi1.deinterleave(ext_u)
        post_u, _, _, ext_c = map_decode(codec.outer, outer_in, None, True, cap)
        outer_ext = ext_c.ravel()
        bits = (post_u[:codec.user_len] > 0).astype(np.int8)
        done = it + 1
        if known is not None:
            errors = int(np.count_nonzero(bits != known))
            if errors == 0:
                break
    post_coded = codec.pi2.interleave(post_c_inner.ravel())
    feedback = np.clip(codec.adapter.extrinsic(post_coded, ch_out), -cap, cap)
    return DecodeResult(bits, done, feedback, outer_ext, errors)
