"""Acceptance checks, one test per criterion.

Each test prints a single ``CRITERION n: PASS|FAIL`` line before asserting,
so ``pytest -v -s`` (or the captured log) gives a compact scorecard.
"""
import time

import numpy as np
import pytest

from tdmr import grains, harness, oracle, trellis
from tdmr.codec import INNER_CODE, ITERATIVE, NON_ITERATIVE, OUTER_CODE, Codec, DecoderSchedule, map_decode, \
    sccc_decode
from tdmr.detector import detect_image
from tdmr.trellis import FeedbackProbs

from .test_trellis import AA_ROW

END_TO_END_P2 = (0.0, 0.25, 0.5)
END_TO_END_RATE = 0.26
END_TO_END_BLOCKS = 20


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return emit


def _sample_tiling(rows, cols, dist, rng, cache={}):
    if (rows, cols) not in cache:
        cache[rows, cols] = oracle.enumerate_tilings(rows, cols)
    tilings = cache[rows, cols]
    w = np.array([oracle.tiling_weight(t, dist) for t in tilings])
    return tilings[rng.choice(len(tilings), p=w / w.sum())].astype(np.uint8)


def test_criterion_1_trellis_structure(verdict):
    t0 = time.perf_counter()
    states = trellis.enumerate_states()
    row = trellis.symbolic_transition_table()[trellis.state_index("AA")]
    got = {trellis.state_name(s): (f.exponents, f.feedback) for s, f in zip(states, row) if f is not None}
    rng = np.random.default_rng(1)
    draws = [(p2, FeedbackProbs(b, f)) for p2 in (0.0, 0.5) for b, f in ((0, 0), (1, 0), (0, 1), (0.5, 0.5))]
    while len(draws) < 100:
        b, f = rng.dirichlet(np.ones(3))[:2]
        draws.append((rng.uniform(0, 0.5), FeedbackProbs(b, f)))
    worst = 0.0
    for p2, fb in draws:
        mats = trellis.transition_matrices(grains.solve_grain_distribution(p2))
        T = fb.pNeither * mats["N"] + fb.pB * mats["B"] + fb.pF * mats["F"] + mats["1"]
        worst = max(worst, np.abs(T.sum(axis=1) - 1).max())
    secs = time.perf_counter() - t0
    ok = len(states) == 39 and got == AA_ROW and worst < 1e-12 and secs < 1.0
    verdict(1, ok, f"states={len(states)} AA-row-match={got == AA_ROW} max|rowsum-1|={worst:.1e} "
                   f"draws={len(draws)} t={secs:.2f}s")
    assert ok


def test_criterion_2_output_table(verdict):
    t0 = time.perf_counter()
    t = trellis.output_table()
    values_ok = t.size == 2496 and set(np.unique(t)) <= {0.0, 0.125, 0.25, 0.5}
    sums_ok = np.allclose(t.sum(axis=0), 1.0, atol=1e-15)
    sid = trellis.state_index
    cases = 0
    for yi in range(16):
        y = [1 if yi >> (3 - k) & 1 else -1 for k in range(4)]
        for ui in range(4):
            u = (1 if ui & 2 else -1, 1 if ui & 1 else -1)
            expect = {
                "FG": 0.5 if len(set(y)) == 1 else 0.0,
                "AA": 0.25 if (y[0], y[1]) == u else 0.0,
                "DD": 0.25 if (y[0] == y[2] and y[1] == y[3]) else 0.0,
                "DB": 0.125 if y[0] == y[2] else 0.0,
            }
            cases += sum(t[yi, ui, sid(name)] == v for name, v in expect.items())
    secs = time.perf_counter() - t0
    ok = values_ok and sums_ok and cases == 4 * 64 and secs < 1.0
    verdict(2, ok, f"values={values_ok} slice-sums={sums_ok} worked-entries={cases}/256 t={secs:.2f}s")
    assert ok


def test_criterion_3_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst, n = 0.0, 0
    for p2 in (0.0, 0.25, 0.4):
        dist = grains.solve_grain_distribution(p2)
        for trial in range(20):
            cells = _sample_tiling(2, 8, dist, rng)
            y = grains.write_bits(grains.GrainImage(cells), rng.choice([-1, 1], size=16)).values
            apr = rng.normal(0, 2, size=(2, 8)) if trial % 2 else None
            exact = oracle.exact_bit_posteriors(oracle.TinyInstance(dist, y, apr))
            got = 1.0 / (1.0 + np.exp(-detect_image(y, apr, dist).posterior))
            worst = max(worst, np.abs(got - exact).max())
            n += 1
    secs = time.perf_counter() - t0
    ok = n >= 50 and worst < 1e-9 and secs < 60
    verdict(3, ok, f"instances={n} max|P-P_exact|={worst:.1e} t={secs:.1f}s")
    assert ok


def test_criterion_4_grain_generation(verdict):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for p2 in (0.0, 0.1, 0.25, 0.36, 0.5):
        dist = grains.solve_grain_distribution(p2)
        img = grains.generate_grain_image(dist, 1024, 1024, seed=4)
        covered = img.cells.shape == (1024, 1024) and img.cells.max() <= grains.I
        valid = grains.grain_violations(img.cells) == 0
        dev = np.abs(img.grain_frequencies() - dist.as_array()).max()
        ok &= covered and valid and dev <= 0.02
        parts.append(f"p2={p2:g}:dev={dev:.4f}{'' if covered and valid else ':INVALID'}")
    secs = time.perf_counter() - t0
    ok &= secs < 60
    verdict(4, ok, " ".join(parts) + f" t={secs:.1f}s")
    assert ok


def test_criterion_5_codec(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    errors = {}
    for rate in (1 / 5, 1 / 4, 1 / 3, 1 / 2):
        c = Codec.build(rate, seed=5)
        errs = 0
        for _ in range(10):
            u = rng.integers(0, 2, c.user_len)
            x = c.encode(u)
            res = sccc_decode(100.0 * (2 * x - 1.0), DecoderSchedule.for_mode(ITERATIVE), c, known=u)
            errs += int(np.count_nonzero(res.bits != u))
        errors[f"{rate:.3g}"] = errs
    worst = 0.0
    for code, terminated in ((OUTER_CODE, True), (OUTER_CODE, False), (INNER_CODE, False)):
        for _ in range(5):
            T = 12 + (code.memory if terminated else 0)
            cl = rng.normal(0, 2, size=(T, 2))
            il = rng.normal(0, 1, size=T)
            post_u, _, post_c, _ = map_decode(code, cl, il, terminated)
            pu, pc = oracle.exact_codeword_posteriors(code, cl, il, terminated)
            worst = max(worst, np.abs(1 / (1 + np.exp(-post_u)) - pu).max(),
                        np.abs(1 / (1 + np.exp(-post_c)) - pc).max())
    secs = time.perf_counter() - t0
    ok = not any(errors.values()) and worst < 1e-9 and secs < 120
    verdict(5, ok, f"noiseless-errors={errors} max|P-P_exact|={worst:.1e} t={secs:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def end_to_end():
    """All blocks at the end-to-end operating point, run to completion for the statistics."""
    reports = {}
    for p2 in END_TO_END_P2:
        cfg = harness.SimConfig(p2=p2, rate=END_TO_END_RATE, mode=ITERATIVE, blocks=END_TO_END_BLOCKS, seed=6)
        reports[p2] = harness.run_point(cfg)
    return reports


@pytest.mark.slow
def test_criterion_6_end_to_end(verdict, end_to_end):
    parts = [f"p2={p2:g}:errors={r.bit_errors},failed-blocks={sum(b.bit_errors > 0 for b in r.block_results)}"
             f"/{r.blocks},t={r.wall_secs:.0f}s" for p2, r in end_to_end.items()]
    ok = all(r.blocks == END_TO_END_BLOCKS and r.bit_errors == 0 for r in end_to_end.values())
    verdict(6, ok, f"rate={END_TO_END_RATE} " + " ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_7_monotone_rates(verdict):
    grid = harness.rate_grid(0.10, 0.60, 0.02)
    best = {}
    for p2 in (0.0, 0.25):
        for mode in (ITERATIVE, NON_ITERATIVE):
            res = harness.rate_search(p2, mode, 1e-5, 20, grid, seed=7)
            best[p2, mode] = res.best_rate
    iter_ge = all(best[p2, ITERATIVE] >= best[p2, NON_ITERATIVE] for p2 in (0.0, 0.25))
    p2_ge = all(best[0.0, m] >= best[0.25, m] for m in (ITERATIVE, NON_ITERATIVE))
    ok = iter_ge and p2_ge
    verdict(7, ok, " ".join(f"best[p2={p2:g},{m}]={r:g}" for (p2, m), r in best.items())
            + f" iterative>=non-iterative={iter_ge} p2=0>=p2=0.25={p2_ge}")
    assert ok


@pytest.mark.slow
def test_criterion_8_iteration_statistics(verdict, end_to_end):
    max_outer = max(r.max_outer_iters for r in end_to_end.values())
    avg = {p2: r.avg_outer_iters for p2, r in end_to_end.items()}
    ok = max_outer <= 30 and avg[0.0] < avg[0.25]
    verdict(8, ok, f"max-outer={max_outer} " + " ".join(f"avg[p2={p2:g}]={a:.2f}" for p2, a in avg.items()))
    assert ok
