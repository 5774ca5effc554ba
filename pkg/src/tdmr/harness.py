"""End-to-end simulation: encode, write onto a grain image, detect and decode."""
from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .codec import ITERATIVE, NON_ITERATIVE, USER_BITS, Codec, DecoderSchedule, sccc_decode
from .detector import LLR_CAP, DetectorTables, detect_image
from .grains import generate_grain_image, solve_grain_distribution, write_bits

CSV_HEADER = ("p2", "rate", "user_bits_per_grain", "mode", "blocks", "bit_errors", "ber",
              "avg_outer_iters", "max_outer_iters", "seed", "wall_secs")
COLS = 512


@dataclass(frozen=True)
class LlrGaussianModel:
    """Detector LLRs modelled as Normal(+-mean, var) given the coded bit."""

    mean: float = 1.0
    var: float = 1.69

    def __post_init__(self):
        if not (self.mean > 0 and self.var > 0):
            raise ValueError(f"Gaussian model needs positive mean and variance, got {self}")


def llr_to_channel(llr, model: LlrGaussianModel = LlrGaussianModel(), cap: float = LLR_CAP) -> np.ndarray:
    """Channel LLR of a detector output under the Gaussian model: 2*mean*l/var."""
    llr = np.asarray(llr, dtype=float)
    out = np.clip(2.0 * model.mean * llr / model.var, -cap, cap)
    return np.where(np.abs(llr) >= cap, np.sign(llr) * cap, out)


@dataclass(frozen=True)
class SimConfig:
    p2: float
    rate: float
    mode: str = ITERATIVE
    blocks: int = 1
    seed: int = 0
    ber_target: float = 1e-5
    gaussian: LlrGaussianModel = field(default_factory=LlrGaussianModel)
    genie_stop: bool = True
    cols: int = COLS
    user_bits: int = USER_BITS
    workers: int = 1

    def __post_init__(self):
        solve_grain_distribution(self.p2)
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"rate must lie in (0, 1), got {self.rate}")
        if not 0.0 < self.ber_target < 1.0:
            raise ValueError(f"BER target must lie in (0, 1), got {self.ber_target}")
        if self.blocks < 1:
            raise ValueError("need at least one block")
        DecoderSchedule.for_mode(self.mode)

    @property
    def rows(self) -> int:
        """Image rows holding user_bits/rate coded bits, rounded to an even count."""
        return max(2, 2 * round(self.user_bits / (self.rate * self.cols) / 2))

    @property
    def coded_bits(self) -> int:
        return self.rows * self.cols

    @property
    def effective_rate(self) -> float:
        return self.user_bits / self.coded_bits

    @property
    def user_bits_per_grain(self) -> float:
        return 2.0 * self.rate

    @property
    def schedule(self) -> DecoderSchedule:
        return DecoderSchedule.for_mode(self.mode)

    def codec(self) -> Codec:
        return Codec.build(self.rate, seed=self.seed, user_len=self.user_bits, output_len=self.coded_bits)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        g = d.pop("gaussian")
        d["gauss_mean"], d["gauss_var"] = g["mean"], g["var"]
        return d


_CONFIG_TYPES = {
    "p2": float, "rate": float, "mode": str, "blocks": int, "seed": int, "ber_target": float,
    "gauss_mean": float, "gauss_var": float, "genie_stop": None, "cols": int, "user_bits": int,
    "workers": int,
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_TYPES:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        conv = _CONFIG_TYPES[key]
        values[key] = _parse_bool(val) if conv is None else conv(val)
    return values


def make_config(values: dict) -> SimConfig:
    values = dict(values)
    gauss = LlrGaussianModel(values.pop("gauss_mean", 1.0), values.pop("gauss_var", 1.69))
    return SimConfig(gaussian=gauss, **values)


def block_rng(seed: int, block_index: int) -> np.random.Generator:
    """Counter-based stream for one block: Philox keyed by seed XOR block index."""
    return np.random.Generator(np.random.Philox(key=(int(seed) ^ int(block_index)) & (2 ** 64 - 1)))


@dataclass
class BlockResult:
    block: int
    bit_errors: int
    outer_iters: int
    inner_iters: int


def run_block(config: SimConfig, block_index: int, codec: Codec | None = None,
              tables: DetectorTables | None = None) -> BlockResult:
    codec = codec or config.codec()
    dist = solve_grain_distribution(config.p2)
    tables = tables or DetectorTables.build(dist)
    schedule = config.schedule
    rng = block_rng(config.seed, block_index)
    user = rng.integers(0, 2, config.user_bits, dtype=np.int8)
    coded = codec.encode(user)
    image = generate_grain_image(dist, config.rows, config.cols, int(rng.integers(2 ** 63)))
    written = write_bits(image, 2 * coded.astype(np.int8) - 1)
    known = user if config.genie_stop else None
    apriori = np.zeros((config.rows, config.cols))
    outer_ext = None
    errors = config.user_bits
    inner_total = 0
    outer = 0
    for outer in range(1, schedule.outer_iters + 1):
        det = detect_image(written, apriori, tables)
        channel = llr_to_channel(det.extrinsic.ravel(), config.gaussian)
        res = sccc_decode(channel, schedule.inner_iters, codec, known=known, outer_extrinsic=outer_ext)
        inner_total += res.iterations
        outer_ext = res.outer_extrinsic
        errors = int(np.count_nonzero(res.bits != user))
        if config.genie_stop and errors == 0:
            break
        apriori = res.feedback.reshape(config.rows, config.cols)
    return BlockResult(block_index, errors, outer, inner_total)


@dataclass
class SimReport:
    p2: float
    rate: float
    mode: str
    blocks: int
    bit_errors: int
    user_bits: int
    avg_outer_iters: float
    max_outer_iters: int
    seed: int
    wall_secs: float
    effective_rate: float
    block_results: list[BlockResult] = field(default_factory=list, repr=False)

    @property
    def user_bits_per_grain(self) -> float:
        return 2.0 * self.rate

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.user_bits * self.blocks)

    def passes(self, ber_target: float) -> bool:
        """Zero errors when the budget cannot resolve the target, else BER at most the target."""
        return self.bit_errors <= error_allowance(ber_target, self.user_bits, self.blocks)

    def csv_row(self) -> list:
        return [f"{self.p2:g}", f"{self.rate:g}", f"{self.user_bits_per_grain:g}", self.mode, self.blocks,
                self.bit_errors, f"{self.ber:.6g}", f"{self.avg_outer_iters:.4g}", self.max_outer_iters,
                self.seed, f"{self.wall_secs:.3f}"]


def _block_worker(args):
    config, index = args
    return run_block(config, index)


def error_allowance(ber_target: float, user_bits: int, blocks: int) -> int:
    """Most bit errors a passing point may show over ``blocks`` blocks."""
    bits = user_bits * blocks
    return 0 if ber_target * bits < 1 else int(np.floor(ber_target * bits))


def run_point(config: SimConfig, max_errors: int | None = None, progress=None) -> SimReport:
    """Run ``config.blocks`` blocks, stopping early once errors exceed ``max_errors``."""
    start = time.perf_counter()
    results: list[BlockResult] = []
    if config.workers > 1:
        # batches of one block per worker, so an exhausted error budget wastes at most one batch
        batch = config.blocks if max_errors is None else config.workers
        with ProcessPoolExecutor(config.workers) as pool:
            for first in range(0, config.blocks, batch):
                jobs = [(config, b) for b in range(first, min(first + batch, config.blocks))]
                for r in pool.map(_block_worker, jobs):
                    results.append(r)
                    if progress:
                        progress(config, r)
                if max_errors is not None and sum(r.bit_errors for r in results) > max_errors:
                    break
    else:
        codec = config.codec()
        tables = DetectorTables.build(solve_grain_distribution(config.p2))
        errors = 0
        for b in range(config.blocks):
            r = run_block(config, b, codec, tables)
            results.append(r)
            errors += r.bit_errors
            if progress:
                progress(config, r)
            if max_errors is not None and errors > max_errors:
                break
    results.sort(key=lambda r: r.block)
    outer = [r.outer_iters for r in results]
    return SimReport(config.p2, config.rate, config.mode, len(results), sum(r.bit_errors for r in results),
                     config.user_bits, float(np.mean(outer)), int(max(outer)), config.seed,
                     time.perf_counter() - start, config.effective_rate, results)


def rate_grid(start: float, stop: float, step: float) -> list[float]:
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(n)]


@dataclass
class RateSearchResult:
    p2: float
    mode: str
    best_rate: float
    reports: list[SimReport]

    @property
    def best_user_bits_per_grain(self) -> float:
        return 2.0 * self.best_rate


def rate_search(p2: float, mode: str, ber_target: float = 1e-5, block_budget: int = 20,
                grid: list[float] | None = None, seed: int = 0,
                gaussian: LlrGaussianModel = LlrGaussianModel(), progress=None, **config_kw) -> RateSearchResult:
    """Highest passing rate on an ascending grid, stopping at the first failure.

    A rate is abandoned as soon as its errors exceed what the target allows
    over the full budget.  Returns rate 0 if nothing passes.
    """
    grid = sorted(grid if grid is not None else rate_grid(0.20, 0.60, 0.01))
    reports: list[SimReport] = []
    best = 0.0
    for rate in grid:
        cfg = SimConfig(p2=p2, rate=rate, mode=mode, blocks=block_budget, seed=seed,
                        ber_target=ber_target, gaussian=gaussian, **config_kw)
        rep = run_point(cfg, error_allowance(ber_target, cfg.user_bits, block_budget), progress=progress)
        reports.append(rep)
        if rep.blocks == block_budget and rep.passes(ber_target):
            best = rate
        else:
            break
    return RateSearchResult(p2, mode, best, reports)


def write_csv(reports: list[SimReport], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for rep in reports:
            w.writerow(rep.csv_row())
    return path


def write_manifest(path: str | Path, config: dict, reports: list[SimReport], extra: dict | None = None) -> Path:
    """JSON record of every configuration value next to a CSV."""
    path = Path(path)
    payload = {
        "config": config,
        "backend": kernels.BACKEND,
        "points": [
            {"p2": r.p2, "rate": r.rate, "effective_rate": r.effective_rate, "mode": r.mode,
             "blocks": r.blocks, "bit_errors": r.bit_errors,
             "outer_iters": [b.outer_iters for b in r.block_results]}
            for r in reports
        ],
    }
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def manifest_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".manifest.json")


__all__ = [
    "CSV_HEADER", "ITERATIVE", "NON_ITERATIVE", "BlockResult", "LlrGaussianModel", "RateSearchResult",
    "SimConfig", "SimReport", "block_rng", "error_allowance", "llr_to_channel", "make_config", "manifest_path",
    "parse_config_text", "rate_grid", "rate_search", "run_block", "run_point", "write_csv", "write_manifest",
]
