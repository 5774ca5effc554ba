"""Two-row BCJR detection and SCCC decoding for the four-grain TDMR channel."""
from .codec import (INNER_CODE, OUTER_CODE, Codec, ConvCodeSpec, DecoderSchedule, Interleaver, RateAdapter,
                    map_decode, outer_impulse, sccc_decode)
from .detector import DetectorTables, compute_feedback, detect_image, detector_pass
from .grains import (GrainDistribution, GrainImage, WrittenImage, generate_grain_image, solve_grain_distribution,
                     write_bits)
from .harness import LlrGaussianModel, SimConfig, SimReport, llr_to_channel, rate_search, run_block, run_point
from .kernels import BACKEND
from .trellis import FeedbackProbs, enumerate_states, output_table, transition_probability

__all__ = [
    "BACKEND", "INNER_CODE", "OUTER_CODE", "Codec", "ConvCodeSpec", "DecoderSchedule", "DetectorTables",
    "FeedbackProbs", "GrainDistribution", "GrainImage", "Interleaver", "LlrGaussianModel", "RateAdapter",
    "SimConfig", "SimReport", "WrittenImage", "compute_feedback", "detect_image", "detector_pass",
    "enumerate_states", "generate_grain_image", "llr_to_channel", "map_decode", "outer_impulse", "output_table",
    "rate_search", "run_block", "run_point", "sccc_decode", "solve_grain_distribution", "transition_probability",
    "write_bits",
]
