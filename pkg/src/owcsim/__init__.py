"""Multi-receiver coded slotted ALOHA simulator for indoor optical wireless IoT."""
from .adapt import (FovLookupTable, adaptive_run, estimate_pa_oracle, estimate_pa_power,
                    lookup_from_table, observe_preamble, optimize_fov)
from .config import RunConfig, load_bundled, load_config, parse_config
from .decoder import DecodeResult, classify_slots, peel_decode, reference_decode
from .geometry import (Coverage, LambertianParams, Scenario, concentrator_gain,
                       coverage_sets, grid_positions, lambertian_gain, lambertian_order)
from .protocol import (CRDSA, IRSA16, SLOTTED_ALOHA, CsaGraph, DegreeDistribution,
                       FrameInstance, build_graph, generate_frame,
                       measure_degree_distributions, normalize_distribution)
from .sim import Metrics, SeedPolicy, SweepTable, run_frame, run_frames, sweep

__version__ = "0.1.0"
