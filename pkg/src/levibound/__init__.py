"""Numerical toolkit for boundary geometry, barriers and invariant metrics on
pseudoconvex domains."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .geometry import (  # noqa: E402
    DomainModel,
    catalog_domain,
    custom_domain,
    cut_half,
    distance_to_boundary,
    domain_from_spec,
    function_domain,
    intersect_domains,
    levi_form,
    levi_rank,
    nearest_boundary_point,
)
from .kernels import BACKEND  # noqa: E402
from .normalization import NormalizedChart, normalize_chart  # noqa: E402
from .barrier import BarrierFunction, build_barrier, build_barrier_family, verify_barrier  # noqa: E402
from .bergman import KernelEvaluator, bergman_kernel, bergman_metric  # noqa: E402
from .kobayashi import DiscFamily, kobayashi_upper, sibony_lower  # noqa: E402
from .harness import ExperimentConfig, detect_levi_flatness, fit_kernel_exponent  # noqa: E402
