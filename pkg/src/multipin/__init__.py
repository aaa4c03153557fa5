"""Numerical laboratory for a random-walk pinning model on an evenly spaced
grid of interfaces.

A simple symmetric random walk of length ``N`` collects a reward ``delta`` each
time it sits on one of the horizontal lines ``{..., -T, 0, T, 2T, ...}``.  The
package provides exact first-passage kernels for the interface grid, the free
energy and every derived scaling constant, an exact renewal-based sampler of
the contact skeleton, transfer-matrix oracles for small systems, and a Monte
Carlo harness that verifies the three scaling regimes of the endpoint.
"""

from .kernels import (
    INFINITE,
    KernelTable,
    build_kernel_table,
    hop_pmf,
    hop_transform,
    passage_pmf,
    passage_transform,
    stay_pmf,
    stay_transform,
    transform_pole,
)
from .free_energy import (
    DerivedConstants,
    contact_density,
    free_energy,
    free_energy_single,
    hop_cost,
    hop_transform_ratio,
    regime_offset,
    scaling_constants,
    step_mean,
)
from .renewal import (
    RenewalMass,
    TiltedStepLaw,
    build_step_law,
    partition_identity_check,
    renewal_mass,
    sample_step,
    sample_steps,
)
from .exact_polymer import (
    EndpointLaw,
    SandwichResult,
    contact_fraction,
    endpoint_law,
    log_partition,
    log_partition_bruteforce,
    log_partition_constrained,
    log_partition_constrained_profile,
    sandwich_check,
)
from .path_engine import (
    ConstrainedSampler,
    ContactSkeleton,
    FreeSampler,
    no_contact_endpoint,
    read_skeletons,
    sample_constrained,
    sample_free,
    skeleton_statistics,
    write_skeletons,
)

__version__ = "0.1.0"

__all__ = [
    "INFINITE",
    "KernelTable",
    "build_kernel_table",
    "stay_pmf",
    "hop_pmf",
    "passage_pmf",
    "stay_transform",
    "hop_transform",
    "passage_transform",
    "transform_pole",
    "DerivedConstants",
    "free_energy",
    "free_energy_single",
    "hop_cost",
    "step_mean",
    "contact_density",
    "scaling_constants",
    "regime_offset",
    "hop_transform_ratio",
    "TiltedStepLaw",
    "RenewalMass",
    "build_step_law",
    "sample_step",
    "sample_steps",
    "renewal_mass",
    "partition_identity_check",
    "EndpointLaw",
    "SandwichResult",
    "log_partition",
    "log_partition_constrained",
    "log_partition_constrained_profile",
    "log_partition_bruteforce",
    "sandwich_check",
    "contact_fraction",
    "endpoint_law",
    "ContactSkeleton",
    "FreeSampler",
    "ConstrainedSampler",
    "sample_free",
    "sample_constrained",
    "no_contact_endpoint",
    "skeleton_statistics",
    "write_skeletons",
    "read_skeletons",
]
