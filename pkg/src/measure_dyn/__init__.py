"""Dynamics of weighted composition and Markov operators on spaces of measures."""

__version__ = "0.1.0"

from .composition import (  # noqa: E402
    CertificateReport,
    CompactWindow,
    PreconditionError,
    WeightSystem,
    adjoint_S_star,
    adjoint_T_star,
    aperiodicity_escape,
    apply_S_iter,
    apply_T_iter,
    backward_weight_product,
    chaos_certificate,
    cosine_adjoint,
    cosine_certificate,
    forward_weight_product,
    mixing_witness,
    paper_weight,
    periodic_point,
    transitivity_certificate,
    weight_from_preset,
)
from .markov import (  # noqa: E402
    ContractionCertificate,
    GridDomain,
    GridFunction,
    GridMeasure,
    KernelError,
    NormalizedKernel,
    NotCertifiedError,
    adjoint_apply,
    contraction_certificate,
    hilbert_dual_norm,
    invariant_measure,
    markov_apply,
    normalize_kernel,
    observed_contraction,
    paper_kernel,
    thompson_norm,
)
from .measures import (  # noqa: E402
    AtomicMeasure,
    InjectivityError,
    JordanParts,
    atomic,
    jordan_decompose,
    pushforward,
    restrict,
    tv_norm,
)
