"""Two-photon quantum polarimetry toolkit.

Simulates depolarizing polarization channels acting on entangled photon
pairs, realizes the correlation-tensor congruence K_out = M K_in M^T,
generates scattering channels by polarized Monte Carlo transport, and
reconstructs Mueller matrices (scalar, diagonal, general, and per-pixel
images) from two-photon data with identifiability diagnostics.
"""

from .channels import (
    KrausEnsemble,
    apply_one_photon,
    apply_two_photon_correlated,
    apply_two_photon_independent,
    compose,
    kraus_from_diagonal_mueller,
    mueller_from_kraus,
    mueller_maps_physical,
    normalize_mueller,
    propagate_tensor,
)
from .exceptions import (
    ChannelError,
    FormatError,
    NoTransmissionError,
    NotCompletelyPositiveError,
    QPolError,
    TomographyError,
    UnderdeterminedFitError,
    UnphysicalStateError,
)
from .fitting import (
    FitResult,
    PixelMap,
    StabilizerReport,
    fit_diagonal,
    fit_general,
    mueller_similarity,
    reconstruct_image,
    stabilizer_dimension,
)
from .metrics import (
    MetricsReport,
    concurrence,
    dephasing_strength,
    metrics_report,
    purity,
    purity_closed_form,
    purity_sensitivity,
    tensor_purity,
    von_neumann_entropy,
)
from .polarization import (
    PAULI,
    bell_state,
    check_density,
    correlation_tensor,
    degree_of_polarization,
    density_to_stokes,
    normalize_stokes,
    stokes_to_density,
    tensor_to_density,
)
from .scatter import (
    Medium,
    PathRecord,
    effective_thickness,
    mueller_vs_eta,
    sample_hg,
    simulate,
    trace_paths,
)
from .tomography import (
    ANALYZERS,
    SETTING_LABELS,
    CountRecord,
    analyzer_stokes,
    fidelity,
    reconstruct,
    simulate_counts,
)

__version__ = "0.1.0"
