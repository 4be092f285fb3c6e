"""Pseudo-spectral simulator and verification harness for nonlinear gauge
transformations in quantum mechanics: the unified logarithmic/diffusion-
current evolution family, the nonlinear gauge group, generalized
projection-valued measures, and mixture-decomposition consistency checks.
"""

from .field import (
    Grid,
    HydroFields,
    WaveFunction,
    hydro,
    inner,
    make_gaussian,
    make_plane_wave,
    norm,
    read_snapshot,
    write_snapshot,
)
from .functionals import DensityFloor, RValues, compute_R, kinetic_decomposition
from .gauge import (
    CauchyPower,
    GaugeTransform,
    apply,
    apply_local_unitary,
    c_prime,
    compose,
    invert,
    local_unitary,
    pure_gauge,
    pushforward_params,
)
from .evolution import (
    BlowUpError,
    Trajectory,
    UnifiedParams,
    conjugated_evolve,
    evolve,
    evolve_linear,
    linear_energy,
    params_from_BBM,
    params_from_DG,
    params_from_gauge,
    params_from_haag_bannier,
    params_from_linear,
    rhs_unified,
    step_linear,
    step_nonlinear,
)
from .observables import (
    BorelBin,
    GeneralizedPVM,
    GeneralizedProjection,
    LinearProjection,
    apply_generalized,
    equivalence_table_check,
    momentum_pvm,
    p_B,
    position_pvm,
    pvm_measure,
)
from .ensembles import (
    Ensemble,
    decomposition_divergence,
    default_observable_set,
    density_matrix,
    ensemble_expectation,
    equivalent_decompositions,
    random_smooth_state,
)
from .paths import ScalarPath

__version__ = "0.1.0"
