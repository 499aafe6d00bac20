"""Dephasing of gravitationally coupled two-level clocks under a classical
information channel: minimum rates, scaling laws, exact open-system dynamics
and the gravitational-redshift sector."""

__version__ = "0.1.0"

from .constants import (
    CONSTANTS,
    AngularFrequency,
    FrequencyConvention,
    PhysicalConstants,
    PositionMeasurementRate,
    Rate,
    apply_convention,
)
from .geometry import (
    ClockArray,
    ClockSpec,
    LatticeInfo,
    PairRateMatrix,
    build_lattice,
    pair_interaction_rate,
    pair_rate_matrix,
)
from .rates import (
    DephasingReport,
    MeasurementRates,
    OptimizeError,
    dephasing_given_rates,
    min_dephasing_global_A,
    min_dephasing_global_B,
    min_dephasing_pairwise_A,
    min_dephasing_pairwise_B,
    optimize_rates,
)
from .continuum import (
    ContinuumEstimate,
    ScalingFit,
    SweepPoint,
    compare_sum_vs_integral,
    continuum_sum,
    fit_scaling,
    kahan_sum,
    lattice_sum_exact,
    scaling_rate_sweep,
)
from .lindblad import (
    CoherenceTrace,
    DensityMatrix,
    EvolutionModel,
    NumericEvolution,
    build_model,
    coherence_decay_rate,
    dimensionless_model,
    evolve_exact,
    evolve_numeric,
    negativity,
    product_state_coherence,
    simulate_coherence,
    single_clock_coherences,
)
from .redshift import (
    CompositeBody,
    ExplicitAtoms,
    RedshiftDephasing,
    ShellShape,
    SimpleBody,
    bound_parameters,
    composite_dephasing,
    internal_measurement_rate,
    redshift_coupling,
    shell_dephasing,
    simple_particle_dephasing,
)
from .report import PaperReport, paper_report
from .scenarios import SCENARIO_SCHEMA, emit_plot_data, run_scenario, validate_scenario
