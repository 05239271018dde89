"""Nonparametric adaptive importance sampling by stochastic mirror descent."""

from .baselines import AISConfig, ais_run, geometric_schedule, rw_metropolis_step
from .kernels import Kernel, kernel_density, kernel_sample, scaled_density
from .logistic import (
    LabeledDataset,
    generate_waveform,
    load_dataset,
    logistic_posterior,
    posterior_predict,
    predictive_accuracy,
)
from .metrics import (
    WeightedSampleSet,
    clt_diagnostic,
    from_store,
    grid_distance,
    self_normalized_estimate,
    sliced_w2,
    w2_1d,
    weighted_quantile,
)
from .policy import DegenerateWeightsError, MixturePolicy, ParticleStore, SubsampledProposal
from .samplers import (
    PowerLaw,
    RunConfig,
    Schedule,
    ScheduleFamily,
    current_policy,
    midas_run,
    run_sampler,
    schedule_values,
    submidas_run,
    validate_schedule,
)
from .targets import (
    ExplorationDensity,
    TargetDensity,
    UnsupportedError,
    default_exploration,
    make_toy_target,
    reference_sample,
)

__version__ = "0.1.0"
