"""Bayesian estimation of qubit noise models from surface-code syndromes.

Likelihoods of syndrome outcomes are contracted exactly (or with a boundary
MPS of bond dimension ``chi``) from a planar tensor network; Metropolis-Hastings
and a bootstrap particle filter turn them into parameter estimates, and an
ML decoder built on the same network measures what the estimates are worth.
"""

from .config import ConfigError, RunConfig, load_config, parse_config
from .decoders import (
    LogicalChannelEstimate,
    MLDecoder,
    MWPMDecoder,
    RecoveryChoice,
    diamond_distance_to_identity,
    estimate_process_choi,
    ml_logical_recovery,
    mwpm_recovery,
    pure_error_lookup,
)
from .estimators import (
    ChainTrace,
    EstimationSeries,
    ParticleEnsemble,
    PriorBox,
    RandomWalkProposal,
    eap,
    effective_sample_size,
    rng_stream,
    run_mcmc,
    run_smc,
    systematic_resample,
)
from .likelihood import (
    LikelihoodEvaluator,
    conditional_logical_choi,
    likelihood,
    log_likelihood_batch,
    sample_syndrome,
    sample_syndromes,
)
from .noise_models import (
    KrausChannel,
    NoiseFamily,
    NoiseModel,
    NoiseSchedule,
    ParameterDomain,
    TimeVaryingNoise,
    make_channel,
)
from .surface_code import (
    PauliString,
    SurfaceCodeLayout,
    SyndromeBatch,
    SyndromeRecord,
    build_rotated_layout,
    read_syndrome_file,
    syndrome_of_error,
    write_syndrome_file,
)
from .tensor_core import ContractionError, Grid2DNetwork, contract_grid

__version__ = "0.1.0"
