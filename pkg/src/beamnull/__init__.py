"""Online learning of interference-nulling analog combining beams.

A base station with an r-bit phase-shifter array learns, from power
measurements alone, a combining beam that keeps its gain on the target user
while shaping nulls toward non-cooperative interferers.  A signal-model
surrogate environment can stand in for most of the expensive measurements.
"""

from .agent import ActorCriticConfig, BeamAgent, LearningSession, ReplayBuffer, Transition, learn
from .arrays import (
    ArrayGeometry,
    PhaseCodebook,
    SidelobeSearch,
    array_response,
    beam_pattern,
    find_sidelobe_peaks,
    hpbw,
    make_codebook,
    quantize,
    to_combiner,
    wrap_phase,
)
from .channels import (
    Channel,
    ConfigError,
    PathComponent,
    Scenario,
    build_scenario,
    los_channel,
    multipath_channel,
    place_interferers,
)
from .environment import (
    ActualEnvironment,
    Metrics,
    PowerMeasurement,
    StepOutcome,
    analytic_sinr,
    estimate_sinr,
    full_metrics,
    measure_interference_plus_noise,
    measure_signal_plus_interference_plus_noise,
    step,
)
from .experiment import resolve_config, run_pipeline, summarize, sweep_surrogate
from .oracle import exhaustive_search
from .surrogate import (
    DensePredictor,
    QuadraticFormPredictor,
    SurrogateDataset,
    SwitchController,
    VirtualEnvironment,
    run_assisted_learning,
    train_surrogate,
    virtual_step,
)

__version__ = "0.1.0"
