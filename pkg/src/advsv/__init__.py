"""Adversarial attacks on an end-to-end neural speaker verifier.

The library covers the full loop: synthetic corpus generation, log-Mel /
MFCC front ends, an LSTM verifier with exact input gradients, FGSM
crafting, Griffin-Lim waveform reconstruction, white-box and transfer
evaluation, and an ABX listening-test service.
"""

from .audio_io import (
    Corpus,
    SynthConfig,
    UtteranceRecord,
    Waveform,
    load_manifest,
    read_wav,
    save_corpus,
    synth_corpus,
    write_wav,
)
from .frontend import (
    FeatureKind,
    FeatureSequence,
    FilterbankMatrix,
    FrontendConfig,
    FrontendPipeline,
    Normalizer,
    Spectrogram,
    apply_normalizer,
    fit_normalizer,
    fit_pipeline,
    invert_normalizer,
    load_features,
    log_mel,
    mel_filterbank,
    mfcc,
    save_features,
    stft,
)
from .model import (
    ComputationTape,
    FeatureFingerprint,
    ModelParameters,
    TrainConfig,
    cosine_similarity,
    embed_utterance,
    forward_trial,
    init_parameters,
    input_gradient,
    load_model,
    loss,
    parameter_gradients,
    save_model,
    score,
    train,
)
from .reconstruction import (
    GriffinLimConfig,
    GriffinLimResult,
    griffin_lim,
    istft,
    mel_to_linear,
    reconstruct_utterance,
    spectral_convergence,
)
from .verification import (
    EnrollmentCache,
    EnrollmentSet,
    Metrics,
    TrialExample,
    TrialProtocol,
    TrialRecord,
    TrialSet,
    build_trials,
    enroll,
    evaluate,
    load_trials,
    materialize_trials,
    save_trials,
    trial_probability,
)
from .attack import (
    CROSS_FEATURE,
    CROSS_MODEL,
    DEFAULT_EPSILONS,
    AdversarialTrial,
    AttackConfig,
    AttackReport,
    epsilon_sweep,
    fgsm,
    model_id,
    transfer_attack,
    white_box_attack,
)

__version__ = "0.1.0"
