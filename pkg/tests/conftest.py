import numpy as np
import pytest

from advsv.frontend import FeatureKind, FeatureSequence
from advsv.model import FeatureFingerprint, init_parameters
from advsv.verification import EnrollmentSet, TrialExample


def random_features(rng, t_len=6, dim=5, kind=FeatureKind.LOG_MEL):
    return FeatureSequence(rng.normal(size=(t_len, dim)), kind, normalized=True)


def small_model(seed=0, hidden=8, dim=5, weight_scale=0.5, score_scale=1.0, score_bias=0.0):
    """A small non-saturated model for gradient and attack tests."""
    fingerprint = FeatureFingerprint(FeatureKind.LOG_MEL, dim, None)
    params = init_parameters(dim, hidden, fingerprint, seed=seed)
    params.w_input *= weight_scale
    params.w_recurrent *= weight_scale
    params.score_scale = score_scale
    params.score_bias = score_bias
    return params


def random_trial(rng, t_len=6, dim=5, n_enroll=3, label=1):
    test = random_features(rng, t_len, dim)
    enrollment = EnrollmentSet(
        "spk", tuple(random_features(rng, t_len, dim) for _ in range(n_enroll))
    )
    return TrialExample(test, enrollment, label)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
