"""Sequential evidence: e-process construction, validity checks and stopping boundaries."""
from .core import (
    Alphabet,
    Distribution,
    EvidenceProcess,
    FunctionKernel,
    IIDKernel,
    PredictiveKernel,
    SamplePath,
    bernoulli,
    kl_divergence,
    log_score,
    weight_of_evidence,
)
from .eprocess import (
    DiscretePrior,
    bayes_factor_process,
    lr_process,
    ml_plugin_process,
    prequential_process,
    scoring_rule_process,
)
from .algebra import convex_mix, pointwise_max, scale, stitch, stop, validity_check

__version__ = "0.1.0"
