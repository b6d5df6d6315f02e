"""Arbitrary-precision evaluation and numerical verification of elliptic
hypergeometric identities on the root system A_n."""
from .catalog import (
    CATALOG,
    IDENTITY_NAMES,
    IdentityId,
    IdentityInstance,
    catalog_list,
    evaluate_sides,
    get_identity,
    resolve_constraint,
)
from .errors import (
    ConsistencyError,
    DomainError,
    EHSError,
    FrameError,
    SamplingError,
    SingularError,
)
from .harness import (
    SamplerConfig,
    Status,
    VerificationReport,
    fuzz_campaign,
    precision_escalation,
    sample_instance,
    verify_instance,
)
from .kernel import NomeFrame, PochSpec, delta_ratio, multi_poch, poch, theta, weyl_delta
from .series import (
    C3Params,
    KajiharaParams,
    box_indices,
    compositions,
    kajihara_sum,
)

__all__ = [
    "CATALOG", "IDENTITY_NAMES", "IdentityId", "IdentityInstance", "catalog_list",
    "evaluate_sides", "get_identity", "resolve_constraint",
    "ConsistencyError", "DomainError", "EHSError", "FrameError", "SamplingError",
    "SingularError",
    "SamplerConfig", "Status", "VerificationReport", "fuzz_campaign",
    "precision_escalation", "sample_instance", "verify_instance",
    "NomeFrame", "PochSpec", "delta_ratio", "multi_poch", "poch", "theta", "weyl_delta",
    "C3Params", "KajiharaParams", "box_indices", "compositions", "kajihara_sum",
]
__version__ = "0.1.0"
