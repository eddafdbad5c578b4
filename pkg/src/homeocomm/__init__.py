"""Commutator and power-word factorizations of homeomorphisms of R and S^1 x R."""

from .errors import (
    BandViolation,
    EndsMismatch,
    FiberMismatch,
    GraphViolation,
    HomeoError,
    InvalidSpec,
    NonFinite,
    NotLoxodromic,
    NotOrientationPreserving,
    NotProper,
    ToleranceExceeded,
)
from .maps import (
    Compose,
    CPoint,
    FiberBump,
    FiberKind,
    Identity,
    Inverse,
    MapExpr,
    MonotoneSmooth,
    Power,
    Twist,
    VerticalPL,
    apply,
    compose,
    evaluate,
    invert,
)
from .curves import GraphCurve, check_orientation, level_image, sup_distance
from .suited import (
    ArithmeticBands,
    LoxodromicCertificate,
    SuitedDecomposition,
    build_suited,
    certify_loxodromic,
)
from .factor import (
    FactorizationCertificate,
    assemble_g,
    build_straightener,
    build_vertical_shift,
    commutator_factorization,
    conjugation_report,
    conjugator,
    power_root_conjugate,
    power_word_decomposition,
    split_loxodromic,
)
from .serialize import SpecDocument, dump_certificate, dump_spec, load_certificate, load_spec
from .verify import VerificationReport, verify_dynamics, verify_identity, verify_suitedness

__version__ = "0.1.0"
