from enum import Enum


class Side(Enum):
    BUY = "B"
    SELL = "S"


class PatchDirection(Enum):
    BUY = "Buy"
    SELL = "Sell"
    NON_DIRECTIONAL = "NonDirectional"


class PatchVariable(Enum):
    T = "T"
    N_M = "N_m"
    V_M = "V_m"


class SignificanceMode(Enum):
    CLOSED_FORM = "closed-form"
    MONTE_CARLO = "monte-carlo"


class TStatisticForm(Enum):
    POOLED = "pooled"
    WELCH = "welch"


class ActivityMode(Enum):
    STRICT = "strict"
    PRORATED = "prorated"


class ActivityYears(Enum):
    EVERY = "every"
    ANY = "any"


class KPolicyKind(Enum):
    AUTO = "auto"
    FRACTION = "fraction"
    FIXED = "fixed"


class CIMethod(Enum):
    ASYMPTOTIC = "asymptotic"
    BOOTSTRAP = "bootstrap"


class AllometryEstimator(Enum):
    PCA2_G = "pca2-g"
    PCA3_G1 = "pca3-g1"
    PCA3_G2 = "pca3-g2"
    PCA3_G3 = "pca3-g3"


class AllometryMode(Enum):
    BIVARIATE = "bi"
    TRIVARIATE = "tri"


class Stage(Enum):
    SYNTH = "synth"
    INGEST = "ingest"
    SEGMENT = "segment"
    ANALYZE = "analyze"
    REPORT = "report"
