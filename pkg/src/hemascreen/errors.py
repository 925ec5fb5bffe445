"""Exception types shared across the hemascreen pipeline."""


class HemascreenError(Exception):
    """Base class for all hemascreen errors."""


# --- dataset ingestion ---

class MalformedHeader(HemascreenError):
    """A header named by the column mapping is absent from the CSV."""


class MalformedRow(HemascreenError):
    """A row has an unparseable cell (as opposed to a missing one)."""

    def __init__(self, row_index: int, message: str):
        self.row_index = row_index
        super().__init__(f"row {row_index}: {message}")


class ConflictingAdmission(HemascreenError):
    """More than one admission flag is set on the same row."""

    def __init__(self, row_index: int, message: str = "more than one admission flag set"):
        self.row_index = row_index
        super().__init__(f"row {row_index}: {message}")


class DegenerateFeature(HemascreenError):
    """A feature column has zero spread and cannot be standardized."""


class EmptyCohort(HemascreenError):
    """No records match the requested site filter."""


# --- statistics ---

class EmptySample(HemascreenError):
    """A rank-sum sample is empty."""


class SingleClassCohort(HemascreenError):
    """A cohort-level screen needs both outcome classes present."""


# --- resampling ---

class TooFewPerClass(HemascreenError):
    """Some class has fewer members than the requested fold count."""


class TooFewMinority(HemascreenError):
    """The minority class is too small to synthesize from (< 2 members)."""


class BadNeighborCount(HemascreenError):
    """k_neighbors outside [1, minority_size - 1]."""


# --- modeling ---

class SingleClass(HemascreenError):
    """Training labels contain a single class."""


class NonFinite(HemascreenError):
    """A non-finite value appeared during optimization."""


class ManifestMismatch(HemascreenError):
    """A record does not carry the features the model was trained on."""


class UnsupportedModel(HemascreenError):
    """The requested operation is not defined for this model family."""
