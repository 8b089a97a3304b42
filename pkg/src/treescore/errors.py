"""Exception hierarchy shared across the engine."""


class TreescoreError(Exception):
    """Base class for every error raised by this package."""


class ParseError(TreescoreError):
    """A data file line could not be parsed."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class InvariantError(TreescoreError):
    """A record violates a data-model invariant."""


class DuplicateIdError(InvariantError):
    pass


class WeightError(TreescoreError):
    """A weight vector violates the negotiation constraints."""


class MissingDimensionError(WeightError):
    pass


class NonNumericWeightError(WeightError):
    pass


class ScorerError(TreescoreError):
    """A leaf scorer failed; carries the leaf identity."""

    def __init__(self, leaf, message):
        self.leaf = leaf
        super().__init__(f"{getattr(leaf, 'value', leaf)}: {message}")


class ExtractionError(TreescoreError):
    """No usable score could be extracted from a judge response."""


class JudgeError(TreescoreError):
    """Judge transport or backend failure."""


class TransientJudgeError(JudgeError):
    """Retryable transport failure (timeouts, rate limits)."""


class CacheMissError(JudgeError):
    """Replay mode was asked for a request that is not in the cache."""


class AssetError(TreescoreError):
    """A prompt asset is missing or unreadable."""


class ConfigError(TreescoreError):
    pass


class CoverageError(TreescoreError):
    """Score/rating collections do not line up on the same samples."""


class DegenerateInputError(TreescoreError):
    """Statistic undefined for this input (zero variance, all ties, ...)."""
