"""Exception types shared across the pipeline.

Everything user-facing derives from PsmError so the CLI can map data
problems to a single exit code.
"""


class PsmError(Exception):
    """Base class for all pipeline errors."""


class InvalidParams(PsmError):
    """A parameter is outside its documented range."""


class MalformedRecord(PsmError):
    """An input line could not be parsed or validated."""

    def __init__(self, path, line_no, reason):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{self.path}:{line_no}: {reason}")


class MissingProfile(PsmError):
    """A tweet references a user with no profile record."""

    def __init__(self, user_id):
        self.user_id = user_id
        super().__init__(f"no profile for user {user_id!r}")


class EmptyDocument(PsmError):
    """A text operation needs at least one word."""


class EmptyCorpus(PsmError):
    """An operation needs at least one document."""


class NoTweets(PsmError):
    """Tweet-level features need at least one tweet."""


class SingleClass(PsmError):
    """A classifier needs both classes in its training labels."""


class NonFinite(PsmError):
    """Training produced or received non-finite values."""


class WidthMismatch(PsmError):
    """Feature vector width differs from the training width."""


class LayoutMismatch(PsmError):
    """A feature block does not match the fixed segment layout."""


class LengthMismatch(PsmError):
    """Two parallel sequences differ in length."""


class DegenerateVariance(PsmError):
    """Both samples have zero variance; the t statistic is undefined."""


class TooFewSamples(PsmError):
    """Not enough samples per class for the requested fold count."""


class ModelFormatError(PsmError):
    """A model artifact has a bad magic header or payload."""
