"""Shared exception types."""


class ChemchatError(Exception):
    """Base class for all library errors."""


class CorpusParseError(ChemchatError):
    """Corpus file could not be parsed; message carries an entry locator."""


class CorpusValidationError(ChemchatError):
    """Corpus content violates an invariant (duplicate title, empty abstract, ...)."""


class EmptyCorpusError(ChemchatError):
    """Operation requires a non-empty corpus."""


class InfeasibleSpecError(ChemchatError):
    """Synthetic corpus parameters cannot be satisfied."""


class EmptyQueryError(ChemchatError):
    """Query tokenized to nothing."""


class UnknownDocumentError(ChemchatError):
    """No document with the given title in the named database."""


class UnknownSectionError(ChemchatError):
    """Document has no section with the given name; message lists valid names."""


class UnknownAgencyError(ChemchatError):
    """Carcinogen filter names an agency outside the configured set."""


class ToolValidationError(ChemchatError):
    """Tool call arguments do not satisfy the tool's schema."""


class ScriptExhaustedError(ChemchatError):
    """Scripted backend has no next step."""


class ScriptExpectationError(ChemchatError):
    """Scripted step's expectation predicate rejected the incoming messages."""


class TransportError(ChemchatError):
    """Remote backend failed after exhausting retries."""


class MalformedResponseError(ChemchatError):
    """Remote backend returned a response we cannot interpret."""


class BudgetExceededError(ChemchatError):
    """Per-dialogue request cap hit."""
