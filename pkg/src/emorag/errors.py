"""Exception hierarchy shared by every layer of the engine."""


class EmoRagError(Exception):
    """Base class for all engine errors."""


class BackendError(EmoRagError):
    """A chat or embedding backend failed (transport, HTTP status, bad payload)."""


class AuthError(BackendError):
    """Credentials were rejected. Never retried."""


class BackendTimeoutError(BackendError, TimeoutError):
    """The backend did not answer within the configured timeout."""


class ParseError(EmoRagError, ValueError):
    """A model reply could not be turned into the expected structure."""


class DimensionError(EmoRagError, ValueError):
    """Vector length does not match the expected dimension."""


class FormatError(EmoRagError, ValueError):
    """A data file record is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateIdError(FormatError):
    """Two records share an id that must be unique."""


class UncachedVectorError(EmoRagError):
    """Retrieval needs vectors that have not been precomputed."""

    def __init__(self, fragment_ids):
        self.fragment_ids = list(fragment_ids)
        shown = ", ".join(self.fragment_ids[:10])
        more = "" if len(self.fragment_ids) <= 10 else f" (+{len(self.fragment_ids) - 10} more)"
        super().__init__(
            f"fragments without cached vectors: {shown}{more}; run `emorag precompute` first"
        )


class MissingVariableError(EmoRagError, KeyError):
    """Template rendering was given an incomplete variable map."""

    def __init__(self, names):
        self.names = sorted(names)
        super().__init__(self.names)

    def __str__(self):
        return f"missing template variables: {', '.join(self.names)}"


class MissingLabelError(EmoRagError, KeyError):
    """Metrics were requested for characters without ground-truth labels."""

    def __init__(self, characters):
        self.characters = sorted(characters)
        super().__init__(self.characters)

    def __str__(self):
        return f"no ground-truth label for: {', '.join(self.characters)}"


class UnknownCharacterError(EmoRagError, KeyError):
    def __init__(self, character_id):
        self.character_id = character_id
        super().__init__(character_id)

    def __str__(self):
        return f"unknown character: {self.character_id}"
