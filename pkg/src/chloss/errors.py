class DomainError(ValueError):
    """An input lies outside the domain an operation is defined on."""


class StaleCacheError(RuntimeError):
    """Backward pass requested with activations from an outdated forward pass."""


class IdxParseError(ValueError):
    pass


class BadMagicError(IdxParseError):
    pass


class TruncatedFileError(IdxParseError):
    pass


class CountMismatchError(IdxParseError):
    pass
