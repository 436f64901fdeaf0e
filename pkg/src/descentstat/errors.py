"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """Malformed composition, descent set, permutation or query."""


class ResourceLimit(RuntimeError):
    """A request exceeds a configured size or budget cap."""


class InvalidModel(ValueError):
    """A model violates its preconditions (e.g. a negative density)."""
