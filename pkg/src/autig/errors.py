"""Exception taxonomy shared across the package."""


class AutigError(Exception):
    """Base class for all protocol-level errors."""


class InvalidGamma(AutigError):
    """Fairness fraction outside (1/2, 1]."""


class InfeasibleParams(AutigError):
    """(n, f, gamma) violate the feasibility bound in strict mode."""


class NotEnoughOrders(AutigError):
    """Fewer admissible local orders than the batch quorum."""


class NotPruned(AutigError):
    """Reactivation requested for a transaction that is not soft-pruned."""


class InvalidKey(AutigError):
    """Key material rejected by the signature scheme."""


class ParseError(AutigError):
    """Malformed canonical encoding."""


class DigestMismatch(AutigError):
    """Fragment digest does not match the committed digest."""


class InvalidAnchorFragment(AutigError):
    """Anchor fragment failed verification during recovery."""


class NotEnoughReplies(AutigError):
    """Fewer admissible recovery replies than the quorum."""


class CannotAccuseAcceptedFragment(AutigError):
    """Order fault requested for a fragment that verifies cleanly."""


class ConfigError(AutigError):
    """Invalid scenario or CLI configuration."""


class SchemaMismatch(AutigError):
    """Metrics files do not share a column schema."""
