"""Exception hierarchy.

Every protocol failure carries a short ``kind`` string. The simulator writes
``rejected:<kind>`` into transcripts, so scenario oracles can match on it.
"""


class ChainPassError(Exception):
    kind = "error"


class InvalidArgument(ChainPassError, ValueError):
    kind = "invalid-argument"


class IndexOutOfRange(ChainPassError, ValueError):
    kind = "index-out-of-range"


class AuthenticationFailure(ChainPassError):
    kind = "authentication-failure"


class CorruptEnvelope(ChainPassError):
    kind = "corrupt-envelope"


# wire codec
class UnsupportedFrame(ChainPassError):
    kind = "unsupported-frame"


class UnknownKind(ChainPassError):
    kind = "unknown-kind"


class MalformedFrame(ChainPassError):
    kind = "malformed-frame"


# agent state machines
class AlreadyRegistered(ChainPassError):
    kind = "already-registered"


class ProtocolOrderViolation(ChainPassError):
    kind = "protocol-order-violation"


class UnknownServer(ChainPassError):
    kind = "unknown-server"


class UnknownAccount(ChainPassError):
    kind = "unknown-account"


class ChainExhausted(ChainPassError):
    kind = "chain-exhausted"


class RecoveryRequired(ChainPassError):
    kind = "recovery-required"


class SpoofedSource(ChainPassError):
    kind = "spoofed-source"


class StaleRegistration(ChainPassError):
    kind = "stale-registration"


class NonceMismatch(ChainPassError):
    kind = "nonce-mismatch"


class NoChallenge(ChainPassError):
    kind = "no-challenge"


class CredentialMismatch(ChainPassError):
    kind = "credential-mismatch"


class UnknownSubscriber(ChainPassError):
    kind = "unknown-subscriber"


class SimDisabled(ChainPassError):
    kind = "sim-disabled"


# persistence / harness
class StoreIOError(ChainPassError, OSError):
    kind = "io-error"


class CorruptStore(ChainPassError):
    kind = "corrupt-store"


class RunawayScenario(ChainPassError):
    kind = "runaway-scenario"


class ConfigError(ChainPassError):
    kind = "config-error"
