"""Web-server side of the protocol: account registry, login challenges,
OTP verification by recomputing the chain from the stored credential, and
recovery (which also carries the reseed once a chain is nearly used up).
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass
from enum import Enum

from . import crypto
from .errors import (
    AlreadyRegistered, CorruptEnvelope, CorruptStore, CredentialMismatch,
    InvalidArgument, NoChallenge, NonceMismatch, ProtocolOrderViolation, RecoveryRequired,
    SpoofedSource, StaleRegistration, StoreIOError, UnknownAccount,
)
from .wire import (
    LoginRequest, LoginSms, LoginSuccess, RecoveryResponse, RecoverySms, RegistrationResponse,
    RegistrationSms, ServerChallenge, TspRecoveryForward, TspRegistrationForward, is_phone_number,
)

STORE_HEADER = "chainpass-store v1"
DEFAULT_CHALLENGE_TTL = 100
# nonce used by the deliberately weakened build (negative control only)
CONSTANT_NONCE = bytes(16)


class Status(str, Enum):
    PENDING = "pending"
    ACTIVE = "active"
    RECOVERING = "recovering"


@dataclass
class AccountRecord:
    user_id: str
    user_phone: str
    # credential C once active; the provider-issued K_sd while pending
    secret: bytes
    seed: bytes
    next_index: int
    chain_length: int
    status: Status


@dataclass(frozen=True)
class OutstandingChallenge:
    user_id: str
    server_nonce: bytes
    issued_at: int


@dataclass(frozen=True)
class OutstandingRecovery:
    server_nonce: bytes
    index: int
    seed: bytes
    reseed: bool


class ServerAgent:
    def __init__(self, server_id: str, server_phone: str, chain_length: int = 100,
                 challenge_ttl: int = DEFAULT_CHALLENGE_TTL, constant_nonce: bool = False):
        if chain_length < 2:
            raise InvalidArgument("chain_length must be >= 2")
        if not is_phone_number(server_phone):
            raise InvalidArgument(f"bad phone number {server_phone!r}")
        self.server_id = server_id
        self.server_phone = server_phone
        self.chain_length = chain_length
        self.challenge_ttl = challenge_ttl
        self.constant_nonce = constant_nonce
        self.accounts: dict[str, AccountRecord] = {}
        self.challenges: dict[str, OutstandingChallenge] = {}
        self.recoveries: dict[str, OutstandingRecovery] = {}

    def _account(self, user_id: str) -> AccountRecord:
        record = self.accounts.get(user_id)
        if record is None:
            raise UnknownAccount(f"no account {user_id!r}")
        return record

    # registration -----------------------------------------------------

    def handle_tsp_registration(self, forward: TspRegistrationForward, rng) -> RegistrationResponse:
        existing = self.accounts.get(forward.user_id)
        if existing is not None and existing.status is not Status.PENDING:
            raise AlreadyRegistered(f"{forward.user_id!r} already registered")
        seed = crypto.random_bytes(rng, crypto.SEED_SIZE)
        self.accounts[forward.user_id] = AccountRecord(
            forward.user_id, forward.user_phone, forward.session_key, seed, 0,
            self.chain_length, Status.PENDING)
        return RegistrationResponse(self.server_id, seed, self.server_phone, forward.session_key)

    def handle_registration_sms(self, sms: RegistrationSms, sender: str) -> None:
        record = self._account(sms.user_id)
        if record.status is not Status.PENDING:
            raise ProtocolOrderViolation("registration SMS for a non-pending account")
        if sender != record.user_phone:
            raise SpoofedSource(f"SMS from {sender}, expected {record.user_phone}")
        plaintext = crypto.open_envelope(record.secret, sms.user_id, sms.envelope)
        try:
            credential, seed = crypto.lp_split(plaintext, 2)
        except ValueError:
            raise CorruptEnvelope("registration payload malformed") from None
        if len(credential) != crypto.DIGEST_SIZE:
            raise CorruptEnvelope("credential must be 32 bytes")
        if not hmac.compare_digest(seed, record.seed):
            raise StaleRegistration("seed does not match the issued seed")
        record.secret = credential
        record.next_index = 0
        record.status = Status.ACTIVE

    # login ------------------------------------------------------------

    def issue_challenge(self, request: LoginRequest, rng, now: int = 0) -> ServerChallenge:
        record = self.accounts.get(request.user_id)
        if record is None or record.status is Status.PENDING:
            raise UnknownAccount(f"no active account {request.user_id!r}")
        if record.status is Status.RECOVERING or record.next_index >= record.chain_length:
            raise RecoveryRequired("account must complete recovery first")
        if self.constant_nonce:
            nonce = CONSTANT_NONCE
        else:
            nonce = crypto.random_bytes(rng, crypto.NONCE_SIZE)
        self.challenges[request.user_id] = OutstandingChallenge(request.user_id, nonce, now)
        return ServerChallenge(self.server_id, nonce)

    def _live_challenge(self, user_id: str, now: int) -> OutstandingChallenge:
        challenge = self.challenges.get(user_id)
        if challenge is None or now - challenge.issued_at > self.challenge_ttl:
            raise NoChallenge(f"no live challenge for {user_id!r}")
        return challenge

    def verify_login_sms(self, sms: LoginSms, sender: str, now: int = 0) -> LoginSuccess:
        """Accept a login SMS and return the success message, or raise.

        Any rejection leaves the account and the outstanding challenge as
        they were.
        """
        record = self._account(sms.user_id)
        if sender != record.user_phone:
            raise SpoofedSource(f"SMS from {sender}, expected {record.user_phone}")
        if record.status is not Status.ACTIVE:
            raise NoChallenge("account is not active")
        challenge = self._live_challenge(sms.user_id, now)
        if record.next_index >= record.chain_length:
            raise RecoveryRequired("hash chain used up")
        otp = crypto.otp_at_index(record.secret, record.chain_length, record.next_index)
        plaintext = crypto.open_envelope(otp.key, sms.user_id, sms.envelope)
        try:
            device_nonce, server_nonce = crypto.lp_split(plaintext, 2)
        except ValueError:
            raise CorruptEnvelope("login payload malformed") from None
        if not hmac.compare_digest(server_nonce, challenge.server_nonce):
            raise NonceMismatch("server nonce does not match the outstanding challenge")
        record.next_index += 1
        del self.challenges[sms.user_id]
        return LoginSuccess(crypto.success_digest(device_nonce, otp))

    # recovery ---------------------------------------------------------

    def handle_tsp_recovery(self, forward: TspRecoveryForward, rng) -> RecoveryResponse:
        record = self.accounts.get(forward.user_id)
        if record is None or record.status is Status.PENDING:
            raise UnknownAccount(f"no registered account {forward.user_id!r}")
        if forward.user_phone != record.user_phone:
            raise SpoofedSource("recovery requested from a different subscriber number")
        reseed = record.next_index >= record.chain_length - 1
        if reseed:
            seed, index = crypto.random_bytes(rng, crypto.SEED_SIZE), 0
        else:
            seed, index = record.seed, record.next_index
        nonce = crypto.random_bytes(rng, crypto.NONCE_SIZE)
        record.status = Status.RECOVERING
        self.challenges.pop(forward.user_id, None)
        self.recoveries[forward.user_id] = OutstandingRecovery(nonce, index, seed, reseed)
        return RecoveryResponse(self.server_id, seed, self.server_phone, index, nonce)

    def verify_recovery_sms(self, sms: RecoverySms, sender: str) -> None:
        record = self._account(sms.user_id)
        if sender != record.user_phone:
            raise SpoofedSource(f"SMS from {sender}, expected {record.user_phone}")
        pending = self.recoveries.get(sms.user_id)
        if record.status is not Status.RECOVERING or pending is None:
            raise NoChallenge(f"no recovery in progress for {sms.user_id!r}")
        key = crypto.recovery_key(record.secret, record.chain_length, pending.index,
                                  pending.seed, pending.server_nonce)
        plaintext = crypto.open_envelope(key, sms.user_id, sms.envelope)
        try:
            credential, server_nonce = crypto.lp_split(plaintext, 2)
        except ValueError:
            raise CorruptEnvelope("recovery payload malformed") from None
        if len(credential) != crypto.DIGEST_SIZE:
            raise CorruptEnvelope("credential must be 32 bytes")
        if not hmac.compare_digest(server_nonce, pending.server_nonce):
            raise NonceMismatch("server nonce does not match the recovery challenge")
        if not pending.reseed and not hmac.compare_digest(credential, record.secret):
            raise CredentialMismatch("recovered credential differs from the stored one")
        # reseed path: a new credential cannot be checked against anything stored
        record.secret = credential
        record.seed = pending.seed
        record.next_index = pending.index + 1
        record.status = Status.ACTIVE
        del self.recoveries[sms.user_id]

    # persistence ------------------------------------------------------

    def store_text(self) -> str:
        return dump_store(self.accounts.values())

    def state_fingerprint(self) -> str:
        """Accounts plus live challenges, for before/after comparisons."""
        live = sorted((u, c.server_nonce.hex(), c.issued_at) for u, c in self.challenges.items())
        rec = sorted((u, r.server_nonce.hex(), r.index, r.seed.hex(), r.reseed)
                     for u, r in self.recoveries.items())
        return f"{self.store_text()}{live!r}{rec!r}"

    def persist(self, store_path) -> None:
        text = self.store_text()
        try:
            with open(store_path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise StoreIOError(str(exc)) from exc

    def load(self, store_path) -> None:
        self.accounts = load_store(store_path)
        self.challenges.clear()
        self.recoveries.clear()


def dump_store(records) -> str:
    lines = [STORE_HEADER]
    for r in records:
        if any(c in r.user_id for c in "\t\n\r"):
            raise InvalidArgument("user_id cannot contain tabs or newlines")
        lines.append("\t".join([
            r.user_id, r.user_phone, r.secret.hex(), r.seed.hex(),
            str(r.next_index), str(r.chain_length), Status(r.status).value,
        ]))
    return "\n".join(lines) + "\n"


def parse_store(text: str) -> dict[str, AccountRecord]:
    if not text.endswith("\n"):
        raise CorruptStore("store does not end with a newline (truncated?)")
    lines = text[:-1].split("\n")
    if lines[0] != STORE_HEADER:
        raise CorruptStore("missing store header")
    accounts: dict[str, AccountRecord] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 7:
            raise CorruptStore(f"line {lineno}: expected 7 fields")
        user_id, phone, secret_hex, seed_hex, index, length, status = parts
        try:
            secret = bytes.fromhex(secret_hex)
            seed = bytes.fromhex(seed_hex)
            record = AccountRecord(user_id, phone, secret, seed, int(index), int(length),
                                   Status(status))
        except ValueError as exc:
            raise CorruptStore(f"line {lineno}: {exc}") from None
        want_secret = crypto.KEY_SIZE if record.status is Status.PENDING else crypto.DIGEST_SIZE
        if (not user_id or user_id in accounts or not is_phone_number(phone)
                or len(secret) != want_secret or len(seed) != crypto.SEED_SIZE
                or record.chain_length < 2
                or not 0 <= record.next_index <= record.chain_length
                or str(record.next_index) != index or str(record.chain_length) != length):
            raise CorruptStore(f"line {lineno}: invalid record")
        accounts[user_id] = record
    return accounts


def load_store(store_path) -> dict[str, AccountRecord]:
    try:
        with open(store_path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except UnicodeDecodeError:
        raise CorruptStore("store is not UTF-8") from None
    except OSError as exc:
        raise StoreIOError(str(exc)) from exc
    return parse_store(text)
