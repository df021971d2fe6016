"""Phone-side protocol state machine.

The phone keeps one :class:`DeviceRecord` per server. Neither the long-term
password nor the credential is ever stored: both are recomputed from the
password the user types for each operation and dropped afterwards.
"""

from __future__ import annotations

import copy
import hmac
import pickle
from dataclasses import dataclass

from . import crypto
from .errors import (
    AlreadyRegistered, ChainExhausted, InvalidArgument, ProtocolOrderViolation, UnknownServer,
)
from .wire import (
    LoginSms, LoginSuccess, RecoveryRequest, RecoveryResponse, RecoverySms,
    RegistrationRequest, RegistrationResponse, RegistrationSms, ServerChallenge,
)


@dataclass
class DeviceRecord:
    server_id: str
    server_phone: str
    seed: bytes
    next_index: int
    chain_length: int
    # account name at this server; used as the envelope's associated id
    user_id: str


@dataclass(frozen=True)
class PendingLogin:
    server_id: str
    server_nonce: bytes
    device_nonce: bytes
    otp: crypto.OneTimePassword


class PhoneAgent:
    """State machine for one handset.

    Calls must be serialized by the caller; the simulator guarantees this.
    """

    def __init__(self, chain_length: int = 100):
        if chain_length < 2:
            raise InvalidArgument("chain_length must be >= 2")
        self.chain_length = chain_length
        self.records: dict[str, DeviceRecord] = {}
        self.pending_login: PendingLogin | None = None
        self._pending_registration: dict[str, str] = {}
        self._pending_recovery: dict[str, str] = {}

    # registration -----------------------------------------------------

    def begin_registration(self, user_id: str, server_id: str) -> RegistrationRequest:
        if not user_id or not server_id:
            raise InvalidArgument("user_id and server_id must be non-empty")
        if server_id in self.records:
            raise AlreadyRegistered(f"already registered with {server_id}")
        self._pending_registration[server_id] = user_id
        return RegistrationRequest(user_id, server_id)

    def complete_registration(self, response: RegistrationResponse, password: bytes,
                              rng) -> RegistrationSms:
        user_id = self._pending_registration.get(response.server_id)
        if user_id is None:
            raise ProtocolOrderViolation(f"no registration pending for {response.server_id}")
        credential = crypto.derive_credential(password, response.server_id, response.seed)
        envelope = crypto.seal(response.session_key, user_id,
                               crypto.lp_concat(credential, response.seed), rng)
        del self._pending_registration[response.server_id]
        self.records[response.server_id] = DeviceRecord(
            response.server_id, response.server_phone, response.seed, 0,
            self.chain_length, user_id)
        return RegistrationSms(user_id, envelope)

    # login ------------------------------------------------------------

    def build_login_sms(self, challenge: ServerChallenge, password: bytes, rng) -> LoginSms:
        record = self.records.get(challenge.server_id)
        if record is None:
            raise UnknownServer(f"no record for {challenge.server_id}")
        if record.next_index >= record.chain_length:
            raise ChainExhausted("hash chain used up; run recovery")
        credential = crypto.derive_credential(password, record.server_id, record.seed)
        otp = crypto.otp_at_index(credential, record.chain_length, record.next_index)
        device_nonce = crypto.random_bytes(rng, crypto.NONCE_SIZE)
        envelope = crypto.seal(otp.key, record.user_id,
                               crypto.lp_concat(device_nonce, challenge.server_nonce), rng)
        self.pending_login = PendingLogin(record.server_id, challenge.server_nonce,
                                          device_nonce, otp)
        return LoginSms(record.user_id, envelope)

    def verify_success(self, message: LoginSuccess) -> bool:
        """Check the server's ``H(n_d || delta_i)``; advance the index only on a match."""
        pending = self.pending_login
        if pending is None:
            raise ProtocolOrderViolation("no login in progress")
        self.pending_login = None
        expected = crypto.success_digest(pending.device_nonce, pending.otp)
        if not hmac.compare_digest(expected, message.digest):
            return False
        self.records[pending.server_id].next_index += 1
        return True

    # recovery ---------------------------------------------------------

    def begin_recovery(self, user_id: str, server_id: str) -> RecoveryRequest:
        if not user_id or not server_id:
            raise InvalidArgument("user_id and server_id must be non-empty")
        self._pending_recovery[server_id] = user_id
        return RecoveryRequest(user_id, server_id)

    def complete_recovery(self, response: RecoveryResponse, password: bytes,
                          rng) -> RecoverySms:
        user_id = self._pending_recovery.get(response.server_id)
        if user_id is None:
            raise ProtocolOrderViolation(f"no recovery pending for {response.server_id}")
        if response.index >= self.chain_length:
            raise ChainExhausted("server offered an index past the chain end")
        credential = crypto.derive_credential(password, response.server_id, response.seed)
        key = crypto.recovery_key(credential, self.chain_length, response.index,
                                  response.seed, response.server_nonce)
        envelope = crypto.seal(key, user_id,
                               crypto.lp_concat(credential, response.server_nonce), rng)
        del self._pending_recovery[response.server_id]
        self._pending_registration.pop(response.server_id, None)
        if self.pending_login and self.pending_login.server_id == response.server_id:
            self.pending_login = None
        self.records[response.server_id] = DeviceRecord(
            response.server_id, response.server_phone, response.seed,
            response.index + 1, self.chain_length, user_id)
        return RecoverySms(user_id, envelope)

    def snapshot(self) -> bytes:
        """Serialized copy of all agent state, for secret-hygiene audits."""
        return pickle.dumps(copy.deepcopy(self.__dict__))
