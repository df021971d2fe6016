"""Cryptographic primitives: credential derivation, the hash-chain OTPs and
the encrypt-then-MAC envelope (AES-128-CBC + HMAC-SHA1).

All functions are pure; randomness comes from an explicitly passed source
exposing ``randbytes(n)`` (``random.Random`` or ``secrets``-backed objects).
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import AuthenticationFailure, CorruptEnvelope, IndexOutOfRange, InvalidArgument

DIGEST_SIZE = 32
SEED_SIZE = 16
NONCE_SIZE = 16
KEY_SIZE = 16
IV_SIZE = 16
MAC_SIZE = 20
BLOCK_SIZE = 16
MAX_PASSWORD_SIZE = 64


def lp_concat(*fields: bytes) -> bytes:
    """Join fields as ``len(4, big-endian) || bytes`` records."""
    return b"".join(len(f).to_bytes(4, "big") + f for f in fields)


def lp_split(data: bytes, count: int) -> list[bytes]:
    """Inverse of :func:`lp_concat` for exactly ``count`` fields."""
    out = []
    pos = 0
    for _ in range(count):
        if pos + 4 > len(data):
            raise ValueError("truncated length prefix")
        n = int.from_bytes(data[pos:pos + 4], "big")
        pos += 4
        if pos + n > len(data):
            raise ValueError("truncated field")
        out.append(data[pos:pos + n])
        pos += n
    if pos != len(data):
        raise ValueError("trailing bytes")
    return out


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def random_bytes(rng, n: int) -> bytes:
    return rng.randbytes(n)


def _require_len(name: str, value: bytes, size: int) -> None:
    if not isinstance(value, (bytes, bytearray)) or len(value) != size:
        raise InvalidArgument(f"{name} must be {size} bytes")


@dataclass(frozen=True)
class OneTimePassword:
    digest: bytes
    index: int

    @property
    def key(self) -> bytes:
        """AES key for envelopes sealed under this OTP (first 16 digest bytes)."""
        return self.digest[:KEY_SIZE]


@dataclass(frozen=True)
class Envelope:
    ciphertext: bytes
    iv: bytes
    mac: bytes

    def __post_init__(self):
        ct = self.ciphertext
        if not ct or len(ct) % BLOCK_SIZE:
            raise InvalidArgument("ciphertext must be a positive multiple of 16 bytes")
        _require_len("iv", self.iv, IV_SIZE)
        _require_len("mac", self.mac, MAC_SIZE)


def derive_credential(password: bytes, server_id: str, seed: bytes) -> bytes:
    """Credential ``C = H(P_u || ID_s || seed)`` bound to one server and seed."""
    if not password or len(password) > MAX_PASSWORD_SIZE:
        raise InvalidArgument("password must be 1..64 bytes")
    if not server_id:
        raise InvalidArgument("server_id must be non-empty")
    _require_len("seed", seed, SEED_SIZE)
    return sha256(lp_concat(bytes(password), server_id.encode("utf-8"), bytes(seed)))


def otp_at_index(credential: bytes, chain_length: int, index: int) -> OneTimePassword:
    """Return the index-th one-time password: SHA-256 applied N - i times to C.

    Lower indices sit deeper in the chain, so they are used first; revealing
    OTP i never exposes OTP i+1.
    """
    _require_len("credential", credential, DIGEST_SIZE)
    if index < 0 or index > chain_length:
        raise IndexOutOfRange(f"index {index} outside [0, {chain_length}]")
    digest = bytes(credential)
    for _ in range(chain_length - index):
        digest = sha256(digest)
    return OneTimePassword(digest, index)


def chain_step_verify(candidate: OneTimePassword, predecessor_digest: bytes) -> bool:
    return hmac.compare_digest(sha256(candidate.digest), predecessor_digest)


def success_digest(device_nonce: bytes, otp: OneTimePassword) -> bytes:
    """Server's proof of knowing the OTP: ``H(n_d || delta_i)``."""
    return sha256(lp_concat(device_nonce, otp.digest))


def _mac(key: bytes, associated_id: str, ciphertext: bytes, iv: bytes) -> bytes:
    msg = lp_concat(associated_id.encode("utf-8"), ciphertext, iv)
    return hmac.new(key, msg, hashlib.sha1).digest()


def seal_with_iv(key: bytes, associated_id: str, plaintext: bytes, iv: bytes) -> Envelope:
    """Deterministic core of :func:`seal`; only tests should pick the IV."""
    _require_len("key", key, KEY_SIZE)
    _require_len("iv", iv, IV_SIZE)
    if not plaintext:
        raise InvalidArgument("plaintext must be non-empty")
    padder = padding.PKCS7(BLOCK_SIZE * 8).padder()
    padded = padder.update(plaintext) + padder.finalize()
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    ciphertext = enc.update(padded) + enc.finalize()
    return Envelope(ciphertext, iv, _mac(key, associated_id, ciphertext, iv))


def seal(key: bytes, associated_id: str, plaintext: bytes, rng) -> Envelope:
    """Encrypt-then-MAC ``plaintext`` under ``key`` with a fresh random IV.

    The MAC covers ``associated_id || ciphertext || iv`` so an envelope cannot
    be moved to another user's message.
    """
    _require_len("key", key, KEY_SIZE)
    return seal_with_iv(key, associated_id, plaintext, random_bytes(rng, IV_SIZE))


def open_envelope(key: bytes, associated_id: str, envelope: Envelope) -> bytes:
    """Verify the MAC, then decrypt. Raises before any plaintext is produced."""
    _require_len("key", key, KEY_SIZE)
    expected = _mac(key, associated_id, envelope.ciphertext, envelope.iv)
    if not hmac.compare_digest(expected, envelope.mac):
        raise AuthenticationFailure("envelope MAC mismatch")
    dec = Cipher(algorithms.AES(key), modes.CBC(envelope.iv)).decryptor()
    padded = dec.update(envelope.ciphertext) + dec.finalize()
    unpadder = padding.PKCS7(BLOCK_SIZE * 8).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError:
        raise CorruptEnvelope("bad padding") from None


RESEED_LABEL = b"chainpass-reseed"


def recovery_key(credential: bytes, chain_length: int, index: int,
                 seed: bytes, server_nonce: bytes) -> bytes:
    """Key for the recovery envelope at the index named by the server.

    Index 0 marks a fresh chain (either the account never logged in or the
    server just reseeded). The server cannot derive a chain key for a
    credential it has not seen yet, so that case is keyed by the seed and
    nonce, which only travel over the confidential provider channel.
    """
    if index == 0:
        return sha256(lp_concat(RESEED_LABEL, seed, server_nonce))[:KEY_SIZE]
    return otp_at_index(credential, chain_length, index).key
