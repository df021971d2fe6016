"""Two-factor login with SMS and hash-chain one-time passwords.

The long-term password never leaves the phone. Each login uses the next
element of a Lamport hash chain rooted at a per-server credential, and a
discrete-event simulator with a scriptable adversary checks the protocol
against replay, spoofing, phishing, key logging and password reuse.
"""

from .crypto import (
    Envelope, OneTimePassword, chain_step_verify, derive_credential, open_envelope,
    otp_at_index, seal, success_digest,
)
from .phone import DeviceRecord, PhoneAgent
from .scenarios import Catalog, Scenario, Verdict, World, list_scenarios, run_scenario
from .server import AccountRecord, ServerAgent
from .simnet import AdversaryPolicy, Channel, Network
from .tsp import TspAgent
from .wire import decode, encode

__version__ = "0.1.0"

__all__ = [
    "AccountRecord", "AdversaryPolicy", "Catalog", "Channel", "DeviceRecord", "Envelope",
    "Network", "OneTimePassword", "PhoneAgent", "Scenario", "ServerAgent", "TspAgent",
    "Verdict", "World", "chain_step_verify", "decode", "derive_credential", "encode",
    "list_scenarios", "open_envelope", "otp_at_index", "run_scenario", "seal",
    "success_digest",
]
