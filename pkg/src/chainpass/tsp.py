"""Telecommunication service provider: maps SIMs to phone numbers, hands out
the registration key K_sd and forwards registration/recovery requests.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import crypto
from .errors import InvalidArgument, SimDisabled, UnknownServer, UnknownSubscriber
from .wire import (
    RecoveryRequest, RegistrationRequest, TspRecoveryForward, TspRegistrationForward,
    is_phone_number,
)


@dataclass
class SimEntry:
    number: str
    enabled: bool = True


class TspAgent:
    """SIM directory plus request forwarding.

    ``known_servers`` lists the server ids the provider can route to. The
    provider never keeps K_sd once a forward has been built.
    """

    def __init__(self, known_servers=()):
        self.sims: dict[str, SimEntry] = {}
        self.known_servers: set[str] = set(known_servers)

    def enroll(self, sim: str, number: str) -> None:
        if not is_phone_number(number):
            raise InvalidArgument(f"bad phone number {number!r}")
        if sim in self.sims:
            raise InvalidArgument(f"SIM {sim!r} already enrolled")
        self.sims[sim] = SimEntry(number)

    def lookup(self, sim: str) -> str:
        entry = self.sims.get(sim)
        if entry is None:
            raise UnknownSubscriber(f"unknown SIM {sim!r}")
        if not entry.enabled:
            raise SimDisabled(f"SIM {sim!r} is disabled")
        return entry.number

    def _route(self, server_id: str) -> None:
        if server_id not in self.known_servers:
            raise UnknownServer(f"no route to server {server_id!r}")

    def forward_registration(self, request: RegistrationRequest, sim: str,
                             rng) -> TspRegistrationForward:
        number = self.lookup(sim)
        self._route(request.server_id)
        session_key = crypto.random_bytes(rng, crypto.KEY_SIZE)
        return TspRegistrationForward(request.user_id, number, session_key)

    def forward_recovery(self, request: RecoveryRequest, sim: str) -> TspRecoveryForward:
        number = self.lookup(sim)
        self._route(request.server_id)
        return TspRecoveryForward(request.user_id, number)

    def disable_sim(self, sim: str) -> None:
        if sim not in self.sims:
            raise UnknownSubscriber(f"unknown SIM {sim!r}")
        self.sims[sim].enabled = False

    def reissue_sim(self, sim: str, new_sim: str) -> None:
        """Bind the number of ``sim`` to ``new_sim`` and disable every older card."""
        entry = self.sims.get(sim)
        if entry is None:
            raise UnknownSubscriber(f"unknown SIM {sim!r}")
        if new_sim in self.sims:
            raise InvalidArgument(f"SIM {new_sim!r} already enrolled")
        for other in self.sims.values():
            if other.number == entry.number:
                other.enabled = False
        self.sims[new_sim] = SimEntry(entry.number)

    def number_of(self, sim: str) -> str:
        entry = self.sims.get(sim)
        if entry is None:
            raise UnknownSubscriber(f"unknown SIM {sim!r}")
        return entry.number
