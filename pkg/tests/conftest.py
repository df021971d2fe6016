import sys
import random

import pytest


@pytest.fixture
def rng():
    return random.Random(1234)

from chainpass import wire
from chainpass.phone import PhoneAgent
from chainpass.server import ServerAgent
from chainpass.tsp import TspAgent

PASSWORD = b"correct horse battery"
USER_PHONE = "15551230001"
BANK_PHONE = "15550000001"


class Trio:
    """Phone, provider and server wired together by direct calls."""

    def __init__(self, rng, chain_length=10, constant_nonce=False):
        self.rng = rng
        self.phone = PhoneAgent(chain_length)
        self.server = ServerAgent("bank.example", BANK_PHONE, chain_length,
                                  constant_nonce=constant_nonce)
        self.tsp = TspAgent(["bank.example"])
        self.tsp.enroll("sim-1", USER_PHONE)

    def register(self, password=PASSWORD):
        request = self.phone.begin_registration("alice", "bank.example")
        forward = self.tsp.forward_registration(request, "sim-1", self.rng)
        response = self.server.handle_tsp_registration(forward, self.rng)
        sms = self.phone.complete_registration(response, password, self.rng)
        self.server.handle_registration_sms(sms, USER_PHONE)
        return sms

    def login(self, password=PASSWORD, now=0):
        challenge = self.server.issue_challenge(wire.LoginRequest("alice"), self.rng, now=now)
        sms = self.phone.build_login_sms(challenge, password, self.rng)
        success = self.server.verify_login_sms(sms, USER_PHONE, now=now)
        return self.phone.verify_success(success)

    def recover(self, phone=None, password=PASSWORD, sim="sim-1"):
        phone = phone or self.phone
        request = phone.begin_recovery("alice", "bank.example")
        forward = self.tsp.forward_recovery(request, sim)
        response = self.server.handle_tsp_recovery(forward, self.rng)
        sms = phone.complete_recovery(response, password, self.rng)
        self.server.verify_recovery_sms(sms, USER_PHONE)
        return response


@pytest.fixture
def trio(rng):
    return Trio(rng)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.summary_line(number))
