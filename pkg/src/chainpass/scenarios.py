"""Executable attack scenarios.

A :class:`World` wires one provider, one kiosk, any number of servers and
users onto a :class:`~chainpass.simnet.Network`. Scenarios script user and
adversary moves against it; a verdict is computed from the transcript plus
a few scenario-specific state checks.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import crypto, wire
from .actors import KIOSK, AdversaryNode, KioskNode, PhoneNode, ServerNode, TspNode, server_node_name
from .errors import ChainPassError, ConfigError
from .phone import PhoneAgent
from .server import ServerAgent, parse_store
from .simnet import ADVERSARY, AdversaryPolicy, Channel, Frame, Network, Node, TranscriptEvent
from .tsp import TspAgent

DEFAULT_SEED = 42
DEFAULT_CHAIN_LENGTH = 100

EXPECT_ALL_SUCCEED = "all_logins_succeed"
EXPECT_NEVER_AUTH = "attacker_never_authenticates"
EXPECT_REJECTED = "attack_rejected"


@dataclass
class User:
    user_id: str
    password: bytes
    number: str
    phone: PhoneNode
    sim_serial: int = 1


class World:
    def __init__(self, seed: int = DEFAULT_SEED, chain_length: int = DEFAULT_CHAIN_LENGTH,
                 constant_nonce: bool = False, label: str = "", event_budget: int | None = None):
        kwargs = {} if event_budget is None else {"event_budget": event_budget}
        self.net = Network(seed, label=label, **kwargs)
        self.chain_length = chain_length
        self.constant_nonce = constant_nonce
        self.tsp = TspAgent()
        self.net.add_node(TspNode(self.tsp))
        self.kiosk: KioskNode = self.net.add_node(KioskNode())
        self.servers: dict[str, ServerNode] = {}
        self.users: dict[str, User] = {}
        self.adversaries: set[str] = set()

    # roster -----------------------------------------------------------

    def add_server(self, server_id: str, number: str) -> ServerNode:
        agent = ServerAgent(server_id, number, self.chain_length,
                            constant_nonce=self.constant_nonce)
        node = self.net.add_node(ServerNode(agent))
        self.servers[server_id] = node
        self.tsp.known_servers.add(server_id)
        self.net.bind_number(number, node.name)
        return node

    def add_user(self, user_id: str, password: bytes | str, number: str) -> User:
        if isinstance(password, str):
            password = password.encode("utf-8")
        sim = f"sim:{user_id}:1"
        self.tsp.enroll(sim, number)
        phone = self._new_phone(f"phone:{user_id}", sim, password)
        user = User(user_id, password, number, phone)
        self.users[user_id] = user
        return user

    def _new_phone(self, name: str, sim: str, password: bytes) -> PhoneNode:
        # the prompt stands in for the user typing; the agent never keeps it
        node = PhoneNode(name, PhoneAgent(self.chain_length), sim, self.tsp,
                         lambda _server_id: password)
        self.net.add_node(node)
        self.net.bind_number(self.tsp.number_of(sim), name)
        return node

    def add_adversary(self, node: Node | None = None) -> Node:
        node = node or AdversaryNode()
        self.net.add_node(node)
        self.adversaries.add(node.name)
        return node

    # scripted steps; each runs the network until it is idle ------------

    def step(self, action: Callable[[Network], str], actor: str, target: str, label: str) -> str:
        self.net.schedule(action, actor=actor, target=target, label=label)
        start = len(self.net.transcript.events)
        self.net.run_until_idle()
        for event in self.net.transcript.events[start:]:
            if event.channel == "-" and event.src == actor and event.kind == label:
                return event.outcome
        return "ok"

    def register(self, user_id: str, server_id: str) -> str:
        phone = self.users[user_id].phone
        return self.step(lambda net: phone.start_registration(net, user_id, server_id),
                         user_id, phone.name, f"register:{server_id}")

    def login(self, user_id: str, server_id: str, site: str | None = None) -> bool:
        """Log in from the kiosk; True iff the phone accepted a success message."""
        phone = self.users[user_id].phone
        site = site or server_node_name(server_id)
        before = len(phone.login_results)
        self.step(lambda net: self.kiosk.open_login(net, user_id, site, phone.name),
                  user_id, KIOSK, f"login:{server_id}")
        return any(ok for ok, _ in phone.login_results[before:])

    def recover(self, user_id: str, server_id: str) -> str:
        phone = self.users[user_id].phone
        return self.step(lambda net: phone.start_recovery(net, user_id, server_id),
                         user_id, phone.name, f"recover:{server_id}")

    def lose_phone(self, user_id: str) -> PhoneNode:
        """Disable the user's SIM, reissue a card with the same number in a new phone."""
        user = self.users[user_id]
        old_sim = user.phone.sim
        user.sim_serial += 1
        new_sim = f"sim:{user_id}:{user.sim_serial}"
        self.tsp.reissue_sim(old_sim, new_sim)
        user.phone = self._new_phone(f"phone:{user_id}#{user.sim_serial}", new_sim,
                                     user.password)
        self.net.note(user_id, "tsp", "reissue-sim", "ok")
        return user.phone

    def server(self, server_id: str) -> ServerAgent:
        return self.servers[server_id].agent

    # transcript analysis ----------------------------------------------

    def attacker_acceptances(self) -> list[tuple[int, TranscriptEvent]]:
        hits = []
        for n, event in enumerate(self.net.transcript.events, start=1):
            if not event.accepted:
                continue
            owner = event.outcome.partition("session=")[2].split(" ")[0]
            if ("origin=adversary" in event.outcome or owner in self.adversaries
                    or event.src in self.adversaries):
                hits.append((n, event))
        return hits

    def rejections(self) -> list[tuple[int, TranscriptEvent]]:
        return [(n, e) for n, e in enumerate(self.net.transcript.events, start=1) if e.rejected]


def evidence_line(n: int, event: TranscriptEvent) -> str:
    hexdata = event.data.hex() if event.data is not None else "-"
    if len(hexdata) > 24:
        hexdata = hexdata[:24] + "..."
    return (f"line {n}: {event.tick} {event.channel} {event.src}→{event.dst} "
            f"{event.kind} {hexdata} {event.outcome}")


@dataclass
class Scenario:
    name: str
    description: str
    expectation: str
    script: Callable[[World], list[str]]
    chain_length: int | None = None
    source: str = "builtin"

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ConfigError(f"bad scenario name {self.name!r}")
        kind = self.expectation.partition(":")[0]
        if kind not in (EXPECT_ALL_SUCCEED, EXPECT_NEVER_AUTH, EXPECT_REJECTED):
            raise ConfigError(f"unknown expectation {self.expectation!r}")
        if kind == EXPECT_REJECTED and not self.expectation.partition(":")[2]:
            raise ConfigError("attack_rejected needs an error kind, e.g. attack_rejected:spoofed-source")


@dataclass
class Verdict:
    name: str
    passed: bool
    evidence: list[str]
    seed: int
    transcript: object = field(repr=False, default=None)
    world: World | None = field(repr=False, default=None)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        head = self.evidence[0] if self.evidence else ""
        return f"verdict {self.name} {status} seed={self.seed} {head}".rstrip()


def _judge(scenario: Scenario, world: World, failures: list[str]) -> tuple[bool, list[str]]:
    evidence = list(failures)
    kind, _, err = scenario.expectation.partition(":")
    attacks = world.attacker_acceptances()
    rejections = world.rejections()
    if kind == EXPECT_ALL_SUCCEED:
        evidence += [f"unexpected rejection {evidence_line(n, e)}" for n, e in rejections]
    else:
        evidence += [f"attacker accepted {evidence_line(n, e)}" for n, e in attacks]
        if kind == EXPECT_REJECTED:
            wanted = [(n, e) for n, e in rejections if e.outcome.startswith(f"rejected:{err}")]
            if not wanted:
                evidence.append(f"no rejected:{err} outcome in transcript")
    passed = not evidence
    if passed:
        if kind == EXPECT_ALL_SUCCEED:
            accepted = [(n, e) for n, e in enumerate(world.net.transcript.events, 1) if e.accepted]
            evidence = [f"{len(accepted)} acceptances, 0 rejections"]
            evidence += [evidence_line(n, e) for n, e in accepted[-1:]]
        else:
            evidence = [f"0 attacker acceptances, {len(rejections)} rejections"]
            evidence += [evidence_line(n, e) for n, e in rejections[:3]]
    elif not any(s.startswith("line ") or " line " in s for s in evidence):
        events = world.net.transcript.events
        if events:
            evidence.append(evidence_line(len(events), events[-1]))
    return passed, evidence


def run_scenario(scenario: Scenario, seed: int = DEFAULT_SEED, chain_length: int | None = None,
                 constant_nonce: bool = False) -> Verdict:
    """Run one scenario on a private network and judge the transcript."""
    n = scenario.chain_length or chain_length or DEFAULT_CHAIN_LENGTH
    world = World(seed, n, constant_nonce=constant_nonce,
                  label=f"chain_length={n} scenario={scenario.name}")
    try:
        failures = scenario.script(world) or []
    except ChainPassError as exc:
        failures = [f"scenario aborted: {exc.kind}: {exc}"]
    passed, evidence = _judge(scenario, world, failures)
    return Verdict(scenario.name, passed, evidence, seed, world.net.transcript, world)


# ---------------------------------------------------------------------------
# built-in scenarios

BANK, SHOP, MAIL = "bank.example", "shop.example", "mail.example"
SERVER_NUMBERS = {BANK: "15550000001", SHOP: "15550000002", MAIL: "15550000003"}
ALICE, ALICE_PASSWORD, ALICE_NUMBER = "alice", b"correct horse battery", "15551230001"
ATTACKER_NUMBER = "15559990000"


def _setup(world: World, *servers: str) -> User:
    for server_id in servers:
        world.add_server(server_id, SERVER_NUMBERS[server_id])
    user = world.add_user(ALICE, ALICE_PASSWORD, ALICE_NUMBER)
    for server_id in servers:
        world.register(ALICE, server_id)
    return user


def _expect(cond: bool, message: str, failures: list[str]) -> None:
    if not cond:
        failures.append(message)


def _honest_multi_server(world: World) -> list[str]:
    failures: list[str] = []
    _setup(world, BANK, SHOP, MAIL)
    accepted = 0
    for _ in range(5):
        for server_id in (BANK, SHOP, MAIL):
            accepted += world.login(ALICE, server_id)
    _expect(accepted == 15, f"{accepted}/15 logins accepted", failures)
    for server_id in (BANK, SHOP, MAIL):
        index = world.server(server_id).accounts[ALICE].next_index
        _expect(index == 5, f"{server_id} next_index={index}, expected 5", failures)
    return failures


def _adversary_login_request(world: World, adversary: str, server_id: str) -> None:
    frame = wire.encode(wire.LoginRequest(ALICE))
    world.step(lambda net: net.send(Channel.KIOSK_HTTP, adversary, server_node_name(server_id),
                                    frame, origin=ADVERSARY) and "ok",
               adversary, server_node_name(server_id), "request-challenge")


def _adversary_sms(world: World, adversary: str, server_id: str, data: bytes,
                   sender: str, label: str) -> str:
    number = SERVER_NUMBERS[server_id]
    start = len(world.net.transcript.events)
    world.step(lambda net: net.send_sms(adversary, number, data, sender, origin=ADVERSARY)
               and "ok", adversary, server_node_name(server_id), label)
    for event in world.net.transcript.events[start:]:
        if event.channel == Channel.SMS.value and event.src == adversary:
            return event.outcome
    return "missing"


def _replay(world: World) -> list[str]:
    failures: list[str] = []
    _setup(world, BANK)
    adversary = world.add_adversary().name
    bank = world.server(BANK)

    # 1. first login SMS is intercepted and withheld by the attacker
    intercept = AdversaryPolicy("drop", kinds={"LoginSms"}, limit=1)
    world.net.tap(Channel.SMS, intercept)
    _expect(not world.login(ALICE, BANK), "intercepted login unexpectedly succeeded", failures)
    withheld = intercept.captured[0].data

    # 2. attacker opens its own session and plays the withheld SMS into it
    _adversary_login_request(world, adversary, BANK)
    outcome = _adversary_sms(world, adversary, BANK, withheld, ALICE_NUMBER, "replay-withheld")
    _expect(outcome.startswith(("rejected:nonce-mismatch", "rejected:no-challenge")),
            f"withheld SMS replay outcome {outcome}", failures)

    # 3. honest login, then a byte-identical replay of the accepted SMS
    _expect(world.login(ALICE, BANK), "honest login failed", failures)
    accepted = [f for f in world.net.adversary_view if f.kind == "LoginSms"][-1].data
    outcome = _adversary_sms(world, adversary, BANK, accepted, ALICE_NUMBER, "replay-accepted")
    _expect(outcome.startswith(("rejected:nonce-mismatch", "rejected:no-challenge")),
            f"accepted SMS replay outcome {outcome}", failures)

    index = bank.accounts[ALICE].next_index
    _expect(index == 1, f"server next_index={index}, expected exactly one advance", failures)
    return failures


def _sms_spoof(world: World) -> list[str]:
    failures: list[str] = []
    _setup(world, BANK)
    bank_node = world.servers[BANK]
    bank_node.audit = True
    world.add_user("bob", b"bob's long-term password", "15551230002")

    # registration path: bob's registration SMS arrives with a forged sender
    world.net.tap(Channel.SMS, AdversaryPolicy("spoof_sender", kinds={"RegistrationSms"},
                                               number=ATTACKER_NUMBER, limit=1))
    world.register("bob", BANK)
    # login path: alice's login SMS arrives with a forged sender
    world.net.tap(Channel.SMS, AdversaryPolicy("spoof_sender", kinds={"LoginSms"},
                                               number=ATTACKER_NUMBER, limit=1))
    world.login(ALICE, BANK)

    spoofed = {frame.kind: (before, after) for frame, before, after in bank_node.audit_log
               if frame.sender == ATTACKER_NUMBER}
    for kind in ("RegistrationSms", "LoginSms"):
        _expect(kind in spoofed, f"no spoofed {kind} reached the server", failures)
        if kind in spoofed:
            before, after = spoofed[kind]
            _expect(before == after, f"server state changed by spoofed {kind}", failures)
    hits = [e for _, e in world.rejections() if e.outcome.startswith("rejected:spoofed-source")]
    _expect({e.kind for e in hits} >= {"RegistrationSms", "LoginSms"},
            "spoofed-source missing on registration or login path", failures)
    bank = world.server(BANK)
    _expect(bank.accounts["bob"].status.value == "pending", "bob's account left pending state",
            failures)
    _expect(bank.accounts[ALICE].next_index == 0, "alice's index moved", failures)
    return failures


class PhishingSite(Node):
    """Fake site: relays the real challenge to the victim's kiosk, swallows
    the login SMS, then answers the phone with a forged success digest."""

    def __init__(self, world: World, real_server: str, forgeries: list[Callable[[], bytes]],
                 name: str = "phish"):
        self.name = name
        self.world = world
        self.real = server_node_name(real_server)
        self.forgeries = list(forgeries)
        self.victim_site: str | None = None
        self.sent: list[bytes] = []

    def receive(self, net: Network, frame: Frame) -> str:
        message = wire.decode(frame.data)
        if isinstance(message, wire.LoginRequest) and frame.src == KIOSK:
            net.send(Channel.KIOSK_HTTP, self.name, self.real, frame.data, origin=ADVERSARY)
            return "relayed"
        if isinstance(message, wire.ServerChallenge) and frame.src == self.real:
            net.send(Channel.KIOSK_HTTP, self.name, KIOSK, frame.data, origin=ADVERSARY)
            if self.forgeries:
                forge = self.forgeries.pop(0)
                phone = self.world.users[ALICE].phone.name
                net.schedule(lambda n: self._push(n, phone, forge()), actor=self.name,
                             target=phone, label="forge-success", delay=3)
            return "relayed"
        return "ignored"

    def _push(self, net: Network, phone: str, digest: bytes) -> str:
        data = wire.encode(wire.LoginSuccess(digest))
        self.sent.append(digest)
        net.send(Channel.SECURE_3G, self.name, phone, data, origin=ADVERSARY)
        return "ok"


def _phishing_mitm(world: World) -> list[str]:
    failures: list[str] = []
    user = _setup(world, BANK)
    rng = world.net.rng
    captured_sms: list[bytes] = []

    def from_last_sms() -> bytes:
        # best the attacker can do with what it sees: hash the captured SMS
        return hashlib.sha256(captured_sms[-1] if captured_sms else b"").digest()

    forgeries = [
        lambda: rng.randbytes(32),
        from_last_sms,
        lambda: crypto.sha256(crypto.lp_concat(bytes(16), bytes(32))),
        lambda: crypto.success_digest(rng.randbytes(16),
                                      crypto.OneTimePassword(rng.randbytes(32), 0)),
    ]
    phish = PhishingSite(world, BANK, forgeries)
    world.add_adversary(phish)
    swallow = AdversaryPolicy("drop", kinds={"LoginSms"})
    world.net.tap(Channel.SMS, swallow)

    before = user.phone.agent.records[BANK].next_index
    for _ in range(len(forgeries)):
        world.login(ALICE, BANK, site=phish.name)
        captured_sms[:] = [f.data for f in swallow.captured]
    results = user.phone.login_results
    _expect(len(results) == len(forgeries),
            f"phone checked {len(results)} success messages, expected {len(forgeries)}", failures)
    _expect(not any(ok for ok, _ in results), "phone accepted a forged success digest", failures)
    after = user.phone.agent.records[BANK].next_index
    _expect(after == before, f"phone index moved {before} -> {after}", failures)
    _expect(world.server(BANK).accounts[ALICE].next_index == before,
            "server index moved during phishing", failures)
    return failures


def _keylogger_kiosk(world: World) -> list[str]:
    failures: list[str] = []
    user = _setup(world, BANK)
    for _ in range(3):
        _expect(world.login(ALICE, BANK), "honest kiosk login failed", failures)
    bank = world.server(BANK)
    adversary = world.add_adversary().name

    keylog = b"".join(world.kiosk.keylog)
    account = bank.accounts[ALICE]
    credential = crypto.derive_credential(user.password, BANK, account.seed)
    secrets = {"password": user.password, "credential": credential}
    for i in range(world.chain_length + 1):
        otp = crypto.otp_at_index(credential, world.chain_length, i)
        secrets[f"otp[{i}]"] = otp.digest
        secrets[f"otp-key[{i}]"] = otp.key
    leaked = sorted(name for name, value in secrets.items() if value in keylog)
    _expect(not leaked, f"kiosk log contains {', '.join(leaked)}", failures)

    # replay every logged frame at the server over http and as an SMS, and
    # every logged challenge back to the phone
    phone = user.phone.name
    for entry in list(world.kiosk.keylog):
        world.step(lambda net, d=entry: net.send(Channel.KIOSK_HTTP, adversary,
                                                 server_node_name(BANK), d,
                                                 origin=ADVERSARY) and "ok",
                   adversary, server_node_name(BANK), "replay-http")
        _adversary_sms(world, adversary, BANK, entry, ALICE_NUMBER, "replay-sms")
        if wire.kind_name(entry) == "ServerChallenge":
            world.step(lambda net, d=entry: net.send(Channel.LOCAL_LINK, adversary, phone, d,
                                                     origin=ADVERSARY) and "ok",
                       adversary, phone, "replay-challenge")
    # keys guessed from log contents
    _adversary_login_request(world, adversary, BANK)
    live = bank.challenges.get(ALICE)
    for entry in world.kiosk.keylog:
        key = (entry * 16)[:16]
        nonce = live.server_nonce if live else bytes(16)
        sms = wire.LoginSms(ALICE, crypto.seal(key, ALICE, crypto.lp_concat(bytes(16), nonce),
                                               world.net.rng))
        _adversary_sms(world, adversary, BANK, wire.encode(sms), ALICE_NUMBER, "guess-key")
    _expect(account.next_index == 3, f"server index {account.next_index}, expected 3", failures)
    return failures


PASSWORD_REUSE_ATTEMPTS = 10_000


def _password_reuse(world: World, attempts: int = PASSWORD_REUSE_ATTEMPTS) -> list[str]:
    failures: list[str] = []
    user = _setup(world, BANK, SHOP)
    for _ in range(3):
        world.login(ALICE, BANK)
        world.login(ALICE, SHOP)
    adversary = world.add_adversary().name
    shop = world.server(SHOP)
    shop_node = world.servers[SHOP]
    index_before = shop.accounts[ALICE].next_index

    # full compromise of the bank: its store plus every readable frame
    stolen = parse_store(world.server(BANK).store_text())[ALICE]
    c_a, seed_a = stolen.secret, stolen.seed
    n = world.chain_length
    keys = [crypto.otp_at_index(c_a, n, j).key for j in range(n + 1)]
    keys += [c_a[:16], c_a[16:], seed_a,
             crypto.sha256(crypto.lp_concat(c_a, SHOP.encode()))[:16],
             crypto.sha256(c_a + SHOP.encode())[:16],
             crypto.sha256(crypto.lp_concat(c_a, seed_a))[:16]]
    frames = [f.data for f in world.net.adversary_view if f.kind == "LoginSms"]
    rng = world.net.rng

    for attempt in range(attempts):
        if attempt % 100 == 0:
            _adversary_login_request(world, adversary, SHOP)
        live = shop.challenges.get(ALICE)
        nonce = live.server_nonce if live else rng.randbytes(16)
        mode = attempt % 3
        if mode == 0 or not frames:
            key = keys[attempt % len(keys)]
            payload = crypto.lp_concat(rng.randbytes(16), nonce)
            data = wire.encode(wire.LoginSms(ALICE, crypto.seal(key, ALICE, payload, rng)))
        elif mode == 1:
            data = frames[attempt % len(frames)]
        else:
            raw = bytearray(frames[attempt % len(frames)])
            pos = rng.randrange(3, len(raw))
            raw[pos] ^= 1 << rng.randrange(8)
            data = bytes(raw)
        world.net.send_sms(adversary, SERVER_NUMBERS[SHOP], data, ALICE_NUMBER, origin=ADVERSARY)
        world.net.run_until_idle()

    shop_hits = [e for _, e in world.attacker_acceptances() if e.dst == shop_node.name]
    _expect(not shop_hits, f"{len(shop_hits)} attacker acceptances at {SHOP}", failures)
    # every login the shop ever accepted must carry a MAC the honest phone sealed
    for event in world.net.transcript.events:
        if event.dst == shop_node.name and event.accepted and event.kind == "LoginSms":
            mac = wire.decode(event.data).envelope.mac
            _expect(mac in user.phone.sealed_macs, "shop accepted a non-honest envelope",
                    failures)
    index = shop.accounts[ALICE].next_index
    _expect(index == index_before, f"shop index moved {index_before} -> {index}", failures)
    return failures


def _phone_loss_recovery(world: World) -> list[str]:
    failures: list[str] = []
    _setup(world, BANK)
    for _ in range(3):
        _expect(world.login(ALICE, BANK), "pre-loss login failed", failures)
    last_before_loss = world.users[ALICE].phone.login_results[-1][1]
    new_phone = world.lose_phone(ALICE)
    world.recover(ALICE, BANK)
    bank = world.server(BANK)
    _expect(bank.accounts[ALICE].status.value == "active", "account not active after recovery",
            failures)
    _expect(world.login(ALICE, BANK), "post-recovery login failed", failures)
    used = new_phone.login_results[-1][1] if new_phone.login_results else None
    _expect(used == last_before_loss + 2,
            f"post-recovery login used index {used}, expected {last_before_loss + 2}", failures)
    return failures


def _chain_exhaustion(world: World) -> list[str]:
    failures: list[str] = []
    user = _setup(world, BANK)
    n = world.chain_length
    for _ in range(n - 1):
        _expect(world.login(ALICE, BANK), "login before reseed failed", failures)
    bank = world.server(BANK)
    old_seed = bank.accounts[ALICE].seed
    world.recover(ALICE, BANK)
    account = bank.accounts[ALICE]
    _expect(account.seed != old_seed, "recovery did not reseed", failures)
    _expect(user.phone.agent.records[BANK].seed == account.seed, "phone seed not updated",
            failures)
    after = sum(world.login(ALICE, BANK) for _ in range(n - 1))
    _expect(after == n - 1, f"{after}/{n - 1} logins after reseed", failures)
    return failures


BUILTINS = (
    Scenario("honest_multi_server", "one user, 3 servers, 5 logins each",
             EXPECT_ALL_SUCCEED, _honest_multi_server),
    Scenario("replay", "attacker replays withheld and accepted login SMS",
             "attack_rejected:nonce-mismatch", _replay),
    Scenario("sms_spoof", "forged sender on registration and login SMS",
             "attack_rejected:spoofed-source", _sms_spoof),
    Scenario("phishing_mitm", "fake site relays the challenge and forges success digests",
             EXPECT_NEVER_AUTH, _phishing_mitm),
    Scenario("keylogger_kiosk", "attacker logs and replays all kiosk traffic",
             EXPECT_NEVER_AUTH, _keylogger_kiosk),
    Scenario("password_reuse", "attacker owning server A's store targets server B",
             EXPECT_NEVER_AUTH, _password_reuse),
    Scenario("phone_loss_recovery", "SIM reissue, recovery, login resumes two indices on",
             EXPECT_ALL_SUCCEED, _phone_loss_recovery),
    Scenario("chain_exhaustion", "N-1 logins, reseed through recovery, logins continue",
             EXPECT_ALL_SUCCEED, _chain_exhaustion, chain_length=4),
)


# ---------------------------------------------------------------------------
# scenario files

_STEP_ARITY = {"register": 2, "login": 2, "recover": 2, "lose-phone": 1, "tap": 1}


def _parse_policy(section) -> tuple[Channel, AdversaryPolicy]:
    try:
        channel = Channel(section.get("channel", "sms"))
        kinds = section.get("kinds")
        edits = []
        for item in filter(None, (s.strip() for s in section.get("edits", "").split(","))):
            offset, _, mask = item.partition(":")
            edits.append((int(offset), int(mask, 16)))
        frame = section.get("frame")
        policy = AdversaryPolicy(
            action=section.get("action", "pass"),
            kinds=frozenset(k.strip() for k in kinds.split(",")) if kinds else None,
            src=section.get("src"), dst=section.get("dst"),
            limit=section.getint("limit"),
            ticks=section.getint("ticks", 1),
            edits=tuple(edits),
            number=section.get("number"),
            frame=bytes.fromhex(frame) if frame else None,
        )
    except ValueError as exc:
        raise ConfigError(f"[{section.name}]: {exc}") from None
    return channel, policy


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Build a scenario from the ``key = value`` file format (see README)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if not parser.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    head = parser["scenario"]
    name = head.get("name")
    if not name:
        raise ConfigError("scenario needs a name")
    try:
        chain_length = head.getint("chain_length")
    except ValueError:
        raise ConfigError("chain_length must be an integer") from None
    if chain_length is not None and chain_length < 2:
        raise ConfigError("chain_length must be >= 2")

    servers, users, taps = {}, {}, {}
    for section in parser.sections():
        kind, _, arg = section.partition(" ")
        body = parser[section]
        if kind == "server":
            if "number" not in body:
                raise ConfigError(f"[{section}] needs a number")
            servers[arg] = body["number"]
        elif kind == "user":
            if "password" not in body or "number" not in body:
                raise ConfigError(f"[{section}] needs password and number")
            users[arg] = (body["password"], body["number"])
        elif kind == "tap":
            taps[arg] = _parse_policy(body)
        elif section not in ("scenario", "steps"):
            raise ConfigError(f"unknown section [{section}]")

    steps = []
    if parser.has_section("steps"):
        try:
            ordered = sorted(parser["steps"].items(), key=lambda kv: int(kv[0]))
        except ValueError:
            raise ConfigError("step keys must be integers") from None
        for _, line in ordered:
            verb, *args = line.split()
            if _STEP_ARITY.get(verb) != len(args):
                raise ConfigError(f"bad step {line!r}")
            if verb == "tap" and args[0] not in taps:
                raise ConfigError(f"step references unknown tap {args[0]!r}")
            if verb != "tap" and args[0] not in users:
                raise ConfigError(f"step references unknown user {args[0]!r}")
            if len(args) == 2 and args[1] not in servers:
                raise ConfigError(f"step references unknown server {args[1]!r}")
            steps.append((verb, args))
    deferred = {args[0] for verb, args in steps if verb == "tap"}

    def script(world: World) -> list[str]:
        failures = []
        for server_id, number in servers.items():
            world.add_server(server_id, number)
        for user_id, (password, number) in users.items():
            world.add_user(user_id, password, number)
        for tap_name, (channel, policy) in taps.items():
            if tap_name not in deferred:
                world.net.tap(channel, policy)
        for verb, args in steps:
            if verb == "register":
                world.register(*args)
            elif verb == "login":
                ok = world.login(*args)
                if not ok and head.get("expectation") == EXPECT_ALL_SUCCEED:
                    failures.append(f"login {' '.join(args)} not accepted")
            elif verb == "recover":
                world.recover(*args)
            elif verb == "lose-phone":
                world.lose_phone(args[0])
            else:
                channel, policy = taps[args[0]]
                world.net.tap(channel, policy)
        return failures

    return Scenario(name, head.get("description", ""), head.get("expectation", EXPECT_NEVER_AUTH),
                    script, chain_length=chain_length, source=source)


class Catalog:
    """Built-in scenarios plus any loaded from files; names are unique."""

    def __init__(self, include_builtins: bool = True):
        self._scenarios: dict[str, Scenario] = {}
        if include_builtins:
            for scenario in BUILTINS:
                self.add(scenario)

    def add(self, scenario: Scenario) -> None:
        if scenario.name in self._scenarios:
            raise ConfigError(f"duplicate scenario name {scenario.name!r}")
        self._scenarios[scenario.name] = scenario

    def load_file(self, path) -> Scenario:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        scenario = parse_scenario(text, source=str(path))
        self.add(scenario)
        return scenario

    def get(self, name: str) -> Scenario:
        try:
            return self._scenarios[name]
        except KeyError:
            raise ConfigError(f"no scenario named {name!r}") from None

    def names(self) -> list[str]:
        return list(self._scenarios)

    def __len__(self):
        return len(self._scenarios)

    def __iter__(self):
        return iter(self._scenarios.values())


def list_scenarios(catalog: Catalog | None = None) -> list[str]:
    return (catalog or Catalog()).names()
