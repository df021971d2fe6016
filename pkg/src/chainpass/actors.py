"""Network nodes wrapping the protocol agents.

Each node decodes inbound frames, calls its agent and sends the replies. All
randomness comes from ``net.rng`` so a run is reproducible from its seed.
"""

from __future__ import annotations

from typing import Callable

from . import wire
from .errors import ProtocolOrderViolation
from .phone import PhoneAgent
from .server import ServerAgent
from .simnet import Channel, Frame, Network, Node
from .tsp import TspAgent

TSP = "tsp"
KIOSK = "kiosk"


def server_node_name(server_id: str) -> str:
    return f"server:{server_id}"


def _unexpected(frame: Frame, message) -> ProtocolOrderViolation:
    return ProtocolOrderViolation(
        f"{type(message).__name__} not expected on {frame.channel.value}")


class PhoneNode(Node):
    """A handset holding one SIM. ``password_prompt(server_id)`` models the
    user typing the long-term password when the app asks for it."""

    def __init__(self, name: str, agent: PhoneAgent, sim: str, tsp: TspAgent,
                 password_prompt: Callable[[str], bytes]):
        self.name = name
        self.agent = agent
        self.sim = sim
        self.tsp = tsp
        self.password_prompt = password_prompt
        self.sealed_macs: set[bytes] = set()
        # (accepted, chain index) for every success message checked
        self.login_results: list[tuple[bool, int]] = []

    @property
    def number(self) -> str:
        return self.tsp.lookup(self.sim)

    def _sms(self, net: Network, to_number: str, message) -> None:
        self.sealed_macs.add(message.envelope.mac)
        net.send_sms(self.name, to_number, wire.encode(message), sender=self.number)

    # user-initiated operations
    def start_registration(self, net: Network, user_id: str, server_id: str) -> str:
        request = self.agent.begin_registration(user_id, server_id)
        net.send(Channel.SECURE_3G, self.name, TSP, wire.encode(request), sim=self.sim)
        return "ok"

    def start_recovery(self, net: Network, user_id: str, server_id: str) -> str:
        request = self.agent.begin_recovery(user_id, server_id)
        net.send(Channel.SECURE_3G, self.name, TSP, wire.encode(request), sim=self.sim)
        return "ok"

    def receive(self, net: Network, frame: Frame) -> str:
        message = wire.decode(frame.data)
        if frame.channel is Channel.SECURE_3G:
            if isinstance(message, wire.RegistrationResponse):
                sms = self.agent.complete_registration(
                    message, self.password_prompt(message.server_id), net.rng)
                self._sms(net, message.server_phone, sms)
                return "ok"
            if isinstance(message, wire.RecoveryResponse):
                sms = self.agent.complete_recovery(
                    message, self.password_prompt(message.server_id), net.rng)
                self._sms(net, message.server_phone, sms)
                return "ok"
            if isinstance(message, wire.LoginSuccess):
                pending = self.agent.pending_login
                ok = self.agent.verify_success(message)
                self.login_results.append((ok, pending.otp.index))
                return "accepted" if ok else "rejected:bad-success-digest"
        elif frame.channel is Channel.LOCAL_LINK and isinstance(message, wire.ServerChallenge):
            sms = self.agent.build_login_sms(message, self.password_prompt(message.server_id),
                                             net.rng)
            self._sms(net, self.agent.records[message.server_id].server_phone, sms)
            return "ok"
        raise _unexpected(frame, message)


class ServerNode(Node):
    def __init__(self, agent: ServerAgent):
        self.name = server_node_name(agent.server_id)
        self.agent = agent
        # which browser-side node asked for each user's live challenge
        self.session_owner: dict[str, str] = {}
        # when enabled: (frame, state before, state after) per inbound frame
        self.audit = False
        self.audit_log: list[tuple[Frame, str, str]] = []

    def receive(self, net: Network, frame: Frame) -> str:
        if not self.audit:
            return self._handle(net, frame)
        before = self.agent.state_fingerprint()
        try:
            return self._handle(net, frame)
        finally:
            self.audit_log.append((frame, before, self.agent.state_fingerprint()))

    def _handle(self, net: Network, frame: Frame) -> str:
        message = wire.decode(frame.data)
        agent = self.agent
        if frame.channel is Channel.SECURE_3G:
            if isinstance(message, wire.TspRegistrationForward):
                reply = agent.handle_tsp_registration(message, net.rng)
            elif isinstance(message, wire.TspRecoveryForward):
                reply = agent.handle_tsp_recovery(message, net.rng)
            else:
                raise _unexpected(frame, message)
            net.send(Channel.SECURE_3G, self.name, frame.src, wire.encode(reply),
                     in_reply_to=frame.id)
            return "ok"
        if frame.channel is Channel.KIOSK_HTTP and isinstance(message, wire.LoginRequest):
            challenge = agent.issue_challenge(message, net.rng, now=net.tick)
            self.session_owner[message.user_id] = frame.src
            net.send(Channel.KIOSK_HTTP, self.name, frame.src, wire.encode(challenge))
            return "ok"
        if frame.channel is Channel.SMS:
            if isinstance(message, wire.RegistrationSms):
                agent.handle_registration_sms(message, frame.sender)
                return "accepted"
            if isinstance(message, wire.LoginSms):
                success = agent.verify_login_sms(message, frame.sender, now=net.tick)
                owner = self.session_owner.pop(message.user_id, "-")
                phone = agent.accounts[message.user_id].user_phone
                net.send(Channel.SECURE_3G, self.name, net.numbers.get(phone, f"number:{phone}"),
                         wire.encode(success))
                return f"accepted session={owner}"
            if isinstance(message, wire.RecoverySms):
                agent.verify_recovery_sms(message, frame.sender)
                return "accepted"
        raise _unexpected(frame, message)


class TspNode(Node):
    name = TSP

    def __init__(self, agent: TspAgent):
        self.agent = agent
        # forwarded-frame id -> phone node awaiting the server's reply
        self._awaiting: dict[int, str] = {}

    def receive(self, net: Network, frame: Frame) -> str:
        if frame.channel is not Channel.SECURE_3G:
            raise ProtocolOrderViolation("provider only talks over secure_3g")
        message = wire.decode(frame.data)
        if isinstance(message, wire.RegistrationRequest):
            forward = self.agent.forward_registration(message, frame.sim, net.rng)
        elif isinstance(message, wire.RecoveryRequest):
            forward = self.agent.forward_recovery(message, frame.sim)
        elif isinstance(message, (wire.RegistrationResponse, wire.RecoveryResponse)):
            phone = self._awaiting.pop(frame.in_reply_to, None)
            if phone is None:
                raise ProtocolOrderViolation("reply to a request that was never forwarded")
            net.send(Channel.SECURE_3G, TSP, phone, frame.data)
            return "ok"
        else:
            raise _unexpected(frame, message)
        sent = net.send(Channel.SECURE_3G, TSP, server_node_name(message.server_id),
                        wire.encode(forward))
        self._awaiting[sent.id] = frame.src
        return "ok"


class KioskNode(Node):
    """Untrusted public browser. ``keylog`` holds every byte that entered or
    left it, which is exactly what a key logger on the kiosk could see."""

    name = KIOSK

    def __init__(self):
        self.keylog: list[bytes] = []
        self._phone_for_site: dict[str, str] = {}

    def open_login(self, net: Network, user_id: str, site: str, phone: str) -> str:
        typed = user_id.encode("utf-8")
        self.keylog.append(typed)
        self._phone_for_site[site] = phone
        request = wire.encode(wire.LoginRequest(user_id))
        self.keylog.append(request)
        net.send(Channel.KIOSK_HTTP, self.name, site, request)
        return "ok"

    def receive(self, net: Network, frame: Frame) -> str:
        self.keylog.append(frame.data)
        message = wire.decode(frame.data)
        if frame.channel is Channel.KIOSK_HTTP and isinstance(message, wire.ServerChallenge):
            phone = self._phone_for_site.get(frame.src)
            if phone is None:
                raise ProtocolOrderViolation("challenge from a site the user never opened")
            net.send(Channel.LOCAL_LINK, self.name, phone, frame.data)
            return "ok"
        raise _unexpected(frame, message)


class AdversaryNode(Node):
    """Attacker endpoint: keeps everything it receives; scenarios drive it."""

    def __init__(self, name: str = "adversary"):
        self.name = name
        self.inbox: list[Frame] = []

    def receive(self, net: Network, frame: Frame) -> str:
        self.inbox.append(frame)
        return "captured"
