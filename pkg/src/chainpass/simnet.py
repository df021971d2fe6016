"""Deterministic discrete-event network.

Agents are wrapped in nodes (see :mod:`chainpass.actors`) and exchange raw
wire frames over four channel kinds. Adversary policies can be attached to
any channel; what they may do depends on the channel's security:

=============  ===========  ===========================================
channel        adversary    notes
=============  ===========  ===========================================
sms            read/write   sender number is metadata and can be spoofed
secure_3g      drop/delay   confidential and authentic; never readable
kiosk_http     read/write   the whole kiosk is untrusted
local_link     read/write   phone <-> kiosk hop, no confidentiality
=============  ===========  ===========================================
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .errors import ChainPassError, ConfigError, RunawayScenario
from .wire import kind_name

DEFAULT_EVENT_BUDGET = 1_000_000


class Channel(str, Enum):
    SMS = "sms"
    SECURE_3G = "secure_3g"
    KIOSK_HTTP = "kiosk_http"
    LOCAL_LINK = "local_link"


ADVERSARY_READABLE = frozenset({Channel.SMS, Channel.KIOSK_HTTP, Channel.LOCAL_LINK})
HONEST = "honest"
ADVERSARY = "adversary"


@dataclass(frozen=True)
class Frame:
    id: int
    channel: Channel
    src: str
    dst: str
    data: bytes
    sender: str | None = None   # SMS sender number as claimed by the network
    sim: str | None = None      # SIM identity, secure_3g frames from phones only
    in_reply_to: int | None = None
    origin: str = HONEST

    @property
    def kind(self) -> str:
        return kind_name(self.data)


@dataclass(frozen=True)
class TranscriptEvent:
    tick: int
    channel: str
    src: str
    dst: str
    kind: str
    data: bytes | None
    outcome: str

    def line(self) -> str:
        hexdata = self.data.hex() if self.data is not None else "-"
        return f"{self.tick}  {self.channel}  {self.src}→{self.dst}  {self.kind}  {hexdata}  {self.outcome}"

    @property
    def accepted(self) -> bool:
        return self.outcome.startswith("accepted")

    @property
    def rejected(self) -> bool:
        return self.outcome.startswith("rejected")


@dataclass
class Transcript:
    seed: int
    events: list[TranscriptEvent] = field(default_factory=list)
    label: str = ""

    def header(self) -> str:
        extra = f" {self.label}" if self.label else ""
        return f"# chainpass transcript seed={self.seed}{extra}"

    def lines(self) -> list[str]:
        return [e.line() for e in self.events]

    def text(self) -> str:
        return "\n".join([self.header(), *self.lines()]) + "\n"

    def __len__(self):
        return len(self.events)


_ACTIONS = ("pass", "drop", "delay", "replay", "modify", "spoof_sender", "inject")
_3G_ACTIONS = ("pass", "drop", "delay")


@dataclass
class AdversaryPolicy:
    """One scripted action applied to matching frames on a tapped channel.

    ``kinds``/``src``/``dst`` narrow which frames match; ``limit`` caps how
    many frames the action is applied to (``None`` means every match).
    Parameters: ``ticks`` for delay/replay, ``edits`` as (offset, xor-mask)
    pairs for modify, ``number`` for spoof_sender, ``frame`` for inject.
    """

    action: str = "pass"
    kinds: frozenset[str] | None = None
    src: str | None = None
    dst: str | None = None
    limit: int | None = None
    ticks: int = 1
    edits: tuple[tuple[int, int], ...] = ()
    number: str | None = None
    frame: bytes | None = None
    applied: int = 0
    captured: list[Frame] = field(default_factory=list)

    def __post_init__(self):
        if self.action not in _ACTIONS:
            raise ConfigError(f"unknown adversary action {self.action!r}")
        if self.kinds is not None:
            self.kinds = frozenset(self.kinds)
        if self.action == "spoof_sender" and not self.number:
            raise ConfigError("spoof_sender needs a number")
        if self.action == "inject" and self.frame is None:
            raise ConfigError("inject needs a frame")
        if self.action in ("delay", "replay") and self.ticks < 1:
            raise ConfigError("ticks must be >= 1")

    def matches(self, frame: Frame) -> bool:
        if self.limit is not None and self.applied >= self.limit:
            return False
        if self.kinds is not None and frame.kind not in self.kinds:
            return False
        if self.src is not None and frame.src != self.src:
            return False
        return self.dst is None or frame.dst == self.dst

    def apply(self, net: Network, frame: Frame) -> list[tuple[int, Frame]]:
        """Return ``(delay, frame)`` deliveries replacing the original one."""
        self.applied += 1
        self.captured.append(frame)
        act = self.action
        if act == "pass":
            return [(1, frame)]
        if act == "drop":
            return []
        if act == "delay":
            return [(self.ticks, frame)]
        if act == "replay":
            return [(1, frame), (1 + self.ticks, net.copy_frame(frame, origin=ADVERSARY))]
        if act == "modify":
            data = bytearray(frame.data)
            for offset, mask in self.edits:
                if 0 <= offset < len(data):
                    data[offset] ^= mask
            return [(1, net.copy_frame(frame, data=bytes(data), origin=ADVERSARY))]
        if act == "spoof_sender":
            return [(1, net.copy_frame(frame, sender=self.number, origin=ADVERSARY))]
        # inject
        return [(1, frame), (1, net.copy_frame(frame, data=self.frame, origin=ADVERSARY))]


class Node:
    """Something attached to the network. ``receive`` returns an outcome string."""

    name = "node"

    def receive(self, net: Network, frame: Frame) -> str:  # pragma: no cover - interface
        raise NotImplementedError


class Network:
    def __init__(self, seed: int = 42, event_budget: int = DEFAULT_EVENT_BUDGET, label: str = ""):
        self.seed = seed
        self.rng = random.Random(seed)
        self.tick = 0
        self.event_budget = event_budget
        self.events_processed = 0
        self.nodes: dict[str, Node] = {}
        self.numbers: dict[str, str] = {}
        self.taps: dict[Channel, list[AdversaryPolicy]] = {c: [] for c in Channel}
        self.transcript = Transcript(seed, label=label)
        self.adversary_view: list[Frame] = []
        self.fates: dict[int, str] = {}
        self.arrivals: dict[int, int] = {}
        self._queue: list = []
        self._seq = 0
        self._frame_ids = 0

    # topology ---------------------------------------------------------

    def add_node(self, node: Node) -> Node:
        if node.name in self.nodes:
            raise ConfigError(f"duplicate node {node.name!r}")
        self.nodes[node.name] = node
        return node

    def bind_number(self, number: str, node_name: str) -> None:
        """Route SMS and server push traffic for ``number`` to ``node_name``."""
        self.numbers[number] = node_name

    def tap(self, channel, policy: AdversaryPolicy) -> None:
        channel = Channel(channel)
        if channel is Channel.SECURE_3G and policy.action not in _3G_ACTIONS:
            raise ConfigError(f"adversary cannot {policy.action} on secure_3g")
        self.taps[channel].append(policy)

    # sending ----------------------------------------------------------

    def _next_frame_id(self) -> int:
        self._frame_ids += 1
        return self._frame_ids

    def copy_frame(self, frame: Frame, **changes) -> Frame:
        return replace(frame, id=self._next_frame_id(), **changes)

    def send(self, channel, src: str, dst: str, data: bytes, *, sender: str | None = None,
             sim: str | None = None, in_reply_to: int | None = None,
             origin: str = HONEST) -> Frame:
        frame = Frame(self._next_frame_id(), Channel(channel), src, dst, bytes(data),
                      sender, sim, in_reply_to, origin)
        self._dispatch(frame)
        return frame

    def send_sms(self, src: str, to_number: str, data: bytes, sender: str,
                 origin: str = HONEST) -> Frame:
        dst = self.numbers.get(to_number, f"number:{to_number}")
        return self.send(Channel.SMS, src, dst, data, sender=sender, origin=origin)

    def _dispatch(self, frame: Frame) -> None:
        if frame.channel in ADVERSARY_READABLE:
            self.adversary_view.append(frame)
        deliveries = [(1, frame)]
        for policy in self.taps[frame.channel]:
            if policy.matches(frame):
                deliveries = policy.apply(self, frame)
                break
        if not deliveries:
            self.fates[frame.id] = "dropped"
            self._log(frame, "dropped")
        for delay, out in deliveries:
            if out.id != frame.id:
                self.fates[out.id] = "delivered"
            else:
                self.fates[frame.id] = "delivered" if delay == 1 else "delayed"
            self._push(self.tick + delay, ("frame", out))

    def _push(self, tick: int, event) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (tick, self._seq, event))

    def schedule(self, action: Callable[[Network], str], *, actor: str = "user",
                 target: str = "-", label: str = "action", delay: int = 0) -> None:
        """Queue a scripted action (user input, adversary move) at ``tick + delay``."""
        self._push(self.tick + delay, ("action", (action, actor, target, label)))

    # running ----------------------------------------------------------

    def _log(self, frame: Frame, outcome: str) -> None:
        if frame.origin == ADVERSARY and not outcome.endswith("origin=adversary"):
            outcome = f"{outcome} origin=adversary"
        self.transcript.events.append(TranscriptEvent(
            self.tick, frame.channel.value, frame.src, frame.dst, frame.kind, frame.data, outcome))

    def note(self, src: str, dst: str, kind: str, outcome: str) -> None:
        self.transcript.events.append(
            TranscriptEvent(self.tick, "-", src, dst, kind, None, outcome))

    def _deliver(self, frame: Frame) -> None:
        self.arrivals[frame.id] = self.arrivals.get(frame.id, 0) + 1
        node = self.nodes.get(frame.dst)
        if node is None:
            self._log(frame, "undeliverable")
            return
        try:
            outcome = node.receive(self, frame)
        except ChainPassError as exc:
            outcome = f"rejected:{exc.kind}"
        self._log(frame, outcome)

    def _run_action(self, payload) -> None:
        action, actor, target, label = payload
        try:
            outcome = action(self) or "ok"
        except ChainPassError as exc:
            outcome = f"rejected:{exc.kind}"
        self.note(actor, target, label, outcome)

    def run_until_idle(self) -> Transcript:
        while self._queue:
            if self.events_processed >= self.event_budget:
                raise RunawayScenario(f"event budget of {self.event_budget} exceeded")
            tick, _, (what, payload) = heapq.heappop(self._queue)
            self.tick = max(self.tick, tick)
            self.events_processed += 1
            if what == "frame":
                self._deliver(payload)
            else:
                self._run_action(payload)
        return self.transcript
