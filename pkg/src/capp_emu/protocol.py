"""Device side of the host/CAPP byte protocol.

The device is a clocked FSM. :meth:`Device.step` advances exactly one
micro-step (one clock cycle) and consumes at most one input byte. Command
bytes are only accepted in ``READY``; payload bytes only in ``RECEIVE``.
A byte offered in any other state is answered with ``NAK`` and dropped.

Decoding is combinational: the cycle that consumes an opcode also executes
the command's first micro-step. Cycle cost from opcode to ``ACK``, with the
host streaming payload bytes back to back (``B = word_bits // 8``):

=============================  ===========================================
``SET_TAGS`` ``CLEAR_TAGS``    1
``WRITE``                      1
``SEARCH`` ``SELECT_FIRST``    7  (assert, 5 x ``IDLE``, deassert)
``LOAD_COMPARAND/MASK``        1 + B  (decode, then one payload byte/cycle)
``READ``                       1 + B  (latch, then one byte per ``SEND``)
``STATUS``                     2  (latch, one ``SEND``)
=============================  ===========================================

Wire format: payload words are most significant byte first. ``READ`` and
``STATUS`` emit their payload followed by ``ACK``; everything else emits a
single ``ACK``. Unknown opcodes get a single ``NAK``.
"""

import enum
import logging
from dataclasses import dataclass

from capp_emu.core import CappState
from capp_emu.errors import TransportError

logger = logging.getLogger(__name__)

ACK = 0xAA
NAK = 0x55

CLOCK_HZ = 48_000_000
SEARCH_DELAY = 5


class Opcode(enum.IntEnum):
    SET_TAGS = 0x01
    LOAD_COMPARAND = 0x02
    LOAD_MASK = 0x03
    SEARCH = 0x04
    SELECT_FIRST = 0x05
    READ = 0x06
    WRITE = 0x07
    STATUS = 0x08
    CLEAR_TAGS = 0x09


class Phase(enum.Enum):
    READY = "READY"
    RECEIVE = "RECEIVE"
    SEARCH_1 = "SEARCH_1"
    IDLE = "IDLE"
    SEARCH_2 = "SEARCH_2"
    SELECT_1 = "SELECT_1"
    SELECT_2 = "SELECT_2"
    SEND = "SEND"
    WRITE_APPLY = "WRITE_APPLY"
    SET_PULSE = "SET_PULSE"
    CLEAR_PULSE = "CLEAR_PULSE"


@dataclass(frozen=True)
class FsmState:
    """Resting state of the FSM between two clock edges.

    ``countdown`` is the number of bytes still to receive (``RECEIVE``),
    delay cycles left (``IDLE``) or bytes left to send (``SEND``).
    """

    phase: Phase = Phase.READY
    countdown: int = 0
    target: str | None = None
    successor: Phase | None = None

    def __str__(self):
        parts = [self.phase.value]
        if self.target:
            parts.append(self.target)
        if self.phase in (Phase.RECEIVE, Phase.IDLE, Phase.SEND):
            parts.append(str(self.countdown))
        if self.successor:
            parts.append("->" + self.successor.value)
        return " ".join(parts)


READY = FsmState()

_INPUT_PHASES = (Phase.READY, Phase.RECEIVE)


def command_cycles(opcode: Opcode, word_bits: int) -> int:
    """Cycles from opcode consumption to ACK for back-to-back payload."""
    nbytes = word_bits // 8
    return {
        Opcode.SET_TAGS: 1,
        Opcode.CLEAR_TAGS: 1,
        Opcode.WRITE: 1,
        Opcode.SEARCH: 2 + SEARCH_DELAY,
        Opcode.SELECT_FIRST: 2 + SEARCH_DELAY,
        Opcode.LOAD_COMPARAND: 1 + nbytes,
        Opcode.LOAD_MASK: 1 + nbytes,
        Opcode.READ: 1 + nbytes,
        Opcode.STATUS: 2,
    }[Opcode(opcode)]


def cycles_to_us(cycles: int) -> float:
    return cycles * 1e6 / CLOCK_HZ


class Tracer:
    """Writes ``DIR hexbyte cycle`` lines (``DIR`` is ``RX`` or ``TX``)."""

    def __init__(self, stream):
        self.stream = stream

    def record(self, direction: str, data, cycle: int) -> None:
        for byte in data:
            self.stream.write(f"{direction} {byte:02X} {cycle}\n")


def parse_trace(text: str) -> list[tuple[str, int, int]]:
    entries = []
    for line in text.splitlines():
        if not line.strip():
            continue
        direction, byte, cycle = line.split()
        if direction not in ("RX", "TX"):
            raise ValueError(f"bad trace direction in {line!r}")
        entries.append((direction, int(byte, 16), int(cycle)))
    return entries


class Device:
    """A CAPP behind the byte-protocol FSM.

    ``last_phase`` is the micro-step executed on the most recent cycle,
    which is handy for cycle traces since decode-cycle phases such as
    ``SEARCH_1`` never rest in :attr:`fsm`.
    """

    def __init__(self, capp: CappState | None = None, tracer: Tracer | None = None):
        self.capp = capp if capp is not None else CappState()
        self.fsm = READY
        self.cycles = 0
        self.tracer = tracer
        self.last_phase = Phase.READY
        self.search_line = False
        self.select_line = False
        self._rx = bytearray()
        self._tx = bytearray()

    def __repr__(self):
        return f"Device(fsm={self.fsm}, cycles={self.cycles}, capp={self.capp!r})"

    @property
    def word_bytes(self) -> int:
        return self.capp.config.word_bytes

    @property
    def accepts_input(self) -> bool:
        return self.fsm.phase in _INPUT_PHASES

    @property
    def ready(self) -> bool:
        return self.fsm.phase is Phase.READY

    # -- clocking ------------------------------------------------------------

    def step(self, byte: int | None = None) -> bytes:
        """Advance one clock cycle, optionally presenting one input byte."""
        if byte is not None and not 0 <= byte <= 0xFF:
            raise ValueError(f"input must be a byte, got {byte!r}")
        self.cycles += 1
        out = bytearray()
        phase = self.fsm.phase
        if phase is Phase.READY:
            self.last_phase = Phase.READY
            if byte is not None:
                self._decode(byte, out)
        elif phase is Phase.RECEIVE:
            self.last_phase = Phase.RECEIVE
            if byte is not None:
                self._receive(byte, out)
        else:
            self._advance(out)
            if byte is not None:
                out.append(NAK)
        if self.tracer is not None:
            if byte is not None:
                self.tracer.record("RX", (byte,), self.cycles)
            self.tracer.record("TX", out, self.cycles)
        return bytes(out)

    def _decode(self, byte: int, out: bytearray) -> None:
        try:
            op = Opcode(byte)
        except ValueError:
            out.append(NAK)
            return
        capp = self.capp
        if op is Opcode.SET_TAGS:
            self.last_phase = Phase.SET_PULSE
            capp.set_all_tags()
            out.append(ACK)
        elif op is Opcode.CLEAR_TAGS:
            self.last_phase = Phase.CLEAR_PULSE
            capp.clear_all_tags()
            out.append(ACK)
        elif op is Opcode.WRITE:
            self.last_phase = Phase.WRITE_APPLY
            capp.write_parallel()
            out.append(ACK)
        elif op in (Opcode.LOAD_COMPARAND, Opcode.LOAD_MASK):
            target = "comparand" if op is Opcode.LOAD_COMPARAND else "mask"
            self._rx.clear()
            self.fsm = FsmState(Phase.RECEIVE, self.word_bytes, target=target)
        elif op is Opcode.SEARCH:
            self.last_phase = Phase.SEARCH_1
            self.search_line = True
            self.fsm = FsmState(Phase.IDLE, SEARCH_DELAY, successor=Phase.SEARCH_2)
        elif op is Opcode.SELECT_FIRST:
            self.last_phase = Phase.SELECT_1
            self.select_line = True
            self.fsm = FsmState(Phase.IDLE, SEARCH_DELAY, successor=Phase.SELECT_2)
        elif op is Opcode.READ:
            self._tx[:] = capp.read_or_bytes()
            self.fsm = FsmState(Phase.SEND, len(self._tx))
        elif op is Opcode.STATUS:
            self._tx[:] = bytes([1 if capp.any_tag() else 0])
            self.fsm = FsmState(Phase.SEND, 1)

    def _receive(self, byte: int, out: bytearray) -> None:
        self._rx.append(byte)
        left = self.fsm.countdown - 1
        if left:
            self.fsm = FsmState(Phase.RECEIVE, left, target=self.fsm.target)
            return
        word = bytes(self._rx)
        self._rx.clear()
        if self.fsm.target == "comparand":
            self.capp.load_comparand(word)
        else:
            self.capp.load_mask(word)
        self.fsm = READY
        out.append(ACK)

    def _advance(self, out: bytearray) -> None:
        fsm = self.fsm
        phase = fsm.phase
        self.last_phase = phase
        if phase is Phase.IDLE:
            left = fsm.countdown - 1
            if left:
                self.fsm = FsmState(Phase.IDLE, left, successor=fsm.successor)
            else:
                self.fsm = FsmState(fsm.successor)
        elif phase is Phase.SEARCH_2:
            self.capp.search_pulse()
            self.search_line = False
            self.fsm = READY
            out.append(ACK)
        elif phase is Phase.SELECT_2:
            self.capp.select_first()
            self.select_line = False
            self.fsm = READY
            out.append(ACK)
        elif phase is Phase.SEND:
            out.append(self._tx.pop(0))
            left = fsm.countdown - 1
            if left:
                self.fsm = FsmState(Phase.SEND, left)
            else:
                self.fsm = READY
                out.append(ACK)
        else:  # pragma: no cover - guarded by check_invariants
            raise AssertionError(f"FSM stuck in {fsm}")

    # -- batch helpers -------------------------------------------------------

    def drain(self) -> bytes:
        """Step without input until the FSM can accept a byte again."""
        out = bytearray()
        while not self.accepts_input:
            out += self.step()
        return bytes(out)

    def run_until_ready(self, data) -> bytes:
        """Feed ``data`` in order, clocking through busy states in between.

        Stops once every byte is consumed and the FSM is back to accepting
        input (``READY``, or ``RECEIVE`` if the stream ends mid-payload).
        """
        out = bytearray()
        for byte in data:
            while not self.accepts_input:
                out += self.step()
            out += self.step(byte)
        out += self.drain()
        return bytes(out)

    def check_invariants(self) -> None:
        """Raise AssertionError if the FSM or its buffers are inconsistent."""
        fsm, nbytes = self.fsm, self.word_bytes
        phase = fsm.phase
        if phase is Phase.READY:
            assert fsm.countdown == 0 and not self._rx and not self._tx, fsm
            assert not self.search_line and not self.select_line
        elif phase is Phase.RECEIVE:
            assert fsm.target in ("comparand", "mask"), fsm
            assert 1 <= fsm.countdown <= nbytes, fsm
            assert len(self._rx) == nbytes - fsm.countdown, fsm
        elif phase is Phase.IDLE:
            assert 1 <= fsm.countdown <= SEARCH_DELAY, fsm
            assert fsm.successor in (Phase.SEARCH_2, Phase.SELECT_2), fsm
        elif phase in (Phase.SEARCH_2, Phase.SELECT_2):
            assert fsm.countdown == 0, fsm
        elif phase is Phase.SEND:
            assert 1 <= fsm.countdown <= nbytes and len(self._tx) == fsm.countdown, fsm
        else:
            raise AssertionError(f"FSM rests in transient phase {fsm}")
        searching = phase is Phase.SEARCH_2 or fsm.successor is Phase.SEARCH_2
        selecting = phase is Phase.SELECT_2 or fsm.successor is Phase.SELECT_2
        assert self.search_line == searching and self.select_line == selecting, fsm
        capp = self.capp
        assert capp.cells.shape == (capp.config.num_cells, nbytes)
        assert capp.tags.shape == (capp.config.num_cells,)


def serve(device: Device, transport, chunk_size: int = 4096) -> Device:
    """Run ``device`` against ``transport`` until the peer closes.

    Bytes are processed as :meth:`Device.run_until_ready` would and the
    replies to each received chunk are written back before reading again.
    Transport failures are raised as :class:`TransportError`; the device
    keeps whatever state it reached.
    """
    while True:
        try:
            data = transport.recv(chunk_size)
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not data:
            logger.debug("transport closed after %d cycles", device.cycles)
            return device
        out = device.run_until_ready(data)
        if out:
            try:
                transport.send(out)
            except OSError as exc:
                raise TransportError(f"send failed: {exc}") from exc
