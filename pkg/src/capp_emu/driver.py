"""Host-side driver for a served CAPP device.

:class:`Client` turns the byte protocol into blocking method calls and
builds the usual associative idioms (search, refine, multi-write, loading
into free slots, responder enumeration) out of them. The protocol carries
no geometry, so the client is told ``word_bits`` and ``num_cells``.
"""

import threading
from contextlib import contextmanager
from typing import NamedTuple

from capp_emu.core import CappConfig, CappState, word_to_bytes
from capp_emu.errors import ImageError, ProtocolError, TransportError, WidthError
from capp_emu.protocol import ACK, NAK, Device, Opcode, Tracer, serve
from capp_emu.transport import connect_tcp, loopback_pair, parse_address


class SearchQuery(NamedTuple):
    comparand: int
    mask: int = 0


class Client:
    def __init__(self, transport, word_bits: int = 32, num_cells: int = 32,
                 tracer: Tracer | None = None):
        self.transport = transport
        self.config = CappConfig(word_bits, num_cells)
        self.tracer = tracer
        self.last_status: bool | None = None
        self._seq = 0

    @classmethod
    def connect(cls, host: str, port: int, word_bits: int = 32, num_cells: int = 32,
                **kwargs) -> "Client":
        return cls(connect_tcp(host, port), word_bits, num_cells, **kwargs)

    def close(self) -> None:
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def all_ones(self) -> int:
        return self.config.all_ones

    # -- raw protocol ----------------------------------------------------------

    def _word(self, value) -> bytes:
        return word_to_bytes(value, self.config)

    def _send(self, data: bytes) -> None:
        try:
            self.transport.send(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc
        self._trace("TX", data)

    def _recv_exact(self, n: int, phase: str) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.transport.recv(n - len(buf))
            except OSError as exc:
                raise TransportError(f"receive failed: {exc}") from exc
            if not chunk:
                raise ProtocolError(
                    f"short read: expected {n} bytes, got {len(buf)}", phase)
            buf += chunk
        self._trace("RX", buf)
        return bytes(buf)

    def _trace(self, direction, data):
        if self.tracer is not None:
            self.tracer.record(direction, data, self._seq)

    def command(self, opcode: Opcode, payload: bytes = b"", reply: int = 0) -> bytes:
        """Send one command and return its reply payload (ACK stripped)."""
        phase = Opcode(opcode).name
        self._seq += 1
        self._send(bytes([opcode]) + payload)
        data = self._recv_exact(reply + 1, phase)
        if data[-1] != ACK:
            if reply == 0 and data[-1] == NAK:
                raise ProtocolError("device answered NAK", phase)
            raise ProtocolError(f"expected ACK, got {data[-1]:#04x}", phase)
        return data[:-1]

    def reset_tags(self) -> None:
        """Pulse the SET line: every cell becomes a responder."""
        self.command(Opcode.SET_TAGS)

    def clear_tags(self) -> None:
        self.command(Opcode.CLEAR_TAGS)

    def load_comparand(self, value: int) -> None:
        self.command(Opcode.LOAD_COMPARAND, self._word(value))

    def load_mask(self, mask: int) -> None:
        self.command(Opcode.LOAD_MASK, self._word(mask))

    def pulse_search(self) -> None:
        self.command(Opcode.SEARCH)

    def write(self) -> None:
        self.command(Opcode.WRITE)

    def select_first(self) -> None:
        self.command(Opcode.SELECT_FIRST)

    def read_word(self) -> int:
        """OR of every responder's word (0 with no responders)."""
        return int.from_bytes(self.command(Opcode.READ, reply=self.config.word_bytes), "big")

    def some_none(self) -> bool:
        status = self.command(Opcode.STATUS, reply=1)[0]
        self.last_status = bool(status & 1)
        return self.last_status

    # -- composite operations --------------------------------------------------

    def search(self, q: SearchQuery) -> None:
        """Reset tags, load comparand and mask, pulse search."""
        self.reset_tags()
        self.refine(q)

    def refine(self, q: SearchQuery) -> None:
        """Like :meth:`search` without the tag reset: intersects responders."""
        self.load_comparand(q.comparand)
        self.load_mask(q.mask)
        self.pulse_search()

    def multiwrite(self, value: int, field_mask: int = 0) -> None:
        """Write ``value`` into every responder at positions where ``field_mask`` is 0."""
        self.load_comparand(value)
        self.load_mask(field_mask)
        self.write()

    def fill(self, value: int) -> None:
        """Overwrite every cell with ``value``."""
        self.reset_tags()
        self.multiwrite(value, 0)

    def load_words(self, words, empty_pattern: int = 0) -> int:
        """Place ``words`` into free cells, lowest free index first.

        Free cells are those holding ``empty_pattern`` (see :meth:`fill`).
        Returns how many words were placed; stops early when memory is full.
        """
        words = list(words)
        for w in words:
            self._word(w)
            if w == empty_pattern:
                raise ValueError(f"word {w:#x} equals the empty pattern")
        free = SearchQuery(empty_pattern, 0)
        placed = 0
        for w in words:
            self.search(free)
            if not self.some_none():
                break
            self.select_first()
            self.multiwrite(w, 0)
            placed += 1
        return placed

    def enumerate_matches(self, q: SearchQuery, fresh_bit: int) -> list[int]:
        """Return the words of every cell matching ``q``, in cell order.

        Relies on a reserved bit: ``fresh_bit`` must be 1 in every cell that
        matches ``q`` and must be ignored by ``q.mask``. Each visited cell has
        that bit cleared while the walk runs; it is set again at the end, so
        memory is left unchanged. Tags, comparand and mask are clobbered.
        """
        if not 0 <= fresh_bit < self.config.word_bits:
            raise WidthError(f"fresh_bit {fresh_bit} outside the word")
        bit = 1 << fresh_bit
        if not q.mask & bit:
            raise ValueError("query mask must ignore the fresh bit")
        others = self.all_ones ^ bit
        fresh = SearchQuery(bit, others)
        found = []
        while True:
            self.search(q)
            self.refine(fresh)
            if not self.some_none():
                break
            self.select_first()
            found.append(self.read_word())
            self.multiwrite(0, others)
        self.search(q)
        self.multiwrite(bit, others)
        return found

    # -- whole-memory transfer over the wire ----------------------------------
    #
    # The protocol has no addresses. Loading relies on a sentinel value
    # absent from the image; dumping relabels every cell with a unique odd
    # token, walks the tokens in cell order, then reloads the recovered
    # image. Both leave tags cleared and comparand/mask zero.

    def _reset_registers(self) -> None:
        self.clear_tags()
        self.load_comparand(0)
        self.load_mask(0)

    def load_image(self, words) -> None:
        """Make cell k hold ``words[k]`` and every later cell hold 0."""
        words = [int(w) for w in words]
        for w in words:
            self._word(w)
        if len(words) > self.config.num_cells:
            raise ImageError(f"{len(words)} words do not fit {self.config.num_cells} cells")
        present = set(words)
        sentinel = next((v for v in range(self.all_ones + 1) if v not in present), None)
        if sentinel is None:  # pragma: no cover - needs num_cells >= 2**word_bits
            raise ImageError("every word value is in use; no sentinel available")
        blank = SearchQuery(sentinel, 0)
        self.fill(sentinel)
        for w in words:
            self.search(blank)
            self.select_first()
            self.multiwrite(w, 0)
        if len(words) < self.config.num_cells:
            self.search(blank)
            self.multiwrite(0, 0)
        self._reset_registers()

    def distinct_values(self) -> list[int]:
        """Every distinct word in memory, ascending, found by a prefix walk."""
        width = self.config.word_bits
        found = []
        stack = [(0, 0)]  # (prefix value, number of fixed top bits)
        while stack:
            prefix, fixed = stack.pop()
            if fixed == width:
                found.append(prefix)
                continue
            low = width - fixed - 1
            for bit in (1, 0):
                value = prefix | (bit << low)
                q = SearchQuery(value, (1 << low) - 1)
                self.search(q)
                if self.some_none():
                    stack.append((value, fixed + 1))
        return sorted(found)

    def dump_image(self) -> list[int]:
        """Read back every cell in index order; memory is restored afterwards."""
        n = self.config.num_cells
        values = self.distinct_values()
        taken = set(values)
        tokens = (t for t in range(1, self.all_ones + 1, 2) if t not in taken)
        token_value = {}
        for value in values:
            while True:
                self.search(SearchQuery(value, 0))
                if not self.some_none():
                    break
                token = next(tokens, None)
                if token is None:
                    raise ImageError(
                        "too many cells to dump over the wire at this word width")
                token_value[token] = value
                self.select_first()
                self.multiwrite(token, 0)
        odd = SearchQuery(1, self.all_ones ^ 1)
        image = []
        for _ in range(n):
            self.search(odd)
            self.select_first()
            image.append(token_value[self.read_word()])
            self.multiwrite(0, self.all_ones ^ 1)
        self.load_image(image)
        return image


class Embedded:
    """An in-process device served over a loopback channel on a worker thread.

    >>> with Embedded(CappConfig(8, 4)) as emb:
    ...     emb.client.some_none()
    False
    """

    def __init__(self, config: CappConfig | None = None, image=(), tracer=None):
        config = config if config is not None else CappConfig()
        capp = CappState(config)
        capp.load_cells(image)
        self.device = Device(capp, tracer=tracer)
        host_end, self._device_end = loopback_pair()
        self.client = Client(host_end, config.word_bits, config.num_cells)
        self.error = None
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self):
        try:
            serve(self.device, self._device_end)
        except TransportError as exc:
            self.error = exc
        finally:
            self._device_end.close()

    def close(self) -> None:
        self.client.close()
        self._thread.join(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@contextmanager
def open_client(config: CappConfig, connect: str | None = None, image=(), tracer=None):
    """Yield ``(client, device)``; ``device`` is None for a remote connection."""
    if connect is None:
        with Embedded(config, image=image, tracer=tracer) as emb:
            yield emb.client, emb.device
        return
    host, port = parse_address(connect)
    with Client.connect(host, port, config.word_bits, config.num_cells) as client:
        if image:
            client.load_image(image)
        yield client, None
