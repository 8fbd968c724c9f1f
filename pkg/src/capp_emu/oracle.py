"""Naive reference model of the CAPP.

Everything here is computed with explicit per-cell, per-bit loops over
plain Python ints and bools. It deliberately shares no bit manipulation with
:mod:`capp_emu.core` or :mod:`capp_emu.kernels`; it is the ground truth the
fast model is checked against.
"""

import random
from typing import NamedTuple

from capp_emu.driver import Client
from capp_emu.errors import ConfigError, ProtocolError, WidthError
from capp_emu.protocol import Opcode

OP_NAMES = (
    "set_all_tags",
    "clear_all_tags",
    "load_comparand",
    "load_mask",
    "search_pulse",
    "select_first",
    "read_or",
    "write_parallel",
    "read_tags",
    "any_tag",
)
_TAKES_WORD = {"load_comparand", "load_mask"}


class Op(NamedTuple):
    name: str
    arg: int | None = None

    def __str__(self):
        return self.name if self.arg is None else f"{self.name}({self.arg:#x})"


class OracleState:
    def __init__(self, width: int, num_cells: int, cells=None):
        if width < 1 or num_cells < 1:
            raise ConfigError("oracle geometry must be positive")
        self.width = width
        self.num_cells = num_cells
        self.cells = [0] * num_cells
        self.tags = [False] * num_cells
        self.comparand = 0
        self.mask = 0
        if cells is not None:
            cells = list(cells)
            if len(cells) > num_cells:
                raise WidthError("more initial cells than num_cells")
            for i, value in enumerate(cells):
                self._check(value)
                self.cells[i] = value

    def _check(self, value):
        if not isinstance(value, int) or value < 0 or value >= 2**self.width:
            raise WidthError(f"{value!r} is not a {self.width}-bit word")

    def _bit(self, value, j):
        return (value >> j) & 1

    def matches(self, i: int) -> bool:
        for j in range(self.width):
            if self._bit(self.mask, j) == 1:
                continue
            if self._bit(self.cells[i], j) != self._bit(self.comparand, j):
                return False
        return True

    def apply(self, op: Op):
        """Apply one abstract operation; return its observable output.

        ``read_or`` returns an int, ``any_tag`` a bool, ``read_tags`` a list of
        bools, every other operation ``None``.
        """
        name, arg = op
        if name not in OP_NAMES:
            raise ValueError(f"unknown operation {name!r}")
        if (name in _TAKES_WORD) != (arg is not None):
            raise ValueError(f"malformed operation {op!r}")

        if name == "set_all_tags":
            for i in range(self.num_cells):
                self.tags[i] = True
        elif name == "clear_all_tags":
            for i in range(self.num_cells):
                self.tags[i] = False
        elif name == "load_comparand":
            self._check(arg)
            self.comparand = arg
        elif name == "load_mask":
            self._check(arg)
            self.mask = arg
        elif name == "search_pulse":
            for i in range(self.num_cells):
                if self.tags[i] and not self.matches(i):
                    self.tags[i] = False
        elif name == "select_first":
            seen = False
            for i in range(self.num_cells):
                if self.tags[i]:
                    if seen:
                        self.tags[i] = False
                    seen = True
        elif name == "read_or":
            result = 0
            for j in range(self.width):
                for i in range(self.num_cells):
                    if self.tags[i] and self._bit(self.cells[i], j):
                        result |= 1 << j
                        break
            return result
        elif name == "write_parallel":
            for i in range(self.num_cells):
                if not self.tags[i]:
                    continue
                value = self.cells[i]
                for j in range(self.width):
                    if self._bit(self.mask, j) == 0:
                        if self._bit(self.comparand, j):
                            value |= 1 << j
                        else:
                            value &= ~(1 << j)
                self.cells[i] = value
        elif name == "read_tags":
            return list(self.tags)
        elif name == "any_tag":
            for t in self.tags:
                if t:
                    return True
            return False
        return None

    def responders(self) -> list[int]:
        return [i for i in range(self.num_cells) if self.tags[i]]


def equivalent(oracle: OracleState, state) -> bool:
    """True iff ``state`` (a CappState) holds exactly the oracle's contents."""
    config = state.config
    if config.word_bits != oracle.width or config.num_cells != oracle.num_cells:
        raise ConfigError(
            f"geometry mismatch: oracle {oracle.width}x{oracle.num_cells}, "
            f"state {config.word_bits}x{config.num_cells}"
        )
    nbytes = oracle.width // 8
    packed = b"".join(c.to_bytes(nbytes, "big") for c in oracle.cells)
    if packed != state.cells.tobytes():
        return False
    if oracle.tags != state.tags.tolist():
        return False
    return oracle.comparand == state.comparand and oracle.mask == state.mask


def apply_to_capp(state, op: Op):
    """Dispatch an abstract operation onto a CappState; return its output."""
    name, arg = op
    if name == "read_tags":
        return state.read_tags().tolist()
    method = getattr(state, name)
    return method(arg) if name in _TAKES_WORD else method()


def random_word(rng: random.Random, width: int, cells=()) -> int:
    """A word biased toward values that occur in ``cells`` or are sparse."""
    roll = rng.random()
    if cells and roll < 0.4:
        return rng.choice(cells)
    if roll < 0.55:
        return 0
    return rng.getrandbits(width)


def random_mask(rng: random.Random, width: int) -> int:
    roll = rng.random()
    if roll < 0.25:
        return 0
    if roll < 0.35:
        return 2**width - 1
    if roll < 0.7:
        mask = 0
        for _ in range(rng.randint(1, 3)):
            mask |= 1 << rng.randrange(width)
        return mask
    return rng.getrandbits(width)


def random_op(rng: random.Random, width: int, cells=()) -> Op:
    name = rng.choice(OP_NAMES)
    if name == "load_comparand":
        return Op(name, random_word(rng, width, cells))
    if name == "load_mask":
        return Op(name, random_mask(rng, width))
    return Op(name)


def random_program(rng: random.Random, width: int, num_cells: int, max_len: int = 100):
    """Random initial memory plus a random operation sequence of length 1..max_len."""
    distinct = [rng.getrandbits(width) for _ in range(rng.randint(1, 4))]
    memory = [rng.choice(distinct) if rng.random() < 0.7 else rng.getrandbits(width)
              for _ in range(num_cells)]
    ops = [random_op(rng, width, memory) for _ in range(rng.randint(1, max_len))]
    return memory, ops


class OracleClient(Client):
    """Driver front end whose "device" is an :class:`OracleState`.

    Only the raw command exchange is replaced, so every composite driver
    algorithm can be replayed against the reference model.
    """

    def __init__(self, oracle: OracleState):
        super().__init__(None, oracle.width, oracle.num_cells)
        self.oracle = oracle

    def close(self) -> None:
        pass

    def command(self, opcode, payload=b"", reply=0):
        try:
            code = Opcode(opcode)
        except ValueError:
            raise ProtocolError("device answered NAK", f"{opcode:#04x}") from None
        oracle = self.oracle
        if code is Opcode.READ:
            return oracle.apply(Op("read_or")).to_bytes(oracle.width // 8, "big")
        if code is Opcode.STATUS:
            return bytes([1 if oracle.apply(Op("any_tag")) else 0])
        name = _OPCODE_OPS[code]
        if name in _TAKES_WORD:
            oracle.apply(Op(name, int.from_bytes(payload, "big")))
        else:
            oracle.apply(Op(name))
        return b""


_OPCODE_OPS = {
    Opcode.SET_TAGS: "set_all_tags",
    Opcode.CLEAR_TAGS: "clear_all_tags",
    Opcode.LOAD_COMPARAND: "load_comparand",
    Opcode.LOAD_MASK: "load_mask",
    Opcode.SEARCH: "search_pulse",
    Opcode.SELECT_FIRST: "select_first",
    Opcode.WRITE: "write_parallel",
}
