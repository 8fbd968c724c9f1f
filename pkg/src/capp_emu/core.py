"""Register-transfer model of a Foster-style content addressable parallel processor.

A :class:`CappState` holds ``num_cells`` words of ``word_bits`` bits, one tag
bit per cell, a comparand register and a mask register. Mask bit 1 means
"ignore this position" for searches and "leave this position alone" for
parallel writes.

Words cross the API as non-negative Python ints (bit 0 = least significant)
or as big-endian ``bytes`` of exactly ``word_bits // 8`` bytes.
"""

from dataclasses import dataclass

import numpy as np

from capp_emu import kernels
from capp_emu.errors import ConfigError, WidthError

DEFAULT_WORD_BITS = 32
DEFAULT_NUM_CELLS = 32


@dataclass(frozen=True)
class CappConfig:
    word_bits: int = DEFAULT_WORD_BITS
    num_cells: int = DEFAULT_NUM_CELLS

    def __post_init__(self):
        for name in ("word_bits", "num_cells"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.word_bits < 1 or self.word_bits % 8:
            raise ConfigError(
                f"word_bits must be a positive multiple of 8, got {self.word_bits}"
            )
        if self.num_cells < 1:
            raise ConfigError(f"num_cells must be at least 1, got {self.num_cells}")

    @property
    def word_bytes(self) -> int:
        return self.word_bits // 8

    @property
    def all_ones(self) -> int:
        return (1 << self.word_bits) - 1


def word_to_bytes(value, config: CappConfig) -> bytes:
    """Validate ``value`` against ``config`` and return its big-endian bytes."""
    if isinstance(value, (bytes, bytearray, memoryview)):
        raw = bytes(value)
        if len(raw) != config.word_bytes:
            raise WidthError(
                f"expected {config.word_bytes} bytes for a {config.word_bits}-bit word, "
                f"got {len(raw)}"
            )
        return raw
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise WidthError(f"word must be an int or bytes, got {type(value).__name__}")
    value = int(value)
    if value < 0 or value > config.all_ones:
        raise WidthError(f"{value:#x} does not fit in {config.word_bits} bits")
    return value.to_bytes(config.word_bytes, "big")


def format_tags(tags) -> str:
    """Render a tag vector as ``"0110"``, cell 0 first."""
    return "".join("1" if t else "0" for t in tags)


def parse_tags(text: str) -> np.ndarray:
    if set(text) - {"0", "1"}:
        raise WidthError(f"tag string may only contain 0 and 1: {text!r}")
    return np.array([c == "1" for c in text], dtype=bool)


class CappState:
    """Cells, tags, comparand and mask of one CAPP.

    All mutators work in place. The underlying numpy arrays are exposed as
    ``cells`` and ``tags`` for inspection; write through the methods.
    """

    def __init__(self, config: CappConfig | None = None):
        self.config = config if config is not None else CappConfig()
        n, nbytes = self.config.num_cells, self.config.word_bytes
        self.cells = np.zeros((n, nbytes), dtype=np.uint8)
        self.tags = np.zeros(n, dtype=bool)
        self._comparand = np.zeros(nbytes, dtype=np.uint8)
        self._mask = np.zeros(nbytes, dtype=np.uint8)
        self._scratch = np.zeros(nbytes, dtype=np.uint8)

    @classmethod
    def new(cls, word_bits=DEFAULT_WORD_BITS, num_cells=DEFAULT_NUM_CELLS):
        return cls(CappConfig(word_bits, num_cells))

    def __repr__(self):
        c = self.config
        return (
            f"CappState(word_bits={c.word_bits}, num_cells={c.num_cells}, "
            f"tags={format_tags(self.tags)}, comparand={self.comparand:#x}, "
            f"mask={self.mask:#x})"
        )

    # -- registers ---------------------------------------------------------

    @property
    def comparand(self) -> int:
        return int.from_bytes(self._comparand.tobytes(), "big")

    @property
    def mask(self) -> int:
        return int.from_bytes(self._mask.tobytes(), "big")

    def load_comparand(self, word) -> None:
        self._comparand[:] = np.frombuffer(word_to_bytes(word, self.config), np.uint8)

    def load_mask(self, mask) -> None:
        self._mask[:] = np.frombuffer(word_to_bytes(mask, self.config), np.uint8)

    # -- tags --------------------------------------------------------------

    def set_all_tags(self) -> None:
        """Pulse the SET line: every cell becomes a responder."""
        self.tags[:] = True

    def clear_all_tags(self) -> None:
        self.tags[:] = False

    def read_tags(self) -> np.ndarray:
        return self.tags.copy()

    def any_tag(self) -> bool:
        return bool(self.tags.any())

    def first_responder(self) -> int:
        """Index of the lowest tagged cell, or -1."""
        return int(kernels.first_responder(self.tags))

    def select_first(self) -> None:
        """Keep only the lowest-indexed responder."""
        kernels.select_first(self.tags)

    # -- search / read / write -----------------------------------------------

    def search_pulse(self) -> None:
        """Clear the tag of every cell that mismatches the comparand.

        Only unmasked positions take part. Tags are never raised, so repeated
        pulses with different registers intersect their responder sets.
        """
        kernels.search_pulse(self.cells, self.tags, self._comparand, self._mask)

    def search(self, comparand, mask=0) -> None:
        """Set all tags, load both registers, pulse."""
        self.set_all_tags()
        self.load_comparand(comparand)
        self.load_mask(mask)
        self.search_pulse()

    def read_or(self) -> int:
        """Bitwise OR of every tagged cell (0 when there are no responders)."""
        kernels.read_or(self.cells, self.tags, self._scratch)
        return int.from_bytes(self._scratch.tobytes(), "big")

    def read_or_bytes(self) -> bytes:
        kernels.read_or(self.cells, self.tags, self._scratch)
        return self._scratch.tobytes()

    def write_parallel(self) -> None:
        """Copy comparand bits into every responder at unmasked positions."""
        kernels.write_parallel(self.cells, self.tags, self._comparand, self._mask)

    # -- direct memory access (image load/dump, inspection) -----------------

    def cell(self, index: int) -> int:
        return int.from_bytes(self.cells[index].tobytes(), "big")

    def cell_values(self) -> list[int]:
        return [int.from_bytes(row.tobytes(), "big") for row in self.cells]

    def set_cell(self, index: int, word) -> None:
        self.cells[index] = np.frombuffer(word_to_bytes(word, self.config), np.uint8)

    def load_cells(self, words, start: int = 0) -> None:
        """Overwrite cells ``start, start+1, ...`` with ``words``."""
        words = list(words)
        if start < 0 or start + len(words) > self.config.num_cells:
            raise WidthError(
                f"{len(words)} words starting at {start} do not fit "
                f"{self.config.num_cells} cells"
            )
        for offset, word in enumerate(words):
            self.set_cell(start + offset, word)

    def copy(self) -> "CappState":
        other = CappState(self.config)
        other.cells[:] = self.cells
        other.tags[:] = self.tags
        other._comparand[:] = self._comparand
        other._mask[:] = self._mask
        return other

    def same_as(self, other: "CappState") -> bool:
        """Architectural equality: geometry, cells, tags and both registers."""
        return (
            self.config == other.config
            and np.array_equal(self.cells, other.cells)
            and np.array_equal(self.tags, other.tags)
            and np.array_equal(self._comparand, other._comparand)
            and np.array_equal(self._mask, other._mask)
        )
