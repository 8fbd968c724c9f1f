"""Memory image text format.

One word per line in hexadecimal, optional ``0x`` prefix; line ``k`` of
data goes to cell ``k``. Blank lines and ``#`` comments (whole-line or
trailing) are skipped. Cells past the last data line stay zero.
"""

from pathlib import Path

from capp_emu.core import CappConfig
from capp_emu.errors import ImageError


def parse_word(text: str, config: CappConfig) -> int:
    """Parse one hex word, checking it fits ``config.word_bits``."""
    token = text.strip()
    digits = token[2:] if token.lower().startswith("0x") else token
    try:
        if not digits or digits.startswith(("+", "-")):
            raise ValueError
        value = int(digits, 16)
    except ValueError:
        raise ImageError(f"not a hexadecimal word: {text!r}") from None
    if value > config.all_ones:
        raise ImageError(f"{token} does not fit in {config.word_bits} bits")
    return value


def format_word(value: int, config: CappConfig) -> str:
    return f"0x{value:0{config.word_bits // 4}X}"


def parse_image(text: str, config: CappConfig) -> list[int]:
    words = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            words.append(parse_word(line, config))
        except ImageError as exc:
            raise ImageError(f"line {lineno}: {exc}") from None
    if len(words) > config.num_cells:
        raise ImageError(
            f"image has {len(words)} words but the device has {config.num_cells} cells"
        )
    return words


def format_image(words, config: CappConfig) -> str:
    return "".join(format_word(w, config) + "\n" for w in words)


def read_image(path, config: CappConfig) -> list[int]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ImageError(f"cannot read image {path}: {exc.strerror}") from exc
    return parse_image(text, config)


def write_image(path, words, config: CappConfig) -> None:
    Path(path).write_text(format_image(words, config))
