"""CAPP script language.

One command per line, ``#`` starts a comment::

    tags-set | tags-clear | comparand <hex> | mask <hex> | search | refine
    select | read | write | status | load-image <path> | dump-image <path>
    expect <hex> | expect-some <bool>

``search`` resets the tags before pulsing (the full search recipe);
``refine`` pulses without the reset. ``expect`` checks the most recent
``read``; ``expect-some`` queries the device status itself. Relative image
paths are resolved against the script's directory.
"""

import re
from dataclasses import dataclass
from pathlib import Path

from capp_emu.core import CappConfig
from capp_emu.errors import CappError, ImageError
from capp_emu.image import format_word, parse_word, read_image, write_image
from capp_emu.protocol import cycles_to_us

NO_ARG = {"tags-set", "tags-clear", "search", "refine", "select", "read", "write", "status"}
HEX_ARG = {"comparand", "mask", "expect"}
PATH_ARG = {"load-image", "dump-image"}
BOOL_ARG = {"expect-some"}
COMMANDS = NO_ARG | HEX_ARG | PATH_ARG | BOOL_ARG

_TRUE = {"true", "1", "yes", "some"}
_FALSE = {"false", "0", "no", "none"}

_GEOMETRY_RE = re.compile(r"^#\s*geometries:\s*(.*)$", re.IGNORECASE)


class ScriptError(CappError, ValueError):
    """Malformed script line."""


@dataclass(frozen=True)
class ScriptCommand:
    name: str
    arg: object = None
    lineno: int = 0

    def __str__(self):
        if self.arg is None:
            return self.name
        if isinstance(self.arg, bool):
            return f"{self.name} {str(self.arg).lower()}"
        if isinstance(self.arg, int):
            return f"{self.name} {self.arg:#x}"
        return f"{self.name} {self.arg}"


def parse_command(line: str, config: CappConfig, lineno: int = 0) -> ScriptCommand | None:
    """Parse one line; return None for blank or comment-only lines."""
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    name, *rest = text.split()
    name = name.lower()
    if name not in COMMANDS:
        raise ScriptError(f"unknown command {name!r}")
    if name in NO_ARG:
        if rest:
            raise ScriptError(f"{name} takes no argument")
        return ScriptCommand(name, None, lineno)
    if len(rest) != 1:
        raise ScriptError(f"{name} takes exactly one argument")
    arg = rest[0]
    if name in HEX_ARG:
        try:
            return ScriptCommand(name, parse_word(arg, config), lineno)
        except ImageError as exc:
            raise ScriptError(str(exc)) from None
    if name in BOOL_ARG:
        if arg.lower() in _TRUE:
            return ScriptCommand(name, True, lineno)
        if arg.lower() in _FALSE:
            return ScriptCommand(name, False, lineno)
        raise ScriptError(f"{name} expects true or false, got {arg!r}")
    return ScriptCommand(name, arg, lineno)


def parse_script(text: str, config: CappConfig) -> list[ScriptCommand]:
    commands = []
    for lineno, line in enumerate(text.splitlines(), 1):
        try:
            cmd = parse_command(line, config, lineno)
        except ScriptError as exc:
            raise ScriptError(f"line {lineno}: {exc}") from None
        if cmd is not None:
            commands.append(cmd)
    return commands


def script_geometries(text: str) -> list[CappConfig]:
    """Geometries listed in a ``# geometries: 8x4 32x32`` header (width x cells)."""
    for line in text.splitlines():
        m = _GEOMETRY_RE.match(line.strip())
        if m:
            out = []
            for item in m.group(1).split():
                width, _, cells = item.lower().partition("x")
                out.append(CappConfig(int(width), int(cells)))
            return out
    return []


class ExpectationFailed(CappError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ScriptRunner:
    """Executes script commands against a :class:`~capp_emu.driver.Client`.

    Output goes to ``out`` one line per reported result. With
    ``device`` and ``show_cycles`` every command also reports the device
    cycles it took, which is only possible for an in-process device.
    """

    def __init__(self, client, out, base_dir=".", device=None, show_cycles=False):
        self.client = client
        self.config = client.config
        self.out = out
        self.base_dir = Path(base_dir)
        self.device = device
        self.show_cycles = show_cycles and device is not None
        self.last_read: int | None = None

    def _emit(self, text):
        self.out.write(text + "\n")

    def _path(self, arg):
        path = Path(arg)
        return path if path.is_absolute() else self.base_dir / path

    def describe(self, cmd: ScriptCommand) -> str:
        if cmd.name in HEX_ARG:
            return f"{cmd.name} {format_word(cmd.arg, self.config)}"
        return str(cmd)

    def execute(self, cmd: ScriptCommand) -> None:
        """Run one command. Raises ExpectationFailed when an expect misses."""
        client = self.client
        start = self.device.cycles if self.show_cycles else 0
        result = None
        name = cmd.name
        if name == "tags-set":
            client.reset_tags()
        elif name == "tags-clear":
            client.clear_tags()
        elif name == "comparand":
            client.load_comparand(cmd.arg)
        elif name == "mask":
            client.load_mask(cmd.arg)
        elif name == "search":
            client.reset_tags()
            client.pulse_search()
        elif name == "refine":
            client.pulse_search()
        elif name == "select":
            client.select_first()
        elif name == "write":
            client.write()
        elif name == "read":
            self.last_read = client.read_word()
            result = format_word(self.last_read, self.config)
        elif name == "status":
            result = "some" if client.some_none() else "none"
        elif name == "load-image":
            words = read_image(self._path(cmd.arg), self.config)
            client.load_image(words)
            result = f"{len(words)} words"
        elif name == "dump-image":
            words = client.dump_image()
            try:
                write_image(self._path(cmd.arg), words, self.config)
            except OSError as exc:
                raise ImageError(f"cannot write image {cmd.arg}: {exc.strerror}") from exc
            result = f"{len(words)} words"
        elif name == "expect":
            want = format_word(cmd.arg, self.config)
            if self.last_read is None:
                raise ExpectationFailed(cmd.lineno, f"expected {want}, but nothing was read")
            if self.last_read != cmd.arg:
                got = format_word(self.last_read, self.config)
                raise ExpectationFailed(cmd.lineno, f"expected {want}, got {got}")
            result = "ok"
        elif name == "expect-some":
            got = client.some_none()
            if got != cmd.arg:
                raise ExpectationFailed(
                    cmd.lineno,
                    f"expected {'some' if cmd.arg else 'none'}, got {'some' if got else 'none'}",
                )
            result = "ok"
        else:  # pragma: no cover - parse_command rejects unknown names
            raise ScriptError(f"unknown command {name!r}")

        text = self.describe(cmd)
        line = text if result is None else f"{text}: {result}"
        if self.show_cycles:
            spent = self.device.cycles - start
            self._emit(f"{line}  [{spent} cycles, {cycles_to_us(spent):.3f} us]")
        elif result is not None:
            self._emit(line)

    def run(self, commands) -> int:
        """Run commands in order; 0 if every expectation held, else 1."""
        for cmd in commands:
            try:
                self.execute(cmd)
            except ExpectationFailed as exc:
                self._emit(f"FAIL {exc}")
                return 1
        return 0
