"""``capp-emu`` command line: serve, repl, run, demo.

Exit codes: 0 success, 1 failed expectation, 2 usage or I/O error.
"""

import argparse
import logging
import sys
from contextlib import ExitStack
from importlib import resources
from pathlib import Path

from capp_emu.core import DEFAULT_NUM_CELLS, DEFAULT_WORD_BITS, CappConfig, CappState
from capp_emu.demos import DEMOS
from capp_emu.driver import open_client
from capp_emu.errors import CappError, ConfigError
from capp_emu.image import read_image
from capp_emu.protocol import Device, Tracer
from capp_emu.script import (
    ExpectationFailed,
    ScriptError,
    ScriptRunner,
    parse_command,
    parse_script,
)
from capp_emu.transport import TcpServer, parse_address

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

DEFAULT_LISTEN = "127.0.0.1:7312"


class UsageError(Exception):
    pass


def tutorial_path() -> Path:
    return Path(str(resources.files("capp_emu") / "data" / "tutorial.capp"))


def _config(args) -> CappConfig:
    try:
        return CappConfig(args.width, args.cells)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _image(args, config):
    if not args.image:
        return []
    return read_image(args.image, config)


def _open_trace(stack, args):
    if not getattr(args, "trace", None):
        return None
    return Tracer(stack.enter_context(open(args.trace, "w")))


def _target(args):
    if args.embedded and args.connect:
        raise UsageError("--embedded and --connect are mutually exclusive")
    if args.cycles and args.connect:
        raise UsageError("--cycles needs an in-process device (--embedded)")
    if args.trace and args.connect:
        raise UsageError("--trace needs an in-process device (--embedded)")
    return args.connect


def cmd_serve(args, out) -> int:
    config = _config(args)
    capp = CappState(config)
    capp.load_cells(_image(args, config))
    try:
        host, port = parse_address(args.listen)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with ExitStack() as stack:
        device = Device(capp, tracer=_open_trace(stack, args))
        server = stack.enter_context(TcpServer(device, host, port))
        out.write(f"serving {config.word_bits}x{config.num_cells} CAPP on "
                  f"{server.address[0]}:{server.address[1]}\n")
        out.flush()
        try:
            server.serve_forever(args.max_connections)
        except KeyboardInterrupt:
            pass
        if args.cycles:
            out.write(f"{device.cycles} cycles\n")
    return EXIT_OK


def cmd_run(args, out) -> int:
    config = _config(args)
    path = Path(args.script)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read script {path}: {exc.strerror}") from None
    commands = parse_script(text, config)
    connect = _target(args)
    with ExitStack() as stack:
        tracer = _open_trace(stack, args)
        client, device = stack.enter_context(
            open_client(config, connect, image=_image(args, config), tracer=tracer))
        runner = ScriptRunner(client, out, base_dir=path.parent, device=device,
                              show_cycles=args.cycles)
        return runner.run(commands)


def cmd_repl(args, out, stdin=None) -> int:
    config = _config(args)
    stdin = stdin if stdin is not None else sys.stdin
    interactive = stdin.isatty()
    connect = _target(args)
    with ExitStack() as stack:
        tracer = _open_trace(stack, args)
        client, device = stack.enter_context(
            open_client(config, connect, image=_image(args, config), tracer=tracer))
        runner = ScriptRunner(client, out, device=device, show_cycles=args.cycles)
        lineno = 0
        while True:
            if interactive:
                out.write("capp> ")
                out.flush()
            line = stdin.readline()
            if not line:
                break
            lineno += 1
            if line.strip() in ("quit", "exit"):
                break
            try:
                cmd = parse_command(line, config, lineno)
                if cmd is not None:
                    runner.execute(cmd)
            except ExpectationFailed as exc:
                out.write(f"FAIL {exc}\n")
            except CappError as exc:
                out.write(f"error: {exc}\n")
    return EXIT_OK


def cmd_demo(args, out) -> int:
    if args.name not in DEMOS:
        raise UsageError(f"unknown demo {args.name!r}; choose from {', '.join(DEMOS)}")
    config = _config(args)
    connect = _target(args)
    with open_client(config, connect) as (client, _device):
        return DEMOS[args.name](client, out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capp-emu", description="Content addressable parallel processor emulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    geometry = argparse.ArgumentParser(add_help=False)
    geometry.add_argument("--width", type=int, default=DEFAULT_WORD_BITS,
                          help="bits per word, a multiple of 8 (default %(default)s)")
    geometry.add_argument("--cells", type=int, default=DEFAULT_NUM_CELLS,
                          help="number of cells (default %(default)s)")

    target = argparse.ArgumentParser(add_help=False)
    target.add_argument("--connect", metavar="ADDR:PORT", help="talk to a served device")
    target.add_argument("--embedded", action="store_true",
                        help="use an in-process device (the default)")
    target.add_argument("--cycles", action="store_true",
                        help="report device cycles per command (embedded only)")
    target.add_argument("--trace", metavar="PATH", help="write an RX/TX byte trace")

    image = argparse.ArgumentParser(add_help=False)
    image.add_argument("--image", metavar="PATH", help="initial memory image")

    p = sub.add_parser("serve", parents=[geometry, image], help="serve a device over TCP")
    p.add_argument("--listen", default=DEFAULT_LISTEN, metavar="ADDR:PORT")
    p.add_argument("--trace", metavar="PATH", help="write an RX/TX byte trace")
    p.add_argument("--cycles", action="store_true", help="print total cycles on exit")
    p.add_argument("--max-connections", type=int, default=None,
                   help="exit after this many connections")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("repl", parents=[geometry, target, image], help="interactive session")
    p.set_defaults(func=cmd_repl)

    p = sub.add_parser("run", parents=[geometry, target, image], help="execute a script")
    p.add_argument("script", nargs="?", default=None,
                   help="script path (default: the bundled tutorial)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("demo", parents=[geometry, target], help="run a demo program")
    p.add_argument("name", help=f"one of: {', '.join(DEMOS)}")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if getattr(args, "script", "") is None:
        args.script = str(tutorial_path())
    try:
        return args.func(args, out)
    except (UsageError, ScriptError, OSError, CappError) as exc:
        sys.stderr.write(f"capp-emu: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
