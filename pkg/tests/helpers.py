"""Shared helpers: a ``capp-emu serve`` subprocess and CLI invocation."""

import io
import subprocess
import sys
from contextlib import contextmanager, redirect_stderr

from capp_emu.cli import main


@contextmanager
def served(*args, connections=1):
    """Start ``capp-emu serve`` on an ephemeral port; yield ``host:port``."""
    proc = subprocess.Popen(
        [sys.executable, "-m", "capp_emu", "serve", "--listen", "127.0.0.1:0",
         "--max-connections", str(connections), *args],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        if not line:
            raise RuntimeError(f"serve did not start: {proc.stderr.read()}")
        yield line.rsplit(" ", 1)[1].strip()
        proc.wait(timeout=30)
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()
        proc.stdout.close()
        proc.stderr.close()


def run_cli(*argv):
    """Run the CLI in-process; return (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stderr(err):
        code = main(list(argv), out=out)
    return code, out.getvalue(), err.getvalue()
