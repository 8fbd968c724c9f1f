import io

import pytest

from capp_emu import cli
from capp_emu.protocol import Opcode
from capp_emu.script import script_geometries

from helpers import run_cli, served

TUTORIAL = cli.tutorial_path()
GEOMETRIES = script_geometries(TUTORIAL.read_text())


def test_serve_rejects_bad_width():
    code, _, err = run_cli("serve", "--width", "12")
    assert code == 2
    assert "multiple of 8" in err


def test_serve_with_image(tmp_path):
    image = tmp_path / "img.hex"
    image.write_text("0x01\n0x02\n0x03\n0x04\n")
    with served("--width", "8", "--cells", "4", "--image", str(image)) as addr:
        code, out, _ = run_cli("run", "--width", "8", "--cells", "4", "--connect", addr,
                               str(write(tmp_path, "dump.capp", "dump-image out.hex\n")))
    assert code == 0
    assert out == "dump-image out.hex: 4 words\n"
    assert (tmp_path / "out.hex").read_text().split() == ["0x01", "0x02", "0x03", "0x04"]


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_geometry_header_present():
    assert len(GEOMETRIES) >= 3


@pytest.mark.parametrize("cfg", GEOMETRIES, ids=lambda c: f"{c.word_bits}x{c.num_cells}")
def test_tutorial_runs_on_every_listed_geometry(cfg):
    code, out, _ = run_cli("run", "--width", str(cfg.word_bits), "--cells", str(cfg.num_cells),
                           str(TUTORIAL))
    assert code == 0, out
    assert "FAIL" not in out


def test_run_without_path_uses_tutorial():
    assert run_cli("run", "--width", "8", "--cells", "8")[0] == 0


def test_failed_expect_reports_line(tmp_path):
    script = write(tmp_path, "bad.capp", "# comment\nread\nexpect 0x01\nread\n")
    code, out, _ = run_cli("run", "--width", "8", "--cells", "2", str(script))
    assert code == 1
    assert out.splitlines()[-1] == "FAIL line 3: expected 0x01, got 0x00"


def test_missing_script():
    code, _, err = run_cli("run", "/nonexistent/x.capp")
    assert code == 2
    assert "cannot read script" in err


def test_syntax_error(tmp_path):
    code, _, err = run_cli("run", str(write(tmp_path, "s.capp", "read\nfrobnicate\n")))
    assert code == 2
    assert "line 2" in err


def test_unknown_demo():
    code, _, err = run_cli("demo", "nosuch")
    assert code == 2
    assert "unknown demo" in err


def test_missing_image():
    assert run_cli("repl", "--image", "/nonexistent.hex")[0] == 2


def test_conflicting_flags():
    assert run_cli("run", "--connect", "127.0.0.1:1", "--cycles")[0] == 2
    assert run_cli("run", "--connect", "127.0.0.1:1", "--embedded")[0] == 2


def test_connect_refused():
    assert run_cli("run", "--connect", "127.0.0.1:1")[0] == 2


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0


def repl(text, *args):
    out = io.StringIO()
    parser = cli.build_parser()
    ns = parser.parse_args(["repl", "--width", "8", "--cells", "4", *args])
    assert cli.cmd_repl(ns, out, stdin=io.StringIO(text)) == 0
    return out.getvalue().splitlines()


def test_repl_fresh_device():
    assert repl("status\nread\n") == ["status: none", "read: 0x00"]


def test_repl_search_and_read(tmp_path):
    img = write(tmp_path, "t.hex", "0x5A\n0x5B\n0xA5\n")
    lines = repl("comparand 0x5A\nmask 0x01\nsearch\nread\nexpect 0x5B\nquit\nread\n",
                 "--image", str(img))
    assert lines == ["read: 0x5B", "expect 0x5B: ok"]


def test_repl_continues_after_errors():
    lines = repl("bogus\ncomparand 0x100\nexpect 0x01\nread\nexpect 0x01\nstatus\n")
    assert lines[0].startswith("error: unknown command")
    assert lines[1].startswith("error:")
    assert lines[2] == "FAIL line 3: expected 0x01, but nothing was read"
    assert lines[3:] == ["read: 0x00", "FAIL line 5: expected 0x01, got 0x00", "status: none"]


def test_repl_cycles():
    lines = repl("tags-set\ncomparand 0x01\nsearch\nstatus\nread\n", "--cycles")
    cycles = [int(l.split("[")[1].split()[0]) for l in lines]
    assert cycles == [1, 2, 1 + 7, 2, 2]


def test_trace_file(tmp_path):
    trace = tmp_path / "t.log"
    script = write(tmp_path, "s.capp", "tags-set\nstatus\n")
    assert run_cli("run", "--width", "8", "--cells", "2", "--trace", str(trace), str(script))[0] == 0
    assert [l.split()[:2] for l in trace.read_text().splitlines()] == [
        ["RX", "01"], ["TX", "AA"], ["RX", f"{Opcode.STATUS:02X}"], ["TX", "01"], ["TX", "AA"]]


@pytest.mark.parametrize("name", ["lookup", "ternary", "enumerate"])
def test_demos_deterministic(name):
    first = run_cli("demo", name, "--width", "16", "--cells", "8")
    second = run_cli("demo", name, "--width", "16", "--cells", "8")
    assert first[0] == 0, first[1]
    assert first == second
    assert first[1].rstrip().endswith(": ok")


@pytest.mark.parametrize("width,cells", [(8, 1), (8, 32), (32, 4)])
def test_demos_other_geometries(width, cells):
    for name in cli.DEMOS:
        code, out, _ = run_cli("demo", name, "--width", str(width), "--cells", str(cells))
        assert code == 0, out
