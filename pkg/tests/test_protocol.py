import io
import random
import socket
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capp_emu.core import CappConfig, CappState, format_tags
from capp_emu.errors import TransportError
from capp_emu.oracle import OP_NAMES, Op, apply_to_capp
from capp_emu.protocol import (
    ACK,
    NAK,
    SEARCH_DELAY,
    Device,
    FsmState,
    Opcode,
    Phase,
    Tracer,
    command_cycles,
    cycles_to_us,
    parse_trace,
    serve,
)
from capp_emu.transport import SocketTransport, loopback_pair

from conftest import make_state


def device(word_bits=8, cells=(0x5A, 0x5B, 0xA5), tags=None, **kw):
    return Device(make_state(word_bits, list(cells), tags), **kw)


def run_command(dev, data):
    """Feed one command back to back; return (output, cycles spent, phases executed)."""
    start = dev.cycles
    out = bytearray()
    phases = []
    for byte in data:
        assert dev.accepts_input
        out += dev.step(byte)
        phases.append(dev.last_phase)
    while not dev.ready:
        out += dev.step()
        phases.append(dev.last_phase)
    return bytes(out), dev.cycles - start, phases


# -- step examples -------------------------------------------------------------------


def test_set_tags_is_one_step():
    dev = device()
    assert dev.step(Opcode.SET_TAGS) == bytes([ACK])
    assert format_tags(dev.capp.tags) == "111"
    assert dev.fsm == FsmState(Phase.READY)
    assert dev.cycles == 1


def test_search_takes_seven_cycles():
    dev = device(tags="111")
    dev.capp.load_comparand(0x5A)
    dev.capp.load_mask(0x01)
    out, cycles, phases = run_command(dev, [Opcode.SEARCH])
    assert out == bytes([ACK])
    assert cycles == 7 == 1 + SEARCH_DELAY + 1
    assert phases == [Phase.SEARCH_1] + [Phase.IDLE] * 5 + [Phase.SEARCH_2]
    assert format_tags(dev.capp.tags) == "110"


def test_search_latches_at_deassert():
    dev = device(tags="111")
    dev.capp.load_comparand(0xFF)
    dev.step(Opcode.SEARCH)
    for _ in range(SEARCH_DELAY):
        assert dev.search_line
        assert format_tags(dev.capp.tags) == "111"
        assert dev.step() == b""
    assert dev.fsm.phase is Phase.SEARCH_2
    assert dev.step() == bytes([ACK])
    assert not dev.search_line
    assert format_tags(dev.capp.tags) == "000"


def test_select_takes_seven_cycles():
    dev = device(tags="011")
    out, cycles, phases = run_command(dev, [Opcode.SELECT_FIRST])
    assert (out, cycles) == (bytes([ACK]), 7)
    assert phases == [Phase.SELECT_1] + [Phase.IDLE] * 5 + [Phase.SELECT_2]
    assert format_tags(dev.capp.tags) == "010"


@pytest.mark.parametrize("byte", [0x00, 0x0A, 0x55, 0xAA, 0xFE, 0xFF])
def test_unknown_opcode_naks(byte):
    dev = device()
    assert dev.step(byte) == bytes([NAK])
    assert dev.ready


@pytest.mark.parametrize("word_bits", [8, 16, 32, 64])
def test_load_comparand_one_byte_per_cycle(word_bits):
    dev = Device(CappState(CappConfig(word_bits, 2)))
    nbytes = word_bits // 8
    payload = bytes(range(0x11, 0x11 + nbytes))
    out, cycles, phases = run_command(dev, [Opcode.LOAD_COMPARAND, *payload])
    assert out == bytes([ACK])
    assert cycles == 1 + nbytes
    assert phases.count(Phase.RECEIVE) == nbytes
    assert dev.capp.comparand == int.from_bytes(payload, "big")


def test_load_comparand_w32_msb_first():
    dev = Device(CappState(CappConfig(32, 4)))
    out = dev.run_until_ready([0x02, 0xDE, 0xAD, 0xBE, 0xEF])
    assert out == bytes([ACK])
    assert dev.capp.comparand == 0xDEADBEEF
    assert dev.cycles == 5


def test_receive_waits_for_payload():
    dev = Device(CappState(CappConfig(32, 1)))
    dev.step(Opcode.LOAD_MASK)
    dev.step(0x12)
    for _ in range(10):
        assert dev.step() == b""
    assert dev.fsm == FsmState(Phase.RECEIVE, 3, target="mask")
    assert dev.capp.mask == 0
    assert dev.run_until_ready([0x34, 0x56, 0x78]) == bytes([ACK])
    assert dev.capp.mask == 0x12345678


def test_receive_accepts_any_byte_value():
    dev = Device(CappState(CappConfig(16, 1)))
    assert dev.run_until_ready([Opcode.LOAD_COMPARAND, NAK, 0xFE]) == bytes([ACK])
    assert dev.capp.comparand == 0x55FE


def test_status_and_read_examples():
    dev = device(tags="000")
    assert dev.run_until_ready([Opcode.STATUS]) == bytes([0x00, ACK])
    dev.capp.tags[2] = True
    assert dev.run_until_ready([Opcode.STATUS]) == bytes([0x01, ACK])
    assert dev.run_until_ready([Opcode.READ]) == bytes([0xA5, ACK])


def test_read_w32_sends_msb_first_one_byte_per_cycle():
    dev = Device(make_state(32, [0x01020304, 0x10000000], "11"))
    out, cycles, phases = run_command(dev, [Opcode.READ])
    assert out == bytes([0x11, 0x02, 0x03, 0x04, ACK])
    assert cycles == 5
    assert phases == [Phase.READY] + [Phase.SEND] * 4


def test_write_and_clear_are_one_step():
    dev = device(cells=(0, 0, 0), tags="101")
    dev.capp.load_comparand(0xFF)
    dev.capp.load_mask(0x0F)
    assert dev.step(Opcode.WRITE) == bytes([ACK])
    assert dev.capp.cell_values() == [0xF0, 0x00, 0xF0]
    assert dev.step(Opcode.CLEAR_TAGS) == bytes([ACK])
    assert not dev.capp.any_tag()
    assert dev.cycles == 2


@pytest.mark.parametrize("opcode", list(Opcode))
@pytest.mark.parametrize("word_bits", [8, 32])
def test_documented_cycle_costs(opcode, word_bits):
    dev = Device(CappState(CappConfig(word_bits, 3)))
    payload = [0x00] * (word_bits // 8) if opcode in (
        Opcode.LOAD_COMPARAND, Opcode.LOAD_MASK) else []
    out, cycles, _ = run_command(dev, [opcode, *payload])
    assert cycles == command_cycles(opcode, word_bits)
    assert out[-1] == ACK


def test_cycle_time_at_48mhz():
    assert cycles_to_us(48) == pytest.approx(1.0)
    assert cycles_to_us(7) == pytest.approx(0.14583333)


# -- busy policy -------------------------------------------------------------------------


def test_busy_input_is_nakked_and_discarded():
    dev = device(tags="111")
    dev.capp.load_comparand(0x5A)
    dev.step(Opcode.SEARCH)
    assert dev.step(Opcode.SET_TAGS) == bytes([NAK])
    assert dev.fsm == FsmState(Phase.IDLE, 4, successor=Phase.SEARCH_2)
    outs = [dev.step(0x42) for _ in range(5)]
    assert outs == [bytes([NAK])] * 4 + [bytes([ACK, NAK])]
    assert dev.ready and dev.cycles == 7
    assert format_tags(dev.capp.tags) == "100"


def test_busy_during_send_keeps_payload():
    dev = device(tags="001")
    dev.step(Opcode.READ)
    assert dev.step(Opcode.READ) == bytes([0xA5, ACK, NAK])
    assert dev.ready


def test_step_rejects_non_bytes():
    with pytest.raises(ValueError):
        device().step(256)


# -- batch ------------------------------------------------------------------------------


def test_run_until_ready_propagates_naks():
    dev = device()
    out = dev.run_until_ready([0xFE, Opcode.SET_TAGS, Opcode.SEARCH, 0x00, Opcode.STATUS])
    assert out == bytes([NAK, ACK, ACK, NAK, 0x00, ACK])
    assert dev.ready


def test_run_until_ready_stops_mid_receive():
    dev = device()
    assert dev.run_until_ready([Opcode.LOAD_COMPARAND]) == b""
    assert dev.fsm.phase is Phase.RECEIVE and dev.accepts_input


def _encode(op: Op, nbytes: int) -> bytes:
    table = {
        "set_all_tags": Opcode.SET_TAGS, "clear_all_tags": Opcode.CLEAR_TAGS,
        "load_comparand": Opcode.LOAD_COMPARAND, "load_mask": Opcode.LOAD_MASK,
        "search_pulse": Opcode.SEARCH, "select_first": Opcode.SELECT_FIRST,
        "read_or": Opcode.READ, "write_parallel": Opcode.WRITE, "any_tag": Opcode.STATUS,
    }
    if op.name == "read_tags":
        return b""
    payload = op.arg.to_bytes(nbytes, "big") if op.arg is not None else b""
    return bytes([table[op.name]]) + payload


@given(st.sampled_from([8, 16, 32]), st.integers(1, 9), st.randoms(use_true_random=False))
@settings(max_examples=150)
def test_protocol_matches_direct_core(width, n, rng):
    cfg = CappConfig(width, n)
    memory = [rng.getrandbits(width) for _ in range(n)]
    direct = CappState(cfg)
    direct.load_cells(memory)
    dev = Device(direct.copy())
    for _ in range(rng.randint(1, 40)):
        name = rng.choice(OP_NAMES)
        arg = rng.getrandbits(width) if name.startswith("load_") else None
        op = Op(name, arg)
        out = dev.run_until_ready(_encode(op, cfg.word_bytes))
        result = apply_to_capp(direct, op)
        if name == "read_or":
            assert out == result.to_bytes(cfg.word_bytes, "big") + bytes([ACK])
        elif name == "any_tag":
            assert out == bytes([int(result), ACK])
        elif name != "read_tags":
            assert out == bytes([ACK])
        dev.check_invariants()
    assert dev.capp.same_as(direct)


def test_fuzz_keeps_invariants():
    rng = random.Random(5)
    dev = Device(CappState(CappConfig(16, 5)))
    for _ in range(20_000):
        byte = rng.randrange(256) if rng.random() < 0.6 else None
        dev.step(byte)
        dev.check_invariants()


# -- trace ---------------------------------------------------------------------------------


def test_trace_lines():
    buf = io.StringIO()
    dev = device(tracer=Tracer(buf))
    dev.run_until_ready([Opcode.SET_TAGS, Opcode.STATUS, 0xFE])
    assert buf.getvalue().splitlines() == [
        "RX 01 1", "TX AA 1",
        "RX 08 2", "TX 01 3", "TX AA 3",
        "RX FE 4", "TX 55 4",
    ]
    assert parse_trace(buf.getvalue())[0] == ("RX", 1, 1)
    with pytest.raises(ValueError):
        parse_trace("XX 01 1")


# -- serve ---------------------------------------------------------------------------------


class ClosedTransport:
    def recv(self, n):
        return b""

    def send(self, data):
        raise AssertionError("nothing to send")


class BrokenTransport:
    def recv(self, n):
        raise ConnectionResetError("peer reset")


def test_serve_closed_at_start_returns_immediately():
    dev = device()
    assert serve(dev, ClosedTransport()) is dev
    assert dev.cycles == 0


def test_serve_reports_transport_errors():
    with pytest.raises(TransportError, match="peer reset"):
        serve(device(), BrokenTransport())


def _serve_in_thread(dev, transport):
    result = {}

    def run():
        result["device"] = serve(dev, transport)

    t = threading.Thread(target=run, daemon=True)
    t.start()
    return t, result


def test_serve_matches_run_until_ready_over_loopback():
    rng = random.Random(11)
    script = bytes(rng.choice([1, 2, 3, 4, 5, 6, 7, 8, 9, 0xEE, 0x37]) for _ in range(3000))
    reference = device().run_until_ready(script)

    host, dev_end = loopback_pair()
    dev = device()
    t, result = _serve_in_thread(dev, dev_end)
    host.send(script)
    host.sock.shutdown(socket.SHUT_WR)
    t.join(5)
    dev_end.close()
    received = bytearray()
    while chunk := host.recv(65536):
        received += chunk
    assert bytes(received) == reference
    assert result["device"] is dev
    host.close()


def test_disconnect_mid_receive_preserves_state():
    host, dev_end = loopback_pair()
    dev = Device(CappState(CappConfig(32, 2)))
    t, result = _serve_in_thread(dev, dev_end)
    host.send(bytes([Opcode.SET_TAGS]))
    assert host.recv(1) == bytes([ACK])
    host.send(bytes([Opcode.LOAD_COMPARAND, 0x12, 0x34]))
    host.close()
    t.join(5)
    assert not t.is_alive()
    assert result["device"].fsm == FsmState(Phase.RECEIVE, 2, target="comparand")
    assert dev.capp.comparand == 0 and dev.capp.any_tag()
    dev_end.close()


def test_socket_transport_close_is_idempotent():
    a, b = loopback_pair()
    a.close()
    a.close()
    with b:
        assert b.recv(1) == b""
    assert isinstance(a, SocketTransport)
