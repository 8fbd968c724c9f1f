"""Emulator for a Foster-style content addressable parallel processor (CAPP).

Layers, bottom up: :mod:`capp_emu.core` (architectural model, backed by
:mod:`capp_emu.kernels`), :mod:`capp_emu.protocol` (device-side byte FSM),
:mod:`capp_emu.driver` (host client), :mod:`capp_emu.oracle` (naive
reference model) and :mod:`capp_emu.cli`.
"""

from capp_emu.core import CappConfig, CappState
from capp_emu.driver import Client, Embedded, SearchQuery
from capp_emu.errors import (
    CappError,
    ConfigError,
    ImageError,
    ProtocolError,
    TransportError,
    WidthError,
)
from capp_emu.protocol import ACK, NAK, Device, Opcode

__all__ = [
    "ACK",
    "NAK",
    "CappConfig",
    "CappError",
    "CappState",
    "Client",
    "ConfigError",
    "Device",
    "Embedded",
    "ImageError",
    "Opcode",
    "ProtocolError",
    "SearchQuery",
    "TransportError",
    "WidthError",
]

__version__ = "0.1.0"
