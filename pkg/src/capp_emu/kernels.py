"""Bit-parallel CAPP kernels.

Memory layout shared by every kernel:

* ``cells``      ``uint8[num_cells, word_bytes]``, each row big-endian
  (column 0 holds the most significant byte, bit 0 of the word is bit 0
  of the last column).
* ``tags``       ``bool[num_cells]``.
* ``comparand``  ``uint8[word_bytes]``, same byte order as a cell row.
* ``mask``       ``uint8[word_bytes]``; a set bit means "ignore".

Two implementations exist, ``numpy_impl`` (vectorised numpy) and
``numba_impl`` (explicit loops under ``@njit``). Module-level names are
bound to one of them according to :data:`capp_emu._jit.JIT_ENABLED`.
All mutating kernels work in place and return nothing.
"""

from types import SimpleNamespace

import numpy as np

from capp_emu._jit import HAVE_NUMBA, JIT_ENABLED, njit

# --------------------------------------------------------------------------
# numpy
# --------------------------------------------------------------------------


def _np_search_pulse(cells, tags, comparand, mask):
    mismatch = ((cells ^ comparand) & ~mask).any(axis=1)
    tags &= ~mismatch


def _np_write_parallel(cells, tags, comparand, mask):
    if not tags.any():
        return
    cells[tags] = (cells[tags] & mask) | (comparand & ~mask)


def _np_read_or(cells, tags, out):
    out[:] = 0
    if tags.any():
        np.bitwise_or.reduce(cells[tags], axis=0, out=out)


def _np_first_responder(tags):
    hits = np.flatnonzero(tags)
    return int(hits[0]) if hits.size else -1


def _np_select_first(tags):
    first = _np_first_responder(tags)
    tags[:] = False
    if first >= 0:
        tags[first] = True
    return first


numpy_impl = SimpleNamespace(
    name="numpy",
    search_pulse=_np_search_pulse,
    write_parallel=_np_write_parallel,
    read_or=_np_read_or,
    first_responder=_np_first_responder,
    select_first=_np_select_first,
)

# --------------------------------------------------------------------------
# numba
# --------------------------------------------------------------------------


def _nb_search_pulse(cells, tags, comparand, mask):
    n, nbytes = cells.shape
    for i in range(n):
        if not tags[i]:
            continue
        for b in range(nbytes):
            if (cells[i, b] ^ comparand[b]) & (mask[b] ^ 0xFF):
                tags[i] = False
                break


def _nb_write_parallel(cells, tags, comparand, mask):
    n, nbytes = cells.shape
    for i in range(n):
        if tags[i]:
            for b in range(nbytes):
                keep = mask[b]
                cells[i, b] = (cells[i, b] & keep) | (comparand[b] & (keep ^ 0xFF))


def _nb_read_or(cells, tags, out):
    n, nbytes = cells.shape
    for b in range(nbytes):
        out[b] = 0
    for i in range(n):
        if tags[i]:
            for b in range(nbytes):
                out[b] |= cells[i, b]


def _nb_first_responder(tags):
    for i in range(tags.shape[0]):
        if tags[i]:
            return i
    return -1


def _nb_select_first(tags):
    first = -1
    for i in range(tags.shape[0]):
        if tags[i]:
            if first < 0:
                first = i
            else:
                tags[i] = False
    return first


if HAVE_NUMBA:
    numba_impl = SimpleNamespace(
        name="numba",
        search_pulse=njit(_nb_search_pulse),
        write_parallel=njit(_nb_write_parallel),
        read_or=njit(_nb_read_or),
        first_responder=njit(_nb_first_responder),
        select_first=njit(_nb_select_first),
    )
else:  # pragma: no cover
    numba_impl = None

active = numba_impl if JIT_ENABLED else numpy_impl

search_pulse = active.search_pulse
write_parallel = active.write_parallel
read_or = active.read_or
first_responder = active.first_responder
select_first = active.select_first
