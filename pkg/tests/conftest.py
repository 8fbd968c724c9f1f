import pytest
from hypothesis import strategies as st

from capp_emu.core import CappConfig, CappState
from capp_emu.driver import Embedded


def make_state(word_bits, cells, tags=None):
    state = CappState(CappConfig(word_bits, len(cells)))
    state.load_cells(cells)
    if tags is not None:
        state.tags[:] = [c == "1" for c in tags]
    return state


@st.composite
def states(draw, widths=(8, 16, 24, 32), max_cells=12):
    width = draw(st.sampled_from(widths))
    n = draw(st.integers(1, max_cells))
    words = st.integers(0, 2**width - 1)
    cells = draw(st.lists(words, min_size=n, max_size=n))
    state = CappState(CappConfig(width, n))
    state.load_cells(cells)
    state.tags[:] = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    state.load_comparand(draw(words))
    state.load_mask(draw(words))
    return state


@pytest.fixture
def embedded():
    """Factory for in-process devices; all are closed at teardown."""
    opened = []

    def factory(word_bits=8, num_cells=4, image=(), tracer=None):
        emb = Embedded(CappConfig(word_bits, num_cells), image=image, tracer=tracer)
        opened.append(emb)
        return emb

    yield factory
    for emb in opened:
        emb.close()
