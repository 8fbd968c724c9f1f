"""Self-checking demo programs.

Each demo drives a device through a :class:`~capp_emu.driver.Client`,
prints what it is doing, and compares every answer with a replay of the
same driver calls on the reference oracle (plus a direct scan where that
is simpler). A demo returns 0 when everything agreed and 1 otherwise.
"""

import random

from capp_emu.driver import SearchQuery
from capp_emu.image import format_word
from capp_emu.oracle import OracleClient, OracleState


class _Checker:
    def __init__(self, out):
        self.out = out
        self.failures = 0

    def say(self, text=""):
        self.out.write(text + "\n")

    def check(self, label, got, want):
        if got == want:
            return True
        self.failures += 1
        self.say(f"  MISMATCH {label}: device {got!r}, oracle {want!r}")
        return False


def _clients(client):
    """The device client and an oracle client starting from the same empty memory."""
    cfg = client.config
    client.load_image([])
    return client, OracleClient(OracleState(cfg.word_bits, cfg.num_cells))


def lookup(client, out) -> int:
    """Exact-match key/value table: key in the high half, value in the low half."""
    ck = _Checker(out)
    cfg = client.config
    half = cfg.word_bits // 2
    value_mask = (1 << half) - 1
    rng = random.Random(7312)
    count = min(cfg.num_cells, 8, 2**half - 1)
    keys = rng.sample(range(1, 2**half), count + 1)
    missing = keys.pop()
    table = {k: rng.randrange(2**half) for k in keys}
    words = [(k << half) | v for k, v in table.items()]

    ck.say(f"lookup table: {count} entries, {half}-bit keys and values")
    dev, ref = _clients(client)
    placed = dev.load_words(words, empty_pattern=0)
    ck.check("entries placed", placed, ref.load_words(words, empty_pattern=0))
    ck.say(f"inserted {placed} entries with the free-slot idiom")

    for key in keys + [missing]:
        q = SearchQuery(key << half, value_mask)
        answers = []
        for c in (dev, ref):
            c.search(q)
            answers.append((c.some_none(), c.read_word() & value_mask))
        (hit, value), want = answers
        ck.check(f"key {key:#x}", (hit, value), want)
        if hit:
            ck.check(f"key {key:#x} vs table", value, table[key])
            ck.say(f"  key {key:#0{half // 4 + 2}x} -> {value:#0{half // 4 + 2}x}")
        else:
            ck.check(f"key {key:#x} absent", key in table, False)
            ck.say(f"  key {key:#0{half // 4 + 2}x} -> not found")
    ck.say("lookup: ok" if not ck.failures else f"lookup: {ck.failures} mismatches")
    return 0 if not ck.failures else 1


def ternary(client, out) -> int:
    """Classify stored words against masked rules, first responder wins."""
    ck = _Checker(out)
    cfg = client.config
    width = cfg.word_bits
    rng = random.Random(48)
    words = [rng.getrandbits(width) for _ in range(cfg.num_cells)]
    top = 1 << (width - 1)
    low4 = 0xF
    rules = [
        ("top bit set", SearchQuery(top, cfg.all_ones ^ top)),
        ("low nibble 0x5", SearchQuery(0x5, cfg.all_ones ^ low4)),
        ("even", SearchQuery(0, cfg.all_ones ^ 1)),
        ("exact first word", SearchQuery(words[0], 0)),
        ("everything", SearchQuery(0, cfg.all_ones)),
    ]

    ck.say(f"ternary classification over {cfg.num_cells} random {width}-bit words")
    dev, ref = _clients(client)
    dev.load_image(words)
    ref.load_image(words)
    for name, q in rules:
        scan = [i for i, w in enumerate(words) if (w ^ q.comparand) & ~q.mask == 0]
        result = []
        for c in (dev, ref):
            c.search(q)
            some = c.some_none()
            combined = c.read_word()
            c.select_first()
            first = c.read_word()
            result.append((some, combined, first))
        ck.check(name, result[0], result[1])
        some, combined, first = result[0]
        ck.check(f"{name} some/none vs scan", some, bool(scan))
        if scan:
            ck.check(f"{name} first vs scan", first, words[scan[0]])
            ck.say(f"  {name:<17} {len(scan):>3} hits, OR {format_word(combined, cfg)}, "
                   f"first {format_word(first, cfg)}")
        else:
            ck.say(f"  {name:<17}   0 hits")
    ck.say("ternary: ok" if not ck.failures else f"ternary: {ck.failures} mismatches")
    return 0 if not ck.failures else 1


def enumerate_demo(client, out) -> int:
    """Walk every responder of a masked query in cell order."""
    ck = _Checker(out)
    cfg = client.config
    width = cfg.word_bits
    fresh_bit = width - 1
    fresh = 1 << fresh_bit
    rng = random.Random(2020)
    words = [fresh | (rng.randrange(4) << (width - 3)) | rng.getrandbits(width - 3)
             for _ in range(cfg.num_cells)]
    field = 0b11 << (width - 3)
    pattern = SearchQuery(0b01 << (width - 3), cfg.all_ones ^ field)
    scan = [w for w in words if (w ^ pattern.comparand) & field == 0]

    ck.say(f"enumerate cells whose 2-bit field (bits {width - 3}..{width - 2}) is 01")
    dev, ref = _clients(client)
    dev.load_image(words)
    ref.load_image(words)
    got = dev.enumerate_matches(pattern, fresh_bit)
    ck.check("responders", got, ref.enumerate_matches(pattern, fresh_bit))
    ck.check("responders vs scan", got, scan)
    for w in got:
        ck.say(f"  {format_word(w, cfg)}")
    after = dev.dump_image()
    ck.check("memory restored", after, words)
    ck.say(f"{len(got)} responders, memory restored: {after == words}")
    ck.say("enumerate: ok" if not ck.failures else f"enumerate: {ck.failures} mismatches")
    return 0 if not ck.failures else 1


DEMOS = {
    "lookup": lookup,
    "ternary": ternary,
    "enumerate": enumerate_demo,
}
