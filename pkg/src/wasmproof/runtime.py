"""Runtime state shared by both interpreters: stores, memories, instances,
execution results, and the injectable memory-growth policy."""

import copy
from dataclasses import dataclass, field
from typing import NamedTuple

from .ast import MAX_PAGES, PAGE_SIZE, Module
from .numerics import Trap  # re-exported for callers


class Value(NamedTuple):
    type: str
    bits: int


class Normal(NamedTuple):
    values: tuple


class Break(NamedTuple):
    depth: int
    values: tuple


class Return(NamedTuple):
    values: tuple


class TrapResult:
    __slots__ = ()

    def __repr__(self):
        return "Trap"

    def __eq__(self, other):
        return isinstance(other, TrapResult)

    def __hash__(self):
        return hash("TrapResult")


TRAP = TrapResult()


class OutOfFuel(Exception):
    """Raised when the step budget runs out (distinct from a trap)."""


class GrowPolicy:
    """Deterministic replacement for the nondeterministic growth failure.

    Decisions are a function of the request index, so two engines running
    the same program observe the same schedule without sharing state.
    """

    def __init__(self, kind="always", n=0, script=()):
        self.kind = kind
        self.n = n
        self.script = tuple(script)

    def allows(self, request_index):
        if self.kind == "always":
            return True
        if self.kind == "never":
            return False
        if self.kind == "fail-after":
            return request_index < self.n
        if self.kind == "scripted":
            if request_index < len(self.script):
                return bool(self.script[request_index])
            return False
        raise ValueError("unknown grow policy %r" % self.kind)

    @classmethod
    def parse(cls, text):
        if text == "always":
            return cls("always")
        if text == "never":
            return cls("never")
        if text.startswith("fail-after-"):
            return cls("fail-after", n=int(text[len("fail-after-"):]))
        if text.startswith("scripted:"):
            bits = [c == "1" for c in text[len("scripted:"):]]
            return cls("scripted", script=bits)
        raise ValueError("unknown grow policy %r" % text)


ALWAYS_GROW = GrowPolicy("always")


class MemoryInst:
    """Linear memory: a growable byte array, length always a whole page count."""

    __slots__ = ("data",)

    def __init__(self, pages=0, data=None):
        self.data = bytearray(pages * PAGE_SIZE) if data is None else data

    @property
    def page_count(self):
        return len(self.data) // PAGE_SIZE

    def copy(self):
        return MemoryInst(data=bytearray(self.data))


@dataclass
class Store:
    funcs: list = field(default_factory=list)
    mems: list = field(default_factory=list)
    globs: list = field(default_factory=list)  # bit patterns

    def copy(self):
        return Store(
            funcs=self.funcs,  # closures are immutable, shared
            mems=[m.copy() for m in self.mems],
            globs=list(self.globs),
        )


@dataclass
class Instance:
    faddrs: list = field(default_factory=list)
    maddr: int | None = None
    gaddrs: list = field(default_factory=list)


def instantiate(mod: Module):
    """Build the trivial store/instance pair for one encapsulated module."""
    store = Store(funcs=list(mod.funcs))
    inst = Instance(faddrs=list(range(len(mod.funcs))),
                    gaddrs=list(range(len(mod.globals))))
    store.globs = [g.init for g in mod.globals]
    if mod.memory is not None:
        if mod.memory > MAX_PAGES:
            raise ValueError("initial memory exceeds %d pages" % MAX_PAGES)
        inst.maddr = 0
        store.mems.append(MemoryInst(mod.memory))
    return store, inst


def mem_load(mem: MemoryInst, addr, off, t, packed=None):
    """Read a t value (or packed prefix) little-endian; trap when out of bounds."""
    from .ast import WIDTH
    from .numerics import signed, unsigned

    width = WIDTH[packed[0]] if packed else WIDTH[t]
    ea = (addr & 0xFFFFFFFF) + off
    data = mem.data
    if ea + width > len(data):
        raise Trap("out of bounds memory access")
    bits = int.from_bytes(data[ea:ea + width], "little")
    if packed:
        pt, sx = packed
        if sx == "s":
            bits = unsigned(t, signed(pt, bits))
    return bits


def mem_store(mem: MemoryInst, addr, off, t, bits, packed=None):
    from .ast import WIDTH

    width = WIDTH[packed] if packed else WIDTH[t]
    ea = (addr & 0xFFFFFFFF) + off
    data = mem.data
    if ea + width > len(data):
        raise Trap("out of bounds memory access")
    data[ea:ea + width] = (bits & ((1 << (8 * width)) - 1)).to_bytes(width, "little")


def mem_grow(mem: MemoryInst, delta, policy: GrowPolicy, request_index=0):
    """Attempt to add delta pages; returns the old page count or -1 (as u32)."""
    old = mem.page_count
    delta &= 0xFFFFFFFF
    if not policy.allows(request_index) or old + delta > MAX_PAGES:
        return 0xFFFFFFFF
    mem.data.extend(bytes(delta * PAGE_SIZE))
    return old
