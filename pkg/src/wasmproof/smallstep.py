"""Small-step reduction semantics in the original style.

Configurations are instruction lists with values lifted to const
instructions, plus administrative label/local frames and a trap marker.
A br targeting a control construct breaks to it in a single step,
discarding everything in between (the coarse-grained semantics); the
differential harness compares terminals of this engine against the
big-step evaluator.
"""

from .ast import MAX_PAGES, PAGE_SIZE, VALUE_TYPES
from .numerics import Trap, signed, unsigned
from .runtime import ALWAYS_GROW, Instance, OutOfFuel
from .bigstep import (
    _KIND, _LOADINFO, _NUMFN, _STOREINFO,
    _BINOP, _BLOCK, _BR, _BR_IF, _BR_TABLE, _CALL, _CONST, _CVTOP, _DROP,
    _GET_GLOBAL, _GET_LOCAL, _IF, _LOAD, _LOOP, _MEMGROW, _MEMSIZE, _NOP,
    _RELOP, _RETURN, _SELECT, _SET_GLOBAL, _SET_LOCAL, _STORE, _TEE_LOCAL,
    _TESTOP, _UNOP, _UNREACHABLE,
)

_TRAP_I = ("trap",)
_LABEL = "label"
_LOCALF = "local"


class Stuck(Exception):
    """An ill-typed configuration; unreachable from validated code."""


class SSConfig:
    __slots__ = ("store", "locals", "code")

    def __init__(self, store, locals_, code):
        self.store = store
        self.locals = locals_
        self.code = code


def lift(values):
    """Lift raw values to i32-agnostic const instructions.

    Types are immaterial to the reduction rules; we use a neutral const tag
    holding the bit pattern so terminals compare on bits.
    """
    return [("const", v) for v in values]


def _is_const(item):
    op = item[0]
    return op == "const" or (op.endswith(".const") and op[:-6] in VALUE_TYPES)


def _const_bits(item):
    return item[1]


class _SS:
    __slots__ = ("store", "inst", "policy", "grow_count", "mem")

    def __init__(self, store, inst, policy):
        self.store = store
        self.inst = inst
        self.policy = policy or ALWAYS_GROW
        self.grow_count = 0
        self.mem = store.mems[inst.maddr] if inst.maddr is not None else None


def _step_seq(st, code, locs):
    """Try to perform one reduction inside code.

    Returns one of:
      ('step', new_code)      -- a reduction happened
      ('vals',)               -- code is all consts
      ('trapped',)            -- code is exactly [trap]
      ('br', k, vals)         -- a br redex wants to cross k more labels
      ('ret', vals)           -- a return redex propagating outward
    """
    # locate first non-const item
    p = 0
    n = len(code)
    while p < n and _is_const(code[p]):
        p += 1
    if p == n:
        return ("vals",)
    item = code[p]
    op = item[0]

    if op == "trap":
        if n == 1:
            return ("trapped",)
        return ("step", [_TRAP_I])

    if op == _LABEL:
        _, arity, cont, inner = item
        sub = _step_seq(st, inner, locs)
        tag = sub[0]
        if tag == "step":
            return ("step", code[:p] + [(_LABEL, arity, cont, sub[1])] + code[p + 1:])
        if tag == "vals":
            return ("step", code[:p] + inner + code[p + 1:])
        if tag == "trapped":
            return ("step", code[:p] + [_TRAP_I] + code[p + 1:])
        if tag == "br":
            k, vals = sub[1], sub[2]
            if k == 0:
                taken = vals[len(vals) - arity:] if arity else []
                new = code[:p] + lift(taken) + list(cont) + code[p + 1:]
                return ("step", new)
            return ("br", k - 1, vals)
        return sub  # ('ret', vals) passes through labels

    if op == _LOCALF:
        _, arity, flocs, inner = item
        sub = _step_seq(st, inner, flocs)
        tag = sub[0]
        if tag == "step":
            return ("step", code[:p] + [(_LOCALF, arity, flocs, sub[1])] + code[p + 1:])
        if tag == "vals":
            vals = [_const_bits(x) for x in inner]
            return ("step", code[:p] + lift(vals) + code[p + 1:])
        if tag == "trapped":
            return ("step", code[:p] + [_TRAP_I] + code[p + 1:])
        if tag == "ret":
            vals = sub[1]
            taken = vals[len(vals) - arity:] if arity else []
            return ("step", code[:p] + lift(taken) + code[p + 1:])
        raise Stuck("br escaping a function frame")

    kind = _KIND.get(op)
    if kind is None:
        raise Stuck("unknown instruction %r" % (op,))

    def have(k):
        if p < k:
            raise Stuck("missing const arguments for %s" % op)
        return [_const_bits(code[i]) for i in range(p - k, p)]

    def out(consumed, produced_items):
        return ("step", code[:p - consumed] + produced_items + code[p + 1:])

    if kind == _BINOP or kind == _RELOP:
        a, b = have(2)
        try:
            r = _NUMFN[op](a, b)
        except Trap:
            return out(2, [_TRAP_I])
        return out(2, [("const", r)])
    if kind == _UNOP or kind == _TESTOP or kind == _CVTOP:
        (a,) = have(1)
        try:
            r = _NUMFN[op](a)
        except Trap:
            return out(1, [_TRAP_I])
        return out(1, [("const", r)])
    if kind == _DROP:
        have(1)
        return out(1, [])
    if kind == _SELECT:
        v1, v2, c = have(3)
        return out(3, [("const", v1 if c != 0 else v2)])
    if kind == _NOP:
        return out(0, [])
    if kind == _UNREACHABLE:
        return out(0, [_TRAP_I])
    if kind == _GET_LOCAL:
        return out(0, [("const", locs[item[1]])])
    if kind == _SET_LOCAL:
        (v,) = have(1)
        locs[item[1]] = v
        return out(1, [])
    if kind == _TEE_LOCAL:
        (v,) = have(1)
        locs[item[1]] = v
        return out(1, [("const", v)])
    if kind == _GET_GLOBAL:
        return out(0, [("const", st.store.globs[st.inst.gaddrs[item[1]]])])
    if kind == _SET_GLOBAL:
        (v,) = have(1)
        st.store.globs[st.inst.gaddrs[item[1]]] = v
        return out(1, [])
    if kind == _LOAD:
        (addr,) = have(1)
        width, pt, sx, t = _LOADINFO[op]
        ea = addr + item[2]
        data = st.mem.data
        if ea + width > len(data):
            return out(1, [_TRAP_I])
        bits = int.from_bytes(data[ea:ea + width], "little")
        if pt and sx == "s":
            bits = unsigned(t, signed(pt, bits))
        return out(1, [("const", bits)])
    if kind == _STORE:
        addr, v = have(2)
        (width,) = _STOREINFO[op]
        ea = addr + item[2]
        data = st.mem.data
        if ea + width > len(data):
            return out(2, [_TRAP_I])
        data[ea:ea + width] = (v & ((1 << (8 * width)) - 1)).to_bytes(width, "little")
        return out(2, [])
    if kind == _MEMSIZE:
        return out(0, [("const", st.mem.page_count)])
    if kind == _MEMGROW:
        (delta,) = have(1)
        mem = st.mem
        old = mem.page_count
        ok = st.policy.allows(st.grow_count)
        st.grow_count += 1
        if not ok or old + delta > MAX_PAGES:
            return out(1, [("const", 0xFFFFFFFF)])
        mem.data.extend(bytes(delta * PAGE_SIZE))
        return out(1, [("const", old)])
    if kind == _BLOCK:
        (params, results), body = item[1], item[2]
        npar = len(params)
        args = have(npar)
        inner = lift(args) + list(body)
        return out(npar, [(_LABEL, len(results), [], inner)])
    if kind == _LOOP:
        (params, results), body = item[1], item[2]
        npar = len(params)
        args = have(npar)
        inner = lift(args) + list(body)
        return out(npar, [(_LABEL, len(params), [item], inner)])
    if kind == _IF:
        (c,) = have(1)
        ft, then_b, else_b = item[1], item[2], item[3]
        chosen = then_b if c != 0 else else_b
        return out(1, [("block", ft, chosen)])
    if kind == _BR:
        vals = [_const_bits(code[i]) for i in range(0, p)]
        return ("br", item[1], vals)
    if kind == _BR_IF:
        (c,) = have(1)
        if c == 0:
            return out(1, [])
        return out(1, [("br", item[1])])
    if kind == _BR_TABLE:
        (c,) = have(1)
        targets, default = item[1], item[2]
        k = targets[c] if c < len(targets) else default
        return out(1, [("br", k)])
    if kind == _RETURN:
        vals = [_const_bits(code[i]) for i in range(0, p)]
        return ("ret", vals)
    if kind == _CALL:
        f = st.store.funcs[st.inst.faddrs[item[1]]]
        npar, nres = len(f.type[0]), len(f.type[1])
        args = have(npar)
        flocs = list(args) + [0] * len(f.locals)
        inner = [("block", ((), f.type[1]), f.body)]
        return out(npar, [(_LOCALF, nres, flocs, inner)])
    if kind == _CONST:
        raise Stuck("const cannot be a redex")
    raise Stuck("unhandled op %r" % (op,))  # pragma: no cover


def step(cfg: SSConfig, inst: Instance, policy=None):
    """One reduction.  Returns ('step', cfg') | ('values', vals) | ('trap',).

    Raises Stuck on ill-typed configurations (never reachable from
    validated code).
    """
    st = _SS(cfg.store, inst, policy)
    res = _step_seq(st, cfg.code, cfg.locals)
    tag = res[0]
    if tag == "step":
        return ("step", SSConfig(cfg.store, cfg.locals, res[1]))
    if tag == "vals":
        return ("values", tuple(_const_bits(x) for x in cfg.code))
    if tag == "trapped":
        return ("trap",)
    raise Stuck("%s escaping at top level" % tag)


def run_to_terminal(cfg: SSConfig, inst: Instance, fuel, policy=None):
    """Iterate step to a terminal; raises OutOfFuel past the budget."""
    st = _SS(cfg.store, inst, policy)
    code = cfg.code
    locs = cfg.locals
    while True:
        res = _step_seq(st, code, locs)
        tag = res[0]
        if tag == "vals":
            return ("values", tuple(_const_bits(x) for x in code))
        if tag == "trapped":
            return ("trap",)
        if tag != "step":
            raise Stuck("%s escaping at top level" % tag)
        code = res[1]
        fuel -= 1
        if fuel < 0:
            raise OutOfFuel()
