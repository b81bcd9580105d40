"""Big-step evaluator with Break/Return results and label arities.

Execution of a configuration yields an updated store and locals plus one of
four results: normal termination with values, a trap, an in-progress break
carrying its remaining depth, or an in-progress return.  Label arities
(labs) and the return arity (ret) fix how many values a Break/Return
carries.  A fuel budget separates divergence from traps.
"""

from dataclasses import dataclass, field

from .ast import CVTOPS, LOAD_OPS, MAX_PAGES, PAGE_SIZE, STORE_OPS, WIDTH
from .numerics import (
    Trap, compile_binop, compile_cvtop, compile_relop, compile_testop,
    compile_unop, signed, unsigned,
)
from .runtime import (
    ALWAYS_GROW, Break, GrowPolicy, Instance, MemoryInst, Normal, OutOfFuel,
    Return, Store, TRAP, instantiate,
)
from . import ast as _ast

# opcode kind codes for the dispatch loop
(_CONST, _GET_LOCAL, _SET_LOCAL, _TEE_LOCAL, _GET_GLOBAL, _SET_GLOBAL,
 _UNOP, _BINOP, _TESTOP, _RELOP, _CVTOP, _LOAD, _STORE, _MEMSIZE, _MEMGROW,
 _NOP, _DROP, _SELECT, _UNREACHABLE, _BLOCK, _LOOP, _IF, _BR, _BR_IF,
 _BR_TABLE, _RETURN, _CALL) = range(27)

_KIND = {}
_NUMFN = {}
for _t in _ast.VALUE_TYPES:
    _KIND[_t + ".const"] = _CONST
for _op in _ast.UNOPS:
    _KIND[_op] = _UNOP
    _NUMFN[_op] = compile_unop(_op)
for _op in _ast.BINOPS:
    _KIND[_op] = _BINOP
    _NUMFN[_op] = compile_binop(_op)
for _op in _ast.TESTOPS:
    _KIND[_op] = _TESTOP
    _NUMFN[_op] = compile_testop(_op)
for _op in _ast.RELOPS:
    _KIND[_op] = _RELOP
    _NUMFN[_op] = compile_relop(_op)
for _op, (_d, _s, _sx) in CVTOPS.items():
    _KIND[_op] = _CVTOP
    _NUMFN[_op] = compile_cvtop(_op, _d, _s, _sx)

_LOADINFO = {}
for _op, (_t, _pt, _sx) in LOAD_OPS.items():
    _KIND[_op] = _LOAD
    _LOADINFO[_op] = (WIDTH[_pt] if _pt else WIDTH[_t], _pt, _sx, _t)
_STOREINFO = {}
for _op, (_t, _pt) in STORE_OPS.items():
    _KIND[_op] = _STORE
    _STOREINFO[_op] = (WIDTH[_pt] if _pt else WIDTH[_t],)

_KIND.update({
    "get_local": _GET_LOCAL, "set_local": _SET_LOCAL, "tee_local": _TEE_LOCAL,
    "get_global": _GET_GLOBAL, "set_global": _SET_GLOBAL,
    "mem.size": _MEMSIZE, "mem.grow": _MEMGROW,
    "nop": _NOP, "drop": _DROP, "select": _SELECT, "unreachable": _UNREACHABLE,
    "block": _BLOCK, "loop": _LOOP, "if": _IF, "br": _BR, "br_if": _BR_IF,
    "br_table": _BR_TABLE, "return": _RETURN, "call": _CALL,
})


@dataclass
class Config:
    store: Store
    locals: list
    stack: list  # value prefix, bit patterns (the lifted const prefix)
    code: list
    labs: tuple = ()
    ret: int | None = None
    inst: Instance = field(default_factory=Instance)


class _Run:
    """Mutable evaluation state threaded through one configuration run."""

    __slots__ = ("store", "inst", "fuel", "policy", "trace", "grow_count", "mem")

    def __init__(self, store, inst, fuel, policy, trace):
        self.store = store
        self.inst = inst
        self.fuel = fuel
        self.policy = policy or ALWAYS_GROW
        self.trace = trace
        self.grow_count = 0
        self.mem = store.mems[inst.maddr] if inst.maddr is not None else None


def eval_br(k, labs, stack):
    """The br rule: carry exactly labs!k values out, order preserved."""
    if not 0 <= k < len(labs):
        raise IndexError("br target %d out of range" % k)
    n = labs[k]
    if n > len(stack):
        raise IndexError("stack holds fewer than labs!%d values" % k)
    vals = tuple(stack[len(stack) - n:]) if n else ()
    return Break(k, vals)


def _eval_seq(st, code, stack, locs, labs, ret):
    """Returns None for normal completion (stack holds the values), or a
    ('br', k, vals) / ('ret', vals) signal."""
    for instr in code:
        st.fuel -= 1
        if st.fuel < 0:
            raise OutOfFuel()
        op = instr[0]
        kind = _KIND[op]

        if kind == _GET_LOCAL:
            stack.append(locs[instr[1]])
        elif kind == _CONST:
            stack.append(instr[1])
        elif kind == _BINOP:
            b = stack.pop()
            a = stack.pop()
            stack.append(_NUMFN[op](a, b))
        elif kind == _RELOP:
            b = stack.pop()
            a = stack.pop()
            stack.append(_NUMFN[op](a, b))
        elif kind == _SET_LOCAL:
            locs[instr[1]] = stack.pop()
        elif kind == _TEE_LOCAL:
            locs[instr[1]] = stack[-1]
        elif kind == _LOAD:
            width, pt, sx, t = _LOADINFO[op]
            ea = stack[-1] + instr[2]
            data = st.mem.data
            if ea + width > len(data):
                raise Trap("out of bounds memory access")
            bits = int.from_bytes(data[ea:ea + width], "little")
            if pt and sx == "s":
                bits = unsigned(t, signed(pt, bits))
            stack[-1] = bits
        elif kind == _STORE:
            width, = _STOREINFO[op]
            bits = stack.pop()
            ea = stack.pop() + instr[2]
            data = st.mem.data
            if ea + width > len(data):
                raise Trap("out of bounds memory access")
            data[ea:ea + width] = (bits & ((1 << (8 * width)) - 1)).to_bytes(width, "little")
        elif kind == _CALL:
            f = st.store.funcs[st.inst.faddrs[instr[1]]]
            n = len(f.type[0])
            m = len(f.type[1])
            if n:
                newlocs = stack[len(stack) - n:]
                del stack[len(stack) - n:]
            else:
                newlocs = []
            newlocs.extend([0] * len(f.locals))
            inner = []
            sig = _eval_seq(st, f.body, inner, newlocs, (m,), m)
            if sig is None:
                stack.extend(inner)
            elif sig[0] == "br":
                # depth 0 is the implicit function block; deeper is impossible
                stack.extend(sig[2])
            else:
                stack.extend(sig[1])
        elif kind == _BLOCK:
            (params, results), body = instr[1], instr[2]
            n = len(params)
            if n:
                inner = stack[len(stack) - n:]
                del stack[len(stack) - n:]
            else:
                inner = []
            sig = _eval_seq(st, body, inner, locs, (len(results),) + labs, ret)
            if sig is None:
                stack.extend(inner)
            else:
                if st.trace is not None:
                    _trace(st, sig)
                if sig[0] == "br":
                    if sig[1] == 0:
                        stack.extend(sig[2])
                    else:
                        return ("br", sig[1] - 1, sig[2])
                else:
                    return sig
        elif kind == _IF:
            c = stack.pop()
            (params, results), then_b, else_b = instr[1], instr[2], instr[3]
            body = then_b if c != 0 else else_b
            n = len(params)
            if n:
                inner = stack[len(stack) - n:]
                del stack[len(stack) - n:]
            else:
                inner = []
            sig = _eval_seq(st, body, inner, locs, (len(results),) + labs, ret)
            if sig is None:
                stack.extend(inner)
            else:
                if st.trace is not None:
                    _trace(st, sig)
                if sig[0] == "br":
                    if sig[1] == 0:
                        stack.extend(sig[2])
                    else:
                        return ("br", sig[1] - 1, sig[2])
                else:
                    return sig
        elif kind == _LOOP:
            (params, results), body = instr[1], instr[2]
            n = len(params)
            if n:
                args = stack[len(stack) - n:]
                del stack[len(stack) - n:]
            else:
                args = []
            inner_labs = (n,) + labs
            while True:
                inner = list(args)
                sig = _eval_seq(st, body, inner, locs, inner_labs, ret)
                if sig is None:
                    stack.extend(inner)
                    break
                if st.trace is not None:
                    _trace(st, sig)
                if sig[0] == "br":
                    if sig[1] == 0:
                        args = list(sig[2])
                        st.fuel -= 1
                        if st.fuel < 0:
                            raise OutOfFuel()
                        continue
                    return ("br", sig[1] - 1, sig[2])
                return sig
        elif kind == _BR:
            k = instr[1]
            n = labs[k]
            vals = tuple(stack[len(stack) - n:]) if n else ()
            assert len(vals) == n
            return ("br", k, vals)
        elif kind == _BR_IF:
            c = stack.pop()
            if c != 0:
                k = instr[1]
                n = labs[k]
                vals = tuple(stack[len(stack) - n:]) if n else ()
                return ("br", k, vals)
        elif kind == _BR_TABLE:
            c = stack.pop()
            targets, default = instr[1], instr[2]
            k = targets[c] if c < len(targets) else default
            n = labs[k]
            vals = tuple(stack[len(stack) - n:]) if n else ()
            return ("br", k, vals)
        elif kind == _RETURN:
            n = ret
            vals = tuple(stack[len(stack) - n:]) if n else ()
            assert len(vals) == (ret or 0)
            return ("ret", vals)
        elif kind == _UNOP or kind == _TESTOP or kind == _CVTOP:
            stack.append(_NUMFN[op](stack.pop()))
        elif kind == _DROP:
            stack.pop()
        elif kind == _SELECT:
            c = stack.pop()
            v2 = stack.pop()
            v1 = stack.pop()
            stack.append(v1 if c != 0 else v2)
        elif kind == _NOP:
            pass
        elif kind == _GET_GLOBAL:
            stack.append(st.store.globs[st.inst.gaddrs[instr[1]]])
        elif kind == _SET_GLOBAL:
            st.store.globs[st.inst.gaddrs[instr[1]]] = stack.pop()
        elif kind == _MEMSIZE:
            stack.append(st.mem.page_count)
        elif kind == _MEMGROW:
            delta = stack.pop()
            mem = st.mem
            old = mem.page_count
            ok = st.policy.allows(st.grow_count)
            st.grow_count += 1
            if not ok or old + delta > MAX_PAGES:
                stack.append(0xFFFFFFFF)
            else:
                mem.data.extend(bytes(delta * PAGE_SIZE))
                stack.append(old)
        elif kind == _UNREACHABLE:
            raise Trap("unreachable executed")
        else:  # pragma: no cover
            raise AssertionError("unhandled opcode %r" % op)
    return None


def _trace(st, sig):
    if sig[0] == "br":
        st.trace.append(Break(sig[1], tuple(sig[2])))
    else:
        st.trace.append(Return(tuple(sig[1])))


def eval_config(cfg: Config, fuel, policy=None, trace=None):
    """Run one configuration to completion.

    Returns (store, locals, result); result is Normal (carrying the final
    value stack), TRAP, Break, or Return.  Raises OutOfFuel when the budget
    is exhausted before completion.
    """
    st = _Run(cfg.store, cfg.inst, fuel, policy, trace)
    stack = list(cfg.stack)
    locs = list(cfg.locals)
    try:
        sig = _eval_seq(st, cfg.code, stack, locs, tuple(cfg.labs), cfg.ret)
    except Trap:
        return cfg.store, locs, TRAP
    if sig is None:
        return cfg.store, locs, Normal(tuple(stack))
    if sig[0] == "br":
        assert len(sig[2]) == cfg.labs[sig[1]]
        return cfg.store, locs, Break(sig[1], tuple(sig[2]))
    assert cfg.ret is not None and len(sig[1]) == cfg.ret
    return cfg.store, locs, Return(tuple(sig[1]))


def invoke(store: Store, inst: Instance, func_idx, args, fuel,
           policy=None, trace=None):
    """Call a function with raw bit-pattern arguments.

    Implements the call rule: fresh zero-initialized scratch locals, body
    wrapped in a block of the result type, Return converted to Normal at
    the function frame.  Returns (store, result).
    """
    f = store.funcs[inst.faddrs[func_idx]]
    n, m = len(f.type[0]), len(f.type[1])
    if len(args) != n:
        raise ValueError("expected %d arguments, got %d" % (n, len(args)))
    st = _Run(store, inst, fuel, policy, trace)
    locs = list(args) + [0] * len(f.locals)
    stack = []
    try:
        sig = _eval_seq(st, f.body, stack, locs, (m,), m)
    except Trap:
        return store, TRAP
    if sig is None:
        vals = tuple(stack)
    elif sig[0] == "br":
        vals = tuple(sig[2])
    else:
        vals = tuple(sig[1])
    assert len(vals) == m
    return store, Normal(vals)


def run_module(mod, func, args, fuel=10 ** 7, policy=None, trace=None):
    """Convenience: instantiate a module and invoke one function by name/index."""
    store, inst = instantiate(mod)
    idx = mod.func_index(func) if isinstance(func, str) else func
    return invoke(store, inst, idx, args, fuel, policy, trace)
