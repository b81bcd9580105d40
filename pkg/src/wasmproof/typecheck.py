"""Type system for the subset.

Establishes the statically known stack shape at every program point,
which the assertion language's stack part relies on.  Dead code after
br/return/unreachable/br_table is checked against a polymorphic stack.
"""

from dataclasses import dataclass, field

from .ast import (
    BINOPS, BITS, CVTOPS, FLOAT_TYPES, INT_TYPES, LOAD_OPS, RELOPS, STORE_OPS,
    TESTOPS, UNOPS, VALUE_TYPES, Module,
)

ANY = "any"  # polymorphic value produced while checking dead code

POLYMORPHIC = object()  # instr_effect result after an unconditional transfer


class TypecheckError(Exception):
    def __init__(self, msg, kind="type mismatch"):
        super().__init__(msg)
        self.kind = kind


@dataclass
class TypingContext:
    locals: tuple = ()
    globals: tuple = ()  # (mutable, valtype) pairs
    labels: list = field(default_factory=list)  # innermost first; value types carried by br
    return_: tuple | None = None
    funcs: tuple = ()
    has_memory: bool = False


class _State:
    __slots__ = ("stack", "unreachable")

    def __init__(self, stack=(), unreachable=False):
        self.stack = list(stack)
        self.unreachable = unreachable

    def push(self, t):
        self.stack.append(t)

    def pop(self, expected=None):
        if not self.stack:
            if self.unreachable:
                return expected or ANY
            raise TypecheckError("stack underflow", "stack underflow")
        t = self.stack.pop()
        if expected is not None and t != expected and t is not ANY:
            raise TypecheckError("expected %s on stack, found %s" % (expected, t))
        return t

    def mark_unreachable(self):
        self.stack = []
        self.unreachable = True


def _check_label(ctx, i):
    if not (0 <= i < len(ctx.labels)):
        raise TypecheckError("bad label depth: br target %d exceeds nesting depth %d"
                             % (i, len(ctx.labels)), "bad label depth")
    return ctx.labels[i]


def _pop_values(state, types):
    for t in reversed(types):
        state.pop(t)


def _require_memory(ctx, op):
    if not ctx.has_memory:
        raise TypecheckError("%s requires a declared memory" % op, "missing memory")


def _apply(ctx, instr, state):
    op = instr[0]

    if op.endswith(".const") and op[:-6] in VALUE_TYPES:
        state.push(op[:-6])
        return
    if op in UNOPS or op in TESTOPS:
        t = op.split(".", 1)[0]
        state.pop(t)
        state.push("i32" if op in TESTOPS else t)
        return
    if op in BINOPS:
        t = op.split(".", 1)[0]
        state.pop(t)
        state.pop(t)
        state.push(t)
        return
    if op in RELOPS:
        t = op.split(".", 1)[0]
        state.pop(t)
        state.pop(t)
        state.push("i32")
        return
    if op in CVTOPS:
        dst, src, _sx = CVTOPS[op]
        state.pop(src)
        state.push(dst)
        return
    if op == "nop":
        return
    if op == "drop":
        state.pop()
        return
    if op == "select":
        state.pop("i32")
        t1 = state.pop()
        t2 = state.pop(t1 if t1 is not ANY else None)
        state.push(t2 if t1 is ANY else t1)
        return
    if op == "unreachable":
        state.mark_unreachable()
        return
    if op == "get_local":
        if instr[1] >= len(ctx.locals):
            raise TypecheckError("undeclared local %d" % instr[1], "undeclared local")
        state.push(ctx.locals[instr[1]])
        return
    if op in ("set_local", "tee_local"):
        if instr[1] >= len(ctx.locals):
            raise TypecheckError("undeclared local %d" % instr[1], "undeclared local")
        t = ctx.locals[instr[1]]
        state.pop(t)
        if op == "tee_local":
            state.push(t)
        return
    if op == "get_global":
        if instr[1] >= len(ctx.globals):
            raise TypecheckError("undeclared global %d" % instr[1], "undeclared global")
        state.push(ctx.globals[instr[1]][1])
        return
    if op == "set_global":
        if instr[1] >= len(ctx.globals):
            raise TypecheckError("undeclared global %d" % instr[1], "undeclared global")
        mut, t = ctx.globals[instr[1]]
        if not mut:
            raise TypecheckError("global %d is immutable" % instr[1], "immutable global")
        state.pop(t)
        return
    if op in LOAD_OPS:
        _require_memory(ctx, op)
        t, _pt, _sx = LOAD_OPS[op]
        state.pop("i32")
        state.push(t)
        return
    if op in STORE_OPS:
        _require_memory(ctx, op)
        t, _pt = STORE_OPS[op]
        state.pop(t)
        state.pop("i32")
        return
    if op == "mem.size":
        _require_memory(ctx, op)
        state.push("i32")
        return
    if op == "mem.grow":
        _require_memory(ctx, op)
        state.pop("i32")
        state.push("i32")
        return
    if op in ("block", "loop"):
        params, results = instr[1]
        _pop_values(state, params)
        inner_label = tuple(results) if op == "block" else tuple(params)
        check_body(ctx, instr[2], instr[1], inner_label)
        for t in results:
            state.push(t)
        return
    if op == "if":
        params, results = instr[1]
        state.pop("i32")
        _pop_values(state, params)
        check_body(ctx, instr[2], instr[1], tuple(results))
        check_body(ctx, instr[3], instr[1], tuple(results))
        for t in results:
            state.push(t)
        return
    if op == "br":
        _pop_values(state, _check_label(ctx, instr[1]))
        state.mark_unreachable()
        return
    if op == "br_if":
        state.pop("i32")
        types = _check_label(ctx, instr[1])
        _pop_values(state, types)
        for t in types:
            state.push(t)
        return
    if op == "br_table":
        state.pop("i32")
        default_types = _check_label(ctx, instr[2])
        for lab in instr[1]:
            if _check_label(ctx, lab) != default_types:
                raise TypecheckError("br_table targets disagree on arity/types")
        _pop_values(state, default_types)
        state.mark_unreachable()
        return
    if op == "return":
        if ctx.return_ is None:
            raise TypecheckError("return outside a function")
        _pop_values(state, ctx.return_)
        state.mark_unreachable()
        return
    if op == "call":
        if instr[1] >= len(ctx.funcs):
            raise TypecheckError("call target %d out of range" % instr[1], "bad call target")
        params, results = ctx.funcs[instr[1]]
        _pop_values(state, params)
        for t in results:
            state.push(t)
        return
    raise TypecheckError("unknown instruction %r" % (op,), "unknown opcode")


def check_body(ctx, body, ft, inner_label):
    """Check a block body against its annotation; inner_label is what br 0 carries."""
    params, results = ft
    inner_ctx = TypingContext(
        locals=ctx.locals, globals=ctx.globals,
        labels=[tuple(inner_label)] + list(ctx.labels),
        return_=ctx.return_, funcs=ctx.funcs, has_memory=ctx.has_memory,
    )
    state = _State(params)
    for instr in body:
        _apply(inner_ctx, instr, state)
    if state.unreachable:
        _pop_values(state, results)
        return
    if len(state.stack) != len(results) or any(
        a != b and a is not ANY for a, b in zip(state.stack, results)
    ):
        raise TypecheckError(
            "block body leaves %r, annotation requires %r" % (state.stack, list(results))
        )


def instr_effect(ctx: TypingContext, instr, stack):
    """Effect of one instruction on an explicit stack shape.

    Returns the post-stack, or POLYMORPHIC after an unconditional
    control transfer (the remainder is dead code).
    """
    state = _State(stack)
    _apply(ctx, instr, state)
    if state.unreachable:
        return POLYMORPHIC
    return list(state.stack)


def module_context(mod: Module, func: "Func" = None) -> TypingContext:
    ctx = TypingContext(
        globals=tuple((g.mutable, g.type) for g in mod.globals),
        funcs=tuple(f.type for f in mod.funcs),
        has_memory=mod.memory is not None,
    )
    if func is not None:
        ctx.locals = tuple(func.type[0]) + tuple(func.locals)
        ctx.return_ = tuple(func.type[1])
    return ctx


def typecheck_module(mod: Module):
    """Check every function body against its declared type.

    Returns a list of error strings; an empty list means the module is
    well-typed.
    """
    errors = []
    for i, f in enumerate(mod.funcs):
        ctx = module_context(mod, f)
        label = f.name or ("func %d" % i)
        if len(f.type[1]) > 1:
            errors.append("%s: multiple results are not supported" % label)
            continue
        try:
            # the body runs inside an implicit block of the result type
            check_body(ctx, f.body, ((), f.type[1]), tuple(f.type[1]))
        except TypecheckError as e:
            errors.append("%s: %s" % (label, e))
    return errors


def assert_well_typed(mod: Module):
    errors = typecheck_module(mod)
    if errors:
        raise TypecheckError("; ".join(errors))
    return mod
