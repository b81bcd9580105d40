"""Text-format parser for the supported subset.

The grammar is a strict s-expression form: every instruction is its own
parenthesized group (no folded operands), blocks carry explicit type
annotations via (param ...) / (result ...) groups, and calls may name their
target with $identifiers, resolved to indices here.
"""

import math
import struct

from . import sexpr
from .ast import (
    BITS, CVTOPS, LOAD_OPS, NUMERIC_OPS, STORE_OPS, UNSUPPORTED, VALUE_TYPES,
    Func, GlobalDef, Module, functype,
)
from .numerics import float_to_f32, float_to_f64, mask


class ParseError(Exception):
    def __init__(self, msg, line=0, col=0, kind="syntax"):
        super().__init__("%d:%d: %s" % (line, col, msg))
        self.msg = msg
        self.line = line
        self.col = col
        self.kind = kind


def _err(form, msg, kind="syntax"):
    line, col = sexpr.pos(form)
    return ParseError(msg, line, col, kind)


def _head(form):
    if not isinstance(form, sexpr.Node) or not form or not isinstance(form[0], str):
        raise _err(form, "expected a parenthesized form")
    return str(form[0])


def parse_int(atom, form=None):
    text = str(atom).replace("_", "")
    try:
        if text.lower().startswith("0x") or text.lower().startswith("-0x"):
            return int(text, 16)
        return int(text, 10)
    except ValueError:
        raise _err(form or atom, "bad integer literal '%s'" % atom, "lexical")


def parse_const(t, atom, form):
    text = str(atom)
    if t in ("i32", "i64"):
        v = parse_int(atom, form)
        w = BITS[t]
        if not (-(1 << (w - 1)) <= v < (1 << w)):
            raise _err(form, "constant out of range for %s: %s" % (t, text), "lexical")
        return v & mask(t)
    # float literal: decimal, hex-float, inf, nan, nan:0x<payload>
    neg = text.startswith("-")
    body = text[1:] if text[0] in "+-" else text
    if body.startswith("nan"):
        if body == "nan":
            bits = 0x7FC00000 if t == "f32" else 0x7FF8000000000000
        elif body.startswith("nan:0x"):
            payload = int(body[6:].replace("_", ""), 16)
            if t == "f32":
                if not 0 < payload < (1 << 23):
                    raise _err(form, "bad f32 NaN payload", "lexical")
                bits = 0x7F800000 | payload
            else:
                if not 0 < payload < (1 << 52):
                    raise _err(form, "bad f64 NaN payload", "lexical")
                bits = 0x7FF0000000000000 | payload
        else:
            raise _err(form, "bad float literal '%s'" % text, "lexical")
        if neg:
            bits |= 1 << (BITS[t] - 1)
        return bits
    if body == "inf":
        x = math.inf
    else:
        try:
            x = float.fromhex(body) if ("0x" in body.lower()) else float(body)
        except ValueError:
            raise _err(form, "bad float literal '%s'" % text, "lexical")
    if neg:
        x = -x
    return float_to_f32(x) if t == "f32" else float_to_f64(x)


def _parse_valtypes(items, form):
    out = []
    for a in items:
        if str(a) not in VALUE_TYPES:
            raise _err(form, "bad value type '%s'" % a)
        out.append(str(a))
    return out


def _parse_functype(groups, i, form):
    """Consume leading (param ...) and (result ...) groups; return (ft, next_i)."""
    params, results = [], []
    while i < len(groups) and isinstance(groups[i], sexpr.Node) and groups[i] and str(groups[i][0]) == "param":
        params.extend(_parse_valtypes(groups[i][1:], groups[i]))
        i += 1
    while i < len(groups) and isinstance(groups[i], sexpr.Node) and groups[i] and str(groups[i][0]) == "result":
        results.extend(_parse_valtypes(groups[i][1:], groups[i]))
        i += 1
    return functype(params, results), i


def _parse_memarg(items, form):
    align, offset = None, 0
    for a in items:
        text = str(a)
        if text.startswith("offset="):
            offset = parse_int(text[7:], form)
        elif text.startswith("align="):
            align = parse_int(text[6:], form)
        else:
            raise _err(form, "bad memory immediate '%s'" % text)
        if offset < 0 or (align is not None and align < 0):
            raise _err(form, "negative memory immediate")
    return align, offset


class _FuncEnv:
    def __init__(self):
        self.names = {}

    def resolve(self, atom, form):
        text = str(atom)
        if text.startswith("$"):
            if text not in self.names:
                raise _err(form, "unresolved function name '%s'" % text, "unresolved")
            return self.names[text]
        return parse_int(atom, form)


def _parse_instr(form, env):
    op = _head(form)
    args = form[1:]
    if op in UNSUPPORTED or op.startswith("call_indirect"):
        raise _err(form, "unsupported construct '%s'" % op, "unsupported")

    if op == "block" or op == "loop":
        ft, i = _parse_functype(args, 0, form)
        body = [_parse_instr(g, env) for g in args[i:]]
        return (op, ft, body)
    if op == "if":
        ft, i = _parse_functype(args, 0, form)
        then_body, else_body = None, []
        for g in args[i:]:
            h = _head(g)
            if h == "then":
                then_body = [_parse_instr(x, env) for x in g[1:]]
            elif h == "else":
                else_body = [_parse_instr(x, env) for x in g[1:]]
            else:
                raise _err(g, "if arms must be (then ...) / (else ...)")
        if then_body is None:
            raise _err(form, "if without (then ...)")
        return ("if", ft, then_body, else_body)
    if op == "br" or op == "br_if":
        if len(args) != 1:
            raise _err(form, "%s expects one label" % op)
        return (op, parse_int(args[0], form))
    if op == "br_table":
        if not args:
            raise _err(form, "br_table expects at least one label")
        labels = [parse_int(a, form) for a in args]
        return ("br_table", tuple(labels[:-1]), labels[-1])
    if op == "call":
        if len(args) != 1:
            raise _err(form, "call expects one target")
        return ("call", env.resolve(args[0], form))
    if op == "return":
        return ("return",)
    if op in ("nop", "drop", "select", "unreachable", "mem.size", "mem.grow"):
        if args:
            raise _err(form, "%s takes no immediates" % op)
        return (op,)
    if op in ("get_local", "set_local", "tee_local", "get_global", "set_global"):
        if len(args) != 1:
            raise _err(form, "%s expects an index" % op)
        idx = parse_int(args[0], form)
        if idx < 0:
            raise _err(form, "negative index")
        return (op, idx)
    if op.endswith(".const"):
        t = op[:-6]
        if t not in VALUE_TYPES:
            raise _err(form, "unknown opcode '%s'" % op, "opcode")
        if len(args) != 1:
            raise _err(form, "%s expects one literal" % op)
        return (op, parse_const(t, args[0], form))
    if op in LOAD_OPS or op in STORE_OPS:
        align, offset = _parse_memarg(args, form)
        return (op, align, offset)
    if op in NUMERIC_OPS:
        if args:
            raise _err(form, "%s takes no immediates" % op)
        return (op,)
    raise _err(form, "unknown opcode '%s'" % op, "opcode")


def _parse_func(form, env):
    items = form[1:]
    name = None
    i = 0
    if i < len(items) and isinstance(items[i], str) and str(items[i]).startswith("$"):
        name = str(items[i])
        i += 1
    ft, i = _parse_functype(items, i, form)
    local_types = []
    while i < len(items) and isinstance(items[i], sexpr.Node) and items[i] and str(items[i][0]) == "local":
        local_types.extend(_parse_valtypes(items[i][1:], items[i]))
        i += 1
    body = [_parse_instr(g, env) for g in items[i:]]
    return Func(type=ft, locals=tuple(local_types), body=body, name=name)


def _parse_global(form):
    items = form[1:]
    if len(items) != 2:
        raise _err(form, "global expects a type and a const initializer")
    tspec, init = items
    if isinstance(tspec, sexpr.Node):
        if len(tspec) != 2 or str(tspec[0]) != "mut":
            raise _err(tspec, "bad global type")
        mutable, t = True, str(tspec[1])
    else:
        mutable, t = False, str(tspec)
    if t not in VALUE_TYPES:
        raise _err(form, "bad global value type '%s'" % t)
    if _head(init) != "%s.const" % t:
        raise _err(init, "global initializer must be (%s.const k)" % t)
    if len(init) != 2:
        raise _err(init, "bad const initializer")
    return GlobalDef(mutable=mutable, type=t, init=parse_const(t, init[1], init))


def parse_module(text: str) -> Module:
    """Parse one module from text-format source."""
    try:
        forms = sexpr.parse_all(text)
    except sexpr.SexprError as e:
        raise ParseError(e.msg, e.line, e.col, "lexical")
    if len(forms) != 1:
        raise ParseError("expected exactly one (module ...) form", 1, 1)
    root = forms[0]
    if _head(root) != "module":
        raise _err(root, "expected (module ...)")

    env = _FuncEnv()
    func_forms = []
    mod = Module()
    seen_memory = False
    for field in root[1:]:
        h = _head(field)
        if h == "func":
            func_forms.append(field)
            # pre-register names so calls can be forward references
            if len(field) > 1 and isinstance(field[1], str) and str(field[1]).startswith("$"):
                fname = str(field[1])
                if fname in env.names:
                    raise _err(field, "duplicate function name '%s'" % fname)
                env.names[fname] = len(func_forms) - 1
        elif h == "global":
            mod.globals.append(_parse_global(field))
        elif h == "memory":
            if seen_memory:
                raise _err(field, "at most one memory")
            if len(field) != 2:
                raise _err(field, "memory expects an initial page count")
            pages = parse_int(field[1], field)
            if pages < 0:
                raise _err(field, "negative page count")
            mod.memory = pages
            seen_memory = True
        elif h in UNSUPPORTED:
            raise _err(field, "unsupported construct '%s'" % h, "unsupported")
        else:
            raise _err(field, "unknown module field '%s'" % h)
    for ff in func_forms:
        mod.funcs.append(_parse_func(ff, env))
    return mod


def parse_module_file(path) -> Module:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_module(fh.read())
