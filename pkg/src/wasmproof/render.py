"""Printer for the text format; parse(render(m)) is structurally m."""

from .ast import BITS, LOAD_OPS, STORE_OPS, Module
from .numerics import f32_to_float, f64_to_float, is_nan_bits, signed


def render_const(t, bits):
    if t in ("i32", "i64"):
        return str(signed(t, bits))
    if is_nan_bits(t, bits):
        sign = "-" if bits >> (BITS[t] - 1) else ""
        payload = bits & ((1 << (23 if t == "f32" else 52)) - 1)
        return "%snan:0x%x" % (sign, payload)
    x = f32_to_float(bits) if t == "f32" else f64_to_float(bits)
    if x != x or x in (float("inf"), float("-inf")):
        return "-inf" if x < 0 else "inf"
    if x == int(x) and abs(x) < 1e15:
        sign = "-" if (x == 0 and bits >> (BITS[t] - 1)) else ""
        return "%s%d" % (sign, int(x)) if not sign else "-0"
    return x.hex()


def _render_ft(ft):
    params, results = ft
    parts = []
    if params:
        parts.append("(param %s)" % " ".join(params))
    if results:
        parts.append("(result %s)" % " ".join(results))
    return parts


def _render_memarg(op, align, offset):
    parts = [op]
    if offset:
        parts.append("offset=%d" % offset)
    if align is not None:
        parts.append("align=%d" % align)
    return "(%s)" % " ".join(parts)


def render_instr(instr, indent=0):
    pad = "  " * indent
    op = instr[0]
    if op in ("block", "loop"):
        head = [op] + _render_ft(instr[1])
        lines = [pad + "(" + " ".join(head)]
        for sub in instr[2]:
            lines.append(render_instr(sub, indent + 1))
        lines[-1] += ")"
        return "\n".join(lines)
    if op == "if":
        head = ["if"] + _render_ft(instr[1])
        lines = [pad + "(" + " ".join(head)]
        for arm, body in (("then", instr[2]), ("else", instr[3])):
            if arm == "else" and not body:
                continue
            arm_lines = [pad + "  (" + arm]
            for sub in body:
                arm_lines.append(render_instr(sub, indent + 2))
            arm_lines[-1] += ")"
            lines.extend(arm_lines)
        lines[-1] += ")"
        return "\n".join(lines)
    if op == "br_table":
        labels = list(instr[1]) + [instr[2]]
        return pad + "(br_table %s)" % " ".join(str(x) for x in labels)
    if op.endswith(".const"):
        return pad + "(%s %s)" % (op, render_const(op[:-6], instr[1]))
    if op in LOAD_OPS or op in STORE_OPS:
        return pad + _render_memarg(op, instr[1], instr[2])
    if len(instr) == 1:
        return pad + "(%s)" % op
    return pad + "(%s %s)" % (op, " ".join(str(x) for x in instr[1:]))


def render_module(mod: Module) -> str:
    lines = ["(module"]
    if mod.memory is not None:
        lines.append("  (memory %d)" % mod.memory)
    for g in mod.globals:
        tspec = "(mut %s)" % g.type if g.mutable else g.type
        lines.append("  (global %s (%s.const %s))" % (tspec, g.type, render_const(g.type, g.init)))
    for f in mod.funcs:
        head = ["func"]
        if f.name:
            head.append(f.name)
        head.extend(_render_ft(f.type))
        if f.locals:
            head.append("(local %s)" % " ".join(f.locals))
        lines.append("  (" + " ".join(head))
        for instr in f.body:
            lines.append(render_instr(instr, 2))
        lines[-1] += ")"
    lines[-1] += ")" if len(lines) > 1 else ""
    if len(lines) == 1:
        return "(module)"
    return "\n".join(lines) + "\n"
