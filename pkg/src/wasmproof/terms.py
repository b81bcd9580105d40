"""Logical terms: constants, variables, and operator applications.

Terms are nested tuples: ('c', value), ('v', name), or (op, arg, ...).
Values are exact Python ints (wasm i32/i64 values appear as unsigned bit
patterns), floats, tuples (lists), or frozensets.  Local and global
variables use the reserved names l0, l1, ... and g0, g1, ....

The default integer domain coincides with i32 on the corpus assertions
because their side conditions rule out overflow; wasm operators evaluate
with true wrapping semantics, mathematical operators evaluate exactly.
"""

from .ast import BINOPS, CVTOPS, RELOPS, TESTOPS, UNOPS
from .numerics import (
    Trap, apply_binop, apply_cvtop, apply_relop, apply_testop, apply_unop,
)


class Undefined(Exception):
    """Term evaluation failed: unbound variable or partial operator."""


def C(value):
    if isinstance(value, list):
        value = tuple(value)
    if isinstance(value, set):
        value = frozenset(value)
    return ("c", value)


def V(name):
    return ("v", name)


def A(op, *args):
    return (op,) + tuple(args)


ZERO = C(0)
ONE = C(1)


def is_const(t):
    return t[0] == "c"


def is_var(t):
    return t[0] == "v"


def local_var(i):
    return ("v", "l%d" % i)


def global_var(i):
    return ("v", "g%d" % i)


def is_local_name(name):
    return name[0] == "l" and name[1:].isdigit()


def is_global_name(name):
    return name[0] == "g" and name[1:].isdigit()


def fv(term, acc=None):
    out = set() if acc is None else acc
    tag = term[0]
    if tag == "v":
        out.add(term[1])
    elif tag != "c":
        for a in term[1:]:
            fv(a, out)
    return out


def subst(term, mapping):
    """Capture-free substitution of variables by terms."""
    tag = term[0]
    if tag == "c":
        return term
    if tag == "v":
        return mapping.get(term[1], term)
    changed = False
    args = []
    for a in term[1:]:
        na = subst(a, mapping)
        changed = changed or (na is not a)
        args.append(na)
    return (tag,) + tuple(args) if changed else term


_MATH_BIN = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
}


def _as_int(v):
    if not isinstance(v, int):
        raise Undefined("expected an integer, got %r" % (v,))
    return v


def _as_list(v):
    if not isinstance(v, tuple):
        raise Undefined("expected a list, got %r" % (v,))
    return v


def eval_term(term, sigma):
    """Structural evaluation; raises Undefined on unbound variables or
    partial operators (which callers treat as non-satisfaction)."""
    tag = term[0]
    if tag == "c":
        return term[1]
    if tag == "v":
        try:
            return sigma[term[1]]
        except KeyError:
            raise Undefined("unbound variable %s" % term[1])
    args = [eval_term(a, sigma) for a in term[1:]]
    return apply_op(tag, args)


def apply_op(op, args):
    if op in _MATH_BIN:
        vals = [_as_int(a) for a in args]
        out = vals[0]
        for v in vals[1:]:
            out = _MATH_BIN[op](out, v)
        return out
    if op == "neg":
        return -_as_int(args[0])
    if op == "div":
        a, b = _as_int(args[0]), _as_int(args[1])
        if b == 0:
            raise Undefined("division by zero")
        q = abs(a) // abs(b)
        return -q if (a < 0) != (b < 0) else q
    if op == "mod":
        a, b = _as_int(args[0]), _as_int(args[1])
        if b == 0:
            raise Undefined("mod by zero")
        return a % b
    if op == "len":
        return len(_as_list(args[0]))
    if op == "idx":
        lst, i = _as_list(args[0]), _as_int(args[1])
        if not 0 <= i < len(lst):
            raise Undefined("list index %d out of range" % i)
        return lst[i]
    if op == "sub":
        lst, k, n = _as_list(args[0]), _as_int(args[1]), _as_int(args[2])
        if k < 0 or n < 0 or k + n > len(lst):
            return ()  # out-of-range sublists denote the empty list
        return lst[k:k + n]
    if op == "cons":
        return (args[0],) + _as_list(args[1])
    if op == "cat":
        return _as_list(args[0]) + _as_list(args[1])
    if op == "list":
        return tuple(args)
    if op == "setof":
        return frozenset(_as_list(args[0]))
    if op == "set":
        return frozenset(args)
    if op == "card":
        if not isinstance(args[0], frozenset):
            raise Undefined("expected a set")
        return len(args[0])
    if op == "union":
        out = frozenset()
        for a in args:
            if not isinstance(a, frozenset):
                raise Undefined("expected a set")
            out |= a
        return out
    if op == "bigunion":
        lst = _as_list(args[0])
        out = frozenset()
        for a in lst:
            if not isinstance(a, frozenset):
                raise Undefined("expected a list of sets")
            out |= a
        return out
    if op == "diff":
        return args[0] - args[1]
    if op == "min":
        return min(_as_int(a) for a in args)
    if op == "max":
        return max(_as_int(a) for a in args)
    # wasm operators on bit patterns
    try:
        if op in BINOPS:
            t = op.split(".", 1)[0]
            return apply_binop(op, _mask_to(t, args[0]), _mask_to(t, args[1]))
        if op in RELOPS:
            t = op.split(".", 1)[0]
            return apply_relop(op, _mask_to(t, args[0]), _mask_to(t, args[1]))
        if op in UNOPS:
            t = op.split(".", 1)[0]
            return apply_unop(op, _mask_to(t, args[0]))
        if op in TESTOPS:
            t = op.split(".", 1)[0]
            return apply_testop(op, _mask_to(t, args[0]))
        if op in CVTOPS:
            dst, src, sx = CVTOPS[op]
            return apply_cvtop(op, dst, src, sx, _mask_to(src, args[0]))
    except Trap as e:
        raise Undefined(str(e))
    raise Undefined("unknown operator %r" % op)


def _mask_to(t, v):
    from .numerics import mask
    return _as_int(v) & mask(t)


# ------------------------------------------------------- normalization

def _poly_add(p, q, k=1):
    out = dict(p)
    for mono, c in q.items():
        out[mono] = out.get(mono, 0) + k * c
        if out[mono] == 0:
            del out[mono]
    return out


def _poly_mul(p, q):
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = tuple(sorted(m1 + m2))
            out[m] = out.get(m, 0) + c1 * c2
            if out[m] == 0:
                del out[m]
    return out


_LINEAR_WASM = {"i32.add": "+", "i64.add": "+", "i32.sub": "-", "i64.sub": "-",
                "i32.mul": "*", "i64.mul": "*"}


def _to_poly(term):
    """Polynomial over atoms; wasm add/sub/mul are read exactly (justified
    for terms guarded by the corpus no-overflow side conditions)."""
    tag = term[0]
    if tag == "c" and isinstance(term[1], int):
        return {(): term[1]} if term[1] else {}
    op = _LINEAR_WASM.get(tag, tag)
    if op == "+":
        out = {}
        for a in term[1:]:
            out = _poly_add(out, _to_poly(a))
        return out
    if op == "-" and len(term) == 3:
        return _poly_add(_to_poly(term[1]), _to_poly(term[2]), -1)
    if op == "neg":
        return _poly_add({}, _to_poly(term[1]), -1)
    if op == "*":
        out = {(): 1}
        for a in term[1:]:
            out = _poly_mul(out, _to_poly(a))
        return out
    atom = normalize(term) if tag not in ("c", "v") else term
    return {(atom,): 1}


def _from_poly(poly):
    if not poly:
        return C(0)
    items = sorted(poly.items(), key=lambda kv: (len(kv[0]), repr(kv[0])))
    parts = []
    for mono, coeff in items:
        if not mono:
            parts.append(C(coeff))
            continue
        factors = list(mono)
        term = factors[0]
        for f in factors[1:]:
            term = A("*", term, f)
        if coeff != 1:
            term = A("*", C(coeff), term)
        parts.append(term)
    out = parts[0]
    for p in parts[1:]:
        out = A("+", out, p)
    return out


def normalize(term):
    """Canonical form: arithmetic flattened into an ordered polynomial,
    ground subterms evaluated, other operators normalized structurally."""
    tag = term[0]
    if tag == "c":
        return term
    if tag == "v":
        return term
    args = tuple(normalize(a) for a in term[1:])
    t2 = (tag,) + args
    if all(a[0] == "c" for a in args):
        try:
            return C(eval_term(t2, {}))
        except Undefined:
            pass
    if tag in ("+", "-", "*", "neg") or tag in _LINEAR_WASM:
        return _from_poly(_to_poly(t2))
    return t2


def terms_equal(a, b):
    return normalize(a) == normalize(b)
