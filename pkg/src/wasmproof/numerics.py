"""Numeric semantics for the interpreter: two's-complement integers and
IEEE-754 floats, all values held as unsigned bit patterns.

Integer arithmetic is modulo 2^width.  Division/remainder by zero and
signed-division overflow trap.  Float arithmetic goes through the host's
IEEE doubles (rounding through binary32 for f32) with NaN results
canonicalized.
"""

import math
import struct

from .ast import BITS, FLOAT_TYPES, INT_TYPES


class Trap(Exception):
    """Runtime error result; aborts the computation."""


MASK32 = 0xFFFFFFFF
MASK64 = 0xFFFFFFFFFFFFFFFF
CANON_NAN32 = 0x7FC00000
CANON_NAN64 = 0x7FF8000000000000


def mask(t):
    return (1 << BITS[t]) - 1


def signed(t, bits):
    w = BITS[t]
    if bits >= 1 << (w - 1):
        return bits - (1 << w)
    return bits


def unsigned(t, value):
    return value & ((1 << BITS[t]) - 1)


def f32_to_float(bits):
    return struct.unpack("<f", struct.pack("<I", bits))[0]


def float_to_f32(x):
    try:
        return struct.unpack("<I", struct.pack("<f", x))[0]
    except OverflowError:
        return 0xFF800000 if x < 0 else 0x7F800000


def f64_to_float(bits):
    return struct.unpack("<d", struct.pack("<Q", bits))[0]


def float_to_f64(x):
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def to_float(t, bits):
    return f32_to_float(bits) if t == "f32" else f64_to_float(bits)


def from_float(t, x):
    return float_to_f32(x) if t == "f32" else float_to_f64(x)


def is_nan_bits(t, bits):
    if t == "f32":
        return (bits & 0x7F800000) == 0x7F800000 and (bits & 0x007FFFFF) != 0
    return (bits & 0x7FF0000000000000) == 0x7FF0000000000000 and (bits & 0x000FFFFFFFFFFFFF) != 0


def canon_nan(t):
    return CANON_NAN32 if t == "f32" else CANON_NAN64


def _fresult(t, x):
    bits = from_float(t, x)
    if is_nan_bits(t, bits):
        return canon_nan(t)
    return bits


# ---------------------------------------------------------------- integers

def _iadd(t, a, b):
    return (a + b) & mask(t)


def _isub(t, a, b):
    return (a - b) & mask(t)


def _imul(t, a, b):
    return (a * b) & mask(t)


def _idiv_u(t, a, b):
    if b == 0:
        raise Trap("integer divide by zero")
    return a // b


def _idiv_s(t, a, b):
    sa, sb = signed(t, a), signed(t, b)
    if sb == 0:
        raise Trap("integer divide by zero")
    q = abs(sa) // abs(sb)
    if (sa < 0) != (sb < 0):
        q = -q
    if q == 1 << (BITS[t] - 1):
        raise Trap("integer overflow")
    return unsigned(t, q)


def _irem_u(t, a, b):
    if b == 0:
        raise Trap("integer divide by zero")
    return a % b


def _irem_s(t, a, b):
    sa, sb = signed(t, a), signed(t, b)
    if sb == 0:
        raise Trap("integer divide by zero")
    r = abs(sa) % abs(sb)
    if sa < 0:
        r = -r
    return unsigned(t, r)


def _ishl(t, a, b):
    return (a << (b % BITS[t])) & mask(t)


def _ishr_u(t, a, b):
    return a >> (b % BITS[t])


def _ishr_s(t, a, b):
    return unsigned(t, signed(t, a) >> (b % BITS[t]))


def _irotl(t, a, b):
    w = BITS[t]
    k = b % w
    return ((a << k) | (a >> (w - k))) & mask(t) if k else a


def _irotr(t, a, b):
    w = BITS[t]
    k = b % w
    return ((a >> k) | (a << (w - k))) & mask(t) if k else a


def _iclz(t, a):
    w = BITS[t]
    return w if a == 0 else w - a.bit_length()


def _ictz(t, a):
    if a == 0:
        return BITS[t]
    return (a & -a).bit_length() - 1


def _ipopcnt(t, a):
    return bin(a).count("1")


# ------------------------------------------------------------------ floats

def _fdiv(a, b):
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    try:
        return a / b
    except OverflowError:
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _fmin(a, b):
    if math.isnan(a) or math.isnan(b):
        return math.nan
    if a == 0.0 and b == 0.0:
        return a if math.copysign(1.0, a) < 0 else b
    return min(a, b)


def _fmax(a, b):
    if math.isnan(a) or math.isnan(b):
        return math.nan
    if a == 0.0 and b == 0.0:
        return a if math.copysign(1.0, a) > 0 else b
    return max(a, b)


def _fnearest(x):
    if math.isnan(x) or math.isinf(x) or x == 0.0:
        return x
    r = math.floor(x)
    d = x - r
    if d > 0.5:
        r += 1.0
    elif d == 0.5 and math.fmod(r, 2.0) != 0.0:
        r += 1.0
    if r == 0.0 and x < 0:
        return -0.0
    return r


def _ftrunc(x):
    if math.isnan(x) or math.isinf(x):
        return x
    return float(math.trunc(x))


def _fsqrt(x):
    if math.isnan(x):
        return math.nan
    if x < 0 and not (x == 0.0):
        return math.nan
    if x == 0.0:
        return x
    return math.sqrt(x)


# ---------------------------------------------------------------- dispatch

def _fbin(name):
    return {
        "add": lambda a, b: a + b,
        "sub": lambda a, b: a - b,
        "mul": _fmul_host,
        "div": _fdiv,
        "min": _fmin,
        "max": _fmax,
        "copysign": lambda a, b: math.copysign(a, b) if not math.isnan(a) else math.copysign(math.nan, b),
    }[name]


def _fmul_host(a, b):
    if math.isinf(a) and b == 0.0 or math.isinf(b) and a == 0.0:
        return math.nan
    try:
        return a * b
    except OverflowError:
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


_IBIN = {
    "add": _iadd, "sub": _isub, "mul": _imul,
    "div_s": _idiv_s, "div_u": _idiv_u, "rem_s": _irem_s, "rem_u": _irem_u,
    "and": lambda t, a, b: a & b, "or": lambda t, a, b: a | b,
    "xor": lambda t, a, b: a ^ b,
    "shl": _ishl, "shr_s": _ishr_s, "shr_u": _ishr_u,
    "rotl": _irotl, "rotr": _irotr,
}

_IUN = {"clz": _iclz, "ctz": _ictz, "popcnt": _ipopcnt}

_FUN = {
    "neg": lambda x: -x,
    "abs": math.fabs,
    "ceil": lambda x: x if math.isnan(x) or math.isinf(x) else float(math.ceil(x)) if x != 0 else x,
    "floor": lambda x: x if math.isnan(x) or math.isinf(x) else float(math.floor(x)) if x != 0 else x,
    "trunc": _ftrunc,
    "nearest": _fnearest,
    "sqrt": _fsqrt,
}

_IREL = {
    "eq": lambda t, a, b: a == b,
    "ne": lambda t, a, b: a != b,
    "lt_s": lambda t, a, b: signed(t, a) < signed(t, b),
    "lt_u": lambda t, a, b: a < b,
    "gt_s": lambda t, a, b: signed(t, a) > signed(t, b),
    "gt_u": lambda t, a, b: a > b,
    "le_s": lambda t, a, b: signed(t, a) <= signed(t, b),
    "le_u": lambda t, a, b: a <= b,
    "ge_s": lambda t, a, b: signed(t, a) >= signed(t, b),
    "ge_u": lambda t, a, b: a >= b,
}

_FREL = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "gt": lambda a, b: a > b,
    "le": lambda a, b: a <= b,
    "ge": lambda a, b: a >= b,
}


def apply_unop(op, a):
    t, name = op.split(".", 1)
    if t in INT_TYPES:
        return _IUN[name](t, a)
    return _fresult(t, _FUN[name](to_float(t, a)))


def apply_binop(op, a, b):
    t, name = op.split(".", 1)
    if t in INT_TYPES:
        return _IBIN[name](t, a, b)
    # neg-zero-aware host arithmetic; NaN canonicalized
    fa, fb = to_float(t, a), to_float(t, b)
    if name == "copysign":
        if is_nan_bits(t, a):
            sign_bit = b >> (BITS[t] - 1) & 1
            return canon_nan(t) | (sign_bit << (BITS[t] - 1))
    if (name not in ("copysign",)) and (math.isnan(fa) or math.isnan(fb)):
        return canon_nan(t)
    try:
        r = _fbin(name)(fa, fb)
    except OverflowError:
        r = math.inf
    if t == "f32":
        return _fresult(t, r)
    return _fresult(t, r)


def apply_testop(op, a):
    t, name = op.split(".", 1)
    assert name == "eqz"
    return 1 if a == 0 else 0


def apply_relop(op, a, b):
    t, name = op.split(".", 1)
    if t in INT_TYPES:
        return 1 if _IREL[name](t, a, b) else 0
    fa, fb = to_float(t, a), to_float(t, b)
    if math.isnan(fa) or math.isnan(fb):
        return 1 if name == "ne" else 0
    return 1 if _FREL[name](fa, fb) else 0


def _trunc_to_int(dst, x, sx):
    if math.isnan(x):
        raise Trap("invalid conversion to integer")
    y = math.trunc(x) if not math.isinf(x) else x
    w = BITS[dst]
    if sx == "s":
        lo, hi = -(1 << (w - 1)), (1 << (w - 1)) - 1
    else:
        lo, hi = 0, (1 << w) - 1
    if math.isinf(x) or y < lo or y > hi:
        raise Trap("integer overflow")
    return unsigned(dst, int(y))


def apply_cvtop(op, dst, src, sx, a):
    if ".reinterpret_" in op:
        return a
    if dst in INT_TYPES and src in INT_TYPES:
        if BITS[dst] < BITS[src]:  # wrap
            return a & mask(dst)
        if sx == "u":
            return a
        return unsigned(dst, signed(src, a))
    if dst in FLOAT_TYPES and src in INT_TYPES:
        v = signed(src, a) if sx == "s" else a
        return _fresult(dst, float(v))
    if dst in INT_TYPES and src in FLOAT_TYPES:
        return _trunc_to_int(dst, to_float(src, a), sx)
    # float <-> float
    x = to_float(src, a)
    if src == "f32" and dst == "f64":
        if is_nan_bits("f32", a):
            return CANON_NAN64
        return float_to_f64(x)
    if is_nan_bits("f64", a):
        return CANON_NAN32
    return _fresult("f32", x)


# Pre-specialized closures; interpreters dispatch through these tables to
# avoid re-splitting opcode names in the hot loop.

def compile_unop(op):
    t, name = op.split(".", 1)
    if t in INT_TYPES:
        f = _IUN[name]
        return lambda a, f=f, t=t: f(t, a)
    f = _FUN[name]
    to_f = f32_to_float if t == "f32" else f64_to_float
    return lambda a, f=f, t=t, to_f=to_f: _fresult(t, f(to_f(a)))


def compile_binop(op):
    t, name = op.split(".", 1)
    if t in INT_TYPES:
        f = _IBIN[name]
        return lambda a, b, f=f, t=t: f(t, a, b)
    return lambda a, b, op=op: apply_binop(op, a, b)


def compile_testop(op):
    return lambda a: 1 if a == 0 else 0


def compile_relop(op):
    t, name = op.split(".", 1)
    if t in INT_TYPES:
        f = _IREL[name]
        return lambda a, b, f=f, t=t: 1 if f(t, a, b) else 0
    return lambda a, b, op=op: apply_relop(op, a, b)


def compile_cvtop(op, dst, src, sx):
    return lambda a, op=op, dst=dst, src=src, sx=sx: apply_cvtop(op, dst, src, sx, a)


def binop_defined(op, a, b):
    """True when t.binop on these bit patterns does not trap."""
    t, name = op.split(".", 1)
    if name in ("div_u", "rem_u"):
        return b != 0
    if name == "rem_s":
        return signed(t, b) != 0
    if name == "div_s":
        sb = signed(t, b)
        if sb == 0:
            return False
        return not (signed(t, a) == -(1 << (BITS[t] - 1)) and sb == -1)
    return True


def cvtop_defined(op, dst, src, sx, a):
    """True when the conversion does not trap."""
    if dst in INT_TYPES and src in FLOAT_TYPES:
        x = to_float(src, a)
        if math.isnan(x) or math.isinf(x):
            return False
        y = math.trunc(x)
        w = BITS[dst]
        if sx == "s":
            return -(1 << (w - 1)) <= y <= (1 << (w - 1)) - 1
        return 0 <= y <= (1 << w) - 1
    return True
