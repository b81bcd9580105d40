"""AST for the supported WebAssembly subset.

Instructions are tuples whose first element is the full opcode name, e.g.
('i32.const', 5), ('get_local', 0), ('i32.load8_s', align, offset),
('block', ft, body).  Function types are (params, results) tuples of value
type names.  Numeric payloads are stored as unsigned bit patterns of the
appropriate width.
"""

from dataclasses import dataclass, field

VALUE_TYPES = ("i32", "i64", "f32", "f64")
INT_TYPES = ("i32", "i64")
FLOAT_TYPES = ("f32", "f64")
PACKED_TYPES = ("i8", "i16", "i32")

WIDTH = {"i32": 4, "i64": 8, "f32": 4, "f64": 8, "i8": 1, "i16": 2}
BITS = {"i32": 32, "i64": 64, "f32": 32, "f64": 64, "i8": 8, "i16": 16}

PAGE_SIZE = 65536
MAX_PAGES = 1 << 16

IUNOPS = ("clz", "ctz", "popcnt")
FUNOPS = ("neg", "abs", "ceil", "floor", "trunc", "nearest", "sqrt")
IBINOPS = ("add", "sub", "mul", "div_s", "div_u", "rem_s", "rem_u",
           "and", "or", "xor", "shl", "shr_s", "shr_u", "rotl", "rotr")
FBINOPS = ("add", "sub", "mul", "div", "min", "max", "copysign")
ITESTOPS = ("eqz",)
IRELOPS = ("eq", "ne", "lt_s", "lt_u", "gt_s", "gt_u", "le_s", "le_u", "ge_s", "ge_u")
FRELOPS = ("eq", "ne", "lt", "gt", "le", "ge")


def _build_op_sets():
    unops, binops, testops, relops = set(), set(), set(), set()
    for t in INT_TYPES:
        unops.update(f"{t}.{op}" for op in IUNOPS)
        binops.update(f"{t}.{op}" for op in IBINOPS)
        testops.update(f"{t}.{op}" for op in ITESTOPS)
        relops.update(f"{t}.{op}" for op in IRELOPS)
    for t in FLOAT_TYPES:
        unops.update(f"{t}.{op}" for op in FUNOPS)
        binops.update(f"{t}.{op}" for op in FBINOPS)
        relops.update(f"{t}.{op}" for op in FRELOPS)
    return unops, binops, testops, relops


UNOPS, BINOPS, TESTOPS, RELOPS = _build_op_sets()


def _build_cvtops():
    """Valid conversions: <dst>.convert_<src>[_sx] and <dst>.reinterpret_<src>.

    The sign suffix is present exactly when the conversion is not
    float-to-float and not an integer narrowing.
    """
    ops = {}
    for dst in VALUE_TYPES:
        for src in VALUE_TYPES:
            if dst == src:
                continue
            both_float = dst in FLOAT_TYPES and src in FLOAT_TYPES
            narrowing = dst in INT_TYPES and src in INT_TYPES and BITS[dst] < BITS[src]
            if both_float or narrowing:
                ops[f"{dst}.convert_{src}"] = (dst, src, None)
            else:
                for sx in ("s", "u"):
                    ops[f"{dst}.convert_{src}_{sx}"] = (dst, src, sx)
            if BITS[dst] == BITS[src] and (dst in INT_TYPES) != (src in INT_TYPES):
                ops[f"{dst}.reinterpret_{src}"] = (dst, src, None)
    return ops


CVTOPS = _build_cvtops()


def _build_mem_ops():
    loads, stores = {}, {}
    for t in VALUE_TYPES:
        loads[f"{t}.load"] = (t, None, None)
        stores[f"{t}.store"] = (t, None)
    for t in INT_TYPES:
        for pt in PACKED_TYPES:
            if BITS[pt] >= BITS[t]:
                continue
            for sx in ("s", "u"):
                loads[f"{t}.load{BITS[pt]}_{sx}"] = (t, pt, sx)
            stores[f"{t}.store{BITS[pt]}"] = (t, pt)
    return loads, stores


LOAD_OPS, STORE_OPS = _build_mem_ops()

NUMERIC_OPS = UNOPS | BINOPS | TESTOPS | RELOPS | set(CVTOPS)

# Constructs from the full language that this subset deliberately rejects.
UNSUPPORTED = {
    "call_indirect", "table", "elem", "import", "export", "start", "data",
    "memory.size", "memory.grow", "memory.copy", "memory.fill", "funcref",
    "select_t", "ref.null", "ref.func", "global.get", "global.set",
    "local.get", "local.set", "local.tee", "br_on_null", "return_call",
}


def functype(params, results):
    return (tuple(params), tuple(results))


@dataclass
class Func:
    type: tuple
    locals: tuple = ()
    body: list = field(default_factory=list)
    name: str | None = None


@dataclass
class GlobalDef:
    mutable: bool
    type: str
    init: int  # bit pattern


@dataclass
class Module:
    funcs: list = field(default_factory=list)
    globals: list = field(default_factory=list)
    memory: int | None = None

    def func_index(self, name):
        for i, f in enumerate(self.funcs):
            if f.name == name:
                return i
        raise KeyError(name)


def instr_eq(a, b):
    return a == b


def module_eq(a: Module, b: Module) -> bool:
    return (
        a.memory == b.memory
        and a.globals == b.globals
        and len(a.funcs) == len(b.funcs)
        and all(
            fa.type == fb.type and fa.locals == fb.locals
            and fa.name == fb.name and fa.body == fb.body
            for fa, fb in zip(a.funcs, b.funcs)
        )
    )
