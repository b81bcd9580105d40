import random

import pytest

from wasmproof.bigstep import Config, eval_br, eval_config, invoke, run_module
from wasmproof.numerics import Trap
from wasmproof.parser import parse_module
from wasmproof.runtime import (
    Break, GrowPolicy, MemoryInst, Normal, OutOfFuel, Return, TRAP,
    instantiate, mem_grow, mem_load, mem_store,
)
from wasmproof.typecheck import typecheck_module


def run_src(src, func="$main", args=(), fuel=10 ** 6, policy=None, trace=None):
    mod = parse_module(src)
    assert typecheck_module(mod) == []
    return run_module(mod, func, list(args), fuel, policy, trace)


def test_fig2_addition():
    _, res = run_src("(module (func $main (result i32) (i32.const 2) (i32.const 3) (i32.add)))")
    assert res == Normal((5,))


def test_nested_break_values_and_trace():
    # br 1 escapes two blocks transferring exactly one value
    src = """
    (module (func $main (result i32)
      (block (result i32)
        (block (result i32)
          (i32.const 1)
          (i32.const 3)
          (br 1)))))
    """
    trace = []
    _, res = run_src(src, trace=trace)
    assert res == Normal((3,))
    assert trace == [Break(1, (3,)), Break(0, (3,))]


def test_div_by_zero_traps():
    _, res = run_src("(module (func $main (result i32) (i32.const 1) (i32.const 0) (i32.div_u)))")
    assert res is TRAP


def test_div_overflow_traps():
    _, res = run_src("""
    (module (func $main (result i32)
      (i32.const -2147483648) (i32.const -1) (i32.div_s)))
    """)
    assert res is TRAP


def test_sub_wraparound():
    _, res = run_src("(module (func $main (result i32) (i32.const 0) (i32.const 1) (i32.sub)))")
    assert res == Normal((0xFFFFFFFF,))


def test_divergence_exhausts_fuel():
    src = "(module (func $main (loop (br 0))))"
    with pytest.raises(OutOfFuel):
        run_src(src, fuel=5000)


def test_eval_br_examples():
    assert eval_br(0, [1], [1, 3]) == Break(0, (3,))
    assert eval_br(1, [0, 2], [7, 8]) == Break(1, (7, 8))
    assert eval_br(0, [0], []) == Break(0, ())


def test_loop_iteration():
    # sum 0..4 with a counter in local 0, accumulator in local 1
    src = """
    (module (func $main (result i32) (local i32 i32)
      (loop
        (get_local 1) (get_local 0) (i32.add) (set_local 1)
        (get_local 0) (i32.const 1) (i32.add) (tee_local 0)
        (i32.const 5) (i32.lt_u) (br_if 0))
      (get_local 1)))
    """
    _, res = run_src(src)
    assert res == Normal((10,))


def test_br_table_dispatch():
    src = """
    (module (func $main (param i32) (result i32) (local i32)
      (block
        (block
          (block
            (get_local 0)
            (br_table 0 1 2))
          (i32.const 10) (set_local 1) (br 1))
        (get_local 1) (i32.const 1) (i32.add) (set_local 1))
      (get_local 1)))
    """
    mod = parse_module(src)
    assert typecheck_module(mod) == []
    outs = []
    for v in (0, 1, 2, 99):
        _, res = run_module(mod, "$main", [v], 10 ** 5)
        outs.append(res.values[0])
    assert outs == [10, 1, 0, 0]


def test_select_semantics():
    src = """
    (module (func $main (param i32) (result i32)
      (i32.const 111) (i32.const 222) (get_local 0) (select)))
    """
    mod = parse_module(src)
    _, r1 = run_module(mod, "$main", [1], 1000)
    _, r0 = run_module(mod, "$main", [0], 1000)
    assert r1 == Normal((111,)) and r0 == Normal((222,))


def test_return_from_nested():
    src = """
    (module (func $main (result i32)
      (block
        (i32.const 42)
        (return))
      (i32.const 7)))
    """
    _, res = run_src(src)
    assert res == Normal((42,))


def test_trivial_return_function():
    _, res = run_src("(module (func $main (return)))")
    assert res == Normal(())


def test_frame_isolation():
    # callee writes its own local 0; caller's local is untouched
    src = """
    (module
      (func $clobber (param i32) (i32.const 99) (set_local 0))
      (func $main (result i32) (local i32)
        (i32.const 5) (set_local 0)
        (get_local 0) (call $clobber)
        (get_local 0)))
    """
    _, res = run_src(src)
    assert res == Normal((5,))


def test_globals_and_memory():
    src = """
    (module (memory 1) (global (mut i32) (i32.const 3))
      (func $main (result i32)
        (i32.const 8) (get_global 0) (i32.store)
        (i32.const 8) (i32.load)
        (get_global 0) (i32.add)
        (set_global 0)
        (get_global 0)))
    """
    _, res = run_src(src)
    assert res == Normal((6,))


# ------------------------------------------------------------ memory units

def test_mem_load_little_endian():
    mem = MemoryInst(1)
    mem.data[0:4] = bytes([0x04, 0x03, 0x02, 0x01])
    assert mem_load(mem, 0, 0, "i32") == 0x01020304


def test_mem_load_out_of_bounds():
    mem = MemoryInst(1)
    with pytest.raises(Trap):
        mem_load(mem, 65536 - 3, 0, "i32")


def test_mem_store_load_roundtrip():
    rng = random.Random(7)
    mem = MemoryInst(1)
    for _ in range(200):
        v = rng.randrange(0, 1 << 32)
        addr = rng.randrange(0, 65536 - 4)
        mem_store(mem, addr, 0, "i32", v)
        assert mem_load(mem, addr, 0, "i32") == v


def test_packed_load_sign_extension():
    mem = MemoryInst(1)
    mem.data[0] = 0xFF
    assert mem_load(mem, 0, 0, "i32", ("i8", "s")) == 0xFFFFFFFF
    assert mem_load(mem, 0, 0, "i32", ("i8", "u")) == 0xFF


def test_mem_grow_success_and_zeroing():
    mem = MemoryInst(1)
    old = mem_grow(mem, 2, GrowPolicy("always"))
    assert old == 1 and mem.page_count == 3
    assert all(b == 0 for b in mem.data[65536:])


def test_mem_grow_over_limit():
    mem = MemoryInst(1)
    assert mem_grow(mem, 1 << 16, GrowPolicy("always")) == 0xFFFFFFFF
    assert mem.page_count == 1


def test_mem_grow_degenerate():
    mem = MemoryInst(0)
    assert mem_grow(mem, 0, GrowPolicy("always")) == 0
    assert mem.page_count == 0


def test_mem_grow_policy_failure():
    mem = MemoryInst(1)
    assert mem_grow(mem, 1, GrowPolicy("never")) == 0xFFFFFFFF
    assert mem.page_count == 1


def test_grow_policy_in_program():
    src = """
    (module (memory 1)
      (func $main (result i32)
        (i32.const 2) (mem.grow)))
    """
    _, res = run_src(src, policy=GrowPolicy("never"))
    assert res == Normal((0xFFFFFFFF,))
    _, res = run_src(src, policy=GrowPolicy("always"))
    assert res == Normal((1,))


def test_memory_length_invariant():
    src = """
    (module (memory 1)
      (func $main (result i32)
        (i32.const 3) (mem.grow) (drop) (mem.size)))
    """
    mod = parse_module(src)
    store, inst = instantiate(mod)
    _, res = invoke(store, inst, 0, [], 1000)
    assert res == Normal((4,))
    assert len(store.mems[0].data) == 4 * 65536
