import random

from wasmproof.equiv import equiv_check, fuzz_campaign, gen_program
from wasmproof.parser import parse_module
from wasmproof.runtime import instantiate
from wasmproof.smallstep import SSConfig, lift, run_to_terminal, step
from wasmproof.typecheck import typecheck_module


def make_cfg(src, code=None, stack=()):
    mod = parse_module(src)
    store, inst = instantiate(mod)
    body = code if code is not None else mod.funcs[0].body
    return SSConfig(store, [], lift(list(stack)) + list(body)), inst


def test_add_single_step():
    cfg, inst = make_cfg("(module (func (result i32) (i32.const 2) (i32.const 3) (i32.add)))")
    tag, cfg2 = step(cfg, inst)
    assert tag == "step"
    assert cfg2.code == [("const", 5)]


def test_fig6_coarse_break():
    # the coarse semantics transfers exactly one value out in a single step
    src = """
    (module (func (result i32)
      (block (result i32)
        (block (result i32)
          (i32.const 1)
          (i32.const 3)
          (br 1)))))
    """
    cfg, inst = make_cfg(src)
    res = run_to_terminal(cfg, inst, 100)
    assert res == ("values", (3,))


def test_trap_terminal():
    cfg, inst = make_cfg("(module (func (nop)))", code=[("trap",)])
    assert step(cfg, inst) == ("trap",)


def test_unreachable_becomes_trap():
    cfg, inst = make_cfg("(module (func (unreachable)))")
    res = run_to_terminal(cfg, inst, 100)
    assert res == ("trap",)


def test_progress_on_validated_configs():
    src = """
    (module (func (result i32) (local i32)
      (loop
        (get_local 0) (i32.const 1) (i32.add) (tee_local 0)
        (i32.const 3) (i32.lt_u) (br_if 0))
      (get_local 0)))
    """
    mod = parse_module(src)
    assert typecheck_module(mod) == []
    store, inst = instantiate(mod)
    cfg = SSConfig(store, [], [("call", 0)])
    steps = 0
    while True:
        out = step(cfg, inst)
        if out[0] != "step":
            break
        cfg = out[1]
        steps += 1
        assert steps < 1000
    assert out == ("values", (3,))
    assert steps >= 1


def test_equiv_fig2():
    mod = parse_module("(module (func (result i32) (i32.const 2) (i32.const 3) (i32.add)))")
    assert equiv_check(mod, 0, [], 1000).verdict == "agree"


def test_equiv_div_zero():
    mod = parse_module("(module (func (result i32) (i32.const 1) (i32.const 0) (i32.div_u)))")
    r = equiv_check(mod, 0, [], 1000)
    assert r.verdict == "agree" and "trap" in r.detail


def test_generator_produces_well_typed():
    rng = random.Random(11)
    for _ in range(50):
        mod = gen_program(rng)
        assert typecheck_module(mod) == [], "generator must be typed-by-construction"


def test_small_campaign_agrees():
    rep = fuzz_campaign(count=60, seed=5, fuel=20000)
    assert rep.disagreed == 0, rep.first_disagreement
    assert rep.agreed > rep.inconclusive
