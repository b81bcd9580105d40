from wasmproof.parser import parse_module
from wasmproof.typecheck import (
    POLYMORPHIC, TypingContext, instr_effect, typecheck_module,
)


def ok(src):
    errors = typecheck_module(parse_module(src))
    assert errors == [], errors


def bad(src, fragment):
    errors = typecheck_module(parse_module(src))
    assert errors, "expected a type error"
    assert fragment in errors[0], errors[0]


def test_fig2_checks():
    ok("(module (func (result i32) (i32.const 2) (i32.const 3) (i32.add)))")


def test_stack_underflow():
    bad("(module (func (i32.add) (drop)))", "underflow")


def test_type_mismatch():
    bad("(module (func (result i32) (i64.const 1) (i32.const 2) (i32.add)))",
        "expected i32")


def test_bad_label_depth():
    bad("(module (func (block (br 2))))", "label depth")


def test_undeclared_local():
    bad("(module (func (get_local 0) (drop)))", "undeclared local")


def test_missing_memory():
    bad("(module (func (i32.const 0) (i32.load) (drop)))", "memory")


def test_immutable_global():
    bad("(module (global i32 (i32.const 0)) (func (i32.const 1) (set_global 0)))",
        "immutable")


def test_loop_if_nest():
    # the loop/if control-flow nest: br 0 exits the if, br 1 restarts the loop
    ok("""
    (module (func (param i32)
      (loop
        (get_local 0)
        (if
          (then (br 0))
          (else (br 1))))))
    """)


def test_dead_code_after_br():
    ok("""
    (module (func (result i32)
      (block (result i32)
        (i32.const 1)
        (br 0)
        (i32.add))))
    """)


def test_block_annotation_mismatch():
    bad("(module (func (block (result i32) (nop))))", "annotation")


def test_select_effect():
    ctx = TypingContext()
    post = instr_effect(ctx, ("select",), ["i64", "i32", "i32", "i32"])
    assert post == ["i64", "i32"]


def test_mem_grow_effect():
    ctx = TypingContext(has_memory=True)
    assert instr_effect(ctx, ("mem.grow",), ["f64", "i32"]) == ["f64", "i32"]


def test_unreachable_polymorphic():
    ctx = TypingContext()
    assert instr_effect(ctx, ("unreachable",), []) is POLYMORPHIC
    ok("(module (func (result i32) (unreachable)))")


def test_effect_deterministic():
    ctx = TypingContext(locals=("i32",))
    a = instr_effect(ctx, ("get_local", 0), [])
    b = instr_effect(ctx, ("get_local", 0), [])
    assert a == b == ["i32"]


def test_call_effect():
    ok("""
    (module
      (func $f (param i32 i32) (result i32) (get_local 0))
      (func (result i32) (i32.const 1) (i32.const 2) (call $f)))
    """)
    bad("""
    (module
      (func $f (param i32 i32) (result i32) (get_local 0))
      (func (result i32) (i32.const 1) (call $f)))
    """, "underflow")
