import pytest

from wasmproof.ast import Module, module_eq
from wasmproof.parser import ParseError, parse_module
from wasmproof.render import render_module

FIG2 = """
(module
  (func $main (result i32)
    (i32.const 2)
    (i32.const 3)
    (i32.add)))
"""


def test_empty_module():
    m = parse_module("(module)")
    assert m.funcs == [] and m.globals == [] and m.memory is None


def test_fig2_shape():
    m = parse_module(FIG2)
    f = m.funcs[0]
    assert f.type == ((), ("i32",))
    assert f.body == [("i32.const", 2), ("i32.const", 3), ("i32.add",)]


def test_render_roundtrip_fig2():
    m = parse_module(FIG2)
    text = render_module(m)
    assert "(i32.const 2)" in text
    assert text.index("(i32.const 2)") < text.index("(i32.add)")
    assert module_eq(parse_module(text), m)


def test_render_empty():
    assert render_module(Module()) == "(module)"


def test_unsupported_construct():
    with pytest.raises(ParseError) as e:
        parse_module("(module (func (call_indirect)))")
    assert e.value.kind == "unsupported"
    assert e.value.line > 0


def test_table_rejected():
    with pytest.raises(ParseError) as e:
        parse_module("(module (table 1))")
    assert e.value.kind == "unsupported"


def test_unknown_opcode():
    with pytest.raises(ParseError) as e:
        parse_module("(module (func (i32.frobnicate)))")
    assert e.value.kind == "opcode"


def test_unresolved_name():
    with pytest.raises(ParseError) as e:
        parse_module("(module (func (call $nope)))")
    assert e.value.kind == "unresolved"


def test_named_call_resolution():
    m = parse_module("""
    (module
      (func $a (call $b))
      (func $b (nop)))
    """)
    assert m.funcs[0].body == [("call", 1)]


def test_forward_reference():
    m = parse_module("(module (func $x (call $x)))")
    assert m.funcs[0].body == [("call", 0)]


def test_block_with_type():
    m = parse_module("""
    (module (func (result i32)
      (block (result i32)
        (i32.const 1))))
    """)
    blk = m.funcs[0].body[0]
    assert blk[0] == "block" and blk[1] == ((), ("i32",))


def test_if_arms():
    m = parse_module("""
    (module (func (param i32)
      (get_local 0)
      (if (then (nop)) (else (nop) (nop)))))
    """)
    iff = m.funcs[0].body[1]
    assert iff[0] == "if" and len(iff[2]) == 1 and len(iff[3]) == 2


def test_memarg_and_packed():
    m = parse_module("""
    (module (memory 1) (func (param i32) (result i32)
      (get_local 0)
      (i32.load8_u offset=4 align=0)))
    """)
    ld = m.funcs[0].body[1]
    assert ld == ("i32.load8_u", 0, 4)


def test_globals():
    m = parse_module("""
    (module
      (global (mut i32) (i32.const 7))
      (global f64 (f64.const 1.5)))
    """)
    assert m.globals[0].mutable and m.globals[0].init == 7
    assert not m.globals[1].mutable


def test_br_table():
    m = parse_module("""
    (module (func
      (block
        (i32.const 0)
        (br_table 0 0 0))))
    """)
    bt = m.funcs[0].body[0][2][1]
    assert bt == ("br_table", (0, 0), 0)


def test_int_immediates_not_truncated():
    m = parse_module("(module (func (result i32) (i32.const 4294967295)))")
    assert m.funcs[0].body[0][1] == 0xFFFFFFFF
    m2 = parse_module("(module (func (result i32) (i32.const -1)))")
    assert m2.funcs[0].body[0][1] == 0xFFFFFFFF


def test_float_literals_roundtrip():
    src = """
    (module (func (result f64)
      (f64.const nan:0x123)
      (drop)
      (f64.const -0x1.8p3)
      (drop)
      (f64.const inf)))
    """
    m = parse_module(src)
    body = m.funcs[0].body
    assert body[0][1] == 0x7FF0000000000123
    assert module_eq(parse_module(render_module(m)), m)


def test_lexical_error_position():
    with pytest.raises(ParseError) as e:
        parse_module("(module\n  (func (i32.const zz)))")
    assert e.value.kind == "lexical"
    assert e.value.line == 2
