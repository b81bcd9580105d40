"""Unit tests for the proof checker: axiom instances, structural rules, and
the catalogued rejection suite."""

import pytest

from wasmproof.assertions import (
    And, BOT, Cell, CellT, EMP, Eq, PredI, Pure, Size, Star, mk_assertion,
)
from wasmproof.ast import Func, functype
from wasmproof.proof import (
    CheckConfig, CheckError, Checker, Context, ProofNode, Triple, check_proof,
    check_step, modified_vars,
)
from wasmproof.terms import A, C, V


def As(stack, heap=EMP, binders=()):
    return mk_assertion(stack, heap, binders)


def N(rule, premises=(), **args):
    return ProofNode(rule, args, tuple(premises))


def accepted(node, goal, **cfg):
    report = check_proof(node, goal, CheckConfig(**cfg))
    assert report.accepted, report.reason
    return report


def rejected(node, goal, fragment="", **cfg):
    report = check_proof(node, goal, CheckConfig(**cfg))
    assert not report.accepted
    if fragment:
        assert fragment in report.reason, report.reason
    return report


GAMMA0 = Context()


def test_const_axiom():
    goal = Triple(GAMMA0, As(()), (("i32.const", 5),), As((C(5),)))
    report = accepted(N("const"), goal)
    assert report.obligations == []


def test_const_axiom_wrong_value():
    goal = Triple(GAMMA0, As(()), (("i32.const", 5),), As((C(6),)))
    rejected(N("const"), goal, "postcondition")


def test_unreachable_any_post():
    goal = Triple(GAMMA0, As((), BOT), (("unreachable",),),
                  As((C(1), V("z")), Size(C(4))))
    accepted(N("unreachable"), goal)


def test_binop_axiom_and_defined():
    t1, t2 = V("a"), V("b")
    goal = Triple(GAMMA0, As((t1, t2)), (("i32.add",),),
                  As((A("i32.add", t1, t2),)))
    accepted(N("binop"), goal)
    # div_u needs the non-trapping condition in the pre
    goal2 = Triple(GAMMA0, As((t1, t2), And(Pure("!=", t2, C(0)), EMP)),
                   (("i32.div_u",),), As((A("i32.div_u", t1, t2),)))
    accepted(N("binop"), goal2)
    goal3 = Triple(GAMMA0, As((t1, t2)), (("i32.div_u",),),
                   As((A("i32.div_u", t1, t2),)))
    rejected(N("binop"), goal3, "precondition")


def test_select_axiom():
    t1, t2, t3 = V("a"), V("b"), V("c")
    post = mk_assertion(
        (V("x"),),
        And(EMP,
            ("imp", Pure("!=", t3, C(0)), Eq(V("x"), t1)),
            ("imp", Eq(t3, C(0)), Eq(V("x"), t2))),
        binders=("x",))
    goal = Triple(GAMMA0, As((t1, t2, t3)), (("select",),), post)
    accepted(N("select"), goal)


def test_get_set_local():
    goal = Triple(GAMMA0, As(()), (("get_local", 1),), As((V("l1"),)))
    accepted(N("get_local"), goal, n_locals=2)
    rejected(N("get_local"), goal, "isDeclaredLocal", n_locals=1)

    goal2 = Triple(GAMMA0, As((V("x"),)), (("set_local", 0),),
                   As((), And(EMP, Eq(V("l0"), V("x")))))
    accepted(N("set_local"), goal2, n_locals=1)


def test_set_local_rejects_self_reference():
    goal = Triple(GAMMA0, As((V("l0"),)), (("set_local", 0),),
                  As((), And(EMP, Eq(V("l0"), V("l0")))))
    rejected(N("set_local"), goal, "variable")


def test_load_store_axioms():
    tau1, tau2 = V("a"), V("v")
    cell = CellT("i32", A("+", tau1, C(4)), tau2)
    goal = Triple(GAMMA0, As((tau1,), cell), (("i32.load", None, 4),),
                  As((tau2,), cell))
    accepted(N("load"), goal)
    # offset zero uses the bare address
    cell0 = CellT("i32", tau1, tau2)
    goal0 = Triple(GAMMA0, As((tau1,), cell0), (("i32.load", None, 0),),
                   As((tau2,), cell0))
    accepted(N("load"), goal0)
    # store: don't-care cell in, value cell out
    goalS = Triple(GAMMA0, As((tau1, tau2), CellT("i32", tau1, None)),
                   (("i32.store", None, 0),), As((), CellT("i32", tau1, tau2)))
    accepted(N("store"), goalS)


def test_packed_load_rejected_by_logic():
    goal = Triple(GAMMA0, As((V("a"),), CellT("i32", V("a"), V("v"))),
                  (("i32.load8_u", None, 0),), As((V("v"),), CellT("i32", V("a"), V("v"))))
    rejected(N("load"), goal, "unpacked")


def test_mem_size_axiom():
    goal = Triple(GAMMA0, As((), Size(V("t"))), (("mem.size",),),
                  As((V("t"),), Size(V("t"))))
    accepted(N("mem.size"), goal)


def test_mem_grow_axiom():
    tau1, tau2 = V("d"), V("p")
    v = V("v")
    grown = And(
        Star(("iterstar", "i", A("*", tau2, C(65536)),
              A("*", A("+", tau2, tau1), C(65536)), Cell(V("i"), C(0))),
             Size(A("+", tau2, tau1))),
        Eq(v, tau2),
        Pure("<=", A("+", tau2, tau1), C(65536)))
    failed = And(Size(tau2), Eq(v, C(0xFFFFFFFF)))
    post = mk_assertion((v,), ("or", grown, failed), binders=("v",))
    goal = Triple(GAMMA0, As((tau1,), Size(tau2)), (("mem.grow",),), post)
    accepted(N("mem.grow"), goal)


def test_br_requires_label_identity():
    lab = As((), And(Eq(V("l0"), V("k")), EMP))
    ctx = Context(labels=(lab,))
    goal = Triple(ctx, lab, (("br", 0),), As((C(9),)))
    accepted(N("br"), goal)
    # negative suite: a [br] whose precondition differs from L!i
    goal_bad = Triple(ctx, As((), And(Eq(V("l0"), C(1)), EMP)), (("br", 0),),
                      As(()))
    rejected(N("br"), goal_bad, "must equal L!0")


def test_return_rule():
    r = As((V("v"),))
    ctx = Context(ret=r)
    accepted(N("return"), Triple(ctx, r, (("return",),), As(())))
    rejected(N("return"), Triple(Context(), r, (("return",),), As(())),
             "return assertion")


def test_block_rule_and_arity():
    inner = N("const")
    code = (("block", functype((), ("i32",)), [("i32.const", 5)]),)
    goal = Triple(GAMMA0, As(()), code, As((C(5),)))
    accepted(N("block", [inner]), goal)
    # negative suite: wrong post-stack arity
    code_bad = (("block", functype((), ("i32",)), [("i32.const", 5)]),)
    goal_bad = Triple(GAMMA0, As(()), code_bad, As((C(5), C(6))))
    rejected(N("block", [inner]), goal_bad, "arity")


def test_loop_extends_with_precondition():
    # loop body [br 0] has the loop invariant as its break target
    code = (("loop", functype((), ()), [("br", 0)]),)
    inv = As((), And(Eq(V("x"), C(1)), EMP))
    goal = Triple(GAMMA0, inv, code, As(()))
    accepted(N("loop", [N("br")]), goal)


def test_if_rule():
    code = (("if", functype((), ()), [("nop",)], [("nop",)]),)
    pre = As((V("c"),))
    post = As(())
    then_p = N("consequence", [N("block", [N("nop")])],
               pre=As((), EMP), post=post)
    else_p = N("consequence", [N("block", [N("nop")])],
               pre=As((), EMP), post=post)
    goal = Triple(GAMMA0, pre, code, post)
    accepted(N("if", [then_p, else_p]), goal)


def test_br_if_rule():
    lab = As(())
    ctx = Context(labels=(lab,))
    pre = As((V("c"),))
    post = As((), And(EMP, Eq(V("c"), C(0))))
    taken = N("consequence", [N("br")], pre=lab, post=post)
    goal = Triple(ctx, pre, (("br_if", 0),), post)
    accepted(N("br_if", [taken]), goal)


def test_seq_rule():
    code = (("i32.const", 2), ("i32.const", 3))
    mid = As((C(2),))
    # extension carries const 2 under the second step
    right = N("extension", [N("const")], stack=(C(2),))
    goal = Triple(GAMMA0, As(()), code, As((C(2), C(3))))
    accepted(N("seq", [N("const"), right], split=1, mid=mid), goal)


def test_frame_rule():
    hf = Cell(C(8), C(5))
    pre = mk_assertion((), Star(EMP, hf))
    post = mk_assertion((C(7),), Star(EMP, hf))
    goal = Triple(GAMMA0, pre, (("i32.const", 7),), post)
    accepted(N("frame", [N("const")], frame=hf), goal)


def test_frame_rejects_modified_variable():
    # negative suite: frame mentioning l2 around set_local 2
    hf = And(Eq(V("l2"), C(1)), EMP)
    pre = mk_assertion((V("x"),), Star(EMP, hf))
    post = mk_assertion((), Star(And(EMP, Eq(V("l2"), V("x"))), hf))
    goal = Triple(GAMMA0, pre, (("set_local", 2),), post)
    rejected(N("frame", [N("set_local")], frame=hf), goal, "side condition",
             n_locals=3)


def test_exists_rule_threads_labels():
    lab = mk_assertion((), And(Eq(V("l0"), V("k")), EMP), binders=("k",))
    ctx = Context(labels=(lab,))
    pre = mk_assertion((), And(Eq(V("l0"), V("k2")), EMP), binders=("k2",))
    post = mk_assertion((C(1),), EMP, binders=("q",))
    inner = N("consequence", [N("br")],
              pre=As((), And(Eq(V("l0"), V("e")), EMP)),
              post=mk_assertion((C(1),), EMP))
    goal = Triple(ctx, pre, (("br", 0),), post)
    accepted(N("exists", [inner], var="e"), goal)


def test_unsound_exists_rejected():
    # negative suite: the unsound variant leaves the label untouched
    lab = As((), And(Eq(V("l0"), V("k")), EMP))  # no binder on the label
    ctx = Context(labels=(lab,))
    pre = mk_assertion((), And(Eq(V("l0"), V("k2")), EMP), binders=("k2",))
    post = mk_assertion((), EMP, binders=("q",))
    goal = Triple(ctx, pre, (("br", 0),), post)
    rejected(N("exists", [N("br")], var="e"), goal, "label 0 lacks")


def test_consequence_rule():
    pre = As((), And(Eq(V("x"), C(2)), EMP))
    goal = Triple(GAMMA0, pre, (("i32.const", 3),),
                  As((C(3),), And(Eq(V("x"), C(2)), EMP)))
    inner = N("frame", [N("const")], frame=And(Eq(V("x"), C(2)), EMP))
    node = N("consequence", [inner],
             pre=mk_assertion((), Star(EMP, And(Eq(V("x"), C(2)), EMP))),
             post=mk_assertion((C(3),), Star(EMP, And(Eq(V("x"), C(2)), EMP))))
    report = accepted(node, goal)
    assert all(o.status == "discharged" for o in report.obligations)


def test_consequence_rejects_arity_increase():
    # negative suite: premise label with a longer stack than the conclusion's
    lab1 = As((V("a"),))
    lab2 = As((V("a"), V("b")))  # n' = 2 > n = 1
    ctx = Context(labels=(lab1,))
    goal = Triple(ctx, As(()), (("nop",),), As(()))
    node = N("consequence", [N("nop")], labels=(lab2,))
    rejected(node, goal, "arity may not increase")


def test_extension_rule():
    goal = Triple(GAMMA0, As((V("s"),)), (("i32.const", 1),),
                  As((V("s"), C(1))))
    accepted(N("extension", [N("const")], stack=(V("s"),)), goal)


def test_extension_respects_mv():
    goal = Triple(GAMMA0, As((V("l0"), V("x"))), (("set_local", 0),),
                  As((V("l0"),), And(EMP, Eq(V("l0"), V("x")))))
    rejected(N("extension", [N("set_local")], stack=(V("l0"),)), goal,
             "side condition", n_locals=1)


def test_context_rule():
    lab = As(())
    ctx = Context(labels=(lab, As((V("a"),))), ret=As(()))
    goal = Triple(ctx, As(()), (("nop",),), As(()))
    accepted(N("context", [N("nop")], keep=0, keep_ret=False), goal)


def test_call_rule():
    f = Func(type=functype(("i32",), ("i32",)), locals=(), body=[("get_local", 0)])
    spec = (As((V("x"),)), 0, As((V("x"),)))
    ctx = Context(funcs=(f,), assumptions=(spec,))
    goal = Triple(ctx, As((V("x"),)), (("call", 0),), As((V("x"),)))
    accepted(N("call"), goal)
    goal_bad = Triple(ctx, As((V("x"),)), (("call", 0),), As((C(0),)))
    rejected(N("call"), goal_bad, "no matching assumption")


def test_function_rule_and_local_leak():
    f = Func(type=functype(("i32",), ("i32",)), locals=(), body=[("get_local", 0)])
    ctx = Context(funcs=(f,))
    pre = As((V("x"),))
    post = As((V("x"),))
    fr = And(Eq(V("l0"), V("x")), EMP)
    inner = N("context", [N("frame", [N("get_local")], frame=fr)],
              keep=0, keep_ret=False)
    body = N("consequence", [inner],
             pre=mk_assertion((), Star(EMP, fr)),
             post=mk_assertion((V("l0"),), Star(EMP, fr)))
    goal = Triple(ctx, pre, (("callcl", 0),), post)
    report = check_proof(N("function", [body]), goal,
                         CheckConfig(falsify_trials=6))
    assert report.accepted, report.reason

    # negative suite: a spec whose postcondition mentions l0
    post_bad = As((V("l0"),))
    goal_bad = Triple(ctx, pre, (("callcl", 0),), post_bad)
    rejected(N("function", [body]), goal_bad, "no l_i")


def test_modified_vars():
    assert modified_vars([("set_local", 2)], ()) == {"l2"}
    assert modified_vars([("tee_local", 0), ("set_global", 1)], ()) == {"l0", "g1"}
    callee = Func(type=functype((), ()), locals=("i32",),
                  body=[("set_local", 0), ("set_global", 0)])
    assert modified_vars([("call", 0)], (callee,)) == {"g0"}


def test_modified_vars_recursive_call():
    f = Func(type=functype((), ()), locals=(),
             body=[("call", 0), ("set_global", 2)])
    assert modified_vars([("call", 0)], (f,)) == {"g2"}
