import random

from wasmproof.assertions import (
    And, Cell, CellT, EMP, Eq, Exists, PredI, Pure, Size, Star, mk_assertion,
)
from wasmproof.entail import entails, prove_entailment
from wasmproof.generate import gen_abstract_states
from wasmproof.predicates import builtin_predicates
from wasmproof.terms import A, C, V

ENV = builtin_predicates()


def As(stack, heap, binders=()):
    return mk_assertion(stack, heap, binders)


def test_reflexive():
    p = As((V("x"),), And(Eq(V("x"), C(1)), EMP))
    assert entails(p, p).status == "proven"


def test_alpha_renamed():
    p = As((V("x"),), EMP, binders=("x",))
    q = As((V("y"),), EMP, binders=("y",))
    assert entails(p, q).status == "proven"


def test_pure_rewriting_stack():
    # knowing l1 = 2, the stack [l1] can be replaced by [2]
    p = As((V("l1"),), And(Eq(V("l1"), C(2)), EMP))
    q = As((C(2),), And(Eq(V("l1"), C(2)), EMP))
    assert entails(p, q).status == "proven"


def test_weakening_conjuncts():
    p = As((), And(Eq(V("x"), C(1)), Pure("<", V("x"), C(5)), EMP))
    q = As((), And(Pure("<", V("x"), C(5)), EMP))
    assert entails(p, q).status == "proven"


def test_star_commutativity():
    p = As((), Star(Cell(C(0), C(1)), Cell(C(4), C(2))))
    q = As((), Star(Cell(C(4), C(2)), Cell(C(0), C(1))))
    assert entails(p, q).status == "proven"


def test_spatial_not_droppable():
    p = As((), Star(Cell(C(0), C(1)), Cell(C(4), C(2))))
    q = As((), Cell(C(0), C(1)))
    assert entails(p, q).status == "unknown"


def test_wildcard_subsumption():
    p = As((), CellT("i32", C(8), C(7)))
    q = As((), CellT("i32", C(8), None))
    assert entails(p, q).status == "proven"


def test_arith_from_equalities():
    # l0 = x and l1 = k justify rewriting l0 + 4*l1 to x + 4*k
    p = As((A("+", V("l0"), A("*", C(4), V("l1"))),),
           And(Eq(V("l0"), V("x")), Eq(V("l1"), V("k")), EMP))
    q = As((A("+", V("x"), A("*", C(4), V("k"))),),
           And(Eq(V("l0"), V("x")), Eq(V("l1"), V("k")), EMP))
    assert entails(p, q).status == "proven"


def test_linear_arith():
    p = As((), And(Pure("<", V("i"), V("n")), Pure("<=", C(0), V("i")), EMP))
    q = As((), And(Pure("<=", C(0), V("n")), EMP))
    assert entails(p, q).status == "proven"


def test_falsum_proves_anything():
    p = As((), And(("bot",), EMP))
    q = As((C(7),), Star(Cell(C(0), C(1)), Size(C(3))))
    # stack arities differ, but bot on the left wins
    assert entails(p, q).status == "proven"


def test_relop_tautology():
    # after i32.lt_u the branch facts are tautological
    v = A("i32.lt_u", V("a"), V("b"))
    p = As((v,), EMP)
    q = As((V("w"),), And(
        ("imp", Eq(V("w"), C(0)), Pure(">=", V("a"), V("b"))),
        ("imp", Pure("!=", V("w"), C(0)), Pure("<", V("a"), V("b"))),
        EMP), binders=("w",))
    assert entails(p, q).status == "proven"


def test_existential_witness_from_stack():
    p = As((C(5),), EMP)
    q = As((V("b"),), And(Eq(V("b"), C(5)), EMP), binders=("b",))
    assert entails(p, q).status == "proven"


def test_explicit_witness_hint():
    p = As((), And(Eq(V("x"), C(3)), EMP))
    q = As((), And(Eq(A("+", V("y"), C(1)), C(4)), EMP), binders=("y",))
    assert entails(p, q, witnesses={"y": V("x")}).status == "proven"


def test_falsify_refutes():
    p = As((C(5),), EMP)
    q = As((C(4),), EMP)
    r = entails(p, q, mode="falsify", env=ENV)
    assert r.status == "falsified"


def test_falsify_cannot_prove():
    p = As((V("x"),), EMP)
    q = As((V("x"),), EMP)
    r = entails(p, q, mode="falsify", env=ENV)
    assert r.status == "unknown"


def test_falsify_agrees_with_syntactic():
    # anything the syntactic engine proves must never be falsified
    rng = random.Random(2)
    cases = [
        (As((V("x"),), And(Eq(V("x"), C(2)), EMP)),
         As((C(2),), And(Eq(V("x"), C(2)), EMP))),
        (As((), Star(Cell(C(0), C(1)), Cell(C(4), C(2)))),
         As((), Star(Cell(C(4), C(2)), Cell(C(0), C(1))))),
        (As((), And(Pure("<", V("i"), V("n")), EMP)),
         As((), And(Pure("<=", V("i"), V("n")), EMP))),
    ]
    for p, q in cases:
        assert prove_entailment(p, q)
        assert entails(p, q, mode="falsify", env=ENV,
                       seed=rng.randrange(1000)).status != "falsified"


def test_gen_oba_state():
    rng = random.Random(4)
    p = As((V("x"), V("k")),
           And(PredI("OBA", V("x"), V("n"), V("alpha")),
               Pure("<=", C(0), V("k")),
               Pure("<", V("k"), A("len", V("alpha")))))
    states = gen_abstract_states(p, ENV, rng, budget=5)
    assert len(states) == 5
    sigma, stack_vals, heap = states[0]
    assert stack_vals[0] == sigma["x"]
    assert isinstance(sigma["alpha"], tuple)


def test_gen_bot_empty():
    rng = random.Random(4)
    p = As((), ("bot",))
    assert gen_abstract_states(p, ENV, rng, budget=3) == []


def test_gen_size_only():
    rng = random.Random(4)
    p = As((), Size(C(1)))
    states = gen_abstract_states(p, ENV, rng, budget=3)
    assert states and all(h.size == 1 and h.n_cells() == 0 for _s, _v, h in states)


def test_gen_btree():
    rng = random.Random(6)
    p = As((V("k"),), PredI("BTree", C(2), V("kappa")))
    states = gen_abstract_states(p, ENV, rng, budget=3)
    assert len(states) == 3
    for sigma, _vals, heap in states:
        assert isinstance(sigma["kappa"], frozenset)
        assert heap.size >= 2
