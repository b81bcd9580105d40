import random

import pytest

from helpers_oracle import brute_star_sat

from wasmproof.assertions import (
    And, Assertion, CaptureError, Cell, CellT, EMP, Eq, Exists, Pure, PredI,
    Size, Star, UNKNOWN, alpha_eq, assertion_sat, distribute_frame, eval_pure,
    heap_sat, mk_assertion,
)
from wasmproof.asexpr import parse_assertion_text, parse_formula, parse_term
from wasmproof.heaps import AbstractHeap, disjoint_union
from wasmproof.predicates import builtin_predicates
from wasmproof.sexpr import parse_one
from wasmproof.terms import A, C, V, Undefined, eval_term, normalize


ENV = builtin_predicates()


def H(cells, size=None):
    return AbstractHeap(cells, size)


# ----------------------------------------------------------------- terms

def test_eval_const():
    assert eval_term(C(5), {}) == 5


def test_eval_apply_local():
    assert eval_term(A("i32.add", V("l0"), C(3)), {"l0": 2}) == 5


def test_eval_unbound():
    with pytest.raises(Undefined):
        eval_term(V("x"), {})


def test_eval_wrapping_vs_exact():
    assert eval_term(A("i32.add", C(0xFFFFFFFF), C(1)), {}) == 0
    assert eval_term(A("+", C(0xFFFFFFFF), C(1)), {}) == 0x100000000


def test_normalize_polynomials():
    a = A("+", A("*", C(4), V("k")), V("x"))
    b = A("+", V("x"), A("*", V("k"), C(4)))
    assert normalize(a) == normalize(b)
    assert normalize(A("i32.add", V("x"), C(0))) == normalize(V("x"))


# ------------------------------------------------------------- heap_sat

def test_single_cell():
    assert heap_sat(Cell(C(8), C(5)), {}, H({8: 5})) is True
    assert heap_sat(Cell(C(8), C(5)), {}, H({8: 6})) is False
    assert heap_sat(Cell(C(8), C(5)), {}, H({8: 5, 9: 0})) is False


def test_size_resource():
    assert heap_sat(Size(C(2)), {}, H({}, 2)) is True
    assert heap_sat(Size(C(2)), {}, H({}, 3)) is False
    assert heap_sat(Size(C(2)), {}, H({})) is False
    assert heap_sat(EMP, {}, H({}, 2)) is False
    assert heap_sat(EMP, {}, H({})) is True


def test_typed_cell_little_endian():
    h = H({0: 0x04, 1: 0x03, 2: 0x02, 3: 0x01})
    assert heap_sat(CellT("i32", C(0), C(0x01020304)), {}, h) is True
    assert heap_sat(CellT("i32", C(0), C(0x04030201)), {}, h) is False


def test_typed_cell_roundtrip_against_store_bytes():
    from wasmproof.runtime import MemoryInst, mem_store
    rng = random.Random(3)
    for _ in range(50):
        v = rng.randrange(0, 1 << 32)
        mem = MemoryInst(1)
        mem_store(mem, 16, 0, "i32", v)
        h = H({16 + i: mem.data[16 + i] for i in range(4)})
        assert heap_sat(CellT("i32", C(16), C(v)), {}, h) is True


def test_star_split():
    h = H({0: 1, 4: 2})
    f = Star(Cell(C(0), C(1)), Cell(C(4), C(2)))
    assert heap_sat(f, {}, h) is True
    assert heap_sat(Star(Cell(C(0), C(1)), Cell(C(0), C(1))), {}, H({0: 1})) is False


def test_pure_and_heap():
    f = And(Eq(V("l1"), C(2)), EMP)
    assert heap_sat(f, {"l1": 2}, H({})) is True
    assert heap_sat(f, {"l1": 3}, H({})) is False
    assert heap_sat(f, {"l1": 2}, H({0: 0})) is False


def test_negation_membership():
    f = ("not", Cell(C(0), C(1)))
    assert heap_sat(f, {}, H({0: 2})) is True
    assert heap_sat(f, {}, H({0: 1})) is False


def test_exists_witness_from_equation():
    f = Exists(("x",), And(Eq(V("x"), C(7)), Cell(C(0), V("x"))))
    assert heap_sat(f, {}, H({0: 7})) is True
    assert heap_sat(f, {}, H({0: 8})) is False


# -------------------------------------------------------- disjoint_union

def test_union_basic():
    u = disjoint_union(H({0: 1}), H({4: 2}))
    assert u is not None and u.cells_dict() == {0: 1, 4: 2} and u.size is None


def test_union_overlap():
    assert disjoint_union(H({0: 1}), H({0: 2})) is None


def test_union_sizes():
    assert disjoint_union(H({}, 1), H({}, 1)) is None
    u = disjoint_union(H({0: 1}), H({}, 1))
    assert u is not None and u.size == 1


def test_union_out_of_bounds_for_size():
    assert disjoint_union(H({65536: 0}), H({}, 1)) is None


def test_union_commutative_associative():
    rng = random.Random(9)
    for _ in range(200):
        heaps = []
        for _k in range(3):
            cells = {rng.randrange(0, 8): rng.randrange(0, 4)
                     for _ in range(rng.randrange(0, 3))}
            size = rng.choice([None, None, 1])
            heaps.append(H(cells, size))
        a, b, c = heaps

        def key(h):
            return None if h is None else (tuple(sorted(h.cells_dict().items())), h.size)

        assert key(disjoint_union(a, b)) == key(disjoint_union(b, a))
        ab = disjoint_union(a, b)
        bc = disjoint_union(b, c)
        left = disjoint_union(ab, c) if ab is not None else None
        right = disjoint_union(a, bc) if bc is not None else None
        if ab is not None and bc is not None:
            assert key(left) == key(right)


# ------------------------------------------------------ distribute_frame

def test_frame_distribution():
    p = mk_assertion((), EMP)
    out = distribute_frame(p, Cell(C(8), C(5)))
    assert out.heap == Star(EMP, Cell(C(8), C(5)))


def test_frame_capture_rejected():
    p = mk_assertion((V("k"),), EMP, binders=("x",))
    with pytest.raises(CaptureError):
        distribute_frame(p, Cell(C(0), V("x")))


def test_frame_under_binders():
    p = mk_assertion((V("k"),), EMP, binders=("k",))
    out = distribute_frame(p, Size(V("t")))
    assert out.binders == ("k",)
    assert out.heap == Star(EMP, Size(V("t")))


def test_frame_preserves_satisfaction():
    rng = random.Random(21)
    for _ in range(100):
        cells = {4 * i: rng.randrange(0, 9) for i in range(rng.randrange(0, 3))}
        p = mk_assertion((), Star(*[Cell(C(a), C(v)) for a, v in cells.items()])
                         if cells else EMP)
        hf = Cell(C(100), C(7))
        combined = distribute_frame(p, hf)
        h_all = H({**cells, 100: 7})
        assert heap_sat(combined.heap, {}, h_all) is True


# ---------------------------------------------------------- star algebra

def _rand_formula(rng, depth=2):
    choice = rng.randrange(0, 6 if depth > 0 else 3)
    if choice == 0:
        return Cell(C(rng.randrange(0, 6)), C(rng.randrange(0, 3)))
    if choice == 1:
        return Cell(C(rng.randrange(0, 6)), None)
    if choice == 2:
        return EMP if rng.random() < 0.5 else Size(C(rng.randrange(0, 3)))
    if choice == 3:
        return Star(_rand_formula(rng, depth - 1), _rand_formula(rng, depth - 1))
    if choice == 4:
        return And(Pure("=", C(1), C(1)), _rand_formula(rng, depth - 1))
    return ("not", _rand_formula(rng, depth - 1))


def test_star_matches_brute_force_enumeration():
    rng = random.Random(17)
    checked = 0
    for _ in range(400):
        f1 = _rand_formula(rng)
        f2 = _rand_formula(rng)
        cells = {a: rng.randrange(0, 3)
                 for a in rng.sample(range(0, 6), rng.randrange(0, 5))}
        size = rng.choice([None, None, 2])
        heap = H(cells, size)
        mine = heap_sat(Star(f1, f2), {}, heap)
        ref = brute_star_sat(f1, f2, {}, heap)
        if mine is UNKNOWN or ref is UNKNOWN:
            continue
        assert mine == ref, (f1, f2, cells, size, mine, ref)
        checked += 1
    assert checked > 300


# ------------------------------------------------------------- predicates

def oba_cells(x, n, alpha):
    cells = {}

    def put32(addr, v):
        for i in range(4):
            cells[addr + i] = (v >> (8 * i)) & 0xFF

    put32(x, len(alpha))
    for i, v in enumerate(alpha):
        put32(x + 4 + 4 * i, v)
    for i in range(len(alpha), n):
        put32(x + 4 + 4 * i, 0xAB)  # over-allocated, arbitrary contents
    return cells


def test_oba_layout_satisfaction():
    h = H(oba_cells(0, 4, [3, 5]))
    f = PredI("OBA", C(0), C(4), C((3, 5)))
    assert heap_sat(f, {}, h, ENV) is True
    # unordered contents fail
    h2 = H(oba_cells(0, 4, [5, 3]))
    assert heap_sat(PredI("OBA", C(0), C(4), C((5, 3))), {}, h2, ENV) is False
    # BA ignores ordering
    assert heap_sat(PredI("BA", C(0), C(4), C((5, 3))), {}, h2, ENV) is True


def test_oba_wrong_contents():
    h = H(oba_cells(0, 4, [3, 5]))
    assert heap_sat(PredI("OBA", C(0), C(4), C((3, 6))), {}, h, ENV) is False


def test_oba_inferred_existential():
    h = H(oba_cells(8, 3, [1, 2, 9]))
    f = Exists(("a",), PredI("OBA", C(8), C(3), V("a")))
    assert heap_sat(f, {}, h, ENV) is True


def test_ordered_pure():
    assert eval_pure(Pure("ordered", C((3, 5))), {}) is True
    assert eval_pure(Pure("ordered", C((5, 3))), {}) is False


# ----------------------------------------------------------- assertions

def test_assertion_sat_stack():
    p = mk_assertion((V("x"), C(0)), And(Eq(V("x"), C(4)), EMP))
    assert assertion_sat(p, [4, 0], {"x": 4}, H({}), ENV) is True
    assert assertion_sat(p, [5, 0], {"x": 4}, H({}), ENV) is False
    assert assertion_sat(p, [4], {"x": 4}, H({}), ENV) is False


def test_assertion_sat_binder_pinned_by_stack():
    p = mk_assertion((V("b"),), EMP, binders=("b",))
    assert assertion_sat(p, [9], {}, H({}), ENV) is True


def test_alpha_eq():
    p = mk_assertion((V("x"),), And(Eq(V("x"), C(1)), EMP), binders=("x",))
    q = mk_assertion((V("y"),), And(Eq(V("y"), C(1)), EMP), binders=("y",))
    r = mk_assertion((V("y"),), And(Eq(V("y"), C(2)), EMP), binders=("y",))
    assert alpha_eq(p, q)
    assert not alpha_eq(p, r)


# ------------------------------------------------------------ text format

def test_parse_term_text():
    assert parse_term(parse_one("(+ x 1)")) == A("+", V("x"), C(1))
    assert parse_term(parse_one("(i32 -1)")) == C(0xFFFFFFFF)
    assert parse_term(parse_one("(list 3 5)")) == A("list", C(3), C(5))


def test_parse_assertion_text_roundtrip():
    text = "(assert (exists b) (stack b) (heap (and (= b 1) emp)))"
    p = parse_assertion_text(text, ENV)
    assert p.binders == ("b",)
    assert p.stack == (V("b"),)
    p2 = parse_assertion_text(repr(p), ENV)
    assert alpha_eq(p, p2)


def test_parse_pred_formula():
    f = parse_formula(parse_one("(OBA x 4 (list 3 5))"), ENV)
    assert f == PredI("OBA", V("x"), C(4), A("list", C(3), C(5)))
