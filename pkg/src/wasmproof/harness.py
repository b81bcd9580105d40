"""Dynamic soundness testing and the B-tree differential oracle.

For each function specification, satisfying pre-states are constructed,
planted in a concrete store together with a random heap frame and stack
frame, and run through the big-step engine; the result must not trap, the
frames must survive untouched, and the final state must reify some heap
satisfying the postcondition.
"""

import os
import random
from dataclasses import dataclass, field

from .assertions import UNKNOWN, assertion_sat
from .assertions import _Ctl, _foot, _witnesses, _ABSORB, _IMPRECISE
from .ast import PAGE_SIZE, Module
from .bigstep import Config, eval_config, invoke
from .btreemodel import PyBTree, ReferenceBTree, build_random_tree, serialize_tree
from .generate import GenFailure, gen_abstract_states, _one_state
from .heaps import AbstractHeap, intervals_disjoint, merge_intervals
from .parser import parse_module
from .predicates import builtin_predicates, K32, K64
from .proofparse import parse_spec_file, parse_wlp
from .runtime import ALWAYS_GROW, Normal, OutOfFuel, TRAP, instantiate
from .terms import Undefined, eval_term

CORPUS_DIR = os.path.join(os.path.dirname(__file__), "corpus")


@dataclass
class SatisfyingState:
    sigma: dict
    stack: list
    heap: AbstractHeap


@dataclass
class CorpusBundle:
    module: Module
    specs: list       # dicts: func, index, pre, post, generator
    proofs: dict      # func name -> ProofNode
    env: object
    text: str

    def spec(self, name):
        for s in self.specs:
            if s["name"] == name:
                return s
        for s in self.specs:
            if s["func"] == name:
                return s
        raise KeyError(name)


def load_corpus() -> CorpusBundle:
    env = builtin_predicates()
    with open(os.path.join(CORPUS_DIR, "btree.wat")) as fh:
        text = fh.read()
    module = parse_module(text)
    from .typecheck import typecheck_module
    errors = typecheck_module(module)
    if errors:
        raise RuntimeError("corpus module does not typecheck: %s" % errors[0])
    with open(os.path.join(CORPUS_DIR, "btree.spec")) as fh:
        specs = parse_spec_file(fh.read(), env)
    for s in specs:
        s["index"] = module.func_index(s["func"])
    proofs = {}
    wlp_path = os.path.join(CORPUS_DIR, "btree.wlp")
    if os.path.exists(wlp_path):
        with open(wlp_path) as fh:
            proofs = parse_wlp(fh.read(), env)
    return CorpusBundle(module, specs, proofs, env, text)


# -------------------------------------------------- scenario generators

def _tree_sigma_pages(tree: PyBTree):
    return {n.page: n for n in tree.nodes()}


def _gen_split_pre(spec, env, rng, budget):
    """Pre-states for splitting a full child: grow random trees until some
    non-full internal node has a full child."""
    out = []
    tries = 0
    while len(out) < budget and tries < budget * 40:
        tries += 1
        t = rng.randrange(2, 4)
        tree = build_random_tree(rng, t, rng.randrange(3, 40))
        full = 2 * t - 1
        candidates = []
        for node in tree.nodes():
            if node.leaf or len(node.keys) >= full:
                continue
            for i, child in enumerate(node.children):
                if len(child.keys) == full:
                    candidates.append((node, i, child))
        if not candidates:
            continue
        node, i, child = rng.choice(candidates)
        data, pages, _root = serialize_tree(tree, scramble=rng)
        sigma = {
            "t": t, "x": node.page, "i": i, "l": pages,
            "kx": tuple(node.keys),
            "px": tuple(c.page for c in node.children),
            "lamy": 1 if child.leaf else 0,
            "ky": tuple(child.keys),
            "py": () if child.leaf else tuple(c.page for c in child.children),
        }
        # owned: branching-factor cell, free list, and the two touched pages
        y = child.page
        owned = [(0, 4), (8, K64),
                 (node.page * K64, (node.page + 1) * K64),
                 (y * K64, (y + 1) * K64)]
        heap = AbstractHeap.from_memory(data, owned, pages)
        ok = assertion_sat(spec["pre"], [node.page, i], sigma, heap, env,
                           400000)
        if ok is True:
            out.append(SatisfyingState(sigma, [node.page, i], heap))
    return out


def _gen_nonfull_pre(spec, env, rng, budget):
    """Pre-states for the recursive insert: a subtree with a non-full root,
    planted behind a metadata page carrying the branching factor."""
    out = []
    tries = 0
    while len(out) < budget and tries < budget * 40:
        tries += 1
        t = rng.randrange(2, 4)
        tree = build_random_tree(rng, t, rng.randrange(0, 25))
        if len(tree.root.keys) == 2 * t - 1:
            continue
        k = rng.randrange(0, 1000)
        if tree.search(k):
            continue
        data, pages, root = serialize_tree(tree, scramble=rng)
        data[0:4] = t.to_bytes(4, "little")  # cell32(0, t)
        sigma = {"t": t, "r": root, "l": pages, "x": root,
                 "kappa": tree.key_set(), "lam": 1 if tree.root.leaf else 0,
                 "k": k}
        # owned: branching-factor cell, free list, and the subtree's pages
        owned = [(0, 4), (8, K64)] + [
            (n.page * K64, (n.page + 1) * K64) for n in tree.nodes()]
        heap = AbstractHeap.from_memory(data, owned, pages)
        ok = assertion_sat(spec["pre"], [root, k], sigma, heap, env, 400000)
        if ok is True:
            out.append(SatisfyingState(sigma, [root, k], heap))
    return out


_SCENARIOS = {
    "split-pre": _gen_split_pre,
    "nonfull-pre": _gen_nonfull_pre,
}


def gen_satisfying(pre, env, rng, budget, scenario=None):
    """Satisfying states for a precondition in the constructive fragment."""
    if scenario in _SCENARIOS:
        return _SCENARIOS[scenario]({"pre": pre}, env, rng, budget)
    return [SatisfyingState(s, v, h)
            for s, v, h in gen_abstract_states(pre, env, rng, budget)]


def _gen_for_spec(spec, env, rng, budget):
    if spec.get("generator") in _SCENARIOS:
        return _SCENARIOS[spec["generator"]](spec, env, rng, budget)
    return gen_satisfying(spec["pre"], env, rng, budget)


# ------------------------------------------------------ store assembly

@dataclass
class PlantedState:
    store: object
    inst: object
    frame_cells: dict
    frame_stack: tuple


def plant_state(state: SatisfyingState, mod: Module, rng) -> PlantedState:
    """Embed an abstract state in a concrete store: owned bytes from the
    heap, everything else random, plus a random heap frame and stack frame."""
    heap = state.heap
    span = max((e for _s, e in heap.intervals()), default=0)
    if heap.size is not None:
        pages = heap.size
    else:
        pages = (span + PAGE_SIZE - 1) // PAGE_SIZE
        pages += rng.randrange(0, 2)
    store, inst = instantiate(mod)
    if not store.mems:
        raise RuntimeError("corpus module must declare a memory")
    mem = store.mems[0]
    mem.data.extend(rng.randbytes(pages * PAGE_SIZE))
    owned = heap.intervals()
    for s, e in owned:
        mem.data[s:e] = bytes(heap.get(a) for a in range(s, e)) \
            if heap._data is None else heap._data[s:e]
    # heap frame: random unowned cells
    frame_cells = {}
    total = pages * PAGE_SIZE
    for _ in range(16):
        if total == 0:
            break
        a = rng.randrange(0, total)
        if any(s <= a < e for s, e in owned) or a in frame_cells:
            continue
        frame_cells[a] = mem.data[a]
    frame_stack = tuple(rng.randrange(0, 1 << 16) for _ in range(rng.randrange(0, 3)))
    for name, val in state.sigma.items():
        if name[0] == "g" and name[1:].isdigit():
            store.globs[inst.gaddrs[int(name[1:])]] = val
    return PlantedState(store, inst, frame_cells, frame_stack)


# ------------------------------------------------- post-state checking

def infer_post_heap(q, sigma, mem, pages, env, fuel=400000):
    """Reconstruct the postcondition's heap from the final memory: resolve
    binders against a whole-memory view, then take the formula footprint."""
    view = AbstractHeap.from_memory(mem.data, None, pages)
    ctl = _Ctl(env, fuel)
    candidates = [{}]
    missing = [b for b in q.binders if b not in sigma]
    if missing:
        candidates = list(_witnesses(tuple(missing), q.heap, sigma, view, ctl))
        if not candidates:
            return None, None
    for cand in candidates:
        sig = dict(sigma)
        sig.update(cand)
        foot = _foot(q.heap, sig, view, ctl)
        if foot in (_ABSORB, _IMPRECISE):
            continue
        intervals, wants_size = foot
        h = AbstractHeap.from_memory(mem.data, intervals,
                                     pages if wants_size else None)
        return h, sig
    return None, None


@dataclass
class Violation:
    kind: str
    detail: str
    state: SatisfyingState = None


@dataclass
class TripleTestReport:
    name: str
    trials: int = 0
    passed: int = 0
    inconclusive: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def line(self):
        status = "PASS" if self.ok else "VIOLATION"
        return "%-18s %s  (%d trials, %d inconclusive)" % (
            self.name, status, self.trials, self.inconclusive)


def dynamic_triple_test(bundle: CorpusBundle, spec, trials=100, fuel=10 ** 7,
                        seed=0) -> TripleTestReport:
    """Run the semantic-triple check on generated pre-states."""
    rng = random.Random(seed)
    env = bundle.env
    mod = bundle.module
    report = TripleTestReport(spec["func"])
    states = _gen_for_spec(spec, env, rng, trials)
    if not states:
        report.violations.append(Violation(
            "generation", "no satisfying pre-state found within budget"))
        return report
    for state in states:
        report.trials += 1
        planted = plant_state(state, mod, rng)
        code = [("call", spec["index"])]
        stack = list(planted.frame_stack) + list(state.stack)
        cfg = Config(planted.store, [], stack, code, (), None, planted.inst)
        try:
            _, _, res = eval_config(cfg, fuel, ALWAYS_GROW)
        except OutOfFuel:
            report.inconclusive += 1
            continue
        if res is TRAP:
            report.violations.append(Violation("trap", "execution trapped", state))
            continue
        assert isinstance(res, Normal)
        nf = len(planted.frame_stack)
        if tuple(res.values[:nf]) != planted.frame_stack:
            report.violations.append(Violation(
                "stack-frame", "stack frame not preserved", state))
            continue
        vals = list(res.values[nf:])
        mem = planted.store.mems[0]
        bad_frame = [a for a, b in planted.frame_cells.items()
                     if a >= len(mem.data) or mem.data[a] != b]
        if bad_frame:
            report.violations.append(Violation(
                "heap-frame", "heap frame bytes changed at %r" % bad_frame[:4],
                state))
            continue
        sigma_logical = {k: v for k, v in state.sigma.items()
                         if not ((k[0] in "lg") and k[1:].isdigit())}
        h_post, sig = infer_post_heap(spec["post"], sigma_logical, mem,
                                      mem.page_count, env)
        if h_post is None:
            report.violations.append(Violation(
                "post-heap", "no candidate heap satisfies the postcondition "
                "footprint", state))
            continue
        if not intervals_disjoint(
                h_post.intervals(),
                merge_intervals([(a, a + 1) for a in planted.frame_cells])):
            report.violations.append(Violation(
                "post-heap", "postcondition footprint overlaps the frame",
                state))
            continue
        ok = assertion_sat(spec["post"], vals, sig, h_post, env, 400000)
        if ok is True:
            report.passed += 1
        elif ok is UNKNOWN:
            report.inconclusive += 1
        else:
            report.violations.append(Violation(
                "post", "final state does not satisfy the postcondition",
                state))
    return report


# ------------------------------------------------------- B-tree harness

def _read_u32(mem, addr):
    return int.from_bytes(mem.data[addr:addr + 4], "little")


def check_occupancy(mem, t):
    """Structural bounds by direct memory reads: key counts, ordering,
    child counts, equal leaf depth."""
    root = _read_u32(mem, 4)
    depths = set()

    def walk(page, depth, is_root):
        base = page * K64
        if base + K32 + 4 > len(mem.data):
            return "node page %d out of bounds" % page
        leaf = _read_u32(mem, base)
        nk = _read_u32(mem, base + 4)
        np_ = _read_u32(mem, base + K32)
        if nk > 2 * t - 1:
            return "node %d holds %d keys > 2t-1" % (page, nk)
        if not is_root and nk < t - 1:
            return "node %d holds %d keys < t-1" % (page, nk)
        keys = [_read_u32(mem, base + 8 + 4 * i) for i in range(nk)]
        if any(keys[i] >= keys[i + 1] for i in range(nk - 1)):
            return "node %d keys unordered" % page
        if leaf:
            if np_ != 0:
                return "leaf %d has %d pointers" % (page, np_)
            depths.add(depth)
            return None
        if np_ != nk + 1:
            return "node %d has %d pointers for %d keys" % (page, np_, nk)
        for i in range(np_):
            child = _read_u32(mem, base + K32 + 4 + 4 * i)
            err = walk(child, depth + 1, False)
            if err:
                return err
        return None

    err = walk(root, 0, True)
    if err:
        return err
    if len(depths) > 1:
        return "leaves at unequal depths %r" % sorted(depths)
    return None


def check_btree_sat(bundle, store, t, keys, fuel=2 * 10 ** 6):
    """Bounded-unfolding satisfaction of the whole-tree predicate on the
    live memory."""
    from .assertions import heap_sat
    from .assertions import PredI
    from .terms import C
    mem = store.mems[0]
    h = AbstractHeap.from_memory(mem.data, None, mem.page_count)
    return heap_sat(PredI("BTree", C(t), C(frozenset(keys))), {}, h,
                    bundle.env, fuel)


@dataclass
class DifferentialReport:
    ops: int = 0
    searches: int = 0
    mismatch: str = ""
    sat_checks: int = 0

    @property
    def ok(self):
        return not self.mismatch


def btree_differential(bundle: CorpusBundle, ops, t, fuel=10 ** 7,
                       check_shape_every=1, check_sat_every=0) -> DifferentialReport:
    """Run Insert/Search ops through the module and a reference model.

    ops: iterable of ('insert', k) / ('search', k).  Occupancy bounds are
    checked every `check_shape_every` ops; full predicate satisfaction
    every `check_sat_every` ops (0 = only at the end).
    """
    mod = bundle.module
    store, inst = instantiate(mod)
    ref = ReferenceBTree()
    report = DifferentialReport()
    _, res = invoke(store, inst, mod.func_index("$BTreeCreate"), [t], fuel)
    if res is TRAP:
        report.mismatch = "BTreeCreate trapped"
        return report
    mem = store.mems[0]
    ops = list(ops)
    for n, (kind, k) in enumerate(ops):
        if kind == "insert":
            _, res = invoke(store, inst, mod.func_index("$BTreeInsert"), [k], fuel)
            if res is TRAP:
                report.mismatch = "insert %d trapped at op %d" % (k, n)
                return report
            ref.insert(k)
        else:
            _, res = invoke(store, inst, mod.func_index("$BTreeSearch"), [k], fuel)
            if res is TRAP:
                report.mismatch = "search %d trapped at op %d" % (k, n)
                return report
            got = res.values[0]
            want = ref.search(k)
            report.searches += 1
            if got != want:
                report.mismatch = ("search %d: module says %d, reference says %d "
                                   "at op %d" % (k, got, want, n))
                return report
        report.ops += 1
        if check_shape_every and n % check_shape_every == 0:
            err = check_occupancy(mem, t)
            if err:
                report.mismatch = "shape after op %d: %s" % (n, err)
                return report
        if check_sat_every and n % check_sat_every == 0:
            sat = check_btree_sat(bundle, store, t, ref.keys)
            report.sat_checks += 1
            if sat is not True:
                report.mismatch = "tree predicate unsatisfied after op %d: %r" % (n, sat)
                return report
    err = check_occupancy(mem, t)
    if err:
        report.mismatch = "final shape: %s" % err
        return report
    sat = check_btree_sat(bundle, store, t, ref.keys)
    report.sat_checks += 1
    if sat is not True:
        report.mismatch = "final tree predicate unsatisfied: %r" % (sat,)
    return report


def random_ops(rng, count, key_range=100000, search_ratio=0.5):
    out = []
    for _ in range(count):
        k = rng.randrange(0, key_range)
        out.append(("search" if rng.random() < search_ratio else "insert", k))
    return out
