"""Constructive generation of satisfying states for assertions in the
corpus fragment.

States are built by laying out the spatial atoms (arrays, pages, nodes,
whole trees), solving directly pinned variables from pure equalities,
sampling the rest from small domains, and finally verifying the result
with the satisfaction checker; candidates that fail verification are
discarded, so a returned state is always a checked model.
"""

import random

from .assertions import assertion_fv, assertion_sat, is_pure
from .ast import PAGE_SIZE
from .btreemodel import PyBTree, build_random_tree, serialize_tree
from .heaps import AbstractHeap, intervals_size, merge_intervals
from .predicates import (
    FREE_LIST_ADDR, FREE_LIST_CAP, K32, K64, NODE_KEY_CAP, NODE_PTR_CAP,
)
from .terms import Undefined, eval_term


class GenFailure(Exception):
    pass


class HeapBuilder:
    """Collects byte segments; overlap is detected when the heap is built."""

    def __init__(self, rng):
        self.rng = rng
        self.segments = []  # (addr, bytes)
        self.size = None
        self.size_term = None

    def put_bytes(self, addr, data):
        if addr < 0:
            raise GenFailure("negative address")
        self.segments.append((addr, bytes(data)))

    def put_byte(self, addr, b):
        self.put_bytes(addr, bytes([b & 0xFF]))

    def put_u32(self, addr, v):
        self.put_bytes(addr, (v & 0xFFFFFFFF).to_bytes(4, "little"))

    def put_dontcare(self, addr, nbytes):
        if nbytes > 0:
            self.put_bytes(addr, self.rng.randbytes(nbytes))

    def demand_size(self, n):
        if self.size is not None and self.size != n:
            raise GenFailure("conflicting size demands")
        self.size = n

    def defer_size(self, term):
        self.size_term = term

    def max_addr(self):
        return max((a + len(d) for a, d in self.segments), default=0)

    def heap(self):
        ivs = merge_intervals([(a, a + len(d)) for a, d in self.segments])
        if intervals_size(ivs) != sum(len(d) for _a, d in self.segments):
            raise GenFailure("overlapping cells")
        span = self.max_addr()
        buf = bytearray(span)
        for a, d in self.segments:
            buf[a:a + len(d)] = d
        return AbstractHeap.from_memory(buf, ivs, self.size)


def _flatten_for_gen(h, spatial, pures):
    tag = h[0]
    if tag == "emp":
        return
    if is_pure(h) or tag == "bot":
        pures.append(h)
        return
    if tag in ("star", "and"):
        for s in h[1:]:
            _flatten_for_gen(s, spatial, pures)
        return
    spatial.append(h)


def _solve_pins(pures, sigma):
    """Bind variables pinned by equalities whose other side evaluates."""
    for _ in range(8):
        changed = False
        for p in pures:
            if p[0] == "pure" and p[1] == "=" and len(p[2]) == 2:
                a, b = p[2]
                for x, t in ((a, b), (b, a)):
                    if x[0] == "v" and x[1] not in sigma:
                        try:
                            sigma[x[1]] = eval_term(t, sigma)
                            changed = True
                        except Undefined:
                            pass
        if not changed:
            return


def _length_constraints(pures, sigma):
    """Exact lengths pinned by (= (len v) E) facts."""
    out = {}
    for p in pures:
        if p[0] == "pure" and p[1] == "=" and len(p[2]) == 2:
            for a, b in (p[2], p[2][::-1]):
                if a[0] == "len" and a[1][0] == "v":
                    try:
                        out[a[1][1]] = eval_term(b, sigma)
                    except Undefined:
                        pass
    return out


def _sample_list(rng, length=None, lo=0, hi=1000, sorted_=True, distinct=True):
    if length is None:
        length = rng.randrange(0, 6)
    if distinct:
        if length > hi - lo:
            raise GenFailure("list longer than key space")
        vals = rng.sample(range(lo, hi), length)
    else:
        vals = [rng.randrange(lo, hi) for _ in range(length)]
    if sorted_:
        vals.sort()
    return tuple(vals)


class _Gen:
    def __init__(self, env, rng, pures, lengths):
        self.env = env
        self.rng = rng
        self.pures = pures
        self.lengths = lengths
        self.next_page = 1
        self.next_addr = 0

    def fresh_page(self):
        p = self.next_page
        self.next_page += 1
        return p

    def fresh_addr(self, nbytes):
        a = self.next_addr
        self.next_addr += nbytes + 4 * self.rng.randrange(0, 3)
        return a

    def need(self, term, sigma, sampler):
        try:
            return eval_term(term, sigma)
        except Undefined:
            if term[0] == "v":
                sigma[term[1]] = sampler()
                return sigma[term[1]]
            raise GenFailure("cannot sample compound term %r" % (term,))

    # ------------------------------------------------------- atom emitters

    def emit(self, atom, sigma, hb: HeapBuilder):
        tag = atom[0]
        if tag == "cell":
            addr = self.need(atom[1], sigma, lambda: self.fresh_addr(1))
            if atom[2] is None:
                hb.put_byte(addr, self.rng.randrange(0, 256))
            else:
                hb.put_byte(addr, eval_term(atom[2], sigma) % 256)
            return
        if tag == "cellt":
            width = 4 if atom[1] == "i32" else 8
            addr = self.need(atom[2], sigma, lambda: self.fresh_addr(width))
            if atom[3] is None:
                hb.put_dontcare(addr, width)
            else:
                v = eval_term(atom[3], sigma)
                hb.put_bytes(addr, (v % (1 << (8 * width))).to_bytes(width, "little"))
            return
        if tag == "size":
            try:
                hb.demand_size(eval_term(atom[1], sigma))
            except Undefined:
                hb.defer_size(atom[1])
            return
        if tag == "iterstar":
            lo = eval_term(atom[2], sigma)
            hi = eval_term(atom[3], sigma)
            inner = dict(sigma)
            for i in range(lo, hi):
                inner[atom[1]] = i
                self.emit(atom[4], inner, hb)
            return
        if tag == "pred":
            self.emit_pred(atom[1], atom[2], sigma, hb)
            return
        if tag == "or":
            choice = self.rng.choice(atom[1:])
            sp, pu = [], []
            _flatten_for_gen(choice, sp, pu)
            self.pures.extend(pu)
            _solve_pins(pu, sigma)
            for s in sp:
                self.emit(s, sigma, hb)
            return
        if tag == "exists":
            sp, pu = [], []
            _flatten_for_gen(atom[2], sp, pu)
            self.pures.extend(pu)
            _solve_pins(pu, sigma)
            for s in sp:
                self.emit(s, sigma, hb)
            return
        raise GenFailure("cannot generate for %r" % (tag,))

    def emit_pred(self, name, args, sigma, hb):
        rng = self.rng
        if name in ("OBA", "BA", "OBAnd", "OBAseg"):
            seg = name == "OBAseg"
            x_t = args[0]
            alpha_t = args[1] if seg else args[2]
            alpha = self._sample_array_arg(alpha_t, sigma,
                                           sorted_=name != "BA",
                                           distinct=name == "OBAnd")
            if seg:
                x = self.need(x_t, sigma, lambda: self.fresh_addr(4 * len(alpha)))
                for i, v in enumerate(alpha):
                    hb.put_u32(x + 4 * i, v)
                return
            n_t = args[1]
            n = self.need(n_t, sigma, lambda: len(alpha) + 1 + rng.randrange(0, 4))
            x = self.need(x_t, sigma, lambda: self.fresh_addr(4 + 4 * n))
            hb.put_u32(x, len(alpha))
            for i, v in enumerate(alpha):
                hb.put_u32(x + 4 + 4 * i, v)
            hb.put_dontcare(x + 4 + 4 * len(alpha), 4 * (n - len(alpha)))
            return
        if name == "Page":
            a = self.need(args[0], sigma, self.fresh_page)
            hb.put_dontcare(a * K64, K64)
            return
        if name == "Free":
            phi_t = args[0]
            try:
                phi = eval_term(phi_t, sigma)
            except Undefined:
                phi = tuple(self.fresh_page() for _ in range(rng.randrange(0, 3)))
                if phi_t[0] == "v":
                    sigma[phi_t[1]] = phi
            hb.put_u32(FREE_LIST_ADDR, len(phi))
            for i, p in enumerate(phi):
                hb.put_u32(FREE_LIST_ADDR + 4 + 4 * i, p)
            hb.put_dontcare(FREE_LIST_ADDR + 4 + 4 * len(phi),
                            4 * (FREE_LIST_CAP - len(phi)))
            for p in phi:
                hb.put_dontcare(p * K64, K64)
            return
        if name == "Meta":
            t = self.need(args[0], sigma, lambda: rng.randrange(2, 5))
            r = self.need(args[1], sigma, self.fresh_page)
            hb.put_u32(0, t)
            hb.put_u32(4, r)
            self.emit(("size", args[2]), sigma, hb)
            self.emit_pred("Free", (args[3],), sigma, hb)
            return
        if name == "Node":
            x = self.need(args[0], sigma, self.fresh_page)
            kappa = self._sample_array_arg(args[2], sigma, sorted_=True,
                                           distinct=True, cap=NODE_KEY_CAP)
            try:
                lam = eval_term(args[1], sigma)
            except Undefined:
                lam = rng.randrange(0, 2)
                if args[1][0] == "v":
                    sigma[args[1][1]] = lam
            try:
                pi = eval_term(args[3], sigma)
            except Undefined:
                pi = () if lam != 0 else _sample_list(
                    rng, length=1 + rng.randrange(0, 5), lo=1, hi=64,
                    sorted_=False, distinct=False)
                if args[3][0] == "v":
                    sigma[args[3][1]] = pi
            self._write_node_page(hb, x, lam, kappa, pi)
            return
        if name == "BTreeRec":
            self._emit_subtree(args, sigma, hb)
            return
        if name == "BTree":
            self._emit_tree(args, sigma, hb)
            return
        if name in ("NKeys", "NPtrs"):
            expanded = self.env.expand(name, list(args))
            sp, pu = [], []
            _flatten_for_gen(expanded, sp, pu)
            self.pures.extend(pu)
            for s in sp:
                self.emit(s, sigma, hb)
            return
        raise GenFailure("no generator for predicate %s" % name)

    def _write_node_page(self, hb, page, lam, keys, ptrs):
        buf = bytearray(self.rng.randbytes(PAGE_SIZE))
        buf[0:4] = int(lam).to_bytes(4, "little")
        buf[4:8] = len(keys).to_bytes(4, "little")
        for i, v in enumerate(keys):
            buf[8 + 4 * i:12 + 4 * i] = (v & 0xFFFFFFFF).to_bytes(4, "little")
        buf[K32:K32 + 4] = len(ptrs).to_bytes(4, "little")
        for i, v in enumerate(ptrs):
            off = K32 + 4 + 4 * i
            buf[off:off + 4] = (v & 0xFFFFFFFF).to_bytes(4, "little")
        hb.put_bytes(page * K64, buf)

    def _sample_array_arg(self, term, sigma, sorted_=True, distinct=True, cap=None):
        try:
            v = eval_term(term, sigma)
            if not isinstance(v, tuple):
                raise GenFailure("array argument is not a list")
            return v
        except Undefined:
            pass
        length = None
        if term[0] == "v" and term[1] in self.lengths:
            length = self.lengths[term[1]]
        if term[0] == "cons" and term[1][0] == "v" and term[2][0] == "v":
            # (cons a rest) with both parts unbound: sample a nonempty list
            alpha = _sample_list(self.rng, length=1 + self.rng.randrange(0, 5),
                                 sorted_=sorted_, distinct=distinct)
            sigma.setdefault(term[1][1], alpha[0])
            sigma.setdefault(term[2][1], alpha[1:])
            return eval_term(term, sigma)
        alpha = _sample_list(self.rng, length=length, sorted_=sorted_,
                             distinct=distinct)
        if cap is not None and len(alpha) > cap:
            raise GenFailure("sampled array exceeds capacity")
        if term[0] == "v":
            sigma[term[1]] = alpha
        return alpha

    def _emit_tree(self, args, sigma, hb):
        rng = self.rng
        t = self.need(args[0], sigma, lambda: rng.randrange(2, 5))
        try:
            kappa = eval_term(args[1], sigma)
            tree = PyBTree(t)
            for k in sorted(kappa):
                tree.insert(k)
        except Undefined:
            tree = build_random_tree(rng, t, rng.randrange(0, 12))
            if args[1][0] == "v":
                sigma[args[1][1]] = tree.key_set()
        data, pages, _root = serialize_tree(tree, scramble=rng)
        hb.put_bytes(0, data)
        hb.demand_size(pages)

    def _emit_subtree(self, args, sigma, hb):
        """BTreeRec(t, r, l, x, kappa, lam, full): a subtree rooted at page x
        inside a memory of l pages."""
        rng = self.rng
        t = self.need(args[0], sigma, lambda: rng.randrange(2, 4))
        try:
            kappa = eval_term(args[4], sigma)
            tree = PyBTree(t)
            for k in sorted(kappa):
                tree.insert(k)
        except Undefined:
            tree = build_random_tree(rng, t, rng.randrange(0, 10))
        try:
            want_full = eval_term(args[6], sigma)
        except Undefined:
            want_full = None
        if want_full == 0 and len(tree.root.keys) == 2 * t - 1:
            nxt = (max(tree.key_set()) + 1) if tree.key_set() else 0
            tree.insert(nxt)  # splitting the root makes it non-full
        nodes = tree.nodes()
        first = self.next_page
        for i, n in enumerate(nodes):
            n.page = first + i
        self.next_page = first + len(nodes)
        for n in nodes:
            self._write_node_page(hb, n.page, 1 if n.leaf else 0, n.keys,
                                  [] if n.leaf else [c.page for c in n.children])
        root_page = nodes[0].page
        bindings = (
            (args[3], root_page),
            (args[4], tree.key_set()),
            (args[5], 1 if tree.root.leaf else 0),
            (args[6], 1 if len(tree.root.keys) == 2 * t - 1 else 0),
            (args[1], root_page),
            (args[2], self.next_page + rng.randrange(0, 2)),
        )
        for argterm, value in bindings:
            if argterm[0] == "v" and argterm[1] not in sigma:
                sigma[argterm[1]] = value


_SMALL_INTS = (0, 1, 2, 3, 4, 5, 7, 8)


def gen_abstract_states(p, env, rng: random.Random, budget=16, max_tries=None,
                        verify_fuel=300000):
    """Up to `budget` verified (sigma, stack values, heap) models of p."""
    out = []
    tries = 0
    cap = max_tries if max_tries is not None else budget * 24
    free_vars = sorted(assertion_fv(p))
    while len(out) < budget and tries < cap:
        tries += 1
        try:
            state = _one_state(p, env, rng, free_vars)
        except (GenFailure, Undefined):
            continue
        sigma, stack_vals, heap = state
        ok = assertion_sat(p, stack_vals, sigma, heap, env, verify_fuel)
        if ok is True:
            out.append(state)
    return out


def _list_vars(p):
    """Variables used as lists (arguments of list operators)."""
    out = set()

    _LIST_POS = {"len": (1,), "idx": (1,), "sub": (1,), "setof": (1,),
                 "cat": (1, 2), "cons": (2,), "bigunion": (1,)}

    def walk_term(t):
        for pos in _LIST_POS.get(t[0], ()):
            if t[pos][0] == "v":
                out.add(t[pos][1])
        if t[0] not in ("c", "v"):
            for a in t[1:]:
                walk_term(a)

    def walk(h):
        tag = h[0]
        if tag in ("pure", "pred"):
            for a in h[2]:
                walk_term(a)
        elif tag in ("cell",):
            walk_term(h[1])
            if h[2] is not None:
                walk_term(h[2])
        elif tag == "cellt":
            walk_term(h[2])
            if h[3] is not None:
                walk_term(h[3])
        elif tag == "size":
            walk_term(h[1])
        elif tag in ("and", "or", "star", "not"):
            for s in h[1:]:
                walk(s)
        elif tag == "imp":
            walk(h[1])
            walk(h[2])
        elif tag == "exists":
            walk(h[2])
        elif tag in ("forall", "iterstar"):
            walk_term(h[2])
            walk_term(h[3])
            walk(h[4])

    walk(p.heap)
    for t in p.stack:
        walk_term(t)
    return out


def _one_state(p, env, rng, free_vars):
    spatial, pures = [], []
    _flatten_for_gen(p.heap, spatial, pures)
    sigma = {}
    _solve_pins(pures, sigma)
    # bare iterated stars need their list variables fixed up front
    if not any(s[0] == "pred" for s in spatial):
        for name in sorted(_list_vars(p)):
            if name not in sigma:
                sigma[name] = _sample_list(rng)
    gen = _Gen(env, rng, list(pures), _length_constraints(pures, sigma))
    hb = HeapBuilder(rng)
    for atom in spatial:
        gen.emit(atom, sigma, hb)
        _solve_pins(gen.pures, sigma)
    for name in list(free_vars) + list(p.binders):
        if name not in sigma:
            sigma[name] = rng.choice(_SMALL_INTS)
    _solve_pins(gen.pures, sigma)
    if hb.size is None and hb.size_term is not None:
        pages_needed = (hb.max_addr() + PAGE_SIZE - 1) // PAGE_SIZE
        try:
            hb.size = eval_term(hb.size_term, sigma)
        except Undefined:
            hb.size = pages_needed + rng.randrange(0, 2)
            if hb.size_term[0] == "v" and hb.size_term[1] not in sigma:
                sigma[hb.size_term[1]] = hb.size
    if isinstance(hb.size, int) and hb.max_addr() > hb.size * PAGE_SIZE:
        raise GenFailure("cells beyond the demanded size")
    stack_vals = [eval_term(t, sigma) for t in p.stack]
    return sigma, stack_vals, hb.heap()
