"""Builtin abstract predicates: bounded arrays, pages, free lists, tree
nodes, and the recursive B-tree shape.

Each definition is a syntactic shorthand: `expand` instantiates the body
with the given argument terms (used by fold/unfold proof steps), while
`expand_ground` additionally resolves internal existentials by reading
the heap (bounded, heap-directed unfolding used by satisfaction checks).
Inference hooks propose bindings for unbound argument variables, again by
reading the heap.
"""

from .ast import PAGE_SIZE
from .terms import A, C, V, Undefined, eval_term
from .assertions import (
    And, Cell, CellT, EMP, Eq, Exists, Pure, PredI, Size, Star,
    heap_subst,
)

I32_MAX = (1 << 31) - 1
K64 = PAGE_SIZE
K32 = PAGE_SIZE // 2

FREE_LIST_ADDR = 8
FREE_LIST_CAP = 16381
NODE_KEY_CAP = 4095
NODE_PTR_CAP = 4096


def _mul(a, b):
    return A("*", a, b)


def _add(*ts):
    out = ts[0]
    for t in ts[1:]:
        out = A("+", out, t)
    return out


def _len(t):
    return A("len", t)


def _idx(t, i):
    return A("idx", t, i)


class PredicateDef:
    def __init__(self, name, params, build, infer=None, ground=None):
        self.name = name
        self.params = params
        self.build = build          # arg terms -> formula
        self.infer = infer          # (argvals-or-None list, heap) -> [bindings]
        self.ground = ground        # (argvals, heap, env) -> formula | None

    @property
    def arity(self):
        return len(self.params)


class PredicateEnv:
    def __init__(self):
        self.defs = {}

    def register(self, pdef):
        self.defs[pdef.name] = pdef

    def __contains__(self, name):
        return name in self.defs

    def expand(self, name, args):
        """Syntactic unfolding: the definition body at these argument terms,
        with internal binders renamed apart."""
        pdef = self.defs[name]
        if len(args) != pdef.arity:
            raise ValueError("%s expects %d arguments, got %d"
                             % (name, pdef.arity, len(args)))
        _GROUND_SEQ[0] += 1
        return _fresh(pdef.build(*args), "u%d" % _GROUND_SEQ[0])

    def expand_ground(self, name, args, sigma, heap):
        """Unfolding for satisfaction: arguments evaluated to constants,
        internal existentials resolved against the heap where the
        definition provides a ground expander."""
        pdef = self.defs[name]
        vals = [eval_term(a, sigma) for a in args]
        if pdef.ground is not None:
            out = pdef.ground(vals, heap, self)
            if out is not None:
                return out
        return self.expand(name, [C(v) for v in vals])

    def infer(self, name, args, sigma, heap):
        """Candidate bindings for unbound variables among `args`."""
        pdef = self.defs.get(name)
        if pdef is None or pdef.infer is None:
            return []
        vals = []
        unbound = []
        for a in args:
            try:
                vals.append(eval_term(a, sigma))
                unbound.append(None)
            except Undefined:
                vals.append(None)
                unbound.append(a[1] if a[0] == "v" else None)
        if all(u is None for u in unbound):
            return []
        cands = pdef.infer(vals, heap)
        out = []
        for cand in cands:
            binding = {}
            ok = True
            for i, u in enumerate(unbound):
                if u is not None:
                    if cand[i] is None:
                        ok = False
                        break
                    binding[u] = cand[i]
            if ok and binding:
                out.append(binding)
        return out


# ------------------------------------------------------------ heap reads

def _read_u32(heap, addr):
    raw = heap.read_range(addr, 4)
    if raw is None:
        return None
    return int.from_bytes(raw, "little")


def read_array(heap, base, cap=None):
    """Read a length-prefixed i32 array at base; None when unreadable."""
    n = _read_u32(heap, base)
    if n is None or n < 0 or (cap is not None and n > cap):
        return None
    out = []
    for i in range(n):
        v = _read_u32(heap, base + 4 + 4 * i)
        if v is None:
            return None
        out.append(v)
    return tuple(out)


# ----------------------------------------------------------- definitions

def _obaseg(x, alpha):
    i = V("#i")
    return ("iterstar", "#i", C(0), _len(alpha),
            CellT("i32", _add(x, _mul(C(4), i)), _idx(alpha, i)))


def _ba(x, n, alpha):
    i = V("#i")
    cells = Star(
        CellT("i32", x, _len(alpha)),
        PredI("OBAseg", _add(x, C(4)), alpha),
        ("iterstar", "#i", _len(alpha), n,
         CellT("i32", _add(x, C(4), _mul(C(4), i)), None)),
    )
    return And(cells,
               Pure("<=", _len(alpha), n),
               Pure("<=", _add(x, C(4), _mul(C(4), n)), C(I32_MAX)))


def _oba(x, n, alpha):
    return And(PredI("BA", x, n, alpha), Pure("ordered", alpha))


def _oba_nd(x, n, alpha):
    return And(PredI("OBA", x, n, alpha),
               Eq(_len(alpha), A("card", A("setof", alpha))))


def _page(a):
    i = V("#i")
    return And(
        ("iterstar", "#i", _mul(a, C(K64)), _mul(_add(a, C(1)), C(K64)),
         Cell(i, None)),
        Pure("<=", C(0), a),
        Pure("<=", _mul(_add(a, C(1)), C(K64)), C(I32_MAX)),
    )


def _free(phi):
    i = V("#i")
    return Star(
        PredI("OBAnd", C(FREE_LIST_ADDR), C(FREE_LIST_CAP), phi),
        ("iterstar", "#i", C(0), _len(phi), PredI("Page", _idx(phi, i))),
    )


def _meta(t, r, mu, phi):
    return Star(CellT("i32", C(0), t), CellT("i32", C(4), r), Size(mu),
                PredI("Free", phi))


def _nkeys(x, kappa):
    return PredI("OBAnd", _add(_mul(x, C(K64)), C(4)), C(NODE_KEY_CAP), kappa)


def _nptrs(x, pi):
    return PredI("BA", _add(_mul(x, C(K64)), C(K32)), C(NODE_PTR_CAP), pi)


# Region of a page actually reachable through the key/pointer arrays; the
# remainder is padding owned by the node so a freed node returns a whole page.
NODE_KEYS_END = 4 + 4 + 4 * NODE_KEY_CAP
NODE_PTRS_END = K32 + 4 + 4 * NODE_PTR_CAP


def _node(x, lam, kappa, pi):
    base = _mul(x, C(K64))
    i = V("#i")
    pad1 = ("iterstar", "#i", _add(base, C(NODE_KEYS_END)), _add(base, C(K32)),
            Cell(i, None))
    pad2 = ("iterstar", "#i", _add(base, C(NODE_PTRS_END)), _add(base, C(K64)),
            Cell(i, None))
    return Star(CellT("i32", base, lam),
                PredI("NKeys", x, kappa), PredI("NPtrs", x, pi),
                pad1, pad2)


def _btreerec(t, r, l, x, kappa, lam, full):
    kx, px = V("#kx"), V("#px")
    lam2, kbar, fbar = V("#lam2"), V("#kbar"), V("#fbar")
    two_t_1 = A("-", _mul(C(2), t), C(1))
    node = PredI("Node", x, lam, kx, px)
    shape = And(
        Pure("<=", _len(kx), two_t_1),
        ("imp", Pure("!=", x, r), Pure("<=", A("-", t, C(1)), _len(kx))),
        ("imp", Pure("<", _len(kx), two_t_1), Eq(full, C(0))),
        ("imp", Eq(_len(kx), two_t_1), Pure("!=", full, C(0))),
    )
    leaf = And(Pure("!=", lam, C(0)), Eq(px, C(())),
               Eq(A("setof", kx), kappa), EMP)
    child_i = V("#i")
    internal = And(
        Eq(lam, C(0)),
        Pure("<", C(0), _len(kx)),
        Eq(_len(kx), A("-", _len(px), C(1))),
        Exists(("#lam2", "#kbar", "#fbar"), And(
            Eq(_len(kbar), _len(px)),
            Eq(_len(fbar), _len(px)),
            Eq(kappa, A("union", A("bigunion", kbar), A("setof", kx))),
            Pure("keysep", kbar, kx),
            ("forall", "#i", C(0), _len(px),
             Pure("<", _idx(px, child_i), l)),
            ("iterstar", "#i", C(0), _len(px),
             PredI("BTreeRec", t, r, l, _idx(px, child_i),
                   _idx(kbar, child_i), lam2, _idx(fbar, child_i))),
        )),
    )
    return And(Pure("<", x, l),
               Exists(("#kx", "#px"),
                      And(shape, Star(node, ("or", leaf, internal)))))


def _btree(t, kappa):
    r, mu, phi = V("#r"), V("#mu"), V("#phi")
    lam, full = V("#lam"), V("#full")
    return Exists(("#r", "#mu", "#phi", "#lam", "#full"),
                  Star(PredI("Meta", t, r, mu, phi),
                       PredI("BTreeRec", t, r, mu, r, kappa, lam, full)))


# ------------------------------------------------------- inference hooks

def _infer_array(vals, heap):
    x, n, alpha = vals
    if x is None or alpha is not None:
        return []
    arr = read_array(heap, x, n)
    if arr is None:
        return []
    return [(x, n, arr)]


def _infer_node(vals, heap):
    x, lam, kappa, pi = vals
    if x is None:
        return []
    lam_v = _read_u32(heap, x * K64)
    keys = read_array(heap, x * K64 + 4, NODE_KEY_CAP)
    ptrs = read_array(heap, x * K64 + K32, NODE_PTR_CAP)
    if lam_v is None or keys is None or ptrs is None:
        return []
    return [(x, lam_v, keys, ptrs)]


def _infer_free(vals, heap):
    (phi,) = vals
    if phi is not None:
        return []
    arr = read_array(heap, FREE_LIST_ADDR, FREE_LIST_CAP)
    if arr is None:
        return []
    return [(arr,)]


def _infer_meta(vals, heap):
    t, r, mu, phi = vals
    t_v = _read_u32(heap, 0)
    r_v = _read_u32(heap, 4)
    phi_v = read_array(heap, FREE_LIST_ADDR, FREE_LIST_CAP)
    mu_v = heap.size
    if t_v is None or r_v is None:
        return []
    return [(t_v, r_v, mu_v, phi_v)]


def _tree_keys(heap, t, x, budget):
    """Key set, leaf flag, and fullness of the subtree at page x; None on
    malformed layouts (cycles are cut by the budget)."""
    if budget[0] <= 0 or t is None or x is None:
        return None
    budget[0] -= 1
    lam = _read_u32(heap, x * K64)
    keys = read_array(heap, x * K64 + 4, NODE_KEY_CAP)
    ptrs = read_array(heap, x * K64 + K32, NODE_PTR_CAP)
    if lam is None or keys is None or ptrs is None:
        return None
    full = 1 if len(keys) == 2 * t - 1 else 0
    acc = set(keys)
    if lam == 0:
        for p in ptrs:
            sub = _tree_keys(heap, t, p, budget)
            if sub is None:
                return None
            acc |= sub[0]
    return frozenset(acc), lam, full


def _infer_btreerec(vals, heap):
    t, r, l, x, kappa, lam, full = vals
    if t is None or x is None:
        return []
    pages = heap.size if heap.size is not None else 1024
    got = _tree_keys(heap, t, x, [max(pages, 8)])
    if got is None:
        return []
    keys, lam_v, full_v = got
    if l is None and heap.size is not None:
        l = heap.size
    if r is None:
        r = x
    return [(t, r, l, x, keys, lam_v, full_v)]


# --------------------------------------------------- ground expansion

def _fresh(body, tag):
    """Rename '#'-prefixed binders apart so nested unfoldings never clash."""
    ren = {}

    def walk(h):
        if h[0] == "exists":
            names = []
            for nm in h[1]:
                if nm.startswith("#"):
                    nn = nm + tag
                    ren[nm] = nn
                    names.append(nn)
                else:
                    names.append(nm)
            return ("exists", tuple(names), walk(h[2]))
        if h[0] in ("and", "or", "star", "not"):
            return (h[0],) + tuple(walk(s) for s in h[1:])
        if h[0] == "imp":
            return ("imp", walk(h[1]), walk(h[2]))
        return h

    out = walk(body)
    if ren:
        out = heap_subst(out, {old: V(new) for old, new in ren.items()})
    return out


_GROUND_SEQ = [0]


def _ground_btreerec(vals, heap, env):
    """Heap-directed unfolding: internal existentials replaced by the values
    actually present in memory, so recursive checks stay bounded."""
    t, r, l, x, kappa, lam, full = vals
    if not isinstance(x, int) or not isinstance(t, int):
        return None
    lam_v = _read_u32(heap, x * K64)
    kx = read_array(heap, x * K64 + 4, NODE_KEY_CAP)
    px = read_array(heap, x * K64 + K32, NODE_PTR_CAP)
    if lam_v is None or kx is None or px is None:
        return None
    two_t_1 = 2 * t - 1
    shape = And(
        Pure("<", C(x), C(l)),
        Pure("<=", C(len(kx)), C(two_t_1)),
        ("imp", Pure("!=", C(x), C(r)), Pure("<=", C(t - 1), C(len(kx)))),
        ("imp", Pure("<", C(len(kx)), C(two_t_1)), Eq(C(full), C(0))),
        ("imp", Eq(C(len(kx)), C(two_t_1)), Pure("!=", C(full), C(0))),
    )
    node = PredI("Node", C(x), C(lam), C(kx), C(px))
    if lam_v != 0:
        return And(shape,
                   Pure("!=", C(lam), C(0)),
                   Eq(C(px), C(())),
                   Eq(A("setof", C(kx)), C(kappa)),
                   node)
    budget = [max(heap.size or 0, 8)]
    kbar = []
    fbar = []
    lam2 = None
    for p in px:
        sub = _tree_keys(heap, t, p, budget)
        if sub is None:
            return None
        kbar.append(sub[0])
        lam2 = sub[1] if lam2 is None else lam2
        fbar.append(sub[2])
    kbar_t = tuple(kbar)
    fbar_t = tuple(fbar)
    children = Star(*[
        PredI("BTreeRec", C(t), C(r), C(l), C(px[i]), C(kbar_t[i]),
              C(lam2 if lam2 is not None else 1), C(fbar_t[i]))
        for i in range(len(px))
    ]) if px else EMP
    return And(
        shape,
        Eq(C(lam), C(0)),
        Pure("<", C(0), C(len(kx))),
        Eq(C(len(kx)), C(len(px) - 1)),
        Eq(C(kappa), A("union", A("bigunion", C(kbar_t)),
                       A("setof", C(kx)))),
        Pure("keysep", C(kbar_t), C(kx)),
        ("forall", "#i", C(0), C(len(px)),
         Pure("<", _idx(C(px), V("#i")), C(l))),
        Star(node, children),
    )


def builtin_predicates() -> PredicateEnv:
    """The predicate environment used by the corpus and the harness."""
    env = PredicateEnv()
    env.register(PredicateDef("OBAseg", ("x", "alpha"), _obaseg))
    env.register(PredicateDef("BA", ("x", "n", "alpha"), _ba, infer=_infer_array))
    env.register(PredicateDef("OBA", ("x", "n", "alpha"), _oba, infer=_infer_array))
    env.register(PredicateDef("OBAnd", ("x", "n", "alpha"), _oba_nd,
                              infer=_infer_array))
    env.register(PredicateDef("Page", ("a",), _page))
    env.register(PredicateDef("Free", ("phi",), _free, infer=_infer_free))
    env.register(PredicateDef("Meta", ("t", "r", "mu", "phi"), _meta,
                              infer=_infer_meta))
    env.register(PredicateDef("NKeys", ("x", "kappa"), _nkeys))
    env.register(PredicateDef("NPtrs", ("x", "pi"), _nptrs))
    env.register(PredicateDef("Node", ("x", "lam", "kappa", "pi"), _node,
                              infer=_infer_node))
    env.register(PredicateDef("BTreeRec", ("t", "r", "l", "x", "kappa", "lam", "full"),
                              _btreerec, infer=_infer_btreerec,
                              ground=_ground_btreerec))
    env.register(PredicateDef("BTree", ("t", "kappa"), _btree))
    return env
