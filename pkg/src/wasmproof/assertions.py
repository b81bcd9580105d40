"""Assertion language and executable satisfaction checking.

An assertion is a possibly existentially quantified pair of a stack part
(a term per statically known stack slot, rightmost = top) and a heap
formula.  Heap formulas are tuples:

    ('bot',) ('emp',) ('not', H) ('and', H...) ('or', H...)
    ('imp', Hpure, Hpure) ('exists', (names,), H)
    ('pred', name, (args,)) ('pure', op, (args,))
    ('forall', var, lo, hi, Hpure)
    ('star', H...) ('iterstar', var, lo, hi, H)
    ('cell', addr, val|None) ('cellt', t, addr, val|None) ('size', t)

('cell', a, v) owns a single byte; ('cellt', t, a, v) owns width(t) bytes
holding v little-endian (the k-th cell is the k-th least significant
byte); None contents mean "some value".  Satisfaction is three-valued:
fuel exhaustion during predicate unfolding or witness search yields
UNKNOWN rather than a silent False.
"""

from dataclasses import dataclass

from .ast import PAGE_SIZE, WIDTH
from .heaps import (
    AbstractHeap, intervals_contain, intervals_disjoint, intervals_size,
    intervals_subtract, intervals_union, merge_intervals,
)
from .terms import C, Undefined, eval_term, fv as term_fv, normalize, subst as term_subst


class Unknown:
    __slots__ = ()

    def __repr__(self):
        return "UNKNOWN"

    def __bool__(self):
        raise TypeError("three-valued verdict; compare with UNKNOWN explicitly")


UNKNOWN = Unknown()

BOT = ("bot",)
EMP = ("emp",)
TRUE = ("pure", "true", ())


def Pure(op, *args):
    return ("pure", op, tuple(args))


def Eq(a, b):
    return Pure("=", a, b)


def Star(*hs):
    out = []
    for h in hs:
        if h[0] == "star":
            out.extend(h[1:])
        else:
            out.append(h)
    if not out:
        return EMP
    if len(out) == 1:
        return out[0]
    return ("star",) + tuple(out)


def And(*hs):
    out = []
    for h in hs:
        if h[0] == "and":
            out.extend(h[1:])
        else:
            out.append(h)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return ("and",) + tuple(out)


def Exists(names, h):
    names = tuple(names)
    if not names:
        return h
    if h[0] == "exists":
        return ("exists", names + h[1], h[2])
    return ("exists", names, h)


def Cell(addr, val=None):
    return ("cell", addr, val)


def CellT(t, addr, val=None):
    return ("cellt", t, addr, val)


def Size(t):
    return ("size", t)


def PredI(name, *args):
    return ("pred", name, tuple(args))


@dataclass(frozen=True)
class Assertion:
    binders: tuple
    stack: tuple
    heap: tuple

    @property
    def arity(self):
        return len(self.stack)

    def __repr__(self):
        from .asexpr import assertion_to_text
        return assertion_to_text(self)


def mk_assertion(stack, heap, binders=()):
    return Assertion(tuple(binders), tuple(stack), heap)


class CaptureError(Exception):
    pass


def star2(a, b):
    """A binary star node; unlike Star this never flattens, so a frame
    appended on the right can be stripped back off syntactically."""
    return ("star", a, b)


def distribute_frame(p: Assertion, hf) -> Assertion:
    """P (x) Hf = binders.(stack | heap * Hf), defined only when the frame
    mentions none of the binders."""
    if set(p.binders) & heap_fv(hf):
        raise CaptureError("frame mentions bound variables %r"
                           % sorted(set(p.binders) & heap_fv(hf)))
    return Assertion(p.binders, p.stack, star2(p.heap, hf))


# ------------------------------------------------------------ structure

def heap_fv(h, acc=None):
    out = set() if acc is None else acc
    tag = h[0]
    if tag in ("bot", "emp"):
        return out
    if tag == "pure" or tag == "pred":
        for a in h[2]:
            term_fv(a, out)
        return out
    if tag in ("cell", "cellt"):
        idx = 1 if tag == "cell" else 2
        term_fv(h[idx], out)
        if h[idx + 1] is not None:
            term_fv(h[idx + 1], out)
        return out
    if tag == "size":
        term_fv(h[1], out)
        return out
    if tag == "not":
        return heap_fv(h[1], out)
    if tag in ("and", "or", "star"):
        for sub in h[1:]:
            heap_fv(sub, out)
        return out
    if tag == "imp":
        heap_fv(h[1], out)
        heap_fv(h[2], out)
        return out
    if tag == "exists":
        inner = heap_fv(h[2])
        out.update(inner - set(h[1]))
        return out
    if tag in ("forall", "iterstar"):
        term_fv(h[2], out)
        term_fv(h[3], out)
        inner = heap_fv(h[4])
        out.update(inner - {h[1]})
        return out
    raise ValueError("bad heap formula %r" % (h,))


def assertion_fv(p: Assertion):
    out = set()
    for t in p.stack:
        term_fv(t, out)
    heap_fv(p.heap, out)
    return out - set(p.binders)


def heap_subst(h, mapping):
    """Substitute free variables; binders shadow (no capture check — callers
    rename binders apart first when needed)."""
    tag = h[0]
    if tag in ("bot", "emp"):
        return h
    if tag in ("pure", "pred"):
        return (tag, h[1], tuple(term_subst(a, mapping) for a in h[2]))
    if tag == "cell":
        return ("cell", term_subst(h[1], mapping),
                None if h[2] is None else term_subst(h[2], mapping))
    if tag == "cellt":
        return ("cellt", h[1], term_subst(h[2], mapping),
                None if h[3] is None else term_subst(h[3], mapping))
    if tag == "size":
        return ("size", term_subst(h[1], mapping))
    if tag == "not":
        return ("not", heap_subst(h[1], mapping))
    if tag in ("and", "or", "star"):
        return (tag,) + tuple(heap_subst(s, mapping) for s in h[1:])
    if tag == "imp":
        return ("imp", heap_subst(h[1], mapping), heap_subst(h[2], mapping))
    if tag == "exists":
        inner = {k: v for k, v in mapping.items() if k not in h[1]}
        return ("exists", h[1], heap_subst(h[2], inner))
    if tag in ("forall", "iterstar"):
        inner = {k: v for k, v in mapping.items() if k != h[1]}
        return (tag, h[1], term_subst(h[2], mapping), term_subst(h[3], mapping),
                heap_subst(h[4], inner))
    raise ValueError("bad heap formula %r" % (h,))


def assertion_subst(p: Assertion, mapping):
    mapping = {k: v for k, v in mapping.items() if k not in p.binders}
    return Assertion(p.binders,
                     tuple(term_subst(t, mapping) for t in p.stack),
                     heap_subst(p.heap, mapping))


def is_pure(h):
    """True when the formula's interpretation is heap-independent."""
    tag = h[0]
    if tag == "pure" or tag == "forall":
        return True
    if tag == "imp":
        return True
    if tag in ("and", "or"):
        return all(is_pure(s) for s in h[1:])
    if tag == "not":
        return is_pure(h[1])
    return False


# ------------------------------------------------------- pure evaluation

def eval_pure(h, sigma):
    """Evaluate a pure formula to a bool; Undefined counts as
    non-satisfaction of the atom."""
    tag = h[0]
    if tag == "bot":
        return False
    if tag == "pure":
        op, args = h[1], h[2]
        if op == "true":
            return True
        try:
            vals = [eval_term(a, sigma) for a in args]
        except Undefined:
            return False
        return _apply_pure(op, vals)
    if tag == "forall":
        try:
            lo = eval_term(h[2], sigma)
            hi = eval_term(h[3], sigma)
        except Undefined:
            return False
        if not isinstance(lo, int) or not isinstance(hi, int) or hi - lo > 10 ** 6:
            return False
        var = h[1]
        inner = dict(sigma)
        for i in range(lo, hi):
            inner[var] = i
            if not eval_pure(h[4], inner):
                return False
        return True
    if tag == "imp":
        return (not eval_pure(h[1], sigma)) or eval_pure(h[2], sigma)
    if tag == "and":
        return all(eval_pure(s, sigma) for s in h[1:])
    if tag == "or":
        return any(eval_pure(s, sigma) for s in h[1:])
    if tag == "not":
        return not eval_pure(h[1], sigma)
    raise ValueError("not a pure formula: %r" % (h,))


def _apply_pure(op, vals):
    if op == "=":
        return vals[0] == vals[1]
    if op == "!=":
        return vals[0] != vals[1]
    if op in ("<", "<=", ">", ">="):
        a, b = vals
        if not isinstance(a, int) or not isinstance(b, int):
            return False
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    if op == "ordered":
        lst = vals[0]
        if not isinstance(lst, tuple):
            return False
        return all(lst[i - 1] <= lst[i] for i in range(1, len(lst)))
    if op == "in":
        coll = vals[1]
        if isinstance(coll, tuple):
            coll = frozenset(coll)
        return vals[0] in coll
    if op == "notin":
        coll = vals[1]
        if isinstance(coll, tuple):
            coll = frozenset(coll)
        return vals[0] not in coll
    if op == "keysep":
        # child key sets are separated by the node keys between them
        kbar, kx = vals
        if not isinstance(kbar, tuple) or not isinstance(kx, tuple):
            return False
        for i in range(len(kbar) - 1):
            if i >= len(kx):
                return False
            left, right = kbar[i], kbar[i + 1]
            if not isinstance(left, frozenset) or not isinstance(right, frozenset):
                return False
            sep = kx[i]
            if any(k >= sep for k in left) or any(k <= sep for k in right):
                return False
        return True
    raise ValueError("unknown pure predicate %r" % op)


# --------------------------------------------------------- satisfaction

class _FuelOut(Exception):
    pass


class _Ctl:
    __slots__ = ("env", "fuel")

    def __init__(self, env, fuel):
        self.env = env
        self.fuel = fuel

    def burn(self, n=1):
        self.fuel -= n
        if self.fuel < 0:
            raise _FuelOut()


_ABSORB = "absorb"
_IMPRECISE = "imprecise"


def _cell_interval(h, sigma):
    if h[0] == "cell":
        a = eval_term(h[1], sigma)
        return [(a, a + 1)]
    t = h[1]
    a = eval_term(h[2], sigma)
    return [(a, a + WIDTH[t])]


def _foot(h, sigma, heap, ctl):
    """Footprint of a formula: (intervals, wants_size) | _ABSORB | _IMPRECISE.

    _ABSORB marks pure formulas (they may own any subheap under *);
    _IMPRECISE means the footprint could not be determined syntactically.
    """
    tag = h[0]
    if tag in ("cell", "cellt"):
        try:
            return _cell_interval(h, sigma), False
        except Undefined:
            return _IMPRECISE
    if tag == "size":
        return [], True
    if tag == "emp":
        return [], False
    if tag == "bot":
        return _IMPRECISE
    if is_pure(h):
        return _ABSORB
    if tag == "and":
        for s in h[1:]:
            if not is_pure(s):
                return _foot(s, sigma, heap, ctl)
        return _ABSORB
    if tag == "star":
        feet = []
        wants = False
        for s in h[1:]:
            f = _foot(s, sigma, heap, ctl)
            if f is _ABSORB:
                return _IMPRECISE
            if f is _IMPRECISE:
                return _IMPRECISE
            feet.append(f[0])
            wants = wants or f[1]
        total = []
        for f in feet:
            if not intervals_disjoint(total, f):
                return _IMPRECISE
            total = intervals_union(total, f)
        return total, wants
    if tag == "iterstar":
        try:
            lo = eval_term(h[2], sigma)
            hi = eval_term(h[3], sigma)
        except Undefined:
            return _IMPRECISE
        if hi <= lo:
            return [], False
        contig = _iterstar_contiguous(h, sigma, lo, hi)
        if contig is not None:
            return [contig[0]], False
        if hi - lo > 200000:
            return _IMPRECISE
        total = []
        wants = False
        inner = dict(sigma)
        for i in range(lo, hi):
            inner[h[1]] = i
            f = _foot(h[4], inner, heap, ctl)
            if f in (_ABSORB, _IMPRECISE):
                return _IMPRECISE
            if not intervals_disjoint(total, f[0]):
                return _IMPRECISE
            total = intervals_union(total, f[0])
            wants = wants or f[1]
        return total, wants
    if tag == "pred":
        ctl.burn()
        try:
            expanded = ctl.env.expand_ground(h[1], h[2], sigma, heap)
        except Undefined:
            return _IMPRECISE
        if expanded is None:
            return _IMPRECISE
        return _foot(expanded, sigma, heap, ctl)
    if tag == "or":
        feet = [_foot(s, sigma, heap, ctl) for s in h[1:]]
        first = feet[0]
        if all(f == first for f in feet):
            return first
        return _IMPRECISE
    if tag == "exists":
        for cand in _witnesses(h[1], h[2], sigma, heap, ctl):
            inner = dict(sigma)
            inner.update(cand)
            f = _foot(h[2], inner, heap, ctl)
            if f not in (_ABSORB, _IMPRECISE):
                return f
        return _IMPRECISE
    return _IMPRECISE


def _tri_all(results):
    saw_unknown = False
    for r in results:
        if r is UNKNOWN:
            saw_unknown = True
        elif not r:
            return False
    return UNKNOWN if saw_unknown else True


def _sat(h, sigma, heap, region, has_size, ctl):
    """Does the heap restricted to region (plus the size resource when
    has_size) satisfy h?  Three-valued."""
    tag = h[0]
    if tag == "bot":
        return False
    if tag == "emp":
        return region == [] and not has_size
    if is_pure(h):
        return eval_pure(h, sigma)
    if tag == "not":
        r = _sat(h[1], sigma, heap, region, has_size, ctl)
        if r is UNKNOWN:
            return UNKNOWN
        return not r
    if tag in ("cell", "cellt"):
        try:
            iv = _cell_interval(h, sigma)
        except Undefined:
            return False
        if has_size or region != iv:
            return False
        if tag == "cell":
            want = h[2]
            addr = iv[0][0]
            got = heap.get(addr)
            if got is None:
                return False
            if want is None:
                return True
            try:
                return got == eval_term(want, sigma) % 256
            except Undefined:
                return False
        t, want = h[1], h[3]
        start = iv[0][0]
        raw = heap.read_range(start, WIDTH[t])
        if raw is None:
            return False
        if want is None:
            return True
        try:
            v = eval_term(want, sigma)
        except Undefined:
            return False
        if not isinstance(v, int):
            return False
        return raw == (v % (1 << (8 * WIDTH[t]))).to_bytes(WIDTH[t], "little")
    if tag == "size":
        if region != [] or not has_size:
            return False
        try:
            return heap.size == eval_term(h[1], sigma)
        except Undefined:
            return False
    if tag == "and":
        spatial = [s for s in h[1:] if not is_pure(s)]
        pures = [s for s in h[1:] if is_pure(s)]
        for p in pures:
            if not eval_pure(p, sigma):
                return False
        if not spatial:
            return True
        return _tri_all(_sat(s, sigma, heap, region, has_size, ctl) for s in spatial)
    if tag == "or":
        saw_unknown = False
        for s in h[1:]:
            r = _sat(s, sigma, heap, region, has_size, ctl)
            if r is True:
                return True
            if r is UNKNOWN:
                saw_unknown = True
        return UNKNOWN if saw_unknown else False
    if tag == "exists":
        saw_unknown = False
        found_candidate = False
        for cand in _witnesses(h[1], h[2], sigma, heap, ctl):
            found_candidate = True
            ctl.burn()
            inner = dict(sigma)
            inner.update(cand)
            r = _sat(h[2], inner, heap, region, has_size, ctl)
            if r is True:
                return True
            if r is UNKNOWN:
                saw_unknown = True
        if saw_unknown:
            return UNKNOWN
        return False if found_candidate else False
    if tag == "pred":
        ctl.burn()
        try:
            expanded = ctl.env.expand_ground(h[1], h[2], sigma, heap)
        except Undefined:
            return False
        if expanded is None:
            return False
        return _sat(expanded, sigma, heap, region, has_size, ctl)
    if tag == "iterstar":
        return _sat_iterstar(h, sigma, heap, region, has_size, ctl)
    if tag == "star":
        return _sat_star(list(h[1:]), sigma, heap, region, has_size, ctl)
    raise ValueError("bad heap formula %r" % (h,))


def _iterstar_cell_at(h, sigma, i):
    inner = dict(sigma)
    inner[h[1]] = i
    body = h[4]
    if body[0] == "cell":
        return eval_term(body[1], inner), 1, body[2]
    if body[0] == "cellt":
        return eval_term(body[2], inner), WIDTH[body[1]], body[3]
    raise Undefined("not a cell body")


def _iterstar_contiguous(h, sigma, lo, hi):
    """Interval covered by an iterated star of cells marching at their own
    width, with don't-care or index-independent constant contents; returns
    (interval, fill-bytes-or-None) or None when the shape does not apply."""
    body = h[4]
    if body[0] == "cell":
        want = body[2]
        width = 1
    elif body[0] == "cellt":
        want = body[3]
        width = WIDTH[body[1]]
    else:
        return None
    fill = None
    if want is not None:
        if want[0] == "c" and isinstance(want[1], int):
            fill = (want[1] % (1 << (8 * width))).to_bytes(width, "little")
        else:
            return None
    try:
        a0, w, _ = _iterstar_cell_at(h, sigma, lo)
        if hi - lo > 1:
            a1, _, _ = _iterstar_cell_at(h, sigma, lo + 1)
            alast, _, _ = _iterstar_cell_at(h, sigma, hi - 1)
            if a1 - a0 != w or alast != a0 + w * (hi - 1 - lo):
                return None
    except Undefined:
        return None
    return (a0, a0 + w * (hi - lo)), fill


def _sat_iterstar(h, sigma, heap, region, has_size, ctl):
    try:
        lo = eval_term(h[2], sigma)
        hi = eval_term(h[3], sigma)
    except Undefined:
        return False
    if not isinstance(lo, int) or not isinstance(hi, int):
        return False
    if hi <= lo:
        return region == [] and not has_size
    if has_size:
        return False
    contig = _iterstar_contiguous(h, sigma, lo, hi)
    if contig is not None:
        iv, fill = contig
        raw = heap.read_range(iv[0], iv[1] - iv[0])
        if raw is None or region != [iv]:
            return False
        if fill is None:
            return True
        return raw == fill * (hi - lo)
    body = h[4]
    if body[0] in ("cell", "cellt") and hi - lo <= 200000:
        # per-index cells with known contents: direct reads
        total = []
        inner = dict(sigma)
        for i in range(lo, hi):
            inner[h[1]] = i
            try:
                if body[0] == "cell":
                    a, w, want = eval_term(body[1], inner), 1, body[2]
                else:
                    a, w, want = eval_term(body[2], inner), WIDTH[body[1]], body[3]
                raw = heap.read_range(a, w)
                if raw is None:
                    return False
                if want is not None:
                    v = eval_term(want, inner)
                    if not isinstance(v, int):
                        return False
                    if raw != (v % (1 << (8 * w))).to_bytes(w, "little"):
                        return False
            except Undefined:
                return False
            total.append((a, a + w))
        merged = merge_intervals(total)
        if intervals_size(merged) != w * (hi - lo):
            return False  # overlapping cells cannot compose
        return merged == region
    star = _unroll_iterstar(h, sigma)
    if star is None:
        return False
    return _sat(star, sigma, heap, region, has_size, ctl)


def _unroll_iterstar(h, sigma):
    try:
        lo = eval_term(h[2], sigma)
        hi = eval_term(h[3], sigma)
    except Undefined:
        return None
    if not isinstance(lo, int) or not isinstance(hi, int) or hi - lo > 20000:
        return None
    parts = []
    for i in range(lo, hi):
        parts.append(heap_subst(h[4], {h[1]: C(i)}))
    return Star(*parts)


def _sat_star(parts, sigma, heap, region, has_size, ctl):
    spatial = []
    absorbing = False
    for p in parts:
        if is_pure(p):
            if not eval_pure(p, sigma):
                return False
            absorbing = True
        else:
            spatial.append(p)
    if not spatial:
        return True if absorbing or (region == [] and not has_size) else \
            (region == [] and not has_size)

    feet = []
    for s in spatial:
        f = _foot(s, sigma, heap, ctl)
        if f is _ABSORB:
            absorbing = True
            feet.append(None)
        elif f is _IMPRECISE:
            return _sat_star_brute(spatial, sigma, heap, region, has_size, ctl,
                                   absorbing)
        else:
            feet.append(f)

    total = []
    size_takers = 0
    for f in feet:
        if f is None:
            continue
        iv, wants = f
        if not intervals_disjoint(total, iv):
            return False
        total = intervals_union(total, iv)
        if wants:
            size_takers += 1
    if size_takers > 1:
        return False
    if not intervals_contain(region, total):
        return False
    leftover = intervals_subtract(region, total)
    if leftover and not absorbing:
        return False
    if has_size and size_takers == 0 and not absorbing:
        return False
    if not has_size and size_takers > 0:
        return False

    results = []
    for s, f in zip(spatial, feet):
        if f is None:
            continue  # absorbing conjunct already checked as pure
        iv, wants = f
        results.append(_sat(s, sigma, heap, iv, wants and has_size, ctl))
    return _tri_all(results)


def _sat_star_brute(spatial, sigma, heap, region, has_size, ctl, absorbing):
    """Exponential fallback for imprecise splits; small regions only."""
    nbytes = intervals_size(region)
    if nbytes > 14 or len(spatial) > 5:
        return UNKNOWN
    addrs = []
    for s, e in region:
        addrs.extend(range(s, e))

    def rec(i, remaining, size_left):
        if i == len(spatial) - 1:
            rest = merge_intervals([(a, a + 1) for a in remaining])
            return _sat(spatial[i], sigma, heap, rest, size_left, ctl)
        best = False
        n = len(remaining)
        for mask_bits in range(1 << n):
            chosen = [remaining[j] for j in range(n) if mask_bits >> j & 1]
            rest = [remaining[j] for j in range(n) if not mask_bits >> j & 1]
            for take_size in ((False, True) if size_left else (False,)):
                ctl.burn()
                r1 = _sat(spatial[i], sigma, heap,
                          merge_intervals([(a, a + 1) for a in chosen]),
                          take_size, ctl)
                if r1 is False:
                    continue
                r2 = rec(i + 1, rest, size_left and not take_size)
                if r1 is True and r2 is True:
                    return True
                if r2 is not False:
                    best = UNKNOWN
                if r1 is UNKNOWN and r2 is not False:
                    best = UNKNOWN
        return best

    if absorbing:
        # a pure conjunct may absorb arbitrary leftovers: existentially
        # drop any subset into it (covered by treating it as one more part)
        spatial = spatial + [None]

        def final(i, remaining, size_left):
            return True  # the absorber takes whatever remains, any size

        # replace the last slot's check
        def rec_abs(i, remaining, size_left):
            if i == len(spatial) - 1:
                return True
            best = False
            n = len(remaining)
            for mask_bits in range(1 << n):
                chosen = [remaining[j] for j in range(n) if mask_bits >> j & 1]
                rest = [remaining[j] for j in range(n) if not mask_bits >> j & 1]
                for take_size in ((False, True) if size_left else (False,)):
                    ctl.burn()
                    r1 = _sat(spatial[i], sigma, heap,
                              merge_intervals([(a, a + 1) for a in chosen]),
                              take_size, ctl)
                    if r1 is False:
                        continue
                    r2 = rec_abs(i + 1, rest, size_left and not take_size)
                    if r1 is True and r2 is True:
                        return True
                    if r2 is not False or r1 is UNKNOWN:
                        best = UNKNOWN
            return best

        return rec_abs(0, addrs, has_size)
    return rec(0, addrs, has_size)


# -------------------------------------------------------- witness search

def _witnesses(names, body, sigma, heap, ctl):
    """Candidate bindings for existentially bound variables.

    Sources: predicate inference hooks (reading the heap), equations that
    directly pin a variable, constants harvested from the formula, and a
    small boundary set.  Heuristic-complete for the constructive fragment
    used by the corpus.
    """
    names = tuple(n for n in names if n not in sigma)
    if not names:
        yield {}
        return
    unresolved = set(names)
    base = {}
    produced = []

    # pass 1: predicate inference hooks and directly solvable equations
    changed = True
    guard = 0
    while changed and unresolved and guard < 20:
        guard += 1
        changed = False
        for eq_var, val in _solve_equations(body, {**sigma, **base}, unresolved,
                                            heap):
            base[eq_var] = val
            unresolved.discard(eq_var)
            changed = True
        for cand in _pred_inferences(body, {**sigma, **base}, heap, ctl, unresolved):
            useful = {k: v for k, v in cand.items() if k in unresolved}
            if useful:
                base.update(useful)
                unresolved -= set(useful)
                changed = True
                break

    if not unresolved:
        yield base
        return

    # pass 2: brute candidates for the remainder
    pool = _harvest_constants(body, sigma, heap)
    free = sorted(unresolved)
    if len(free) > 2:
        yield base  # give the body a chance to fail fast / report unknown
        return

    def combos(i, acc):
        if i == len(free):
            yield dict(acc)
            return
        for v in pool:
            acc[free[i]] = v
            yield from combos(i + 1, acc)

    count = 0
    for extra in combos(0, {}):
        cand = dict(base)
        cand.update(extra)
        yield cand
        count += 1
        if count > 64:
            return


def _solve_equations(body, sigma, unresolved, heap=None):
    """Find conjuncts var = t (or t = var) whose right side evaluates, and
    size atoms that pin a variable against a concrete heap size."""
    out = []

    def walk(h):
        tag = h[0]
        if tag == "pure" and h[1] == "=":
            a, b = h[2]
            for x, t in ((a, b), (b, a)):
                if x[0] == "v" and x[1] in unresolved:
                    try:
                        out.append((x[1], eval_term(t, sigma)))
                    except Undefined:
                        pass
        elif tag == "size" and heap is not None and heap.size is not None:
            if h[1][0] == "v" and h[1][1] in unresolved:
                out.append((h[1][1], heap.size))
        elif tag in ("and", "star", "or", "exists"):
            for s in h[1:]:
                if isinstance(s, tuple):
                    walk(s)

    walk(body)
    return out


def _pred_inferences(body, sigma, heap, ctl, unresolved):
    """Ask predicate hooks to propose bindings by reading the heap."""
    cands = []

    def walk(h):
        tag = h[0]
        if tag == "pred":
            if any((a[0] == "v" and a[1] in unresolved) or
                   (set(term_fv(a)) & unresolved) for a in h[2]):
                got = ctl.env.infer(h[1], h[2], sigma, heap)
                cands.extend(got)
        elif tag in ("and", "star", "or"):
            for s in h[1:]:
                walk(s)
        elif tag == "exists":
            walk(h[2])

    walk(body)
    return cands


def _harvest_constants(body, sigma, heap):
    pool = [0, 1]
    for v in sigma.values():
        if isinstance(v, int) and v not in pool:
            pool.append(v)

    def walk(h):
        tag = h[0]
        if tag in ("pure", "pred"):
            for a in h[2]:
                _harvest_term(a, pool)
        elif tag in ("cell",):
            _harvest_term(h[1], pool)
            if h[2] is not None:
                _harvest_term(h[2], pool)
        elif tag == "cellt":
            _harvest_term(h[2], pool)
            if h[3] is not None:
                _harvest_term(h[3], pool)
        elif tag == "size":
            _harvest_term(h[1], pool)
        elif tag in ("and", "or", "star", "not"):
            for s in h[1:]:
                if isinstance(s, tuple):
                    walk(s)
        elif tag == "exists":
            walk(h[2])
        elif tag in ("forall", "iterstar"):
            walk(h[4])
        elif tag == "imp":
            walk(h[1])
            walk(h[2])

    walk(body)
    if heap.size is not None and heap.size not in pool:
        pool.append(heap.size)
    for s, e in heap.intervals()[:4]:
        if s not in pool:
            pool.append(s)
    return pool[:24]


def _harvest_term(t, pool):
    if t[0] == "c":
        if isinstance(t[1], int) and t[1] not in pool:
            pool.append(t[1])
    elif t[0] != "v":
        for a in t[1:]:
            _harvest_term(a, pool)


# ------------------------------------------------------------ public API

DEFAULT_FUEL = 100000


def heap_sat(h, sigma, heap, env=None, fuel=DEFAULT_FUEL):
    """Decide heap membership in the interpretation of h under sigma.

    Returns True/False, or UNKNOWN when fuel ran out while unfolding
    predicates or searching witnesses.
    """
    from .predicates import builtin_predicates
    ctl = _Ctl(env if env is not None else builtin_predicates(), fuel)
    try:
        return _sat(h, sigma, heap, heap.intervals(), heap.size is not None, ctl)
    except _FuelOut:
        return UNKNOWN


def assertion_sat(p: Assertion, stack_vals, sigma, heap, env=None,
                  fuel=DEFAULT_FUEL):
    """Does (stack_vals, heap) lie in the interpretation of p under sigma?

    Outer binders are resolved by witness search seeded from the stack
    values (a binder used directly as a stack slot is pinned by it).
    """
    from .predicates import builtin_predicates
    env = env if env is not None else builtin_predicates()
    if len(stack_vals) != len(p.stack):
        return False
    sigma = dict(sigma)
    binders = [b for b in p.binders if b not in sigma]
    # pin binders that name stack slots directly
    pinned = {}
    for t, v in zip(p.stack, stack_vals):
        if t[0] == "v" and t[1] in binders and t[1] not in pinned:
            pinned[t[1]] = v
    sigma.update(pinned)
    remaining = tuple(b for b in binders if b not in pinned)

    ctl = _Ctl(env, fuel)

    def check(sig):
        for t, v in zip(p.stack, stack_vals):
            try:
                if eval_term(t, sig) != v:
                    return False
            except Undefined:
                return False
        return _sat(p.heap, sig, heap, heap.intervals(),
                    heap.size is not None, ctl)

    try:
        if not remaining:
            return check(sigma)
        saw_unknown = False
        for cand in _witnesses(remaining, p.heap, sigma, heap, ctl):
            sig = dict(sigma)
            sig.update(cand)
            missing = [b for b in remaining if b not in sig]
            if missing:
                # last resort: solve leftover binders from stack slots
                for t, v in zip(p.stack, stack_vals):
                    names = term_fv(t) & set(missing)
                    if len(names) == 1 and t[0] == "v":
                        sig[t[1]] = v
                missing = [b for b in remaining if b not in sig]
            if missing:
                continue
            r = check(sig)
            if r is True:
                return True
            if r is UNKNOWN:
                saw_unknown = True
        return UNKNOWN if saw_unknown else False
    except _FuelOut:
        return UNKNOWN


# -------------------------------------------------------- alpha-equality

def _alpha_term(t, ren):
    tag = t[0]
    if tag == "c":
        return t
    if tag == "v":
        return ("v", ren.get(t[1], t[1]))
    return (tag,) + tuple(_alpha_term(a, ren) for a in t[1:])


def _alpha_heap(h, ren, counter):
    tag = h[0]
    if tag in ("bot", "emp"):
        return h
    if tag in ("pure", "pred"):
        return (tag, h[1], tuple(_alpha_term(a, ren) for a in h[2]))
    if tag == "cell":
        return ("cell", _alpha_term(h[1], ren),
                None if h[2] is None else _alpha_term(h[2], ren))
    if tag == "cellt":
        return ("cellt", h[1], _alpha_term(h[2], ren),
                None if h[3] is None else _alpha_term(h[3], ren))
    if tag == "size":
        return ("size", _alpha_term(h[1], ren))
    if tag == "not":
        return ("not", _alpha_heap(h[1], ren, counter))
    if tag in ("and", "or", "star"):
        return (tag,) + tuple(_alpha_heap(s, ren, counter) for s in h[1:])
    if tag == "imp":
        return ("imp", _alpha_heap(h[1], ren, counter),
                _alpha_heap(h[2], ren, counter))
    if tag == "exists":
        ren2 = dict(ren)
        names = []
        for nm in h[1]:
            counter[0] += 1
            nn = "?b%d" % counter[0]
            ren2[nm] = nn
            names.append(nn)
        return ("exists", tuple(names), _alpha_heap(h[2], ren2, counter))
    if tag in ("forall", "iterstar"):
        counter[0] += 1
        nn = "?b%d" % counter[0]
        ren2 = dict(ren)
        ren2[h[1]] = nn
        return (tag, nn, _alpha_term(h[2], ren), _alpha_term(h[3], ren),
                _alpha_heap(h[4], ren2, counter))
    raise ValueError("bad heap formula %r" % (h,))


def alpha_normal(p: Assertion):
    """Canonical renaming of all bound variables; structural equality on the
    result is alpha-equivalence."""
    counter = [0]
    ren = {}
    names = []
    for nm in p.binders:
        counter[0] += 1
        nn = "?b%d" % counter[0]
        ren[nm] = nn
        names.append(nn)
    return (tuple(names),
            tuple(_alpha_term(t, ren) for t in p.stack),
            _alpha_heap(p.heap, ren, counter))


def alpha_eq(p: Assertion, q: Assertion) -> bool:
    return alpha_normal(p) == alpha_normal(q)


def heap_alpha_eq(h1, h2) -> bool:
    c1, c2 = [0], [0]
    return _alpha_heap(h1, {}, c1) == _alpha_heap(h2, {}, c2)


# ------------------------------------------------------------ reification

def reify_sto(store, inst, h: AbstractHeap, sigma, funcs):
    """Memory bytes agree with the heap's cells, a concrete size matches the
    page count, functions and globals line up with the instance."""
    for i, f in enumerate(funcs):
        if inst.faddrs[i] >= len(store.funcs) or store.funcs[inst.faddrs[i]] is not f:
            if store.funcs[inst.faddrs[i]] != f:
                return False
    mem = store.mems[inst.maddr] if inst.maddr is not None else None
    if h.size is not None:
        if mem is None or mem.page_count != h.size:
            return False
    if h._data is not None and mem is not None and h._data is mem.data:
        pass  # view over the live memory agrees by construction
    else:
        if h.n_cells() and mem is None:
            return False
        for s, e in h.intervals():
            if e > len(mem.data):
                return False
            for a in range(s, e):
                if h.get(a) != mem.data[a]:
                    return False
    for name, val in sigma.items():
        if name[0] == "g" and name[1:].isdigit():
            i = int(name[1:])
            if i >= len(inst.gaddrs) or store.globs[inst.gaddrs[i]] != val:
                return False
    return True


def reify_loc(locs, sigma):
    for name, val in sigma.items():
        if name[0] == "l" and name[1:].isdigit():
            i = int(name[1:])
            if i >= len(locs) or locs[i] != val:
                return False
    return True


def reify_lab(labs, labels):
    if len(labs) != len(labels):
        return False
    return all(p.arity == n for p, n in zip(labels, labs))


def reify_ret(ret, r):
    if (ret is None) != (r is None):
        return False
    return ret is None or r.arity == ret


def reify(store, inst, h, sigma, funcs, locs, labs, labels, ret, r):
    return (reify_sto(store, inst, h, sigma, funcs)
            and reify_loc(locs, sigma)
            and reify_lab(labs, labels)
            and reify_ret(ret, r))
