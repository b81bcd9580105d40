"""Entailment checking: a syntactic prover for a whitelisted fragment and
a sampling falsifier.

The prover handles alpha-renaming, star/and flattening, weakening of pure
conjuncts, substitution through pure equalities, light linear arithmetic
over exact integers (justified on corpus assertions by their explicit
no-overflow bounds), comparison-result tautologies, and explicitly hinted
existential witnesses.  Everything outside the fragment is left to the
falsifier, which can only refute.
"""

from dataclasses import dataclass, field

from .assertions import (
    Assertion, UNKNOWN, alpha_eq, assertion_sat, heap_alpha_eq, heap_fv,
    heap_subst, is_pure, mk_assertion,
)
from .terms import A, C, V, Undefined, eval_term, fv as term_fv, normalize, subst as term_subst


@dataclass
class EntailVerdict:
    status: str  # 'proven' | 'falsified' | 'unknown'
    detail: str = ""
    counterexample: object = None


_REL_NEG = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": "!=", "!=": "="}
_RELOP_MATH = {}
for _t in ("i32", "i64"):
    _RELOP_MATH["%s.lt_u" % _t] = "<"
    _RELOP_MATH["%s.gt_u" % _t] = ">"
    _RELOP_MATH["%s.le_u" % _t] = "<="
    _RELOP_MATH["%s.ge_u" % _t] = ">="
    _RELOP_MATH["%s.eq" % _t] = "="
    _RELOP_MATH["%s.ne" % _t] = "!="


class _GiveUp(Exception):
    pass


def _flatten(h, spatial, pures):
    """Flatten star/and nests into spatial atoms and pure conjuncts.

    An 'and' group may contribute at most one spatial subtree (the corpus
    shape); anything else is out of the fragment.
    """
    tag = h[0]
    if tag == "emp":
        return
    if is_pure(h) or tag == "bot":
        pures.append(h)
        return
    if tag == "star":
        for s in h[1:]:
            _flatten(s, spatial, pures)
        return
    if tag == "and":
        sub_spatial = []
        for s in h[1:]:
            if is_pure(s) or s[0] == "bot":
                pures.append(s)
            else:
                sub_spatial.append(s)
        if len(sub_spatial) > 1:
            raise _GiveUp("conjunction of several spatial parts")
        if sub_spatial:
            _flatten(sub_spatial[0], spatial, pures)
        return
    spatial.append(h)


def _subst_pures(pures, mapping):
    return [heap_subst(p, mapping) for p in pures]


def _derive_substitution(pures, protected):
    """Turn var = t equalities into a substitution, avoiding protected names
    and self-referential bindings."""
    mapping = {}
    for _ in range(8):
        changed = False
        for p in pures:
            p = heap_subst(p, mapping)
            if p[0] == "pure" and p[1] == "=" and len(p[2]) == 2:
                a, b = p[2]
                for x, t in ((a, b), (b, a)):
                    if (x[0] == "v" and x[1] not in protected
                            and x[1] not in mapping
                            and x[1] not in term_fv(t)):
                        mapping[x[1]] = term_subst(t, mapping)
                        changed = True
                        break
        if not changed:
            break
    return mapping


# ------------------------------------------------------ linear arithmetic

def _linear(term):
    """Normalize to a {var-monomial: coeff} polynomial, or None."""
    t = normalize(term)

    def go(t):
        if t[0] == "c":
            if not isinstance(t[1], int):
                raise _GiveUp("non-integer constant")
            return {(): t[1]}
        if t[0] == "v":
            return {(t,): 1}
        if t[0] == "+":
            out = {}
            for a in t[1:]:
                for m, c in go(a).items():
                    out[m] = out.get(m, 0) + c
            return {m: c for m, c in out.items() if c}
        if t[0] == "-" and len(t) == 3:
            out = dict(go(t[1]))
            for m, c in go(t[2]).items():
                out[m] = out.get(m, 0) - c
            return {m: c for m, c in out.items() if c}
        if t[0] == "*":
            consts = 1
            atoms = []
            for a in t[1:]:
                if a[0] == "c" and isinstance(a[1], int):
                    consts *= a[1]
                else:
                    atoms.append(a)
            if not atoms:
                return {(): consts}
            mono = tuple(sorted(atoms))
            return {mono: consts} if consts else {}
        return {(t,): 1}

    try:
        return go(t)
    except _GiveUp:
        return None


def _poly_sub(p, q):
    out = dict(p)
    for m, c in q.items():
        out[m] = out.get(m, 0) - c
        if out[m] == 0:
            del out[m]
    return out


class _Arith:
    """Facts of the form poly <= 0, poly < 0, poly = 0 over exact ints."""

    def __init__(self):
        self.facts = []  # (poly-dict, strict: bool) meaning poly (<|<=) 0
        self.eqs = []    # poly = 0

    def add_rel(self, op, a, b):
        pa, pb = _linear(a), _linear(b)
        if pa is None or pb is None:
            return
        if op == "=":
            self.eqs.append(_poly_sub(pa, pb))
        elif op == "<=":
            self.facts.append((_poly_sub(pa, pb), False))
        elif op == "<":
            self.facts.append((_poly_sub(pa, pb), True))
        elif op == ">=":
            self.facts.append((_poly_sub(pb, pa), False))
        elif op == ">":
            self.facts.append((_poly_sub(pb, pa), True))

    def add_nonneg_atoms(self, polys):
        """len(.) and card(.) atoms are nonnegative."""
        seen = set()
        for poly in polys:
            for mono in poly:
                for atom in mono:
                    if atom[0] in ("len", "card") and atom not in seen:
                        seen.add(atom)
                        self.facts.append(({(atom,): -1}, False))

    def _known(self, target, strict):
        """Is target (<|<=) 0 derivable from one fact or a sum of two?"""
        def covers(poly, s):
            d = _poly_sub(target, poly)
            if any(m for m in d):
                return False
            c = d.get((), 0)
            # target = poly + c ; poly (<|<=) 0 gives target (<|<=) c
            if strict and not s:
                return c < 0
            return c <= 0

        consts_only = not any(m for m in target)
        if consts_only:
            c = target.get((), 0)
            return c < 0 if strict else c <= 0
        pool = list(self.facts)
        for eq in self.eqs:
            pool.append((eq, False))
            pool.append(({m: -c for m, c in eq.items()}, False))
        for poly, s in pool:
            if covers(poly, s):
                return True
        for i in range(len(pool)):
            for j in range(i, len(pool)):
                p = dict(pool[i][0])
                for m, c in pool[j][0].items():
                    p[m] = p.get(m, 0) + c
                    if p[m] == 0:
                        del p[m]
                if covers(p, pool[i][1] or pool[j][1]):
                    return True
        return False

    def prove_rel(self, op, a, b):
        pa, pb = _linear(a), _linear(b)
        if pa is None or pb is None:
            return False
        if op == "=":
            d = _poly_sub(pa, pb)
            if not d:
                return True
            return self._known(d, False) and self._known(
                {m: -c for m, c in d.items()}, False)
        if op == "!=":
            return (self.prove_rel("<", a, b) or self.prove_rel(">", a, b))
        if op == "<=":
            return self._known(_poly_sub(pa, pb), False)
        if op == "<":
            return self._known(_poly_sub(pa, pb), True)
        if op == ">=":
            return self._known(_poly_sub(pb, pa), False)
        if op == ">":
            return self._known(_poly_sub(pb, pa), True)
        return False


def _collect_arith(pures):
    ar = _Arith()
    polys = []
    for p in pures:
        if p[0] == "pure" and p[1] in ("=", "<", "<=", ">", ">=") and len(p[2]) == 2:
            ar.add_rel(p[1], p[2][0], p[2][1])
            for t in p[2]:
                lp = _linear(t)
                if lp:
                    polys.append(lp)
    ar.add_nonneg_atoms(polys)
    return ar


# --------------------------------------------------------- pure proving

def _norm_pure(p):
    if p[0] == "pure":
        return ("pure", p[1], tuple(normalize(a) for a in p[2]))
    return p


def _relop_tautology(goal):
    """imp(relop(a,b) = 0, neg) / imp(relop(a,b) != 0, rel) and the eqz forms."""
    if goal[0] != "imp" or goal[1][0] != "pure":
        return False
    cond, concl = goal[1], goal[2]
    if concl[0] != "pure":
        return False
    if cond[1] not in ("=", "!="):
        return False
    lhs, rhs = cond[2]
    if rhs != C(0):
        lhs, rhs = rhs, lhs
    if rhs != C(0):
        return False
    if lhs[0] in _RELOP_MATH:
        rel = _RELOP_MATH[lhs[0]]
        a, b = lhs[1], lhs[2]
        want = _REL_NEG[rel] if cond[1] == "=" else rel
        return (concl[1] == want
                and normalize(concl[2][0]) == normalize(a)
                and normalize(concl[2][1]) == normalize(b))
    if lhs[0] in ("i32.eqz", "i64.eqz"):
        a = lhs[1]
        want = "!=" if cond[1] == "=" else "="
        return (concl[1] == want
                and normalize(concl[2][0]) == normalize(a)
                and concl[2][1] == C(0))
    return False


def _prove_pure(goal, pure_facts, arith, depth=0):
    if depth > 6:
        return False
    goal_n = _norm_pure(goal)
    for f in pure_facts:
        if _norm_pure(f) == goal_n:
            return True
        if f[0] == "bot":
            return True
    if goal[0] == "pure":
        op, args = goal[1], goal[2]
        if op == "true":
            return True
        try:
            vals = [eval_term(a, {}) for a in args]
            from .assertions import _apply_pure
            return _apply_pure(op, vals)
        except (Undefined, ValueError):
            pass
        if op in ("=", "!=", "<", "<=", ">", ">=") and len(args) == 2:
            if op == "=" and normalize(args[0]) == normalize(args[1]):
                return True
            if arith.prove_rel(op, args[0], args[1]):
                return True
        return False
    if goal[0] == "and":
        return all(_prove_pure(g, pure_facts, arith, depth + 1) for g in goal[1:])
    if goal[0] == "or":
        return any(_prove_pure(g, pure_facts, arith, depth + 1) for g in goal[1:])
    if goal[0] == "imp":
        if _relop_tautology(goal):
            return True
        if _prove_pure(goal[2], pure_facts, arith, depth + 1):
            return True
        # premise refuted by the facts
        neg = _negate_pure(goal[1])
        if neg is not None and _prove_pure(neg, pure_facts, arith, depth + 1):
            return True
        return False
    if goal[0] == "forall":
        # empty ranges hold vacuously; ground ranges evaluate
        if arith.prove_rel("<=", goal[3], goal[2]):
            return True
        try:
            from .assertions import eval_pure
            return eval_pure(goal, {})
        except Exception:
            return False
    if goal[0] == "not":
        neg = _negate_pure(goal[1])
        if neg is not None:
            return _prove_pure(neg, pure_facts, arith, depth + 1)
        return False
    return False


def _negate_pure(p):
    if p[0] == "pure" and p[1] in _REL_NEG and len(p[2]) == 2:
        return ("pure", _REL_NEG[p[1]], p[2])
    if p[0] == "not":
        return p[1]
    return None


# -------------------------------------------------------- spatial match

def _spatial_key(h):
    tag = h[0]
    if tag == "cell":
        return ("cell", normalize(h[1]), None if h[2] is None else normalize(h[2]))
    if tag == "cellt":
        return ("cellt", h[1], normalize(h[2]),
                None if h[3] is None else normalize(h[3]))
    if tag == "size":
        return ("size", normalize(h[1]))
    if tag == "pred":
        return ("pred", h[1], tuple(normalize(a) for a in h[2]))
    if tag == "iterstar":
        c = [0]
        from .assertions import _alpha_heap
        return ("iter", _alpha_heap((tag, h[1], normalize(h[2]), normalize(h[3]),
                                     h[4]), {}, c))
    c = [0]
    from .assertions import _alpha_heap
    return ("h", _alpha_heap(h, {}, c))


def _match_spatial(sp_p, sp_q):
    """Require a bijection between the two spatial atom multisets, with
    Q-side wildcard contents subsuming concrete P-side contents."""
    remaining = list(sp_p)
    for q in sp_q:
        kq = _spatial_key(q)
        found = None
        for i, p in enumerate(remaining):
            kp = _spatial_key(p)
            if kp == kq:
                found = i
                break
            if (kq[0] in ("cell", "cellt") and kp[0] == kq[0]
                    and kq[-1] is None and kp[:-1] == kq[:-1]):
                found = i
                break
        if found is None:
            return False
        remaining.pop(found)
    return not remaining


# ------------------------------------------------------------ the prover

def prove_entailment(p: Assertion, q: Assertion, witnesses=None):
    """Syntactic proof of p => q; returns True or False (False = not in the
    provable fragment, not a refutation)."""
    if alpha_eq(p, q):
        return True
    try:
        return _prove(p, q, witnesses or {})
    except _GiveUp:
        return False


def _prove(p, q, witnesses):
    # skolemize p's binders: rename to reserved names
    ren = {b: "!sk%d_%s" % (i, b.lstrip("#?!")) for i, b in enumerate(p.binders)}
    p_stack = tuple(term_subst(t, {k: V(v) for k, v in ren.items()}) for t in p.stack)
    p_heap = heap_subst(p.heap, {k: V(v) for k, v in ren.items()})

    sp_p, pu_p = [], []
    _flatten(p_heap, sp_p, pu_p)

    # falsum on the left proves anything
    arith0 = _collect_arith(pu_p)
    if any(f[0] == "bot" for f in pu_p):
        return True

    # substitution from p's equalities (skolems and logical vars (incl. l/g))
    mapping = _derive_substitution(pu_p, protected=set())
    p_stack = tuple(term_subst(t, mapping) for t in p_stack)
    sp_p = [heap_subst(s, mapping) for s in sp_p]
    pu_p = _subst_pures(pu_p, mapping)

    # witnesses for q's binders: hints first, then stack-position matching
    wit = {}
    for name, term in (witnesses or {}).items():
        wit[name] = term_subst(term_subst(term, {k: V(v) for k, v in ren.items()}),
                               mapping)
    if len(q.stack) == len(p_stack):
        for tq, tp in zip(q.stack, p_stack):
            if tq[0] == "v" and tq[1] in q.binders and tq[1] not in wit:
                wit[tq[1]] = tp
    missing = [b for b in q.binders if b not in wit]
    if missing:
        # try equations q pins itself: y = t with t free of missing binders
        sp_q0, pu_q0 = [], []
        _flatten(q.heap, sp_q0, pu_q0)
        for pq in pu_q0:
            if pq[0] == "pure" and pq[1] == "=" and len(pq[2]) == 2:
                a, b = pq[2]
                for x, t in ((a, b), (b, a)):
                    if (x[0] == "v" and x[1] in missing
                            and not (term_fv(t) & set(q.binders))):
                        wit[x[1]] = term_subst(term_subst(
                            t, {k: V(v) for k, v in ren.items()}), mapping)
                        missing = [m for m in missing if m != x[1]]
    if missing:
        raise _GiveUp("no witness for %s" % missing)

    q_sub = {k: v for k, v in wit.items()}
    q_stack = tuple(term_subst(t, q_sub) for t in q.stack)
    q_heap = heap_subst(q.heap, q_sub)
    if q_heap[0] == "exists":
        q_heap = q_heap[2] if not q_heap[1] else None
        if q_heap is None:
            raise _GiveUp("inner existential left unbound")

    sp_q, pu_q = [], []
    _flatten(q_heap, sp_q, pu_q)
    sp_q = [heap_subst(s, mapping) for s in sp_q]
    pu_q = _subst_pures(pu_q, mapping)
    q_stack = tuple(term_subst(t, mapping) for t in q_stack)

    if len(p_stack) != len(q_stack):
        return False
    for a, b in zip(p_stack, q_stack):
        if normalize(a) != normalize(b):
            return False

    if not _match_spatial(sp_p, sp_q):
        return False

    facts = list(pu_p)
    arith = _collect_arith(facts)
    for _ in range(2):
        added = False
        for f in list(facts):
            if f[0] == "imp" and f[2] not in facts:
                if _prove_pure(f[1], facts, arith):
                    facts.append(f[2])
                    added = True
        if not added:
            break
        arith = _collect_arith(facts)
    for goal in pu_q:
        if not _prove_pure(goal, facts, arith):
            return False
    return True


# ------------------------------------------------------------- falsifier

def falsify_entailment(p: Assertion, q: Assertion, env, trials=24, seed=0,
                       fuel=200000):
    """Sample states satisfying p and test q; can only refute."""
    import random as _random
    from .generate import gen_abstract_states

    rng = _random.Random(seed)
    states = gen_abstract_states(p, env, rng, trials)
    tested = 0
    for sigma, stack_vals, heap in states:
        sat_p = assertion_sat(p, stack_vals, sigma, heap, env, fuel)
        if sat_p is not True:
            continue
        tested += 1
        sat_q = assertion_sat(q, stack_vals, sigma, heap, env, fuel)
        if sat_q is False:
            return EntailVerdict("falsified", "state #%d violates the conclusion" % tested,
                                 (sigma, stack_vals, heap))
    return EntailVerdict("unknown", "no counterexample in %d sampled states" % tested)


def entails(p: Assertion, q: Assertion, mode="syntactic", env=None,
            trials=24, seed=0, witnesses=None) -> EntailVerdict:
    """Check p => q.  'syntactic' proves a whitelisted fragment; 'falsify'
    samples satisfying states and can only refute."""
    if mode == "syntactic":
        if prove_entailment(p, q, witnesses):
            return EntailVerdict("proven")
        return EntailVerdict("unknown", "outside the syntactic fragment")
    if mode == "falsify":
        from .predicates import builtin_predicates
        return falsify_entailment(p, q, env or builtin_predicates(), trials, seed)
    raise ValueError("unknown mode %r" % mode)
