"""Text grammar for terms, heap formulas, and assertions.

    term     ::= INT | (i32 INT) | nil | IDENT | (OP term*)
                 | (list term*) | (set term*)
    formula  ::= bot | emp | (not F) | (and F*) | (or F*) | (imp F F)
                 | (exists (x*) F) | (star F*) | (iter x lo hi F)
                 | (forall x lo hi F) | (cell a [v|_]) | (cellt t a [v|_])
                 | (cell32 a [v|_]) | (size t) | (REL t t) | (ordered t)
                 | (in t t) | (notin t t) | (keysep t t) | (Name term*)
    assertion::= (assert [(exists x*)] (stack term*) (heap F))

An underscore as cell contents (or predicate argument) means "any value";
as a predicate argument it becomes a fresh existential.
"""

from . import sexpr
from .assertions import Assertion, mk_assertion
from .numerics import mask
from .terms import A, C, V

_RELS = ("=", "!=", "<", "<=", ">", ">=")
_PURE_NAMES = ("ordered", "in", "notin", "keysep")


class AsexprError(Exception):
    def __init__(self, msg, form=None):
        line, col = sexpr.pos(form) if form is not None else (0, 0)
        super().__init__("%d:%d: %s" % (line, col, msg))


def _is_int(text):
    t = text[1:] if text[:1] in "+-" else text
    return t.isdigit() or (t[:2].lower() == "0x" and len(t) > 2)


def parse_term(form):
    if isinstance(form, str):
        text = str(form)
        if _is_int(text):
            return C(int(text, 0))
        if text == "nil":
            return C(())
        if text == "_":
            raise AsexprError("'_' only allowed as cell contents or predicate argument", form)
        return V(text)
    if not form:
        raise AsexprError("empty term", form)
    head = str(form[0])
    if head == "i32":
        if len(form) != 2 or not _is_int(str(form[1])):
            raise AsexprError("(i32 INT)", form)
        return C(int(str(form[1]), 0) & mask("i32"))
    if head == "i64":
        return C(int(str(form[1]), 0) & mask("i64"))
    if head == "list":
        return A("list", *[parse_term(f) for f in form[1:]])
    if head == "set":
        return A("set", *[parse_term(f) for f in form[1:]])
    return A(head, *[parse_term(f) for f in form[1:]])


_WILD = [0]


def parse_formula(form, env=None, wilds=None):
    """Parse a heap formula; wilds collects fresh names created for '_'."""
    if wilds is None:
        wilds = []
    if isinstance(form, str):
        text = str(form)
        if text == "bot":
            return ("bot",)
        if text == "emp":
            return ("emp",)
        if text == "true":
            return ("pure", "true", ())
        raise AsexprError("unknown formula atom '%s'" % text, form)
    if not form:
        raise AsexprError("empty formula", form)
    head = str(form[0])

    def sub(f):
        return parse_formula(f, env, wilds)

    def cellval(f):
        if isinstance(f, str) and str(f) == "_":
            return None
        return parse_term(f)

    if head == "not":
        return ("not", sub(form[1]))
    if head in ("and", "or", "star"):
        return (head,) + tuple(sub(f) for f in form[1:])
    if head == "imp":
        return ("imp", sub(form[1]), sub(form[2]))
    if head == "exists":
        names = tuple(str(x) for x in form[1])
        return ("exists", names, sub(form[2]))
    if head in ("iter", "iterstar"):
        return ("iterstar", str(form[1]), parse_term(form[2]),
                parse_term(form[3]), sub(form[4]))
    if head == "forall":
        return ("forall", str(form[1]), parse_term(form[2]),
                parse_term(form[3]), sub(form[4]))
    if head == "cell":
        return ("cell", parse_term(form[1]),
                cellval(form[2]) if len(form) > 2 else None)
    if head == "cell32":
        return ("cellt", "i32", parse_term(form[1]),
                cellval(form[2]) if len(form) > 2 else None)
    if head == "cellt":
        return ("cellt", str(form[1]), parse_term(form[2]),
                cellval(form[3]) if len(form) > 3 else None)
    if head == "size":
        return ("size", parse_term(form[1]))
    if head in _RELS or head in _PURE_NAMES:
        return ("pure", head, tuple(parse_term(f) for f in form[1:]))
    # predicate instance; underscores become fresh existentials
    args = []
    fresh = []
    for f in form[1:]:
        if isinstance(f, str) and str(f) == "_":
            _WILD[0] += 1
            nm = "_w%d" % _WILD[0]
            fresh.append(nm)
            args.append(V(nm))
        else:
            args.append(parse_term(f))
    if env is not None and head not in env:
        raise AsexprError("unknown predicate '%s'" % head, form)
    inner = ("pred", head, tuple(args))
    if fresh:
        wilds.extend(fresh)
        return ("exists", tuple(fresh), inner)
    return inner


def parse_assertion(form, env=None) -> Assertion:
    if isinstance(form, str) or not form or str(form[0]) != "assert":
        raise AsexprError("expected (assert ...)", form)
    binders = ()
    stack = ()
    heap = ("emp",)
    for f in form[1:]:
        head = str(f[0]) if isinstance(f, sexpr.Node) and f else None
        if head == "exists":
            binders = tuple(str(x) for x in f[1:])
        elif head == "stack":
            stack = tuple(parse_term(x) for x in f[1:])
        elif head == "heap":
            if len(f) != 2:
                raise AsexprError("(heap F)", f)
            heap = parse_formula(f[1], env)
        else:
            raise AsexprError("unknown assertion part", f)
    return mk_assertion(stack, heap, binders)


def parse_assertion_text(text, env=None) -> Assertion:
    return parse_assertion(sexpr.parse_one(text), env)


# ---------------------------------------------------------------- printer

def term_to_text(t):
    tag = t[0]
    if tag == "c":
        v = t[1]
        if isinstance(v, tuple):
            return "(list %s)" % " ".join(term_to_text(C(x)) for x in v)
        if isinstance(v, frozenset):
            return "(set %s)" % " ".join(sorted(term_to_text(C(x)) for x in v))
        return str(v)
    if tag == "v":
        return t[1]
    return "(%s %s)" % (tag, " ".join(term_to_text(a) for a in t[1:]))


def formula_to_text(h):
    tag = h[0]
    if tag == "bot":
        return "bot"
    if tag == "emp":
        return "emp"
    if tag == "pure":
        if h[1] == "true":
            return "true"
        return "(%s %s)" % (h[1], " ".join(term_to_text(a) for a in h[2]))
    if tag == "pred":
        parts = [h[1]] + [term_to_text(a) for a in h[2]]
        return "(%s)" % " ".join(parts)
    if tag == "cell":
        return "(cell %s %s)" % (term_to_text(h[1]),
                                 "_" if h[2] is None else term_to_text(h[2]))
    if tag == "cellt":
        if h[1] == "i32":
            return "(cell32 %s %s)" % (term_to_text(h[2]),
                                       "_" if h[3] is None else term_to_text(h[3]))
        return "(cellt %s %s %s)" % (h[1], term_to_text(h[2]),
                                     "_" if h[3] is None else term_to_text(h[3]))
    if tag == "size":
        return "(size %s)" % term_to_text(h[1])
    if tag == "not":
        return "(not %s)" % formula_to_text(h[1])
    if tag in ("and", "or", "star"):
        return "(%s %s)" % (tag, " ".join(formula_to_text(s) for s in h[1:]))
    if tag == "imp":
        return "(imp %s %s)" % (formula_to_text(h[1]), formula_to_text(h[2]))
    if tag == "exists":
        return "(exists (%s) %s)" % (" ".join(h[1]), formula_to_text(h[2]))
    if tag in ("forall", "iterstar"):
        kw = "forall" if tag == "forall" else "iter"
        return "(%s %s %s %s %s)" % (kw, h[1], term_to_text(h[2]),
                                     term_to_text(h[3]), formula_to_text(h[4]))
    raise ValueError("bad formula %r" % (h,))


def assertion_to_text(p: Assertion):
    parts = ["assert"]
    if p.binders:
        parts.append("(exists %s)" % " ".join(p.binders))
    parts.append("(stack %s)" % " ".join(term_to_text(t) for t in p.stack))
    parts.append("(heap %s)" % formula_to_text(p.heap))
    return "(%s)" % " ".join(parts)
