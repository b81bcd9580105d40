"""Reader for .wlp proof-script files and .spec specification files.

A proof script mirrors the proof tree: one s-expression per rule node,
with all witnesses spelled out.  (def %name body) forms define textual
macros usable anywhere below.  The chain form is the concrete syntax for
right-nested seq applications: (chain A0 step A1 step ... An) gives every
midpoint assertion explicitly.
"""

from . import sexpr
from .asexpr import AsexprError, parse_assertion, parse_formula, parse_term
from .proof import ProofNode, node_span
from .assertions import Assertion


class WlpError(Exception):
    def __init__(self, msg, form=None):
        line, col = sexpr.pos(form) if form is not None else (0, 0)
        super().__init__("%d:%d: %s" % (line, col, msg))


def _expand_macros(form, defs):
    if isinstance(form, str):
        text = str(form)
        if text.startswith("%"):
            if text not in defs:
                raise WlpError("undefined macro '%s'" % text, form)
            return defs[text]
        return form
    return sexpr.Node([_expand_macros(f, defs) for f in form],
                      form.line, form.col)


def _head(form):
    if isinstance(form, str) or not form:
        return None
    return str(form[0])


_WRAPPERS = ("consequence", "frame", "exists", "extension", "context",
             "unfold-pre", "fold-pre", "unfold-post", "fold-post", "conseq",
             "ext", "ctx")

_LEAF_RULES = {
    "const", "unreachable", "nop", "drop", "select", "unop", "binop",
    "testop", "relop", "cvtop", "get_local", "set_local", "tee_local",
    "get_global", "set_global", "load", "store", "mem.size", "mem.grow",
    "br", "return", "call",
}


class WlpParser:
    def __init__(self, env):
        self.env = env
        self.defs = {}

    def assertion(self, form):
        try:
            return parse_assertion(form, self.env)
        except AsexprError as e:
            raise WlpError("bad assertion: %s" % e, form)

    def formula(self, form):
        try:
            return parse_formula(form, self.env)
        except AsexprError as e:
            raise WlpError("bad formula: %s" % e, form)

    def _witnesses(self, forms):
        out = {}
        for f in forms:
            out[str(f[0])] = parse_term(f[1])
        return out

    def node(self, form):
        head = _head(form)
        if head is None:
            raise WlpError("expected a proof node", form)

        if head == "chain":
            items = form[1:]
            if len(items) < 3 or len(items) % 2 == 0:
                raise WlpError("chain alternates assertions and steps", form)
            asserts = []
            steps = []
            for i, f in enumerate(items):
                if i % 2 == 0:
                    asserts.append(self.assertion(f))
                else:
                    steps.append(self.node(f))
            return ProofNode("chain", {"asserts": asserts, "steps": steps})

        if head == "sline":
            args = {}
            for f in form[1:]:
                if _head(f) == "postwit":
                    args["postwit"] = self._witnesses(f[1:])
                elif _head(f) == "wit":
                    args["witnesses"] = self._witnesses(f[1:])
                else:
                    raise WlpError("bad sline argument", f)
            return ProofNode("sline", args)

        if head == "scall":
            args = {}
            for f in form[1:]:
                if _head(f) == "inst":
                    args["inst"] = self._witnesses(f[1:])
                elif _head(f) == "postwit":
                    args["postwit"] = self._witnesses(f[1:])
                elif _head(f) == "wit":
                    args["witnesses"] = self._witnesses(f[1:])
                else:
                    raise WlpError("bad scall argument", f)
            return ProofNode("scall", args)

        if head in ("conseq", "consequence"):
            args = {}
            wit = {}
            child = None
            for f in form[1:]:
                h = _head(f)
                if h == "pre":
                    args["pre"] = self.assertion(f[1])
                elif h == "post":
                    args["post"] = self.assertion(f[1])
                elif h == "labels":
                    args["labels"] = tuple(self.assertion(x) for x in f[1:])
                elif h == "ret" and len(f) == 2:
                    args["ret"] = self.assertion(f[1])
                elif h == "witpre":
                    wit["pre"] = self._witnesses(f[1:])
                elif h == "witpost":
                    wit["post"] = self._witnesses(f[1:])
                elif h is not None and h.startswith("witlabel"):
                    wit["label" + h[len("witlabel"):]] = self._witnesses(f[1:])
                else:
                    if child is not None:
                        raise WlpError("consequence takes one child", f)
                    child = self.node(f)
            if child is None:
                raise WlpError("consequence needs a child node", form)
            if wit:
                args["witnesses"] = wit
            return ProofNode("consequence", args, (child,))

        if head == "frame":
            if len(form) != 3:
                raise WlpError("(frame <formula> <node>)", form)
            return ProofNode("frame", {"frame": self.formula(form[1])},
                             (self.node(form[2]),))
        if head == "exists":
            if len(form) != 3:
                raise WlpError("(exists <var> <node>)", form)
            return ProofNode("exists", {"var": str(form[1])},
                             (self.node(form[2]),))
        if head == "ext":
            if len(form) != 3:
                raise WlpError("(ext (term*) <node>)", form)
            stack = tuple(parse_term(f) for f in form[1])
            return ProofNode("extension", {"stack": stack},
                             (self.node(form[2]),))
        if head == "ctx":
            if len(form) != 4:
                raise WlpError("(ctx <keep> <keep-ret> <node>)", form)
            return ProofNode("context",
                             {"keep": int(str(form[1])),
                              "keep_ret": str(form[2]) not in ("0", "drop")},
                             (self.node(form[3]),))
        if head in ("unfold-pre", "fold-pre", "unfold-post", "fold-post"):
            if len(form) != 4 or not isinstance(form[2], sexpr.Node):
                raise WlpError("(%s Name (args term*) <node>)" % head, form)
            args = tuple(parse_term(f) for f in form[2][1:])
            return ProofNode(head, {"pred": str(form[1]), "args": args},
                             (self.node(form[3]),))
        if head == "seq":
            if len(form) != 5:
                raise WlpError("(seq <split> <mid-assert> <node> <node>)", form)
            return ProofNode("seq",
                             {"split": int(str(form[1])),
                              "mid": self.assertion(form[2])},
                             (self.node(form[3]), self.node(form[4])))
        if head == "block" or head == "loop":
            if len(form) != 2:
                raise WlpError("(%s <node>)" % head, form)
            return ProofNode(head, {}, (self.node(form[1]),))
        if head == "if":
            if len(form) != 3:
                raise WlpError("(if <then-node> <else-node>)", form)
            return ProofNode("if", {}, (self.node(form[1]), self.node(form[2])))
        if head == "brif":
            if len(form) != 2:
                raise WlpError("(brif <taken-node>)", form)
            return ProofNode("br_if", {}, (self.node(form[1]),))
        if head == "brtable":
            return ProofNode("br_table", {},
                             tuple(self.node(f) for f in form[1:]))
        if head == "function":
            if len(form) != 2:
                raise WlpError("(function <body-node>)", form)
            return ProofNode("function", {}, (self.node(form[1]),))
        if head == "ret":
            return ProofNode("return")
        if head == "empty":
            return ProofNode("empty")
        if head == "srun":
            if len(form) != 2:
                raise WlpError("(srun <count>)", form)
            return ProofNode("srun", {"count": int(str(form[1]))})
        if head in _LEAF_RULES:
            return ProofNode(head)
        raise WlpError("unknown proof form '%s'" % head, form)


def parse_wlp(text, env):
    """Parse a .wlp document: (def %name body)* and (proof $Func node)*.

    Returns a dict function-name -> ProofNode.
    """
    parser = WlpParser(env)
    out = {}
    for form in sexpr.parse_all(text):
        head = _head(form)
        if head == "def":
            if len(form) != 3 or not str(form[1]).startswith("%"):
                raise WlpError("(def %name <body>)", form)
            parser.defs[str(form[1])] = _expand_macros(form[2], parser.defs)
        elif head == "proof":
            if len(form) != 3:
                raise WlpError("(proof $Func <node>)", form)
            name = str(form[1])
            body = _expand_macros(form[2], parser.defs)
            out[name] = parser.node(body)
        else:
            raise WlpError("unknown top-level form", form)
    return out


def parse_spec_file(text, env):
    """Parse a .spec document: (spec (func $F) (pre A) (post A) (generator g)?)*.

    Returns a list of dicts with keys func, pre, post, generator.
    """
    parser = WlpParser(env)
    out = []
    for form in sexpr.parse_all(text):
        head = _head(form)
        if head == "def":
            parser.defs[str(form[1])] = _expand_macros(form[2], parser.defs)
            continue
        if head != "spec":
            raise WlpError("expected (spec ...) or (def ...)", form)
        entry = {"generator": None, "name": None}
        for f in form[1:]:
            h = _head(f)
            body = _expand_macros(f, parser.defs)
            if h == "func":
                entry["func"] = str(body[1])
            elif h == "name":
                entry["name"] = str(body[1])
            elif h == "pre":
                entry["pre"] = parser.assertion(body[1])
            elif h == "post":
                entry["post"] = parser.assertion(body[1])
            elif h == "generator":
                entry["generator"] = str(body[1])
            else:
                raise WlpError("unknown spec part", f)
        if "func" not in entry or "pre" not in entry or "post" not in entry:
            raise WlpError("spec needs func, pre, and post", form)
        if entry["name"] is None:
            entry["name"] = entry["func"]
        out.append(entry)
    return out
