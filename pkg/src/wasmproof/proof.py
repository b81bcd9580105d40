"""Checkable proof outlines for stack/heap triples.

A proof is an explicit tree: one rule application per node, all witnesses
written down (frame formulas, existential variables, consequence targets,
sequence split points, predicate instances for fold/unfold).  Checking a
node verifies the rule's structural schema exactly -- axioms match their
templates up to alpha-equivalence -- and emits obligations: side
conditions (checked decidably) and entailments (discharged syntactically
or admitted after falsification testing).  A proof is accepted only if
nothing failed; admitted obligations are listed in the report.
"""

from dataclasses import dataclass, field

from .assertions import (
    And, Assertion, BOT, CaptureError, Cell, CellT, EMP, Eq, Exists, PredI,
    Pure, Size, Star, alpha_eq, assertion_fv, assertion_subst,
    distribute_frame, heap_alpha_eq, heap_fv, mk_assertion,
)
from .ast import BINOPS, CVTOPS, LOAD_OPS, RELOPS, STORE_OPS, TESTOPS, UNOPS
from .assertions import heap_subst, star2
from .entail import _spatial_key, entails, prove_entailment
from .terms import subst as term_subst
from .numerics import mask
from .terms import A, C, V, fv as term_fv, local_var, normalize


class CheckError(Exception):
    """Structural rule/goal mismatch or violated side condition."""


@dataclass
class Context:
    funcs: tuple = ()
    assumptions: tuple = ()  # (pre, func_index, post) triples
    labels: tuple = ()       # innermost first
    ret: Assertion | None = None

    def push_label(self, p):
        return Context(self.funcs, self.assumptions, (p,) + self.labels, self.ret)


@dataclass
class Triple:
    ctx: Context
    pre: Assertion
    code: tuple
    post: Assertion


@dataclass
class ProofNode:
    rule: str
    args: dict = field(default_factory=dict)
    premises: tuple = ()


@dataclass
class Obligation:
    kind: str        # 'entailment' | 'side-condition'
    description: str
    status: str      # 'discharged' | 'admitted' | 'failed'
    method: str = ""
    payload: object = None


@dataclass
class CheckConfig:
    env: object = None
    falsify_trials: int = 12
    seed: int = 0
    module: object = None      # for modified-variable analysis through calls
    n_locals: int | None = None
    n_globals: int | None = None


@dataclass
class ProofReport:
    accepted: bool
    obligations: list
    reason: str = ""

    @property
    def admitted(self):
        return [o for o in self.obligations if o.status == "admitted"]

    @property
    def failed(self):
        return [o for o in self.obligations if o.status == "failed"]

    def summary(self):
        n = len(self.obligations)
        return ("%s: %d obligations, %d admitted, %d failed%s"
                % ("Accepted" if self.accepted else "Rejected",
                   n, len(self.admitted), len(self.failed),
                   (" (%s)" % self.reason) if self.reason else ""))


# ------------------------------------------------------- modified variables

def modified_vars(code, funcs, _seen=None):
    """Local/global names written by the code; calls contribute the callee's
    globals only (locals are frame-private)."""
    out = set()
    seen = _seen if _seen is not None else set()
    for instr in code:
        op = instr[0]
        if op in ("set_local", "tee_local"):
            out.add("l%d" % instr[1])
        elif op == "set_global":
            out.add("g%d" % instr[1])
        elif op in ("block", "loop"):
            out |= modified_vars(instr[2], funcs, seen)
        elif op == "if":
            out |= modified_vars(instr[2], funcs, seen)
            out |= modified_vars(instr[3], funcs, seen)
        elif op == "call":
            j = instr[1]
            if j not in seen:
                seen.add(j)
                callee = modified_vars(funcs[j].body, funcs, seen)
                out |= {v for v in callee if v.startswith("g")}
    return out


# ------------------------------------------------------------- small helpers

def _expect(cond, msg):
    if not cond:
        raise CheckError(msg)


def _is_plain(p: Assertion, what):
    _expect(p.binders == (), "%s must not be existentially quantified here" % what)


def _stack_split(p: Assertion, n_top, what):
    _expect(len(p.stack) >= n_top, "%s needs %d stack slots" % (what, n_top))
    if n_top == 0:
        return p.stack, ()
    return p.stack[:-n_top], p.stack[-n_top:]


def _side(obls, name, ok):
    if not ok:
        raise CheckError("side condition violated: %s" % name)
    obls.append(Obligation("side-condition", name, "discharged", "checked"))


def _axiom_match(obls, goal, pre_t, post_t, rule):
    _expect(alpha_eq(goal.pre, pre_t),
            "[%s] precondition does not match the axiom template: %r vs %r"
            % (rule, goal.pre, pre_t))
    if post_t is not None:
        _expect(alpha_eq(goal.post, post_t),
                "[%s] postcondition does not match the axiom template: %r vs %r"
                % (rule, goal.post, post_t))


def _off_addr(base, off):
    return A("+", base, C(off)) if off else base


def _defined_binop(op, t1, t2):
    t = op.split(".", 1)[0]
    name = op.split(".", 1)[1]
    if name in ("div_u", "rem_u", "rem_s"):
        return Pure("!=", t2, C(0))
    if name == "div_s":
        minv = 1 << (int(t[1:]) - 1)
        return And(Pure("!=", t2, C(0)),
                   ("not", And(Eq(t1, C(minv)), Eq(t2, C(mask(t))))))
    return None


# ------------------------------------------------------------- the checker

class Checker:
    def __init__(self, config: CheckConfig):
        self.cfg = config
        from .predicates import builtin_predicates
        self.env = config.env or builtin_predicates()
        self._oblig_seq = 0

    # entailment obligations -------------------------------------------------
    def _entail(self, obls, p, q, what, witnesses=None):
        self._oblig_seq += 1
        if prove_entailment(p, q, witnesses):
            obls.append(Obligation("entailment", what, "discharged", "syntactic",
                                   (p, q)))
            return
        verdict = entails(p, q, mode="falsify", env=self.env,
                          trials=self.cfg.falsify_trials,
                          seed=self.cfg.seed + self._oblig_seq)
        if verdict.status == "falsified":
            obls.append(Obligation("entailment", what, "failed", "falsified",
                                   (p, q, verdict.counterexample)))
        else:
            obls.append(Obligation("entailment", what, "admitted",
                                   "falsify-tested", (p, q)))

    # ------------------------------------------------------------------
    def check(self, node: ProofNode, goal: Triple):
        obls = []
        self._check(node, goal, obls)
        return obls

    def _check(self, node, goal, obls):
        rule = node.rule
        handler = getattr(self, "_rule_" + rule.replace(".", "_").replace("-", "_"),
                          None)
        _expect(handler is not None, "unknown rule [%s]" % rule)
        handler(node, goal, obls)

    # ------------------------------------------------------ basic axioms
    def _single(self, goal, kinds, rule):
        _expect(len(goal.code) == 1,
                "[%s] applies to a single instruction" % rule)
        instr = goal.code[0]
        _expect(instr[0] in kinds if isinstance(kinds, (set, tuple, frozenset))
                else kinds(instr[0]),
                "[%s] does not apply to %r" % (rule, instr[0]))
        return instr

    def _rule_const(self, node, goal, obls):
        instr = self._single(goal, lambda op: op.endswith(".const"), "const")
        _is_plain(goal.pre, "[const] precondition")
        _is_plain(goal.post, "[const] postcondition")
        pre_t = mk_assertion((), EMP)
        post_t = mk_assertion((C(instr[1]),), EMP)
        _axiom_match(obls, goal, pre_t, post_t, "const")

    def _rule_unreachable(self, node, goal, obls):
        self._single(goal, ("unreachable",), "unreachable")
        _axiom_match(obls, goal, mk_assertion((), BOT), None, "unreachable")

    def _rule_nop(self, node, goal, obls):
        self._single(goal, ("nop",), "nop")
        t = mk_assertion((), EMP)
        _axiom_match(obls, goal, t, t, "nop")

    def _rule_drop(self, node, goal, obls):
        self._single(goal, ("drop",), "drop")
        _is_plain(goal.pre, "[drop] precondition")
        _, (tau,) = _stack_split(goal.pre, 1, "[drop]")
        _expect(len(goal.pre.stack) == 1, "[drop] pre stack must be a single term")
        _axiom_match(obls, goal, mk_assertion((tau,), EMP), mk_assertion((), EMP),
                     "drop")

    def _rule_select(self, node, goal, obls):
        self._single(goal, ("select",), "select")
        _is_plain(goal.pre, "[select] precondition")
        _expect(len(goal.pre.stack) == 3, "[select] pre stack must have 3 terms")
        t1, t2, t3 = goal.pre.stack
        _axiom_match(obls, goal, mk_assertion((t1, t2, t3), EMP), None, "select")
        x = V("?x")
        post_t = mk_assertion(
            (x,),
            And(EMP,
                ("imp", Pure("!=", t3, C(0)), Eq(x, t1)),
                ("imp", Eq(t3, C(0)), Eq(x, t2))),
            binders=("?x",))
        _expect(alpha_eq(goal.post, post_t),
                "[select] postcondition does not match the axiom template")

    def _rule_unop(self, node, goal, obls):
        instr = self._single(goal, UNOPS, "unop")
        _is_plain(goal.pre, "[unop] precondition")
        _expect(len(goal.pre.stack) == 1, "[unop] pre stack must be a single term")
        tau = goal.pre.stack[0]
        _axiom_match(obls, goal, mk_assertion((tau,), EMP),
                     mk_assertion((A(instr[0], tau),), EMP), "unop")

    def _rule_testop(self, node, goal, obls):
        instr = self._single(goal, TESTOPS, "testop")
        _is_plain(goal.pre, "[testop] precondition")
        _expect(len(goal.pre.stack) == 1, "[testop] pre stack must be a single term")
        tau = goal.pre.stack[0]
        _axiom_match(obls, goal, mk_assertion((tau,), EMP),
                     mk_assertion((A(instr[0], tau),), EMP), "testop")

    def _rule_binop(self, node, goal, obls):
        instr = self._single(goal, BINOPS, "binop")
        _is_plain(goal.pre, "[binop] precondition")
        _expect(len(goal.pre.stack) == 2, "[binop] pre stack must have 2 terms")
        t1, t2 = goal.pre.stack
        cond = _defined_binop(instr[0], t1, t2)
        pre_heap = EMP if cond is None else And(cond, EMP)
        _axiom_match(obls, goal, mk_assertion((t1, t2), pre_heap),
                     mk_assertion((A(instr[0], t1, t2),), EMP), "binop")

    def _rule_relop(self, node, goal, obls):
        instr = self._single(goal, RELOPS, "relop")
        _is_plain(goal.pre, "[relop] precondition")
        _expect(len(goal.pre.stack) == 2, "[relop] pre stack must have 2 terms")
        t1, t2 = goal.pre.stack
        _axiom_match(obls, goal, mk_assertion((t1, t2), EMP),
                     mk_assertion((A(instr[0], t1, t2),), EMP), "relop")

    def _rule_cvtop(self, node, goal, obls):
        instr = self._single(goal, set(CVTOPS), "cvtop")
        _is_plain(goal.pre, "[cvtop] precondition")
        _expect(len(goal.pre.stack) == 1, "[cvtop] pre stack must be a single term")
        tau = goal.pre.stack[0]
        dst, src, _sx = CVTOPS[instr[0]]
        from .ast import FLOAT_TYPES, INT_TYPES
        trapping = dst in INT_TYPES and src in FLOAT_TYPES
        pre_heap = And(Pure("defined:%s" % instr[0], tau), EMP) if trapping else EMP
        _axiom_match(obls, goal, mk_assertion((tau,), pre_heap),
                     mk_assertion((A(instr[0], tau),), EMP), "cvtop")

    # ------------------------------------------------- variable management
    def _declared_local(self, obls, i):
        if self.cfg.n_locals is not None:
            _side(obls, "isDeclaredLocal %d" % i, i < self.cfg.n_locals)
        else:
            obls.append(Obligation("side-condition", "isDeclaredLocal %d" % i,
                                   "discharged", "checked"))

    def _declared_global(self, obls, i):
        if self.cfg.n_globals is not None:
            _side(obls, "isDeclaredGlobal %d" % i, i < self.cfg.n_globals)
        else:
            obls.append(Obligation("side-condition", "isDeclaredGlobal %d" % i,
                                   "discharged", "checked"))

    def _rule_get_local(self, node, goal, obls):
        instr = self._single(goal, ("get_local",), "get_local")
        self._declared_local(obls, instr[1])
        _axiom_match(obls, goal, mk_assertion((), EMP),
                     mk_assertion((local_var(instr[1]),), EMP), "get_local")

    def _assign_axiom(self, goal, obls, instr, var_name, rule, keeps_stack):
        _is_plain(goal.pre, "[%s] precondition" % rule)
        _expect(len(goal.pre.stack) == 1, "[%s] pre stack must be a single term" % rule)
        x = goal.pre.stack[0]
        _expect(x[0] == "v", "[%s] stack term must be a variable" % rule)
        _expect(x[1] != var_name,
                "[%s] stack variable must differ from the written variable" % rule)
        post_stack = (x,) if keeps_stack else ()
        post_t = mk_assertion(post_stack, And(EMP, Eq(V(var_name), x)))
        _axiom_match(obls, goal, mk_assertion((x,), EMP), post_t, rule)

    def _rule_set_local(self, node, goal, obls):
        instr = self._single(goal, ("set_local",), "set_local")
        self._declared_local(obls, instr[1])
        self._assign_axiom(goal, obls, instr, "l%d" % instr[1], "set_local", False)

    def _rule_tee_local(self, node, goal, obls):
        instr = self._single(goal, ("tee_local",), "tee_local")
        self._declared_local(obls, instr[1])
        self._assign_axiom(goal, obls, instr, "l%d" % instr[1], "tee_local", True)

    def _rule_get_global(self, node, goal, obls):
        instr = self._single(goal, ("get_global",), "get_global")
        self._declared_global(obls, instr[1])
        _axiom_match(obls, goal, mk_assertion((), EMP),
                     mk_assertion((V("g%d" % instr[1]),), EMP), "get_global")

    def _rule_set_global(self, node, goal, obls):
        instr = self._single(goal, ("set_global",), "set_global")
        self._declared_global(obls, instr[1])
        self._assign_axiom(goal, obls, instr, "g%d" % instr[1], "set_global", False)

    # --------------------------------------------------- memory management
    def _rule_load(self, node, goal, obls):
        instr = self._single(goal, set(LOAD_OPS), "load")
        t, pt, _sx = LOAD_OPS[instr[0]]
        _expect(pt is None, "[load] covers unpacked loads only")
        _is_plain(goal.pre, "[load] precondition")
        _expect(len(goal.pre.stack) == 1, "[load] pre stack must be a single term")
        tau1 = goal.pre.stack[0]
        off = instr[2]
        heap = goal.pre.heap
        _expect(heap[0] == "cellt" and heap[1] == t and heap[3] is not None,
                "[load] precondition heap must be a typed cell with contents")
        addr, tau2 = heap[2], heap[3]
        _expect(normalize(addr) == normalize(_off_addr(tau1, off)),
                "[load] cell address must be the stack address plus the offset")
        _axiom_match(obls, goal, mk_assertion((tau1,), heap),
                     mk_assertion((tau2,), heap), "load")

    def _rule_store(self, node, goal, obls):
        instr = self._single(goal, set(STORE_OPS), "store")
        t, pt = STORE_OPS[instr[0]]
        _expect(pt is None, "[store] covers unpacked stores only")
        _is_plain(goal.pre, "[store] precondition")
        _expect(len(goal.pre.stack) == 2, "[store] pre stack must have 2 terms")
        tau1, tau2 = goal.pre.stack
        off = instr[2]
        heap = goal.pre.heap
        _expect(heap[0] == "cellt" and heap[1] == t and heap[3] is None,
                "[store] precondition heap must be a typed don't-care cell")
        addr = heap[2]
        _expect(normalize(addr) == normalize(_off_addr(tau1, off)),
                "[store] cell address must be the stack address plus the offset")
        _axiom_match(obls, goal, mk_assertion((tau1, tau2), heap),
                     mk_assertion((), CellT(t, addr, tau2)), "store")

    def _rule_mem_size(self, node, goal, obls):
        self._single(goal, ("mem.size",), "mem.size")
        _is_plain(goal.pre, "[mem.size] precondition")
        heap = goal.pre.heap
        _expect(heap[0] == "size", "[mem.size] precondition heap must be size(t)")
        tau = heap[1]
        _axiom_match(obls, goal, mk_assertion((), heap),
                     mk_assertion((tau,), heap), "mem.size")

    def _rule_mem_grow(self, node, goal, obls):
        self._single(goal, ("mem.grow",), "mem.grow")
        _is_plain(goal.pre, "[mem.grow] precondition")
        _expect(len(goal.pre.stack) == 1, "[mem.grow] pre stack must be a single term")
        tau1 = goal.pre.stack[0]
        heap = goal.pre.heap
        _expect(heap[0] == "size", "[mem.grow] precondition heap must be size(t)")
        tau2 = heap[1]
        v = V("?v")
        k64 = C(65536)
        grown = And(
            Star(("iterstar", "?i", A("*", tau2, k64),
                  A("*", A("+", tau2, tau1), k64), Cell(V("?i"), C(0))),
                 Size(A("+", tau2, tau1))),
            Eq(v, tau2),
            Pure("<=", A("+", tau2, tau1), C(1 << 16)))
        failed = And(Size(tau2), Eq(v, C(0xFFFFFFFF)))
        post_t = mk_assertion((v,), ("or", grown, failed), binders=("?v",))
        _axiom_match(obls, goal, mk_assertion((tau1,), heap), post_t, "mem.grow")

    # ------------------------------------------------------- control flow
    def _rule_br(self, node, goal, obls):
        instr = self._single(goal, ("br",), "br")
        i = instr[1]
        _expect(i < len(goal.ctx.labels), "[br] label %d out of range" % i)
        _expect(alpha_eq(goal.pre, goal.ctx.labels[i]),
                "[br] precondition must equal L!%d" % i)

    def _rule_return(self, node, goal, obls):
        self._single(goal, ("return",), "return")
        _expect(goal.ctx.ret is not None, "[return] requires a return assertion")
        _expect(alpha_eq(goal.pre, goal.ctx.ret),
                "[return] precondition must equal R")

    def _rule_block(self, node, goal, obls):
        instr = self._single(goal, ("block",), "block")
        (params, results), body = instr[1], instr[2]
        _expect(len(node.premises) == 1, "[block] takes one premise")
        _expect(goal.pre.arity == len(params),
                "[block] precondition stack arity must be %d" % len(params))
        _expect(goal.post.arity == len(results),
                "[block] postcondition stack arity must be %d" % len(results))
        inner = Triple(goal.ctx.push_label(goal.post), goal.pre, tuple(body),
                       goal.post)
        self._check(node.premises[0], inner, obls)

    def _rule_loop(self, node, goal, obls):
        instr = self._single(goal, ("loop",), "loop")
        (params, results), body = instr[1], instr[2]
        _expect(len(node.premises) == 1, "[loop] takes one premise")
        _expect(goal.pre.arity == len(params),
                "[loop] precondition stack arity must be %d" % len(params))
        _expect(goal.post.arity == len(results),
                "[loop] postcondition stack arity must be %d" % len(results))
        inner = Triple(goal.ctx.push_label(goal.pre), goal.pre, tuple(body),
                       goal.post)
        self._check(node.premises[0], inner, obls)

    def _rule_if(self, node, goal, obls):
        instr = self._single(goal, ("if",), "if")
        ft, then_b, else_b = instr[1], instr[2], instr[3]
        _expect(len(node.premises) == 2, "[if] takes two premises")
        _is_plain(goal.pre, "[if] precondition")
        s, (tau,) = _stack_split(goal.pre, 1, "[if]")
        then_goal = Triple(goal.ctx,
                           mk_assertion(s, And(goal.pre.heap, Pure("!=", tau, C(0)))),
                           (("block", ft, then_b),), goal.post)
        else_goal = Triple(goal.ctx,
                           mk_assertion(s, And(goal.pre.heap, Eq(tau, C(0)))),
                           (("block", ft, else_b),), goal.post)
        self._check(node.premises[0], then_goal, obls)
        self._check(node.premises[1], else_goal, obls)

    def _rule_br_if(self, node, goal, obls):
        instr = self._single(goal, ("br_if",), "br_if")
        _expect(len(node.premises) == 1, "[br_if] takes one premise")
        _is_plain(goal.pre, "[br_if] precondition")
        s, (tau,) = _stack_split(goal.pre, 1, "[br_if]")
        post_t = mk_assertion(s, And(goal.pre.heap, Eq(tau, C(0))))
        _expect(alpha_eq(goal.post, post_t),
                "[br_if] postcondition must be the not-taken case")
        taken = Triple(goal.ctx,
                       mk_assertion(s, And(goal.pre.heap, Pure("!=", tau, C(0)))),
                       (("br", instr[1]),), goal.post)
        self._check(node.premises[0], taken, obls)

    def _rule_br_table(self, node, goal, obls):
        instr = self._single(goal, ("br_table",), "br_table")
        targets, default = instr[1], instr[2]
        _expect(len(node.premises) == len(targets) + 1,
                "[br_table] takes a premise per target plus the default")
        _is_plain(goal.pre, "[br_table] precondition")
        s, (tau,) = _stack_split(goal.pre, 1, "[br_table]")
        for k, lab in enumerate(targets):
            case = Triple(goal.ctx,
                          mk_assertion(s, And(goal.pre.heap, Eq(tau, C(k)))),
                          (("br", lab),), goal.post)
            self._check(node.premises[k], case, obls)
        outside = ("not", And(Pure("<=", C(0), tau),
                              Pure("<", tau, C(len(targets)))))
        dflt = Triple(goal.ctx, mk_assertion(s, And(goal.pre.heap, outside)),
                      (("br", default),), goal.post)
        self._check(node.premises[-1], dflt, obls)

    # --------------------------------------------------------- structural
    def _rule_empty(self, node, goal, obls):
        _expect(len(goal.code) == 0, "[empty] applies to an empty segment")
        if alpha_eq(goal.pre, goal.post):
            return
        self._entail(obls, goal.pre, goal.post, "[empty] P => Q",
                     node.args.get("witnesses"))

    def _rule_seq(self, node, goal, obls):
        _expect(len(node.premises) == 2, "[seq] takes two premises")
        split = node.args.get("split")
        mid = node.args.get("mid")
        _expect(isinstance(split, int) and 0 <= split <= len(goal.code),
                "[seq] needs a split point inside the code")
        _expect(isinstance(mid, Assertion), "[seq] needs the midpoint assertion")
        left = Triple(goal.ctx, goal.pre, goal.code[:split], mid)
        right = Triple(goal.ctx, mid, goal.code[split:], goal.post)
        self._check(node.premises[0], left, obls)
        self._check(node.premises[1], right, obls)

    def _strip_binder(self, p: Assertion, what):
        _expect(len(p.binders) >= 1, "%s lacks the existential binder" % what)
        return p.binders[0], Assertion(p.binders[1:], p.stack, p.heap)

    def _rule_exists(self, node, goal, obls):
        _expect(len(node.premises) == 1, "[exists] takes one premise")
        var = node.args.get("var", "?e")
        bp, pre_in = self._strip_binder(goal.pre, "[exists] precondition")
        bq, post_in = self._strip_binder(goal.post, "[exists] postcondition")
        new_labels = []
        for i, lab in enumerate(goal.ctx.labels):
            bl, lab_in = self._strip_binder(lab, "[exists] label %d" % i)
            new_labels.append(assertion_subst(lab_in, {bl: V(var)}))
        new_ret = None
        if goal.ctx.ret is not None:
            br_, ret_in = self._strip_binder(goal.ctx.ret, "[exists] return assertion")
            new_ret = assertion_subst(ret_in, {br_: V(var)})
        inner_ctx = Context(goal.ctx.funcs, goal.ctx.assumptions,
                            tuple(new_labels), new_ret)
        inner = Triple(inner_ctx,
                       assertion_subst(pre_in, {bp: V(var)}),
                       goal.code,
                       assertion_subst(post_in, {bq: V(var)}))
        self._check(node.premises[0], inner, obls)

    def _strip_frame(self, p: Assertion, hf, what):
        heap = p.heap
        _expect(heap[0] == "star" and len(heap) >= 3 and
                heap_alpha_eq(heap[-1], hf),
                "%s must end with the frame as the last star conjunct" % what)
        rest = heap[1] if len(heap) == 3 else ("star",) + heap[1:-1]
        _expect(not (set(p.binders) & heap_fv(hf)),
                "%s frame captures a bound variable" % what)
        return Assertion(p.binders, p.stack, rest)

    def _rule_frame(self, node, goal, obls):
        _expect(len(node.premises) == 1, "[frame] takes one premise")
        hf = node.args.get("frame")
        _expect(hf is not None, "[frame] needs the frame formula")
        mv = modified_vars(goal.code, goal.ctx.funcs)
        _side(obls, "[frame] fv(H) does not meet mv(e*)",
              not (heap_fv(hf) & mv))
        pre_in = self._strip_frame(goal.pre, hf, "[frame] precondition")
        post_in = self._strip_frame(goal.post, hf, "[frame] postcondition")
        labels_in = tuple(self._strip_frame(lab, hf, "[frame] label %d" % i)
                          for i, lab in enumerate(goal.ctx.labels))
        ret_in = None
        if goal.ctx.ret is not None:
            ret_in = self._strip_frame(goal.ctx.ret, hf, "[frame] return assertion")
        inner_ctx = Context(goal.ctx.funcs, goal.ctx.assumptions, labels_in, ret_in)
        self._check(node.premises[0],
                    Triple(inner_ctx, pre_in, goal.code, post_in), obls)

    def _rule_consequence(self, node, goal, obls):
        _expect(len(node.premises) == 1, "[consequence] takes one premise")
        pre2 = node.args.get("pre", goal.pre)
        post2 = node.args.get("post", goal.post)
        labels2 = node.args.get("labels")
        ret2 = node.args.get("ret", goal.ctx.ret)
        wit = node.args.get("witnesses", {})
        if labels2 is None:
            labels2 = goal.ctx.labels
        labels2 = tuple(labels2)
        _expect(len(labels2) == len(goal.ctx.labels),
                "[consequence] must keep the number of labels")
        _expect((ret2 is None) == (goal.ctx.ret is None),
                "[consequence] cannot add or remove the return assertion")
        self._entail(obls, goal.pre, pre2, "[consequence] P => P'",
                     wit.get("pre"))
        self._entail(obls, post2, goal.post, "[consequence] Q' => Q",
                     wit.get("post"))
        for i, (l2, l1) in enumerate(zip(labels2, goal.ctx.labels)):
            _expect(l2.arity <= l1.arity,
                    "[consequence] label %d stack arity may not increase "
                    "(%d > %d)" % (i, l2.arity, l1.arity))
            self._entail(obls, l2, l1, "[consequence] L'!%d => L!%d" % (i, i),
                         wit.get("label%d" % i))
        if ret2 is not None:
            _expect(ret2.arity <= goal.ctx.ret.arity,
                    "[consequence] return stack arity may not increase")
            self._entail(obls, ret2, goal.ctx.ret, "[consequence] R' => R",
                         wit.get("ret"))
        inner_ctx = Context(goal.ctx.funcs, goal.ctx.assumptions, labels2, ret2)
        self._check(node.premises[0], Triple(inner_ctx, pre2, goal.code, post2),
                    obls)

    def _rule_extension(self, node, goal, obls):
        _expect(len(node.premises) == 1, "[extension] takes one premise")
        sk = tuple(node.args.get("stack", ()))
        _expect(sk, "[extension] needs the stack prefix")
        k = len(sk)
        _expect(goal.pre.stack[:k] == sk and goal.post.stack[:k] == sk,
                "[extension] both stacks must start with the prefix")
        names = set()
        for t in sk:
            names |= term_fv(t)
        mv = modified_vars(goal.code, goal.ctx.funcs)
        _side(obls, "[extension] fv(S_k) avoids mv(e*) and both binder lists",
              not (names & (mv | set(goal.pre.binders) | set(goal.post.binders))))
        inner = Triple(goal.ctx,
                       Assertion(goal.pre.binders, goal.pre.stack[k:], goal.pre.heap),
                       goal.code,
                       Assertion(goal.post.binders, goal.post.stack[k:],
                                 goal.post.heap))
        self._check(node.premises[0], inner, obls)

    def _rule_context(self, node, goal, obls):
        _expect(len(node.premises) == 1, "[context] takes one premise")
        keep = node.args.get("keep", 0)
        keep_ret = node.args.get("keep_ret", False)
        _expect(0 <= keep <= len(goal.ctx.labels),
                "[context] keeps at most the existing labels")
        inner_ctx = Context(goal.ctx.funcs, goal.ctx.assumptions,
                            goal.ctx.labels[:keep],
                            goal.ctx.ret if keep_ret else None)
        self._check(node.premises[0],
                    Triple(inner_ctx, goal.pre, goal.code, goal.post), obls)

    # ---------------------------------------------------- fold / unfold
    def _rewrite_pred(self, heap, name, args, unfold):
        """Replace one occurrence: instance <-> definition expansion."""
        target_instance = PredI(name, *args)
        expansion = self.env.expand(name, list(args))
        want, repl = ((target_instance, expansion) if unfold
                      else (expansion, target_instance))
        hit = [False]

        def walk(h):
            if hit[0]:
                return h
            if heap_alpha_eq(h, want):
                hit[0] = True
                return repl
            tag = h[0]
            if tag in ("and", "or", "star", "not"):
                return (tag,) + tuple(walk(s) for s in h[1:])
            if tag == "imp":
                return ("imp", walk(h[1]), walk(h[2]))
            if tag == "exists":
                return ("exists", h[1], walk(h[2]))
            if tag in ("forall", "iterstar"):
                return (tag, h[1], h[2], h[3], walk(h[4]))
            return h

        out = walk(heap)
        _expect(hit[0], "no occurrence of the %s instance to rewrite"
                % ("folded" if unfold else "unfolded"))
        return out

    def _fold_unfold(self, node, goal, obls, unfold, in_pre):
        _expect(len(node.premises) == 1, "fold/unfold takes one premise")
        name = node.args["pred"]
        args = node.args["args"]
        where = "pre" if in_pre else "post"
        target = goal.pre if in_pre else goal.post
        new_heap = self._rewrite_pred(target.heap, name, args, unfold)
        new_assert = Assertion(target.binders, target.stack, new_heap)
        inner = Triple(goal.ctx,
                       new_assert if in_pre else goal.pre,
                       goal.code,
                       goal.post if in_pre else new_assert)
        self._check(node.premises[0], inner, obls)

    def _rule_unfold_pre(self, node, goal, obls):
        self._fold_unfold(node, goal, obls, True, True)

    def _rule_fold_pre(self, node, goal, obls):
        self._fold_unfold(node, goal, obls, False, True)

    def _rule_unfold_post(self, node, goal, obls):
        self._fold_unfold(node, goal, obls, True, False)

    def _rule_fold_post(self, node, goal, obls):
        self._fold_unfold(node, goal, obls, False, False)

    # ------------------------------------------------- functions / modules
    def _rule_call(self, node, goal, obls):
        instr = self._single(goal, ("call",), "call")
        j = instr[1]
        _expect(j < len(goal.ctx.funcs), "[call] target %d out of range" % j)
        for (pre, idx, post) in goal.ctx.assumptions:
            if idx != j:
                continue
            theta = _match_assertion(pre, goal.pre)
            if theta is None:
                continue
            if alpha_eq(assertion_subst(post, theta), goal.post):
                return
        raise CheckError("[call] no matching assumption {P} call %d {Q}" % j)

    def _rule_function(self, node, goal, obls):
        _expect(len(goal.code) == 1 and goal.code[0][0] == "callcl",
                "[function] applies to a callcl pseudo-instruction")
        j = goal.code[0][1]
        _expect(j < len(goal.ctx.funcs), "[function] target %d out of range" % j)
        func = goal.ctx.funcs[j]
        n = len(func.type[0])
        m = len(func.type[1])
        k = len(func.locals)
        _is_plain(goal.pre, "[function] precondition")
        _expect(goal.pre.arity == n,
                "[function] precondition stack arity must be %d" % n)
        _expect(goal.post.arity == m,
                "[function] postcondition stack arity must be %d" % m)
        xs = goal.pre.stack
        _expect(all(t[0] == "v" for t in xs),
                "[function] argument stack must be distinct logical variables")
        _expect(len({t[1] for t in xs}) == len(xs),
                "[function] argument variables must be distinct")
        mentioned = set()
        for t in xs:
            mentioned |= term_fv(t)
        mentioned |= heap_fv(goal.pre.heap)
        mentioned |= assertion_fv(goal.post) | set(goal.post.binders)
        locals_leaked = {v for v in mentioned
                         if v.startswith("l") and v[1:].isdigit()}
        _side(obls, "[function] no l_i in the external specification",
              not locals_leaked)
        conj = [goal.pre.heap]
        for i in range(n):
            conj.append(Eq(local_var(i), xs[i]))
        for i in range(n, n + k):
            conj.append(Eq(local_var(i), C(0)))
        body_pre = mk_assertion((), And(*conj))
        _expect(len(node.premises) == 1, "[function] takes one premise")
        inner_ctx = Context(goal.ctx.funcs, goal.ctx.assumptions,
                            (goal.post,), goal.post)
        saved = self.cfg.n_locals
        self.cfg.n_locals = n + k
        try:
            self._check(node.premises[0],
                        Triple(inner_ctx, body_pre, tuple(func.body), goal.post),
                        obls)
        finally:
            self.cfg.n_locals = saved




def _match_assertion(spec: Assertion, goal: Assertion):
    """Match a call assumption against a call-site triple component,
    instantiating the assumption's free logical variables (assumptions
    quantify over them; local/global names stay rigid)."""
    if len(spec.stack) != len(goal.stack) or len(spec.binders) != len(goal.binders):
        return None
    from .assertions import alpha_normal
    sb, ss, sh = alpha_normal(spec)
    gb, gs, gh = alpha_normal(goal)
    theta = {}

    def rigid(name):
        return (name.startswith("?b")
                or (name[0] in "lg" and name[1:].isdigit()))

    def uterm(s, g):
        if s[0] == "v" and not rigid(s[1]):
            if s[1] in theta:
                return theta[s[1]] == g
            if any(n.startswith("?b") for n in term_fv(g)):
                return False  # the witness would escape a binder
            theta[s[1]] = g
            return True
        if s[0] in ("v", "c"):
            return s == g
        if s[0] != g[0] or len(s) != len(g):
            return False
        return all(uterm(a, b) for a, b in zip(s[1:], g[1:]))

    def uformula(s, g):
        if s[0] != g[0]:
            return False
        tag = s[0]
        if tag in ("bot", "emp"):
            return True
        if tag in ("pure", "pred"):
            return (s[1] == g[1] and len(s[2]) == len(g[2])
                    and all(uterm(a, b) for a, b in zip(s[2], g[2])))
        if tag == "cell":
            if (s[2] is None) != (g[2] is None):
                return False
            return uterm(s[1], g[1]) and (s[2] is None or uterm(s[2], g[2]))
        if tag == "cellt":
            if s[1] != g[1] or (s[3] is None) != (g[3] is None):
                return False
            return uterm(s[2], g[2]) and (s[3] is None or uterm(s[3], g[3]))
        if tag == "size":
            return uterm(s[1], g[1])
        if tag == "not":
            return uformula(s[1], g[1])
        if tag in ("and", "or", "star"):
            if len(s) != len(g):
                return False
            return all(uformula(a, b) for a, b in zip(s[1:], g[1:]))
        if tag == "imp":
            return uformula(s[1], g[1]) and uformula(s[2], g[2])
        if tag == "exists":
            return len(s[1]) == len(g[1]) and uformula(s[2], g[2])
        if tag in ("forall", "iterstar"):
            return (s[1] == g[1] and uterm(s[2], g[2]) and uterm(s[3], g[3])
                    and uformula(s[4], g[4]))
        return False

    for st, gt in zip(ss, gs):
        if not uterm(st, gt):
            return None
    if not uformula(sh, gh):
        return None
    # translate bindings on alpha-normalized names back: free variables are
    # untouched by alpha_normal, so theta already names the originals
    return {k: v for k, v in theta.items()}


def check_step(node: ProofNode, goal: Triple, config: CheckConfig = None):
    """Check one proof node against its goal; returns the obligation list or
    raises CheckError naming the violated condition."""
    checker = Checker(config or CheckConfig())
    return checker.check(node, goal)


def check_proof(node: ProofNode, goal: Triple, config: CheckConfig = None):
    checker = Checker(config or CheckConfig())
    try:
        obls = checker.check(node, goal)
    except (CheckError, CaptureError) as e:
        return ProofReport(False, [], str(e))
    failed = [o for o in obls if o.status == "failed"]
    return ProofReport(not failed, obls,
                       "" if not failed else failed[0].description)


def check_function(spec_pre: Assertion, func_index: int, spec_post: Assertion,
                   proof: ProofNode, ctx: Context, config: CheckConfig = None):
    """Check a function-level specification {P} callcl F!j {Q}."""
    goal = Triple(ctx, spec_pre, (("callcl", func_index),), spec_post)
    return check_proof(proof, goal, config)


def check_module(funcs, specs, proofs, config: CheckConfig = None):
    """The module rule: each body proven under the full assumption set.

    specs: list of (pre, func_index, post); proofs: one ProofNode per spec,
    aligned by position.  On success every spec holds with no assumptions.
    """
    config = config or CheckConfig()
    _expect(len(specs) == len(proofs), "[module] needs one proof per spec")
    for (pre, j, post) in specs:
        _expect(0 <= j < len(funcs), "[module] spec index %d out of range" % j)
    ctx = Context(funcs=tuple(funcs), assumptions=tuple(specs))
    all_obls = []
    for (pre, j, post), proof in zip(specs, proofs):
        report = check_function(pre, j, post, proof, ctx, config)
        all_obls.extend(report.obligations)
        if not report.accepted:
            return ProofReport(False, all_obls,
                               "spec for function %d: %s" % (j, report.reason))
    return ProofReport(True, all_obls)


# --------------------------------------------------------- derived rules
#
# The straight-line derivations of context/extension/frame around an axiom
# recur constantly, so the checker provides them as derived steps that
# elaborate deterministically (no search) into primitive nodes and check
# the elaborated tree.  Everything the report shows still comes from the
# primitive rules.

_EMP_AXIOMS = {"nop": 0, "drop": 1, "select": 3}


def _sugar_axiom(instr):
    op = instr[0]
    if op.endswith(".const") and not op.startswith("callcl"):
        return "const", 0
    if op in UNOPS:
        return "unop", 1
    if op in TESTOPS:
        return "testop", 1
    if op in BINOPS:
        return "binop", 2
    if op in RELOPS:
        return "relop", 2
    if op in CVTOPS:
        return "cvtop", 1
    if op in _EMP_AXIOMS:
        return op, _EMP_AXIOMS[op]
    if op == "get_local" or op == "get_global":
        return op, 0
    if op in ("set_local", "tee_local", "set_global"):
        return op, 1
    if op in LOAD_OPS:
        return "load", 1
    if op in STORE_OPS:
        return "store", 2
    if op == "mem.size":
        return "mem.size", 0
    if op == "mem.grow":
        return "mem.grow", 1
    return None, None


def _regroup(spatials, pures):
    """Rebuild a frame formula from leftover conjuncts."""
    spatial = Star(*spatials) if spatials else EMP
    if pures:
        return And(spatial, *pures)
    return spatial


def _flatten_heap(h):
    from .entail import _flatten, _GiveUp
    sp, pu = [], []
    try:
        _flatten(h, sp, pu)
    except _GiveUp as e:
        raise CheckError("sline cannot decompose the heap: %s" % e)
    return sp, pu


class _SugarMixin:
    def _wrap_context(self, goal, inner_node):
        if not goal.ctx.labels and goal.ctx.ret is None:
            return inner_node
        return ProofNode("context", {"keep": 0, "keep_ret": False},
                         (inner_node,))

    def _conseq(self, pre2, post2, inner, witnesses=None):
        args = {"pre": pre2, "post": post2}
        if witnesses:
            args["witnesses"] = witnesses
        return ProofNode("consequence", args, (inner,))

    def _rule_sline(self, node, goal, obls):
        _expect(len(goal.code) == 1, "[sline] covers a single instruction")
        instr = goal.code[0]
        rule, consumed = _sugar_axiom(instr)
        _expect(rule is not None, "[sline] does not handle %r" % (instr[0],))
        _expect(goal.pre.binders == (),
                "[sline] needs an unquantified precondition; eliminate "
                "existentials explicitly first")
        p = goal.pre
        _expect(len(p.stack) >= consumed, "[sline] stack too short for %r"
                % (instr[0],))
        sk = p.stack[:len(p.stack) - consumed]
        args_ = p.stack[len(p.stack) - consumed:]

        if rule in ("set_local", "tee_local", "set_global"):
            tree, pre2, post2, wit = self._elab_assign(instr, rule, p, sk, args_)
        elif rule == "load":
            tree, pre2, post2, wit = self._elab_load(instr, p, sk, args_)
        elif rule == "store":
            tree, pre2, post2, wit = self._elab_store(instr, p, sk, args_)
        elif rule == "mem.size":
            tree, pre2, post2, wit = self._elab_memsize(p, sk)
        elif rule == "mem.grow":
            tree, pre2, post2, wit = self._elab_memgrow(p, sk, args_)
        else:
            tree, pre2, post2, wit = self._elab_basic(instr, rule, p, sk, args_)

        wit = dict(wit)
        wit.update(node.args.get("witnesses", {}))
        outer = self._conseq(pre2, post2, self._wrap_context(goal, tree),
                             {"pre": wit or None,
                              "post": node.args.get("postwit")})
        self._check(outer, goal, obls)

    def _elab_basic(self, instr, rule, p, sk, args_):
        op = instr[0]
        if rule == "const":
            tpost_stack, tpost_heap, binders = (C(instr[1]),), EMP, ()
        elif rule == "nop":
            tpost_stack, tpost_heap, binders = (), EMP, ()
        elif rule == "drop":
            tpost_stack, tpost_heap, binders = (), EMP, ()
        elif rule == "select":
            t1, t2, t3 = args_
            x = V("?sel")
            tpost_stack = (x,)
            tpost_heap = And(EMP,
                             ("imp", Pure("!=", t3, C(0)), Eq(x, t1)),
                             ("imp", Eq(t3, C(0)), Eq(x, t2)))
            binders = ("?sel",)
        elif rule in ("unop", "testop", "cvtop"):
            if rule == "cvtop":
                from .ast import FLOAT_TYPES, INT_TYPES
                dst, src, _sx = CVTOPS[op]
                _expect(not (dst in INT_TYPES and src in FLOAT_TYPES),
                        "[sline] trapping conversions need an explicit step")
            tpost_stack, tpost_heap, binders = (A(op, args_[0]),), EMP, ()
        elif rule == "binop":
            _expect(_defined_binop(op, args_[0], args_[1]) is None,
                    "[sline] trapping operators need an explicit step")
            tpost_stack, tpost_heap, binders = (A(op, *args_),), EMP, ()
        elif rule == "relop":
            tpost_stack, tpost_heap, binders = (A(op, *args_),), EMP, ()
        elif rule == "get_local":
            tpost_stack, tpost_heap, binders = (local_var(instr[1]),), EMP, ()
        elif rule == "get_global":
            tpost_stack, tpost_heap, binders = (V("g%d" % instr[1]),), EMP, ()
        else:  # pragma: no cover
            raise CheckError("unhandled sline rule %s" % rule)
        hf = p.heap
        pre2 = mk_assertion(tuple(sk) + tuple(args_), star2(EMP, hf))
        post2 = mk_assertion(tuple(sk) + tuple(tpost_stack),
                             star2(tpost_heap, hf), binders)
        axiom = ProofNode(rule)
        tree = ProofNode("extension", {"stack": tuple(sk)},
                         (ProofNode("frame", {"frame": hf}, (axiom,)),)) \
            if sk else ProofNode("frame", {"frame": hf}, (axiom,))
        return tree, pre2, post2, {}

    def _elab_assign(self, instr, rule, p, sk, args_):
        i = instr[1]
        var = ("g%d" % i) if rule == "set_global" else ("l%d" % i)
        tau = args_[0]
        mentions = var in assertion_fv(p) or (tau[0] == "v" and tau[1] == var)
        old = "?old"
        new = "?new"
        sub = {var: V(old)} if mentions else {}
        sk2 = tuple(term_subst(t, sub) for t in sk)
        tau2 = term_subst(tau, sub)
        h2 = heap_subst(p.heap, sub)
        hf = And(Eq(V(new), tau2), h2)
        binders = ((old,) if mentions else ()) + (new,)
        pre2 = mk_assertion(sk2 + (V(new),), star2(EMP, hf), binders)
        keeps = rule == "tee_local"
        post_stack = sk2 + ((V(new),) if keeps else ())
        post2 = mk_assertion(post_stack,
                             star2(And(EMP, Eq(V(var), V(new))), hf), binders)
        axiom = ProofNode(rule)
        tree = ProofNode("frame", {"frame": hf}, (axiom,))
        if sk2:
            tree = ProofNode("extension", {"stack": sk2}, (tree,))
        for b in reversed(binders):
            tree = ProofNode("exists", {"var": b}, (tree,))
        wit = {new: tau}
        if mentions:
            wit[old] = V(var)
        return tree, pre2, post2, wit

    def _find_cell(self, p, t, addr_term):
        spatials, pures = _flatten_heap(p.heap)
        want = normalize(addr_term)
        hit = None
        rest = []
        for s in spatials:
            if (hit is None and s[0] == "cellt" and s[1] == t
                    and normalize(s[2]) == want):
                hit = s
            else:
                rest.append(s)
        _expect(hit is not None,
                "[sline] no %s cell at address %r in the precondition" % (t, want))
        return hit, _regroup(rest, pures)

    def _elab_load(self, instr, p, sk, args_):
        t, pt, _sx = LOAD_OPS[instr[0]]
        _expect(pt is None, "[load] covers unpacked loads only")
        addr = _off_addr(args_[0], instr[2])
        cell, hf = self._find_cell(p, t, addr)
        _expect(cell[3] is not None, "[sline] load needs known cell contents")
        cell_ax = CellT(t, addr, cell[3])
        pre2 = mk_assertion(tuple(sk) + (args_[0],), star2(cell_ax, hf))
        post2 = mk_assertion(tuple(sk) + (cell[3],), star2(cell_ax, hf))
        axiom = ProofNode("load")
        tree = ProofNode("frame", {"frame": hf}, (axiom,))
        if sk:
            tree = ProofNode("extension", {"stack": tuple(sk)}, (tree,))
        return tree, pre2, post2, {}

    def _elab_store(self, instr, p, sk, args_):
        t, pt = STORE_OPS[instr[0]]
        _expect(pt is None, "[store] covers unpacked stores only")
        tau1, tau2 = args_
        addr = _off_addr(tau1, instr[2])
        cell, hf = self._find_cell(p, t, addr)
        cell_ax = CellT(t, addr, None)
        pre2 = mk_assertion(tuple(sk) + (tau1, tau2), star2(cell_ax, hf))
        post2 = mk_assertion(tuple(sk), star2(CellT(t, addr, tau2), hf))
        axiom = ProofNode("store")
        tree = ProofNode("frame", {"frame": hf}, (axiom,))
        if sk:
            tree = ProofNode("extension", {"stack": tuple(sk)}, (tree,))
        return tree, pre2, post2, {}

    def _find_size(self, p):
        spatials, pures = _flatten_heap(p.heap)
        hit = None
        rest = []
        for s in spatials:
            if hit is None and s[0] == "size":
                hit = s
            else:
                rest.append(s)
        _expect(hit is not None, "[sline] no size resource in the precondition")
        return hit, _regroup(rest, pures)

    def _elab_memsize(self, p, sk):
        size, hf = self._find_size(p)
        pre2 = mk_assertion(tuple(sk), star2(size, hf))
        post2 = mk_assertion(tuple(sk) + (size[1],), star2(size, hf))
        tree = ProofNode("frame", {"frame": hf}, (ProofNode("mem.size"),))
        if sk:
            tree = ProofNode("extension", {"stack": tuple(sk)}, (tree,))
        return tree, pre2, post2, {}

    def _elab_memgrow(self, p, sk, args_):
        size, hf = self._find_size(p)
        tau1 = args_[0]
        tau2 = size[1]
        v = V("?v")
        grown = And(
            Star(("iterstar", "?i", A("*", tau2, C(65536)),
                  A("*", A("+", tau2, tau1), C(65536)), Cell(V("?i"), C(0))),
                 Size(A("+", tau2, tau1))),
            Eq(v, tau2),
            Pure("<=", A("+", tau2, tau1), C(1 << 16)))
        failed = And(Size(tau2), Eq(v, C(0xFFFFFFFF)))
        pre2 = mk_assertion(tuple(sk) + (tau1,), star2(size, hf))
        post2 = mk_assertion(tuple(sk) + (v,), star2(("or", grown, failed), hf),
                             ("?v",))
        tree = ProofNode("frame", {"frame": hf}, (ProofNode("mem.grow"),))
        if sk:
            tree = ProofNode("extension", {"stack": tuple(sk)}, (tree,))
        return tree, pre2, post2, {}

    # ---------------------------------------------------------- call sugar
    def _unify_spec(self, spec_pre, goal_pre_stack_tail, goal_spatials, rigid):
        """Match the spec against the call site, binding the spec's free
        logical variables."""
        theta = {}

        def unify_term(s, g):
            if s[0] == "v" and s[1] not in rigid:
                if s[1] in theta:
                    return normalize(theta[s[1]]) == normalize(g)
                theta[s[1]] = g
                return True
            if s[0] == "v" or s[0] == "c":
                return normalize(s) == normalize(g)
            if g[0] != s[0] or len(g) != len(s):
                return False
            return all(unify_term(a, b) for a, b in zip(s[1:], g[1:]))

        for s, g in zip(spec_pre.stack, goal_pre_stack_tail):
            if not unify_term(s, g):
                return None
        spec_sp, _spec_pu = _flatten_heap(spec_pre.heap)
        for s in spec_sp:
            if s[0] == "pred":
                for g in goal_spatials:
                    if g[0] == "pred" and g[1] == s[1] and len(g[2]) == len(s[2]):
                        saved = dict(theta)
                        if all(unify_term(a, b) for a, b in zip(s[2], g[2])):
                            break
                        theta.clear()
                        theta.update(saved)
            elif s[0] == "size":
                for g in goal_spatials:
                    if g[0] == "size":
                        saved = dict(theta)
                        if unify_term(s[1], g[1]):
                            break
                        theta.clear()
                        theta.update(saved)
        return theta

    def _rule_scall(self, node, goal, obls):
        _expect(len(goal.code) == 1 and goal.code[0][0] == "call",
                "[scall] covers a single call")
        j = goal.code[0][1]
        specs = [s for s in goal.ctx.assumptions if s[1] == j]
        _expect(specs, "[scall] no assumption for target %d" % j)
        _expect(goal.pre.binders == (),
                "[scall] needs an unquantified precondition")
        goal_sp, goal_pu = _flatten_heap(goal.pre.heap)

        chosen = None
        last_missing = None
        for spec_pre, _idx, spec_post in specs:
            n = spec_pre.arity
            if len(goal.pre.stack) < n:
                continue
            sk = goal.pre.stack[:len(goal.pre.stack) - n]
            tail = goal.pre.stack[len(goal.pre.stack) - n:]
            rigid = {v for v in assertion_fv(spec_pre) | assertion_fv(spec_post)
                     if (v[0] in "lg" and v[1:].isdigit())}
            theta = {}
            for name, term in node.args.get("inst", {}).items():
                theta[name] = term
            auto = self._unify_spec(spec_pre, tail, goal_sp, rigid)
            if auto:
                for k, v in auto.items():
                    theta.setdefault(k, v)
            p_hat = assertion_subst(spec_pre, dict(theta))
            q_hat = assertion_subst(spec_post, dict(theta))
            p_sp, _p_pu = _flatten_heap(p_hat.heap)
            rest = list(goal_sp)
            missing = None
            for s in p_sp:
                key_s = _spatial_key(s)
                hit = None
                for idx, g in enumerate(rest):
                    if _spatial_key(g) == key_s:
                        hit = idx
                        break
                if hit is None:
                    missing = s
                    break
                rest.pop(hit)
            if missing is not None:
                last_missing = missing
                continue
            chosen = (sk, p_hat, q_hat, rest)
            break
        _expect(chosen is not None,
                "[scall] no assumption for target %d matches the call site "
                "(missing resource %r)" % (j, last_missing))
        sk, p_hat, q_hat, rest = chosen
        hf = _regroup(rest, goal_pu)

        pre2 = mk_assertion(tuple(sk) + tuple(p_hat.stack),
                            star2(p_hat.heap, hf))
        post2 = mk_assertion(tuple(sk) + tuple(q_hat.stack),
                             star2(q_hat.heap, hf), q_hat.binders)
        call_node = ProofNode("call")
        tree = ProofNode("frame", {"frame": hf}, (call_node,))
        if sk:
            tree = ProofNode("extension", {"stack": tuple(sk)}, (tree,))
        inner = self._conseq(pre2, post2, self._wrap_context(goal, tree),
                             {"pre": node.args.get("witnesses"),
                              "post": node.args.get("postwit")})
        self._check(inner, goal, obls)


# graft the derived rules onto the checker
for _name in dir(_SugarMixin):
    if _name.startswith("_rule_") or _name.startswith("_elab") or \
            _name in ("_wrap_context", "_conseq", "_find_cell", "_find_size",
                      "_unify_spec"):
        setattr(Checker, _name, getattr(_SugarMixin, _name))


def node_span(node: ProofNode):
    """Number of instructions a proof node covers."""
    rule = node.rule
    if rule == "seq":
        return node_span(node.premises[0]) + node_span(node.premises[1])
    if rule == "chain":
        return sum(node_span(s) for s in node.args["steps"])
    if rule in ("consequence", "frame", "exists", "extension", "context",
                "unfold-pre", "fold-pre", "unfold-post", "fold-post"):
        return node_span(node.premises[0])
    if rule == "empty":
        return 0
    if rule == "srun":
        return node.args["count"]
    return 1


def _rule_chain(self, node, goal, obls):
    asserts = node.args["asserts"]
    steps = node.args["steps"]
    _expect(len(asserts) == len(steps) + 1,
            "chain needs one more assertion than steps")
    spans = [node_span(s) for s in steps]
    _expect(sum(spans) == len(goal.code),
            "chain covers %d instructions but the code has %d"
            % (sum(spans), len(goal.code)))

    def build(i):
        if i == len(steps) - 1:
            return steps[i]
        return ProofNode("seq", {"split": spans[i], "mid": asserts[i + 1]},
                         (steps[i], build(i + 1)))

    wrapped = self._conseq(asserts[0], asserts[-1], build(0))
    self._check(wrapped, goal, obls)


Checker._rule_chain = _rule_chain


def _rule_srun(self, node, goal, obls):
    """A run of pure stack instructions checked by symbolic execution:
    elaborates to one sline per instruction with computed midpoints."""
    count = node.args.get("count", len(goal.code))
    _expect(count == len(goal.code),
            "[srun] covers %d instructions but the segment has %d"
            % (count, len(goal.code)))
    _expect(goal.pre.binders == (), "[srun] needs an unquantified precondition")
    stack = list(goal.pre.stack)
    heap = goal.pre.heap
    mids = []
    for instr in goal.code:
        op = instr[0]
        if op.endswith(".const"):
            stack.append(C(instr[1]))
        elif op == "get_local":
            stack.append(local_var(instr[1]))
        elif op == "get_global":
            stack.append(V("g%d" % instr[1]))
        elif op == "nop":
            pass
        elif op == "drop":
            _expect(stack, "[srun] drop on an empty stack")
            stack.pop()
        elif op in UNOPS or op in TESTOPS:
            _expect(stack, "[srun] missing operand")
            stack.append(A(op, stack.pop()))
        elif op in BINOPS or op in RELOPS:
            _expect(len(stack) >= 2, "[srun] missing operands")
            if op in BINOPS:
                _expect(_defined_binop(op, stack[-2], stack[-1]) is None,
                        "[srun] trapping operators need explicit steps")
            b = stack.pop()
            a = stack.pop()
            stack.append((normalize(A(op, a, b))
                          if op in _LINEAR_SRUN else A(op, a, b)))
        else:
            raise CheckError("[srun] cannot execute %r" % (op,))
        mids.append(mk_assertion(tuple(stack), heap))

    tree = None
    for i in range(len(goal.code) - 1, -1, -1):
        leaf = ProofNode("sline")
        if tree is None:
            tree = leaf
        else:
            tree = ProofNode("seq", {"split": 1, "mid": mids[i]}, (leaf, tree))
    self._check(tree, goal, obls)


_LINEAR_SRUN = {"i32.add", "i32.sub", "i32.mul", "i64.add", "i64.sub", "i64.mul"}

Checker._rule_srun = _rule_srun
