"""Differential oracle: big-step vs small-step transitive closure.

Programs are generated typed-by-construction, then run through both
engines from identical initial configurations with a shared growth
policy; any disagreement on terminal result, memory, or globals is a bug
in one of the engines.
"""

import random
from dataclasses import dataclass

from .ast import Func, GlobalDef, Module, functype
from .bigstep import Config, eval_config
from .render import render_module
from .runtime import ALWAYS_GROW, GrowPolicy, Normal, OutOfFuel, TRAP, instantiate
from .smallstep import SSConfig, lift, run_to_terminal
from .typecheck import typecheck_module


@dataclass
class EquivReport:
    verdict: str  # 'agree' | 'disagree' | 'inconclusive'
    detail: str = ""
    module_text: str = ""


def _stores_match(s1, s2):
    if len(s1.mems) != len(s2.mems) or s1.globs != s2.globs:
        return False
    for m1, m2 in zip(s1.mems, s2.mems):
        if m1.data != m2.data:
            return False
    return True


def equiv_check(mod: Module, entry, args, fuel, policy=None) -> EquivReport:
    """Run both semantics on (call entry) from the same initial config."""
    errors = typecheck_module(mod)
    if errors:
        raise ValueError("module does not typecheck: %s" % errors[0])
    policy = policy or ALWAYS_GROW

    store_b, inst_b = instantiate(mod)
    cfg = Config(store_b, [], list(args), [("call", entry)], (), None, inst_b)
    big_exhausted = False
    big = None
    try:
        _, _, big = eval_config(cfg, fuel, policy)
    except OutOfFuel:
        big_exhausted = True

    store_s, inst_s = instantiate(mod)
    ss = SSConfig(store_s, [], lift(args) + [("call", entry)])
    small_exhausted = False
    small = None
    try:
        small = run_to_terminal(ss, inst_s, fuel * 4 + 1000, policy)
    except OutOfFuel:
        small_exhausted = True

    if big_exhausted and small_exhausted:
        return EquivReport("inconclusive", "both engines exhausted fuel")
    if big_exhausted or small_exhausted:
        which = "big-step" if big_exhausted else "small-step"
        return EquivReport("inconclusive", "%s exhausted fuel" % which)

    if big is TRAP:
        if small == ("trap",):
            return EquivReport("agree", "both trap")
        return EquivReport("disagree", "big-step traps, small-step %r" % (small,),
                           render_module(mod))
    assert isinstance(big, Normal)
    if small == ("trap",):
        return EquivReport("disagree", "small-step traps, big-step %r" % (big,),
                           render_module(mod))
    if big.values != small[1]:
        return EquivReport(
            "disagree",
            "results differ: big=%r small=%r" % (big.values, small[1]),
            render_module(mod))
    if not _stores_match(store_b, store_s):
        return EquivReport("disagree", "final stores differ", render_module(mod))
    return EquivReport("agree")


# --------------------------------------------------------------- generator

_BOUNDARY_I32 = (0, 1, 2, 0xFFFFFFFF, 0xFFFFFFFE, 0x7FFFFFFF, 0x80000000)
_I32_BIN = ("add", "sub", "mul", "div_s", "div_u", "rem_s", "rem_u",
            "and", "or", "xor", "shl", "shr_s", "shr_u", "rotl", "rotr")
_I32_REL = ("eq", "ne", "lt_s", "lt_u", "gt_s", "gt_u", "le_s", "le_u")
_I32_UN = ("i32.eqz", "i32.clz", "i32.ctz", "i32.popcnt")
_LOADS = ("i32.load", "i32.load8_u", "i32.load16_s")
_STORES = ("i32.store", "i32.store8", "i32.store16")


class _GenCtx:
    def __init__(self, rng, n_locals, funcs, max_depth, budget):
        self.rng = rng
        self.n_locals = n_locals      # readable/writable i32 locals
        self.counter_base = n_locals  # loop counters live above these
        self.funcs = funcs            # callable helper signatures (index, ft)
        self.labels = []              # innermost-first: types carried by br
        self.max_depth = max_depth
        self.budget = budget          # shared instruction budget (list cell)


def _gen_const(rng):
    return ("i32.const", rng.choice(_BOUNDARY_I32) if rng.random() < 0.25
            else rng.randrange(0, 8))


def _coerce(ctx, out, stack, target_len):
    """Drop extras / push consts so the i32-only stack has target_len slots."""
    while len(stack) > target_len:
        out.append(("drop",))
        stack.pop()
    while len(stack) < target_len:
        out.append(_gen_const(ctx.rng))
        stack.append("i32")


def _gen_seq(ctx, depth, length, stack):
    """Generate instructions against a tracked (i32-only) stack."""
    rng = ctx.rng
    out = []
    for _ in range(length):
        if ctx.budget[0] <= 0:
            break
        ctx.budget[0] -= 1
        if rng.random() < 0.2 or not stack:
            out.append(_gen_const(rng))
            stack.append("i32")
            continue
        choice = rng.randrange(0, 12)
        if choice == 0 and depth < ctx.max_depth:
            results = ("i32",) if rng.random() < 0.5 else ()
            ctx.labels.insert(0, results)
            body_stack = []
            body = _gen_seq(ctx, depth + 1, rng.randrange(1, 5), body_stack)
            _coerce(ctx, body, body_stack, len(results))
            ctx.labels.pop(0)
            out.append(("block", functype((), results), body))
            stack.extend(results)
        elif choice == 1 and depth < ctx.max_depth:
            # bounded loop via a dedicated counter local
            counter = ctx.counter_base + depth
            ctx.labels.insert(0, ())
            body_stack = []
            body = _gen_seq(ctx, depth + 1, rng.randrange(1, 4), body_stack)
            _coerce(ctx, body, body_stack, 0)
            body += [
                ("get_local", counter), ("i32.const", 1), ("i32.add",),
                ("tee_local", counter), ("i32.const", rng.randrange(2, 5)),
                ("i32.lt_u",), ("br_if", 0),
            ]
            ctx.labels.pop(0)
            out.append(("loop", functype((), ()), body))
        elif choice == 2 and depth < ctx.max_depth:
            if not stack:
                out.append(_gen_const(rng))
                stack.append("i32")
            stack.pop()
            results = ("i32",) if rng.random() < 0.5 else ()
            ctx.labels.insert(0, results)
            arms = []
            for _arm in range(2):
                arm_stack = []
                arm = _gen_seq(ctx, depth + 1, rng.randrange(0, 4), arm_stack)
                _coerce(ctx, arm, arm_stack, len(results))
                arms.append(arm)
            ctx.labels.pop(0)
            out.append(("if", functype((), results), arms[0], arms[1]))
            stack.extend(results)
        elif choice == 3 and ctx.labels:
            k = rng.randrange(0, len(ctx.labels))
            kinds = ctx.labels[k]
            if rng.random() < 0.45:
                for _t in kinds:
                    out.append(_gen_const(rng))
                out.append(("br", k))
                return out  # rest would be dead code
            for _t in kinds:
                out.append(_gen_const(rng))
                stack.append("i32")
            out.append(_gen_const(rng))
            out.append(("br_if", k))
        elif choice == 4 and ctx.labels:
            zero_labels = [i for i, kinds in enumerate(ctx.labels) if kinds == ()]
            if zero_labels:
                picks = tuple(rng.choice(zero_labels)
                              for _ in range(rng.randrange(1, 4)))
                out.append(_gen_const(rng))
                out.append(("br_table", picks, rng.choice(zero_labels)))
                return out
            out.append(("nop",))
        elif choice == 5:
            _need(ctx, out, stack, 2)
            op = "i32." + (rng.choice(_I32_BIN) if rng.random() < 0.7
                           else rng.choice(_I32_REL))
            out.append((op,))
            stack.pop()
        elif choice == 6 and ctx.n_locals:
            i = rng.randrange(0, ctx.n_locals)
            if stack and rng.random() < 0.5:
                out.append((rng.choice(("set_local", "tee_local")), i))
                if out[-1][0] == "set_local":
                    stack.pop()
            else:
                out.append(("get_local", i))
                stack.append("i32")
        elif choice == 7:
            addr = (rng.randrange(0, 120) * 4 if rng.random() < 0.92
                    else 65530 + rng.randrange(0, 10))
            offset = rng.randrange(0, 3) * 4
            if rng.random() < 0.5:
                out.append(("i32.const", addr))
                out.append(("i32.const", rng.randrange(0, 256)))
                out.append((rng.choice(_STORES), None, offset))
            else:
                out.append(("i32.const", addr))
                out.append((rng.choice(_LOADS), None, offset))
                stack.append("i32")
        elif choice == 8:
            _need(ctx, out, stack, 1)
            out.append((rng.choice(_I32_UN),))
        elif choice == 9 and ctx.funcs:
            fidx, ft = rng.choice(ctx.funcs)
            for _t in ft[0]:
                out.append(_gen_const(rng))
            out.append(("call", fidx))
            stack.extend("i32" for _t in ft[1])
        elif choice == 10:
            if rng.random() < 0.6:
                out.append(("mem.size",))
            else:
                out.append(("i32.const", rng.randrange(0, 2)))
                out.append(("mem.grow",))
            stack.append("i32")
        elif choice == 11:
            if rng.random() < 0.5:
                out.append((rng.choice(("get_global",)), 0))
                stack.append("i32")
            else:
                _need(ctx, out, stack, 1)
                out.append(("set_global", 0))
                stack.pop()
        else:
            out.append(("nop",))
    return out


def _need(ctx, out, stack, n):
    while len(stack) < n:
        out.append(_gen_const(ctx.rng))
        stack.append("i32")


def gen_program(rng: random.Random, max_depth=5, max_len=30) -> Module:
    """A random well-typed module with one param-less entry function."""
    mod = Module(memory=1)
    mod.globals.append(GlobalDef(True, "i32", rng.randrange(0, 4)))

    helper_sigs = []
    n_counters = max_depth + 1
    for h in range(rng.randrange(0, 3)):
        np_ = rng.randrange(0, 3)
        nres = rng.randrange(0, 2)
        ft = functype(("i32",) * np_, ("i32",) * nres)
        n_scratch = rng.randrange(0, 2)
        ctx = _GenCtx(rng, np_ + n_scratch, [], max_depth,
                      [rng.randrange(4, max_len // 2 + 4)])
        stack = []
        body = _gen_seq(ctx, 1, rng.randrange(2, 8), stack)
        _coerce(ctx, body, stack, nres)
        mod.funcs.append(Func(type=ft, locals=("i32",) * (n_scratch + n_counters),
                              body=body, name="$h%d" % h))
        helper_sigs.append((h, ft))

    nres = rng.randrange(0, 2)
    n_scratch = rng.randrange(1, 3)
    ctx = _GenCtx(rng, n_scratch, helper_sigs, max_depth, [max_len])
    stack = []
    body = _gen_seq(ctx, 0, rng.randrange(4, 14), stack)
    _coerce(ctx, body, stack, nres)
    mod.funcs.append(Func(type=functype((), ("i32",) * nres),
                          locals=("i32",) * (n_scratch + n_counters),
                          body=body, name="$main"))
    return mod


@dataclass
class CampaignReport:
    checked: int = 0
    agreed: int = 0
    disagreed: int = 0
    inconclusive: int = 0
    first_disagreement: EquivReport | None = None


def fuzz_campaign(count, seed, fuel=20000, max_depth=5, max_len=30) -> CampaignReport:
    """Generate and differentially run `count` well-typed programs."""
    rng = random.Random(seed)
    rep = CampaignReport()
    while rep.checked < count:
        mod = gen_program(rng, max_depth, max_len)
        errors = typecheck_module(mod)
        if errors:
            raise AssertionError("generator produced ill-typed module: %s" % errors[0])
        if rng.random() < 0.7:
            policy = ALWAYS_GROW
        else:
            policy = GrowPolicy("scripted",
                                script=[rng.random() < 0.5 for _ in range(8)])
        entry = len(mod.funcs) - 1
        r = equiv_check(mod, entry, [], fuel, policy)
        rep.checked += 1
        if r.verdict == "agree":
            rep.agreed += 1
        elif r.verdict == "disagree":
            rep.disagreed += 1
            if rep.first_disagreement is None:
                rep.first_disagreement = r
        else:
            rep.inconclusive += 1
    return rep
