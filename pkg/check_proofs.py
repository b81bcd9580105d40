"""Dev driver: check corpus proofs one by one (not part of the package)."""
import sys
import time

from wasmproof.harness import load_corpus
from wasmproof.proof import CheckConfig, Context, check_function

bundle = load_corpus()
ctx = Context(funcs=tuple(bundle.module.funcs),
              assumptions=tuple((s["pre"], s["index"], s["post"])
                                for s in bundle.specs))
cfg = CheckConfig(env=bundle.env, falsify_trials=8, module=bundle.module)

names = sys.argv[1:] or sorted(bundle.proofs)
tot_obl = tot_adm = 0
for name in names:
    if name not in bundle.proofs:
        print("%-20s (no proof yet)" % name)
        continue
    spec = bundle.spec(name)
    t0 = time.time()
    rep = check_function(spec["pre"], spec["index"], spec["post"],
                         bundle.proofs[name], ctx, cfg)
    tot_obl += len(rep.obligations)
    tot_adm += len(rep.admitted)
    print("%-20s %s  %.1fs" % (name, rep.summary(), time.time() - t0))
    for o in rep.obligations:
        if o.status == "failed":
            print("    FAILED |", o.description)
    if not rep.accepted and not rep.failed:
        pass
if tot_obl:
    print("TOTAL: %d obligations, %d admitted (%.1f%%)"
          % (tot_obl, tot_adm, 100.0 * tot_adm / tot_obl))
