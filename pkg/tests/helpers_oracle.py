"""Independent brute-force oracles used by the assertion-algebra tests.

The star oracle enumerates every split of a small heap and checks the
operands with heap_sat; it never relies on heap_sat's own splitting
logic for the composite formula.
"""

from itertools import combinations

from wasmproof.assertions import UNKNOWN, heap_sat
from wasmproof.heaps import AbstractHeap


def all_splits(heap: AbstractHeap):
    """Every (h1, h2) with h1 (+) h2 = heap, including size assignment."""
    cells = heap.cells_dict()
    addrs = sorted(cells)
    for k in range(len(addrs) + 1):
        for chosen in combinations(addrs, k):
            left = {a: cells[a] for a in chosen}
            right = {a: cells[a] for a in addrs if a not in chosen}
            if heap.size is None:
                yield AbstractHeap(left, None), AbstractHeap(right, None)
            else:
                yield AbstractHeap(left, heap.size), AbstractHeap(right, None)
                yield AbstractHeap(left, None), AbstractHeap(right, heap.size)


def brute_star_sat(h1_formula, h2_formula, sigma, heap, env=None, fuel=10 ** 5):
    """Split-enumeration semantics of star; three-valued like heap_sat."""
    saw_unknown = False
    for left, right in all_splits(heap):
        r1 = heap_sat(h1_formula, sigma, left, env, fuel)
        if r1 is False:
            continue
        r2 = heap_sat(h2_formula, sigma, right, env, fuel)
        if r1 is True and r2 is True:
            return True
        if r2 is not False:
            saw_unknown = True
        if r1 is UNKNOWN and r2 is not False:
            saw_unknown = True
    return UNKNOWN if saw_unknown else False
