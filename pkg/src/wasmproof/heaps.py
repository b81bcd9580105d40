"""Abstract heaps: a partial byte map plus an optional page-count resource.

size None stands for the 'unknown/unowned size' component; an integer n
means the heap owns the size resource and fixes the page count.  Two
concrete sizes never compose, and when the size is concrete every owned
address must lie below n * 64k.
"""

from .ast import PAGE_SIZE


def merge_intervals(pairs):
    """Normalize [(start, end), ...] half-open intervals: sorted, disjoint, merged."""
    out = []
    for s, e in sorted(pairs):
        if e <= s:
            continue
        if out and s <= out[-1][1]:
            if e > out[-1][1]:
                out[-1] = (out[-1][0], e)
        else:
            out.append((s, e))
    return [tuple(p) for p in out]


def intervals_disjoint(a, b):
    i = j = 0
    while i < len(a) and j < len(b):
        s1, e1 = a[i]
        s2, e2 = b[j]
        if e1 <= s2:
            i += 1
        elif e2 <= s1:
            j += 1
        else:
            return False
    return True


def intervals_union(a, b):
    return merge_intervals(list(a) + list(b))


def intervals_subtract(a, b):
    """a minus b, both normalized."""
    out = []
    bi = 0
    for s, e in a:
        cur = s
        while bi < len(b) and b[bi][1] <= cur:
            bi += 1
        k = bi
        while cur < e:
            if k < len(b) and b[k][0] < e:
                bs, be = b[k]
                if bs > cur:
                    out.append((cur, min(bs, e)))
                cur = max(cur, be)
                k += 1
            else:
                out.append((cur, e))
                cur = e
    return merge_intervals(out)


def intervals_size(a):
    return sum(e - s for s, e in a)


def intervals_contain(outer, inner):
    return intervals_subtract(inner, outer) == []


class AbstractHeap:
    """Byte cells plus the optional size resource.

    Backed either by an explicit cell dict or by a byte buffer viewed
    through an owned-interval list (used when checking assertions against
    a live linear memory without copying it cell by cell).
    """

    __slots__ = ("size", "_cells", "_data", "_intervals")

    def __init__(self, cells=None, size=None):
        self.size = size
        self._cells = dict(cells) if cells else {}
        self._data = None
        self._intervals = None

    @classmethod
    def from_memory(cls, data, intervals=None, size=None):
        h = cls()
        h.size = size
        h._cells = None
        h._data = data
        h._intervals = merge_intervals(intervals if intervals is not None
                                       else [(0, len(data))])
        return h

    def get(self, addr):
        if self._cells is not None:
            return self._cells.get(addr)
        for s, e in self._intervals:
            if s <= addr < e:
                return self._data[addr]
        return None

    def read_range(self, start, width):
        """Bytes at [start, start+width) if fully owned, else None."""
        if self._cells is not None:
            out = []
            for a in range(start, start + width):
                b = self._cells.get(a)
                if b is None:
                    return None
                out.append(b)
            return bytes(out)
        if intervals_contain(self._intervals, [(start, start + width)]):
            return bytes(self._data[start:start + width])
        return None

    def intervals(self):
        if self._intervals is not None:
            return list(self._intervals)
        return merge_intervals([(a, a + 1) for a in self._cells])

    def n_cells(self):
        if self._cells is not None:
            return len(self._cells)
        return intervals_size(self._intervals)

    def cells_dict(self):
        if self._cells is not None:
            return dict(self._cells)
        out = {}
        for s, e in self._intervals:
            for a in range(s, e):
                out[a] = self._data[a]
        return out

    def restrict(self, intervals):
        """A view of this heap restricted to the given region (size dropped)."""
        if self._cells is not None:
            keep = {}
            for s, e in intervals:
                for a in range(s, e):
                    if a in self._cells:
                        keep[a] = self._cells[a]
            return AbstractHeap(keep, None)
        h = AbstractHeap.from_memory(self._data, intervals, None)
        return h

    def __repr__(self):
        return "AbstractHeap(%d cells, size=%r)" % (self.n_cells(), self.size)


def heap_from_cells(cells, size=None):
    return AbstractHeap(cells, size)


def disjoint_union(h1: AbstractHeap, h2: AbstractHeap):
    """The composition operator; returns None when undefined.

    Undefined on overlapping cells, on two concrete sizes, and when a
    concrete size leaves an owned address out of bounds.
    """
    if h1.size is not None and h2.size is not None:
        return None
    i1, i2 = h1.intervals(), h2.intervals()
    if not intervals_disjoint(i1, i2):
        return None
    size = h1.size if h1.size is not None else h2.size
    cells = h1.cells_dict()
    cells.update(h2.cells_dict())
    if size is not None:
        limit = size * PAGE_SIZE
        if any(a >= limit for a in cells):
            return None
    return AbstractHeap(cells, size)
