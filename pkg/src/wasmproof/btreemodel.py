"""Reference models for the B-tree corpus.

ReferenceBTree is the pure membership oracle used by the differential
harness.  PyBTree mirrors the page layout of the corpus module (metadata
page 0, one node per page) and implements the classic split-child
insertion, so satisfying pre-states for tree-shaped assertions can be
constructed directly in memory.
"""

from .ast import PAGE_SIZE

K32 = PAGE_SIZE // 2


class ReferenceBTree:
    """Ordered key set; the behavioral oracle for search results."""

    def __init__(self):
        self.keys = set()

    def insert(self, k):
        self.keys.add(k)

    def search(self, k):
        return 1 if k in self.keys else 0

    def __len__(self):
        return len(self.keys)


class _Node:
    __slots__ = ("leaf", "keys", "children", "page")

    def __init__(self, leaf):
        self.leaf = leaf
        self.keys = []
        self.children = []
        self.page = None


class PyBTree:
    """Split-child insertion over explicit nodes, one page per node."""

    def __init__(self, t):
        if t < 2:
            raise ValueError("branching factor must be at least 2")
        self.t = t
        self.root = _Node(leaf=True)

    def search(self, k, node=None):
        node = node or self.root
        i = 0
        while i < len(node.keys) and node.keys[i] < k:
            i += 1
        if i < len(node.keys) and node.keys[i] == k:
            return 1
        if node.leaf:
            return 0
        return self.search(k, node.children[i])

    def _split_child(self, x, i):
        t = self.t
        y = x.children[i]
        z = _Node(leaf=y.leaf)
        z.keys = y.keys[t:]
        median = y.keys[t - 1]
        y.keys = y.keys[:t - 1]
        if not y.leaf:
            z.children = y.children[t:]
            y.children = y.children[:t]
        x.children.insert(i + 1, z)
        x.keys.insert(i, median)

    def insert(self, k):
        if self.search(k):
            return
        t = self.t
        r = self.root
        if len(r.keys) == 2 * t - 1:
            s = _Node(leaf=False)
            s.children = [r]
            self.root = s
            self._split_child(s, 0)
            self._insert_nonfull(s, k)
        else:
            self._insert_nonfull(r, k)

    def _insert_nonfull(self, x, k):
        t = self.t
        i = 0
        while i < len(x.keys) and x.keys[i] < k:
            i += 1
        if x.leaf:
            x.keys.insert(i, k)
            return
        if len(x.children[i].keys) == 2 * t - 1:
            self._split_child(x, i)
            if k > x.keys[i]:
                i += 1
        self._insert_nonfull(x.children[i], k)

    def nodes(self):
        out = []

        def walk(n):
            out.append(n)
            for c in n.children:
                walk(c)

        walk(self.root)
        return out

    def key_set(self):
        return frozenset(k for n in self.nodes() for k in n.keys)

    def check_shape(self):
        """Occupancy bounds, ordering, and equal leaf depth."""
        t = self.t
        depths = set()

        def walk(n, depth, is_root):
            if not is_root and not (t - 1 <= len(n.keys) <= 2 * t - 1):
                return False
            if len(n.keys) > 2 * t - 1:
                return False
            if any(n.keys[i] >= n.keys[i + 1] for i in range(len(n.keys) - 1)):
                return False
            if n.leaf:
                depths.add(depth)
                return True
            if len(n.children) != len(n.keys) + 1:
                return False
            return all(walk(c, depth + 1, False) for c in n.children)

        ok = walk(self.root, 0, True)
        return ok and len(depths) == 1


def put_u32(data, addr, value):
    data[addr:addr + 4] = (value & 0xFFFFFFFF).to_bytes(4, "little")


def write_array(data, base, values):
    put_u32(data, base, len(values))
    for i, v in enumerate(values):
        put_u32(data, base + 4 + 4 * i, v)


def write_node(data, page, leaf, keys, ptrs):
    base = page * PAGE_SIZE
    put_u32(data, base, 1 if leaf else 0)
    write_array(data, base + 4, keys)
    write_array(data, base + K32, ptrs)


def serialize_tree(tree: PyBTree, free_pages=(), scramble=None):
    """Lay the tree out in memory: metadata page 0, nodes from page 1 up,
    then the free pages.  Returns (bytearray, total_pages, root_page)."""
    nodes = tree.nodes()
    for i, n in enumerate(nodes):
        n.page = 1 + i
    n_pages = 1 + len(nodes) + len(free_pages)
    data = bytearray(n_pages * PAGE_SIZE)
    if scramble is not None:
        data[:] = bytes(scramble.randrange(0, 256) for _ in range(len(data)))
    put_u32(data, 0, tree.t)
    put_u32(data, 4, nodes[0].page)
    write_array(data, 8, list(free_pages))
    for n in nodes:
        write_node(data, n.page, n.leaf, n.keys,
                   [] if n.leaf else [c.page for c in n.children])
    return data, n_pages, nodes[0].page


def build_random_tree(rng, t, n_keys, key_range=10 ** 6):
    tree = PyBTree(t)
    while len(tree.key_set()) < n_keys:
        tree.insert(rng.randrange(0, key_range))
    return tree
