"""Combinatorics of the rooted dyadic tree and its finite truncations.

Nodes are finite 0/1 words encoded as ``(length, bits)`` where ``bits`` reads the word
as a binary integer with the first letter most significant.  With this encoding the
standard linear order (shorter first, then left to right) is the heap order: the
0-based position of a node is ``2**length - 1 + bits`` and the children of position
``i`` sit at ``2*i + 1`` and ``2*i + 2``.  Everything else in the package indexes
dense vectors by that position.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import EnumerationTooLarge, InvalidInput

MAX_LENGTH = 32
ANTICHAIN_ENUM_CAP = 4


@dataclass(frozen=True)
class Node:
    length: int
    bits: int = 0

    def __post_init__(self):
        if not 0 <= self.length <= MAX_LENGTH:
            raise InvalidInput(f"node length {self.length} outside 0..{MAX_LENGTH}")
        if not 0 <= self.bits < (1 << self.length):
            raise InvalidInput(f"bits {self.bits} do not fit length {self.length}")

    @classmethod
    def root(cls) -> Node:
        return cls(0, 0)

    @classmethod
    def from_bits(cls, seq: Sequence[int]) -> Node:
        bits = 0
        for b in seq:
            if b not in (0, 1):
                raise InvalidInput(f"not a bit: {b!r}")
            bits = (bits << 1) | b
        return cls(len(seq), bits)

    @classmethod
    def parse(cls, text: str) -> Node:
        if any(ch not in "01" for ch in text):
            raise InvalidInput(f"node string must be over '01': {text!r}")
        return cls(len(text), int(text, 2) if text else 0)

    @classmethod
    def from_index(cls, index: int) -> Node:
        """Inverse of :attr:`index` (0-based heap position)."""
        index = int(index)
        length = (index + 1).bit_length() - 1
        return cls(length, index + 1 - (1 << length))

    @property
    def index(self) -> int:
        return (1 << self.length) - 1 + self.bits

    @property
    def word(self) -> tuple[int, ...]:
        return tuple((self.bits >> (self.length - 1 - i)) & 1 for i in range(self.length))

    def __str__(self) -> str:
        return format(self.bits, f"0{self.length}b") if self.length else ""

    def __repr__(self) -> str:
        return f"Node({str(self)!r})"

    def __lt__(self, other: Node) -> bool:
        return self.index < other.index

    def __le__(self, other: Node) -> bool:
        return self.index <= other.index

    def __gt__(self, other: Node) -> bool:
        return self.index > other.index

    def __ge__(self, other: Node) -> bool:
        return self.index >= other.index

    def predecessor(self) -> Node | None:
        if self.length == 0:
            return None
        return Node(self.length - 1, self.bits >> 1)

    def last_bit(self) -> int:
        if self.length == 0:
            raise InvalidInput("the root has no last bit")
        return self.bits & 1

    def child(self, alpha: int) -> Node:
        return Node(self.length + 1, (self.bits << 1) | alpha)

    def concat(self, other: Node) -> Node:
        return Node(self.length + other.length, (self.bits << other.length) | other.bits)

    def truncate(self, m: int) -> Node:
        """``s|_m``, the initial segment of length ``m``."""
        if m > self.length:
            raise InvalidInput("cannot truncate beyond the node length")
        return Node(m, self.bits >> (self.length - m))

    def is_prefix_of(self, other: Node) -> bool:
        """``self ⊑ other``."""
        return self.length <= other.length and (other.bits >> (other.length - self.length)) == self.bits

    def comparable(self, other: Node) -> bool:
        return self.is_prefix_of(other) or other.is_prefix_of(self)


class Relation(enum.Enum):
    EQUAL = "equal"
    S_PREFIX_OF_T = "s-prefix-of-t"
    T_PREFIX_OF_S = "t-prefix-of-s"
    S_LEFT_OF_T = "s-left-of-t"
    S_RIGHT_OF_T = "s-right-of-t"


def relate(s: Node, t: Node) -> Relation:
    if s == t:
        return Relation.EQUAL
    if s.is_prefix_of(t):
        return Relation.S_PREFIX_OF_T
    if t.is_prefix_of(s):
        return Relation.T_PREFIX_OF_S
    m = min(s.length, t.length)
    a, b = s.truncate(m).bits, t.truncate(m).bits
    # first differing bit decides; a < b means s has the 0 there
    return Relation.S_LEFT_OF_T if a < b else Relation.S_RIGHT_OF_T


def order_index(t: Node) -> int:
    """Position of ``t`` in the standard linear order, starting at 1 for the root."""
    return t.index + 1


@dataclass(frozen=True)
class Truncation:
    """The finite tree of all nodes of length at most ``depth``."""

    depth: int

    def __post_init__(self):
        if not 0 <= self.depth <= MAX_LENGTH:
            raise InvalidInput(f"depth {self.depth} outside 0..{MAX_LENGTH}")

    @property
    def node_count(self) -> int:
        return (1 << (self.depth + 1)) - 1

    def __len__(self) -> int:
        return self.node_count

    def __contains__(self, node: Node) -> bool:
        return node.length <= self.depth

    def nodes(self) -> Iterator[Node]:
        for i in range(self.node_count):
            yield Node.from_index(i)

    def level(self, m: int) -> range:
        """Heap positions of the nodes of length ``m``."""
        return range((1 << m) - 1, (1 << (m + 1)) - 1)

    def leaves(self) -> range:
        return self.level(self.depth)


def depth_for_size(size: int) -> int:
    depth = (size + 1).bit_length() - 2
    if size < 1 or (1 << (depth + 1)) - 1 != size:
        raise InvalidInput(f"{size} is not a truncation node count 2^(n+1)-1")
    return depth


def cone(root: Node, depth: int) -> Iterator[Node]:
    """All nodes ``s ⊒ root`` of length at most ``depth``, in standard order."""
    for extra in range(depth - root.length + 1):
        base = root.bits << extra
        for low in range(1 << extra):
            yield Node(root.length + extra, base | low)


# ---------------------------------------------------------------- antichains / branches


def _antichain_masks(index: int, depth: int) -> list[int]:
    """Antichains of the cone at heap position ``index`` as bitmasks over heap positions."""
    level = (index + 1).bit_length() - 1
    own = 1 << index
    if level == depth:
        return [0, own]
    left = _antichain_masks(2 * index + 1, depth)
    right = _antichain_masks(2 * index + 2, depth)
    out = [a | b for a in left for b in right]
    out.append(own)
    return out


def antichain_count(n: int) -> int:
    """``A(0) = 2, A(n) = A(n-1)**2 + 1``."""
    a = 2
    for _ in range(n):
        a = a * a + 1
    return a


def _mask_nodes(mask: int, table: Sequence[Node]) -> tuple[Node, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(table[low.bit_length() - 1])
        mask ^= low
    return tuple(out)


def enumerate_antichains(n: int, cap: int = ANTICHAIN_ENUM_CAP) -> Iterator[tuple[Node, ...]]:
    """Yield every antichain of the depth-``n`` truncation once, the empty one included.

    Built recursively: an antichain of a cone is either its root alone or a union of
    antichains of the two child cones.  Each antichain comes out sorted in standard order.
    """
    if n > cap:
        raise EnumerationTooLarge(f"antichain enumeration at depth {n} exceeds cap {cap}")
    table = list(Truncation(n).nodes())
    for mask in _antichain_masks(0, n):
        yield _mask_nodes(mask, table)


def antichain_index_sets(n: int, cap: int = ANTICHAIN_ENUM_CAP) -> list[tuple[int, ...]]:
    """Nonempty antichains as tuples of heap positions (the form the norm engines want)."""
    if n > cap:
        raise EnumerationTooLarge(f"antichain enumeration at depth {n} exceeds cap {cap}")
    out = []
    for mask in _antichain_masks(0, n):
        if mask:
            out.append(tuple(i for i in range(mask.bit_length()) if mask >> i & 1))
    return out


def maximal_antichain_index_sets(n: int) -> list[tuple[int, ...]]:
    """Maximal antichains of the depth-``n`` truncation (``M(0)=1, M(n)=M(n-1)**2+1``)."""

    def rec(index: int, level: int) -> list[tuple[int, ...]]:
        if level == n:
            return [(index,)]
        left = rec(2 * index + 1, level + 1)
        right = rec(2 * index + 2, level + 1)
        return [(index,)] + [a + b for a in left for b in right]

    return [tuple(sorted(a)) for a in rec(0, 0)]


def branch_index_sets(n: int) -> list[tuple[int, ...]]:
    """Root-to-leaf chains as tuples of heap positions, leaves left to right."""
    out = []
    for leaf in range((1 << n) - 1, (1 << (n + 1)) - 1):
        path = []
        i = leaf
        while True:
            path.append(i)
            if i == 0:
                break
            i = (i - 1) // 2
        out.append(tuple(reversed(path)))
    return out


def enumerate_branches(n: int) -> Iterator[tuple[Node, ...]]:
    for path in branch_index_sets(n):
        yield tuple(Node.from_index(i) for i in path)


def is_antichain(nodes: Sequence[Node]) -> bool:
    return all(not a.comparable(b) for a, b in itertools.combinations(nodes, 2))


# ---------------------------------------------------------------- subtree embeddings


@dataclass(frozen=True)
class SubtreeEmbedding:
    """A map ``t -> s_t`` from the depth-``source_depth`` truncation into the tree.

    ``images[i]`` is the image of the node at heap position ``i``.
    """

    source_depth: int
    images: tuple[Node, ...]

    def __post_init__(self):
        if len(self.images) != (1 << (self.source_depth + 1)) - 1:
            raise InvalidInput("image count does not match the source truncation")

    @classmethod
    def identity(cls, depth: int) -> SubtreeEmbedding:
        return cls(depth, tuple(Truncation(depth).nodes()))

    @classmethod
    def from_mapping(cls, depth: int, mapping: Mapping[Node, Node]) -> SubtreeEmbedding:
        return cls(depth, tuple(mapping[t] for t in Truncation(depth).nodes()))

    @classmethod
    def shift(cls, depth: int, prefix: Node) -> SubtreeEmbedding:
        """``t -> prefix⌢t``."""
        return cls(depth, tuple(prefix.concat(t) for t in Truncation(depth).nodes()))

    def __call__(self, t: Node) -> Node:
        return self.images[t.index]

    @property
    def image_depth(self) -> int:
        return max(s.length for s in self.images)

    def compose(self, inner: SubtreeEmbedding) -> SubtreeEmbedding:
        """``self ∘ inner``; ``inner``'s images must lie in this embedding's source."""
        if inner.image_depth > self.source_depth:
            raise InvalidInput("inner embedding leaves the outer source truncation")
        return SubtreeEmbedding(inner.source_depth, tuple(self(s) for s in inner.images))

    def restrict(self, depth: int) -> SubtreeEmbedding:
        return SubtreeEmbedding(depth, self.images[: (1 << (depth + 1)) - 1])

    def to_json(self) -> dict:
        return {
            "source_depth": self.source_depth,
            "map": {str(t): str(s) for t, s in zip(Truncation(self.source_depth).nodes(), self.images)},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> SubtreeEmbedding:
        depth = int(data["source_depth"])
        mapping = {Node.parse(k): Node.parse(v) for k, v in data["map"].items()}
        return cls.from_mapping(depth, mapping)


@dataclass(frozen=True)
class EmbeddingCheck:
    ok: bool
    witness: tuple[Node, Node] | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def verify_embedding(e: SubtreeEmbedding) -> EmbeddingCheck:
    """Check prefix/incomparability/orientation and linear order on every pair.

    The relation of each image pair must equal the relation of the source pair, which
    covers the first three invariants at once.
    """
    src = list(Truncation(e.source_depth).nodes())
    for i, t1 in enumerate(src):
        s1 = e.images[i]
        for j in range(i + 1, len(src)):
            t2, s2 = src[j], e.images[j]
            if relate(s1, s2) is not relate(t1, t2):
                return EmbeddingCheck(False, (t1, t2), f"relation {relate(t1, t2).value} not preserved")
            if not s1 < s2:
                return EmbeddingCheck(False, (t1, t2), "standard linear order not preserved")
    return EmbeddingCheck(True)


def random_embedding(source_depth: int, host_depth: int, rng, attempts: int = 100) -> SubtreeEmbedding:
    """A random oriented embedding of the depth-``source_depth`` tree into ``2^{<=host_depth}``.

    Images are drawn in standard order: ``s_{t⌢α}`` is a random node below ``s_t⌢α``
    that comes after the previous image and leaves room for the remaining levels.
    Draws that paint themselves into a corner are retried.
    """
    if not 0 <= source_depth <= host_depth:
        raise InvalidInput("need 0 <= source depth <= host depth")
    for _ in range(attempts):
        images: list[Node] = []
        last = -1
        for t in Truncation(source_depth).nodes():
            top = Node.root() if t.length == 0 else images[t.predecessor().index].child(t.last_bit())
            room = host_depth - (source_depth - t.length)
            cands = [s for s in cone(top, room) if s.index > last] if top.length <= room else []
            if not cands:
                break
            s = cands[int(rng.integers(len(cands)))]
            images.append(s)
            last = s.index
        else:
            e = SubtreeEmbedding(source_depth, tuple(images))
            if verify_embedding(e):
                return e
    return SubtreeEmbedding.shift(source_depth, Node.root())
