"""Fork resolution by delayed confirmation.

Blocks are kept in a tree rooted at the last confirmed block.  A height is
confirmed only once blocks ``delay_height`` levels above it have been seen;
the winner at each height is the block with the smallest
``(timestamp, -tx_count, block_hash)`` key among the children of the current
tip, and every branch that does not descend from the winner is dropped.
"""

from __future__ import annotations

import enum
from collections import OrderedDict
from typing import Callable, Optional

from povf.chain import Block

DEFAULT_DELAY_HEIGHT = 32
DEFAULT_ORPHAN_CAP = 10_000


class InsertStatus(enum.Enum):
    INSERTED = "inserted"
    ORPHANED = "orphaned"
    DUPLICATE = "duplicate"
    BELOW_CONFIRMED = "below-confirmed"


def priority_key(block: Block) -> tuple[int, int, bytes]:
    """Smaller sorts first: earlier timestamp, then more transactions."""
    return (block.timestamp, -block.tx_count, block.hash)


class DelayBuffer:
    def __init__(self, genesis: Block, delay_height: int = DEFAULT_DELAY_HEIGHT,
                 orphan_cap: int = DEFAULT_ORPHAN_CAP):
        if delay_height < 1:
            raise ValueError("delay_height must be >= 1")
        self.delay_height = delay_height
        self.orphan_cap = orphan_cap
        self.confirmed: list[Block] = [genesis]
        self._confirmed_hashes = {genesis.hash}
        self._blocks: dict[bytes, Block] = {genesis.hash: genesis}
        self._children: dict[bytes, list[bytes]] = {genesis.hash: []}
        self._by_height: dict[int, list[bytes]] = {}
        self._key: dict[bytes, tuple] = {genesis.hash: priority_key(genesis)}
        self._best_child: dict[bytes, bytes] = {}
        self._orphans: OrderedDict[bytes, Block] = OrderedDict()
        self._orphans_by_parent: dict[bytes, list[bytes]] = {}
        self.max_height = genesis.height

    @property
    def confirmed_tip(self) -> Block:
        return self.confirmed[-1]

    def __contains__(self, block_hash: bytes) -> bool:
        return block_hash in self._blocks or block_hash in self._confirmed_hashes

    def get(self, block_hash: bytes) -> Optional[Block]:
        return self._blocks.get(block_hash)

    def pending_count(self) -> int:
        return len(self._blocks) - 1

    def orphan_count(self) -> int:
        return len(self._orphans)

    # -- insertion ----------------------------------------------------------

    def insert_block(self, block: Block) -> InsertStatus:
        h = block.hash
        if h in self._blocks or h in self._confirmed_hashes or h in self._orphans:
            return InsertStatus.DUPLICATE
        if block.height <= self.confirmed_tip.height:
            return InsertStatus.BELOW_CONFIRMED
        if block.parent_hash not in self._blocks:
            self._add_orphan(block)
            return InsertStatus.ORPHANED
        self._attach(block)
        return InsertStatus.INSERTED

    def _attach(self, block: Block) -> None:
        stack = [block]
        while stack:
            b = stack.pop()
            h = b.hash
            self._blocks[h] = b
            self._children[h] = []
            self._children[b.parent_hash].append(h)
            key = self._key[h] = priority_key(b)
            best = self._best_child.get(b.parent_hash)
            if best is None or key < self._key[best]:
                self._best_child[b.parent_hash] = h
            self._by_height.setdefault(b.height, []).append(h)
            if b.height > self.max_height:
                self.max_height = b.height
            for oh in self._orphans_by_parent.pop(h, ()):
                orphan = self._orphans.pop(oh, None)
                if orphan is not None:
                    stack.append(orphan)

    def _add_orphan(self, block: Block) -> None:
        if len(self._orphans) >= self.orphan_cap:
            old_hash, old = self._orphans.popitem(last=False)
            siblings = self._orphans_by_parent.get(old.parent_hash)
            if siblings is not None:
                siblings.remove(old_hash)
                if not siblings:
                    del self._orphans_by_parent[old.parent_hash]
        self._orphans[block.hash] = block
        self._orphans_by_parent.setdefault(block.parent_hash, []).append(block.hash)

    # -- fork choice ----------------------------------------------------------

    def best_at_height(self, height: int) -> Optional[Block]:
        candidates = self._by_height.get(height)
        if not candidates:
            return None
        return self._blocks[min(candidates, key=self._key.__getitem__)]

    def try_confirm(self, max_received_height: Optional[int] = None) -> list[Block]:
        """Confirm every height that is now ``delay_height`` deep."""
        top = self.max_height if max_received_height is None else max_received_height
        out = []
        while top - (self.confirmed_tip.height + 1) >= self.delay_height:
            best = self.best_at_height(self.confirmed_tip.height + 1)
            if best is None:
                break
            self._confirm(best)
            out.append(best)
        return out

    def _confirm(self, block: Block) -> None:
        old_tip = self.confirmed_tip.hash
        for h in self._children.pop(old_tip):
            if h != block.hash:
                self._drop_subtree(h)
        del self._blocks[old_tip]
        del self._key[old_tip]
        self._best_child.pop(old_tip, None)
        self._by_height.pop(block.height, None)
        self.confirmed.append(block)
        self._confirmed_hashes.add(block.hash)

    def _drop_subtree(self, root: bytes) -> None:
        stack = [root]
        while stack:
            h = stack.pop()
            b = self._blocks.pop(h)
            del self._key[h]
            self._best_child.pop(h, None)
            stack.extend(self._children.pop(h))
            level = self._by_height.get(b.height)
            if level is not None:
                level.remove(h)
                if not level:
                    del self._by_height[b.height]

    def copy(self) -> "DelayBuffer":
        """Independent snapshot sharing the (immutable) block objects."""
        other = DelayBuffer.__new__(DelayBuffer)
        other.delay_height = self.delay_height
        other.orphan_cap = self.orphan_cap
        other.confirmed = list(self.confirmed)
        other._confirmed_hashes = set(self._confirmed_hashes)
        other._blocks = dict(self._blocks)
        other._children = {h: list(c) for h, c in self._children.items()}
        other._by_height = {k: list(v) for k, v in self._by_height.items()}
        other._key = dict(self._key)
        other._best_child = dict(self._best_child)
        other._orphans = OrderedDict(self._orphans)
        other._orphans_by_parent = {h: list(c) for h, c in self._orphans_by_parent.items()}
        other.max_height = self.max_height
        return other

    def preferred_tip(self, accept: Optional[Callable[[Block], bool]] = None) -> Block:
        """Deepest block on the path the buffer would currently confirm.

        Starting at the confirmed tip, repeatedly step to the best child
        (optionally only children passing ``accept``).
        """
        node = self.confirmed_tip
        while True:
            best = self._best_child.get(node.hash)
            if best is None:
                return node
            child = self._blocks[best]
            if accept is None or accept(child):
                node = child
                continue
            kids = [h for h in self._children[node.hash] if accept(self._blocks[h])]
            if not kids:
                return node
            node = self._blocks[min(kids, key=self._key.__getitem__)]


def insert_block(buffer: DelayBuffer, block: Block) -> InsertStatus:
    return buffer.insert_block(block)


def best_at_height(buffer: DelayBuffer, height: int) -> Optional[Block]:
    return buffer.best_at_height(height)


def try_confirm(buffer: DelayBuffer, max_received_height: Optional[int] = None) -> list[Block]:
    return buffer.try_confirm(max_received_height)
