"""Keyed min-priority structure with update-key, used by the peeling procedures."""

from __future__ import annotations


class PriorityTree:
    """Binary min-heap over integer keys with a position index for update/delete.

    Ties on priority break deterministically toward the smaller key, so pop
    sequences are reproducible.
    """

    def __init__(self, items=None):
        # entries are (priority, key); _pos maps key -> heap slot
        self._heap: list[tuple[float, int]] = []
        self._pos: dict[int, int] = {}
        if items:
            for key, priority in items:
                self.push(key, priority)

    def __len__(self) -> int:
        return len(self._heap)

    def __contains__(self, key: int) -> bool:
        return key in self._pos

    def push(self, key: int, priority: float) -> None:
        if key in self._pos:
            raise KeyError(f"key {key} already present")
        self._heap.append((priority, key))
        self._pos[key] = len(self._heap) - 1
        self._sift_up(len(self._heap) - 1)

    def peek(self) -> tuple[int, float]:
        if not self._heap:
            raise IndexError("empty priority tree")
        priority, key = self._heap[0]
        return key, priority

    def pop_min(self) -> tuple[int, float]:
        if not self._heap:
            raise IndexError("empty priority tree")
        priority, key = self._heap[0]
        self._remove_at(0)
        return key, priority

    def update(self, key: int, priority: float) -> None:
        i = self._pos[key]
        old = self._heap[i][0]
        if priority == old:
            return
        self._heap[i] = (priority, key)
        if priority < old:
            self._sift_up(i)
        else:
            self._sift_down(i)

    def priority(self, key: int) -> float:
        return self._heap[self._pos[key]][0]

    def delete(self, key: int) -> None:
        self._remove_at(self._pos[key])

    # -- internals -------------------------------------------------------

    def _remove_at(self, i: int) -> None:
        last = self._heap.pop()
        if i == len(self._heap):
            del self._pos[last[1]]
            return
        del self._pos[self._heap[i][1]]
        self._heap[i] = last
        self._pos[last[1]] = i
        self._sift_up(i)
        self._sift_down(i)

    def _sift_up(self, i: int) -> None:
        entry = self._heap[i]
        while i > 0:
            parent = (i - 1) >> 1
            if entry < self._heap[parent]:
                self._heap[i] = self._heap[parent]
                self._pos[self._heap[i][1]] = i
                i = parent
            else:
                break
        self._heap[i] = entry
        self._pos[entry[1]] = i

    def _sift_down(self, i: int) -> None:
        entry = self._heap[i]
        n = len(self._heap)
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            right = child + 1
            if right < n and self._heap[right] < self._heap[child]:
                child = right
            if self._heap[child] < entry:
                self._heap[i] = self._heap[child]
                self._pos[self._heap[i][1]] = i
                i = child
            else:
                break
        self._heap[i] = entry
        self._pos[entry[1]] = i
