"""Uniform replay buffer backed by growing numpy rings."""
from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Stores ``(s, a_raw, a_proj, r, s')`` tuples.

    Storage starts small and doubles up to ``capacity``; once full, the
    oldest tuple is overwritten.  ``sample`` draws without replacement.
    """

    FIELDS = ("state", "raw", "proj", "reward", "next_state")

    def __init__(self, capacity: int, state_dim: int, raw_dim: int, proj_dim: int, initial: int = 4096):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.dims = {"state": state_dim, "raw": raw_dim, "proj": proj_dim, "reward": None,
                     "next_state": state_dim}
        self._alloc(min(initial, self.capacity))
        self.inserted = 0

    def _alloc(self, size: int, keep: int = 0) -> None:
        new = {}
        for name, dim in self.dims.items():
            shape = (size,) if dim is None else (size, dim)
            arr = np.zeros(shape)
            if keep:
                arr[:keep] = self.data[name][:keep]
            new[name] = arr
        self.data = new

    @property
    def size(self) -> int:
        return min(self.inserted, self.capacity)

    def __len__(self) -> int:
        return self.size

    def add(self, state, raw, proj, reward, next_state) -> None:
        alloc = len(self.data["reward"])
        if self.inserted < self.capacity and self.inserted >= alloc:
            self._alloc(min(2 * alloc, self.capacity), keep=alloc)
        k = self.inserted % self.capacity
        self.data["state"][k] = state
        self.data["raw"][k] = raw
        self.data["proj"][k] = proj
        self.data["reward"][k] = reward
        self.data["next_state"][k] = next_state
        self.inserted += 1

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if batch > self.size:
            raise ValueError(f"buffer holds {self.size} tuples, batch of {batch} requested")
        return rng.choice(self.size, size=batch, replace=False)

    def sample(self, batch: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        idx = self.sample_indices(batch, rng)
        return {name: arr[idx] for name, arr in self.data.items()}

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: arr[: self.size].copy() for name, arr in self.data.items()}

    def load(self, arrays: dict[str, np.ndarray], inserted: int) -> None:
        n = len(arrays["reward"])
        self._alloc(max(n, 1))
        for name in self.FIELDS:
            self.data[name][:n] = arrays[name]
        self.inserted = int(inserted)
