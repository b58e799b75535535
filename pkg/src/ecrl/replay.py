"""Experience replay: uniform ring buffer, rank-classified buffer, and a
TD-error-proportional prioritized buffer used as a baseline."""
from __future__ import annotations


from dataclasses import dataclass
from typing import Any

import numpy as np


class AllEmptyError(RuntimeError):
    """Every category is empty; there is nothing to compute or sample."""


@dataclass
class Experience:
    """One stored transition; reward is whatever the training stream emitted
    (shaped under shaping strategies).  category is the rank of the automaton
    state entered at this step, or 0 when classification is off."""

    state: Any
    action: Any
    reward: float
    next_state: Any
    terminated: bool
    category: int = 0


class Ring:
    """Overwrite-oldest storage with O(1) random access.

    A deque would evict in the same order but costs O(n) per indexed read,
    which dominates sampling once the buffer holds tens of thousands of
    entries."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items = []
        self.insert_at = 0

    def append(self, item):
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            self.items[self.insert_at] = item
        self.insert_at = (self.insert_at + 1) % self.capacity

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self):
        """Oldest to newest, matching eviction order."""
        if len(self.items) < self.capacity:
            return iter(self.items)
        return iter(self.items[self.insert_at:] + self.items[:self.insert_at])


class UniformReplayBuffer:
    """Fixed-capacity ring with uniform sampling."""

    def __init__(self, capacity: int, rng: np.random.Generator):
        self.storage = Ring(capacity)
        self.rng = rng

    def push(self, experience: Experience):
        self.storage.append(experience)

    def sample(self, batch_size: int):
        if not len(self.storage):
            raise AllEmptyError("buffer is empty")
        idx = self.rng.integers(0, len(self.storage), size=batch_size)
        return [self.storage[i] for i in idx]

    def __len__(self):
        return len(self.storage)


class ClassifiedReplayBuffer:
    """Replay divided into one sub-buffer per rank category.

    Capacity is split equally; each category evicts its own oldest entries.
    Sampling is two-stage: categories are drawn from a probability vector
    over categories, then entries uniformly within each category.  The
    vector is recomputed only by refresh_probs (on a fixed episode cadence
    upstream), never by pushes, so between refreshes the category
    distribution is stationary:

        P(i) = |B_i| * p_i**alpha / sum_j |B_j| * p_j**alpha

    With alpha = 0 this reduces to size-proportional weighting, i.e. uniform
    over stored experiences at refresh time.
    """

    def __init__(self, capacity: int, priorities, alpha: float, rng: np.random.Generator):
        if not priorities:
            raise ValueError("need at least one category priority")
        self.capacity_per_category = capacity // len(priorities)
        if self.capacity_per_category < 1:
            raise ValueError("capacity smaller than the number of categories")
        self.priorities = np.asarray(priorities, dtype=float)
        self.alpha = float(alpha)
        self.rng = rng
        self.partitions = [Ring(self.capacity_per_category) for _ in priorities]
        self.probs = None

    @property
    def n_categories(self):
        return len(self.partitions)

    def sizes(self):
        return [len(p) for p in self.partitions]

    def __len__(self):
        return sum(len(p) for p in self.partitions)

    def push(self, experience: Experience):
        self.partitions[experience.category].append(experience)

    def refresh_probs(self):
        """Recompute and return the category distribution from current sizes."""
        sizes = np.array(self.sizes(), dtype=float)
        if not sizes.any():
            raise AllEmptyError("all categories are empty")
        weights = sizes * self.priorities ** self.alpha
        self.probs = weights / weights.sum()
        return self.probs

    def sample(self, batch_size: int):
        if self.probs is None:
            raise RuntimeError("refresh_probs must run before sampling")
        if len(self) == 0:
            raise AllEmptyError("all categories are empty")
        counts = self.rng.multinomial(batch_size, self.probs)
        batch = []
        for category, count in enumerate(counts):
            if count == 0:
                continue
            partition = self.partitions[category]
            for i in self.rng.integers(0, len(partition), size=count):
                batch.append(partition[i])
        return batch


class PrioritizedReplayBuffer:
    """Proportional prioritized replay on absolute TD error.

    New entries enter at the current maximum priority; sampled entries are
    reweighted by the usual importance weights (n * P)**-beta, normalized by
    the largest weight in the batch.
    """

    def __init__(self, capacity: int, rng: np.random.Generator,
                 alpha: float = 0.6, epsilon: float = 1e-6):
        self.capacity = capacity
        self.rng = rng
        self.alpha = alpha
        self.epsilon = epsilon
        self.storage = []
        self.insert_at = 0
        self.priority = np.zeros(capacity, dtype=float)
        self.max_priority = 1.0

    def __len__(self):
        return len(self.storage)

    def push(self, experience: Experience):
        if len(self.storage) < self.capacity:
            self.storage.append(experience)
        else:
            self.storage[self.insert_at] = experience
        self.priority[self.insert_at] = self.max_priority
        self.insert_at = (self.insert_at + 1) % self.capacity

    def sample(self, batch_size: int, beta: float):
        if not self.storage:
            raise AllEmptyError("buffer is empty")
        n = len(self.storage)
        scaled = self.priority[:n] ** self.alpha
        probs = scaled / scaled.sum()
        idx = self.rng.choice(n, size=batch_size, p=probs)
        weights = (n * probs[idx]) ** (-beta)
        weights /= weights.max()
        return [self.storage[i] for i in idx], idx, weights

    def update_priorities(self, indices, td_errors):
        for i, err in zip(indices, td_errors):
            p = abs(float(err)) + self.epsilon
            self.priority[i] = p
            self.max_priority = max(self.max_priority, p)
