"""Best-offset prefetcher.

Learns the best line offset D for a core's L2-side demand stream by keeping
scores for a fixed candidate list.  On every training access to line X (an L2
miss or the first demand touch of a prefetched line) exactly one candidate d
is tested: if X - d sits in the recent-requests (RR) table, d scores a point.
The cursor then advances, so one full sweep of the candidate list is one
round.

The RR table is written at *fill completion* time, never at issue time: a
demand fill of line Y inserts Y, a prefetch fill of line Y+D inserts Y.  A
candidate can therefore only score when the matching prefetch would have
completed before the demand arrived, which is what makes the scheme prefer
timely offsets over merely correct ones.

A learning phase ends when any score reaches score_max or when round_max
rounds complete.  The winner becomes best_offset; prefetching is enabled for
the next phase only when the winning score exceeds bad_score.  A phase where
nothing scored keeps the previous best_offset with prefetching disabled.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field


def default_offset_candidates(limit: int = 256) -> tuple:
    """Offsets 1..limit whose prime factors are all <= 5 (52 entries at 256)."""
    out = []
    for d in range(1, limit + 1):
        n = d
        for p in (2, 3, 5):
            while n % p == 0:
                n //= p
        if n == 1:
            out.append(d)
    return tuple(out)


@dataclass
class BopConfig:
    offset_candidates: tuple = field(default_factory=default_offset_candidates)
    score_max: int = 31
    round_max: int = 100
    bad_score: int = 1
    rr_entries: int = 256

    def validate(self) -> "BopConfig":
        from .faults import ValidationError
        cands = tuple(sorted(set(int(c) for c in self.offset_candidates)))
        if not cands or cands[0] < 1:
            raise ValidationError("offset candidates must be positive")
        object.__setattr__(self, "offset_candidates", cands)
        if self.rr_entries < 1 or self.rr_entries & (self.rr_entries - 1):
            raise ValidationError("rr_entries must be a power of two")
        if not (0 <= self.bad_score < self.score_max):
            raise ValidationError("need 0 <= bad_score < score_max")
        if self.round_max < 1:
            raise ValidationError("round_max must be >= 1")
        return self


@dataclass
class BopState:
    rr_table: list
    scores: list
    round: int = 0
    cursor: int = 0
    best_offset: int = 1
    enabled: bool = True


class BestOffsetPrefetcher:
    def __init__(self, cfg: BopConfig | None = None):
        self.cfg = (cfg or BopConfig()).validate()
        n = len(self.cfg.offset_candidates)
        self.state = BopState(
            rr_table=[None] * self.cfg.rr_entries,
            scores=[0] * n,
            best_offset=self.cfg.offset_candidates[0],
        )
        self._pending = []  # heap of (completion_cycle, base_line)
        self.phases_completed = 0

    # convenience mirrors
    @property
    def best_offset(self) -> int:
        return self.state.best_offset

    @property
    def enabled(self) -> bool:
        return self.state.enabled

    # ------------------------------------------------------------------

    def _rr_index(self, line: int) -> int:
        h = line ^ (line >> 8) ^ (line >> 16)
        return h & (self.cfg.rr_entries - 1)

    def _rr_insert(self, line: int):
        self.state.rr_table[self._rr_index(line)] = line

    def _rr_contains(self, line: int) -> bool:
        return self.state.rr_table[self._rr_index(line)] == line

    def _drain(self, now: int):
        while self._pending and self._pending[0][0] <= now:
            _, base = heapq.heappop(self._pending)
            self._rr_insert(base)

    def record_fill(self, completion: int, line: int):
        """A demand fill of `line` will complete at `completion`."""
        heapq.heappush(self._pending, (completion, line))

    def record_prefetch_fill(self, completion: int, base_line: int):
        """A prefetch issued from `base_line` will complete at `completion`."""
        heapq.heappush(self._pending, (completion, base_line))

    # ------------------------------------------------------------------

    def on_access(self, line: int, was_miss_or_prefetch_hit: bool,
                  now: int):
        """Observe one training access; returns a prefetch target line or None."""
        if not was_miss_or_prefetch_hit:
            return None
        self._drain(now)
        st, cfg = self.state, self.cfg
        d = cfg.offset_candidates[st.cursor]
        if st.scores[st.cursor] < cfg.score_max and self._rr_contains(line - d):
            st.scores[st.cursor] += 1
        ended = st.scores[st.cursor] >= cfg.score_max
        st.cursor += 1
        if st.cursor == len(cfg.offset_candidates):
            st.cursor = 0
            st.round += 1
            if st.round >= cfg.round_max:
                ended = True
        if ended:
            self.phase_end()
        if st.enabled:
            return line + st.best_offset
        return None

    def phase_end(self) -> int:
        """Close the learning phase: pick the winner, reset scores."""
        st, cfg = self.state, self.cfg
        best_score = max(st.scores)
        if best_score > 0:
            st.best_offset = cfg.offset_candidates[st.scores.index(best_score)]
        st.enabled = best_score > cfg.bad_score
        st.scores = [0] * len(cfg.offset_candidates)
        st.round = 0
        st.cursor = 0
        self.phases_completed += 1
        return st.best_offset
