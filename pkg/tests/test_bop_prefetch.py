"""Best-offset prefetcher tests.

The offset candidate oracle is recomputed here independently: integers in
[1, 256] whose prime factorization uses only 2, 3, and 5.
"""

import pytest

from socsim import BestOffsetPrefetcher, BopConfig, ValidationError
from socsim.bop_prefetch import default_offset_candidates


def oracle_candidates():
    out = []
    for n in range(1, 257):
        rem = n
        for p in (2, 3, 5):
            while rem % p == 0:
                rem //= p
        if rem == 1:
            out.append(n)
    return out


def feed(pf, lines, spacing=1000, fill_delay=100):
    """Drive a miss stream: each access records its fill completion."""
    targets = []
    for i, line in enumerate(lines):
        now = i * spacing
        t = pf.on_access(line, True, now)
        targets.append(t)
        pf.record_fill(now + fill_delay, line)
        if t is not None:
            pf.record_prefetch_fill(now + fill_delay, t - pf.best_offset)
    return targets


def test_candidate_list_matches_oracle():
    cands = list(default_offset_candidates())
    assert cands == oracle_candidates()
    assert len(cands) == 52
    assert cands[0] == 1 and cands[-1] == 256
    assert 7 not in cands and 14 not in cands and 250 in cands


def test_initial_state_prefetches_next_line():
    pf = BestOffsetPrefetcher(BopConfig())
    assert pf.enabled and pf.best_offset == 1
    assert pf.on_access(100, True, 0) == 101


def test_hits_do_not_train_or_prefetch():
    pf = BestOffsetPrefetcher(BopConfig())
    assert pf.on_access(100, False, 0) is None


def test_stride_one_learns_offset_one():
    pf = BestOffsetPrefetcher(BopConfig())
    n_cand = len(pf.cfg.offset_candidates)
    # candidate 1 is tested first in every round and scores every time once
    # the recent-requests table is warm, so it reaches score_max=31 first
    feed(pf, range(4000))
    assert pf.phases_completed >= 1
    assert pf.best_offset == 1
    assert pf.enabled
    # the phase must take at least score_max - 1 full rounds
    assert pf.phases_completed <= 4000 // ((pf.cfg.score_max - 1) * n_cand)


def test_stride_two_learns_offset_two():
    pf = BestOffsetPrefetcher(BopConfig())
    feed(pf, range(0, 8000, 2))
    assert pf.phases_completed >= 1
    assert pf.best_offset == 2
    assert pf.enabled


def test_stride_four_learns_offset_four():
    pf = BestOffsetPrefetcher(BopConfig())
    feed(pf, range(0, 16000, 4))
    assert pf.best_offset == 4 and pf.enabled


def test_huge_stride_disables_after_a_phase():
    pf = BestOffsetPrefetcher(BopConfig())
    n_cand = len(pf.cfg.offset_candidates)
    # offsets above 256 are not candidates: every score stays zero and the
    # phase ends only at round_max
    lines = [i * 300 for i in range(pf.cfg.round_max * n_cand + 10)]
    feed(pf, lines)
    assert pf.phases_completed == 1
    assert not pf.enabled
    assert pf.best_offset == 1          # previous best is kept
    assert pf.on_access(10 ** 6, True, 10 ** 9) is None


def test_rr_insertion_waits_for_fill_completion():
    """A fill that has not completed yet must not train the very next access."""
    cfg = BopConfig()
    pf = BestOffsetPrefetcher(cfg)
    # access line 0, whose fill completes far in the future
    pf.on_access(0, True, 0)
    pf.record_fill(10 ** 9, 0)
    # drive the cursor all the way around to candidate 1 again
    for i in range(1, len(cfg.offset_candidates)):
        pf.on_access(10000 + i, True, 10)
    assert pf.state.scores[0] == 0
    pf.on_access(1, True, 20)           # line-1=0 not yet in RR: no score
    assert pf.state.scores[0] == 0


def test_rr_insertion_after_completion_trains():
    cfg = BopConfig()
    pf = BestOffsetPrefetcher(cfg)
    pf.on_access(0, True, 0)
    pf.record_fill(50, 0)
    for i in range(1, len(cfg.offset_candidates)):
        pf.on_access(10000 + i, True, 60)
    pf.on_access(1, True, 100)          # fill done: line-1=0 is in RR
    assert pf.state.scores[0] == 1


def test_phase_end_tie_breaks_to_smallest_offset():
    cfg = BopConfig(round_max=3)
    pf = BestOffsetPrefetcher(cfg)
    # no candidate ever scores; all-zero keeps previous best but disables
    feed(pf, [i * 1000 for i in range(3 * len(cfg.offset_candidates) + 1)])
    assert not pf.enabled
    # now hand-craft a tie: bump two scores equally and end the phase
    pf.state.scores[cfg.offset_candidates.index(8)] = 5
    pf.state.scores[cfg.offset_candidates.index(2)] = 5
    pf.phase_end()
    assert pf.best_offset == 2


def test_prefetch_target_is_line_plus_best_offset():
    pf = BestOffsetPrefetcher(BopConfig())
    feed(pf, range(0, 6000, 2))
    assert pf.best_offset == 2
    assert pf.on_access(777, True, 10 ** 9) == 779


def test_config_validation():
    with pytest.raises(ValidationError):
        BopConfig(rr_entries=100).validate()      # not a power of two
    with pytest.raises(ValidationError):
        BopConfig(bad_score=31, score_max=31).validate()
    with pytest.raises(ValidationError):
        BopConfig(offset_candidates=[]).validate()


def test_score_is_capped_at_score_max():
    pf = BestOffsetPrefetcher(BopConfig())
    feed(pf, range(4000))
    assert max(pf.state.scores) <= pf.cfg.score_max
