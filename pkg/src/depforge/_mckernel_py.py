"""Pure-Python Monte-Carlo kernel; reference semantics for the compiled one.

The compiled extension (depforge._mckernel, built from _mckernel.pyx) mirrors
this module operation for operation, including the RNG, so both produce
bit-identical trial outcomes.  Keep the two in sync.

RNG: splitmix64.  Per-trial streams are seeded by hashing (seed, trial
index), so any partition of the trial range yields the same results as a
serial run.  Uniform doubles are ((z >> 11) + 1) / 2**53, in (0, 1].
"""

from __future__ import annotations

from math import log

COMPILED = False

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_STREAM_MUL = 0xA24BAED4963EE407
_STREAM_ADD = 0x9FB21C651E98DF25

# bytecode opcodes (arg in the second slot of each pair)
OP_CONST = 0
OP_MARK = 1
OP_EQ = 2
OP_NE = 3
OP_LT = 4
OP_LE = 5
OP_GT = 6
OP_GE = 7
OP_AND = 8
OP_OR = 9
OP_NOT = 10


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _trial_seed(seed: int, trial: int) -> int:
    return _mix64((seed ^ ((trial * _STREAM_MUL + _STREAM_ADD) & _MASK)) & _MASK)


def _eval(code, off: int, length: int, marking) -> int:
    stack = []
    end = off + length
    i = off
    while i < end:
        op = code[i]
        arg = code[i + 1]
        if op == OP_CONST:
            stack.append(arg)
        elif op == OP_MARK:
            stack.append(marking[arg])
        elif op == OP_NOT:
            stack[-1] = 0 if stack[-1] else 1
        else:
            b = stack.pop()
            a = stack[-1]
            if op == OP_EQ:
                stack[-1] = 1 if a == b else 0
            elif op == OP_NE:
                stack[-1] = 1 if a != b else 0
            elif op == OP_LT:
                stack[-1] = 1 if a < b else 0
            elif op == OP_LE:
                stack[-1] = 1 if a <= b else 0
            elif op == OP_GT:
                stack[-1] = 1 if a > b else 0
            elif op == OP_GE:
                stack[-1] = 1 if a >= b else 0
            elif op == OP_AND:
                stack[-1] = 1 if (a and b) else 0
            elif op == OP_OR:
                stack[-1] = 1 if (a or b) else 0
        i += 2
    return stack[-1]


def run_trials(
    init_marking,
    timed_rate,
    timed_in_off, timed_in_len,
    timed_out_off, timed_out_len,
    timed_en_off, timed_en_len,
    flat_places,
    inst_in_off, inst_in_len,
    inst_en_off, inst_en_len,
    case_off, case_len,
    case_prob,
    case_out_off, case_out_len,
    reward_off, reward_len,
    bytecode,
    mission_time: float,
    trials: int,
    seed: int,
    trial0: int,
):
    """Simulate ``trials`` trajectories, trial indices trial0..trial0+trials-1.

    Returns (counts per reward variable, livelock trial index or -1).
    ``flat_places`` holds all input/output/case-output place indices; the
    *_off/*_len arrays slice into it.
    """
    n_timed = len(timed_rate)
    n_inst = len(inst_in_off)
    n_rewards = len(reward_off)
    counts = [0] * n_rewards
    marking0 = list(init_marking)
    n_places = len(marking0)
    u_scale = 1.0 / 9007199254740992.0  # 2**-53

    for t in range(trials):
        trial = trial0 + t
        state = _trial_seed(seed, trial)
        marking = marking0[:]
        now = 0.0

        def next_uniform():
            nonlocal state
            state = (state + _GOLDEN) & _MASK
            z = _mix64(state)
            return ((z >> 11) + 1) * u_scale

        def enabled_pred(en_off, en_len):
            if en_len == 0:
                return True
            return _eval(bytecode, en_off, en_len, marking) != 0

        def instantaneous_closure():
            if n_inst == 0:
                return True
            seen = set()
            while True:
                fired = False
                for a in range(n_inst):
                    ok = True
                    base = inst_in_off[a]
                    for j in range(inst_in_len[a]):
                        if marking[flat_places[base + j]] < 1:
                            ok = False
                            break
                    if not ok or not enabled_pred(inst_en_off[a], inst_en_len[a]):
                        continue
                    key = tuple(marking)
                    if key in seen:
                        return False  # livelock within one time instant
                    seen.add(key)
                    for j in range(inst_in_len[a]):
                        marking[flat_places[base + j]] -= 1
                    u = next_uniform()
                    acc = 0.0
                    chosen = case_off[a] + case_len[a] - 1
                    for c in range(case_off[a], case_off[a] + case_len[a]):
                        acc += case_prob[c]
                        if u <= acc:
                            chosen = c
                            break
                    cbase = case_out_off[chosen]
                    for j in range(case_out_len[chosen]):
                        marking[flat_places[cbase + j]] += 1
                    fired = True
                    break
                if not fired:
                    return True

        if not instantaneous_closure():
            return counts, trial
        while True:
            best = -1
            best_delay = 0.0
            for a in range(n_timed):
                ok = True
                base = timed_in_off[a]
                for j in range(timed_in_len[a]):
                    if marking[flat_places[base + j]] < 1:
                        ok = False
                        break
                if not ok or not enabled_pred(timed_en_off[a], timed_en_len[a]):
                    continue
                u = next_uniform()
                delay = -log(u) / timed_rate[a]
                if best < 0 or delay < best_delay:
                    best = a
                    best_delay = delay
            if best < 0:
                break  # absorbing marking
            if now + best_delay > mission_time:
                break
            now += best_delay
            base = timed_in_off[best]
            for j in range(timed_in_len[best]):
                marking[flat_places[base + j]] -= 1
            base = timed_out_off[best]
            for j in range(timed_out_len[best]):
                marking[flat_places[base + j]] += 1
            if not instantaneous_closure():
                return counts, trial
        for r in range(n_rewards):
            if _eval(bytecode, reward_off[r], reward_len[r], marking) != 0:
                counts[r] += 1
    return counts, -1
