# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte-Carlo kernel; mirrors _mckernel_py operation for operation.

Same splitmix64 streams, same uniform mapping, same activity scan order:
a (seed, trial) pair produces bit-identical trajectories in both kernels.
"""

from libc.math cimport log

COMPILED = True

cdef unsigned long long _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef unsigned long long _MIX1 = 0xBF58476D1CE4E5B9ULL
cdef unsigned long long _MIX2 = 0x94D049BB133111EBULL
cdef unsigned long long _STREAM_MUL = 0xA24BAED4963EE407ULL
cdef unsigned long long _STREAM_ADD = 0x9FB21C651E98DF25ULL

DEF OP_CONST = 0
DEF OP_MARK = 1
DEF OP_EQ = 2
DEF OP_NE = 3
DEF OP_LT = 4
DEF OP_LE = 5
DEF OP_GT = 6
DEF OP_GE = 7
DEF OP_AND = 8
DEF OP_OR = 9
DEF OP_NOT = 10


cdef inline unsigned long long _mix64(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * _MIX1
    z = (z ^ (z >> 27)) * _MIX2
    return z ^ (z >> 31)


cdef inline unsigned long long _trial_seed(unsigned long long seed,
                                           unsigned long long trial) nogil:
    return _mix64(seed ^ (trial * _STREAM_MUL + _STREAM_ADD))


cdef int _eval(int[:] code, int off, int length, int[:] marking,
               int[:] stack) nogil:
    cdef int i = off
    cdef int end = off + length
    cdef int sp = 0
    cdef int op, arg, a, b
    while i < end:
        op = code[i]
        arg = code[i + 1]
        if op == OP_CONST:
            stack[sp] = arg
            sp += 1
        elif op == OP_MARK:
            stack[sp] = marking[arg]
            sp += 1
        elif op == OP_NOT:
            stack[sp - 1] = 0 if stack[sp - 1] else 1
        else:
            sp -= 1
            b = stack[sp]
            a = stack[sp - 1]
            if op == OP_EQ:
                stack[sp - 1] = 1 if a == b else 0
            elif op == OP_NE:
                stack[sp - 1] = 1 if a != b else 0
            elif op == OP_LT:
                stack[sp - 1] = 1 if a < b else 0
            elif op == OP_LE:
                stack[sp - 1] = 1 if a <= b else 0
            elif op == OP_GT:
                stack[sp - 1] = 1 if a > b else 0
            elif op == OP_GE:
                stack[sp - 1] = 1 if a >= b else 0
            elif op == OP_AND:
                stack[sp - 1] = 1 if (a != 0 and b != 0) else 0
            elif op == OP_OR:
                stack[sp - 1] = 1 if (a != 0 or b != 0) else 0
        i += 2
    return stack[sp - 1]


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
    double mission_time,
    long long trials,
    unsigned long long seed,
    long long trial0,
):
    from array import array

    cdef int[:] init_mv = array("i", init_marking)
    cdef double[:] rate_mv = array("d", timed_rate)
    cdef int[:] tin_off = array("i", timed_in_off)
    cdef int[:] tin_len = array("i", timed_in_len)
    cdef int[:] tout_off = array("i", timed_out_off)
    cdef int[:] tout_len = array("i", timed_out_len)
    cdef int[:] ten_off = array("i", timed_en_off)
    cdef int[:] ten_len = array("i", timed_en_len)
    cdef int[:] places = array("i", flat_places) if len(flat_places) else array("i", [0])
    cdef int[:] iin_off = array("i", inst_in_off) if len(inst_in_off) else array("i", [0])
    cdef int[:] iin_len = array("i", inst_in_len) if len(inst_in_len) else array("i", [0])
    cdef int[:] ien_off = array("i", inst_en_off) if len(inst_en_off) else array("i", [0])
    cdef int[:] ien_len = array("i", inst_en_len) if len(inst_en_len) else array("i", [0])
    cdef int[:] coff = array("i", case_off) if len(case_off) else array("i", [0])
    cdef int[:] clen = array("i", case_len) if len(case_len) else array("i", [0])
    cdef double[:] cprob = array("d", case_prob) if len(case_prob) else array("d", [0.0])
    cdef int[:] cout_off = array("i", case_out_off) if len(case_out_off) else array("i", [0])
    cdef int[:] cout_len = array("i", case_out_len) if len(case_out_len) else array("i", [0])
    cdef int[:] roff = array("i", reward_off) if len(reward_off) else array("i", [0])
    cdef int[:] rlen = array("i", reward_len) if len(reward_len) else array("i", [0])
    cdef int[:] code = array("i", bytecode) if len(bytecode) else array("i", [0])

    cdef int n_places = len(init_marking)
    cdef int n_timed = len(timed_rate)
    cdef int n_inst = len(inst_in_off)
    cdef int n_rewards = len(reward_off)

    cdef long long[:] counts = array("q", [0] * (n_rewards if n_rewards else 1))
    cdef int[:] marking = array("i", [0] * n_places)
    # worst-case stack depth: one slot per bytecode pair
    cdef int max_code = max(len(bytecode) // 2, 1)
    cdef int[:] stack = array("i", [0] * max_code)

    cdef double u_scale = 1.0 / 9007199254740992.0
    cdef unsigned long long state, z
    cdef long long t, trial
    cdef int a, j, r, best, chosen, c, ok, fired
    cdef double now, u, acc, delay, best_delay
    cdef long long livelock = -1
    cdef set seen

    for t in range(trials):
        trial = trial0 + t
        state = _trial_seed(seed, <unsigned long long> trial)
        for j in range(n_places):
            marking[j] = init_mv[j]
        now = 0.0

        # initial instantaneous closure
        if n_inst:
            seen = set()
            while True:
                fired = 0
                for a in range(n_inst):
                    ok = 1
                    for j in range(iin_len[a]):
                        if marking[places[iin_off[a] + j]] < 1:
                            ok = 0
                            break
                    if ok and ien_len[a] != 0:
                        if _eval(code, ien_off[a], ien_len[a], marking, stack) == 0:
                            ok = 0
                    if not ok:
                        continue
                    key = tuple([marking[j] for j in range(n_places)])
                    if key in seen:
                        return [counts[r] for r in range(n_rewards)], trial
                    seen.add(key)
                    for j in range(iin_len[a]):
                        marking[places[iin_off[a] + j]] -= 1
                    state = state + _GOLDEN
                    z = _mix64(state)
                    u = ((z >> 11) + 1) * u_scale
                    acc = 0.0
                    chosen = coff[a] + clen[a] - 1
                    for c in range(coff[a], coff[a] + clen[a]):
                        acc += cprob[c]
                        if u <= acc:
                            chosen = c
                            break
                    for j in range(cout_len[chosen]):
                        marking[places[cout_off[chosen] + j]] += 1
                    fired = 1
                    break
                if not fired:
                    break

        while True:
            best = -1
            best_delay = 0.0
            for a in range(n_timed):
                ok = 1
                for j in range(tin_len[a]):
                    if marking[places[tin_off[a] + j]] < 1:
                        ok = 0
                        break
                if ok and ten_len[a] != 0:
                    if _eval(code, ten_off[a], ten_len[a], marking, stack) == 0:
                        ok = 0
                if not ok:
                    continue
                state = state + _GOLDEN
                z = _mix64(state)
                u = ((z >> 11) + 1) * u_scale
                delay = -log(u) / rate_mv[a]
                if best < 0 or delay < best_delay:
                    best = a
                    best_delay = delay
            if best < 0:
                break
            if now + best_delay > mission_time:
                break
            now += best_delay
            for j in range(tin_len[best]):
                marking[places[tin_off[best] + j]] -= 1
            for j in range(tout_len[best]):
                marking[places[tout_off[best] + j]] += 1
            if n_inst:
                seen = set()
                while True:
                    fired = 0
                    for a in range(n_inst):
                        ok = 1
                        for j in range(iin_len[a]):
                            if marking[places[iin_off[a] + j]] < 1:
                                ok = 0
                                break
                        if ok and ien_len[a] != 0:
                            if _eval(code, ien_off[a], ien_len[a], marking, stack) == 0:
                                ok = 0
                        if not ok:
                            continue
                        key = tuple([marking[j] for j in range(n_places)])
                        if key in seen:
                            return [counts[r] for r in range(n_rewards)], trial
                        seen.add(key)
                        for j in range(iin_len[a]):
                            marking[places[iin_off[a] + j]] -= 1
                        state = state + _GOLDEN
                        z = _mix64(state)
                        u = ((z >> 11) + 1) * u_scale
                        acc = 0.0
                        chosen = coff[a] + clen[a] - 1
                        for c in range(coff[a], coff[a] + clen[a]):
                            acc += cprob[c]
                            if u <= acc:
                                chosen = c
                                break
                        for j in range(cout_len[chosen]):
                            marking[places[cout_off[chosen] + j]] += 1
                        fired = 1
                        break
                    if not fired:
                        break

        for r in range(n_rewards):
            if _eval(code, roff[r], rlen[r], marking, stack) != 0:
                counts[r] += 1

    return [counts[r] for r in range(n_rewards)], livelock
