"""Pure-Python fallback for the numeric kernels in ``_ckernels.pyx``."""

import math
from bisect import bisect_left


def bla(times, now, d, floor_ms=0.0):
    total = 0.0
    n = 0
    for t in times:
        age = now - t
        if floor_ms > 0.0:
            if age < floor_ms:
                age = floor_ms
        elif age <= 0.0:
            raise ValueError("access at or after evaluation time")
        total += (age / 1000.0) ** -d
        n += 1
    if n == 0:
        return -math.inf
    return math.log(total)


def bla_batch(histories, now, d, floor_ms=0.0):
    return [bla(h, now, d, floor_ms) for h in histories]


def episode_scores(episode_times, intervals):
    n = len(episode_times)
    diff = [0] * (n + 1)
    for s, e in intervals:
        if e <= s:
            continue
        lo = bisect_left(episode_times, s)
        hi = bisect_left(episode_times, e)
        if lo < hi:
            diff[lo] += 1
            diff[hi] -= 1
    out = []
    acc = 0
    for i in range(n):
        acc += diff[i]
        out.append(acc)
    return out


def softmax_weights(values, temperature):
    if not values:
        return []
    m = max(values)
    ws = [math.exp((v - m) / temperature) for v in values]
    z = sum(ws)
    return [w / z for w in ws]
