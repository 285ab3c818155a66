"""Scalar-loop reference implementations used as independent oracles.

Plain Python arithmetic over nested sequences; no vectorized library calls.
"""
import math


def w_reg_oracle(seq, w_s):
    total = 0.0
    for code in seq:
        for r in range(len(code)):
            for c in range(len(code[r])):
                total += (code[r][c] - w_s[r][c]) ** 2
    return total


def path_reg_oracle(seq):
    total = 0.0
    for i in range(len(seq) - 2):
        for r in range(len(seq[i])):
            for c in range(len(seq[i][r])):
                d1 = seq[i + 2][r][c] - seq[i + 1][r][c]
                d0 = seq[i + 1][r][c] - seq[i][r][c]
                total += (d1 - d0) ** 2
    return total


def _unit(row):
    n = math.sqrt(sum(x * x for x in row))
    return [x / n for x in row]


def contrastive_oracle(v, t, tau, normalize=False):
    if normalize:
        v, t = [_unit(r) for r in v], [_unit(r) for r in t]
    n = len(v)
    total = 0.0
    for i in range(n):
        logits = [sum(a * b for a, b in zip(v[i], t[j])) / tau for j in range(n)]
        m = max(logits)
        lse = m + math.log(sum(math.exp(x - m) for x in logits))
        total -= logits[i] - lse
    return total


def acd_oracle(f):
    N, T = len(f), len(f[0])
    total = 0.0
    for n in range(N):
        for i in range(T - 1):
            for j in range(i + 1, T):
                total += math.sqrt(sum((f[n][j][k] - f[n][i][k]) ** 2 for k in range(len(f[n][i]))))
    return 2 * total / (N * T * (T - 1))
