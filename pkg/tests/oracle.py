"""Naive reference implementation of projection and fusion, used only by tests.

Pure-Python loops with the math module; no numpy, no shared helpers with
the library.
"""
import math


def srp_value(components, d):
    total = 0.0
    for w, mu, s in components:
        total += 0.5 * w * (math.exp(-((d - mu) ** 2) / (2 * s * s)) + math.exp(-((d + mu) ** 2) / (2 * s * s)))
    return max(total, 0.0)


def wrap180(d):
    while d > 180.0:
        d -= 360.0
    while d <= -180.0:
        d += 360.0
    return d


def density(pose_xy, headings, powers, components, origin, res, width, height, weighted=True):
    px, py = pose_xy
    if not weighted:
        best = max(range(len(powers)), key=lambda k: (powers[k], -k))
        headings, powers = [headings[best]], [1.0 if powers[best] > 0 else 0.0]
    out = [[0.0] * width for _ in range(height)]
    for j in range(height):
        for i in range(width):
            x = origin[0] + (i + 0.5) * res
            y = origin[1] + (j + 0.5) * res
            if x == px and y == py:
                continue
            bearing = math.degrees(math.atan2(x - px, y - py)) % 360.0
            acc = 0.0
            for h, p in zip(headings, powers):
                acc += p * srp_value(components, wrap180(h - bearing))
            out[j][i] = acc
    return out


def fused(scans, components, origin, res, width, height, weighted=True):
    maps = [density(s[0], s[1], s[2], components, origin, res, width, height, weighted) for s in scans]
    return [[sum(m[j][i] for m in maps) / len(maps) for i in range(width)] for j in range(height)]


def thresholded(values, alpha):
    peak = max(max(row) for row in values)
    return [[v if v >= alpha * peak else 0.0 for v in row] for row in values]
