"""Straight-line reference implementation used as an independent oracle.

Everything here is written with plain nested loops and float64 scalars,
deliberately sharing no code with the package: density rendering, the
two fixation-pooling modes, mean-1 normalization, feature weighting,
per-channel spatial means, the linear head, and the softmax.
"""

import math

import numpy as np


def oracle_stamp(u, v, h, w, sigma, radius):
    out = np.zeros((h, w), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            dy = (r + 0.5) - v
            dx = (c + 0.5) - u
            dist = math.sqrt(dx * dx + dy * dy)
            if dist <= radius:
                out[r, c] = math.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    return out


def oracle_density(points, h, w, sigma, radius, pooling):
    acc = np.zeros((h, w), dtype=np.float64)
    for u, v in points:
        stamp = oracle_stamp(float(u), float(v), h, w, sigma, radius)
        for r in range(h):
            for c in range(w):
                if pooling == "max":
                    acc[r, c] = max(acc[r, c], stamp[r, c])
                else:
                    acc[r, c] += stamp[r, c]
    total = 0.0
    for r in range(h):
        for c in range(w):
            total += acc[r, c]
    scale = (h * w) / total
    for r in range(h):
        for c in range(w):
            acc[r, c] *= scale
    return acc


def oracle_weighted_gap(features, density):
    channels, h, w = features.shape
    pooled = np.zeros(channels, dtype=np.float64)
    for k in range(channels):
        acc = 0.0
        for r in range(h):
            for c in range(w):
                acc += float(features[k, r, c]) * float(density[r, c])
        pooled[k] = acc / (h * w)
    return pooled


def oracle_softmax(logits):
    m = max(float(z) for z in logits)
    exps = [math.exp(float(z) - m) for z in logits]
    total = sum(exps)
    return np.array([e / total for e in exps], dtype=np.float64)


def oracle_posterior(features, points, sigma, radius, pooling, weights, bias):
    """Fixations (grid coords) all the way to the per-image posterior."""
    channels, h, w = features.shape
    density = oracle_density(points, h, w, sigma, radius, pooling)
    pooled = oracle_weighted_gap(features, density)
    k = weights.shape[0]
    logits = np.zeros(k, dtype=np.float64)
    for i in range(k):
        acc = float(bias[i])
        for j in range(channels):
            acc += float(weights[i, j]) * pooled[j]
        logits[i] = acc
    return oracle_softmax(logits)
