"""Independent reference computations used to derive expected test values."""

import math

import numpy as np


def wrap_loop(a: float) -> float:
    """Wrap into (-pi, pi] by repeated shifting; no modular arithmetic."""
    while a > math.pi:
        a -= 2 * math.pi
    while a <= -math.pi:
        a += 2 * math.pi
    return a


def kalman_predict(x, P, A, Q):
    return A @ x, A @ P @ A.T + Q


def kalman_update(x, P, z, H, R):
    S = H @ P @ H.T + R
    K = P @ H.T @ np.linalg.inv(S)
    I = np.eye(len(x))
    # Joseph form, algebraically equal to (I - KH) P for the optimal gain
    return x + K @ (z - H @ x), (I - K @ H) @ P @ (I - K @ H).T + K @ R @ K.T


def laplacian_loops(adj) -> np.ndarray:
    n = len(adj)
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and adj[i][j]:
                L[i, j] = -1.0
                L[i, i] += 1.0
    return L


def msle_loops(truth, est) -> float:
    n = len(truth)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                dt = math.dist(truth[i][:2], truth[j][:2])
                de = math.dist(est[i][:2], est[j][:2])
                total += (dt - de) ** 2
    return total / n


def connected_components(adj) -> int:
    n = len(adj)
    seen = set()
    count = 0
    for s in range(n):
        if s in seen:
            continue
        count += 1
        stack = [s]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(u for u in range(n) if adj[v][u] and u not in seen)
    return count
