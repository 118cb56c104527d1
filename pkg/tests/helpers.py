"""Shared test utilities: finite differences and tiny oracles."""

import numpy as np


def central_difference(fn, arrays, eps=1e-5):
    """Central finite-difference gradients of a scalar function of a list of
    arrays; returns gradient arrays of matching shapes."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = fn()
            flat[i] = keep - eps
            lo = fn()
            flat[i] = keep
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def relative_error(approx, exact):
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    scale = max(np.abs(exact).max(), np.abs(approx).max(), 1e-12)
    return np.abs(approx - exact).max() / scale


def stacked_relative_error(grad_lists, fd_lists):
    """Relative error over the full concatenated gradient vector. Avoids
    blowing up on parameters whose true gradient is identically zero."""
    g = np.concatenate([np.ravel(a) for a in grad_lists])
    f = np.concatenate([np.ravel(a) for a in fd_lists])
    return relative_error(g, f)
