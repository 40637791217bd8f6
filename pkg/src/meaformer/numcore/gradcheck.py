"""Finite-difference gradient checking.

Always run in float64: central differences with h=1e-3 are unreliable in
float32.  The reported figure is

    max over checked entries of |analytic - numeric| / max(1, |numeric|).
"""

import numpy as np

from .tensor import no_grad


def grad_check(f, params, h=1e-3, samples_per_param=None, rng=None,
               kink_tol=0.03, return_coverage=False):
    """Compare autodiff gradients of the scalar ``f()`` against central differences.

    ``f`` must rebuild its forward pass on every call (it is re-evaluated at
    perturbed parameter values).  ``samples_per_param`` bounds how many entries
    of each parameter are probed (None = all of them).

    Central differences are only meaningful where f is smooth across
    [theta-h, theta+h].  With ``kink_tol`` set, each probe is screened two
    ways: the one-sided slopes must agree, and the central estimates at h and
    h/2 must agree (a kink inside the window contributes an O(1/h) term that
    cannot match across scales).  Probes that fail the screen straddle a kink
    (ReLU, max, bilinear cell edge) and are excluded.  ``return_coverage``
    also reports the kept fraction.
    """
    for p in params:
        if p.data.dtype != np.float64:
            raise ValueError("grad_check requires float64 parameters")
        p.zero_grad()
    loss = f()
    loss.backward()
    f0 = float(loss.data)
    analytic = [None if p.grad is None else p.grad.copy() for p in params]
    rng = rng or np.random.default_rng(0)

    max_rel = 0.0
    kept = 0
    skipped = 0
    for p, g in zip(params, analytic):
        ga = np.zeros_like(p.data) if g is None else g
        flat = p.data.reshape(-1)
        n = flat.size
        if samples_per_param is None or samples_per_param >= n:
            idxs = range(n)
        else:
            idxs = rng.choice(n, size=samples_per_param, replace=False)
        for i in idxs:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + h
                f_plus = float(f().data)
                flat[i] = orig - h
                f_minus = float(f().data)
                if kink_tol is not None:
                    flat[i] = orig + h / 2
                    f_plus_half = float(f().data)
                    flat[i] = orig - h / 2
                    f_minus_half = float(f().data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            if kink_tol is not None:
                d_plus = (f_plus - f0) / h
                d_minus = (f0 - f_minus) / h
                numeric_half = (f_plus_half - f_minus_half) / h
                scale = max(1.0, abs(numeric))
                if (abs(d_plus - d_minus) > kink_tol * scale
                        or abs(numeric - numeric_half) > kink_tol * scale):
                    skipped += 1
                    continue
                numeric = numeric_half
            kept += 1
            rel = abs(ga.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            if rel > max_rel:
                max_rel = rel
    if return_coverage:
        total = kept + skipped
        return max_rel, (kept / total if total else 0.0)
    return max_rel


def adjoint_probe(fn, x, rng=None, h=1e-5):
    """Check <J dx, g> == <dx, J^T g> for `fn` at x on one random probe.

    J dx is estimated with central differences, J^T g comes from autodiff.
    Returns the absolute discrepancy between the two inner products (inputs
    are unit-normalized so this is effectively a relative figure).
    """
    from .tensor import Tensor

    rng = rng or np.random.default_rng(0)
    xd = np.asarray(x, dtype=np.float64)
    dx = rng.standard_normal(xd.shape)
    dx /= np.linalg.norm(dx.reshape(-1)) or 1.0

    xt = Tensor(xd, requires_grad=True)
    y = fn(xt)
    g = rng.standard_normal(y.data.shape)
    g /= np.linalg.norm(g.reshape(-1)) or 1.0
    y.backward(g)
    lhs_T = float((xt.grad * dx).sum())

    with no_grad():
        yp = fn(Tensor(xd + h * dx)).data
        ym = fn(Tensor(xd - h * dx)).data
    jdx = (yp - ym) / (2.0 * h)
    lhs = float((jdx * g).sum())
    return abs(lhs - lhs_T)
