"""Run all five methods on the N=1000 Chebyshev problem for z^{-1/2}.

Prints predicted and measured matvec counts side by side, once with oracle
stopping (true error against the diagonal solution) and once with each
method's own practical stopping rule.
"""

import numpy as np

from stieltjes_krylov import SpectralBounds, inv_sqrt, make_diagonal_chebyshev, predict_total_matvecs
from stieltjes_krylov.experiments import run_method

bounds = SpectralBounds(0.1, 200.1)
op = make_diagonal_chebyshev(1000, bounds)
f = inv_sqrt()
b = np.ones(1000) / np.sqrt(1000)
ref = op.exact_function_apply(f, b)
nf = np.linalg.norm(ref)

print(f"||f(A)b|| = {nf:.6f}, kappa = {bounds.kappa:g}")
print(f"{'method':10s} {'predicted':>9s} {'oracle':>7s} {'practical':>9s} {'prac. err':>9s}")
for method in ("two_pass", "mscg", "restarted", "si", "eksm"):
    pred = predict_total_matvecs(method, bounds, f, nf, 1e-6, {"p": 15}).total_matvecs
    counts = []
    for stopping in ("oracle", "practical"):
        op.reset_count()
        x, rep = run_method(method, op, f, b, 1e-6, bounds, ref, p=15, stopping=stopping)
        counts.append(rep.matvecs)
    err = np.linalg.norm(x - ref) / nf
    print(f"{method:10s} {pred:9d} {counts[0]:7d} {counts[1]:9d} {err:9.2e}")
