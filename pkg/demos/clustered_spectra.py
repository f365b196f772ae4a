"""Matvec counts on spectra clustered at lambda_min.

lambda_j = lambda_min + (j-1)/(N-1) (lambda_max - lambda_min) gamma^(N-j).
Smaller gamma packs more eigenvalues near lambda_min, and every method
profits, while the two-pass/multi-shift ratio stays close to 2.
"""

from stieltjes_krylov.experiments import ExperimentConfig, run_gamma_sweep

table = run_gamma_sweep(ExperimentConfig(experiment="gamma_sweep", methods=("two_pass", "mscg", "restarted")))
print(f"{'gamma':>6s} {'two_pass':>9s} {'mscg':>6s} {'restarted':>9s}")
for g in sorted({r["gamma"] for r in table.rows}, reverse=True):
    row = {r["method"]: r["measured_matvecs"] for r in table.rows if r["gamma"] == g}
    print(f"{g:6.2f} {row['two_pass']:9d} {row['mscg']:6d} {row['restarted']:9d}")
