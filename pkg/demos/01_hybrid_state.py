"""Build the path-polarization entangled state element by element.

Photon A's polarization is converted to path by a PBS; the in-line
controllers then make the two arms' polarizations identical so only the
path is left entangled with photon B's polarization.
"""
import numpy as np

from hybrid_bell import optics
from hybrid_bell.apparatus import correlation_grid, prepare_hybrid_state, probability_grid, source_state
from hybrid_bell.qcore import DensityOperator, apply, schmidt_coefficients

np.set_printoptions(precision=4, suppress=True)

src = source_state()
print("source (A_pol, B_pol):", src)

after_pbs = apply(optics.pbs(), src)
print("after PBS:", after_pbs)
print("Schmidt coefficients A_path | rest:", schmidt_coefficients(after_pbs, ["A_path"]))

hybrid = prepare_hybrid_state(theta_deg=30.0, gamma_deg=70.0)
rho = DensityOperator.from_state(hybrid)
print("\nafter both in-line controllers (theta=30, gamma=70):")
print("  photon-A polarization purity:", round(rho.partial_trace(["A_pol"]).purity(), 12))
print("  Schmidt coefficients A_path | B_pol:", schmidt_coefficients(hybrid, ["A_path"]))
print("  B_pol reduced state:\n", rho.partial_trace(["B_pol"]).matrix.real)

# analyzer: fiber arm, QWP2 at -45 deg, Pol2 at phi projects onto |beta = -2 phi>
print("\nanalyzer settings used for the Bell test")
for phi in (-22.5, 22.5, 67.5, 112.5):
    proj, beta = optics.analyzer_chain(phi)
    b = optics.beta_ket(beta)
    err = np.abs(proj.matrix - np.outer(b, b.conj())).max()
    print(f"  Pol2 {phi:+6.1f} deg -> beta {beta:+6.1f} deg  (projector error {err:.1e})")

# coincidence fringe on Det1&Det3 as the PBS is scanned
alphas = np.arange(0, 361, 45.0)
g = probability_grid(alphas, [-22.5])
print("\n alpha   P(1&3)   P(2&3)   P(1)")
for a, p13, p23, p1 in zip(alphas, g["det1_det3"][:, 0], g["det2_det3"][:, 0], g["det1"][:, 0]):
    print(f"{a:6.0f}  {p13:7.4f}  {p23:7.4f}  {p1:6.3f}")

alpha = np.array([0.0, 90.0])
beta = np.array([-45.0, 45.0])
e = correlation_grid(alpha, beta)
print("\nE(alpha_i, beta_j):\n", e)
print("S =", -e[0, 0] + e[0, 1] + e[1, 0] + e[1, 1], " 2*sqrt(2) =", 2 * np.sqrt(2))
