"""What can be said about P(z, a, X) when only P(z, a, Y_S) is observed?

The sensor channel turns the question into an under-determined linear system
over a sub-probability vector.  This script walks through the three regimes:
an invertible sensor (unique answer), a blind sensor (a whole segment of
answers), and a partially informative sensor (a polytope in between).
"""

import numpy as np

from sensorshift import (
    IdentificationSystem,
    LinearConstraint,
    enumerate_solution_vertices,
    polytope_contains,
    select_point_lp,
)

print("1. Invertible sensor: Y_S pins X down completely")
system = IdentificationSystem(np.eye(2), np.array([0.3, 0.2]))
poly = enumerate_solution_vertices(system)
print(f"   vertices: {poly.vertices.tolist()}  (a single point)")

print("\n2. Blind sensor: Y_S is constant, only total mass is known")
system = IdentificationSystem(np.array([[1.0, 1.0]]), np.array([0.4]))
segment = enumerate_solution_vertices(system)
print(f"   vertices: {segment.vertices.tolist()}")
print("   every split of the 0.4 mass between the two states is feasible:")
for t in (0.0, 0.1, 0.25, 0.4):
    inside = polytope_contains(segment, [t, 0.4 - t], 1e-9)
    print(f"   ({t:.2f}, {0.4 - t:.2f}) in solution set: {inside}")

print("\n3. Partially informative sensor (2 observations, 3 states)")
system = IdentificationSystem(
    np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]]), np.array([0.5, 0.5])
)
poly = enumerate_solution_vertices(system)
print(f"   vertices:\n{poly.vertices}")
print(f"   max residual over vertices: {poly.residual_max:.2e}")

print("\n4. Picking one point from the feasible set by linear programming")
point = select_point_lp(segment, objective=[-1.0, 0.0],
                        extra=[LinearConstraint([1.0, 0.0], "<=", 0.1)])
print(f"   maximize first coordinate subject to it being <= 0.1: {np.round(point, 6)}")
