"""Imitation under sensor-shift: the three proxy policies and their bounds.

Case 1: imitator and demonstrator share sensors -> average the observed
action conditional through the channel.  Case 2: spectator and demonstrator
share sensors -> geometric pooling through a back-channel.  Case 3: all
sensors differ -> average to p~(A | X), then pool through the posterior.
"""

import numpy as np

from sensorshift import (
    behavior_kl,
    bound_case1,
    bound_case2,
    condition,
    marginalize,
    policy_divergence,
    proxy_case1,
    proxy_case2,
    proxy_case3,
    random_case1_world,
)

rng = np.random.default_rng(7)
world, pi_d, joint = random_case1_world(rng)

print("matched sensors: transferring the demonstrator policy is lossless")
print(f"   behavior KL with pi_T := pi_D: {behavior_kl(world, pi_d, pi_d, world.p_x):.2e}")

p_a_ys = condition(marginalize(joint, {"a", "y_s"}), {"y_s"})
channel = condition(marginalize(joint, {"y_s", "y_d"}), {"y_d"})
proxy1 = proxy_case1(p_a_ys, channel)

kl, mi, ent = bound_case1(joint)
print("\ncase-1 proxy and its bound chain:")
print(f"   D(pi_D || proxy) = {kl:.6f} <= I_S(A; Y_D | Y_S) = {mi:.6f} <= H(Y_D | Y_S) = {ent:.6f}")

lhs = behavior_kl(world, proxy1, pi_d, world.p_x)
rhs = policy_divergence(proxy1, pi_d, marginalize(joint, {"y_d"}))
print(f"   induced-behavior KL = {lhs:.6f} <= D(proxy || pi_D) = {rhs:.6f}")

print("\ncase-2 proxy (geometric pooling):")
back = condition(marginalize(joint, {"y_s", "y_d"}), {"y_d"})  # reuse as P(Y_S | Y_T)
p_yt = marginalize(joint, {"y_d"})
proxy2 = proxy_case2(p_a_ys, back)
print(f"   policy columns:\n{np.round(proxy2.matrix, 4)}")
print(f"   stated upper bound value: {bound_case2(p_a_ys, back, p_yt):.6f}")

print("\ncase-3 proxy (all sensors differ):")
sensor_s = world.sensor_s
posterior = condition(marginalize(joint, {"x", "y_d"}), {"y_d"})  # P(X | Y_T) with Y_T = Y_D
proxy3 = proxy_case3(p_a_ys, sensor_s, posterior)
print(f"   policy columns:\n{np.round(proxy3.matrix, 4)}")
print("\ntrue demonstrator policy for comparison:")
print(np.round(pi_d.matrix, 4))
