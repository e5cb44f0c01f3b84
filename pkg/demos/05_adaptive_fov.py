# %% [markdown]
# # Closed-loop FOV adaptation
#
# Build a lookup p_a -> FOV offline, then run frames whose true p_a steps
# from 0.05 to 0.5.  Each frame the system estimates p_a from the preamble
# and picks the FOV; compare the ground-truth estimator with the
# received-power moment estimator.

# %%
from owcsim import SLOTTED_ALOHA, Scenario, adaptive_run, optimize_fov
from owcsim.adapt import step_trajectory

scenario = Scenario(rx_per_side=3, fov=70.0)
lookup, _ = optimize_fov(scenario, [round(0.02 * i, 2) for i in range(1, 31)],
                         list(range(24, 90, 2)), SLOTTED_ALOHA, 1, 1000, seed=2)
traj = step_trajectory([(0.05, 3000), (0.5, 3000)])

for est in ("oracle", "power"):
    run = adaptive_run(scenario, traj, lookup, SLOTTED_ALOHA, 1, seed=3, estimator=est)
    fovs = [r.fov_deg for r in run.records]
    print(f"{est:6s}: R_avg={run.metrics.r_avg:.4f} p_rec={run.metrics.p_rec:.4f} "
          f"FOV before/after step: {fovs[2999]} / {fovs[3000]}")
