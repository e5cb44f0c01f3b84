# %% [markdown]
# # CRDSA with 3x3 APs: where the optimum collapses to four devices per AP
#
# Longer frames postpone the collapse.  Expect the switch near p_a = 0.44
# for L = 5 and near 0.9 for L = 10 (run with more frames for tighter numbers).

# %%
from owcsim import CRDSA, Scenario, optimize_fov

pa_grid = [round(0.04 * i, 2) for i in range(1, 26)]
for L in (5, 10):
    lookup, _ = optimize_fov(Scenario(rx_per_side=3), pa_grid, list(range(20, 90)), CRDSA,
                             n_slots=L, n_frames=1000, seed=1)
    band = [p for p, f in zip(lookup.pa, lookup.fov_opt) if 25.3 <= f <= 46.5]
    print(f"L={L}: first p_a in the 4-device band: {band[0] if band else None}")
    for row in lookup.rows():
        print("  ", row)
