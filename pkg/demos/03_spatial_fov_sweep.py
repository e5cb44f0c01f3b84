# %% [markdown]
# # Best FOV vs. activation probability, single-slot frames
#
# Reduced-frame version of the spatial-decoding study: for each p_a the FOV
# that maximises R_avg, with the resulting R_avg and p_rec.  From moderate
# load on, the optimum falls into the band where each AP hears only its four
# nearest devices.

# %%
from owcsim import SLOTTED_ALOHA, Scenario, optimize_fov

pa_grid = [0.005, 0.01, 0.02, 0.05, 0.1, 0.14, 0.2, 0.4, 0.8]
fovs = list(range(20, 90))
for rx in (1, 3, 5):
    lookup, _ = optimize_fov(Scenario(rx_per_side=rx), pa_grid, fovs, SLOTTED_ALOHA,
                             n_slots=1, n_frames=3000, seed=1)
    print(f"--- {rx}x{rx} APs")
    print(lookup.to_csv())
