# %% [markdown]
# # Spatio-temporal peeling on hand-made graphs
#
# A slot node is (AP, slot).  A device decoded anywhere is cancelled from
# every slot node it touched, across APs and slots alike.

# %%
import numpy as np

from owcsim import (CRDSA, CsaGraph, Scenario, build_graph, coverage_sets, generate_frame,
                    measure_degree_distributions, peel_decode, reference_decode)

# Device 0 is alone in slot 1; it collides with device 1 in slot 0.
chain = CsaGraph.from_edges([0, 1], n_aps=1, n_slots=2, edges=[(0, 0, 0), (1, 0, 0), (0, 0, 1)])
print(peel_decode(chain))

# Two devices heard by the same two APs in the same single slot: a stopping set.
stuck = CsaGraph.from_edges([0, 1], 2, 1, [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0)])
print(peel_decode(stuck))

# %% A real frame in the hall: 3x3 APs, CRDSA with 10 slots
rng = np.random.default_rng(1)
cov = coverage_sets(Scenario(rx_per_side=3, fov=60))
frame = generate_frame(676, 0.2, CRDSA, 10, rng)
graph = build_graph(frame, cov)
lam, p = measure_degree_distributions(graph)
res = peel_decode(graph)
print(f"{frame.active.size} active, {graph.n_edges} edges, decoded {len(res.decoded)} "
      f"in {res.iterations} iterations {res.per_iteration}")
print("device degrees:", lam)
assert res.decoded == reference_decode(graph).decoded
