"""Graph attention and graph convolution on a toy sentence graph.

Attention weights are a softmax over each node's neighbourhood, so every row
sums to one and non-neighbours get exactly zero weight.

Run: python3 demos/02_graph_layers.py
"""
import numpy as np

from hmgnn.graph import build_adjacency, parse_tree_from_heads
from hmgnn.layers import GraphAttention, GraphConvolution

rng = np.random.default_rng(0)
adj = build_adjacency(parse_tree_from_heads([1, -1, 1, 2]))
h = rng.normal(size=(4, 6))

gat = GraphAttention(slope=0.2)
out = gat.forward(h, adj, rng.normal(size=(6, 6)) * 0.4, rng.normal(size=12))
print("attention weights:")
print(np.round(gat.attention, 3))
print("row sums:", gat.attention.sum(axis=1))
print("weight outside the neighbourhood:", np.abs(gat.attention[adj == 0]).max())

gcn = GraphConvolution()
W, b = rng.normal(size=(6, 6)) * 0.4, np.zeros(6)
print("\nGCN output shape:", gcn.forward(out, adj, W, b).shape)

# With identity weights each node simply sums itself and its neighbours.
chain = build_adjacency(parse_tree_from_heads([-1, 0, 1]))
x = np.array([[1.0], [2.0], [3.0]])
print("chain 1-2-3 aggregated:", gcn.forward(x, chain, np.eye(1), np.zeros(1)).ravel())
