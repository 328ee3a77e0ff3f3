"""From a dependency parse to the adjacency matrix the graph layers consume.

Run: python3 demos/01_parse_to_adjacency.py
"""
import numpy as np

from hmgnn.graph import build_adjacency, linear_chain_fallback, normalize_rows, parse_tree_from_heads

tokens = ["the", "food", "was", "great", "but", "service", "slow"]
# "was" is the root; every other token points at its head
heads = [1, 2, -1, 2, 2, 6, 2]
tree = parse_tree_from_heads(heads)
adj = build_adjacency(tree)

print("root:", tokens[tree.root])
print("adjacency (symmetric, self-loops):")
print("       " + " ".join(f"{t[:5]:>5}" for t in tokens))
for tok, row in zip(tokens, adj):
    print(f"{tok[:6]:>6} " + " ".join(f"{int(v):>5}" for v in row))

# A tree on n nodes has n - 1 arcs, each counted twice, plus n self-loops.
n = len(tokens)
assert adj.sum() == 2 * (n - 1) + n and np.array_equal(adj, adj.T)

print("\nrow-normalised (each row sums to 1):")
print(np.round(normalize_rows(adj), 3))

print("\nno parse available -> linear chain:")
print(linear_chain_fallback(4).astype(int))
