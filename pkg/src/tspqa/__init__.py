"""TSP encodings for quantum annealing: QUBO mappings, subtour penalties,
exact oracles, annealing solvers and a digital statevector annealer."""

__version__ = "0.1.0"
