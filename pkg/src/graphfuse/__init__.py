"""graphfuse: a fusing compiler and runtime for path-based graph-analytics
specifications."""

from .graph import BOT, Edge, Graph, GraphError, Path

__all__ = ["BOT", "Edge", "Graph", "GraphError", "Path"]
__version__ = "0.1.0"
