"""foodkg: a typed food knowledge graph with an LLM enrichment pipeline and
graph-RAG question answering."""

from .graph import FoodGraph
from .ontology import EdgeKind, NodeKind

__version__ = "0.1.0"

__all__ = ["EdgeKind", "FoodGraph", "NodeKind", "__version__"]
