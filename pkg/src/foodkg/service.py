"""Read-only HTTP service over a graph snapshot and fact index.

All answers derive from the loaded snapshot alone; the service never mutates
the graph, so restarting it reproduces identical responses for identical
requests whenever the backends are deterministic.
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .graph import FoodGraph, Node, UnknownNodeError
from .graphrag import QaPipeline
from .ontology import EdgeKind, NodeKind, diet_ids, seasons


class AskRequest(BaseModel):
    question: str = Field(min_length=1)


class FactPayload(BaseModel):
    text: str
    score: float
    seeded: bool


class AskResponse(BaseModel):
    answer: str
    facts: list[FactPayload]
    zero_retrieval: bool


def _node_payload(node: Node) -> dict[str, Any]:
    return {"id": node.id, "kind": node.kind.value, "name": node.name, "props": node.props}


def create_app(graph: FoodGraph, pipeline: QaPipeline | None = None) -> FastAPI:
    app = FastAPI(title="foodkg", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/v1/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/v1/ask", response_model=AskResponse)
    def ask(request: AskRequest) -> AskResponse:
        if pipeline is None:
            raise HTTPException(status_code=503, detail="QA pipeline not configured")
        result = pipeline.ask(request.question)
        return AskResponse(
            answer=result.answer,
            facts=[
                FactPayload(text=f.fact, score=f.score, seeded=f.seeded)
                for f in result.facts
            ],
            zero_retrieval=result.zero_retrieval,
        )

    @app.get("/v1/graph/stats")
    def graph_stats() -> dict[str, Any]:
        return graph.stats().to_dict()

    @app.get("/v1/graph/node/{node_id}")
    def graph_node(node_id: str) -> dict[str, Any]:
        try:
            node = graph.node(node_id)
        except UnknownNodeError:
            raise HTTPException(status_code=404, detail=f"unknown node {node_id!r}")
        neighbors: dict[str, list[dict[str, Any]]] = {}
        for edge, far in graph.neighbors(node_id, direction="both"):
            direction = "out" if edge.src == node_id else "in"
            neighbors.setdefault(edge.kind.value, []).append(
                {
                    "direction": direction,
                    "edge_props": edge.props,
                    "node": _node_payload(far),
                }
            )
        return {"node": _node_payload(node), "neighbors": neighbors}

    @app.get("/v1/recipes")
    def recipes(
        diet: str | None = Query(default=None),
        exclude_allergen: int | None = Query(default=None),
        season: str | None = Query(default=None),
        cuisine: str | None = Query(default=None),
    ) -> dict[str, Any]:
        if diet is not None and diet not in diet_ids():
            raise HTTPException(status_code=400, detail=f"unknown diet {diet!r}")
        if season is not None and season not in seasons():
            raise HTTPException(status_code=400, detail=f"unknown season {season!r}")
        if exclude_allergen is not None and not 1 <= exclude_allergen <= 14:
            raise HTTPException(
                status_code=400, detail="exclude_allergen must be in 1..14"
            )

        matched: list[dict[str, Any]] = []
        for node in graph.nodes_of_kind(NodeKind.RECIPE):
            if diet is not None:
                suited = {
                    far.name
                    for _, far in graph.neighbors(
                        node.id, EdgeKind.IS_SUITABLE_FOR, "out"
                    )
                }
                if diet not in suited:
                    continue
            if season is not None:
                node_seasons = {
                    far.name
                    for _, far in graph.neighbors(
                        node.id, EdgeKind.IS_FOR_SEASON, "out"
                    )
                }
                if season not in node_seasons:
                    continue
            if cuisine is not None:
                node_cuisines = {
                    far.name.lower()
                    for _, far in graph.neighbors(node.id, EdgeKind.IS_PART_OF, "out")
                }
                if cuisine.lower() not in node_cuisines:
                    continue
            if exclude_allergen is not None:
                has_allergen = False
                for _, ingredient in graph.neighbors(
                    node.id, EdgeKind.CONTAINS, "out"
                ):
                    for _, category in graph.neighbors(
                        ingredient.id, EdgeKind.ALLERGEN_OF, "out"
                    ):
                        if category.props.get("allergen_id") == exclude_allergen:
                            has_allergen = True
                            break
                    if has_allergen:
                        break
                if has_allergen:
                    continue
            matched.append(
                {
                    "node_id": node.id,
                    "recipe_id": node.props.get("recipe_id"),
                    "name": node.name,
                }
            )
        return {"recipes": matched, "count": len(matched)}

    return app
