// Wire types mirroring the service's JSON API, plus local UI state shapes.

export interface FactPayload {
  text: string;
  score: number;
  seeded: boolean;
}

export interface AskResponse {
  answer: string;
  facts: FactPayload[];
  zero_retrieval: boolean;
}

export interface NodePayload {
  id: string;
  kind: string;
  name: string;
  props: Record<string, unknown>;
}

export interface NeighborEntry {
  direction: "in" | "out";
  edge_props: Record<string, unknown>;
  node: NodePayload;
}

export interface NodeResponse {
  node: NodePayload;
  neighbors: Record<string, NeighborEntry[]>;
}

export interface GraphStats {
  nodes: Record<string, number>;
  edges: Record<string, number>;
  total_nodes: number;
  total_edges: number;
}

/** One completed question/answer exchange, kept verbatim from the service. */
export interface ChatTurn {
  question: string;
  sentQuestion: string;
  answer: string;
  facts: FactPayload[];
  zeroRetrieval: boolean;
  timestamp: number;
}

export interface UserProfile {
  diets: string[];
  excludedAllergens: number[];
}
