// Wire types for the gateway's JSON API. The UI never computes
// optimization results; every number here arrives from the server.

export interface ParamFieldSpec {
  name: string;
  question: string | null;
  type: "real" | "integer" | "interval" | "enum" | "vector" | "text";
  unit: string;
  minimum: number | null;
  maximum: number | null;
  min_exclusive: boolean;
  max_exclusive: boolean;
  choices: string[];
  default: unknown;
  vector_length: number | null;
}

export interface SchemaSpec {
  kind: string;
  params: ParamFieldSpec[];
}

export interface AssignmentEntry {
  var: string;
  index: number | null;
  value: number;
}

export interface SolutionPayload {
  status: "optimal" | "infeasible" | "unbounded";
  assignment: AssignmentEntry[] | null;
  objective: number | null;
  metadata: Record<string, string>;
}

export type DerivedRow = [string, number, string];

export interface MessageResponse {
  reply: string;
  phase: string;
  questions?: ParamFieldSpec[];
  solution?: SolutionPayload;
  explanation?: string;
  derived?: DerivedRow[];
  failure?: string;
}

export interface SessionSnapshot {
  id: string;
  phase: string;
  kind: string | null;
  traces: { sample_index: number; debug_iterations: number; outcome: string }[];
  result: {
    solution: SolutionPayload;
    explanation: string;
    derived: DerivedRow[];
  } | null;
  failure: string | null;
  last_reply: string;
}

export interface ChartSpec {
  kind: "bar-schedule" | "single-value";
  label: string;
  values: number[];
  unit: string;
}

export interface ChatTurn {
  author: "user" | "concierge";
  text: string;
  questions?: ParamFieldSpec[];
  solution?: SolutionPayload;
  derived?: DerivedRow[];
  chart?: ChartSpec;
  failure?: string;
}
