// Server payload shapes. The console renders these verbatim: every visible
// number traces to one of these fields, no client-side scoring.

export interface UtilityComponents {
  unc: number;
  conflict: number;
  impact: number;
}

export interface Query {
  type: "binary" | "candidate_select";
  options?: string[];
}

export interface QueueItem {
  item_id: string;
  claim_id: string;
  utility: number;
  components: UtilityComponents;
  query: Query;
  status: "open" | "answered" | "expired";
  claim_text: string;
}

export interface QueueResponse {
  items: QueueItem[];
}

export interface ElementRef {
  kind: string;
  ref_id: string;
}

export interface ClaimInfo {
  claim_id: string;
  claim_type: "exist" | "label" | "attr" | "rel";
  target: ElementRef;
  asserted_value: string;
  temporal_extent: [number, number];
  status: string;
  belief: number | null;
  claim_text?: string;
}

export interface EvidenceRecord {
  role: string;
  verdict: -1 | 0 | 1;
  confidence: number;
  claim_id: string;
  round: number;
  candidate: string | null;
  probed: boolean;
}

export interface ProvenanceEntry {
  seq: number;
  timestamp: string;
  actor: string;
  action: string;
  payload: Record<string, unknown>;
  prior_version: number;
  new_version: number;
}

export interface ClaimDetail {
  claim: ClaimInfo;
  claim_text: string;
  evidence: EvidenceRecord[];
  belief: number | null;
  dependency_neighbors: string[];
  provenance: ProvenanceEntry[];
}

export interface AnswerBody {
  type: "binary" | "candidate_select";
  value: string;
}

export interface ReverifyPlanView {
  edited: string[];
  closure: string[];
  calls_planned: number;
  calls_full_baseline: number;
}

export interface AnswerResult {
  item_id: string;
  reverify: ReverifyPlanView;
  calls_actual: number;
  calls_full: number;
  queue_open: number;
}

export interface VerifyStatus {
  running: boolean;
  rounds: number;
  converged: boolean;
  runs: number;
}

export interface ApiError {
  code: string;
  message: string;
  field?: string;
}

export interface MetricsReport {
  inv_probe: number;
  uncert: number;
  claim_agr: number;
  resolve: number;
  human_qpf: number;
  entity_acc: number;
  ged_norm: number | null;
  density: string;
  calls_actual: number;
  calls_full: number;
  reduction_ratio: number | null;
}
