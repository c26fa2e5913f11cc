import type {
  AnswerBody,
  AnswerResult,
  ApiError,
  ClaimDetail,
  ClaimInfo,
  MetricsReport,
  ProvenanceEntry,
  QueueResponse,
  VerifyStatus,
} from "./types.js";

export class ApiRequestError extends Error {
  readonly status: number;
  readonly error: ApiError;

  constructor(status: number, error: ApiError) {
    super(`${error.code}: ${error.message}`);
    this.status = status;
    this.error = error;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin client over the service API; one method per endpoint. */
export class ConsoleApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.baseUrl + path, init);
    const text = await resp.text();
    const data = text ? JSON.parse(text) : null;
    if (!resp.ok) {
      const error: ApiError =
        data && typeof data.code === "string"
          ? data
          : { code: "http_error", message: `HTTP ${resp.status}` };
      throw new ApiRequestError(resp.status, error);
    }
    return data as T;
  }

  getQueue(): Promise<QueueResponse> {
    return this.request("GET", "/queue");
  }

  getClaims(): Promise<ClaimInfo[]> {
    return this.request("GET", "/claims");
  }

  getClaimDetail(claimId: string): Promise<ClaimDetail> {
    return this.request("GET", `/claims/${encodeURIComponent(claimId)}/evidence`);
  }

  answer(itemId: string, body: AnswerBody): Promise<AnswerResult> {
    return this.request("POST", `/queue/${encodeURIComponent(itemId)}/answer`, body);
  }

  override(claimId: string, value: string): Promise<{ version: number }> {
    return this.request("POST", `/claims/${encodeURIComponent(claimId)}/override`, { value });
  }

  lock(claimId: string): Promise<{ version: number }> {
    return this.request("POST", `/claims/${encodeURIComponent(claimId)}/lock`);
  }

  startVerify(): Promise<{ started: boolean }> {
    return this.request("POST", "/verify");
  }

  verifyStatus(): Promise<VerifyStatus> {
    return this.request("GET", "/verify/status");
  }

  provenance(fromSeq = 1): Promise<{ entries: ProvenanceEntry[] }> {
    return this.request("GET", `/provenance?from_seq=${fromSeq}`);
  }

  metrics(): Promise<MetricsReport> {
    return this.request("GET", "/metrics");
  }
}
