/** Typed client for the pairwise-annotation service endpoints. */

export type Choice = "A" | "B" | "tie" | "neither";

export interface Progress {
  judged: number;
  total: number;
}

/** Blinded item exactly as the service sends it; no system identities. */
export interface ViewItem {
  itemId: string;
  prompt: string;
  outputA: string;
  outputB: string;
  progress: Progress;
}

export type NextResult =
  | { done: true; progress: Progress }
  | { done: false; item: ViewItem };

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    detail: string,
  ) {
    super(`service returned ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class AnnotationApi {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  async nextItem(studyId: string, annotatorId: string): Promise<NextResult> {
    const url =
      `${this.baseUrl}/studies/${encodeURIComponent(studyId)}/next` +
      `?annotator=${encodeURIComponent(annotatorId)}`;
    const resp = await this.fetchFn(url);
    const body = await this.json(resp);
    const progress = body.progress as Progress;
    if (body.done) {
      return { done: true, progress };
    }
    return {
      done: false,
      item: {
        itemId: body.item_id as string,
        prompt: body.prompt as string,
        outputA: body.output_a as string,
        outputB: body.output_b as string,
        progress,
      },
    };
  }

  async submitJudgment(
    studyId: string,
    itemId: string,
    annotatorId: string,
    choice: Choice,
  ): Promise<void> {
    const url = `${this.baseUrl}/studies/${encodeURIComponent(studyId)}/judgments`;
    const resp = await this.fetchFn(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ item_id: itemId, annotator_id: annotatorId, choice }),
    });
    await this.json(resp);
  }

  private async json(resp: Response): Promise<Record<string, unknown>> {
    let body: Record<string, unknown> = {};
    try {
      body = (await resp.json()) as Record<string, unknown>;
    } catch {
      // non-JSON error bodies fall through to the status check
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, String(body.detail ?? resp.statusText));
    }
    return body;
  }
}
