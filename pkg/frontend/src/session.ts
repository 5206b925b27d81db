/**
 * One annotator's session: fetch next item, render it blinded, capture a
 * choice, submit on explicit confirmation, repeat until the server says done.
 *
 * The server is the source of truth; this controller keeps no progress state
 * of its own, so reloading the page resumes at the first unjudged item. A
 * failed request surfaces a retry banner without losing the pending choice.
 */
import { AnnotationApi, Choice, NextResult, ViewItem } from "./api.js";

export type Phase = "loading" | "choosing" | "submitting" | "done" | "error";

const CHOICE_KEYS: Record<string, Choice> = {
  "1": "A",
  "2": "B",
  "3": "tie",
  "4": "neither",
};

const CHOICE_LABELS: Record<Choice, string> = {
  A: "Output A (1)",
  B: "Output B (2)",
  tie: "Tie (3)",
  neither: "Neither (4)",
};

const RUBRIC_TEXT =
  "Judge fluency, accuracy, and meaning preservation, then pick the " +
  "higher-quality output. Choose Tie when both are equally good and " +
  "Neither when both are unacceptable.";

export interface SessionOptions {
  studyId: string;
  annotatorId: string;
  api: AnnotationApi;
}

export class SessionController {
  phase: Phase = "loading";
  item: ViewItem | null = null;
  pendingChoice: Choice | null = null;
  progress = { judged: 0, total: 0 };
  errorMessage = "";

  private failedAction: "next" | "submit" | null = null;
  private readonly keyListener = (event: KeyboardEvent) => this.onKey(event);

  constructor(
    private readonly root: HTMLElement,
    private readonly options: SessionOptions,
  ) {}

  async start(): Promise<void> {
    this.root.ownerDocument.addEventListener("keydown", this.keyListener);
    await this.advance();
  }

  destroy(): void {
    this.root.ownerDocument.removeEventListener("keydown", this.keyListener);
    this.root.replaceChildren();
  }

  /** Ask the server for the next unjudged item and render it. */
  async advance(): Promise<void> {
    this.phase = "loading";
    this.render();
    let next: NextResult;
    try {
      next = await this.options.api.nextItem(this.options.studyId, this.options.annotatorId);
    } catch (err) {
      this.fail("next", err);
      return;
    }
    if (next.done) {
      this.progress = next.progress;
      this.phase = "done";
      this.item = null;
    } else {
      this.progress = next.item.progress;
      this.phase = "choosing";
      this.item = next.item;
      this.pendingChoice = null;
    }
    this.render();
  }

  /** Record a tentative choice; nothing is sent until confirm(). */
  select(choice: Choice): void {
    if (this.phase !== "choosing" && this.phase !== "error") {
      return;
    }
    this.pendingChoice = choice;
    if (this.phase === "error" && this.failedAction === "submit") {
      // picking again after a failed submit returns to the choosing state
      this.phase = "choosing";
      this.failedAction = null;
    }
    this.render();
  }

  /** Submit the pending choice; double confirmation is a no-op. */
  async confirm(): Promise<void> {
    if (this.phase !== "choosing" || this.pendingChoice === null || this.item === null) {
      return;
    }
    this.phase = "submitting";
    this.render();
    try {
      await this.options.api.submitJudgment(
        this.options.studyId,
        this.item.itemId,
        this.options.annotatorId,
        this.pendingChoice,
      );
    } catch (err) {
      this.fail("submit", err);
      return;
    }
    await this.advance();
  }

  /** Re-run whichever request failed, keeping the pending choice. */
  async retry(): Promise<void> {
    if (this.phase !== "error") {
      return;
    }
    const action = this.failedAction;
    this.failedAction = null;
    if (action === "submit") {
      this.phase = "choosing";
      await this.confirm();
    } else {
      await this.advance();
    }
  }

  private fail(action: "next" | "submit", err: unknown): void {
    this.phase = "error";
    this.failedAction = action;
    this.errorMessage = err instanceof Error ? err.message : String(err);
    this.render();
  }

  private onKey(event: KeyboardEvent): void {
    const choice = CHOICE_KEYS[event.key];
    if (choice) {
      this.select(choice);
    } else if (event.key === "Enter") {
      void this.confirm();
    }
  }

  // -- rendering ------------------------------------------------------------

  private render(): void {
    const doc = this.root.ownerDocument;
    this.root.replaceChildren();
    this.root.className = `annotation-app phase-${this.phase}`;

    const header = doc.createElement("header");
    const progress = doc.createElement("span");
    progress.className = "progress";
    progress.textContent = `${this.progress.judged} / ${this.progress.total} judged`;
    header.append(progress);
    this.root.append(header);

    const rubric = doc.createElement("details");
    rubric.className = "rubric";
    rubric.open = true;
    const summary = doc.createElement("summary");
    summary.textContent = "How to judge";
    const rubricBody = doc.createElement("p");
    rubricBody.textContent = RUBRIC_TEXT;
    rubric.append(summary, rubricBody);
    this.root.append(rubric);

    if (this.phase === "done") {
      const done = doc.createElement("p");
      done.className = "completed";
      done.textContent = "All items judged. Thank you!";
      this.root.append(done);
      return;
    }

    if (this.phase === "loading") {
      const loading = doc.createElement("p");
      loading.className = "loading";
      loading.textContent = "Loading…";
      this.root.append(loading);
      return;
    }

    if (this.item) {
      const prompt = doc.createElement("p");
      prompt.className = "prompt";
      prompt.textContent = this.item.prompt;
      this.root.append(prompt);

      const outputs = doc.createElement("div");
      outputs.className = "outputs";
      outputs.append(
        this.outputCard(doc, "A", this.item.outputA),
        this.outputCard(doc, "B", this.item.outputB),
      );
      this.root.append(outputs);

      const extras = doc.createElement("div");
      extras.className = "extras";
      for (const choice of ["tie", "neither"] as const) {
        extras.append(this.choiceButton(doc, choice));
      }
      this.root.append(extras);

      const confirm = doc.createElement("button");
      confirm.className = "confirm";
      confirm.textContent =
        this.phase === "submitting" ? "Submitting…" : "Submit judgment (Enter)";
      confirm.disabled = this.pendingChoice === null || this.phase === "submitting";
      confirm.addEventListener("click", () => void this.confirm());
      this.root.append(confirm);
    }

    if (this.phase === "error") {
      const banner = doc.createElement("div");
      banner.className = "banner";
      const message = doc.createElement("span");
      message.textContent = `Request failed: ${this.errorMessage}`;
      const retry = doc.createElement("button");
      retry.className = "retry";
      retry.textContent = "Retry";
      retry.addEventListener("click", () => void this.retry());
      banner.append(message, retry);
      this.root.append(banner);
    }
  }

  private outputCard(doc: Document, choice: Choice, text: string): HTMLElement {
    const card = this.choiceButton(doc, choice);
    card.classList.add("output");
    const body = doc.createElement("p");
    body.textContent = text;
    card.append(body);
    return card;
  }

  private choiceButton(doc: Document, choice: Choice): HTMLButtonElement {
    const button = doc.createElement("button");
    button.className = `choice choice-${choice}`;
    if (this.pendingChoice === choice) {
      button.classList.add("selected");
    }
    const label = doc.createElement("strong");
    label.textContent = CHOICE_LABELS[choice];
    button.append(label);
    button.addEventListener("click", () => this.select(choice));
    return button;
  }
}
