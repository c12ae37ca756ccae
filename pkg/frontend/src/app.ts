/** Controller wiring the API client to the DOM.
 *
 * Every mutation round-trips through the server and then refetches, so
 * what the page shows is always the server's view. Constructing with a
 * null root runs the same logic headless (used by the tests).
 */

import {
  ApiError,
  clearLabel,
  fetchClusters,
  fetchStatus,
  finalize,
  putLabel,
  unlabeledFrom,
} from "./api.js";
import {
  AppState,
  firstUnlabeled,
  initialState,
  palette,
  progress,
  withConflict,
  withError,
  withFinalized,
  withServerData,
} from "./state.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export class LabelApp {
  state: AppState = initialState();
  /** card the 1-9 shortcuts apply to; view-only state */
  selected: number | null = null;

  constructor(private root: HTMLElement | null = null) {
    if (root) {
      root.addEventListener("click", (ev) => this.onClick(ev));
      root.addEventListener("keydown", (ev) => this.onKeydown(ev as KeyboardEvent));
    }
  }

  async refresh(): Promise<void> {
    try {
      const [status, clusters] = await Promise.all([fetchStatus(), fetchClusters()]);
      this.state = withServerData(this.state, status, clusters);
      if (this.selected === null || !clusters.some((c) => c.cluster_index === this.selected)) {
        this.selected = firstUnlabeled(this.state);
      }
    } catch (err) {
      this.state = withError(this.state, this.describe(err));
    }
    this.render();
  }

  async assign(index: number, label: string): Promise<void> {
    const text = label.trim();
    if (!text) {
      return;
    }
    try {
      await putLabel(index, text);
    } catch (err) {
      this.state = withError(this.state, this.describe(err));
    }
    // refetch even after an error: a 409/stale reply means someone else
    // moved the state, and the server is the truth either way
    await this.refresh();
  }

  async clear(index: number): Promise<void> {
    try {
      await clearLabel(index);
    } catch (err) {
      this.state = withError(this.state, this.describe(err));
    }
    await this.refresh();
  }

  async finalizeAll(): Promise<void> {
    try {
      const done = await finalize();
      this.state = withFinalized(this.state, done);
    } catch (err) {
      const unlabeled = unlabeledFrom(err);
      if (unlabeled.length > 0) {
        this.state = withConflict(this.state, unlabeled);
        this.state = withError(
          this.state,
          `finalize refused: ${unlabeled.length} cluster(s) still unlabeled`,
        );
      } else {
        this.state = withError(this.state, this.describe(err));
      }
    }
    this.render();
  }

  /** 1-9 applies the n-th palette label to the selected card. */
  async applyShortcut(digit: number): Promise<void> {
    const names = palette(this.state.clusters);
    if (this.selected === null || digit < 1 || digit > names.length) {
      return;
    }
    await this.assign(this.selected, names[digit - 1]);
  }

  private describe(err: unknown): string {
    if (err instanceof ApiError) {
      return err.message;
    }
    return `network error: ${err instanceof Error ? err.message : String(err)}`;
  }

  private onClick(ev: Event): void {
    const target = ev.target as HTMLElement;
    const action = target.dataset.action;
    const card = target.closest<HTMLElement>("[data-cluster]");
    const index = card ? Number(card.dataset.cluster) : null;
    if (action === "finalize") {
      void this.finalizeAll();
    } else if (action === "apply" && index !== null && this.root) {
      const input = this.root.querySelector<HTMLInputElement>(`#label-input-${index}`);
      if (input) {
        void this.assign(index, input.value);
      }
    } else if (action === "clear" && index !== null) {
      void this.clear(index);
    } else if (index !== null) {
      this.selected = index;
      this.render();
    }
  }

  private onKeydown(ev: KeyboardEvent): void {
    if ((ev.target as HTMLElement).tagName === "INPUT") {
      return;
    }
    const digit = Number(ev.key);
    if (digit >= 1 && digit <= 9) {
      void this.applyShortcut(digit);
    }
  }

  render(): void {
    if (!this.root) {
      return;
    }
    if (this.state.done) {
      const done = this.state.done;
      this.root.innerHTML = `
        <section class="done">
          <h1>Dataset finalized</h1>
          <p><strong>${done.labeled_count}</strong> samples labeled.</p>
          <p>Written to <code>${esc(done.output_path)}</code>.</p>
        </section>`;
      return;
    }

    const { labeled, total } = progress(this.state);
    const names = palette(this.state.clusters);
    const banner = this.state.error
      ? `<div class="banner" role="alert">${esc(this.state.error)}</div>`
      : "";
    const keys = names
      .slice(0, 9)
      .map((n, i) => `<kbd>${i + 1}</kbd> ${esc(n)}`)
      .join(" · ");

    const cards = this.state.clusters
      .map((c) => {
        const flagged = this.state.highlight.includes(c.cluster_index);
        const classes = [
          "card",
          c.label === null ? "unlabeled" : "labeled",
          flagged ? "flagged" : "",
          this.selected === c.cluster_index ? "selected" : "",
        ]
          .filter(Boolean)
          .join(" ");
        const thumbs = c.exemplars
          .map((e) => `<img src="${esc(e.thumbnail_url)}" alt="${esc(e.id)}" loading="lazy">`)
          .join("");
        return `
        <article class="${classes}" data-cluster="${c.cluster_index}" tabindex="0">
          <header>cluster ${c.cluster_index} <span class="size">${c.size} samples</span></header>
          <div class="thumbs">${thumbs}</div>
          <div class="label-row">
            <span class="label">${c.label === null ? "&mdash;" : esc(c.label)}</span>
            <input id="label-input-${c.cluster_index}" list="palette"
                   placeholder="label" value="${c.label === null ? "" : esc(c.label)}">
            <button data-action="apply">Apply</button>
            <button data-action="clear" ${c.label === null ? "disabled" : ""}>Clear</button>
          </div>
        </article>`;
      })
      .join("");

    this.root.innerHTML = `
      ${banner}
      <header class="toolbar">
        <progress max="${total}" value="${labeled}"></progress>
        <span>${labeled} / ${total} clusters labeled</span>
        <button data-action="finalize" ${labeled === total && total > 0 ? "" : "disabled"}>
          Finalize
        </button>
      </header>
      <p class="hint">${keys ? `shortcuts: ${keys}` : "label a cluster to build the palette"}</p>
      <datalist id="palette">${names.map((n) => `<option value="${esc(n)}">`).join("")}</datalist>
      <main class="grid">${cards}</main>`;

    const flaggedCard = this.root.querySelector(".flagged");
    flaggedCard?.scrollIntoView?.({ block: "center" });
  }
}

export function mount(root: HTMLElement): LabelApp {
  const app = new LabelApp(root);
  void app.refresh();
  return app;
}

declare global {
  interface Window {
    labelApp?: LabelApp;
  }
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    window.labelApp = mount(root);
  }
}
