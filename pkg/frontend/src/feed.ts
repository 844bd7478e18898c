/** Recommendation feed: card list, always-visible mode toggle, and
 * per-card controls (why-recommended, don't-recommend, watchlist).
 *
 * Concurrency: at most one in-flight feed request; a newer request aborts
 * the older one so rapid toggles settle on the last mode chosen. */

import { ApiClient } from "./api.js";
import type { Mode, Slate, SlateSlot } from "./types.js";

export interface FeedViewState {
  mode: Mode;
  slate: Slate | null;
  pending_refresh: boolean;
  error: string | null;
}

const EMPTY_MESSAGE = "Nothing to recommend right now.";

export class FeedView {
  readonly state: FeedViewState = {
    mode: "personalized",
    slate: null,
    pending_refresh: false,
    error: null,
  };

  private inflight: AbortController | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly k: number = 10,
  ) {}

  /** Fetch the feed for the current mode and render it. Latest-wins: any
   * in-flight request is aborted first. */
  async refresh(): Promise<void> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.state.pending_refresh = true;
    try {
      const slate = await this.api.getFeed(this.state.mode, this.k, controller.signal);
      if (controller.signal.aborted) return;
      const previous = new Set(
        this.state.slate?.slots.map((s) => s.item_id) ?? [],
      );
      this.state.slate = slate;
      this.state.error = null;
      this.render(previous);
    } catch (err) {
      if (controller.signal.aborted || (err as Error).name === "AbortError") {
        return;
      }
      this.state.error = String((err as Error).message ?? err);
      this.renderError();
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
        this.state.pending_refresh = false;
      }
    }
  }

  /** Post one mode_switch event, then refetch in the new mode. Entering
   * items are highlighted so the effect of the choice is visible. */
  async toggleMode(newMode: Mode): Promise<void> {
    if (newMode === this.state.mode) return;
    this.state.mode = newMode;
    await this.api.postEvent({ type: "mode_switch", mode: newMode });
    await this.refresh();
  }

  async clickCard(itemId: string): Promise<void> {
    const slate = this.state.slate;
    if (!slate) return;
    await this.api.postEvent({
      type: "click",
      slate_id: slate.slate_id,
      item_id: itemId,
    });
    await this.refresh();
  }

  async blockItem(itemId: string): Promise<void> {
    await this.api.postEvent({ type: "block", item_id: itemId });
    await this.refresh();
  }

  async toggleWatchlist(itemId: string): Promise<void> {
    await this.api.postEvent({ type: "watchlist_toggle", item_id: itemId });
  }

  async showWhy(itemId: string): Promise<void> {
    const explanation = await this.api.explain(itemId);
    const card = this.root.querySelector(`[data-item-id="${itemId}"]`);
    if (!card) return;
    let why = card.querySelector(".why");
    if (!why) {
      why = document.createElement("p");
      why.className = "why";
      card.appendChild(why);
    }
    const genres = explanation.overlapping_genres.join(", ") || "none yet";
    const liked = explanation.similar_liked.join(", ") || "none yet";
    why.textContent = `Shared genres: ${genres}. Similar to items you liked: ${liked}.`;
  }

  private render(previousIds: Set<string>): void {
    this.root.replaceChildren();
    this.root.appendChild(this.renderToggle());
    const slate = this.state.slate;
    if (!slate || slate.slots.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty-state";
      empty.textContent = EMPTY_MESSAGE;
      this.root.appendChild(empty);
      return;
    }
    const list = document.createElement("ul");
    list.className = "feed";
    for (const slot of slate.slots) {
      list.appendChild(this.renderCard(slot, previousIds));
    }
    this.root.appendChild(list);
  }

  private renderToggle(): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "mode-toggle";
    for (const mode of ["personalized", "diversity"] as const) {
      const button = document.createElement("button");
      button.textContent = mode;
      button.dataset.mode = mode;
      button.className = mode === this.state.mode ? "active" : "";
      button.addEventListener("click", () => void this.toggleMode(mode));
      bar.appendChild(button);
    }
    return bar;
  }

  private renderCard(slot: SlateSlot, previousIds: Set<string>): HTMLElement {
    const card = document.createElement("li");
    card.className = "card";
    card.dataset.itemId = slot.item_id;
    if (previousIds.size > 0 && !previousIds.has(slot.item_id)) {
      card.classList.add("entered");
    }

    const title = document.createElement("h3");
    title.textContent = slot.title;
    title.addEventListener("click", () => void this.clickCard(slot.item_id));

    const genres = document.createElement("p");
    genres.className = "genres";
    genres.textContent = slot.genres.join(", ");

    const badge = document.createElement("span");
    badge.className = `badge badge-${slot.provenance}`;
    badge.textContent = slot.provenance;

    const controls = document.createElement("div");
    controls.className = "controls";
    controls.append(
      this.control("why recommended?", () => void this.showWhy(slot.item_id)),
      this.control("don't recommend", () => void this.blockItem(slot.item_id)),
      this.control("watchlist", () => void this.toggleWatchlist(slot.item_id)),
    );

    card.append(title, badge, genres, controls);
    return card;
  }

  private control(label: string, onClick: () => void): HTMLButtonElement {
    const button = document.createElement("button");
    button.textContent = label;
    button.addEventListener("click", onClick);
    return button;
  }

  private renderError(): void {
    this.root.replaceChildren();
    this.root.appendChild(this.renderToggle());
    const error = document.createElement("p");
    error.className = "error-state";
    error.textContent = `Could not reach the local service: ${this.state.error}`;
    this.root.appendChild(error);
  }
}
