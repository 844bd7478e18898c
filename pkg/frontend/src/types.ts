/** Wire types mirrored from the participant-local and aggregator APIs. */

export type Mode = "personalized" | "diversity";

export interface SlateSlot {
  position: number;
  item_id: string;
  provenance: "personalized" | "diverse";
  title: string;
  genres: string[];
}

export interface Slate {
  slate_id: string;
  mode: Mode;
  created_at: number;
  slots: SlateSlot[];
}

export interface Explanation {
  item_id: string;
  overlapping_genres: string[];
  similar_liked: string[];
}

export interface ActivityBucket {
  day: number;
  events: number;
}

export interface ModeStats {
  impressions: number;
  clicks: number;
  ctr: number | null;
}

export interface ClientStats {
  impressions: number;
  unique_clicked: number;
  ctr: number;
  per_mode: Record<string, ModeStats>;
  settings_changes: number;
  feedback_entries: number;
  dont_recommend_actions: number;
  satisfaction_mean: number | null;
  satisfaction_n: number;
}

export interface DashboardStats {
  participants: number;
  epsilon: number;
  totals: Record<string, number>;
  per_mode: Record<string, ModeStats>;
  [key: string]: unknown;
}

export interface Participation {
  mode: "sharing" | "local_only";
  reason: string | null;
}

export type ClientEvent =
  | { type: "click"; slate_id: string; item_id: string }
  | { type: "block"; item_id: string }
  | { type: "unblock"; item_id: string }
  | { type: "watchlist_toggle"; item_id: string }
  | { type: "satisfaction_rating"; payload: string }
  | { type: "mode_switch"; mode: Mode };
