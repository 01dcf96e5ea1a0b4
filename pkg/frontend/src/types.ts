// Wire types mirrored from the session API's JSON bodies.

export interface MediaRefWire {
  kind: string;
  url: string;
  caption: string | null;
  step_offset_seconds: number | null;
}

export interface RequirementWire {
  name: string;
  quantity: string | null;
  optional_flag: boolean;
}

export interface ScreenPayloadWire {
  body_text: string;
  headline: string | null;
  images: MediaRefWire[];
  options: string[];
  step_position: { index: number; total: number } | null;
  requirements_view: RequirementWire[] | null;
}

export interface TurnDebug {
  action_code: string;
  policy: string;
  latency_ms: number;
}

export interface TurnResponseWire {
  response_text: string;
  screen: ScreenPayloadWire;
  debug: TurnDebug;
}

export interface TurnRecordWire {
  user_utterance: string;
  action_code: string;
  policy: string;
  system_response: string;
  screen: ScreenPayloadWire;
  timestamp: number;
  gateway_calls: number;
}

export interface UiMessage {
  role: "user" | "system" | "notice";
  text: string;
  screen?: ScreenPayloadWire;
  debug?: { action_code: string; policy: string };
}

// Narrow view of (local|session)Storage so tests can inject a Map-backed stub.
export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}
