// Message types
export const ACTIONS = ['up', 'down', 'left', 'right', 'stay'] as const;
export type Action = (typeof ACTIONS)[number];

export const PRESETS = ['base6', 'base10', 'full6', 'full10', 'rps'] as const;
export type Preset = (typeof PRESETS)[number];

export interface HelloMessage {
  type: 'hello';
  preset?: Preset;
  seed?: number;
  dyna?: boolean;
  group?: boolean;
  nl?: boolean;
  max_frames?: number;
  split?: 'train' | 'eval';
  agent_tag?: string;
}

export interface ObsMessage {
  type: 'obs';
  frame: number;
  cells: string[][]; // [x][y], column-major, exactly as served
  doc: string;
  goal: string;
  inventory: string;
  agent: [number, number];
}

export interface ActMessage {
  type: 'act';
  action: Action;
}

export interface EndMessage {
  type: 'end';
  win: boolean;
  reward: number;
  frames: number;
  outcome: string;
}

export interface ErrorMessage {
  type: 'error';
  message: string;
}

export type ServerMessage = ObsMessage | EndMessage | ErrorMessage;
export type ClientMessage = HelloMessage | ActMessage;
export type PlayMessage = ServerMessage | ClientMessage;

export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return { type: 'error', message: `unparseable server message: ${raw}` };
  }
  if (typeof data !== 'object' || data === null) {
    return { type: 'error', message: `non-object server message: ${raw}` };
  }
  const msg = data as Record<string, unknown>;
  if (msg.type === 'obs' || msg.type === 'end' || msg.type === 'error') {
    return data as ServerMessage;
  }
  return { type: 'error', message: `unknown server message type: ${String(msg.type)}` };
}
