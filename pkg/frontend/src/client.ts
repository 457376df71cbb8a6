import type {
  Action,
  ClientMessage,
  EndMessage,
  HelloMessage,
  ObsMessage,
  ServerMessage,
} from './protocol.js';
import { parseServerMessage } from './protocol.js';

export type Status = 'playing' | 'won' | 'lost';

// Mirrors the server's last message exactly; the client computes no outcomes.
export interface SessionView {
  cells: string[][];
  doc: string;
  goal: string;
  inventory: string;
  frame: number;
  agent: [number, number];
  status: Status;
  reward: number | null;
  outcome: string | null;
}

export interface TranscriptEntry {
  dir: 'send' | 'recv';
  msg: ClientMessage | ServerMessage;
}

/**
 * Transport-free session state machine.  Feed it raw server text via
 * handleMessage and give it a send function; it enforces the protocol laws:
 * one act per obs, and the displayed state is always the last server word.
 */
export class SessionFlow {
  view: SessionView | null = null;
  banner: string | null = null;
  transcript: TranscriptEntry[] = [];
  private awaitingReply = false;
  private readonly send: (text: string) => void;

  constructor(send: (text: string) => void) {
    this.send = send;
  }

  private dispatch(msg: ClientMessage): void {
    this.transcript.push({ dir: 'send', msg });
    this.send(JSON.stringify(msg));
  }

  start(hello: Omit<HelloMessage, 'type'>): void {
    this.view = null;
    this.banner = null;
    this.awaitingReply = true;
    this.dispatch({ type: 'hello', ...hello });
  }

  /** Send one act; refused while a reply is pending or no episode is live. */
  sendAction(action: Action): boolean {
    if (this.view === null || this.view.status !== 'playing' || this.awaitingReply) {
      return false;
    }
    this.awaitingReply = true;
    this.dispatch({ type: 'act', action });
    return true;
  }

  handleMessage(raw: string): ServerMessage {
    const msg = parseServerMessage(raw);
    this.transcript.push({ dir: 'recv', msg });
    if (msg.type === 'obs') {
      this.applyObs(msg);
    } else if (msg.type === 'end') {
      this.applyEnd(msg);
    } else {
      this.banner = msg.message; // surfaced verbatim; state unchanged
    }
    return msg;
  }

  private applyObs(msg: ObsMessage): void {
    this.awaitingReply = false;
    this.view = {
      cells: msg.cells,
      doc: msg.doc,
      goal: msg.goal,
      inventory: msg.inventory,
      frame: msg.frame,
      agent: msg.agent,
      status: 'playing',
      reward: null,
      outcome: null,
    };
  }

  private applyEnd(msg: EndMessage): void {
    this.awaitingReply = false;
    if (this.view === null) {
      return;
    }
    this.view = {
      ...this.view,
      frame: msg.frames,
      status: msg.win ? 'won' : 'lost',
      reward: msg.reward,
      outcome: msg.outcome,
    };
  }

  handleClose(): void {
    if (this.view !== null && this.view.status === 'playing') {
      this.banner = 'abandoned';
    }
    this.awaitingReply = false;
  }
}
