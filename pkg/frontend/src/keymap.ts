import type { Action } from './protocol.js';

const KEY_MAP: Record<string, Action> = {
  ArrowUp: 'up',
  ArrowDown: 'down',
  ArrowLeft: 'left',
  ArrowRight: 'right',
  ' ': 'stay',
};

// Arrows move, space waits, everything else is ignored.
export function keyToAction(key: string): Action | null {
  return KEY_MAP[key] ?? null;
}
