import type { SessionView } from './client.js';

export interface RenderCell {
  text: string; // the cell's exact served string
  agent: boolean;
}

export interface RenderDescription {
  rows: RenderCell[][]; // [y][x] for top-to-bottom DOM order
  goal: string;
  docLines: string[];
  inventory: string;
  frameLabel: string;
  overlay: { text: 'WIN' | 'LOSS'; reward: number } | null;
  banner: string | null;
}

// Pure view -> description; the DOM applier just copies it verbatim.
export function renderView(view: SessionView, banner: string | null = null): RenderDescription {
  const width = view.cells.length;
  const height = width > 0 ? view.cells[0].length : 0;
  const rows: RenderCell[][] = [];
  for (let y = 0; y < height; y++) {
    const row: RenderCell[] = [];
    for (let x = 0; x < width; x++) {
      row.push({
        text: view.cells[x][y],
        agent: x === view.agent[0] && y === view.agent[1],
      });
    }
    rows.push(row);
  }
  let overlay: RenderDescription['overlay'] = null;
  if (view.status !== 'playing' && view.reward !== null) {
    overlay = { text: view.status === 'won' ? 'WIN' : 'LOSS', reward: view.reward };
  }
  return {
    rows,
    goal: view.goal,
    docLines: view.doc.split('\n'),
    inventory: view.inventory,
    frameLabel: `frame ${view.frame}`,
    overlay,
    banner,
  };
}
