import { SessionFlow } from './client.js';
import { keyToAction } from './keymap.js';
import { PRESETS } from './protocol.js';
import { renderView } from './render.js';

const app = document.querySelector<HTMLDivElement>('#app');
if (app === null) {
  throw new Error('missing #app element');
}

app.innerHTML = `
  <div class="controls">
    <select id="preset"></select>
    <input id="seed" type="number" value="0">
    <button id="start">start</button>
    <span id="frame"></span>
  </div>
  <div class="panels">
    <div>
      <div id="goal" class="goal"></div>
      <div id="grid" class="grid"></div>
      <div>inventory: <span id="inventory"></span></div>
    </div>
    <pre id="doc" class="doc"></pre>
  </div>
  <div id="overlay" class="overlay" hidden></div>
  <div id="banner" class="banner" hidden></div>
`;

const presetPicker = document.querySelector<HTMLSelectElement>('#preset')!;
for (const name of PRESETS) {
  const option = document.createElement('option');
  option.value = name;
  option.textContent = name;
  presetPicker.appendChild(option);
}

const seedInput = document.querySelector<HTMLInputElement>('#seed')!;
const gridBox = document.querySelector<HTMLDivElement>('#grid')!;
const goalBox = document.querySelector<HTMLDivElement>('#goal')!;
const docBox = document.querySelector<HTMLPreElement>('#doc')!;
const inventoryBox = document.querySelector<HTMLSpanElement>('#inventory')!;
const frameBox = document.querySelector<HTMLSpanElement>('#frame')!;
const overlayBox = document.querySelector<HTMLDivElement>('#overlay')!;
const bannerBox = document.querySelector<HTMLDivElement>('#banner')!;

let socket: WebSocket | null = null;
let flow: SessionFlow | null = null;

function repaint(): void {
  if (flow === null || flow.view === null) {
    bannerBox.hidden = flow === null || flow.banner === null;
    bannerBox.textContent = flow?.banner ?? '';
    return;
  }
  const d = renderView(flow.view, flow.banner);
  goalBox.textContent = d.goal;
  docBox.textContent = d.docLines.join('\n');
  inventoryBox.textContent = d.inventory;
  frameBox.textContent = d.frameLabel;

  gridBox.innerHTML = '';
  gridBox.style.gridTemplateColumns = `repeat(${d.rows[0]?.length ?? 0}, 1fr)`;
  for (const row of d.rows) {
    for (const cell of row) {
      const el = document.createElement('div');
      el.className = cell.agent ? 'cell agent' : 'cell';
      el.textContent = cell.text;
      gridBox.appendChild(el);
    }
  }

  overlayBox.hidden = d.overlay === null;
  if (d.overlay !== null) {
    overlayBox.textContent = `${d.overlay.text} reward ${d.overlay.reward > 0 ? '+' : ''}${d.overlay.reward}`;
  }
  bannerBox.hidden = d.banner === null;
  bannerBox.textContent = d.banner ?? '';
}

document.querySelector<HTMLButtonElement>('#start')!.addEventListener('click', () => {
  socket?.close();
  const ws = new WebSocket(`ws://${location.host}/play`);
  socket = ws;
  const session = new SessionFlow((text) => ws.send(text));
  flow = session;
  ws.addEventListener('open', () => {
    session.start({
      preset: presetPicker.value as (typeof PRESETS)[number],
      seed: Number(seedInput.value) || 0,
    });
  });
  ws.addEventListener('message', (event) => {
    session.handleMessage(String(event.data));
    repaint();
  });
  ws.addEventListener('close', () => {
    session.handleClose();
    repaint();
  });
  repaint();
});

window.addEventListener('keydown', (event) => {
  const action = keyToAction(event.key);
  if (action !== null && flow !== null) {
    event.preventDefault();
    flow.sendAction(action);
  }
});
