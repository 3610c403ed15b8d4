/**
 * DOM wiring: token screen, strip canvas, choice buttons (with keyboard
 * shortcuts 1-4), progress indicator, error panel with retry.
 */
import { CHOICES, Choice, ItemView, StudyClient } from './api';
import { durationS, renderStrip, stripHeightPx, stripWidthPx } from './render';
import {
  Session, ViewHooks, clearCredentials, loadCredentials, saveCredentials,
} from './session';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const tokenScreen = el<HTMLElement>('token-screen');
const taskScreen = el<HTMLElement>('task-screen');
const doneScreen = el<HTMLElement>('done-screen');
const errorPanel = el<HTMLElement>('error-panel');
const errorMessage = el<HTMLElement>('error-message');
const progress = el<HTMLElement>('progress');
const doneText = el<HTMLElement>('done-text');
const canvas = el<HTMLCanvasElement>('strip');
const tokenForm = el<HTMLFormElement>('token-form');
const studyInput = el<HTMLInputElement>('study-id');
const tokenInput = el<HTMLInputElement>('rater-token');
const choicesBar = el<HTMLElement>('choices');

function show(screen: HTMLElement): void {
  for (const s of [tokenScreen, taskScreen, doneScreen]) {
    s.hidden = s !== screen;
  }
}

let session: Session | null = null;

const view: ViewHooks = {
  showItem(item: ItemView): void {
    show(taskScreen);
    errorPanel.hidden = true;
    progress.textContent = `${item.position + 1} / ${item.total}`;
    canvas.width = stripWidthPx(durationS(item));
    canvas.height = stripHeightPx();
    const ctx = canvas.getContext('2d');
    if (ctx) renderStrip(ctx, item);
  },
  showDone(total: number): void {
    show(doneScreen);
    doneText.textContent = `All done — ${total} / ${total} items annotated.`;
  },
  showError(message: string): void {
    errorPanel.hidden = false;
    errorMessage.textContent = message;
  },
  onAuthFailure(): void {
    clearCredentials(window.sessionStorage);
    session = null;
    show(tokenScreen);
  },
};

function startSession(studyId: string, raterToken: string): void {
  const client = new StudyClient('', studyId, raterToken);
  session = new Session(client, view);
  void session.start();
}

tokenForm.addEventListener('submit', (ev) => {
  ev.preventDefault();
  const creds = { studyId: studyInput.value.trim(), raterToken: tokenInput.value.trim() };
  if (!creds.studyId || !creds.raterToken) return;
  saveCredentials(window.sessionStorage, creds);
  startSession(creds.studyId, creds.raterToken);
});

for (const [i, choice] of CHOICES.entries()) {
  const button = document.createElement('button');
  button.type = 'button';
  button.textContent = `${i + 1} · ${choice}`;
  button.addEventListener('click', () => void session?.choose(choice));
  choicesBar.appendChild(button);
}

window.addEventListener('keydown', (ev) => {
  const index = Number(ev.key) - 1;
  if (index >= 0 && index < CHOICES.length && !taskScreen.hidden) {
    void session?.choose(CHOICES[index] as Choice);
  }
});

el<HTMLButtonElement>('retry-button').addEventListener('click', () => void session?.retry());

const saved = loadCredentials(window.sessionStorage);
if (saved) {
  startSession(saved.studyId, saved.raterToken);
} else {
  show(tokenScreen);
}
