/**
 * Canvas rendering of a lead-I strip at clinical paper conventions:
 * 25 mm/s time scale, 10 mm/mV amplitude scale, major gridlines every
 * 0.2 s and 0.5 mV. Long segments are drawn at full width and scrolled
 * by the container — samples are never resampled for display.
 */
import type { ItemView } from './api';

export const PX_PER_MM = 3;
export const MM_PER_SECOND = 25;
export const MM_PER_MV = 10;
export const TIME_GRID_S = 0.2;
export const AMP_GRID_MV = 0.5;
/** Display window: ±2.5 mV around the baseline. */
export const AMP_RANGE_MV = 2.5;

export const GRID_COLOR = '#f5b8b8';
export const TRACE_COLOR = '#1a1a1a';
export const LABEL_COLOR = '#8a8a8a';

/**
 * Structural subset of CanvasRenderingContext2D used by the renderer,
 * so tests can substitute a recording stub.
 */
export interface Ctx2D {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export function durationS(item: ItemView): number {
  return item.samples_uv.length / item.sampling_rate_hz;
}

export function stripWidthPx(duration_s: number): number {
  return Math.ceil(duration_s * MM_PER_SECOND * PX_PER_MM);
}

export function stripHeightPx(): number {
  return Math.round(2 * AMP_RANGE_MV * MM_PER_MV * PX_PER_MM);
}

/** Major time gridline positions: multiples of 0.2 s in (0, duration]. */
export function timeGridlinesS(duration_s: number): number[] {
  const out: number[] = [];
  const eps = 1e-9;
  for (let k = 1; k * TIME_GRID_S <= duration_s + eps; k++) {
    out.push(k * TIME_GRID_S);
  }
  return out;
}

/** Major amplitude gridlines: multiples of 0.5 mV in [-range, +range]. */
export function ampGridlinesMv(): number[] {
  const out: number[] = [];
  for (let mv = -AMP_RANGE_MV; mv <= AMP_RANGE_MV + 1e-9; mv += AMP_GRID_MV) {
    out.push(Math.round(mv * 10) / 10);
  }
  return out;
}

export function timeToX(t_s: number): number {
  return t_s * MM_PER_SECOND * PX_PER_MM;
}

/** 0 µV maps to the vertical center; positive voltage is up. */
export function uvToY(uv: number): number {
  return stripHeightPx() / 2 - (uv / 1000) * MM_PER_MV * PX_PER_MM;
}

export function renderStrip(ctx: Ctx2D, item: ItemView): void {
  if (item.samples_uv.length === 0) {
    throw new Error('cannot render an empty strip');
  }
  const duration = durationS(item);
  const width = stripWidthPx(duration);
  const height = stripHeightPx();

  ctx.fillStyle = '#fff7f7';
  ctx.fillRect(0, 0, width, height);

  ctx.strokeStyle = GRID_COLOR;
  ctx.lineWidth = 1;
  for (const t of timeGridlinesS(duration)) {
    const x = timeToX(t);
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, height);
    ctx.stroke();
  }
  for (const mv of ampGridlinesMv()) {
    const y = uvToY(mv * 1000);
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(width, y);
    ctx.stroke();
  }

  // Amplitude axis labels in mV along the left edge.
  ctx.fillStyle = LABEL_COLOR;
  ctx.font = '10px sans-serif';
  for (const mv of ampGridlinesMv()) {
    if (mv === 0 || Number.isInteger(mv)) {
      ctx.fillText(`${mv.toFixed(1)} mV`, 2, uvToY(mv * 1000) - 2);
    }
  }

  // One polyline vertex per sample: point count is preserved.
  ctx.strokeStyle = TRACE_COLOR;
  ctx.lineWidth = 1.25;
  ctx.beginPath();
  for (let i = 0; i < item.samples_uv.length; i++) {
    const x = timeToX(i / item.sampling_rate_hz);
    const y = uvToY(item.samples_uv[i]);
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  }
  ctx.stroke();
}
