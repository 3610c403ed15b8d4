/** Strip rendering against a recording stub context: scales, grid, trace. */
import { describe, expect, it } from 'vitest';

import type { ItemView } from '../src/api';
import {
  AMP_GRID_MV, Ctx2D, MM_PER_MV, MM_PER_SECOND, PX_PER_MM, ampGridlinesMv,
  renderStrip, stripHeightPx, stripWidthPx, timeGridlinesS, timeToX, uvToY,
} from '../src/render';

interface Call {
  op: string;
  args: number[];
  text?: string;
}

function stubCtx(): { ctx: Ctx2D; calls: Call[] } {
  const calls: Call[] = [];
  const ctx: Ctx2D = {
    strokeStyle: '',
    fillStyle: '',
    lineWidth: 0,
    font: '',
    beginPath: () => calls.push({ op: 'beginPath', args: [] }),
    moveTo: (x, y) => calls.push({ op: 'moveTo', args: [x, y] }),
    lineTo: (x, y) => calls.push({ op: 'lineTo', args: [x, y] }),
    stroke: () => calls.push({ op: 'stroke', args: [] }),
    fillRect: (...args) => calls.push({ op: 'fillRect', args }),
    fillText: (text, x, y) => calls.push({ op: 'fillText', args: [x, y], text }),
  };
  return { ctx, calls };
}

function makeItem(nSamples: number, fs = 250, value: number | ((i: number) => number) = 0): ItemView {
  const f = typeof value === 'number' ? () => value : value;
  return {
    item_id: 'item',
    sampling_rate_hz: fs,
    samples_uv: Array.from({ length: nSamples }, (_, i) => f(i)),
    position: 0,
    total: 1,
  };
}

/** Trace vertices = moveTo/lineTo calls after the final beginPath. */
function traceVertices(calls: Call[]): Call[] {
  const lastBegin = calls.map((c) => c.op).lastIndexOf('beginPath');
  return calls.slice(lastBegin + 1).filter((c) => c.op === 'moveTo' || c.op === 'lineTo');
}

describe('display calibration', () => {
  it('uses 25 mm/s and 10 mm/mV', () => {
    expect(timeToX(1.0)).toBe(MM_PER_SECOND * PX_PER_MM);
    expect(uvToY(0) - uvToY(1000)).toBe(MM_PER_MV * PX_PER_MM);
  });

  it('10 s at 250 Hz draws 2500 points and 50 major time gridlines', () => {
    expect(timeGridlinesS(10.0)).toHaveLength(50);
    const { ctx, calls } = stubCtx();
    renderStrip(ctx, makeItem(2500, 250, (i) => Math.sin(i / 10) * 500));
    expect(traceVertices(calls)).toHaveLength(2500);
  });

  it('amplitude gridlines sit every 0.5 mV', () => {
    const grid = ampGridlinesMv();
    for (let i = 1; i < grid.length; i++) {
      expect(grid[i] - grid[i - 1]).toBeCloseTo(AMP_GRID_MV, 12);
    }
    expect(grid).toContain(0);
  });

  it('labels the amplitude axis in mV', () => {
    const { ctx, calls } = stubCtx();
    renderStrip(ctx, makeItem(250));
    const labels = calls.filter((c) => c.op === 'fillText').map((c) => c.text);
    expect(labels.some((t) => t?.includes('mV'))).toBe(true);
    expect(labels).toContain('0.0 mV');
  });
});

describe('waveform trace', () => {
  it('flatline renders as a horizontal line at the 0 mV baseline', () => {
    const { ctx, calls } = stubCtx();
    renderStrip(ctx, makeItem(250, 250, 0));
    const ys = traceVertices(calls).map((c) => c.args[1]);
    expect(new Set(ys).size).toBe(1);
    expect(ys[0]).toBe(uvToY(0));
    expect(ys[0]).toBe(stripHeightPx() / 2);
  });

  it('30 s segment keeps full width and point count (no resampling)', () => {
    const nSamples = 30 * 250;
    const { ctx, calls } = stubCtx();
    renderStrip(ctx, makeItem(nSamples, 250, (i) => i % 100));
    const verts = traceVertices(calls);
    expect(verts).toHaveLength(nSamples);
    expect(stripWidthPx(30)).toBe(30 * MM_PER_SECOND * PX_PER_MM);
    const lastX = verts[verts.length - 1].args[0];
    expect(lastX).toBeLessThanOrEqual(stripWidthPx(30));
    expect(lastX).toBeGreaterThan(stripWidthPx(30) * 0.99);
  });

  it('positive voltage is drawn above the baseline', () => {
    expect(uvToY(500)).toBeLessThan(uvToY(0));
  });

  it('rejects an empty strip', () => {
    const { ctx } = stubCtx();
    expect(() => renderStrip(ctx, makeItem(0))).toThrow('empty');
  });
});
