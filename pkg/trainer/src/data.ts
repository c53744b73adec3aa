/**
 * Reads the rasterizer's export format: a manifest.json listing, per
 * form, a target PNG (class indices 0-3), a binary text-mask PNG, and a
 * grayscale page PNG. Channel 0 of the model input is the text mask,
 * channel 1 the page image scaled to [0, 1].
 *
 * Pages can optionally be resized (nearest neighbour) to a smaller
 * square so desk-scale experiments stay cheap; 'textOnly' zeroes the
 * image channel, which is how the input ablation keeps a single
 * architecture across arms.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import * as tf from '@tensorflow/tfjs';
import { PNG } from 'pngjs';

import { NUM_CLASSES } from './loss';

export interface ManifestRecord {
  source_id: string;
  width: number;
  height: number;
  pad_right: number;
  pad_bottom: number;
  target: string;
  text: string;
  gray: string;
}

export interface Example {
  id: string;
  /** [1, S, S, 2] float32 */
  input: tf.Tensor4D;
  /** [1, S, S, 4] float32 one-hot */
  targetOneHot: tf.Tensor4D;
  targetClasses: Int32Array;
  height: number;
  width: number;
}

export interface LoadOptions {
  /** Resize to size x size (nearest); default keeps native padded dims. */
  size?: number;
  textOnly?: boolean;
  ids?: string[];
}

export function readManifest(dir: string): ManifestRecord[] {
  const file = path.join(dir, 'manifest.json');
  if (!fs.existsSync(file)) {
    throw new Error(`no manifest.json under ${dir}`);
  }
  return JSON.parse(fs.readFileSync(file, 'utf-8')) as ManifestRecord[];
}

/** Grayscale plane of a PNG as one byte per pixel. */
function readGrayPng(file: string): { data: Uint8Array; width: number; height: number } {
  const png = PNG.sync.read(fs.readFileSync(file));
  const out = new Uint8Array(png.width * png.height);
  for (let i = 0; i < out.length; i++) {
    out[i] = png.data[4 * i];
  }
  return { data: out, width: png.width, height: png.height };
}

/** Source index per output index for a nearest-neighbour resize. */
function nearestIndex(srcLength: number, outLength: number): Int32Array {
  const map = new Int32Array(outLength);
  for (let i = 0; i < outLength; i++) {
    map[i] = Math.floor((i * srcLength) / outLength);
  }
  return map;
}

function resizeNearest(
  src: Uint8Array,
  srcH: number,
  srcW: number,
  outH: number,
  outW: number,
): Uint8Array {
  if (srcH === outH && srcW === outW) {
    return src;
  }
  const rows = nearestIndex(srcH, outH);
  const cols = nearestIndex(srcW, outW);
  const out = new Uint8Array(outH * outW);
  for (let r = 0; r < outH; r++) {
    const base = rows[r] * srcW;
    for (let c = 0; c < outW; c++) {
      out[r * outW + c] = src[base + cols[c]];
    }
  }
  return out;
}

export function loadExample(
  dir: string,
  record: ManifestRecord,
  options: LoadOptions = {},
): Example {
  const target = readGrayPng(path.join(dir, record.target));
  const text = readGrayPng(path.join(dir, record.text));
  const gray = readGrayPng(path.join(dir, record.gray));
  if (
    text.width !== target.width ||
    text.height !== target.height ||
    gray.width !== target.width ||
    gray.height !== target.height
  ) {
    throw new Error(`${record.source_id}: channel PNG dimensions disagree`);
  }
  const outH = options.size ?? target.height;
  const outW = options.size ?? target.width;
  if (outH % 16 !== 0 || outW % 16 !== 0) {
    throw new Error(`${record.source_id}: ${outH}x${outW} is not a multiple of 16`);
  }

  const targetSmall = resizeNearest(target.data, target.height, target.width, outH, outW);
  const textSmall = resizeNearest(text.data, text.height, text.width, outH, outW);
  const graySmall = resizeNearest(gray.data, gray.height, gray.width, outH, outW);

  const pixels = outH * outW;
  const input = new Float32Array(pixels * 2);
  const hot = new Float32Array(pixels * NUM_CLASSES);
  const classes = new Int32Array(pixels);
  for (let i = 0; i < pixels; i++) {
    const cls = targetSmall[i];
    if (cls >= NUM_CLASSES) {
      throw new Error(
        `${record.source_id}: target has class value ${cls}, expected 0..3`,
      );
    }
    classes[i] = cls;
    hot[i * NUM_CLASSES + cls] = 1;
    input[2 * i] = textSmall[i] / 255;
    input[2 * i + 1] = options.textOnly ? 0 : graySmall[i] / 255;
  }
  return {
    id: record.source_id,
    input: tf.tensor4d(input, [1, outH, outW, 2]),
    targetOneHot: tf.tensor4d(hot, [1, outH, outW, NUM_CLASSES]),
    targetClasses: classes,
    height: outH,
    width: outW,
  };
}

export function loadDataset(dir: string, options: LoadOptions = {}): Example[] {
  let records = readManifest(dir);
  if (options.ids) {
    const wanted = new Set(options.ids);
    records = records.filter((r) => wanted.has(r.source_id));
    if (records.length !== wanted.size) {
      const found = new Set(records.map((r) => r.source_id));
      const missing = options.ids.filter((id) => !found.has(id));
      throw new Error(`manifest is missing ids: ${missing.join(', ')}`);
    }
  }
  return records.map((record) => loadExample(dir, record, options));
}

export function disposeDataset(examples: Example[]): void {
  for (const example of examples) {
    example.input.dispose();
    example.targetOneHot.dispose();
  }
}
