/**
 * UNet-style encoder/decoder for 4-class page segmentation.
 *
 * Nine stages of 3x3 conv -> ReLU -> batch norm pairs: four encoder
 * stages with max pooling, a bottleneck, and four decoder stages using
 * resize-convolution (nearest-neighbour x2 up-sampling, then conv) with
 * skip connections from the matching encoder stage. The 'ci-deformable'
 * variant swaps the bottleneck convolutions for channel-invariant
 * deformable ones whose offsets are predicted by a zero-initialized
 * side conv, so training starts from the standard-conv behaviour.
 */

import * as tf from '@tensorflow/tfjs';

import { ciDeformableConv, OFFSET_CHANNELS } from './deform';
import { batchNorm, BatchNormVars, conv3x3, maxPool2, upsample2 } from './math';

export type Variant = 'standard' | 'ci-deformable';

export interface ArchConfig {
  filters: number[];
  variant: Variant;
  widthScale: number;
  inputChannels: number;
  outputChannels: number;
  seed: number;
}

export const DEFAULT_FILTERS = [16, 32, 64, 128, 256, 128, 64, 32, 16];

export const DEFAULT_ARCH: ArchConfig = {
  filters: DEFAULT_FILTERS,
  variant: 'standard',
  widthScale: 1,
  inputChannels: 2,
  outputChannels: 4,
  seed: 0,
};

export function scaledFilters(cfg: ArchConfig): number[] {
  return cfg.filters.map((f) => Math.max(1, Math.round(f * cfg.widthScale)));
}

function validate(cfg: ArchConfig): void {
  if (cfg.filters.length !== 9) {
    throw new Error(`expected 9 stage widths, got ${cfg.filters.length}`);
  }
  for (let i = 0; i < 4; i++) {
    if (cfg.filters[i] !== cfg.filters[8 - i]) {
      throw new Error(
        `encoder/decoder widths must mirror: stage ${i} is ` +
          `${cfg.filters[i]}, stage ${8 - i} is ${cfg.filters[8 - i]}`,
      );
    }
  }
  if (cfg.variant !== 'standard' && cfg.variant !== 'ci-deformable') {
    throw new Error(`unknown conv variant '${cfg.variant}'`);
  }
}

interface ConvBlock {
  kernel: tf.Variable;
  bias: tf.Variable;
  bn: BatchNormVars;
  offsetKernel?: tf.Variable;
  offsetBias?: tf.Variable;
}

export class UNet {
  readonly cfg: ArchConfig;
  readonly widths: number[];
  readonly variables = new Map<string, tf.Variable>();
  private blocks = new Map<string, ConvBlock>();
  private initSeed: number;

  constructor(cfg: Partial<ArchConfig> = {}) {
    this.cfg = { ...DEFAULT_ARCH, ...cfg };
    validate(this.cfg);
    this.widths = scaledFilters(this.cfg);
    this.initSeed = this.cfg.seed;

    const w = this.widths;
    let channels = this.cfg.inputChannels;
    for (let i = 0; i < 4; i++) {
      channels = this.addStage(`enc${i}`, channels, w[i], false);
    }
    channels = this.addStage('bottleneck', channels, w[4],
      this.cfg.variant === 'ci-deformable');
    for (let i = 0; i < 4; i++) {
      // decoder sees the up-sampled path concatenated with the skip
      channels = this.addStage(`dec${i}`, channels + w[3 - i], w[5 + i], false);
    }
    // linear projection head; softmax provides the per-pixel normalization
    const he = tf.initializers.heNormal({ seed: this.nextSeed() });
    this.addVariable('head/kernel',
      he.apply([3, 3, channels, this.cfg.outputChannels]));
    this.addVariable('head/bias', tf.zeros([this.cfg.outputChannels]));
  }

  private nextSeed(): number {
    // distinct deterministic stream per weight tensor
    this.initSeed = (this.initSeed * 1103515245 + 12345) % 2147483647;
    return this.initSeed;
  }

  private addVariable(name: string, tensor: tf.Tensor, trainable = true): tf.Variable {
    // engine-level names must be globally unique, so let tf pick its own;
    // the map key is the name that matters to callers
    const variable = tf.variable(tensor, trainable);
    tensor.dispose();
    this.variables.set(name, variable);
    return variable;
  }

  private addConv(
    name: string,
    cin: number,
    cout: number,
    deformable: boolean,
  ): void {
    const he = tf.initializers.heNormal({ seed: this.nextSeed() });
    const block: ConvBlock = {
      kernel: this.addVariable(`${name}/kernel`, he.apply([3, 3, cin, cout])),
      bias: this.addVariable(`${name}/bias`, tf.zeros([cout])),
      bn: {
        gamma: this.addVariable(`${name}/gamma`, tf.ones([cout])),
        beta: this.addVariable(`${name}/beta`, tf.zeros([cout])),
        movingMean: this.addVariable(`${name}/moving_mean`, tf.zeros([cout]), false),
        movingVar: this.addVariable(`${name}/moving_var`, tf.ones([cout]), false),
      },
    };
    if (deformable) {
      block.offsetKernel = this.addVariable(
        `${name}/offset_kernel`,
        tf.zeros([3, 3, cin, OFFSET_CHANNELS]),
      );
      block.offsetBias = this.addVariable(
        `${name}/offset_bias`,
        tf.zeros([OFFSET_CHANNELS]),
      );
    }
    this.blocks.set(name, block);
  }

  // one conv block per stage width keeps the step count desk-sized
  private addStage(
    stage: string,
    cin: number,
    cout: number,
    deformable: boolean,
  ): number {
    this.addConv(`${stage}/conv`, cin, cout, deformable);
    return cout;
  }

  private runBlock(
    name: string,
    x: tf.Tensor4D,
    training: boolean,
  ): tf.Tensor4D {
    const block = this.blocks.get(name)!;
    let h: tf.Tensor4D;
    if (block.offsetKernel) {
      const offsets = conv3x3(
        x,
        block.offsetKernel as unknown as tf.Tensor4D,
        block.offsetBias as unknown as tf.Tensor1D,
      );
      h = ciDeformableConv(
        x,
        offsets,
        block.kernel as unknown as tf.Tensor4D,
        block.bias as unknown as tf.Tensor1D,
      );
    } else {
      h = conv3x3(
        x,
        block.kernel as unknown as tf.Tensor4D,
        block.bias as unknown as tf.Tensor1D,
      );
    }
    return batchNorm(tf.relu(h), block.bn, training);
  }

  private runStage(stage: string, x: tf.Tensor4D, training: boolean): tf.Tensor4D {
    return this.runBlock(`${stage}/conv`, x, training);
  }

  /** Per-pixel class probabilities, [B, H, W, 4]. */
  forward(x: tf.Tensor4D, training = false): tf.Tensor4D {
    const [, h, w, c] = x.shape;
    if (h % 16 !== 0 || w % 16 !== 0) {
      throw new Error(
        `input ${h}x${w} is not a multiple of 16; pad it first`,
      );
    }
    if (c !== this.cfg.inputChannels) {
      throw new Error(
        `expected ${this.cfg.inputChannels} input channels, got ${c}`,
      );
    }
    return tf.tidy(() => {
      const skips: tf.Tensor4D[] = [];
      let head = x;
      for (let i = 0; i < 4; i++) {
        head = this.runStage(`enc${i}`, head, training);
        skips.push(head);
        head = maxPool2(head);
      }
      head = this.runStage('bottleneck', head, training);
      for (let i = 0; i < 4; i++) {
        head = tf.concat([upsample2(head), skips[3 - i]], 3);
        head = this.runStage(`dec${i}`, head, training);
      }
      const logits = conv3x3(head,
        this.variables.get('head/kernel') as unknown as tf.Tensor4D,
        this.variables.get('head/bias') as unknown as tf.Tensor1D);
      return tf.softmax(logits, 3) as tf.Tensor4D;
    });
  }

  trainables(): tf.Variable[] {
    return [...this.variables.values()].filter((v) => v.trainable);
  }

  /** Sum of squared conv kernels times `factor` (biases and BN excluded). */
  l2Penalty(factor: number): tf.Scalar {
    return tf.tidy(() => {
      const terms: tf.Scalar[] = [];
      for (const [name, variable] of this.variables) {
        if (name.endsWith('kernel')) {
          terms.push(tf.sum(tf.square(variable)) as tf.Scalar);
        }
      }
      return tf.mul(tf.addN(terms), factor) as tf.Scalar;
    });
  }

  snapshot(): Map<string, tf.Tensor> {
    const out = new Map<string, tf.Tensor>();
    for (const [name, variable] of this.variables) {
      out.set(name, variable.clone());
    }
    return out;
  }

  restore(weights: Map<string, tf.Tensor>): void {
    for (const [name, tensor] of weights) {
      this.variables.get(name)!.assign(tensor);
    }
  }

  dispose(): void {
    for (const variable of this.variables.values()) {
      variable.dispose();
    }
    this.variables.clear();
    this.blocks.clear();
  }
}

export function countParameters(model: UNet): number {
  let total = 0;
  for (const variable of model.variables.values()) {
    total += variable.size;
  }
  return total;
}
