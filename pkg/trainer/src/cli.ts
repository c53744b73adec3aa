/**
 * Command line entry: `train` runs one configuration end to end and
 * writes a checkpoint; `ablate` runs one of the desk-scale experiment
 * presets. Exit codes: 0 success, 1 a preset missed its threshold,
 * 2 usage or environment problems.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import { parseArgs } from 'node:util';

import { UNet, Variant } from './arch';
import {
  AblationOptions,
  DEFAULT_OPTIONS,
  runInputAblation,
  runSubsetFit,
  runVariantComparison,
  splitIds,
} from './ablations';
import { disposeDataset, loadDataset } from './data';
import { DEFAULT_TRAIN, saveCheckpoint, trainModel } from './train';

const USAGE = `usage:
  cli train  --data DIR --out DIR [--seed N] [--scale S] [--variant V]
             [--size N] [--epochs N] [--patience N] [--text-only]
             [--train-count N] [--val-count N]
  cli ablate --data DIR --out DIR --preset subset|input|variant
             [--seed N] [--size N] [--epochs N] [--patience N]
             [--train-count N] [--val-count N]

--data points at a rasterizer export (manifest.json plus PNGs).`;

interface Common {
  data: string;
  out: string;
  seed: number;
  size: number;
  epochs?: number;
  patience: number;
  trainCount: number;
  valCount: number;
}

function parsed(argv: string[]) {
  return parseArgs({
    args: argv,
    options: {
      data: { type: 'string' },
      out: { type: 'string' },
      preset: { type: 'string' },
      seed: { type: 'string' },
      scale: { type: 'string' },
      variant: { type: 'string' },
      size: { type: 'string' },
      epochs: { type: 'string' },
      patience: { type: 'string' },
      'text-only': { type: 'boolean' },
      'train-count': { type: 'string' },
      'val-count': { type: 'string' },
    },
    allowPositionals: true,
  });
}

function toInt(raw: string | undefined, fallback: number, what: string): number {
  if (raw === undefined) {
    return fallback;
  }
  const value = Number(raw);
  if (!Number.isInteger(value) || value < 0) {
    throw new Error(`${what} must be a non-negative integer, got '${raw}'`);
  }
  return value;
}

function common(values: ReturnType<typeof parsed>['values']): Common {
  if (!values.data || !values.out) {
    throw new Error('--data and --out are required');
  }
  return {
    data: values.data,
    out: values.out,
    seed: toInt(values.seed, DEFAULT_OPTIONS.seed, '--seed'),
    size: toInt(values.size, DEFAULT_OPTIONS.size, '--size'),
    epochs: values.epochs === undefined ? undefined : toInt(values.epochs, 0, '--epochs'),
    patience: toInt(values.patience, DEFAULT_OPTIONS.patience, '--patience'),
    trainCount: toInt(values['train-count'], DEFAULT_OPTIONS.trainCount, '--train-count'),
    valCount: toInt(values['val-count'], DEFAULT_OPTIONS.valCount, '--val-count'),
  };
}

function cmdTrain(values: ReturnType<typeof parsed>['values']): number {
  const opts = common(values);
  const scale = values.scale === undefined ? 1 : Number(values.scale);
  if (!(scale > 0 && scale <= 1)) {
    throw new Error(`--scale must be in (0, 1], got '${values.scale}'`);
  }
  const variant = (values.variant ?? 'standard') as Variant;
  const ids = splitIds(opts.data, opts.trainCount, opts.valCount);
  const loadOptions = { size: opts.size, textOnly: values['text-only'] ?? false };
  const trainSet = loadDataset(opts.data, { ...loadOptions, ids: ids.train });
  const valSet = loadDataset(opts.data, { ...loadOptions, ids: ids.val });
  const model = new UNet({ widthScale: scale, variant, seed: opts.seed });
  try {
    const result = trainModel(
      model,
      trainSet,
      valSet,
      {
        ...DEFAULT_TRAIN,
        seed: opts.seed,
        maxEpochs: opts.epochs ?? DEFAULT_TRAIN.maxEpochs,
        patience: opts.patience,
      },
      {
        onEpoch: (r) =>
          console.log(
            `epoch ${r.epoch}: loss ${r.trainLoss.toFixed(4)} ` +
              `val mIoU ${r.valMiou.toFixed(4)} ` +
              `no-bg ${r.valMiouNoBackground.toFixed(4)}`,
          ),
      },
    );
    saveCheckpoint(model, path.join(opts.out, 'checkpoint'));
    fs.mkdirSync(opts.out, { recursive: true });
    fs.writeFileSync(
      path.join(opts.out, 'result.json'),
      JSON.stringify(result, null, 2) + '\n',
    );
    console.log(
      `best epoch ${result.bestEpoch}: val mIoU ${result.bestMiou.toFixed(4)}, ` +
        `without background ${result.bestMiouNoBackground.toFixed(4)}`,
    );
    return 0;
  } finally {
    model.dispose();
    disposeDataset(trainSet);
    disposeDataset(valSet);
  }
}

function cmdAblate(values: ReturnType<typeof parsed>['values']): number {
  const opts = common(values);
  const options: AblationOptions = {
    ...DEFAULT_OPTIONS,
    dataDir: opts.data,
    outDir: opts.out,
    seed: opts.seed,
    size: opts.size,
    trainCount: opts.trainCount,
    valCount: opts.valCount,
    patience: opts.patience,
    maxEpochs: opts.epochs ?? DEFAULT_OPTIONS.maxEpochs,
  };
  switch (values.preset) {
    case 'subset':
      return runSubsetFit(options) ? 0 : 1;
    case 'input':
      if (opts.epochs === undefined) {
        options.maxEpochs = 15;
      }
      return runInputAblation(options) ? 0 : 1;
    case 'variant':
      if (opts.epochs === undefined) {
        options.maxEpochs = 6;
      }
      runVariantComparison(options);
      return 0;
    default:
      throw new Error(`--preset must be subset, input, or variant`);
  }
}

export function main(argv: string[]): number {
  let command: string | undefined;
  try {
    const { values, positionals } = parsed(argv);
    command = positionals[0];
    switch (command) {
      case 'train':
        return cmdTrain(values);
      case 'ablate':
        return cmdAblate(values);
      default:
        console.error(USAGE);
        return 2;
    }
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    return 2;
  }
}

if (require.main === module) {
  process.exitCode = main(process.argv.slice(2));
}
