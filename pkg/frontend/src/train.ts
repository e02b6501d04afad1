/**
 * Training harness: read artifacts, train the CNN, report metrics.
 *
 * Determinism: layer initializers and dropout take seeds from the model
 * config and tf's shuffling is driven by a seeded generator, but the
 * WASM kernels keep no further seed state; small run-to-run wobble is
 * expected and absorbed by the experiment tolerances.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";

import { LabelMode, labelUniverse, mapLabels, prepare } from "./data";
import { readClassReport, readMeta, readUlbd } from "./format";
import { Evaluation, evaluate } from "./metrics";
import { MODEL_CONFIG, ModelConfig, buildModel } from "./model";

export interface TrainConfig {
  trainPath: string;
  testPath: string;
  labelMode: LabelMode;
  /** class report JSON (required for extinction-class labels) */
  classReport?: string;
  epochs: number;
  batchSize: number;
  learningRate: number;
  /** learning rate is multiplied by decay at each of these epoch indices */
  lrDropEpochs: number[];
  lrDecay: number;
  seed: number;
  model?: Partial<ModelConfig>;
  /** stop early when test top-1 fails to improve this many evaluations */
  patience: number;
  reportPath?: string;
}

export const TRAIN_DEFAULTS = {
  epochs: 16,
  batchSize: 256,
  learningRate: 3e-3,
  lrDropEpochs: [8, 12],
  lrDecay: 0.4,
  seed: 1234,
  patience: 5,
};

export interface TrainReport {
  config: Record<string, unknown>;
  dataset: {
    train: string;
    test: string;
    n_train: number;
    n_test: number;
    n_points: number;
    label_mode: LabelMode;
    n_classes: number;
  };
  n_samples: number;
  topk_accuracy: Record<string, number>;
  confusion: { labels: number[]; matrix: number[][] };
  curves: {
    train_loss: number[];
    train_accuracy: number[];
    test_top1: number[];
  };
  epochs_run: number;
  elapsed_seconds: number;
}

let wasmReady: Promise<void> | null = null;

export function initBackend(): Promise<void> {
  if (!wasmReady) {
    wasmReady = (async () => {
      const wasm = require("@tensorflow/tfjs-backend-wasm");
      wasm.setWasmPaths(
        path.join(
          path.dirname(require.resolve("@tensorflow/tfjs-backend-wasm")),
          "/"
        )
      );
      await tf.setBackend("wasm");
      await tf.ready();
    })();
  }
  return wasmReady;
}

function seededShuffle(n: number, seed: number): Int32Array {
  // xorshift-based Fisher-Yates so epoch order is reproducible
  let state = (seed >>> 0) || 1;
  const next = () => {
    state ^= state << 13;
    state >>>= 0;
    state ^= state >> 17;
    state ^= state << 5;
    state >>>= 0;
    return state / 0xffffffff;
  };
  const order = new Int32Array(n);
  for (let i = 0; i < n; i++) order[i] = i;
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(next() * (i + 1));
    const t = order[i];
    order[i] = order[j];
    order[j] = t;
  }
  return order;
}

export async function trainEval(cfg: TrainConfig): Promise<TrainReport> {
  await initBackend();
  const started = Date.now();
  const modelCfg: ModelConfig = { ...MODEL_CONFIG, ...(cfg.model ?? {}), seed: cfg.seed };

  const trainDs = readUlbd(cfg.trainPath);
  const testDs = readUlbd(cfg.testPath);
  if (trainDs.nPoints !== testDs.nPoints) {
    throw new Error("train and test artifacts disagree in n_points");
  }
  const classOf = cfg.classReport
    ? readClassReport(cfg.classReport).class_of
    : undefined;
  const trainLabels = mapLabels(trainDs.labels, cfg.labelMode, classOf);
  const testLabels = mapLabels(testDs.labels, cfg.labelMode, classOf);
  const universe = labelUniverse(trainLabels, testLabels);
  const train = prepare(trainDs, trainLabels, universe, modelCfg);
  const test = prepare(testDs, testLabels, universe, modelCfg);
  const nClasses = universe.length;

  const model = buildModel(trainDs.nPoints, nClasses, modelCfg);
  const optimizer = tf.train.adam(cfg.learningRate);
  model.compile({
    optimizer,
    loss: "categoricalCrossentropy",
    metrics: ["accuracy"],
  });

  const xTrain = tf.tensor3d(train.patches, [
    train.nSamples,
    train.positions,
    train.kernel,
  ]);
  const yTrain = tf.oneHot(tf.tensor1d(train.indices, "int32"), nClasses);
  const xTest = tf.tensor3d(test.patches, [
    test.nSamples,
    test.positions,
    test.kernel,
  ]);

  const curves = {
    train_loss: [] as number[],
    train_accuracy: [] as number[],
    test_top1: [] as number[],
  };
  let best: Evaluation | null = null;
  let bestTop1 = -1;
  let sinceBest = 0;
  let epochsRun = 0;
  let lr = cfg.learningRate;

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    if (cfg.lrDropEpochs.includes(epoch)) {
      lr *= cfg.lrDecay;
      (optimizer as unknown as { learningRate: number }).learningRate = lr;
    }
    // reproducible epoch order: shuffle via gather on a seeded permutation
    const order = seededShuffle(train.nSamples, cfg.seed + 7919 * (epoch + 1));
    const orderT = tf.tensor1d(order, "int32");
    const xEpoch = tf.gather(xTrain, orderT);
    const yEpoch = tf.gather(yTrain, orderT);
    orderT.dispose();
    const history = await model.fit(xEpoch, yEpoch, {
      epochs: 1,
      batchSize: cfg.batchSize,
      verbose: 0,
      shuffle: false,
    });
    xEpoch.dispose();
    yEpoch.dispose();
    epochsRun = epoch + 1;
    const loss = Number(history.history.loss[0]);
    const acc = Number(history.history.acc[0]);

    const probsT = model.predict(xTest, { batchSize: 512 }) as tf.Tensor;
    const probs = new Float32Array(await probsT.data());
    probsT.dispose();
    const evalNow = evaluate(probs, nClasses, test.indices, test.labelValues);
    curves.train_loss.push(loss);
    curves.train_accuracy.push(acc);
    curves.test_top1.push(evalNow.topk[0]);
    process.stdout.write(
      `epoch ${epochsRun}/${cfg.epochs}: loss ${loss.toFixed(4)} ` +
        `trainAcc ${acc.toFixed(3)} testTop1 ${evalNow.topk[0].toFixed(4)}\n`
    );
    if (evalNow.topk[0] > bestTop1) {
      bestTop1 = evalNow.topk[0];
      best = evalNow;
      sinceBest = 0;
    } else {
      sinceBest += 1;
      if (sinceBest >= cfg.patience) {
        process.stdout.write("early stop: test top-1 plateau\n");
        break;
      }
    }
  }

  xTrain.dispose();
  yTrain.dispose();
  xTest.dispose();
  model.dispose();

  if (!best) {
    throw new Error("training produced no evaluation");
  }
  const report: TrainReport = {
    config: {
      train: cfg.trainPath,
      test: cfg.testPath,
      label_mode: cfg.labelMode,
      class_report: cfg.classReport ?? null,
      epochs: cfg.epochs,
      batch_size: cfg.batchSize,
      learning_rate: cfg.learningRate,
      lr_drop_epochs: cfg.lrDropEpochs,
      lr_decay: cfg.lrDecay,
      seed: cfg.seed,
      patience: cfg.patience,
      model: { ...modelCfg },
      backend: tf.getBackend(),
    },
    dataset: {
      train: cfg.trainPath,
      test: cfg.testPath,
      n_train: trainDs.nSamples,
      n_test: testDs.nSamples,
      n_points: trainDs.nPoints,
      label_mode: cfg.labelMode,
      n_classes: nClasses,
    },
    n_samples: best.nSamples,
    topk_accuracy: Object.fromEntries(
      best.topk.map((v, i) => [String(i + 1), v])
    ),
    confusion: { labels: best.labels, matrix: best.confusion },
    curves,
    epochs_run: epochsRun,
    elapsed_seconds: (Date.now() - started) / 1000,
  };
  if (cfg.reportPath) {
    fs.mkdirSync(path.dirname(path.resolve(cfg.reportPath)), { recursive: true });
    fs.writeFileSync(cfg.reportPath, JSON.stringify(report, null, 2));
  }
  return report;
}

/** Convenience used by tests and the acceptance runner. */
export function datasetSummary(datasetPath: string): Record<string, unknown> {
  const ds = readUlbd(datasetPath);
  const meta = fs.existsSync(
    datasetPath.replace(/\.[^./\\]+$/, "") + ".meta.json"
  )
    ? readMeta(datasetPath)
    : null;
  return {
    path: datasetPath,
    n_samples: ds.nSamples,
    n_points: ds.nPoints,
    window: [ds.twoThetaMin, ds.twoThetaMax],
    labels: [...new Set(ds.labels)].sort((a, b) => a - b).length,
    meta_kind: meta ? (meta as { kind?: string }).kind : null,
  };
}
